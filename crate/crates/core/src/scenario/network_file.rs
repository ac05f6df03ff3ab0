//! Line-oriented network files.
//!
//! ```text
//! # name     charge  reference density
//! species: e   -1      1.2
//! species: h   +1      0.8
//! # reactant stoichiometry | product stoichiometry | rate
//! mechanism: 1 1 | 0 0 | 1.0
//! ```
//!
//! Blank lines and `#` comments are ignored. Numbers accept SI prefixes
//! (`2.5n`, `40k`). All species lines must precede the mechanisms.

use super::{parse_quantity, ScenarioError};
use crate::kinetics::{Mechanism, ReactionNetwork};

pub fn parse_network(text: &str, file: &str) -> Result<ReactionNetwork<f64>, ScenarioError> {
    let err = |line: usize, message: String| ScenarioError::Parse {
        file: file.to_string(),
        line: Some(line),
        field: None,
        message,
    };
    let mut species = Vec::new();
    let mut charges = Vec::new();
    let mut reference = Vec::new();
    let mut mechanisms = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, rest)) = content.split_once(':') else {
            return Err(err(line, format!("expected `species:` or `mechanism:`, found `{content}`")));
        };
        match key.trim() {
            "species" => {
                if !mechanisms.is_empty() {
                    return Err(err(line, "species must be declared before mechanisms".into()));
                }
                let fields: Vec<&str> = rest.split_whitespace().collect();
                let [name, charge, c] = fields[..] else {
                    return Err(err(line, "species needs `name charge reference`".into()));
                };
                if species.iter().any(|s| s == name) {
                    return Err(err(line, format!("duplicate species `{name}`")));
                }
                let z: i32 = charge
                    .trim_start_matches('+')
                    .parse()
                    .map_err(|_| err(line, format!("charge `{charge}` is not an integer")))?;
                let c = parse_quantity(c).map_err(|m| err(line, m))?;
                species.push(name.to_string());
                charges.push(z);
                reference.push(c);
            }
            "mechanism" => {
                let parts: Vec<&str> = rest.split('|').collect();
                let [a, b, rate] = parts[..] else {
                    return Err(err(line, "mechanism needs `reactants | products | rate`".into()));
                };
                let stoich = |s: &str| -> Result<Vec<u32>, ScenarioError> {
                    let v: Vec<u32> = s
                        .split_whitespace()
                        .map(|t| t.parse::<u32>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err(line, format!("bad stoichiometry `{}`", s.trim())))?;
                    if v.len() != species.len() {
                        return Err(err(
                            line,
                            format!("stoichiometry has {} entries for {} species", v.len(), species.len()),
                        ));
                    }
                    Ok(v)
                };
                let rate = parse_quantity(rate.trim()).map_err(|m| err(line, m))?;
                mechanisms.push((line, Mechanism::new(stoich(a)?, stoich(b)?, rate)));
            }
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }
    if species.is_empty() {
        return Err(ScenarioError::Parse {
            file: file.to_string(),
            line: None,
            field: None,
            message: "no species declared".into(),
        });
    }
    let lines: Vec<usize> = mechanisms.iter().map(|m| m.0).collect();
    ReactionNetwork::new(
        species,
        charges,
        reference,
        mechanisms.into_iter().map(|m| m.1).collect(),
    )
    .map_err(|e| {
        let line = match &e {
            crate::kinetics::KineticsError::NonPositiveRate { mechanism }
            | crate::kinetics::KineticsError::TrivialMechanism { mechanism }
            | crate::kinetics::KineticsError::ChargeImbalance { mechanism, .. } => lines.get(*mechanism).copied(),
            _ => None,
        };
        ScenarioError::Parse {
            file: file.to_string(),
            line,
            field: None,
            message: e.to_string(),
        }
    })
}
