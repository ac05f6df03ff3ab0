use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{parse_quantity, ScenarioError};

/// A number, or a string with an SI prefix (`"2.5n"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity(pub f64);

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Quantity(v as f64)),
            Repr::Float(v) => Ok(Quantity(v)),
            Repr::Text(s) => parse_quantity(&s).map(Quantity).map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

/// `"auto"` or a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Auto,
    Value(Quantity),
}

impl<'de> Deserialize<'de> for Scale {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Scale::Value(Quantity(v as f64))),
            Repr::Float(v) => Ok(Scale::Value(Quantity(v))),
            Repr::Text(s) if s.eq_ignore_ascii_case("auto") => Ok(Scale::Auto),
            Repr::Text(s) => parse_quantity(&s)
                .map(|v| Scale::Value(Quantity(v)))
                .map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Scale {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Scale::Auto => s.serialize_str("auto"),
            Scale::Value(q) => q.serialize(s),
        }
    }
}

impl Default for Scale {
    fn default() -> Self {
        Scale::Value(Quantity(1.0))
    }
}

fn one() -> Quantity {
    Quantity(1.0)
}

fn unit_ratio() -> f64 {
    1.0
}

fn auto() -> String {
    "auto".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Network file, relative to the scenario file.
    pub network: String,
    /// A model name or `"auto"`.
    #[serde(default = "auto")]
    pub model: String,
    #[serde(default)]
    pub eps_small: Option<Quantity>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub material: Option<MaterialConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// SI or dimensionless material constants; every entry defaults to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default = "one")]
    pub permittivity: Quantity,
    #[serde(default = "one")]
    pub temperature: Quantity,
    #[serde(default = "one")]
    pub elementary_charge: Quantity,
    #[serde(default = "one")]
    pub boltzmann: Quantity,
    /// Diagonal of the mobility matrix; defaults to ones.
    #[serde(default)]
    pub mobility: Option<Vec<f64>>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            permittivity: one(),
            temperature: one(),
            elementary_charge: one(),
            boltzmann: one(),
            mobility: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub radius: Quantity,
    pub cells: usize,
    /// Ratio of consecutive shell widths; `1` is uniform.
    #[serde(default = "unit_ratio")]
    pub ratio: f64,
}

/// Characteristic length and time. `"auto"` picks `L = 2R` and the
/// diffusive time `T = e L^2 / (k_B theta mu)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default)]
    pub length: Scale,
    #[serde(default)]
    pub time: Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Excess {
    /// Amplitudes are peak densities.
    #[default]
    Peak,
    /// Amplitudes are carrier counts.
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Uniform {
        values: Vec<Quantity>,
    },
    /// The reference state of the network in every cell.
    Equilibrium,
    /// `background + amplitude exp(-r^2 / sigma^2)` per species, the
    /// profile multiplied cell by cell by `1 + noise U(-1, 1)`.
    Gaussian {
        background: Vec<Quantity>,
        amplitude: Vec<Quantity>,
        sigma: Quantity,
        #[serde(default)]
        excess: Excess,
        #[serde(default)]
        noise: f64,
    },
    /// CSV with one row per cell and one column per species.
    File {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// End time, in the units of `scaling.time`'s reference (seconds for
    /// physical scenarios).
    pub end: Quantity,
    /// Number of equally spaced records including `t = 0` and `end`.
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub rtol: Option<Quantity>,
    pub atol: Option<Quantity>,
    pub initial_step: Option<Quantity>,
    pub max_step: Option<Quantity>,
    pub max_steps: Option<usize>,
}

impl ScenarioConfig {
    pub fn parse(text: &str, file: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ScenarioError::Parse {
                file: file.to_string(),
                line,
                field: None,
                message: e.message().to_string(),
            }
        })
    }
}
