//! Scenario files, run orchestration and persisted artifacts.
//!
//! A scenario is a TOML file naming a network file, material parameters,
//! the grid, the scales, the initial state and the output schedule; see
//! `docs/scenario.md` for the schema.

mod compare;
mod config;
mod network_file;
mod run;

pub use compare::{compare_models, compare_problems, Comparison, PairDistance};
pub use config::{
    GridConfig, InitialConfig, MaterialConfig, Quantity, Scale, ScalingConfig, ScenarioConfig,
    SolverConfig, TimeConfig,
};
pub use network_file::parse_network;
pub use run::{certify, read_report, run_scenario, Certificate, Conservation, Manifest, RunReport};

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::entropy::EntropyError;
use crate::grid::RadialGrid;
use crate::kinetics::ReactionNetwork;
use crate::poisson::{self, CHARGE_TOLERANCE};
use crate::rdd::{RddProblem, SolverError, StepControl};
use crate::scaling::{self, MaterialParams, ModelKind, ScalingError, ScalingPack};
use crate::trace::TraceError;

pub const DEFAULT_EPS_SMALL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}", parse_message(file, *line, field.as_deref(), message))]
    Parse {
        file: String,
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },
    #[error("invalid scenario ({invariant}): {message}")]
    Validation { invariant: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{model}: {source}")]
    Model { model: ModelKind, source: SolverError },
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn parse_message(file: &str, line: Option<usize>, field: Option<&str>, message: &str) -> String {
    let mut s = file.to_string();
    if let Some(l) = line {
        s += &format!(":{l}");
    }
    if let Some(f) = field {
        s += &format!(" [{f}]");
    }
    format!("{s}: {message}")
}

impl ScenarioError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioError::Parse { .. } => "parse",
            ScenarioError::Validation { .. } => "validation",
            ScenarioError::Io { .. } => "io",
            ScenarioError::Scaling(_) => "scaling",
            ScenarioError::Solver(_) | ScenarioError::Model { .. } => "solver",
            ScenarioError::Entropy(_) => "entropy",
            ScenarioError::Trace(_) | ScenarioError::Json(_) => "output",
        }
    }

    fn validation(invariant: &str, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            invariant: invariant.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// `1.5`, `2e-9`, or a number followed by one SI prefix
/// (`f p n u µ m k M G T`).
pub fn parse_quantity(text: &str) -> Result<f64, String> {
    let s = text.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let mut chars = s.chars();
    let last = chars.next_back().ok_or_else(|| "empty number".to_string())?;
    let scale = match last {
        'f' => 1e-15,
        'p' => 1e-12,
        'n' => 1e-9,
        'u' | 'µ' => 1e-6,
        'm' => 1e-3,
        'k' => 1e3,
        'M' => 1e6,
        'G' => 1e9,
        'T' => 1e12,
        _ => return Err(format!("`{s}` is not a number")),
    };
    chars
        .as_str()
        .trim()
        .parse::<f64>()
        .map(|v| v * scale)
        .map_err(|_| format!("`{s}` is not a number"))
}

/// Explicit model or regime classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRequest {
    Auto,
    Fixed(ModelKind),
}

impl std::str::FromStr for ModelRequest {
    type Err = ScalingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(ModelRequest::Auto)
        } else {
            s.parse().map(ModelRequest::Fixed)
        }
    }
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<ModelRequest>,
    pub eps_small: Option<f64>,
    pub seed: Option<u64>,
}

/// A validated scenario. Densities, grid and network are physical; the
/// run happens in the units of `scaling`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub source: Option<PathBuf>,
    pub network: ReactionNetwork<f64>,
    pub network_text: String,
    pub material: MaterialParams<f64>,
    pub grid: RadialGrid<f64>,
    pub scaling: ScalingPack<f64>,
    pub model: ModelKind,
    pub eps_small: f64,
    pub seed: u64,
    /// Physical initial densities, cell-major.
    pub initial: Vec<f64>,
    /// Output times in units of `scaling.time`.
    pub outputs: Vec<f64>,
    pub control: StepControl<f64>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario_with(path, &Overrides::default())
}

pub fn load_scenario_with(path: &Path, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    let config = ScenarioConfig::parse(&text, &path.display().to_string())?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut s = build(config, base, overrides)?;
    s.source = Some(path.to_path_buf());
    Ok(s)
}

/// Validates an in-memory configuration; relative file references resolve
/// against `base`.
pub fn build(config: ScenarioConfig, base: &Path, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    let net_path = base.join(&config.network);
    let network_text = std::fs::read_to_string(&net_path).map_err(|e| ScenarioError::Parse {
        file: net_path.display().to_string(),
        line: None,
        field: Some("network".into()),
        message: e.to_string(),
    })?;
    let network = parse_network(&network_text, &net_path.display().to_string())?;
    let k = network.species_count();

    let m = config.material.clone().unwrap_or_default();
    let mobility = m.mobility.clone().unwrap_or_else(|| vec![1.0; k]);
    if mobility.len() != k {
        return Err(ScenarioError::validation(
            "mobility",
            format!("{} mobilities for {k} species", mobility.len()),
        ));
    }
    let material = MaterialParams::new(
        m.permittivity.0,
        m.temperature.0,
        mobility,
        m.elementary_charge.0,
        m.boltzmann.0,
    )
    .map_err(|e| ScenarioError::validation("material", e.to_string()))?;

    let g = &config.grid;
    let grid = RadialGrid::geometric(g.radius.0, g.cells, g.ratio)
        .map_err(|e| ScenarioError::validation("grid", e.to_string()))?;

    let length = match config.scaling.length {
        Scale::Auto => 2.0 * g.radius.0,
        Scale::Value(q) => q.0,
    };
    let time = match config.scaling.time {
        Scale::Auto => scaling::diffusive_time(&material, length),
        Scale::Value(q) => q.0,
    };
    let pack = scaling::adimensionalize(&material, &network, length, time)?;

    let eps_small = overrides
        .eps_small
        .or(config.eps_small.map(|q| q.0))
        .unwrap_or(DEFAULT_EPS_SMALL);
    let request = match overrides.model {
        Some(r) => r,
        None => config
            .model
            .parse()
            .map_err(|e: ScalingError| ScenarioError::Parse {
                file: "scenario".into(),
                line: None,
                field: Some("model".into()),
                message: e.to_string(),
            })?,
    };
    let model = match request {
        ModelRequest::Fixed(m) => {
            if !(eps_small > 0.0 && eps_small <= 0.1) {
                return Err(ScalingError::EpsSmall(eps_small).into());
            }
            m
        }
        ModelRequest::Auto => scaling::classify_regime(&pack, eps_small)?,
    };
    let seed = overrides.seed.unwrap_or(config.seed);

    let initial = initial_densities(&config.initial, &grid, &network, seed, base)?;
    if let Some(i) = initial.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(ScenarioError::validation(
            "positivity",
            format!("initial density {} of cell {} is {}", i % k, i / k, initial[i]),
        ));
    }
    if model.has_drift() {
        let z = network.charges();
        let net_charge = grid.integrate(&poisson::charge_density(z, &initial, 1.0)).unwrap_or(f64::NAN);
        let gross = poisson::gross_charge(&grid, z, &initial, 1.0);
        if !(net_charge.abs() <= CHARGE_TOLERANCE * gross.max(f64::MIN_POSITIVE)) {
            return Err(ScenarioError::validation(
                "neutrality",
                format!("z . int n0 = {net_charge:e} but {model} couples to the potential"),
            ));
        }
    }

    let t = &config.time;
    if !(t.end.0 > 0.0) || t.outputs < 2 {
        return Err(ScenarioError::validation("time", "need end > 0 and at least 2 outputs"));
    }
    let end = t.end.0 / time;
    let outputs: Vec<f64> = (0..t.outputs)
        .map(|i| if i + 1 == t.outputs { end } else { end * i as f64 / (t.outputs - 1) as f64 })
        .collect();

    let sc = &config.solver;
    let mut control = StepControl::default();
    if let Some(v) = sc.rtol {
        control.rtol = v.0;
    }
    if let Some(v) = sc.atol {
        control.atol = v.0;
    }
    control.initial_step = sc.initial_step.map(|q| q.0 / time);
    control.max_step = sc.max_step.map(|q| q.0 / time);
    if let Some(n) = sc.max_steps {
        control.max_steps = n;
    }
    if !(control.rtol > 0.0 && control.atol > 0.0) {
        return Err(ScenarioError::validation("solver", "tolerances must be positive"));
    }

    Ok(Scenario {
        config,
        source: None,
        network,
        network_text,
        material,
        grid,
        scaling: pack,
        model,
        eps_small,
        seed,
        initial,
        outputs,
        control,
    })
}

fn initial_densities(
    init: &InitialConfig,
    grid: &RadialGrid<f64>,
    net: &ReactionNetwork<f64>,
    seed: u64,
    base: &Path,
) -> Result<Vec<f64>, ScenarioError> {
    let k = net.species_count();
    let per_species = |name: &str, v: &[Quantity]| -> Result<Vec<f64>, ScenarioError> {
        if v.len() != k {
            return Err(ScenarioError::validation(
                "initial",
                format!("`{name}` has {} entries for {k} species", v.len()),
            ));
        }
        Ok(v.iter().map(|q| q.0).collect())
    };
    match init {
        InitialConfig::Uniform { values } => {
            let v = per_species("values", values)?;
            Ok((0..grid.cells()).flat_map(|_| v.iter().copied()).collect())
        }
        InitialConfig::Equilibrium => Ok((0..grid.cells())
            .flat_map(|_| net.reference().iter().copied())
            .collect()),
        InitialConfig::Gaussian {
            background,
            amplitude,
            sigma,
            excess,
            noise,
        } => {
            let bg = per_species("background", background)?;
            let mut amp = per_species("amplitude", amplitude)?;
            if !(sigma.0 > 0.0) || !(*noise >= 0.0 && *noise < 1.0) {
                return Err(ScenarioError::validation("initial", "need sigma > 0 and 0 <= noise < 1"));
            }
            let shape: Vec<f64> = grid.centers().iter().map(|r| (-(r / sigma.0).powi(2)).exp()).collect();
            if *excess == config::Excess::Count {
                // amplitudes are carrier counts: scale the profile to unit integral
                let mass = grid.integrate(&shape).unwrap_or(1.0);
                for a in &mut amp {
                    *a /= mass;
                }
            }
            // one factor per cell, shared by all species, keeps the excess
            // charge balanced cell by cell
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let factors: Vec<f64> = shape
                .iter()
                .map(|_| if *noise > 0.0 { 1.0 + noise * rng.gen_range(-1.0..1.0) } else { 1.0 })
                .collect();
            Ok(shape
                .iter()
                .zip(&factors)
                .flat_map(|(g, f)| bg.iter().zip(&amp).map(move |(b, a)| b + a * g * f).collect::<Vec<_>>())
                .collect())
        }
        InitialConfig::File { path } => {
            let p = base.join(path);
            let text = std::fs::read_to_string(&p).map_err(|e| ScenarioError::Parse {
                file: p.display().to_string(),
                line: None,
                field: Some("initial.path".into()),
                message: e.to_string(),
            })?;
            let mut out = Vec::with_capacity(grid.cells() * k);
            let mut rd = csv::ReaderBuilder::new()
                .has_headers(false)
                .comment(Some(b'#'))
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            for (i, row) in rd.records().enumerate() {
                let row = row.map_err(|e| ScenarioError::Parse {
                    file: p.display().to_string(),
                    line: Some(i + 1),
                    field: None,
                    message: e.to_string(),
                })?;
                let parsed: Result<Vec<f64>, String> = row.iter().map(parse_quantity).collect();
                match parsed {
                    Ok(v) if v.len() == k => out.extend(v),
                    // a header row naming the species
                    Err(_) if i == 0 && row.iter().eq(net.species().iter().map(|s| s.as_str())) => {}
                    Ok(v) => {
                        return Err(ScenarioError::Parse {
                            file: p.display().to_string(),
                            line: Some(i + 1),
                            field: None,
                            message: format!("{} values for {k} species", v.len()),
                        })
                    }
                    Err(m) => {
                        return Err(ScenarioError::Parse {
                            file: p.display().to_string(),
                            line: Some(i + 1),
                            field: None,
                            message: m,
                        })
                    }
                }
            }
            if out.len() != grid.cells() * k {
                return Err(ScenarioError::validation(
                    "initial",
                    format!("{} rows for {} cells", out.len() / k, grid.cells()),
                ));
            }
            Ok(out)
        }
    }
}

impl Scenario {
    /// The dimensionless problem for `model`.
    pub fn problem(&self, model: ModelKind) -> Result<RddProblem<f64>, ScenarioError> {
        Ok(RddProblem::from_scaling(&self.grid, &self.network, model, &self.scaling)?)
    }

    /// Initial densities in run units (`u = n L^3`).
    pub fn initial_run_densities(&self) -> Vec<f64> {
        let v = self.scaling.length.powi(3);
        self.initial.iter().map(|n| n * v).collect()
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("1.5").unwrap(), 1.5);
        assert_eq!(parse_quantity(" 2e-3 ").unwrap(), 2e-3);
        assert!((parse_quantity("2.5n").unwrap() - 2.5e-9).abs() < 1e-24);
        assert_eq!(parse_quantity("40k").unwrap(), 4e4);
        assert_eq!(parse_quantity("3M").unwrap(), 3e6);
        assert!((parse_quantity("7µ").unwrap() - 7e-6).abs() < 1e-20);
        assert!(parse_quantity("3x").is_err());
        assert!(parse_quantity("").is_err());
        assert!(parse_quantity("k").is_err());
    }

    #[test]
    fn model_requests() {
        assert_eq!("auto".parse::<ModelRequest>().unwrap(), ModelRequest::Auto);
        assert_eq!(
            "KINETIC".parse::<ModelRequest>().unwrap(),
            ModelRequest::Fixed(ModelKind::Kinetic)
        );
        assert!("bogus".parse::<ModelRequest>().is_err());
    }
}
