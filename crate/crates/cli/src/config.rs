//! Experiment configuration: a sectioned key-value file (TOML) with a
//! strict schema — unknown keys are rejected, every numeric range is
//! validated at load, and a run is fully reproducible from the file plus
//! the master seed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cgmc_core::kmc::TimeStepMode;
use cgmc_core::{ExternalField, FieldMode, LatticeSpec, MicroConfig, ModelError, PotentialModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid lattice/model: {0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub n_sites: usize,
    /// Coarse-graining ratios to simulate; 1 is the microscopic process.
    pub coarse_q: Vec<usize>,
    pub interaction_range: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub beta_j0: f64,
    #[serde(default = "default_d0")]
    pub d0: f64,
    /// Grouped desorption constant; mutually exclusive with `h`.
    pub c0: Option<f64>,
    /// Constant external field; mutually exclusive with `c0`.
    pub h: Option<f64>,
    #[serde(default = "default_shape")]
    pub shape: String,
}

fn default_d0() -> f64 {
    1.0
}

fn default_shape() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub sampling_dt: f64,
    #[serde(default = "default_threshold")]
    pub threshold_c_plus: f64,
    #[serde(default = "default_time_step")]
    pub time_step_mode: String,
    #[serde(default = "default_initial")]
    pub initial_state: String,
}

fn default_threshold() -> f64 {
    0.9
}

fn default_time_step() -> String {
    "paper".into()
}

fn default_initial() -> String {
    "empty".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSection {
    pub h_min: f64,
    pub h_max: f64,
    pub h_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeSection,
    pub model: ModelSection,
    pub run: RunSection,
    pub output: OutputSection,
    pub mean_field: Option<MeanFieldSection>,
}

/// How each realization starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Empty,
    /// Deterministic alternating occupancy at mean coverage 1/2.
    Half,
    Full,
    /// A contiguous island of this many occupied sites, centred.
    Island(usize),
}

impl InitialState {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        match text {
            "empty" => Ok(Self::Empty),
            "half" => Ok(Self::Half),
            "full" => Ok(Self::Full),
            other => {
                if let Some(width) = other.strip_prefix("island:") {
                    let width: usize = width
                        .parse()
                        .map_err(|_| invalid(format!("bad island width in '{other}'")))?;
                    Ok(Self::Island(width))
                } else {
                    Err(invalid(format!(
                        "initial_state '{other}' is not one of empty|half|full|island:<width>"
                    )))
                }
            }
        }
    }

    pub fn micro_config(&self, spec: &LatticeSpec) -> MicroConfig {
        let n = spec.n_sites();
        let spins: Vec<u8> = match *self {
            InitialState::Empty => vec![0; n],
            InitialState::Full => vec![1; n],
            InitialState::Half => (0..n).map(|x| (x % 2 == 0) as u8).collect(),
            InitialState::Island(width) => {
                let width = width.min(n);
                let start = (n - width) / 2;
                (0..n).map(|x| (x >= start && x < start + width) as u8).collect()
            }
        };
        MicroConfig::new(spins, spec).expect("constructed to lattice length")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok((config, text))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lattice.coarse_q.is_empty() {
            return Err(invalid("lattice.coarse_q must list at least one ratio"));
        }
        for &q in &self.lattice.coarse_q {
            // Constructing the spec enforces divisibility and range bounds.
            LatticeSpec::new(self.lattice.n_sites, q, self.lattice.interaction_range)?;
        }
        if self.model.shape != "uniform" {
            return Err(invalid(format!(
                "model.shape '{}' is not supported (only 'uniform')",
                self.model.shape
            )));
        }
        if self.model.c0.is_some() && self.model.h.is_some() {
            return Err(invalid("model.c0 and model.h are mutually exclusive"));
        }
        if !(self.model.beta_j0.is_finite()) {
            return Err(invalid("model.beta_j0 must be finite"));
        }
        self.potential_model()?;
        if !(self.run.t_final > 0.0) {
            return Err(invalid("run.t_final must be positive"));
        }
        if self.run.realizations == 0 {
            return Err(invalid("run.realizations must be at least 1"));
        }
        if !(self.run.sampling_dt > 0.0) {
            return Err(invalid("run.sampling_dt must be positive"));
        }
        if !(self.run.threshold_c_plus > 0.0 && self.run.threshold_c_plus <= 1.0) {
            return Err(invalid("run.threshold_c_plus must lie in (0, 1]"));
        }
        self.time_step_mode()?;
        InitialState::parse(&self.run.initial_state)?;
        for &t in &self.output.snapshot_times {
            if !(t >= 0.0) {
                return Err(invalid("output.snapshot_times must be non-negative"));
            }
        }
        if let Some(mf) = &self.mean_field {
            if mf.h_steps < 2 || !(mf.h_max > mf.h_min) {
                return Err(invalid("mean_field section needs h_max > h_min and h_steps >= 2"));
            }
        }
        Ok(())
    }

    /// `beta_j0` is the single coupling knob: β = 1, J0 = beta_j0.
    pub fn potential_model(&self) -> Result<PotentialModel, ConfigError> {
        let c0 = self.model.c0.unwrap_or(self.model.d0);
        Ok(PotentialModel::new(
            self.model.beta_j0,
            1.0,
            self.model.d0,
            c0,
        )?)
    }

    pub fn field_mode(&self) -> FieldMode {
        match (self.model.c0, self.model.h) {
            (Some(_), None) => FieldMode::Grouped,
            (None, Some(h)) => FieldMode::External(ExternalField::Constant(h)),
            _ => FieldMode::External(ExternalField::ZERO),
        }
    }

    pub fn time_step_mode(&self) -> Result<TimeStepMode, ConfigError> {
        match self.run.time_step_mode.as_str() {
            "paper" => Ok(TimeStepMode::Paper),
            "exponential" => Ok(TimeStepMode::Exponential),
            other => Err(invalid(format!(
                "run.time_step_mode '{other}' is not 'paper' or 'exponential'"
            ))),
        }
    }

    pub fn initial_state(&self) -> InitialState {
        InitialState::parse(&self.run.initial_state).expect("validated at load")
    }

    pub fn spec_for(&self, q: usize) -> LatticeSpec {
        LatticeSpec::new(self.lattice.n_sites, q, self.lattice.interaction_range)
            .expect("validated at load")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const GOOD: &str = r#"
[lattice]
n_sites = 200
coarse_q = [1, 10]
interaction_range = 20

[model]
beta_j0 = 6.0
c0 = 0.072

[run]
t_final = 50.0
realizations = 4
master_seed = 7
sampling_dt = 1.0

[output]
directory = "out"
"#;

    fn write_temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_validates() {
        let f = write_temp(GOOD);
        let (cfg, raw) = ExperimentConfig::load(f.path()).unwrap();
        assert_eq!(cfg.lattice.coarse_q, vec![1, 10]);
        assert_eq!(cfg.run.threshold_c_plus, 0.9);
        assert_eq!(cfg.field_mode(), FieldMode::Grouped);
        assert!(raw.contains("beta_j0"));
        let model = cfg.potential_model().unwrap();
        assert_eq!(model.j0, 6.0);
        assert_eq!(model.beta, 1.0);
    }

    #[test]
    fn rejects_unknown_keys() {
        let f = write_temp(&GOOD.replace("master_seed = 7", "master_seed = 7\nbogus_key = 1"));
        let err = ExperimentConfig::load(f.path());
        assert!(matches!(err, Err(ConfigError::Parse(_))));
    }

    #[test]
    fn rejects_bad_geometry_and_ranges() {
        let f = write_temp(&GOOD.replace("coarse_q = [1, 10]", "coarse_q = [7]"));
        assert!(ExperimentConfig::load(f.path()).is_err());
        let f = write_temp(&GOOD.replace("realizations = 4", "realizations = 0"));
        assert!(ExperimentConfig::load(f.path()).is_err());
        let f = write_temp(&GOOD.replace("t_final = 50.0", "t_final = -1.0"));
        assert!(ExperimentConfig::load(f.path()).is_err());
    }

    #[test]
    fn rejects_both_field_forms() {
        let f = write_temp(&GOOD.replace("c0 = 0.072", "c0 = 0.072\nh = 0.5"));
        assert!(ExperimentConfig::load(f.path()).is_err());
    }

    #[test]
    fn initial_state_forms() {
        let spec = LatticeSpec::new(10, 1, 2).unwrap();
        assert_eq!(
            InitialState::parse("island:4").unwrap().micro_config(&spec).spins(),
            &[0, 0, 0, 1, 1, 1, 1, 0, 0, 0]
        );
        assert_eq!(
            InitialState::parse("half").unwrap().micro_config(&spec).n_particles(),
            5
        );
        assert!(InitialState::parse("sideways").is_err());
    }
}
