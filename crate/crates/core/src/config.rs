//! TOML run configuration. The `[[runs]]` rows carry the same columns as a
//! run-parameter table: L, N_sweep, N_met, number of temperatures, T_min,
//! T_max.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::Convention;
use crate::circuit::ReductionTarget;
use crate::error::{config, Error, Result};
use crate::hamiltonian::Geometry;
use crate::model::ModelKind;
use crate::noise::{CouplingSet, NoiseRates};
use crate::observables::Averaging;
use crate::ptmc::RunParameters;

pub const DEFAULT_DISORDER_SAMPLES: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub master_seed: u64,
    #[serde(default = "default_samples")]
    pub n_disorder_samples: usize,
    pub output_dir: PathBuf,
    pub convention: Convention,
    /// Thermalization rounds of `n_met` sweeps each.
    #[serde(default = "default_thermalization")]
    pub thermalization_sweeps: u64,
    #[serde(default = "one")]
    pub bin_interval: u64,
    /// Checkpoint every this many steps (thermalization rounds plus
    /// iterations); 0 disables periodic checkpoints.
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: u64,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub averaging: Averaging,
    pub noise: NoiseSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<CouplingSet>,
    pub runs: Vec<RunEntry>,
}

fn default_samples() -> usize {
    DEFAULT_DISORDER_SAMPLES
}

fn default_thermalization() -> u64 {
    RunParameters::DEFAULT_THERMALIZATION
}

fn default_checkpoint() -> u64 {
    1000
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSource {
    Symmetric {
        p: f64,
    },
    Explicit {
        #[serde(flatten)]
        rates: NoiseRates,
    },
    Circuit {
        p: f64,
        target: ReductionTarget,
    },
}

impl NoiseSource {
    /// Physical error rate behind the source, where there is a single one.
    pub fn p(&self) -> Option<f64> {
        match self {
            NoiseSource::Symmetric { p } | NoiseSource::Circuit { p, .. } => Some(*p),
            NoiseSource::Explicit { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunEntry {
    #[serde(rename = "L")]
    pub size: usize,
    pub n_sweep: u64,
    pub n_met: u64,
    /// Number of temperatures on the ladder.
    pub t_step: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()).with_span(text, e.span()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_disorder_samples == 0 {
            return Err(config("n_disorder_samples", "must be at least 1"));
        }
        if self.bin_interval == 0 {
            return Err(config("bin_interval", "must be at least 1"));
        }
        match &self.noise {
            NoiseSource::Symmetric { p } | NoiseSource::Circuit { p, .. } => {
                if !(0.0..1.0).contains(p) {
                    return Err(config("noise.p", format!("must lie in [0, 1), got {p}")));
                }
            }
            NoiseSource::Explicit { rates } => {
                rates.validate().map_err(|e| config("noise", e.to_string()))?;
            }
        }
        if let NoiseSource::Circuit { .. } = self.noise {
            if !matches!(self.model, ModelKind::Rpgm | ModelKind::Rcpgm) {
                return Err(config("noise.kind", "circuit noise needs model rpgm or rcpgm"));
            }
        }
        if let Some(c) = &self.couplings {
            for t in self.model.terms() {
                let v = c.magnitude(*t);
                if v.is_nan() || v < 0.0 {
                    return Err(config(format!("couplings.{}", t.name()), format!("must be non-negative, got {v}")));
                }
            }
            if !c.jq_bias.is_finite() {
                return Err(config("couplings.jq_bias", format!("must be finite, got {}", c.jq_bias)));
            }
        }
        if self.runs.is_empty() {
            return Err(config("runs", "at least one run is required"));
        }
        for (i, r) in self.runs.iter().enumerate() {
            let f = |name: &str| format!("runs[{i}].{name}");
            if r.size < 2 {
                return Err(config(f("L"), format!("must be at least 2, got {}", r.size)));
            }
            if r.n_met == 0 {
                return Err(config(f("n_met"), "must be at least 1"));
            }
            if r.t_step < 2 {
                return Err(config(f("t_step"), format!("must be at least 2, got {}", r.t_step)));
            }
            if !(r.t_min > 0.0) {
                return Err(config(f("t_min"), format!("must be positive, got {}", r.t_min)));
            }
            if !(r.t_min < r.t_max) || !r.t_max.is_finite() {
                return Err(config(
                    f("t_min"),
                    format!("must be below t_max ({} >= {})", r.t_min, r.t_max),
                ));
            }
        }
        Ok(())
    }

    pub fn run_parameters(&self, run: usize, seed: u64) -> RunParameters {
        let r = &self.runs[run];
        RunParameters {
            thermalization_sweeps: self.thermalization_sweeps,
            n_sweep: r.n_sweep,
            n_met: r.n_met,
            bin_interval: self.bin_interval,
            seed,
        }
    }
}

impl Error {
    fn with_span(self, text: &str, span: Option<std::ops::Range<usize>>) -> Error {
        match (self, span) {
            (Error::Parse(msg), Some(span)) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                Error::Parse(format!("line {line}: {msg}"))
            }
            (e, _) => e,
        }
    }
}
