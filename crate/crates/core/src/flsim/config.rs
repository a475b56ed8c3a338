use serde::{Deserialize, Serialize};

use crate::encode::EncodedAngle;
use crate::qagg::{Mitigation, DEFAULT_PROBES};
use crate::qcore::NoiseModel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    FedAvg,
    Qfl,
    NrQfl,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::FedAvg, Strategy::Qfl, Strategy::NrQfl];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::FedAvg => "fedavg",
            Strategy::Qfl => "qfl",
            Strategy::NrQfl => "nrqfl",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fedavg" => Ok(Strategy::FedAvg),
            "qfl" => Ok(Strategy::Qfl),
            "nrqfl" | "nr-qfl" => Ok(Strategy::NrQfl),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// How NR-QFL derives its per-round encoding bounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMode {
    /// One `(lo, hi)` pair spanning every parameter of every selected client.
    #[default]
    Uniform,
    /// A separate `(lo, hi)` pair per parameter.
    PerParameter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_clients: usize,
    pub samples_per_client: usize,
    /// Label skew in `[0, 1]`; 0 is near-IID.
    pub skew: f64,
    pub classes: usize,
    pub feature_dim: usize,
    /// Distance of each class mean from the origin, in feature units.
    pub class_separation: f64,
    pub test_samples_per_class: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
    pub strategies: Vec<Strategy>,
    pub noise: NoiseModel,
    /// Shots per participating client.
    pub shots: u64,
    pub repeats: usize,
    /// Mitigation applied by NR-QFL. QFL never mitigates.
    pub mitigation: Mitigation,
    pub bounds_mode: BoundsMode,
    /// NR-QFL widens its spanning bounds by this fraction of their width on
    /// each side.
    pub bounds_margin: f64,
    /// QFL encodes every weight in the fixed interval `[-qfl_bound, qfl_bound]`.
    pub qfl_bound: f64,
    pub n_servers: usize,
    /// Clients selected per round; `None` selects all of them.
    pub clients_per_round: Option<usize>,
    /// Aggregate with exact outcome probabilities instead of shots.
    pub exact: bool,
    pub probe_angles: Vec<f64>,
    /// Record measured wall time. Off by default so outputs are reproducible.
    pub record_wall_time: bool,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_clients: 5,
            samples_per_client: 200,
            skew: 0.7,
            classes: 5,
            feature_dim: 4,
            class_separation: 2.0,
            test_samples_per_class: 200,
            rounds: 50,
            local_epochs: 5,
            lr: 0.1,
            strategies: Strategy::ALL.to_vec(),
            noise: NoiseModel {
                p_depol: 0.05,
                gamma: 0.03,
                ..NoiseModel::noiseless()
            },
            shots: 1024,
            repeats: 4,
            mitigation: Mitigation::ALL,
            bounds_mode: BoundsMode::Uniform,
            bounds_margin: MARGIN,
            qfl_bound: 4.0,
            n_servers: 1,
            clients_per_round: None,
            exact: false,
            probe_angles: DEFAULT_PROBES.to_vec(),
            record_wall_time: false,
            output_dir: "results".into(),
        }
    }
}

const MARGIN: f64 = 0.2;

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn check_prob(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(key, format_args!("{v} is outside [0, 1]")))
    }
}

fn check_count(key: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(invalid(key, "must be at least 1"))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    /// Weight vector length of the multinomial logistic model.
    pub fn n_params(&self) -> usize {
        (self.feature_dim + 1) * self.classes
    }

    pub fn clients_per_round(&self) -> usize {
        self.clients_per_round.unwrap_or(self.n_clients)
    }

    /// Checks every field. Messages start with the offending key path.
    pub fn validate(&self) -> Result<()> {
        if self.n_clients < 2 {
            return Err(invalid("n_clients", "must be at least 2"));
        }
        check_count("samples_per_client", self.samples_per_client)?;
        check_prob("skew", self.skew)?;
        if self.classes < 2 {
            return Err(invalid("classes", "must be at least 2"));
        }
        if !(2..=8).contains(&self.feature_dim) {
            return Err(invalid("feature_dim", "must be in 2..=8"));
        }
        if !(self.class_separation.is_finite() && self.class_separation >= 0.0) {
            return Err(invalid("class_separation", "must be finite and non-negative"));
        }
        check_count("test_samples_per_class", self.test_samples_per_class)?;
        check_count("local_epochs", self.local_epochs)?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(invalid("lr", "must be positive and finite"));
        }
        if self.strategies.is_empty() {
            return Err(invalid("strategies", "must not be empty"));
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return Err(invalid("strategies", "contains duplicates"));
        }
        check_prob("noise.p_depol", self.noise.p_depol)?;
        check_prob("noise.p_deph", self.noise.p_deph)?;
        check_prob("noise.gamma", self.noise.gamma)?;
        check_prob("noise.readout_flip", self.noise.readout_flip)?;
        if !(self.noise.gate_jitter.is_finite() && self.noise.gate_jitter >= 0.0) {
            return Err(invalid("noise.gate_jitter", "must be finite and non-negative"));
        }
        if self.shots == 0 {
            return Err(invalid("shots", "must be at least 1"));
        }
        check_count("repeats", self.repeats)?;
        if !(self.bounds_margin.is_finite() && self.bounds_margin >= 0.0) {
            return Err(invalid("bounds_margin", "must be finite and non-negative"));
        }
        if !(self.qfl_bound.is_finite() && self.qfl_bound > 0.0) {
            return Err(invalid("qfl_bound", "must be positive and finite"));
        }
        check_count("n_servers", self.n_servers)?;
        if let Some(m) = self.clients_per_round {
            if m == 0 || m > self.n_clients {
                return Err(invalid("clients_per_round", "must be in 1..=n_clients"));
            }
        }
        if self.probe_angles.len() < 2 || self.probe_angles.iter().any(|a| !(0.0..=EncodedAngle::MAX).contains(a)) {
            return Err(invalid("probe_angles", "needs at least two angles in [0, pi/2]"));
        }
        Ok(())
    }
}
