use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BoundsMode, ExperimentConfig, Strategy};
use super::data::{make_partition, DataPartition};
use super::model::{evaluate, fedavg_aggregate, gradient_variance, local_train, ClientState, GlobalModel};
use crate::encode::WeightBounds;
use crate::qagg::{replicated_aggregate, AggregateOutput, AggregationConfig, Mitigation};
use crate::qselect::{select_clients, QuantumEntropy, SelectionVector, VonNeumann};
use crate::seed::{self, TAG_AGGREGATE, TAG_SELECT};
use crate::Result;

/// Bytes per transmitted weight.
pub const BYTES_PER_WEIGHT: u64 = 8;
/// Bytes per `(lo, hi)` bounds pair.
pub const BYTES_PER_BOUNDS: u64 = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub strategy: Strategy,
    pub accuracy: f64,
    pub f1: f64,
    pub grad_variance: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub selected: Vec<usize>,
    pub wall_ms: u64,
    /// RMS difference between the aggregate and the exact client mean.
    pub agg_error: f64,
    pub clipped: usize,
    /// Largest per-gate trace distance `D(ρ, E(ρ))` in the aggregation circuits.
    pub epsilon: Option<f64>,
    pub weights: Vec<f64>,
}

/// Bounds pairs sent per client per direction.
pub fn bounds_pairs(mode: BoundsMode, n_params: usize) -> u64 {
    match mode {
        BoundsMode::Uniform => 1,
        BoundsMode::PerParameter => n_params as u64,
    }
}

/// Uplink and downlink bytes of one round. Every participant uploads its
/// weights and receives the new global model; NR-QFL adds its bounds
/// metadata in both directions.
pub fn round_bytes(strategy: Strategy, mode: BoundsMode, n_params: usize, n_selected: usize) -> (u64, u64) {
    let weights = BYTES_PER_WEIGHT * n_params as u64 * n_selected as u64;
    let meta = match strategy {
        Strategy::NrQfl => BYTES_PER_BOUNDS * bounds_pairs(mode, n_params) * n_selected as u64,
        _ => 0,
    };
    (weights + meta, weights + meta)
}

/// Widens `b` by `margin` of its width on each side.
fn padded(b: WeightBounds, margin: f64) -> Result<WeightBounds> {
    WeightBounds::new(b.lo() - margin * b.width(), b.hi() + margin * b.width())
}

/// Shared experiment inputs. Every strategy sees the same partition and the
/// same selection stream.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub partition: DataPartition,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let partition = make_partition(
            cfg.n_clients,
            cfg.classes,
            cfg.feature_dim,
            cfg.samples_per_client,
            cfg.test_samples_per_class,
            cfg.class_separation,
            cfg.skew,
            cfg.seed,
        )?;
        Ok(Self { cfg, partition })
    }

    pub fn evaluate(&self, weights: &[f64]) -> Result<(f64, f64)> {
        evaluate(weights, &self.partition.test, self.cfg.classes)
    }

    /// Selection for round `t`, drawn from the entropy circuit on the
    /// configured noisy device.
    pub fn select(&self, t: usize) -> Result<SelectionVector> {
        let rng = seed::stream(self.cfg.seed, &[TAG_SELECT, t as u64]);
        let mut bits = VonNeumann::new(QuantumEntropy::new(&self.cfg.noise, rng)?);
        select_clients(self.cfg.n_clients, self.cfg.clients_per_round(), t, &mut bits)
    }

    fn aggregation_config(&self, strategy: Strategy, n_selected: usize) -> AggregationConfig {
        let cfg = &self.cfg;
        let (mitigation, repeats) = match strategy {
            Strategy::NrQfl => (cfg.mitigation, cfg.repeats),
            _ => (Mitigation::NONE, 1),
        };
        AggregationConfig {
            shots: cfg.shots,
            n_clients: n_selected,
            mitigation,
            repeats,
            exact: cfg.exact,
            probe_angles: cfg.probe_angles.clone(),
            ..AggregationConfig::default()
        }
    }

    fn bounds(&self, strategy: Strategy, locals: &[Vec<f64>]) -> Result<Vec<WeightBounds>> {
        let p = self.cfg.n_params();
        match (strategy, self.cfg.bounds_mode) {
            (Strategy::NrQfl, BoundsMode::Uniform) => {
                let b = padded(WeightBounds::spanning(locals.iter().flatten().copied())?, self.cfg.bounds_margin)?;
                Ok(vec![b; p])
            }
            (Strategy::NrQfl, BoundsMode::PerParameter) => (0..p)
                .map(|j| padded(WeightBounds::spanning(locals.iter().map(|v| v[j]))?, self.cfg.bounds_margin))
                .collect(),
            _ => Ok(vec![WeightBounds::new(-self.cfg.qfl_bound, self.cfg.qfl_bound)?; p]),
        }
    }

    /// Local training of every selected client from `global`, in parallel.
    pub fn train(&self, global: &GlobalModel, selection: &SelectionVector) -> Result<Vec<Vec<f64>>> {
        let cfg = &self.cfg;
        selection
            .selected
            .par_iter()
            .map(|&id| {
                let client = ClientState {
                    id,
                    data: &self.partition.clients[id],
                    classes: cfg.classes,
                    lr: cfg.lr,
                    epochs: cfg.local_epochs,
                };
                local_train(&client, global)
            })
            .collect()
    }

    /// Quantum aggregation of round `t` as performed by `strategy`, which
    /// must be QFL or NR-QFL.
    pub fn quantum_aggregate(&self, strategy: Strategy, t: usize, locals: &[Vec<f64>]) -> Result<AggregateOutput> {
        if strategy == Strategy::FedAvg {
            return Err(crate::Error::Config("fedavg has no quantum aggregation".into()));
        }
        let bounds = self.bounds(strategy, locals)?;
        let agg_cfg = self.aggregation_config(strategy, locals.len());
        replicated_aggregate(
            locals,
            &bounds,
            &agg_cfg,
            &self.cfg.noise,
            self.cfg.n_servers,
            seed::derive(self.cfg.seed, &[TAG_AGGREGATE, t as u64]),
        )
    }

    /// One federated round: select, train locally in parallel, aggregate per
    /// `strategy`, evaluate.
    pub fn run_round(&self, strategy: Strategy, global: &GlobalModel) -> Result<(GlobalModel, RoundRecord)> {
        let start = Instant::now();
        let cfg = &self.cfg;
        let t = global.round + 1;
        let selection = self.select(t)?;
        let locals = self.train(global, &selection)?;
        let sizes: Vec<usize> = selection.selected.iter().map(|&i| self.partition.clients[i].len()).collect();
        let exact_mean = fedavg_aggregate(&locals, &sizes)?;

        let (weights, clipped, epsilon) = match strategy {
            Strategy::FedAvg => (exact_mean.clone(), 0, None),
            Strategy::Qfl | Strategy::NrQfl => {
                let out = self.quantum_aggregate(strategy, t, &locals)?;
                (out.values, out.clipped, out.deviation.map(|d| d.epsilon))
            }
        };

        let agg_error = (weights.iter().zip(&exact_mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / weights.len() as f64)
            .sqrt();
        let updates: Vec<Vec<f64>> = locals
            .iter()
            .map(|w| w.iter().zip(&global.weights).map(|(a, b)| a - b).collect())
            .collect();
        let (accuracy, f1) = self.evaluate(&weights)?;
        let (bytes_up, bytes_down) = round_bytes(strategy, cfg.bounds_mode, weights.len(), locals.len());
        let wall_ms = if cfg.record_wall_time {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let record = RoundRecord {
            round: t,
            strategy,
            accuracy,
            f1,
            grad_variance: gradient_variance(&updates),
            bytes_up,
            bytes_down,
            selected: selection.selected,
            wall_ms,
            agg_error,
            clipped,
            epsilon,
            weights: weights.clone(),
        };
        Ok((GlobalModel { weights, round: t }, record))
    }

    /// Runs `cfg.rounds` rounds of `strategy` from zero weights, passing each
    /// record to `sink` as soon as it is produced. Returns the metrics of the
    /// initial model.
    pub fn run_with<F>(&self, strategy: Strategy, mut sink: F) -> Result<(f64, f64)>
    where
        F: FnMut(&RoundRecord) -> Result<()>,
    {
        let mut global = GlobalModel::zeros(self.cfg.n_params());
        let initial = self.evaluate(&global.weights)?;
        for _ in 0..self.cfg.rounds {
            let (next, record) = self.run_round(strategy, &global)?;
            sink(&record)?;
            global = next;
        }
        Ok(initial)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub strategy: Strategy,
    pub initial_accuracy: f64,
    pub initial_f1: f64,
    pub records: Vec<RoundRecord>,
}

impl ExperimentResult {
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(self.initial_accuracy, |r| r.accuracy)
    }

    pub fn final_f1(&self) -> f64 {
        self.records.last().map_or(self.initial_f1, |r| r.f1)
    }
}

/// Runs every configured strategy on a shared partition.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    let exp = Experiment::new(cfg.clone())?;
    cfg.strategies
        .iter()
        .map(|&strategy| {
            let mut records = Vec::with_capacity(cfg.rounds);
            let (initial_accuracy, initial_f1) = exp.run_with(strategy, |r| {
                records.push(r.clone());
                Ok(())
            })?;
            Ok(ExperimentResult {
                strategy,
                initial_accuracy,
                initial_f1,
                records,
            })
        })
        .collect()
}
