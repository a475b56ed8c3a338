use std::path::PathBuf;

use nrqfl_core::flsim::{Experiment, ExperimentConfig};
use nrqfl_core::qagg::{measure_variance, VarianceConfig, MAX_DEPTH};
use nrqfl_core::seed;

use crate::error::{CliError, EXIT_OK, EXIT_VALIDATION};
use crate::output::{write_summary, write_sweep, RoundsWriter, StrategySummary, SweepRow};
use crate::suite::{run_suite, Check, SuiteOptions};

/// Runs every configured strategy, streaming `rounds.csv`, then writes
/// `summary.json`. Nothing is left behind if a run fails.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<StrategySummary>, CliError> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out)?;
    let mut rounds = RoundsWriter::create(out.join("rounds.csv"))?;
    let summaries = run_strategies(cfg, |r| rounds.write(r))?;
    rounds.finish()?;
    write_summary(out.join("summary.json"), cfg, &summaries)?;
    Ok(summaries)
}

fn run_strategies<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<Vec<StrategySummary>, CliError>
where
    F: FnMut(&nrqfl_core::flsim::RoundRecord) -> Result<(), CliError>,
{
    let exp = Experiment::new(cfg.clone())?;
    let mut summaries = Vec::with_capacity(cfg.strategies.len());
    for &strategy in &cfg.strategies {
        let mut records = Vec::new();
        let initial = exp.run_with(strategy, |r| {
            records.push(r.clone());
            Ok(())
        })?;
        let mut s = StrategySummary::new(strategy, initial);
        for r in &records {
            sink(r)?;
            s.push(r);
        }
        summaries.push(s);
    }
    Ok(summaries)
}

pub fn cmd_validate(opts: &SuiteOptions) -> (i32, Vec<Check>) {
    let checks = run_suite(opts);
    let code = if checks.iter().all(|c| c.passed) {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    };
    (code, checks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepAxis {
    /// Shots per client.
    Shots,
    /// Aggregation depth, varied through the client count.
    Depth,
    /// Depolarizing probability per gate.
    Noise,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Shots => "shots",
            SweepAxis::Depth => "depth",
            SweepAxis::Noise => "noise",
        }
    }

    /// Copy of `cfg` with the axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, CliError> {
        let mut c = cfg.clone();
        let count = |v: f64| -> Result<u64, CliError> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(CliError::Config(format!("{}: {v} is not a positive integer", self.name())))
            }
        };
        match self {
            SweepAxis::Shots => c.shots = count(value)?,
            SweepAxis::Depth => {
                c.n_clients = count(value)? as usize;
                c.clients_per_round = None;
            }
            SweepAxis::Noise => c.noise.p_depol = value,
        }
        c.validate().map_err(|e| CliError::Config(format!("{} = {value}: {e}", self.name())))?;
        Ok(c)
    }
}

/// Runs one experiment per axis value and writes `sweep.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if values.len() < 2 {
        return Err(CliError::Config("sweep needs at least two values".into()));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>, _>>()?;
    let out = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out)?;
    let mut rows = Vec::new();
    for (c, &value) in configs.iter().zip(values) {
        let circuit_variance = circuit_variance(c)?;
        for summary in run_strategies(c, |_| Ok(()))? {
            rows.push(SweepRow {
                axis: axis.name().into(),
                value,
                circuit_variance,
                summary,
            });
        }
    }
    write_sweep(out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

/// Client angles shared by every point of a sweep.
const SWEEP_ANGLES: [f64; MAX_DEPTH] = [0.31, 1.12, 0.67, 0.94, 0.45, 1.27, 0.58, 0.83, 1.03];

/// Trials behind [`circuit_variance`].
pub const CIRCUIT_TRIALS: usize = 1000;

/// Empirical variance of the raw decoded aggregate of one circuit at the
/// configured shots and noise, with depth equal to the clients per round
/// (capped at one circuit).
pub fn circuit_variance(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    let n = cfg.clients_per_round().min(MAX_DEPTH);
    let vc = VarianceConfig {
        shots_per_client: cfg.shots,
        depth: n,
        angles: SWEEP_ANGLES[..n].to_vec(),
    };
    let point = measure_variance(&vc, &cfg.noise, CIRCUIT_TRIALS, seed::derive(cfg.seed, &[seed::TAG_PROBE]))?;
    Ok(point.empirical)
}
