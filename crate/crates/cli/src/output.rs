use std::fs::File;
use std::path::{Path, PathBuf};

use nrqfl_core::flsim::{ExperimentConfig, RoundRecord, Strategy};
use serde::Serialize;

use crate::error::CliError;
use crate::suite::SUITE_VERSION;

pub const ROUNDS_HEADER: [&str; 9] = [
    "round",
    "strategy",
    "accuracy",
    "f1",
    "grad_variance",
    "bytes_up",
    "bytes_down",
    "selected",
    "wall_ms",
];

pub const SWEEP_HEADER: [&str; 11] = [
    "axis",
    "value",
    "circuit_variance",
    "strategy",
    "final_accuracy",
    "final_f1",
    "mean_agg_error",
    "agg_variance",
    "mean_grad_variance",
    "total_bytes_up",
    "total_bytes_down",
];

/// A file written under a temporary name and renamed into place on
/// [`Staged::commit`]. Dropped uncommitted, it removes the temporary.
pub struct Staged {
    tmp: PathBuf,
    dest: PathBuf,
    committed: bool,
}

impl Staged {
    pub fn new(dest: PathBuf) -> Self {
        let mut name = dest.file_name().unwrap_or_default().to_os_string();
        name.push(".partial");
        Self {
            tmp: dest.with_file_name(name),
            dest,
            committed: false,
        }
    }

    pub fn path(&self) -> &Path {
        &self.tmp
    }

    pub fn commit(mut self) -> Result<(), CliError> {
        std::fs::rename(&self.tmp, &self.dest)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_file(&self.tmp);
        }
    }
}

/// Streams round records as CSV rows.
pub struct RoundsWriter {
    writer: csv::Writer<File>,
    staged: Staged,
}

impl RoundsWriter {
    pub fn create(dest: PathBuf) -> Result<Self, CliError> {
        let staged = Staged::new(dest);
        let mut writer = csv::Writer::from_path(staged.path())?;
        writer.write_record(ROUNDS_HEADER)?;
        Ok(Self { writer, staged })
    }

    pub fn write(&mut self, r: &RoundRecord) -> Result<(), CliError> {
        let selected = r.selected.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        self.writer.write_record([
            r.round.to_string(),
            r.strategy.tag().to_string(),
            r.accuracy.to_string(),
            r.f1.to_string(),
            r.grad_variance.to_string(),
            r.bytes_up.to_string(),
            r.bytes_down.to_string(),
            selected,
            r.wall_ms.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        drop(self.writer);
        self.staged.commit()
    }
}

/// Per-strategy totals over a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub rounds: usize,
    pub initial_accuracy: f64,
    pub initial_f1: f64,
    pub final_accuracy: f64,
    pub final_f1: f64,
    pub mean_grad_variance: f64,
    pub mean_agg_error: f64,
    /// Mean over rounds of the mean squared deviation of the aggregate from
    /// the exact client mean.
    pub agg_variance: f64,
    pub total_bytes_up: u64,
    pub total_bytes_down: u64,
}

impl StrategySummary {
    pub fn new(strategy: Strategy, initial: (f64, f64)) -> Self {
        Self {
            strategy,
            rounds: 0,
            initial_accuracy: initial.0,
            initial_f1: initial.1,
            final_accuracy: initial.0,
            final_f1: initial.1,
            mean_grad_variance: 0.0,
            mean_agg_error: 0.0,
            agg_variance: 0.0,
            total_bytes_up: 0,
            total_bytes_down: 0,
        }
    }

    /// Folds in the next record.
    pub fn push(&mut self, r: &RoundRecord) {
        let k = self.rounds as f64;
        let mean = |old: f64, x: f64| (old * k + x) / (k + 1.0);
        self.mean_grad_variance = mean(self.mean_grad_variance, r.grad_variance);
        self.mean_agg_error = mean(self.mean_agg_error, r.agg_error);
        self.agg_variance = mean(self.agg_variance, r.agg_error * r.agg_error);
        self.final_accuracy = r.accuracy;
        self.final_f1 = r.f1;
        self.total_bytes_up += r.bytes_up;
        self.total_bytes_down += r.bytes_down;
        self.rounds += 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary<'a> {
    pub invariant_suite_version: &'static str,
    pub config: &'a ExperimentConfig,
    pub strategies: &'a [StrategySummary],
    /// Total NR-QFL bytes over QFL bytes minus one, when both ran.
    pub communication_overhead: Option<f64>,
}

pub fn communication_overhead(strategies: &[StrategySummary]) -> Option<f64> {
    let total = |s: Strategy| {
        strategies
            .iter()
            .find(|x| x.strategy == s)
            .map(|x| (x.total_bytes_up + x.total_bytes_down) as f64)
    };
    match (total(Strategy::NrQfl), total(Strategy::Qfl)) {
        (Some(nr), Some(q)) if q > 0.0 => Some(nr / q - 1.0),
        _ => None,
    }
}

pub fn write_summary(dest: PathBuf, cfg: &ExperimentConfig, strategies: &[StrategySummary]) -> Result<(), CliError> {
    let summary = Summary {
        invariant_suite_version: SUITE_VERSION,
        config: cfg,
        strategies,
        communication_overhead: communication_overhead(strategies),
    };
    let staged = Staged::new(dest);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(staged.path(), text)?;
    staged.commit()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    /// Empirical variance of the decoded aggregate of one sweep circuit.
    pub circuit_variance: f64,
    pub summary: StrategySummary,
}

pub fn write_sweep(dest: PathBuf, rows: &[SweepRow]) -> Result<(), CliError> {
    let staged = Staged::new(dest);
    let mut w = csv::Writer::from_path(staged.path())?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let s = &r.summary;
        w.write_record([
            r.axis.clone(),
            r.value.to_string(),
            r.circuit_variance.to_string(),
            s.strategy.tag().to_string(),
            s.final_accuracy.to_string(),
            s.final_f1.to_string(),
            s.mean_agg_error.to_string(),
            s.agg_variance.to_string(),
            s.mean_grad_variance.to_string(),
            s.total_bytes_up.to_string(),
            s.total_bytes_down.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);
    staged.commit()
}
