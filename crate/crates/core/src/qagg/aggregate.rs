use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mitigate::{calibrate, inversion_factor, TransferFunction, DEFAULT_PROBES};
use super::plan::{
    build_plan, draw_jitter, read_out, simulate_register, CircuitPlan, NoiseDeviation, Readout,
    MAX_DEPTH,
};
use crate::encode::{angle_from_prob_one, angle_from_z, denormalize, normalize_clipped, WeightBounds};
use crate::qcore::{NoiseModel, MAX_QUBITS};
use crate::seed::{self, Rng, TAG_AGGREGATE, TAG_CALIBRATE, TAG_SERVER};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mitigation {
    /// Average the readout over `repeats` independent executions.
    pub measurement_averaging: bool,
    /// Divide out the known depolarizing contraction.
    pub channel_inversion: bool,
    /// Invert a probe-fitted affine transfer function.
    pub calibration: bool,
}

impl Mitigation {
    pub const NONE: Self = Self {
        measurement_averaging: false,
        channel_inversion: false,
        calibration: false,
    };
    pub const ALL: Self = Self {
        measurement_averaging: true,
        channel_inversion: true,
        calibration: true,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    /// Measurement shots per participating client; a circuit aggregating
    /// `N` clients is measured `N·shots` times.
    pub shots: u64,
    /// Client count assumed by [`AggregationConfig::variance_bound`].
    pub n_clients: usize,
    pub mitigation: Mitigation,
    /// Independent executions averaged when measurement averaging is on.
    pub repeats: usize,
    pub sigma_shot: f64,
    pub sigma_gate: f64,
    /// Parameters simulated side by side in one register.
    pub max_qubits_per_batch: usize,
    /// Use exact outcome probabilities instead of sampled shots.
    pub exact: bool,
    pub probe_angles: Vec<f64>,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            shots: 1024,
            n_clients: 5,
            mitigation: Mitigation::NONE,
            repeats: 1,
            sigma_shot: 0.5,
            sigma_gate: 0.0,
            max_qubits_per_batch: 1,
            exact: false,
            probe_angles: DEFAULT_PROBES.to_vec(),
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::ZeroShots);
        }
        if self.n_clients == 0 {
            return Err(Error::NoClients);
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if !(1..=MAX_QUBITS).contains(&self.max_qubits_per_batch) {
            return Err(Error::Config(format!(
                "max_qubits_per_batch must be in 1..={MAX_QUBITS}"
            )));
        }
        Ok(())
    }

    fn effective_repeats(&self) -> usize {
        if self.mitigation.measurement_averaging {
            self.repeats
        } else {
            1
        }
    }

    fn readout(&self, group_size: usize) -> Readout {
        if self.exact {
            Readout::Exact
        } else {
            Readout::Shots(self.shots * group_size as u64)
        }
    }

    /// Theoretical variance bound for this configuration at depth `d`.
    pub fn variance_bound(&self, depth: usize) -> f64 {
        super::theory::variance_bound(self.sigma_shot, self.sigma_gate, self.shots, self.n_clients, depth)
    }
}

/// Result of one aggregation call.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateOutput {
    /// Mitigated aggregate per parameter, in weight units.
    pub values: Vec<f64>,
    /// Decoded aggregate before any mitigation, in weight units.
    pub raw_values: Vec<f64>,
    /// Client values that fell outside their bounds and were clamped.
    pub clipped: usize,
    /// Largest per-gate trace-distance deviation observed, if any noise acted.
    pub deviation: Option<NoiseDeviation>,
    /// Calibration fitted per circuit depth.
    pub transfers: BTreeMap<usize, TransferFunction>,
}

/// Splits `n` clients into consecutive groups of at most [`MAX_DEPTH`].
pub fn client_groups(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n)
        .step_by(MAX_DEPTH)
        .map(|s| s..(s + MAX_DEPTH).min(n))
        .collect()
}

struct Corrector {
    inversion: Option<f64>,
    transfer: Option<TransferFunction>,
}

impl Corrector {
    fn correct(&self, z: f64) -> f64 {
        // A fitted transfer already contains the depolarizing contraction,
        // so analytic inversion only applies without calibration.
        let z = match (self.transfer, self.inversion) {
            (Some(t), _) => t.invert(z),
            (None, Some(f)) => z / f,
            (None, None) => z,
        };
        z.clamp(-1.0, 1.0)
    }
}

/// Quantum aggregation of `N` client vectors of `P` parameters.
///
/// Per parameter: each client value is angle-encoded with that parameter's
/// bounds, clients are split into circuits of at most nine gates, every
/// circuit is executed (`repeats` times when averaging), the mean readout is
/// corrected per the mitigation flags and decoded, and group results are
/// combined by a size-weighted classical mean. Parameter `j` draws all its
/// randomness from the stream keyed `(seed, j)`, so the output is identical
/// for any batching or thread count.
pub fn aggregate(
    client_vectors: &[Vec<f64>],
    bounds: &[WeightBounds],
    cfg: &AggregationConfig,
    noise: &NoiseModel,
    seed: u64,
) -> Result<AggregateOutput> {
    cfg.validate()?;
    noise.validate()?;
    let n = client_vectors.len();
    if n == 0 {
        return Err(Error::NoClients);
    }
    let p = client_vectors[0].len();
    for v in client_vectors {
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: v.len(),
            });
        }
    }
    if bounds.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: bounds.len(),
        });
    }
    let channel = noise.gate_channel()?;
    let groups = client_groups(n);

    let mut transfers = BTreeMap::new();
    let mut correctors = BTreeMap::new();
    for g in &groups {
        let depth = g.len();
        if correctors.contains_key(&depth) {
            continue;
        }
        let inversion = if cfg.mitigation.channel_inversion {
            Some(inversion_factor(noise, depth)?)
        } else {
            None
        };
        let transfer = if cfg.mitigation.calibration {
            let mut rng = seed::stream(seed, &[TAG_CALIBRATE, depth as u64]);
            let t = calibrate(noise, depth, &cfg.probe_angles, cfg.readout(depth), cfg.effective_repeats(), &mut rng)?;
            transfers.insert(depth, t);
            Some(t)
        } else {
            None
        };
        correctors.insert(depth, Corrector { inversion, transfer });
    }

    // Encode every (parameter, group) circuit up front.
    let mut clipped = 0;
    let mut plans: Vec<Vec<CircuitPlan>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut per_group = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut angles = Vec::with_capacity(g.len());
            for v in &client_vectors[g.clone()] {
                let (a, c) = normalize_clipped(v[j], &bounds[j])?;
                clipped += usize::from(c);
                angles.push(a);
            }
            per_group.push(build_plan(&angles, g.len())?);
        }
        plans.push(per_group);
    }

    let track = !channel.is_identity();
    let repeats = cfg.effective_repeats();
    let indices: Vec<usize> = (0..p).collect();
    let batches: Vec<Result<Vec<ParamResult>>> = indices
        .par_chunks(cfg.max_qubits_per_batch)
        .map(|batch| {
            let mut rngs: Vec<Rng> = batch
                .iter()
                .map(|&j| seed::stream(seed, &[TAG_AGGREGATE, j as u64]))
                .collect();
            let mut results: Vec<ParamResult> = batch.iter().map(|_| ParamResult::default()).collect();
            for (gi, g) in groups.iter().enumerate() {
                let depth = g.len();
                let readout = cfg.readout(depth);
                let batch_plans: Vec<&CircuitPlan> = batch.iter().map(|&j| &plans[j][gi]).collect();
                let mut sums = vec![0.0; batch.len()];
                let mut cached = None;
                for _ in 0..repeats {
                    let run = if noise.gate_jitter > 0.0 || cached.is_none() {
                        let jitter: Vec<Vec<f64>> = rngs
                            .iter_mut()
                            .map(|r| draw_jitter(noise.gate_jitter, depth, r))
                            .collect();
                        let run = simulate_register(&batch_plans, &channel, Some(&jitter), track)?;
                        cached = Some(run.p_ones.clone());
                        for r in results.iter_mut() {
                            r.deviation = NoiseDeviation::merge(r.deviation.take(), run.deviation.clone());
                        }
                        run.p_ones
                    } else {
                        cached.clone().expect("cached run")
                    };
                    for (q, rng) in rngs.iter_mut().enumerate() {
                        sums[q] += read_out(run[q], noise, readout, rng)?;
                    }
                }
                let corrector = &correctors[&depth];
                for (q, r) in results.iter_mut().enumerate() {
                    let p_one = sums[q] / repeats as f64;
                    let z = 1.0 - 2.0 * p_one;
                    let weight = depth as f64 / n as f64;
                    r.raw += weight * angle_from_prob_one(p_one).value();
                    r.mitigated += weight * angle_from_z(corrector.correct(z)).value();
                }
            }
            Ok(results)
        })
        .collect();

    let mut values = Vec::with_capacity(p);
    let mut raw_values = Vec::with_capacity(p);
    let mut deviation = None;
    let mut j = 0;
    for batch in batches {
        for r in batch? {
            let b = &bounds[j];
            values.push(denormalize(crate::encode::EncodedAngle::clamped(r.mitigated), b));
            raw_values.push(denormalize(crate::encode::EncodedAngle::clamped(r.raw), b));
            deviation = NoiseDeviation::merge(deviation, r.deviation);
            j += 1;
        }
    }
    Ok(AggregateOutput {
        values,
        raw_values,
        clipped,
        deviation,
        transfers,
    })
}

#[derive(Default)]
struct ParamResult {
    raw: f64,
    mitigated: f64,
    deviation: Option<NoiseDeviation>,
}

/// Coordinate-wise median of several servers' aggregates.
pub fn median_combine(results: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = results.first().ok_or(Error::NoServers)?;
    let p = first.len();
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let mut col: Vec<f64> = results
            .iter()
            .map(|r| {
                r.get(j).copied().ok_or(Error::DimensionMismatch {
                    expected: p,
                    actual: r.len(),
                })
            })
            .collect::<Result<_>>()?;
        col.sort_by(f64::total_cmp);
        let k = col.len();
        out.push(if k % 2 == 1 {
            col[k / 2]
        } else {
            0.5 * (col[k / 2 - 1] + col[k / 2])
        });
    }
    Ok(out)
}

/// Runs [`aggregate`] on `n_servers` independent simulated devices and
/// returns the coordinate-wise median. Server 0 uses `seed` itself, so a
/// single server reproduces [`aggregate`] exactly.
pub fn replicated_aggregate(
    client_vectors: &[Vec<f64>],
    bounds: &[WeightBounds],
    cfg: &AggregationConfig,
    noise: &NoiseModel,
    n_servers: usize,
    seed: u64,
) -> Result<AggregateOutput> {
    if n_servers == 0 {
        return Err(Error::NoServers);
    }
    let mut outputs = (0..n_servers)
        .map(|s| {
            let server_seed = if s == 0 {
                seed
            } else {
                seed::derive(seed, &[TAG_SERVER, s as u64])
            };
            aggregate(client_vectors, bounds, cfg, noise, server_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    if n_servers == 1 {
        return Ok(outputs.pop().expect("one output"));
    }
    let values = median_combine(&outputs.iter().map(|o| o.values.clone()).collect::<Vec<_>>())?;
    let raw_values = median_combine(&outputs.iter().map(|o| o.raw_values.clone()).collect::<Vec<_>>())?;
    let mut first = outputs.swap_remove(0);
    let deviation = outputs
        .into_iter()
        .fold(first.deviation.take(), |acc, o| NoiseDeviation::merge(acc, o.deviation));
    Ok(AggregateOutput {
        values,
        raw_values,
        deviation,
        ..first
    })
}
