use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encode::{angle_from_prob_one, EncodedAngle};
use crate::qcore::{
    apply_channel, apply_unitary, readout_prob_one, ry, sample_counts, trace_distance,
    DensityMatrix, KrausChannel, NoiseModel, MAX_QUBITS,
};
use crate::{Error, Result};

/// Largest circuit depth a plan may have.
pub const MAX_DEPTH: usize = 9;

/// How a circuit's output probability is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Infinite-shot limit: the exact outcome probability (after readout
    /// error) is used.
    Exact,
    /// A finite number of measurement shots.
    Shots(u64),
}

/// Single-qubit aggregation circuit: a sequence of `Ry` rotations applied to
/// `|0⟩`, with one noise-channel application after every gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitPlan {
    gates: Vec<f64>,
}

impl CircuitPlan {
    pub fn gates(&self) -> &[f64] {
        &self.gates
    }

    pub fn depth(&self) -> usize {
        self.gates.len()
    }

    /// Angle decoded from the noiseless output: half the total rotation.
    pub fn ideal_angle(&self) -> f64 {
        self.gates.iter().sum::<f64>() / 2.0
    }
}

/// One gate `Ry(2·a_k/N)` per client. Rotations about a common axis add, so
/// the noiseless output is `Ry(2·mean(a))|0⟩` and decodes to the mean angle.
pub fn build_plan(angles: &[EncodedAngle], n: usize) -> Result<CircuitPlan> {
    if n == 0 || n > MAX_DEPTH {
        return Err(Error::ClientCount(n));
    }
    if angles.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: angles.len(),
        });
    }
    let scale = 2.0 / n as f64;
    Ok(CircuitPlan {
        gates: angles.iter().map(|a| scale * a.value()).collect(),
    })
}

/// Same total rotation as [`build_plan`], recompiled into `depth` equal
/// gates. Merging or splitting rotations about one axis leaves the ideal
/// output unchanged; only the number of noisy gate steps differs.
pub fn build_plan_with_depth(angles: &[EncodedAngle], depth: usize) -> Result<CircuitPlan> {
    if angles.is_empty() {
        return Err(Error::NoClients);
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::ClientCount(depth));
    }
    let mean = angles.iter().map(|a| a.value()).sum::<f64>() / angles.len() as f64;
    Ok(CircuitPlan {
        gates: vec![2.0 * mean / depth as f64; depth],
    })
}

/// Largest `D(ρ, E(ρ))` seen before any noise step of a run, together with
/// the state that attained it.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDeviation {
    pub epsilon: f64,
    pub state: DensityMatrix,
}

impl NoiseDeviation {
    pub(crate) fn merge(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (Some(x), Some(y)) => Some(if y.epsilon > x.epsilon { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        }
    }
}

pub(crate) struct RegisterRun {
    /// Pre-readout `P(1)` per qubit.
    pub p_ones: Vec<f64>,
    pub deviation: Option<NoiseDeviation>,
}

/// Simulates up to six plans side by side, one per qubit, layer by layer.
/// `jitter[q]` holds the over-rotation added to each gate of plan `q`.
pub(crate) fn simulate_register(
    plans: &[&CircuitPlan],
    channel: &KrausChannel,
    jitter: Option<&[Vec<f64>]>,
    track_deviation: bool,
) -> Result<RegisterRun> {
    let n = plans.len();
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::ClientCount(n));
    }
    let mut state = DensityMatrix::zero_state(n)?;
    let mut deviation: Option<NoiseDeviation> = None;
    let depth = plans.iter().map(|p| p.depth()).max().unwrap_or(0);
    for layer in 0..depth {
        for (q, plan) in plans.iter().enumerate() {
            let Some(&theta) = plan.gates.get(layer) else {
                continue;
            };
            let eps = jitter.map_or(0.0, |j| j[q][layer]);
            state = apply_unitary(&state, &ry(theta + eps)?, q)?;
            if channel.is_identity() {
                continue;
            }
            let noisy = apply_channel(&state, channel, q)?;
            if track_deviation {
                let eps = trace_distance(&state, &noisy)?;
                if deviation.as_ref().map_or(true, |d| eps > d.epsilon) {
                    deviation = Some(NoiseDeviation {
                        epsilon: eps,
                        state: state.clone(),
                    });
                }
            }
            state = noisy;
        }
    }
    let p_ones = (0..n).map(|q| state.prob_one(q)).collect::<Result<_>>()?;
    Ok(RegisterRun { p_ones, deviation })
}

pub(crate) fn draw_jitter<R: Rng + ?Sized>(sigma: f64, depth: usize, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; depth];
    }
    let normal = Normal::new(0.0, sigma).expect("validated jitter");
    (0..depth).map(|_| normal.sample(rng)).collect()
}

/// Reads the measured `P(1)`, including readout error, either exactly or
/// as a shot frequency.
pub(crate) fn read_out<R: Rng + ?Sized>(
    p_one: f64,
    noise: &NoiseModel,
    readout: Readout,
    rng: &mut R,
) -> Result<f64> {
    let p = readout_prob_one(p_one, noise.readout_flip);
    match readout {
        Readout::Exact => Ok(p),
        Readout::Shots(0) => Err(Error::ZeroShots),
        Readout::Shots(s) => Ok(sample_counts(p, s, rng).ones as f64 / s as f64),
    }
}

/// Unmitigated estimate of one circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateEstimate {
    /// Estimate after mitigation (equal to `raw_value` for a bare run).
    pub value: f64,
    pub raw_value: f64,
    /// Delta-method shot variance of the decoded angle; 0 in the exact path.
    pub variance_estimate: f64,
    /// Measured `⟨Z⟩ = 1 − 2·P(1)`.
    pub z: f64,
}

/// Runs `plan` once from `|0⟩`: gates interleaved with the noise channel,
/// then a measurement decoded with `arcsin(√P(1))`.
pub fn run_plan<R: Rng + ?Sized>(
    plan: &CircuitPlan,
    noise: &NoiseModel,
    readout: Readout,
    rng: &mut R,
) -> Result<AggregateEstimate> {
    noise.validate()?;
    let channel = noise.gate_channel()?;
    let jitter = [draw_jitter(noise.gate_jitter, plan.depth(), rng)];
    let run = simulate_register(&[plan], &channel, Some(&jitter), false)?;
    let p = read_out(run.p_ones[0], noise, readout, rng)?;
    let raw = angle_from_prob_one(p).value();
    let variance_estimate = match readout {
        Readout::Exact => 0.0,
        // arcsin(√p) is variance-stabilizing: Var ≈ 1/(4S) for any p.
        Readout::Shots(s) => 0.25 / s as f64,
    };
    Ok(AggregateEstimate {
        value: raw,
        raw_value: raw,
        variance_estimate,
        z: 1.0 - 2.0 * p,
    })
}
