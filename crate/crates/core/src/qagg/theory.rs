//! Empirical checks of the aggregation guarantees: linearity under no
//! noise, the shot/gate variance bound and commutation stability.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{build_plan_with_depth, draw_jitter, read_out, simulate_register, CircuitPlan, Readout, MAX_DEPTH};
use crate::encode::{angle_from_prob_one, EncodedAngle};
use crate::seed::{self, TAG_CALIBRATE, TAG_PROBE};
use crate::qcore::{expectation, trace_distance, DensityMatrix, KrausChannel, NoiseModel, Observable};
use crate::{Error, Result};

/// `σ_shot²/(N·S) + σ_gate²·d/N`.
pub fn variance_bound(sigma_shot: f64, sigma_gate: f64, shots: u64, n_clients: usize, depth: usize) -> f64 {
    let n = n_clients as f64;
    sigma_shot.powi(2) / (n * shots as f64) + sigma_gate.powi(2) * depth as f64 / n
}

/// Sample variance of the raw decoded angle over `trials` independent runs.
pub fn empirical_variance<R: Rng + ?Sized>(
    plan: &CircuitPlan,
    noise: &NoiseModel,
    readout: Readout,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials < 2 {
        return Err(Error::TooFewTrials {
            needed: 2,
            got: trials,
        });
    }
    noise.validate()?;
    let channel = noise.gate_channel()?;
    let values = (0..trials)
        .map(|_| {
            let jitter = [draw_jitter(noise.gate_jitter, plan.depth(), rng)];
            let run = simulate_register(&[plan], &channel, Some(&jitter), false)?;
            let p = read_out(run.p_ones[0], noise, readout, rng)?;
            Ok(angle_from_prob_one(p).value())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sample_variance(&values))
}

pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `Tr(Mρ)` with `Tr(M·E(ρ))`; equality within 1e-10 holds.
pub fn commutation_check(
    channel: &KrausChannel,
    m: &Observable,
    state: &DensityMatrix,
) -> Result<CommutationCheck> {
    let lhs = expectation(state, m)?;
    let rhs = expectation(&channel.apply(state)?, m)?;
    Ok(CommutationCheck {
        lhs,
        rhs,
        holds: (lhs - rhs).abs() < 1e-10,
    })
}

/// `D(ρ, E(ρ))`.
pub fn noise_deviation(state: &DensityMatrix, channel: &KrausChannel) -> Result<f64> {
    trace_distance(state, &channel.apply(state)?)
}

/// One point of a variance-bound sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub shots_per_client: u64,
    pub depth: usize,
    pub n_clients: usize,
    pub empirical: f64,
}

/// Fits `σ_gate` as the upper envelope of a calibration sweep.
///
/// For each point the gate term must cover the excess of the empirical
/// variance over the shot term, i.e. `σ_gate² ≥ N·(v − σ_shot²/(N·S))/d`.
/// The largest such value over the sweep is returned.
pub fn fit_sigma_gate(points: &[VariancePoint], sigma_shot: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let n = p.n_clients as f64;
            let shot = sigma_shot.powi(2) / (n * p.shots_per_client as f64);
            (n * (p.empirical - shot) / p.depth as f64).max(0.0)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// One randomized configuration of a variance sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceConfig {
    pub shots_per_client: u64,
    pub depth: usize,
    pub angles: Vec<f64>,
}

impl VarianceConfig {
    pub fn n_clients(&self) -> usize {
        self.angles.len()
    }
}

/// `count` configurations with `S` log-uniform in `[256, 65536]`, `d` and
/// `N` uniform in `1..=9` and client angles uniform in `[0, π/2]`.
pub fn random_variance_configs<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<VarianceConfig> {
    (0..count)
        .map(|_| {
            let shots = 2f64.powf(rng.gen_range(8.0..=16.0)).round() as u64;
            let depth = rng.gen_range(1..=MAX_DEPTH);
            let n = rng.gen_range(1..=MAX_DEPTH);
            VarianceConfig {
                shots_per_client: shots,
                depth,
                angles: (0..n).map(|_| rng.gen_range(0.0..=EncodedAngle::MAX)).collect(),
            }
        })
        .collect()
}

/// Empirical variance of the decoded aggregate for one configuration, from
/// `trials` runs measured with `N·S` shots each.
pub fn measure_variance(cfg: &VarianceConfig, noise: &NoiseModel, trials: usize, seed: u64) -> Result<VariancePoint> {
    let angles = cfg.angles.iter().map(|&a| EncodedAngle::new(a)).collect::<Result<Vec<_>>>()?;
    let plan = build_plan_with_depth(&angles, cfg.depth)?;
    let readout = Readout::Shots(cfg.shots_per_client * cfg.n_clients() as u64);
    let mut rng = seed::stream(seed, &[]);
    Ok(VariancePoint {
        shots_per_client: cfg.shots_per_client,
        depth: cfg.depth,
        n_clients: cfg.n_clients(),
        empirical: empirical_variance(&plan, noise, readout, trials, &mut rng)?,
    })
}

/// [`measure_variance`] over many configurations in parallel; configuration
/// `i` uses the stream keyed `(seed, i)`.
pub fn measure_all(configs: &[VarianceConfig], noise: &NoiseModel, trials: usize, seed: u64) -> Result<Vec<VariancePoint>> {
    configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| measure_variance(c, noise, trials, seed::derive(seed, &[i as u64])))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub sigma_shot: f64,
    /// Envelope-fitted on a calibration sweep disjoint from the checked one.
    pub sigma_gate: f64,
    pub checked: usize,
    pub violations: usize,
    /// Variance at `S` divided by variance at `4S`, shot-limited circuit.
    pub shot_ratio: f64,
}

impl SoundnessReport {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / self.checked as f64
    }
}

/// Sizes of a bound-soundness run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessPlan {
    pub calibration_configs: usize,
    pub checked_configs: usize,
    pub trials: usize,
    pub ratio_trials: usize,
}

impl Default for SoundnessPlan {
    fn default() -> Self {
        Self {
            calibration_configs: 300,
            checked_configs: 1000,
            trials: 1000,
            ratio_trials: 4000,
        }
    }
}

/// Fits `σ_gate` on one randomized sweep, then counts configurations of a
/// second, independent sweep whose empirical variance exceeds the bound.
/// The shot ratio is measured on a fixed `N = d = 3` circuit at `S = 1024`
/// and `4096` with gate jitter switched off.
pub fn bound_soundness(noise: &NoiseModel, sigma_shot: f64, plan: SoundnessPlan, seed: u64) -> Result<SoundnessReport> {
    let mut rng = seed::stream(seed, &[TAG_CALIBRATE]);
    let calib = random_variance_configs(plan.calibration_configs, &mut rng);
    let calib_points = measure_all(&calib, noise, plan.trials, seed::derive(seed, &[TAG_CALIBRATE, 1]))?;
    let sigma_gate = fit_sigma_gate(&calib_points, sigma_shot);

    let mut rng = seed::stream(seed, &[TAG_PROBE]);
    let checked = random_variance_configs(plan.checked_configs, &mut rng);
    let points = measure_all(&checked, noise, plan.trials, seed::derive(seed, &[TAG_PROBE, 1]))?;
    let violations = points
        .iter()
        .filter(|p| p.empirical > variance_bound(sigma_shot, sigma_gate, p.shots_per_client, p.n_clients, p.depth))
        .count();

    let quiet = NoiseModel {
        gate_jitter: 0.0,
        ..*noise
    };
    let base = VarianceConfig {
        shots_per_client: 1024,
        depth: 3,
        angles: vec![0.3, 0.7, 1.1],
    };
    let four = VarianceConfig {
        shots_per_client: 4096,
        ..base.clone()
    };
    let lo = measure_variance(&base, &quiet, plan.ratio_trials, seed::derive(seed, &[TAG_PROBE, 2]))?;
    let hi = measure_variance(&four, &quiet, plan.ratio_trials, seed::derive(seed, &[TAG_PROBE, 3]))?;
    Ok(SoundnessReport {
        sigma_shot,
        sigma_gate,
        checked: points.len(),
        violations,
        shot_ratio: lo.empirical / hi.empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qagg::plan::build_plan;
    use crate::qcore::{apply_unitary, make_pure_state, ry};
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> DensityMatrix {
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        make_pure_state(&[a, a]).unwrap()
    }

    #[test]
    fn bound_examples() {
        let b = variance_bound(0.5, 0.02, 1024, 5, 5);
        assert!((b - (0.25 / 5120.0 + 4e-4 * 5.0 / 5.0)).abs() < 1e-15);
        assert!((b - 4.4883e-4).abs() < 1e-8);
        assert!(variance_bound(0.5, 0.0, u64::MAX, 3, 4) < 1e-19);
        let one = variance_bound(0.5, 0.0, 1000, 3, 4);
        let two = variance_bound(0.5, 0.0, 2000, 3, 4);
        assert!((one / two - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_path_has_zero_variance() {
        let plan = build_plan(&[EncodedAngle::new(0.4).unwrap(); 3], 3).unwrap();
        let mut rng = seed::stream(1, &[]);
        let v = empirical_variance(&plan, &NoiseModel::depolarizing(0.05), Readout::Exact, 10, &mut rng).unwrap();
        assert_eq!(v, 0.0);
        assert!(matches!(
            empirical_variance(&plan, &NoiseModel::noiseless(), Readout::Exact, 1, &mut rng),
            Err(Error::TooFewTrials { .. })
        ));
    }

    #[test]
    fn variance_scales_inversely_with_shots() {
        let plan = build_plan(&[EncodedAngle::new(0.5).unwrap(), EncodedAngle::new(0.9).unwrap()], 2).unwrap();
        let noise = NoiseModel::depolarizing(0.05);
        let mut rng = seed::stream(2, &[]);
        let v1 = empirical_variance(&plan, &noise, Readout::Shots(1000), 500, &mut rng).unwrap();
        let v4 = empirical_variance(&plan, &noise, Readout::Shots(4000), 500, &mut rng).unwrap();
        let ratio = v1 / v4;
        assert!((ratio - 4.0).abs() < 0.3 * 4.0, "ratio {ratio}");
    }

    #[test]
    fn variance_grows_with_depth_under_gate_noise() {
        let noise = NoiseModel { gate_jitter: 0.05, ..NoiseModel::noiseless() };
        let angles = [EncodedAngle::new(0.7).unwrap(), EncodedAngle::new(0.8).unwrap()];
        let mut prev = 0.0;
        for d in [1, 3, 5, 7, 9] {
            let plan = build_plan_with_depth(&angles, d).unwrap();
            let mut rng = seed::stream(3, &[d as u64]);
            let v = empirical_variance(&plan, &noise, Readout::Shots(4096), 2000, &mut rng).unwrap();
            assert!(v > prev, "depth {d}: {v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn commutation_examples() {
        let z = Observable::pauli_z();
        let state = apply_unitary(&plus(), &ry(0.3).unwrap(), 0).unwrap();
        for p in [0.0, 0.1, 0.5, 1.0] {
            let c = commutation_check(&KrausChannel::dephasing(p).unwrap(), &z, &state).unwrap();
            assert!(c.holds, "{c:?}");
        }
        let p = 0.05;
        let zero = DensityMatrix::zero_state(1).unwrap();
        let c = commutation_check(&KrausChannel::depolarizing(p).unwrap(), &z, &zero).unwrap();
        assert!(!c.holds);
        assert_eq!(c.lhs, 1.0);
        assert!((c.rhs - (1.0 - 4.0 * p / 3.0)).abs() < 1e-14);
        let c = commutation_check(&KrausChannel::identity(), &Observable::pauli_x(), &state).unwrap();
        assert!(c.holds);
        assert!(commutation_check(&KrausChannel::identity(), &z, &DensityMatrix::zero_state(2).unwrap()).is_err());
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(noise_deviation(&plus(), &KrausChannel::identity()).unwrap(), 0.0);
        for p in [0.01, 0.1, 0.3] {
            let d = noise_deviation(&plus(), &KrausChannel::dephasing(p).unwrap()).unwrap();
            assert!((d - p).abs() < 1e-12);
        }
        let mut prev = 0.0;
        for p in [0.01, 0.05, 0.2, 0.6] {
            let d = noise_deviation(&plus(), &KrausChannel::depolarizing(p).unwrap()).unwrap();
            assert!((d - 2.0 * p / 3.0).abs() < 1e-12);
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn sigma_fit_envelope() {
        let pts = [
            VariancePoint { shots_per_client: 1000, depth: 2, n_clients: 1, empirical: 0.25 / 1000.0 + 2e-4 },
            VariancePoint { shots_per_client: 1000, depth: 4, n_clients: 2, empirical: 0.25 / 2000.0 + 1e-4 },
            VariancePoint { shots_per_client: 1000, depth: 1, n_clients: 1, empirical: 0.0 },
        ];
        let s = fit_sigma_gate(&pts, 0.5);
        assert!((s * s - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn sweep_configs_cover_ranges() {
        let mut rng = seed::stream(2, &[]);
        let cfgs = random_variance_configs(500, &mut rng);
        assert!(cfgs.iter().all(|c| (256..=65536).contains(&c.shots_per_client)));
        assert!(cfgs.iter().all(|c| (1..=9).contains(&c.depth) && (1..=9).contains(&c.n_clients())));
        assert!(cfgs.iter().any(|c| c.depth == 9) && cfgs.iter().any(|c| c.n_clients() == 1));
    }

    #[test]
    fn small_soundness_run() {
        let noise = NoiseModel { p_depol: 0.05, gamma: 0.03, gate_jitter: 0.05, ..NoiseModel::noiseless() };
        let plan = SoundnessPlan { calibration_configs: 40, checked_configs: 60, trials: 400, ratio_trials: 2000 };
        let r = bound_soundness(&noise, 0.5, plan, 1).unwrap();
        assert_eq!(r, bound_soundness(&noise, 0.5, plan, 1).unwrap());
        assert_eq!(r.checked, 60);
        assert!(r.sigma_gate > 0.0);
        assert!(r.violation_rate() <= 0.1, "{r:?}");
        assert!((3.0..=5.0).contains(&r.shot_ratio), "{r:?}");
    }
}
