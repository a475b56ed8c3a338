use rand::Rng;
use serde::{Deserialize, Serialize};

use super::plan::{build_plan, draw_jitter, read_out, simulate_register, Readout};
use crate::encode::EncodedAngle;
use crate::qcore::NoiseModel;
use crate::{Error, Result};

/// Smallest total attenuation the inversion will divide by.
pub const MIN_ATTENUATION: f64 = 1e-6;

/// Default probe angles for calibration, spread over the decoder's range.
pub const DEFAULT_PROBES: [f64; 5] = [0.15, 0.45, 0.75, 1.05, 1.35];

/// Total depolarizing attenuation `(1 − 4p/3)^d` after `d` noisy gates.
pub fn inversion_factor(noise: &NoiseModel, depth: usize) -> Result<f64> {
    let factor = noise.depolarizing_attenuation().powi(depth as i32);
    if factor < MIN_ATTENUATION {
        return Err(Error::IllConditioned(factor));
    }
    Ok(factor)
}

/// Undoes the depolarizing contraction of `⟨Z⟩` over `depth` gates and
/// clamps the result to `[−1, 1]`.
pub fn mitigate_channel_inversion(raw_z: f64, noise: &NoiseModel, depth: usize) -> Result<f64> {
    Ok((raw_z / inversion_factor(noise, depth)?).clamp(-1.0, 1.0))
}

/// Fitted affine response `noisy ⟨Z⟩ = attenuation · ideal ⟨Z⟩ + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub attenuation: f64,
    pub offset: f64,
}

impl TransferFunction {
    pub const IDENTITY: Self = Self {
        attenuation: 1.0,
        offset: 0.0,
    };

    /// Inverse map from a measured `⟨Z⟩` to the ideal one, unclamped.
    pub fn invert(&self, z: f64) -> f64 {
        (z - self.offset) / self.attenuation
    }
}

/// Probe-based calibration of the whole noisy pipeline at a given depth.
///
/// Each probe angle `a` is aggregated as `depth` identical clients, so the
/// ideal output is `⟨Z⟩ = cos(2a)`, averaged over `repeats` executions.
/// The measured values are fitted by least squares. Amplitude damping and
/// readout error shift and scale `⟨Z⟩`; the fit captures both together with
/// the depolarizing contraction.
pub fn calibrate<R: Rng + ?Sized>(
    noise: &NoiseModel,
    depth: usize,
    probe_angles: &[f64],
    readout: Readout,
    repeats: usize,
    rng: &mut R,
) -> Result<TransferFunction> {
    noise.validate()?;
    if probe_angles.len() < 2 {
        return Err(Error::DegenerateProbes);
    }
    let channel = noise.gate_channel()?;
    let mut points = Vec::with_capacity(probe_angles.len());
    for &a in probe_angles {
        let angle = EncodedAngle::new(a)?;
        let plan = build_plan(&vec![angle; depth], depth)?;
        let mut p = 0.0;
        for _ in 0..repeats.max(1) {
            let jitter = [draw_jitter(noise.gate_jitter, depth, rng)];
            let run = simulate_register(&[&plan], &channel, Some(&jitter), false)?;
            p += read_out(run.p_ones[0], noise, readout, rng)?;
        }
        p /= repeats.max(1) as f64;
        points.push(((2.0 * a).cos(), 1.0 - 2.0 * p));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(Error::DegenerateProbes);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let attenuation = sxy / sxx;
    if !(attenuation > 0.0) {
        return Err(Error::BadCalibration(attenuation));
    }
    Ok(TransferFunction {
        attenuation,
        offset: my - attenuation * mx,
    })
}
