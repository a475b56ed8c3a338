//! Angle encoding of real parameters into single-qubit states.
//!
//! A weight `w` is first mapped affinely into an angle `a ∈ [0, π/2]` using
//! known bounds, then prepared as `cos(a)|0⟩ + sin(a)|1⟩ = Ry(2a)|0⟩`.
//! Decoding inverts `P(1) = sin²(a)`, which is injective on that interval.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::qcore::{apply_unitary, ry, Counts, DensityMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    lo: f64,
    hi: f64,
}

impl WeightBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidBounds { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Tightest bounds covering `values`. A degenerate span is widened
    /// symmetrically by a relative 1e-9 so that `lo < hi` holds.
    pub fn spanning<I: IntoIterator<Item = f64>>(values: I) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidBounds { lo, hi });
        }
        let pad = 1e-9 * lo.abs().max(hi.abs()).max(1.0);
        if hi - lo < pad {
            return Self::new(lo - pad, hi + pad);
        }
        Self::new(lo, hi)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Rotation angle in `[0, π/2]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EncodedAngle(f64);

impl EncodedAngle {
    pub const MAX: f64 = FRAC_PI_2;

    pub fn new(angle: f64) -> Result<Self> {
        if !(0.0..=Self::MAX).contains(&angle) {
            return Err(Error::AngleOutOfRange(angle));
        }
        Ok(Self(angle))
    }

    pub(crate) fn clamped(angle: f64) -> Self {
        Self(angle.clamp(0.0, Self::MAX))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Maps `w` to `(π/2)·clamp((w − lo)/(hi − lo), 0, 1)`. The flag reports
/// whether clamping was needed.
pub fn normalize_clipped(w: f64, bounds: &WeightBounds) -> Result<(EncodedAngle, bool)> {
    if !w.is_finite() {
        return Err(Error::NonFinite("weight"));
    }
    let t = (w - bounds.lo) / bounds.width();
    let clipped = !(0.0..=1.0).contains(&t);
    Ok((EncodedAngle(FRAC_PI_2 * t.clamp(0.0, 1.0)), clipped))
}

pub fn normalize(w: f64, bounds: &WeightBounds) -> Result<EncodedAngle> {
    normalize_clipped(w, bounds).map(|(a, _)| a)
}

pub fn denormalize(a: EncodedAngle, bounds: &WeightBounds) -> f64 {
    bounds.lo + bounds.width() * (a.0 / FRAC_PI_2)
}

/// `Ry(2a)|0⟩⟨0|Ry(2a)†`.
pub fn encode(a: EncodedAngle) -> DensityMatrix {
    let zero = DensityMatrix::zero_state(1).expect("one qubit is valid");
    apply_unitary(&zero, &ry(2.0 * a.0).expect("finite angle"), 0).expect("Ry is unitary")
}

/// Angle whose encoded state has `P(1) = p_one`.
pub fn angle_from_prob_one(p_one: f64) -> EncodedAngle {
    EncodedAngle::clamped(p_one.clamp(0.0, 1.0).sqrt().asin())
}

/// Angle from a `⟨Z⟩` value, using `P(1) = (1 − ⟨Z⟩)/2`.
pub fn angle_from_z(z: f64) -> EncodedAngle {
    angle_from_prob_one((1.0 - z) / 2.0)
}

/// `arcsin(√P(1))` of a single-qubit state.
pub fn decode_exact(state: &DensityMatrix) -> Result<EncodedAngle> {
    if state.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: state.dim(),
        });
    }
    Ok(angle_from_prob_one(state.prob_one(0)?))
}

/// `arcsin(√(ones/shots))`.
pub fn decode_shots(counts: Counts) -> Result<EncodedAngle> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::ZeroShots);
    }
    Ok(angle_from_prob_one(counts.ones as f64 / total as f64))
}
