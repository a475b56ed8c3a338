use serde::{Deserialize, Serialize};

use super::channel::KrausChannel;
use crate::{Error, Result};

/// Per-gate noise parameters of the simulated device.
///
/// After every gate the composite channel depolarizing(`p_depol`) →
/// dephasing(`p_deph`) → amplitude damping(`gamma`) acts on the gate's
/// qubit. `gate_jitter` is the standard deviation (radians) of a Gaussian
/// over-rotation drawn independently per gate and per circuit execution;
/// unlike the Kraus channels it is stochastic and shows up as run-to-run
/// variance. `readout_flip` is a symmetric measurement bit-flip probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub p_depol: f64,
    pub p_deph: f64,
    pub gamma: f64,
    pub readout_flip: f64,
    pub gate_jitter: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub const fn noiseless() -> Self {
        Self {
            p_depol: 0.0,
            p_deph: 0.0,
            gamma: 0.0,
            readout_flip: 0.0,
            gate_jitter: 0.0,
        }
    }

    pub fn depolarizing(p: f64) -> Self {
        Self {
            p_depol: p,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("p_depol", self.p_depol),
            ("p_deph", self.p_deph),
            ("gamma", self.gamma),
            ("readout_flip", self.readout_flip),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Probability { name, value });
            }
        }
        if !(self.gate_jitter.is_finite() && self.gate_jitter >= 0.0) {
            return Err(Error::NonFinite("gate_jitter"));
        }
        Ok(())
    }

    /// The composite Kraus channel applied after each gate.
    pub fn gate_channel(&self) -> Result<KrausChannel> {
        KrausChannel::depolarizing(self.p_depol)?
            .then(&KrausChannel::dephasing(self.p_deph)?)?
            .then(&KrausChannel::amplitude_damping(self.gamma)?)
    }

    /// Contraction `1 − 4p/3` of the Bloch vector under one depolarizing step.
    pub fn depolarizing_attenuation(&self) -> f64 {
        1.0 - 4.0 * self.p_depol / 3.0
    }

    pub fn is_noiseless(&self) -> bool {
        *self == Self::noiseless()
    }
}
