use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::state::DensityMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub zeros: u64,
    pub ones: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.zeros + self.ones
    }
}

/// Probability of reading `1` after a symmetric readout flip.
pub fn readout_prob_one(p_one: f64, flip: f64) -> f64 {
    (p_one * (1.0 - flip) + (1.0 - p_one) * flip).clamp(0.0, 1.0)
}

/// Measures `target` in the computational basis `shots` times.
///
/// Each shot reads 1 with probability `P(1)` of the target's marginal and
/// is then flipped with probability `readout_flip`. Shots are i.i.d., so the
/// number of ones is drawn from the equivalent binomial law in one step.
pub fn sample_measurement<R: Rng + ?Sized>(
    state: &DensityMatrix,
    target: usize,
    shots: u64,
    rng: &mut R,
    readout_flip: f64,
) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    if !(0.0..=1.0).contains(&readout_flip) {
        return Err(Error::Probability {
            name: "readout_flip",
            value: readout_flip,
        });
    }
    let p = readout_prob_one(state.prob_one(target)?, readout_flip);
    Ok(sample_counts(p, shots, rng))
}

pub(crate) fn sample_counts<R: Rng + ?Sized>(p_one: f64, shots: u64, rng: &mut R) -> Counts {
    let ones = Binomial::new(shots, p_one)
        .expect("probability clamped to [0, 1]")
        .sample(rng);
    Counts {
        zeros: shots - ones,
        ones,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn basis_state_is_deterministic() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        let mut rng = seed::stream(1, &[]);
        for shots in [1, 17, 100_000] {
            let c = sample_measurement(&zero, 0, shots, &mut rng, 0.0).unwrap();
            assert_eq!(c, Counts { zeros: shots, ones: 0 });
        }
    }

    #[test]
    fn mixed_state_frequency() {
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        let mut rng = seed::stream(2, &[]);
        let c = sample_measurement(&mixed, 0, 1_000_000, &mut rng, 0.0).unwrap();
        assert_eq!(c.total(), 1_000_000);
        assert!((c.ones as f64 / 1e6 - 0.5).abs() < 0.002);
    }

    #[test]
    fn readout_flip_frequency() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        let mut rng = seed::stream(3, &[]);
        let c = sample_measurement(&zero, 0, 1_000_000, &mut rng, 0.1).unwrap();
        assert!((c.ones as f64 / 1e6 - 0.1).abs() < 0.001);
    }

    #[test]
    fn errors_and_determinism() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        let mut rng = seed::stream(4, &[]);
        assert_eq!(sample_measurement(&zero, 0, 0, &mut rng, 0.0), Err(Error::ZeroShots));
        assert!(sample_measurement(&zero, 0, 10, &mut rng, 1.5).is_err());
        assert!(sample_measurement(&zero, 1, 10, &mut rng, 0.0).is_err());

        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let a = sample_measurement(&mixed, 1, 5000, &mut seed::stream(9, &[1]), 0.02).unwrap();
        let b = sample_measurement(&mixed, 1, 5000, &mut seed::stream(9, &[1]), 0.02).unwrap();
        assert_eq!(a, b);
    }
}
