//! Client selection driven by simulated quantum randomness.
//!
//! Raw bits come from measuring `Ry(π/2)|0⟩` once per bit on the noisy
//! device. Device noise biases those bits, so they pass through a von
//! Neumann extractor before being turned into client indices by rejection
//! sampling.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::qcore::{apply_channel, apply_unitary, readout_prob_one, ry, DensityMatrix, NoiseModel};
use crate::{Error, Result};

/// A stream of bits that may run dry.
pub trait BitSource {
    fn next_bit(&mut self) -> Option<bool>;

    /// Raw bits drawn from the underlying physical source so far.
    fn consumed(&self) -> u64;
}

/// Probability that one entropy-circuit shot reads 1 under `noise`.
pub fn entropy_prob_one(noise: &NoiseModel) -> Result<f64> {
    noise.validate()?;
    let zero = DensityMatrix::zero_state(1)?;
    let state = apply_unitary(&zero, &ry(std::f64::consts::FRAC_PI_2)?, 0)?;
    let state = apply_channel(&state, &noise.gate_channel()?, 0)?;
    Ok(readout_prob_one(state.prob_one(0)?, noise.readout_flip))
}

/// Unbounded raw bits from the entropy circuit, one shot per bit.
pub struct QuantumEntropy<R> {
    p_one: f64,
    rng: R,
    consumed: u64,
}

impl<R: Rng> QuantumEntropy<R> {
    pub fn new(noise: &NoiseModel, rng: R) -> Result<Self> {
        Ok(Self {
            p_one: entropy_prob_one(noise)?,
            rng,
            consumed: 0,
        })
    }

    pub fn p_one(&self) -> f64 {
        self.p_one
    }
}

impl<R: Rng> BitSource for QuantumEntropy<R> {
    fn next_bit(&mut self) -> Option<bool> {
        self.consumed += 1;
        Some(self.rng.gen_bool(self.p_one))
    }

    fn consumed(&self) -> u64 {
        self.consumed
    }
}

/// `k` raw bits from the entropy circuit.
pub fn quantum_random_bits<R: Rng>(k: usize, noise: &NoiseModel, rng: R) -> Result<Vec<bool>> {
    let mut src = QuantumEntropy::new(noise, rng)?;
    Ok((0..k).map(|_| src.next_bit().expect("unbounded")).collect())
}

/// Von Neumann extractor: reads bit pairs, emits the first bit of `01`/`10`
/// and discards `00`/`11`. Output is unbiased for any i.i.d. input bias.
pub struct VonNeumann<S> {
    inner: S,
}

impl<S: BitSource> VonNeumann<S> {
    pub fn new(inner: S) -> Self {
        Self { inner }
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: BitSource> BitSource for VonNeumann<S> {
    fn next_bit(&mut self) -> Option<bool> {
        loop {
            let a = self.inner.next_bit()?;
            let b = self.inner.next_bit()?;
            if a != b {
                return Some(a);
            }
        }
    }

    fn consumed(&self) -> u64 {
        self.inner.consumed()
    }
}

/// A finite, pre-recorded bit sequence.
pub struct BitSlice<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> BitSlice<'a> {
    pub fn new(bits: &'a [bool]) -> Self {
        Self { bits, pos: 0 }
    }
}

impl BitSource for BitSlice<'_> {
    fn next_bit(&mut self) -> Option<bool> {
        let b = self.bits.get(self.pos).copied();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn consumed(&self) -> u64 {
        self.pos as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionVector {
    pub round: usize,
    /// Selected client indices in ascending order.
    pub selected: Vec<usize>,
    pub entropy_bits_consumed: u64,
}

/// Draws `m` of `n` clients uniformly among all subsets.
///
/// Indices are built from `⌈log2 n⌉` bits each; values `≥ n` and repeats
/// are rejected, which yields a uniform ordered sample without replacement.
pub fn select_clients<S: BitSource>(
    n: usize,
    m: usize,
    round: usize,
    bits: &mut S,
) -> Result<SelectionVector> {
    if m == 0 || m > n {
        return Err(Error::Selection { n, m });
    }
    if m == n {
        return Ok(SelectionVector {
            round,
            selected: (0..n).collect(),
            entropy_bits_consumed: 0,
        });
    }
    let width = usize::BITS - (n - 1).leading_zeros();
    let start = bits.consumed();
    let mut chosen = BTreeSet::new();
    while chosen.len() < m {
        let mut idx = 0usize;
        for _ in 0..width {
            idx = (idx << 1) | usize::from(bits.next_bit().ok_or(Error::EntropyExhausted)?);
        }
        if idx < n {
            chosen.insert(idx);
        }
    }
    Ok(SelectionVector {
        round,
        selected: chosen.into_iter().collect(),
        entropy_bits_consumed: bits.consumed() - start,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub counts: Vec<u64>,
    pub expected: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Per-client selection counts and Pearson chi-square against the uniform
/// expectation `Σ|selected| / n`.
pub fn fairness_report(history: &[SelectionVector], n: usize) -> Result<FairnessReport> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if n == 0 {
        return Err(Error::Selection { n, m: 0 });
    }
    let mut counts = vec![0u64; n];
    for s in history {
        for &i in &s.selected {
            let c = counts.get_mut(i).ok_or(Error::Selection { n, m: i + 1 })?;
            *c += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / n as f64;
    let chi_square = if expected > 0.0 {
        counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
    } else {
        0.0
    };
    Ok(FairnessReport {
        counts,
        expected,
        chi_square,
        dof: n - 1,
        p_value: chi_square_sf(chi_square, n - 1),
    })
}

/// Upper-tail probability of a chi-square statistic; 1 when `dof == 0`.
pub fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(stat)
}

/// Pearson chi-square of subset frequencies against the uniform law over
/// all `C(n, m)` subsets, with its degrees of freedom.
pub fn subset_chi_square(history: &[SelectionVector], n: usize, m: usize) -> Result<(f64, usize)> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let subsets = binomial(n, m);
    let mut freq = std::collections::HashMap::<u64, u64>::new();
    for s in history {
        if s.selected.len() != m {
            return Err(Error::Selection { n, m: s.selected.len() });
        }
        let mask = s.selected.iter().fold(0u64, |acc, &i| acc | (1 << i));
        *freq.entry(mask).or_default() += 1;
    }
    let expected = history.len() as f64 / subsets as f64;
    let seen: f64 = freq.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let unseen = (subsets - freq.len() as u64) as f64 * expected;
    Ok((seen + unseen, subsets as usize - 1))
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}
