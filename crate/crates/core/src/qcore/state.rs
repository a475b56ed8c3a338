use num_complex::Complex64;

use super::eigen::hermitian_eigenvalues;
use super::matrix::{gates, ComplexMatrix, C0, C1};
use crate::{Error, Result};

pub const MAX_QUBITS: usize = 6;
pub const TOL: f64 = 1e-10;

/// Mixed state of an `n`-qubit register (1 ≤ n ≤ 6). Qubit 0 is the most
/// significant bit of the computational-basis index.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() && (2..=1 << MAX_QUBITS).contains(&dim) {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (all to 1e-10).
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let n_qubits =
            qubits_for_dim(matrix.rows()).ok_or(Error::BadStateLength(matrix.rows()))?;
        let herm = matrix.hermitian_deviation();
        if herm > TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:e})")));
        }
        let tr = matrix.trace();
        if (tr - C1).norm() > TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = hermitian_eigenvalues(&matrix)[0];
        if min_eig < -TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { n_qubits, matrix })
    }

    /// Wraps a matrix produced by a CPTP operation on a valid state.
    pub(crate) fn from_trusted(n_qubits: usize, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.rows(), 1 << n_qubits);
        Self { n_qubits, matrix }
    }

    /// `|0…0⟩⟨0…0|`.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::BadStateLength(1 << n_qubits.min(16)));
        }
        let dim = 1 << n_qubits;
        let mut m = ComplexMatrix::zeros(dim, dim);
        m.set(0, 0, C1);
        Ok(Self::from_trusted(n_qubits, m))
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::BadStateLength(1 << n_qubits.min(16)));
        }
        let dim = 1 << n_qubits;
        Ok(Self::from_trusted(
            n_qubits,
            ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        ))
    }

    /// Random full-rank mixed state `G G† / Tr(G G†)` with `G` a complex
    /// Gaussian matrix.
    pub fn random<R: rand::Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        let dim = Self::zero_state(n_qubits)?.dim();
        let mut g = ComplexMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                let re: f64 = rng.sample(rand_distr::StandardNormal);
                let im: f64 = rng.sample(rand_distr::StandardNormal);
                g.set(r, c, Complex64::new(re, im));
            }
        }
        let gg = &g * &g.adjoint();
        let tr = gg.trace().re;
        let mut m = gg.scale_real(1.0 / tr);
        // Symmetrize away rounding so the Hermitian check is exact.
        m = (&m + &m.adjoint()).scale_real(0.5);
        Self::from_matrix(m)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    fn check_qubit(&self, index: usize) -> Result<usize> {
        if index >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index,
                n_qubits: self.n_qubits,
            });
        }
        Ok(1 << (self.n_qubits - 1 - index))
    }

    /// Total probability of basis states whose `target` bit is 1.
    pub fn prob_one(&self, target: usize) -> Result<f64> {
        let bit = self.check_qubit(target)?;
        let p: f64 = (0..self.dim())
            .filter(|i| i & bit != 0)
            .map(|i| self.matrix.get(i, i).re)
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }
}

/// `|ψ⟩⟨ψ|` for a unit-norm amplitude vector of length 2..=64 (power of two).
pub fn make_pure_state(amplitudes: &[Complex64]) -> Result<DensityMatrix> {
    let dim = amplitudes.len();
    let n_qubits = qubits_for_dim(dim).ok_or(Error::BadStateLength(dim))?;
    if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("amplitudes"));
    }
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > TOL {
        return Err(Error::NotNormalized(norm));
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (r, a) in amplitudes.iter().enumerate() {
        for (c, b) in amplitudes.iter().enumerate() {
            m.set(r, c, a * b.conj());
        }
    }
    Ok(DensityMatrix::from_trusted(n_qubits, m))
}

/// `Ry(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`.
pub fn ry(theta: f64) -> Result<ComplexMatrix> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("rotation angle"));
    }
    let (s, c) = (theta / 2.0).sin_cos();
    Ok(ComplexMatrix::from_real([[c, -s], [s, c]]))
}

/// `op ρ op†` for a 2x2 `op` acting on the qubit selected by `bit`.
pub(crate) fn conjugate_local(rho: &ComplexMatrix, op: &ComplexMatrix, bit: usize) -> ComplexMatrix {
    let dim = rho.rows();
    let (u00, u01, u10, u11) = (op.get(0, 0), op.get(0, 1), op.get(1, 0), op.get(1, 1));
    let mut left = ComplexMatrix::zeros(dim, dim);
    for i0 in (0..dim).filter(|i| i & bit == 0) {
        let i1 = i0 | bit;
        for j in 0..dim {
            let a = rho.get(i0, j);
            let b = rho.get(i1, j);
            left.set(i0, j, u00 * a + u01 * b);
            left.set(i1, j, u10 * a + u11 * b);
        }
    }
    let (c00, c01, c10, c11) = (u00.conj(), u01.conj(), u10.conj(), u11.conj());
    let mut out = ComplexMatrix::zeros(dim, dim);
    for j0 in (0..dim).filter(|j| j & bit == 0) {
        let j1 = j0 | bit;
        for i in 0..dim {
            let a = left.get(i, j0);
            let b = left.get(i, j1);
            out.set(i, j0, a * c00 + b * c01);
            out.set(i, j1, a * c10 + b * c11);
        }
    }
    out
}

/// Applies a single-qubit unitary to `target`: `ρ → (I⊗U⊗I) ρ (I⊗U⊗I)†`.
pub fn apply_unitary(
    state: &DensityMatrix,
    u: &ComplexMatrix,
    target: usize,
) -> Result<DensityMatrix> {
    if u.rows() != 2 || u.cols() != 2 {
        return Err(Error::ChannelDimension {
            channel: u.rows(),
            expected: 2,
        });
    }
    let dev = u.unitary_deviation();
    if dev > TOL {
        return Err(Error::NotUnitary(dev));
    }
    let bit = state.check_qubit(target)?;
    Ok(DensityMatrix::from_trusted(
        state.n_qubits,
        conjugate_local(&state.matrix, u, bit),
    ))
}

/// Hermitian observable `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    matrix: ComplexMatrix,
}

impl Observable {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let dev = matrix.hermitian_deviation();
        if dev > TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { matrix })
    }

    pub fn pauli_z() -> Self {
        Self {
            matrix: gates::pauli_z(),
        }
    }

    pub fn pauli_x() -> Self {
        Self {
            matrix: gates::pauli_x(),
        }
    }

    /// `Z` on `target` of an `n_qubits` register, identity elsewhere.
    pub fn z_on(n_qubits: usize, target: usize) -> Result<Self> {
        if target >= n_qubits {
            return Err(Error::QubitOutOfRange {
                index: target,
                n_qubits,
            });
        }
        let mut m = ComplexMatrix::identity(1);
        for q in 0..n_qubits {
            let f = if q == target {
                gates::pauli_z()
            } else {
                ComplexMatrix::identity(2)
            };
            m = m.kron(&f);
        }
        Ok(Self { matrix: m })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// `Tr(Mρ)`.
pub fn expectation(state: &DensityMatrix, m: &Observable) -> Result<f64> {
    if m.matrix.rows() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            actual: m.matrix.rows(),
        });
    }
    let dim = state.dim();
    let mut acc = C0;
    for i in 0..dim {
        for k in 0..dim {
            acc += m.matrix.get(i, k) * state.matrix.get(k, i);
        }
    }
    debug_assert!(acc.im.abs() < 1e-9, "imaginary residue {}", acc.im);
    Ok(acc.re)
}

/// `½ Σ|λ_i|` over the eigenvalues of `ρ − σ`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    let diff = &rho.matrix - &sigma.matrix;
    let d = 0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = crate::seed::stream(11, &[]);
        for n in 1..=3 {
            for _ in 0..20 {
                let rho = DensityMatrix::random(n, &mut rng).unwrap();
                assert_eq!(rho.n_qubits(), n);
                assert!((rho.trace() - 1.0).abs() < 1e-12);
                assert!(rho.eigenvalues()[0] > 0.0);
            }
        }
    }

    #[test]
    fn pure_state_examples() {
        let zero = make_pure_state(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(zero.matrix(), &ComplexMatrix::from_real([[1.0, 0.0], [0.0, 0.0]]));

        let plus = make_pure_state(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        let half = ComplexMatrix::from_real([[0.5, 0.5], [0.5, 0.5]]);
        assert!(plus.matrix().distance(&half) < 1e-15);

        // (0.6, 0.8i): ρ01 = 0.6·(0.8i)* = −0.48i
        let s = make_pure_state(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let m = s.matrix();
        assert!((m.get(0, 0).re - 0.36).abs() < 1e-15);
        assert!((m.get(1, 1).re - 0.64).abs() < 1e-15);
        assert!((m.get(0, 1) - c(0.0, -0.48)).norm() < 1e-15);
        assert!((m.get(1, 0) - c(0.0, 0.48)).norm() < 1e-15);
        let eig = s.eigenvalues();
        assert!(eig[0].abs() < 1e-12 && (eig[1] - 1.0).abs() < 1e-12);
        assert!(DensityMatrix::from_matrix(m.clone()).is_ok());
    }

    #[test]
    fn pure_state_errors() {
        assert_eq!(
            make_pure_state(&[c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::NotNormalized(2f64.sqrt()))
        );
        assert!(matches!(
            make_pure_state(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            Err(Error::BadStateLength(3))
        ));
        assert!(matches!(make_pure_state(&[c(1.0, 0.0)]), Err(Error::BadStateLength(1))));
        let mut big = vec![c(0.0, 0.0); 128];
        big[0] = c(1.0, 0.0);
        assert!(matches!(make_pure_state(&big), Err(Error::BadStateLength(128))));
    }

    #[test]
    fn from_matrix_rejects_invalid() {
        let not_unit = ComplexMatrix::from_real([[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(DensityMatrix::from_matrix(not_unit), Err(Error::InvalidState(_))));
        let negative = ComplexMatrix::from_real([[1.5, 0.0], [0.0, -0.5]]);
        assert!(matches!(DensityMatrix::from_matrix(negative), Err(Error::InvalidState(_))));
        let nonherm = ComplexMatrix::from_real([[0.5, 0.2], [0.0, 0.5]]);
        assert!(matches!(DensityMatrix::from_matrix(nonherm), Err(Error::InvalidState(_))));
    }

    #[test]
    fn ry_examples() {
        assert!(ry(0.0).unwrap().distance(&ComplexMatrix::identity(2)) < 1e-15);
        let r = ry(PI).unwrap();
        assert!(r.distance(&ComplexMatrix::from_real([[0.0, -1.0], [1.0, 0.0]])) < 1e-15);
        assert!(ry(f64::NAN).is_err());
        assert!(ry(f64::INFINITY).is_err());

        // Ry(π/2)|0⟩: first column of the matrix.
        let r = ry(FRAC_PI_2).unwrap();
        assert!((r.get(0, 0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((r.get(1, 0).re - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn unitary_examples() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        let one = apply_unitary(&zero, &gates::pauli_x(), 0).unwrap();
        assert!(one.matrix().distance(&ComplexMatrix::from_real([[0.0, 0.0], [0.0, 1.0]])) < 1e-15);

        let mixed = make_pure_state(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let same = apply_unitary(&mixed, &ComplexMatrix::identity(2), 0).unwrap();
        assert_eq!(same, mixed);

        // Oracle: explicit U ρ U† by full matrix products.
        let u = ry(FRAC_PI_2).unwrap();
        let full = &(&u * zero.matrix()) * &u.adjoint();
        let plus = apply_unitary(&zero, &u, 0).unwrap();
        assert!(plus.matrix().distance(&full) < 1e-15);
        assert!(plus.matrix().distance(&ComplexMatrix::from_real([[0.5, 0.5], [0.5, 0.5]])) < 1e-15);

        assert!(matches!(
            apply_unitary(&zero, &ComplexMatrix::from_real([[1.0, 1.0], [0.0, 1.0]]), 0),
            Err(Error::NotUnitary(_))
        ));
        assert!(matches!(
            apply_unitary(&zero, &u, 1),
            Err(Error::QubitOutOfRange { index: 1, n_qubits: 1 })
        ));
    }

    #[test]
    fn local_application_matches_kronecker_product() {
        let u = ry(0.7).unwrap();
        let mut amps = vec![c(0.0, 0.0); 8];
        amps[0] = c(0.5, 0.0);
        amps[3] = c(0.0, 0.5);
        amps[5] = c(0.5, 0.5);
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        let rho = make_pure_state(&amps).unwrap();
        let id = ComplexMatrix::identity(2);
        for target in 0..3 {
            let mut full = ComplexMatrix::identity(1);
            for q in 0..3 {
                full = full.kron(if q == target { &u } else { &id });
            }
            let oracle = &(&full * rho.matrix()) * &full.adjoint();
            let got = apply_unitary(&rho, &u, target).unwrap();
            assert!(got.matrix().distance(&oracle) < 1e-14);
        }
    }

    #[test]
    fn expectation_examples() {
        let z = Observable::pauli_z();
        assert_eq!(expectation(&DensityMatrix::zero_state(1).unwrap(), &z).unwrap(), 1.0);
        assert_eq!(expectation(&DensityMatrix::maximally_mixed(1).unwrap(), &z).unwrap(), 0.0);
        let s = apply_unitary(&DensityMatrix::zero_state(1).unwrap(), &ry(0.6).unwrap(), 0).unwrap();
        let e = expectation(&s, &z).unwrap();
        assert!((e - 0.6f64.cos()).abs() < 1e-15);
        assert!((e - 0.825_335_614_909_678_3).abs() < 1e-12);
        assert!(matches!(
            expectation(&DensityMatrix::zero_state(2).unwrap(), &z),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Observable::new(ComplexMatrix::from_real([[0.0, 1.0], [0.0, 0.0]])).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let zero = DensityMatrix::zero_state(1).unwrap();
        let one = apply_unitary(&zero, &gates::pauli_x(), 0).unwrap();
        assert!(trace_distance(&zero, &zero).unwrap().abs() < 1e-15);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&zero, &DensityMatrix::zero_state(2).unwrap()).is_err());
    }

    #[test]
    fn prob_one_marginal() {
        let mut amps = vec![c(0.0, 0.0); 4];
        amps[1] = c(0.6, 0.0); // |01⟩
        amps[2] = c(0.8, 0.0); // |10⟩
        let s = make_pure_state(&amps).unwrap();
        assert!((s.prob_one(0).unwrap() - 0.64).abs() < 1e-15);
        assert!((s.prob_one(1).unwrap() - 0.36).abs() < 1e-15);
        assert!(s.prob_one(2).is_err());
    }
}
