//! Hermitian eigenvalues via cyclic Jacobi rotations.
//!
//! A Hermitian `H = A + iB` is embedded as the real symmetric matrix
//! `[[A, -B], [B, A]]`, whose spectrum is the spectrum of `H` with every
//! eigenvalue doubled. Jacobi sweeps on the embedding are slow but exact to
//! machine precision at the sizes used here (at most 128x128).

use super::ComplexMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a real symmetric matrix given row-major, ascending.
fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

/// Eigenvalues of a Hermitian matrix in ascending order. The anti-Hermitian
/// part of the input, if any, is discarded.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
    assert!(h.is_square(), "eigenvalues need a square matrix");
    let n = h.rows();
    let m = 2 * n;
    let mut emb = vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            // Symmetrize so tiny Hermiticity drift cannot break the embedding.
            let z = (h.get(r, c) + h.get(c, r).conj()) * 0.5;
            emb[r * m + c] = z.re;
            emb[(r + n) * m + (c + n)] = z.re;
            emb[r * m + (c + n)] = -z.im;
            emb[(r + n) * m + c] = z.im;
        }
    }
    let doubled = symmetric_eigenvalues(emb, m);
    // Pairs are adjacent after sorting; average them to damp rounding.
    doubled
        .chunks(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::matrix::{gates, C1};
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn pauli_spectra() {
        for p in [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()] {
            let e = hermitian_eigenvalues(&p);
            assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_closed_form_two_by_two() {
        // [[a, b], [b*, d]] has eigenvalues (a+d)/2 ± sqrt(((a-d)/2)^2 + |b|^2).
        let (a, d) = (0.3, -1.2);
        let b = Complex64::new(0.4, -0.7);
        let h = ComplexMatrix::from_rows([
            [C1 * a, b],
            [b.conj(), C1 * d],
        ]);
        let mid = (a + d) / 2.0;
        let rad = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
        let e = hermitian_eigenvalues(&h);
        assert!((e[0] - (mid - rad)).abs() < 1e-13);
        assert!((e[1] - (mid + rad)).abs() < 1e-13);
    }

    #[test]
    fn diagonal_with_complex_offdiag_block() {
        // Kronecker product of two Paulis has eigenvalues ±1, each twice.
        let h = gates::pauli_y().kron(&gates::pauli_x());
        let e = hermitian_eigenvalues(&h);
        let expected = [-1.0, -1.0, 1.0, 1.0];
        for (x, y) in e.iter().zip(expected) {
            assert!((x - y).abs() < 1e-13, "{e:?}");
        }
    }
}
