use super::matrix::{gates, ComplexMatrix};
use super::state::{conjugate_local, DensityMatrix, TOL};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Identity,
    Depolarizing,
    Dephasing,
    AmplitudeDamping,
    Composite,
    Custom,
}

/// CPTP map `ρ ↦ Σ_k E_k ρ E_k†` in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    operators: Vec<ComplexMatrix>,
    kind: ChannelKind,
}

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Probability { name, value });
    }
    Ok(())
}

impl KrausChannel {
    /// Validates shape and completeness `‖Σ E_k†E_k − I‖_F < 1e-10`.
    pub fn new(operators: Vec<ComplexMatrix>, kind: ChannelKind) -> Result<Self> {
        let ch = Self::new_unchecked(operators, kind)?;
        let dev = ch.completeness_deviation();
        if dev >= TOL {
            return Err(Error::Incomplete(dev));
        }
        Ok(ch)
    }

    /// Skips the completeness check. Intended for negative controls; such a
    /// channel is rejected again by [`apply_channel`].
    pub fn new_unchecked(operators: Vec<ComplexMatrix>, kind: ChannelKind) -> Result<Self> {
        let first = operators.first().ok_or(Error::Incomplete(f64::INFINITY))?;
        let dim = first.rows();
        for op in &operators {
            if !op.is_square() {
                return Err(Error::NotSquare {
                    rows: op.rows(),
                    cols: op.cols(),
                });
            }
            if op.rows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: op.rows(),
                });
            }
        }
        Ok(Self { operators, kind })
    }

    pub fn identity() -> Self {
        Self {
            operators: vec![ComplexMatrix::identity(2)],
            kind: ChannelKind::Identity,
        }
    }

    /// `(1−p)ρ + (p/3)(XρX + YρY + ZρZ)`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        check_probability("p", p)?;
        let mut ops = weighted(&[
            (1.0 - p, ComplexMatrix::identity(2)),
            (p / 3.0, gates::pauli_x()),
            (p / 3.0, gates::pauli_y()),
            (p / 3.0, gates::pauli_z()),
        ]);
        if ops.is_empty() {
            ops.push(ComplexMatrix::zeros(2, 2));
        }
        Ok(Self::tagged(ops, ChannelKind::Depolarizing, p == 0.0))
    }

    /// `(1−p)ρ + pZρZ`.
    pub fn dephasing(p: f64) -> Result<Self> {
        check_probability("p", p)?;
        let ops = weighted(&[
            (1.0 - p, ComplexMatrix::identity(2)),
            (p, gates::pauli_z()),
        ]);
        Ok(Self::tagged(ops, ChannelKind::Dephasing, p == 0.0))
    }

    /// Energy relaxation: `E0 = [[1,0],[0,√(1−γ)]]`, `E1 = [[0,√γ],[0,0]]`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_probability("gamma", gamma)?;
        let mut ops = vec![ComplexMatrix::from_real([
            [1.0, 0.0],
            [0.0, (1.0 - gamma).sqrt()],
        ])];
        if gamma > 0.0 {
            ops.push(ComplexMatrix::from_real([[0.0, gamma.sqrt()], [0.0, 0.0]]));
        }
        Ok(Self::tagged(ops, ChannelKind::AmplitudeDamping, gamma == 0.0))
    }

    fn tagged(operators: Vec<ComplexMatrix>, kind: ChannelKind, trivial: bool) -> Self {
        Self {
            operators,
            kind: if trivial { ChannelKind::Identity } else { kind },
        }
    }

    /// Channel applying `self` first, then `next`.
    pub fn then(&self, next: &KrausChannel) -> Result<Self> {
        if self.dim() != next.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: next.dim(),
            });
        }
        let kind = match (self.kind, next.kind) {
            (ChannelKind::Identity, k) | (k, ChannelKind::Identity) => k,
            _ => ChannelKind::Composite,
        };
        if self.kind == ChannelKind::Identity {
            return Ok(Self { operators: next.operators.clone(), kind });
        }
        if next.kind == ChannelKind::Identity {
            return Ok(Self { operators: self.operators.clone(), kind });
        }
        let operators = next
            .operators
            .iter()
            .flat_map(|f| self.operators.iter().map(move |e| f * e))
            .collect();
        Ok(Self { operators, kind })
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.operators[0].rows()
    }

    pub fn is_identity(&self) -> bool {
        self.kind == ChannelKind::Identity
    }

    /// Applies the channel to a whole register of matching dimension.
    pub fn apply(&self, state: &DensityMatrix) -> Result<DensityMatrix> {
        if self.dim() != state.dim() {
            return Err(Error::ChannelDimension {
                channel: self.dim(),
                expected: state.dim(),
            });
        }
        let dev = self.completeness_deviation();
        if dev >= TOL {
            return Err(Error::Incomplete(dev));
        }
        let dim = state.dim();
        let out = self
            .operators
            .iter()
            .map(|e| &(e * state.matrix()) * &e.adjoint())
            .fold(ComplexMatrix::zeros(dim, dim), |acc, m| &acc + &m);
        Ok(DensityMatrix::from_trusted(state.n_qubits(), out))
    }

    /// `‖Σ E_k†E_k − I‖_F`.
    pub fn completeness_deviation(&self) -> f64 {
        let dim = self.dim();
        let sum = self
            .operators
            .iter()
            .map(|e| &e.adjoint() * e)
            .fold(ComplexMatrix::zeros(dim, dim), |acc, m| &acc + &m);
        sum.distance(&ComplexMatrix::identity(dim))
    }
}

fn weighted(terms: &[(f64, ComplexMatrix)]) -> Vec<ComplexMatrix> {
    terms
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, m)| m.scale_real(w.sqrt()))
        .collect()
}

/// Applies a single-qubit channel to `target`.
pub fn apply_channel(
    state: &DensityMatrix,
    channel: &KrausChannel,
    target: usize,
) -> Result<DensityMatrix> {
    if channel.dim() != 2 {
        return Err(Error::ChannelDimension {
            channel: channel.dim(),
            expected: 2,
        });
    }
    let dev = channel.completeness_deviation();
    if dev >= TOL {
        return Err(Error::Incomplete(dev));
    }
    if target >= state.n_qubits() {
        return Err(Error::QubitOutOfRange {
            index: target,
            n_qubits: state.n_qubits(),
        });
    }
    if channel.is_identity() {
        return Ok(state.clone());
    }
    let bit = 1 << (state.n_qubits() - 1 - target);
    let dim = state.dim();
    let out = channel
        .operators
        .iter()
        .map(|e| conjugate_local(state.matrix(), e, bit))
        .fold(ComplexMatrix::zeros(dim, dim), |acc, m| &acc + &m);
    Ok(DensityMatrix::from_trusted(state.n_qubits(), out))
}
