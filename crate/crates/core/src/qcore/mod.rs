//! Dense density-matrix simulation for registers of up to six qubits.

mod channel;
mod eigen;
mod matrix;
mod measure;
mod noise;
mod state;

pub use channel::{apply_channel, ChannelKind, KrausChannel};
pub use eigen::hermitian_eigenvalues;
pub use matrix::{gates, ComplexMatrix, C0, C1, CI};
pub use measure::{readout_prob_one, sample_measurement, Counts};
pub(crate) use measure::sample_counts;
pub use noise::NoiseModel;
pub use state::{
    apply_unitary, expectation, make_pure_state, ry, trace_distance, DensityMatrix, Observable,
    MAX_QUBITS, TOL,
};
