//! Quantum aggregation: circuit construction and execution, noise
//! mitigation, and the empirical counterparts of the aggregation guarantees.

mod aggregate;
mod mitigate;
mod plan;
mod theory;

pub use aggregate::{
    aggregate, client_groups, median_combine, replicated_aggregate, AggregateOutput,
    AggregationConfig, Mitigation,
};
pub use mitigate::{
    calibrate, inversion_factor, mitigate_channel_inversion, TransferFunction, DEFAULT_PROBES,
    MIN_ATTENUATION,
};
pub use plan::{
    build_plan, build_plan_with_depth, run_plan, AggregateEstimate, CircuitPlan, NoiseDeviation,
    Readout, MAX_DEPTH,
};
pub use theory::{
    bound_soundness, commutation_check, empirical_variance, fit_sigma_gate, measure_all, measure_variance,
    noise_deviation, random_variance_configs, variance_bound, CommutationCheck, SoundnessPlan, SoundnessReport,
    VarianceConfig, VariancePoint,
};
