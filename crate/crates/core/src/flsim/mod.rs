//! Federated learning harness: synthetic non-IID data, a multinomial
//! logistic model, and the FedAvg / QFL / NR-QFL round loop.

mod config;
mod data;
mod model;
mod round;

pub use config::{BoundsMode, ExperimentConfig, Strategy};
pub use data::{dirichlet_alpha, make_partition, DataPartition, Dataset, Mixture};
pub use model::{
    classification_metrics, evaluate, fedavg_aggregate, gradient_variance, local_train, loss_and_grad, predict,
    ClientState, GlobalModel,
};
pub use round::{
    bounds_pairs, round_bytes, run_experiment, Experiment, ExperimentResult, RoundRecord, BYTES_PER_BOUNDS,
    BYTES_PER_WEIGHT,
};
