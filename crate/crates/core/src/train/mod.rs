//! Desk-scale training: datasets, manual-backprop networks, a minibatch
//! trainer and barrier measurement along paths.

mod barrier;
mod data;
mod network;
mod trainer;

pub use barrier::{measure_barrier, neuron_norms, BarrierReport, PathKind, PathPoint};
pub use data::{
    find_mnist, load_mnist_idx, parse_idx_images, parse_idx_labels, synthetic_digits, teacher_student_data, Dataset,
    Split, Targets, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use network::{Architecture, BatchEval, LossKind, MlpArch, MlpModel, StudentArch};
pub use trainer::{
    dataset_loss, train_mlp, train_network, DataOracle, OptimizerKind, TrainConfig, TrainOutcome, EVAL_SUBSET,
};
