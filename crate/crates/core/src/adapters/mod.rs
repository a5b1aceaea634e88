//! Subject adapters, the shared mapper, their gradients and training regimes.

mod activation;
mod grad;
mod io;
mod model;
mod train;

pub use activation::{gelu, gelu_grad, Activation};
pub use grad::{
    gradients, loss, loss_and_gradients, mse_loss, AdapterTarget, Gradients, LossBreakdown,
};
pub use io::{adapter_from_json, adapter_to_json, mapper_from_json, mapper_to_json};
pub use model::{AdapterKind, AdapterModel, Dense, MapperModel, Params};
pub use train::{
    align_adapter_stage1, finetune, train_end_to_end, train_reference, AdapterTerm, Architecture,
    EpochRecord, FinetuneData, FinetuneOutcome, TrainConfig, TrainMode, TrainTrace,
};
