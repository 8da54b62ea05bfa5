//! Attention-fused multi-view single-layer GCN. Each gene contributes one
//! view: a node's own features concatenated with the mean features of the
//! nodes its neighbor table lists, through a ReLU layer. Views are fused by
//! attention per endpoint side and pairs are scored by `sigmoid(y_u . y_i)`.

mod forward;
mod gradcheck;
mod io;
mod objective;
mod params;
mod train;

pub use forward::{embed_node, fuse, fuse_with, margin_loss, score, sigmoid, view_embed, Fusion};
pub use gradcheck::{grad_check, random_micro_instance, relative_error, GradCheck, MicroInstance, KINK_MARGIN};
pub use io::{checkpoint_from_json, checkpoint_to_json, Checkpoint, export_features, import_features, load_checkpoint, save_checkpoint};
pub use objective::{batch_loss, batch_loss_grad, BatchLoss, Example, LossConfig};
pub use params::{init_params, EndpointSizes, ModelParams};
pub use train::{check_tables, train, Embeddings, EpochStats, TrainConfig, TrainOutcome, Trainer};
