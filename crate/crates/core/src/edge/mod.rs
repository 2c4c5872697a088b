//! Device-side processing: local training, error feedback, top-k
//! sparsification, compression and power scaling.

mod dataset;
mod device;
mod idx;
mod model;

pub use dataset::{partition, synthetic_classification, DatasetShard, ShardManifest};
pub use device::{
    accumulate_and_sparsify, choose_alpha, compress, compress_and_scale, local_update,
    DeviceState, PowerScaling,
};
pub use idx::{load_idx_dataset, write_idx_images, write_idx_labels};
pub use model::{evaluate, ModelState, Objective, QuadraticObjective};
