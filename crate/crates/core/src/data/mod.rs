//! Datasets and their distribution over clients.

mod idx;
mod partition;
mod synthetic;

pub use idx::{load_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{
    partition, partition_feature_groups, partition_iid, partition_noisy, partition_pathological, split_train_val,
    ClientShard, PartitionResult, PartitionScheme, PartitionSpec, NOISY_RESERVE_FRACTION,
};
pub use synthetic::{class_means, generate_feature_shifted, generate_synthetic, SyntheticSpec};
