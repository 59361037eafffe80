//! Learning substrate shared by both protocols: models, data partitioning,
//! local SGD and weighted aggregation.

mod aggregate;
mod data;
mod model;
mod train;

pub use aggregate::{aggregate, evaluate};
pub use data::{partition_noniid, DatasetShard, Samples, SyntheticSpec};
pub use model::{ModelSpec, ModelWeights, DEFAULT_BYTES_PER_ELEMENT};
pub use train::{local_train, TrainConfig};
