//! PQV images, normalisation constants, labelled datasets, splits, batching and the
//! dataset file format.

mod dataset;
mod image;
mod io;

pub use dataset::{
    batch_iter, split_dataset, Batch, BatchIter, Label, LabeledDataset, NormScope, Sample, Split,
    Splits,
};
pub use image::{
    compute_norms, encode_into, encode_snapshot, raw_channels, NormConstants, PqvImage, CHANNELS,
};
pub use io::{read_dataset, write_dataset, DATASET_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("no snapshots to compute normalisation constants from")]
    Empty,
    #[error("channel {0} is identically zero across the dataset")]
    DegenerateChannel(&'static str),
    #[error("{0}")]
    Mismatch(String),
    #[error("dataset format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
