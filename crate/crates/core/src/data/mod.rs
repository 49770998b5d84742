//! Priors, noise, dataset storage and image ingestion.
//!
//! A dataset directory holds `manifest.json` and `records.cwt`. Each record
//! is three `CWT1` tensors of shape `H x W`: the inferred field, the noisy
//! measurement and the clean measurement.

mod dataset;
mod images;
mod pairs;
mod prior;
mod tensor_io;

pub use dataset::{
    build_dataset, read_dataset, write_dataset, DataConfig, Dataset, DatasetManifest, DatasetSpec, DatasetWriter,
    FieldPair, ForwardSpec, NoiseSpec, DATASET_FORMAT_VERSION, MANIFEST_FILE, RECORDS_FILE,
};
pub use images::{
    image_to_field, load_image_dataset, read_idx, write_idx, write_pgm, write_pgm_auto, write_png, ImageStack,
    IDX_IMAGE_MAGIC,
};
pub use pairs::{gather, FieldPairs};
pub use prior::{add_noise, sample_prior, Prior, PriorSpec, Range};
pub use tensor_io::{load_tensor, read_tensor, save_tensor, write_tensor, OffsetReader, TENSOR_MAGIC};

#[cfg(test)]
mod tests;
