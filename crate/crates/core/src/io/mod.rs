//! On-disk formats: raw tensors, binary PPM, CIFAR-10 records, dataset directories,
//! model directories and JSON run configs.

mod cifar;
mod config;
mod dataset;
mod model;
mod ppm;
mod raw;
mod synthetic;

pub use cifar::{decode_cifar10, read_cifar10, CIFAR_RECORD_BYTES};
pub use config::{read_config, write_config};
pub use dataset::{
    load_dataset, read_dataset_dir, record_file_name, write_dataset_dir, DatasetManifest, ManifestEntry, DATASET_FORMAT,
    MANIFEST_FILE,
};
pub use model::{read_model, write_model, ModelManifest, MODEL_FILE, MODEL_FORMAT};
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
pub use raw::{decode_raw, encode_raw, read_raw, write_raw, RawTensor, RAW_MAGIC};
pub use synthetic::{make_synthetic, make_synthetic_annotated, SyntheticRecord, PATCH};

use crate::scalar::Scalar;
use crate::tensor::Image;

/// One labelled image.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord<T> {
    pub image: Image<T>,
    pub label: usize,
}

impl<T: Scalar> DatasetRecord<T> {
    pub fn new(image: Image<T>, label: usize) -> Self {
        Self { image, label }
    }

    pub fn cast<U: Scalar>(&self) -> DatasetRecord<U> {
        DatasetRecord {
            image: self.image.cast(),
            label: self.label,
        }
    }
}
