//! Dataset directories: `manifest.json` plus one `KAT1` file per image.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::raw::{read_raw, write_raw, RawTensor};
use super::{read_cifar10, DatasetRecord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DATASET_FORMAT: &str = "keepaug-dataset-v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    /// Hard label (the heaviest class when `mix` is present).
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<Vec<(usize, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub num_classes: usize,
    pub records: Vec<ManifestEntry>,
}

pub fn record_file_name(index: usize) -> String {
    format!("{index:06}.kat")
}

/// Writes `records` into `dir`. `mixes[i]`, when given, is stored as the soft label.
pub fn write_dataset_dir<T: Scalar>(
    dir: impl AsRef<Path>,
    records: &[DatasetRecord<T>],
    num_classes: usize,
    mixes: Option<&[Vec<(usize, f64)>]>,
) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(records.len());
    for (k, r) in records.iter().enumerate() {
        let file = record_file_name(k);
        write_raw(dir.join(&file), &RawTensor::from_image(&r.image))?;
        entries.push(ManifestEntry {
            file,
            label: r.label,
            mix: mixes.map(|m| m[k].clone()),
        });
    }
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        num_classes,
        records: entries,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn read_dataset_dir<T: Scalar>(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<DatasetRecord<T>>)> {
    let dir = dir.as_ref();
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::invalid(format!("unknown dataset format `{}`", manifest.format)));
    }
    let records = manifest
        .records
        .iter()
        .map(|e| {
            if e.label >= manifest.num_classes {
                return Err(Error::invalid(format!(
                    "label {} in {} exceeds num_classes {}",
                    e.label, e.file, manifest.num_classes
                )));
            }
            Ok(DatasetRecord::new(read_raw(dir.join(&e.file))?.into_image()?, e.label))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, records))
}

/// Loads a dataset directory, or a CIFAR-10 binary batch when `path` is a file.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord<T>>> {
    let path = path.as_ref();
    if path.is_dir() {
        Ok(read_dataset_dir(path)?.1)
    } else {
        read_cifar10(path)
    }
}
