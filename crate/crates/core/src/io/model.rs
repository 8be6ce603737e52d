//! Model directories: `model.json` (architecture and tensor index) plus one `KAT1` file
//! per parameter tensor. Conv weights are stored as `out x 9 x in`, linear weights as
//! `out x in x 1`, biases as `1 x n x 1`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::raw::{read_raw, write_raw, RawTensor};
use crate::error::{Error, Result};
use crate::net::{NetSpec, ToyNet};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "keepaug-toynet-v1";
pub const MODEL_FILE: &str = "model.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format: String,
    pub spec: NetSpec,
    /// Tensor name to file name.
    pub tensors: BTreeMap<String, String>,
}

fn tensor_shape<T: Scalar>(net: &ToyNet<T>, name: &str) -> (usize, usize, usize) {
    let (kind, field) = name.split_once('.').expect("tensor names are `<layer>.<field>`");
    if let Some(k) = kind.strip_prefix("block") {
        let b = &net.blocks[k.parse::<usize>().expect("block index")];
        return match field {
            "weight" => (b.out_channels, 9, b.in_channels),
            _ => (1, b.out_channels, 1),
        };
    }
    let l = if kind == "classifier" {
        &net.classifier
    } else {
        net.early_head.as_ref().expect("early head exists")
    };
    match field {
        "weight" => (l.out_features, l.in_features, 1),
        _ => (1, l.out_features, 1),
    }
}

pub fn write_model<T: Scalar>(dir: impl AsRef<Path>, net: &ToyNet<T>) -> Result<ModelManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut tensors = BTreeMap::new();
    for (name, values) in net.named_params() {
        let (h, w, c) = tensor_shape(net, &name);
        let file = format!("{name}.kat");
        let raw = RawTensor::new(h, w, c, values.iter().map(|v| v.as_f32()).collect())?;
        write_raw(dir.join(&file), &raw)?;
        tensors.insert(name, file);
    }
    let manifest = ModelManifest {
        format: MODEL_FORMAT.into(),
        spec: net.spec().clone(),
        tensors,
    };
    fs::write(dir.join(MODEL_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn read_model<T: Scalar>(dir: impl AsRef<Path>) -> Result<ToyNet<T>> {
    let dir = dir.as_ref();
    let manifest: ModelManifest = serde_json::from_slice(&fs::read(dir.join(MODEL_FILE))?)?;
    if manifest.format != MODEL_FORMAT {
        return Err(Error::invalid(format!("unknown model format `{}`", manifest.format)));
    }
    let mut net = ToyNet::<T>::zeros(manifest.spec.clone())?;
    let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
    let shapes: Vec<_> = names.iter().map(|n| tensor_shape(&net, n)).collect();
    for ((name, shape), slot) in names.iter().zip(shapes).zip(net.params_mut()) {
        let file = manifest
            .tensors
            .get(name)
            .ok_or_else(|| Error::invalid(format!("model is missing tensor `{name}`")))?;
        let raw = read_raw(dir.join(file))?;
        if (raw.height, raw.width, raw.channels) != shape {
            return Err(Error::dims(
                format!("{name} {shape:?}"),
                format!("{:?}", (raw.height, raw.width, raw.channels)),
            ));
        }
        *slot = raw.data.iter().map(|&v| T::of(v as f64)).collect();
    }
    Ok(net)
}
