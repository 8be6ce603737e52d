mod augment;
mod bench;
mod fidelity;
mod preview;
mod saliency;
mod synthetic;
mod train;

use std::path::Path;

use keepaugment::augment::AugmentConfig;
use keepaugment::io::{read_config, read_dataset_dir, read_model, read_ppm, read_raw, read_cifar10, DatasetRecord};
use keepaugment::{Image, SaliencyMap, ToyNet};

use crate::args::Command;
use crate::error::{CliError, CliResult};

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::MakeSynthetic(a) => synthetic::run(a),
        Command::TrainToy(a) => train::run(a),
        Command::Augment(a) => augment::run(a),
        Command::Saliency(a) => saliency::run(a),
        Command::Preview(a) => preview::run(a),
        Command::Fidelity(a) => fidelity::run(a),
        Command::Bench(a) => bench::run(a),
    }
}

fn with_path<T>(what: &str, path: &Path, r: keepaugment::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        keepaugment::Error::Io(source) => CliError::Io {
            context: format!("{what} {}", path.display()),
            source,
        },
        other => other.into(),
    })
}

/// Records and class count from a dataset directory or a CIFAR-10 batch file.
pub(crate) fn load_data(path: &Path) -> CliResult<(Vec<DatasetRecord<f32>>, usize)> {
    if path.is_dir() {
        let (manifest, records) = with_path("reading dataset", path, read_dataset_dir(path))?;
        Ok((records, manifest.num_classes))
    } else {
        Ok((with_path("reading dataset", path, read_cifar10(path))?, 10))
    }
}

pub(crate) fn load_model(path: &Path) -> CliResult<ToyNet<f32>> {
    with_path("reading model", path, read_model(path))
}

pub(crate) fn load_config(path: Option<&Path>) -> CliResult<AugmentConfig> {
    match path {
        Some(p) => with_path("reading config", p, read_config(p)),
        None => Ok(AugmentConfig::default()),
    }
}

/// `.ppm` files are decoded as PPM, anything else as a raw tensor.
pub(crate) fn load_image(path: &Path) -> CliResult<Image<f32>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) {
        with_path("reading image", path, read_ppm(path))
    } else {
        let raw = with_path("reading image", path, read_raw(path))?;
        Ok(raw.into_image()?)
    }
}

/// One map per record from `dir`, using the dataset record file names.
pub(crate) fn load_maps(dir: &Path, count: usize) -> CliResult<Vec<SaliencyMap<f32>>> {
    (0..count)
        .map(|index| {
            let path = dir.join(keepaugment::io::record_file_name(index));
            if !path.exists() {
                return Err(keepaugment::Error::MissingSaliency { index }.into());
            }
            let image = with_path("reading saliency map", &path, read_raw(&path))?.into_image::<f32>()?;
            Ok(SaliencyMap::from_image(&image)?)
        })
        .collect()
}

/// Checks that `net` accepts `height x width` images.
pub(crate) fn check_input(net: &ToyNet<f32>, height: usize, width: usize, what: &str) -> CliResult<()> {
    let (h, w, _) = net.input_dims();
    if (h, w) != (height, width) {
        return Err(CliError::usage(format!(
            "{what} expects {h}x{w} inputs but the data is {height}x{width}"
        )));
    }
    Ok(())
}

pub(crate) fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    let items: Result<Vec<T>, _> = text.split(',').map(|s| s.trim().parse()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::usage(format!("invalid {what} list `{text}`"))),
    }
}

/// Min-max normalised single-channel view of `map`; a flat map renders black.
pub(crate) fn heat(map: &SaliencyMap<f32>) -> keepaugment::Result<Image<f32>> {
    let (lo, hi) = (map.min(), map.max());
    let span = hi - lo;
    let values = map
        .values()
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    Image::new(map.height(), map.width(), 1, values)
}
