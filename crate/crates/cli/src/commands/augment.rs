use std::path::Path;

use keepaugment::augment::{augment_batch, AugmentConfig, SaliencySource, SidecarRecord};
use keepaugment::io::{write_dataset_dir, DatasetRecord};
use keepaugment::{Mode, SaliencyMap, SaliencyStrategy, ToyNet};
use serde::Serialize;

use super::{check_input, load_config, load_data, load_maps, load_model, with_path};
use crate::args::AugmentArgs;
use crate::error::{CliError, CliResult};

pub const RUN_MANIFEST_FILE: &str = "run.json";

/// Everything needed to rerun an augment invocation, plus what it did to each image.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a AugmentConfig,
    seed: u64,
    input: String,
    output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    saliency_dir: Option<String>,
    records: Vec<SidecarRecord>,
}

pub(crate) enum Source {
    None,
    Net(ToyNet<f32>),
    Maps(Vec<SaliencyMap<f32>>),
}

impl Source {
    pub(crate) fn as_source(&self) -> SaliencySource<'_, f32> {
        match self {
            Source::None => SaliencySource::None,
            Source::Net(n) => SaliencySource::Net(n),
            Source::Maps(m) => SaliencySource::Maps(m),
        }
    }
}

/// Resolves `--model` / `--saliency-dir` for `cfg` on `records`.
pub(crate) fn resolve_source(
    cfg: &AugmentConfig,
    model: Option<&Path>,
    saliency_dir: Option<&Path>,
    records: &[DatasetRecord<f32>],
    required: bool,
) -> CliResult<Source> {
    match (model, saliency_dir) {
        (Some(_), Some(_)) => Err(CliError::usage("give either --model or --saliency-dir, not both")),
        (None, None) if required => Err(CliError::usage(format!(
            "mode {} needs a saliency source: --model or --saliency-dir",
            cfg.mode.name()
        ))),
        (None, None) => Ok(Source::None),
        (Some(path), None) => {
            if cfg.saliency == SaliencyStrategy::External {
                return Err(CliError::usage("external saliency needs --saliency-dir"));
            }
            let net = load_model(path)?;
            if let Some(first) = records.first() {
                let (h, w) = cfg.saliency.net_input(first.image.height(), first.image.width());
                check_input(&net, h, w, &format!("model for {} saliency", cfg.saliency.name()))?;
            }
            Ok(Source::Net(net))
        }
        (None, Some(dir)) => Ok(Source::Maps(load_maps(dir, records.len())?)),
    }
}

pub fn run(a: AugmentArgs) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let parallelism = a.parallelism.unwrap_or(cfg.parallelism);
    if parallelism == 0 {
        return Err(CliError::usage("--parallelism must be at least 1"));
    }
    let (records, num_classes) = load_data(&a.data)?;
    let source = resolve_source(
        &cfg,
        a.model.as_deref(),
        a.saliency_dir.as_deref(),
        &records,
        cfg.mode.needs_saliency(),
    )?;

    let out = augment_batch(&records, &cfg, source.as_source(), parallelism)?;
    let augmented: Vec<DatasetRecord<f32>> = out
        .iter()
        .map(|o| DatasetRecord::new(o.image.clone(), o.label.dominant()))
        .collect();
    let mixes: Vec<Vec<(usize, f64)>> = out.iter().map(|o| o.label.entries().to_vec()).collect();
    let mixes = (cfg.mode == Mode::KeepCutmix).then_some(mixes.as_slice());
    with_path("writing dataset", &a.out, write_dataset_dir(&a.out, &augmented, num_classes, mixes))?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        seed: cfg.seed,
        input: a.data.display().to_string(),
        output: a.out.display().to_string(),
        model: a.model.as_ref().map(|p| p.display().to_string()),
        saliency_dir: a.saliency_dir.as_ref().map(|p| p.display().to_string()),
        records: out.into_iter().map(|o| o.log).collect(),
    };
    let path = a.out.join(RUN_MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    })?;
    println!("augmented {} records ({}) into {}", augmented.len(), cfg.mode.name(), a.out.display());
    Ok(())
}
