//! Batch driver: per-image saliency, mode dispatch and sidecar logging.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AugmentConfig, Mode};
use super::keep::{keep_cutmix, keep_cutout, keep_paste, random_rect, MixedLabel};
use super::policy::{apply_policy_logged, AppliedOp};
use crate::error::{Error, Result};
use crate::io::DatasetRecord;
use crate::net::ToyNet;
use crate::rng::RngStream;
use crate::saliency::{compute_saliency, SaliencyMap, SaliencyStrategy};
use crate::scalar::Scalar;
use crate::tensor::{cut_random, cut_zero, Image, Rect};

/// Where keep-* modes get their maps from.
#[derive(Clone, Copy, Debug)]
pub enum SaliencySource<'a, T> {
    None,
    /// Saliency is computed with the config's strategy. For low-res strategies this must
    /// be the reduced-resolution net.
    Net(&'a ToyNet<T>),
    /// One precomputed map per example, in order.
    Maps(&'a [SaliencyMap<T>]),
}

/// What was done to one image; enough to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub index: usize,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<Rect>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ops: Vec<AppliedOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedExample<T> {
    pub image: Image<T>,
    pub label: MixedLabel,
    pub log: SidecarRecord,
}

fn saliency_for<T: Scalar>(
    examples: &[DatasetRecord<T>],
    index: usize,
    cfg: &AugmentConfig,
    source: SaliencySource<'_, T>,
) -> Result<SaliencyMap<T>> {
    let ex = &examples[index];
    match source {
        SaliencySource::Maps(maps) => maps.get(index).cloned().ok_or(Error::MissingSaliency { index }),
        SaliencySource::Net(net) => match cfg.saliency {
            SaliencyStrategy::External => Err(Error::MissingSaliency { index }),
            strategy => compute_saliency(strategy, net, &ex.image, ex.label),
        },
        SaliencySource::None => Err(Error::MissingSaliency { index }),
    }
}

/// Applies `cfg.mode` to one record. `partner` is the cut-mix donor and `map` the
/// record's saliency; each is required only by the modes that use it.
pub fn apply_mode<T: Scalar, R: Rng + ?Sized>(
    ex: &DatasetRecord<T>,
    index: usize,
    partner: Option<(usize, &DatasetRecord<T>)>,
    map: Option<&SaliencyMap<T>>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<AugmentedExample<T>> {
    let (h, w) = (ex.image.height(), ex.image.width());
    let mut log = SidecarRecord {
        index,
        mode: cfg.mode,
        rect: None,
        ops: Vec::new(),
        partner: None,
        lambda: None,
    };
    let mut label = MixedLabel::hard(ex.label);
    let need_map = || map.ok_or(Error::MissingSaliency { index });

    let image = match cfg.mode {
        Mode::KeepCutout | Mode::KeepErase => {
            let (out, rect) = keep_cutout(&ex.image, need_map()?, cfg, rng)?;
            log.rect = Some(rect);
            out
        }
        Mode::KeepPaste => {
            let (out, rect, ops) = keep_paste(&ex.image, need_map()?, cfg, rng)?;
            log.rect = Some(rect);
            log.ops = ops;
            out
        }
        Mode::KeepCutmix => {
            let (p, donor) = partner.ok_or_else(|| Error::invalid("keep-cutmix needs a partner image"))?;
            let (out, mixed, rect) = keep_cutmix(&ex.image, ex.label, &donor.image, donor.label, need_map()?, cfg, rng)?;
            log.rect = Some(rect);
            log.partner = Some(p);
            log.lambda = Some(1.0 - rect.area() as f64 / (h * w) as f64);
            label = mixed;
            out
        }
        Mode::PlainCutout | Mode::PlainErase => {
            let rect = random_rect(h, w, cfg.region.height, cfg.region.width, rng)?;
            log.rect = Some(rect);
            if cfg.mode == Mode::PlainErase {
                cut_random(&ex.image, &rect, rng)?
            } else {
                cut_zero(&ex.image, &rect)?
            }
        }
        Mode::PlainPolicy => {
            let (out, ops) = apply_policy_logged(&ex.image, &cfg.policy, rng);
            log.ops = ops;
            out
        }
    };
    Ok(AugmentedExample { image, label, log })
}

/// Uniform index in `0..n` other than `index` (itself when `n == 1`).
pub fn draw_partner<R: Rng + ?Sized>(n: usize, index: usize, rng: &mut R) -> usize {
    if n < 2 {
        return index;
    }
    let p = rng.gen_range(0..n - 1);
    if p >= index {
        p + 1
    } else {
        p
    }
}

/// Augments `examples[index]` with the RNG stream of that index. Independent of any other
/// call, so indices may be processed in any order.
pub fn augment_one<T: Scalar>(
    examples: &[DatasetRecord<T>],
    index: usize,
    cfg: &AugmentConfig,
    source: SaliencySource<'_, T>,
) -> Result<AugmentedExample<T>> {
    let ex = examples
        .get(index)
        .ok_or_else(|| Error::invalid(format!("index {index} out of range")))?;
    let mut rng = RngStream::for_index(cfg.seed, index as u64);
    let partner = (cfg.mode == Mode::KeepCutmix).then(|| {
        let p = draw_partner(examples.len(), index, &mut rng);
        (p, &examples[p])
    });
    let map = if cfg.mode.needs_saliency() {
        Some(saliency_for(examples, index, cfg, source)?)
    } else {
        None
    };
    apply_mode(ex, index, partner, map.as_ref(), cfg, &mut rng)
}

/// Augments every example; output order matches input order and the result does not
/// depend on `parallelism`.
pub fn augment_batch<T: Scalar>(
    examples: &[DatasetRecord<T>],
    cfg: &AugmentConfig,
    source: SaliencySource<'_, T>,
    parallelism: usize,
) -> Result<Vec<AugmentedExample<T>>> {
    cfg.validate()?;
    if let SaliencySource::Maps(maps) = source {
        if maps.len() < examples.len() && cfg.mode.needs_saliency() {
            return Err(Error::MissingSaliency { index: maps.len() });
        }
    }
    let run = || -> Vec<Result<AugmentedExample<T>>> {
        (0..examples.len())
            .into_par_iter()
            .map(|i| augment_one(examples, i, cfg, source))
            .collect()
    };
    let results = if parallelism <= 1 {
        (0..examples.len()).map(|i| augment_one(examples, i, cfg, source)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(run)
    };
    results.into_iter().collect()
}
