//! Fidelity of augmentations under an oracle classifier, and saliency timing.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_mode, draw_partner, AugmentConfig, Mode};
use crate::error::{Error, Result};
use crate::io::DatasetRecord;
use crate::net::ToyNet;
use crate::rng::RngStream;
use crate::saliency::{compute_saliency, SaliencyStrategy};
use crate::scalar::Scalar;
use crate::tensor::Image;
use crate::train::accuracy;

/// Key of a record's RNG stream; depends on content only, so the dataset order is irrelevant.
fn record_key<T: Scalar>(r: &DatasetRecord<T>) -> u64 {
    let mut h = DefaultHasher::new();
    r.image.dims().hash(&mut h);
    for v in r.image.data() {
        v.as_f64().to_bits().hash(&mut h);
    }
    r.label.hash(&mut h);
    h.finish()
}

/// Number of `(record, trial)` pairs, for trials in `trials`, on which the oracle predicts
/// the same class for the clean and augmented image, and the number of pairs.
pub fn fidelity_counts<T, F>(
    oracle: &ToyNet<T>,
    data: &[DatasetRecord<T>],
    augment: F,
    trials: Range<usize>,
    seed: u64,
) -> Result<(usize, usize)>
where
    T: Scalar,
    F: Fn(&DatasetRecord<T>, &mut RngStream) -> Result<Image<T>> + Sync,
{
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_record: Vec<Result<usize>> = data
        .par_iter()
        .map(|r| {
            let clean = oracle.predict(&r.image)?;
            let key = seed ^ record_key(r);
            let mut hits = 0;
            for t in trials.clone() {
                let mut rng = RngStream::new(key, t as u64);
                if oracle.predict(&augment(r, &mut rng)?)? == clean {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect();
    let hits = per_record.into_iter().sum::<Result<usize>>()?;
    Ok((hits, data.len() * trials.len()))
}

/// Fraction of `(record, trial)` pairs whose oracle prediction survives `augment`.
pub fn fidelity<T, F>(oracle: &ToyNet<T>, data: &[DatasetRecord<T>], augment: F, trials: usize, seed: u64) -> Result<f64>
where
    T: Scalar,
    F: Fn(&DatasetRecord<T>, &mut RngStream) -> Result<Image<T>> + Sync,
{
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let (hits, total) = fidelity_counts(oracle, data, augment, 0..trials, seed)?;
    Ok(hits as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub augmentation: String,
    pub magnitudes: Vec<usize>,
    pub fidelity: Vec<f64>,
    pub trials: usize,
    pub images: usize,
    pub oracle_accuracy: f64,
}

impl FidelityReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "augmentation: {}  images: {}  trials: {}  oracle accuracy: {:.4}\n",
            self.augmentation, self.images, self.trials, self.oracle_accuracy
        );
        let _ = writeln!(out, "{:>10}  {:>8}", "magnitude", "fidelity");
        for (m, f) in self.magnitudes.iter().zip(&self.fidelity) {
            let _ = writeln!(out, "{m:>10}  {f:>8.4}");
        }
        out
    }
}

/// `cfg` with the sweep magnitude applied: region side for the cut family and cut-mix,
/// policy magnitude for keep-paste and plain-policy.
pub fn with_magnitude(cfg: &AugmentConfig, magnitude: usize) -> Result<AugmentConfig> {
    let mut cfg = cfg.clone();
    match cfg.mode {
        Mode::KeepPaste | Mode::PlainPolicy => {
            cfg.policy.magnitude = u32::try_from(magnitude).map_err(|_| Error::invalid("magnitude too large"))?;
        }
        _ => cfg.region = crate::augment::RegionSize::square(magnitude),
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Fidelity of `cfg.mode` at each magnitude. Keep modes take saliency from
/// `saliency_net` (default: the oracle) using `cfg.saliency`.
pub fn fidelity_sweep<T: Scalar>(
    oracle: &ToyNet<T>,
    data: &[DatasetRecord<T>],
    cfg: &AugmentConfig,
    magnitudes: &[usize],
    trials: usize,
    seed: u64,
    saliency_net: Option<&ToyNet<T>>,
) -> Result<FidelityReport> {
    if magnitudes.is_empty() {
        return Err(Error::invalid("at least one magnitude is required"));
    }
    if magnitudes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("magnitudes must be ascending"));
    }
    let sal_net = saliency_net.unwrap_or(oracle);
    let maps = if cfg.mode.needs_saliency() {
        let maps: Result<Vec<_>> = data
            .par_iter()
            .map(|r| compute_saliency(cfg.saliency, sal_net, &r.image, r.label))
            .collect();
        Some(maps?)
    } else {
        None
    };
    let mut index_of = HashMap::with_capacity(data.len());
    for (i, r) in data.iter().enumerate() {
        index_of.entry(record_key(r)).or_insert(i);
    }

    let mut fidelity = Vec::with_capacity(magnitudes.len());
    for &m in magnitudes {
        let run_cfg = with_magnitude(cfg, m)?;
        let aug = |r: &DatasetRecord<T>, rng: &mut RngStream| -> Result<Image<T>> {
            // Records are located by content so the closure stays order independent.
            let index = index_of[&record_key(r)];
            let partner = (run_cfg.mode == Mode::KeepCutmix).then(|| {
                let p = draw_partner(data.len(), index, rng);
                (p, &data[p])
            });
            let map = maps.as_ref().map(|m| &m[index]);
            Ok(apply_mode(r, index, partner, map, &run_cfg, rng)?.image)
        };
        fidelity.push(self::fidelity(oracle, data, aug, trials, seed)?);
    }
    Ok(FidelityReport {
        augmentation: cfg.mode.name().into(),
        magnitudes: magnitudes.to_vec(),
        fidelity,
        trials,
        images: data.len(),
        oracle_accuracy: accuracy(oracle, data)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub strategy: String,
    /// Median over repetitions of the mean per-image time.
    pub seconds_per_image: f64,
    /// Full-resolution time over this strategy's time, when full was measured.
    pub speedup: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub images: usize,
    pub repetitions: usize,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn entry(&self, strategy: &str) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.strategy == strategy)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("images: {}  repetitions: {}\n", self.images, self.repetitions);
        let _ = writeln!(out, "{:<12}  {:>14}  {:>8}", "strategy", "ms/image", "speedup");
        for e in &self.entries {
            let speedup = e.speedup.map_or("-".to_string(), |s| format!("{s:.2}x"));
            let _ = writeln!(out, "{:<12}  {:>14.4}  {:>8}", e.strategy, e.seconds_per_image * 1e3, speedup);
        }
        out
    }
}

pub const MIN_BENCH_IMAGES: usize = 10;
pub const MIN_BENCH_REPS: usize = 3;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times each strategy on the calling thread. Every entry pairs a strategy with the net
/// it runs on (the reduced-resolution net for low-res).
pub fn bench_saliency<T: Scalar>(
    strategies: &[(SaliencyStrategy, &ToyNet<T>)],
    data: &[DatasetRecord<T>],
    repetitions: usize,
) -> Result<BenchReport> {
    if data.len() < MIN_BENCH_IMAGES {
        return Err(Error::invalid(format!("bench needs at least {MIN_BENCH_IMAGES} images, got {}", data.len())));
    }
    if repetitions < MIN_BENCH_REPS {
        return Err(Error::invalid(format!("bench needs at least {MIN_BENCH_REPS} repetitions, got {repetitions}")));
    }
    // Repetitions are interleaved across strategies so load drift hits all of them alike.
    let mut times = vec![Vec::with_capacity(repetitions); strategies.len()];
    for _ in 0..repetitions {
        for (&(strategy, net), t) in strategies.iter().zip(&mut times) {
            let start = Instant::now();
            for r in data {
                std::hint::black_box(compute_saliency(strategy, net, &r.image, r.label)?);
            }
            t.push((start.elapsed().as_secs_f64() / data.len() as f64).max(1e-12));
        }
    }
    let mut entries: Vec<BenchEntry> = strategies
        .iter()
        .zip(times)
        .map(|(&(strategy, _), t)| BenchEntry {
            strategy: strategy.name(),
            seconds_per_image: median(t),
            speedup: None,
        })
        .collect();
    if let Some(full) = entries.iter().find(|e| e.strategy == SaliencyStrategy::Full.name()).map(|e| e.seconds_per_image) {
        for e in &mut entries {
            e.speedup = Some(full / e.seconds_per_image);
        }
    }
    Ok(BenchReport {
        images: data.len(),
        repetitions,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::plain_cutout;
    use crate::io::make_synthetic;
    use crate::net::NetSpec;

    fn setup() -> (ToyNet<f32>, Vec<DatasetRecord<f32>>) {
        let data = make_synthetic(40, 8, &mut RngStream::new(3, 0)).unwrap();
        let net = ToyNet::init(NetSpec::toy([8, 8, 3], 2, 4, true), &mut RngStream::new(4, 0)).unwrap();
        (net, data)
    }

    #[test]
    fn identity_has_full_fidelity() {
        let (net, data) = setup();
        let f = fidelity(&net, &data, |r, _| Ok(r.image.clone()), 3, 0).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn noise_fidelity_is_strictly_inside() {
        let (net, data) = setup();
        let noise = |r: &DatasetRecord<f32>, rng: &mut RngStream| {
            let (h, w, c) = r.image.dims();
            Image::random(h, w, c, rng)
        };
        // Oracle disagreeing with its own clean prediction on some noise draws but not all.
        let f = fidelity(&net, &data, noise, 20, 1).unwrap();
        let clean_ones = data.iter().filter(|r| net.predict(&r.image).unwrap() == 1).count() as f64 / data.len() as f64;
        let mut noise_ones = 0usize;
        let mut rng = RngStream::new(9, 0);
        for _ in 0..2000 {
            if net.predict(&Image::random(8, 8, 3, &mut rng).unwrap()).unwrap() == 1 {
                noise_ones += 1;
            }
        }
        let q = noise_ones as f64 / 2000.0;
        let expect = clean_ones * q + (1.0 - clean_ones) * (1.0 - q);
        assert!((f - expect).abs() < 0.1, "fidelity {f}, expected about {expect}");
    }

    #[test]
    fn empty_dataset_errors() {
        let (net, _) = setup();
        assert!(matches!(fidelity(&net, &[], |r, _| Ok(r.image.clone()), 1, 0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn order_and_partition_invariance() {
        let (net, data) = setup();
        let aug = |r: &DatasetRecord<f32>, rng: &mut RngStream| plain_cutout(&r.image, 5, rng);
        let a = fidelity_counts(&net, &data, aug, 0..6, 7).unwrap();
        let mut rev = data.clone();
        rev.reverse();
        assert_eq!(fidelity_counts(&net, &rev, aug, 0..6, 7).unwrap(), a);
        let p1 = fidelity_counts(&net, &data, aug, 0..2, 7).unwrap();
        let p2 = fidelity_counts(&net, &data, aug, 2..6, 7).unwrap();
        assert_eq!((p1.0 + p2.0, p1.1 + p2.1), a);
    }

    #[test]
    fn single_magnitude_sweep_matches_fidelity() {
        let (net, data) = setup();
        let cfg = AugmentConfig {
            mode: Mode::PlainCutout,
            ..Default::default()
        };
        let report = fidelity_sweep(&net, &data, &cfg, &[4], 2, 5, None).unwrap();
        let direct = fidelity(&net, &data, |r, rng| plain_cutout(&r.image, 4, rng), 2, 5).unwrap();
        assert_eq!(report.fidelity, vec![direct]);
        assert!(report.to_table().contains("plain-cutout"));
        assert!(fidelity_sweep(&net, &data, &cfg, &[8, 4], 2, 5, None).is_err());
        assert!(fidelity_sweep(&net, &data, &cfg, &[], 2, 5, None).is_err());
    }

    #[test]
    fn sweep_runs_every_mode() {
        let (net, data) = setup();
        for mode in Mode::ALL {
            let cfg = AugmentConfig {
                mode,
                region: crate::augment::RegionSize::square(4),
                ..Default::default()
            };
            let r = fidelity_sweep(&net, &data, &cfg, &[2, 4], 1, 0, None).unwrap();
            assert!(r.fidelity.iter().all(|f| (0.0..=1.0).contains(f)), "{mode:?}");
        }
    }

    #[test]
    fn bench_full_only_has_unit_speedup() {
        let (net, data) = setup();
        let r = bench_saliency(&[(SaliencyStrategy::Full, &net)], &data[..10], 3).unwrap();
        assert_eq!(r.entries[0].speedup, Some(1.0));
        assert!(r.entries[0].seconds_per_image > 0.0);
        assert!(bench_saliency(&[(SaliencyStrategy::Full, &net)], &data[..9], 3).is_err());
        assert!(bench_saliency(&[(SaliencyStrategy::Full, &net)], &data, 2).is_err());
    }

    #[test]
    fn bench_without_full_has_no_speedup() {
        let (net, data) = setup();
        let r = bench_saliency(&[(SaliencyStrategy::EarlyHead, &net)], &data, 3).unwrap();
        assert_eq!(r.entry("early-head").unwrap().speedup, None);
    }
}
