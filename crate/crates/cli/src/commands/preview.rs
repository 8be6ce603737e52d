use keepaugment::augment::{augment_batch, SaliencySource};
use keepaugment::io::write_ppm;
use keepaugment::saliency::compute_saliency;
use keepaugment::{Image, SaliencyStrategy};

use super::augment::resolve_source;
use super::{heat, load_config, load_data, with_path};
use crate::args::PreviewArgs;
use crate::error::{CliError, CliResult};

pub fn run(a: PreviewArgs) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let cfg = load_config(a.config.as_deref())?;
    let (mut records, _) = load_data(&a.data)?;
    if records.is_empty() {
        return Err(keepaugment::Error::EmptyDataset.into());
    }
    let n = if a.n > records.len() {
        eprintln!("warning: --n {} exceeds the {} records available; showing {}", a.n, records.len(), records.len());
        records.len()
    } else {
        a.n
    };
    records.truncate(n);
    let source = resolve_source(
        &cfg,
        a.model.as_deref(),
        a.saliency_dir.as_deref(),
        &records,
        cfg.mode.needs_saliency(),
    )?;
    let source = source.as_source();
    let out = augment_batch(&records, &cfg, source, 1)?;

    let (h, w, c) = records[0].image.dims();
    let mut heats = Vec::with_capacity(n);
    for (i, r) in records.iter().enumerate() {
        if r.image.dims() != (h, w, c) {
            return Err(CliError::usage(format!("record {i} has different dims from record 0")));
        }
        let map = match source {
            SaliencySource::Net(net) if cfg.saliency != SaliencyStrategy::External => {
                Some(compute_saliency(cfg.saliency, net, &r.image, r.label)?)
            }
            SaliencySource::Maps(maps) => Some(maps[i].clone()),
            _ => None,
        };
        heats.push(match map {
            Some(m) => heat(&m)?,
            None => Image::zeros(h, w, 1)?,
        });
    }

    let grid = Image::from_fn(n * h, 3 * w, c, |i, j, ch| {
        let (row, y) = (i / h, i % h);
        let (col, x) = (j / w, j % w);
        match col {
            0 => records[row].image.get(y, x, ch),
            1 => heats[row].get(y, x, 0),
            _ => out[row].image.get(y, x, ch),
        }
    })?;
    with_path("writing preview", &a.out, write_ppm(&a.out, &grid))?;
    println!("preview {}x{} ({n} rows) written to {}", n * h, 3 * w, a.out.display());
    Ok(())
}
