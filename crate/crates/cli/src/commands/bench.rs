use keepaugment::eval::{bench_saliency, MIN_BENCH_REPS};
use keepaugment::{RngStream, SaliencyStrategy, ToyNet};

use super::saliency::parse_strategy;
use super::{check_input, load_data, load_model};
use crate::args::BenchArgs;
use crate::error::{CliError, CliResult};

pub fn run(a: BenchArgs) -> CliResult<()> {
    let strategies: Vec<SaliencyStrategy> = a
        .strategies
        .split(',')
        .map(|s| parse_strategy(s.trim()))
        .collect::<CliResult<_>>()?;
    if a.reps < MIN_BENCH_REPS {
        return Err(CliError::usage(format!("--reps must be at least {MIN_BENCH_REPS}")));
    }
    let net = load_model(&a.model)?;
    let (mut records, _) = load_data(&a.data)?;
    if let Some(limit) = a.limit {
        records.truncate(limit);
    }
    let Some(first) = records.first() else {
        return Err(keepaugment::Error::EmptyDataset.into());
    };
    let (h, w) = (first.image.height(), first.image.width());
    check_input(&net, h, w, "model")?;

    // One reduced-resolution net per distinct low-res factor.
    let mut reduced: Vec<(usize, ToyNet<f32>)> = Vec::new();
    for s in &strategies {
        if let SaliencyStrategy::LowRes { factor } = *s {
            if reduced.iter().any(|(f, _)| *f == factor) {
                continue;
            }
            let (nh, nw) = s.net_input(h, w);
            let lr = match &a.lowres_model {
                Some(path) => {
                    let lr = load_model(path)?;
                    check_input(&lr, nh, nw, "low-res model")?;
                    lr
                }
                None => ToyNet::init(net.spec().with_input(nh, nw), &mut RngStream::new(0, factor as u64))?,
            };
            reduced.push((factor, lr));
        }
    }
    let entries: Vec<(SaliencyStrategy, &ToyNet<f32>)> = strategies
        .iter()
        .map(|&s| match s {
            SaliencyStrategy::LowRes { factor } => (s, &reduced.iter().find(|(f, _)| *f == factor).unwrap().1),
            _ => (s, &net),
        })
        .collect();
    let report = bench_saliency(&entries, &records, a.reps)?;
    if a.report_json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}
