use keepaugment::io::{write_ppm, write_raw, RawTensor};
use keepaugment::net::argmax;
use keepaugment::resample::resize_bicubic;
use keepaugment::saliency::compute_saliency;
use keepaugment::SaliencyStrategy;

use super::{check_input, heat, load_image, load_model, with_path};
use crate::args::SaliencyArgs;
use crate::error::{CliError, CliResult};

pub(crate) fn parse_strategy(name: &str) -> CliResult<SaliencyStrategy> {
    match SaliencyStrategy::parse(name) {
        Ok(SaliencyStrategy::External) | Err(_) => Err(CliError::usage(format!(
            "unknown strategy `{name}`; expected full, low-res, low-res:N, early-head or max-logit"
        ))),
        Ok(s) => Ok(s),
    }
}

pub fn run(a: SaliencyArgs) -> CliResult<()> {
    let strategy = parse_strategy(&a.strategy)?;
    let net = load_model(&a.model)?;
    let image = load_image(&a.image)?;
    let (h, w) = (image.height(), image.width());
    let (nh, nw) = strategy.net_input(h, w);
    check_input(&net, nh, nw, "model")?;
    if let SaliencyStrategy::LowRes { .. } = strategy {
        eprintln!("internal resolution: {nh}x{nw}");
    }
    let label = match a.label {
        Some(l) => l,
        None if (nh, nw) == (h, w) => argmax(&net.forward(&image)?),
        None => argmax(&net.forward(&resize_bicubic(&image, nh, nw)?)?),
    };
    let map = compute_saliency(strategy, &net, &image, label)?;
    with_path("writing map", &a.out, write_raw(&a.out, &RawTensor::from_image(&map.to_image())))?;
    if let Some(viz) = &a.viz {
        with_path("writing visualisation", viz, write_ppm(viz, &heat(&map)?))?;
    }
    println!(
        "saliency {}x{} ({}, class {label}) written to {}",
        map.height(),
        map.width(),
        strategy.name(),
        a.out.display()
    );
    Ok(())
}
