use keepaugment::io::{write_model, DatasetRecord};
use keepaugment::resample::resize_bicubic;
use keepaugment::train::{train_toy, TrainConfig};

use super::{load_data, with_path};
use crate::args::TrainArgs;
use crate::error::{CliError, CliResult};

pub fn run(a: TrainArgs) -> CliResult<()> {
    if a.downscale == 0 {
        return Err(CliError::usage("--downscale must be at least 1"));
    }
    let (mut records, num_classes) = load_data(&a.data)?;
    if a.downscale > 1 {
        records = records
            .iter()
            .map(|r| {
                let (h, w) = (r.image.height().div_ceil(a.downscale), r.image.width().div_ceil(a.downscale));
                Ok(DatasetRecord::new(resize_bicubic(&r.image, h, w)?, r.label))
            })
            .collect::<keepaugment::Result<_>>()?;
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        batch_size: a.batch_size,
        early_head: a.early_head,
        aux_coefficient: a.aux_coef,
        hidden_channels: a.hidden,
        num_classes: Some(num_classes),
        seed: a.seed,
    };
    let out = train_toy(&records, &cfg)?;
    with_path("writing model", &a.out, write_model(&a.out, &out.net))?;
    let (h, w, _) = out.net.input_dims();
    println!("input: {h}x{w}");
    if a.epochs > 0 {
        println!("final loss: {:.6}", out.final_loss);
    }
    println!("train accuracy: {:.4}", out.accuracy);
    Ok(())
}
