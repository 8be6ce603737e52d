//! Minibatch SGD for [`ToyNet`].

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DatasetRecord;
use crate::net::{NetSpec, ToyNet};
use crate::rng::RngStream;
use crate::scalar::Scalar;

pub const DEFAULT_AUX_COEFFICIENT: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub early_head: bool,
    /// Weight of the early-head loss in the total objective.
    pub aux_coefficient: f64,
    pub hidden_channels: usize,
    /// Defaults to `max(label) + 1`.
    pub num_classes: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 0.05,
            batch_size: 32,
            early_head: false,
            aux_coefficient: DEFAULT_AUX_COEFFICIENT,
            hidden_channels: 8,
            num_classes: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub net: ToyNet<T>,
    /// Accuracy of the final net over the whole training set.
    pub accuracy: f64,
    pub final_loss: f64,
}

fn check_dataset<T: Scalar>(data: &[DatasetRecord<T>]) -> Result<()> {
    let first = data.first().ok_or(Error::EmptyDataset)?;
    if let Some(bad) = data.iter().position(|r| r.image.dims() != first.image.dims()) {
        return Err(Error::dims(
            format!("{:?}", first.image.dims()),
            format!("{:?} at record {bad}", data[bad].image.dims()),
        ));
    }
    Ok(())
}

/// Initializes a toy net for `data` and trains it.
pub fn train_toy<T: Scalar>(data: &[DatasetRecord<T>], cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    check_dataset(data)?;
    let (h, w, c) = data[0].image.dims();
    let max_label = data.iter().map(|r| r.label).max().unwrap_or(0);
    let num_classes = cfg.num_classes.unwrap_or(max_label + 1);
    let spec = NetSpec::toy([h, w, c], num_classes, cfg.hidden_channels, cfg.early_head);
    let mut rng = RngStream::new(cfg.seed, 0);
    let net = ToyNet::init(spec, &mut rng)?;
    train_net(net, data, cfg, &mut rng)
}

/// Trains an existing net in place of initialization.
pub fn train_net<T: Scalar>(
    mut net: ToyNet<T>,
    data: &[DatasetRecord<T>],
    cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<TrainOutcome<T>> {
    check_dataset(data)?;
    if let Some(r) = data.iter().find(|r| r.label >= net.num_classes()) {
        return Err(Error::invalid(format!(
            "label {} out of range for {} classes",
            r.label,
            net.num_classes()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    let aux = T::of(cfg.aux_coefficient);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut final_loss = 0.0;

    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = ToyNet::zeros(net.spec().clone())?;
            for &i in batch {
                let (loss, _) = net.accumulate_loss_gradient(&data[i].image, data[i].label, aux, &mut grads)?;
                epoch_loss += loss.as_f64();
            }
            let step = T::of(cfg.lr / batch.len() as f64);
            for (p, g) in net.params_mut().into_iter().zip(grads.params_mut()) {
                for (pv, &gv) in p.iter_mut().zip(g.iter()) {
                    *pv -= step * gv;
                }
            }
        }
        final_loss = epoch_loss / data.len() as f64;
    }

    let accuracy = accuracy(&net, data)?;
    Ok(TrainOutcome {
        net,
        accuracy,
        final_loss,
    })
}

/// Fraction of records whose predicted class equals the label.
pub fn accuracy<T: Scalar>(net: &ToyNet<T>, data: &[DatasetRecord<T>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0usize;
    for r in data {
        if net.predict(&r.image)? == r.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}
