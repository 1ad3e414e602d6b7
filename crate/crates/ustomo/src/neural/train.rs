//! Mini-batch Adam training on the MSE loss.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::{AdamState, NetworkBundle};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Mse,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: Loss,
    /// Tail fraction of the (shuffled) data held out when no explicit
    /// validation set is given.
    pub validation_fraction: Option<f64>,
    /// Stop after this many epochs without a validation improvement;
    /// 0 disables early stopping.
    pub patience: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            learning_rate: 1.0e-3,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            loss: Loss::Mse,
            validation_fraction: None,
            patience: 10,
        }
    }
}

impl TrainOptions {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "learning rate, batch size, and epochs must be positive".into(),
            ));
        }
        if let Some(f) = self.validation_fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config("validation fraction must be in [0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// A supervised dataset: one sample per row.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl TrainSet {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "{} inputs vs {} targets",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainingRecord {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub n_samples: usize,
    pub wall_seconds: f64,
}

fn mse(net: &NetworkBundle, set: &TrainSet) -> Result<f64> {
    // Evaluate in slabs to bound the activation memory.
    let n = set.len();
    let mut acc = 0.0;
    let slab = 1024;
    let mut row = 0;
    while row < n {
        let hi = (row + slab).min(n);
        let x = set.inputs.slice(ndarray::s![row..hi, ..]).to_owned();
        let y = net.forward_raw_batch(&x)?;
        let t = set.targets.slice(ndarray::s![row..hi, ..]);
        acc += y
            .iter()
            .zip(t.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        row = hi;
    }
    Ok(acc / (n * set.targets.ncols()) as f64)
}

fn snapshot(net: &NetworkBundle) -> Vec<(Array2<f64>, Array1<f64>)> {
    net.layers().map(|d| (d.w.clone(), d.b.clone())).collect()
}

fn restore(net: &mut NetworkBundle, snap: &[(Array2<f64>, Array1<f64>)]) {
    for (layer, (w, b)) in net.layers_mut().into_iter().zip(snap.iter()) {
        layer.w.assign(w);
        layer.b.assign(b);
    }
}

/// Trains `net` in place with mini-batch Adam on the MSE loss.
///
/// Deterministic given `opts.seed`: the shuffle stream, batch boundaries,
/// and update order are all fixed. Returns the loss curves; the parameters
/// left in `net` are those of the best validation epoch (or the final epoch
/// when no validation data exists).
pub fn train(
    net: &mut NetworkBundle,
    data: &TrainSet,
    validation: Option<&TrainSet>,
    opts: &TrainOptions,
) -> Result<TrainingRecord> {
    opts.validate()?;
    if data.is_empty() {
        return Err(Error::Shape("empty training set".into()));
    }
    if data.inputs.ncols() != net.input_width() || data.targets.ncols() != net.output_width() {
        return Err(Error::Shape(format!(
            "dataset widths ({}, {}) do not match network ({}, {})",
            data.inputs.ncols(),
            data.targets.ncols(),
            net.input_width(),
            net.output_width()
        )));
    }
    let started = Instant::now();
    let mut rng = rng_from_seed(opts.seed);

    // Explicit validation set wins; otherwise optionally split off a tail.
    let mut train_idx: Vec<usize> = (0..data.len()).collect();
    let owned_val: Option<TrainSet>;
    let val: Option<&TrainSet> = match validation {
        Some(v) => {
            owned_val = None;
            let _ = &owned_val;
            Some(v)
        }
        None => match opts.validation_fraction {
            Some(f) if f > 0.0 => {
                train_idx.shuffle(&mut rng);
                let n_val = ((data.len() as f64 * f).round() as usize)
                    .clamp(1, data.len().saturating_sub(1));
                let val_idx = train_idx.split_off(data.len() - n_val);
                let take = |idx: &[usize], a: &Array2<f64>| {
                    Array2::from_shape_fn((idx.len(), a.ncols()), |(r, c)| a[[idx[r], c]])
                };
                owned_val = Some(TrainSet {
                    inputs: take(&val_idx, &data.inputs),
                    targets: take(&val_idx, &data.targets),
                });
                owned_val.as_ref()
            }
            _ => {
                owned_val = None;
                let _ = &owned_val;
                None
            }
        },
    };

    if net.adam.is_none() {
        net.adam = Some(AdamState {
            m: net
                .layers()
                .map(|d| (Array2::zeros(d.w.dim()), Array1::zeros(d.b.len())))
                .collect(),
            v: net
                .layers()
                .map(|d| (Array2::zeros(d.w.dim()), Array1::zeros(d.b.len())))
                .collect(),
            step: 0,
        });
    }

    let out_dim = data.targets.ncols();
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1.0e-8);

    let mut record = TrainingRecord {
        train_loss: Vec::with_capacity(opts.epochs),
        val_loss: Vec::with_capacity(opts.epochs),
        best_epoch: 0,
        n_samples: train_idx.len(),
        wall_seconds: 0.0,
    };
    let mut best_val = f64::INFINITY;
    let mut best_params = snapshot(net);
    let mut since_best = 0usize;

    for epoch in 0..opts.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in train_idx.chunks(opts.batch_size) {
            let x = Array2::from_shape_fn((batch.len(), data.inputs.ncols()), |(r, c)| {
                data.inputs[[batch[r], c]]
            });
            let t = Array2::from_shape_fn((batch.len(), out_dim), |(r, c)| {
                data.targets[[batch[r], c]]
            });
            let (y, cache) = net.forward_cached(&x, true)?;
            let scale = 1.0 / (batch.len() * out_dim) as f64;
            let mut batch_loss = 0.0;
            let mut grad_out = Array2::zeros(y.dim());
            ndarray::Zip::from(&mut grad_out)
                .and(&y)
                .and(&t)
                .for_each(|g, &yy, &tt| {
                    let r = yy - tt;
                    batch_loss += r * r;
                    *g = 2.0 * r * scale;
                });
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += batch_loss * batch.len() as f64;
            seen += batch.len();

            let (grads, _) = net.backward_from_cache(&x, &cache, &grad_out);
            let adam = net.adam.as_mut().expect("initialized above");
            adam.step += 1;
            let bc1 = 1.0 - beta1.powi(adam.step as i32);
            let bc2 = 1.0 - beta2.powi(adam.step as i32);
            let lr = opts.learning_rate * bc2.sqrt() / bc1;
            let (m, v) = (&mut adam.m, &mut adam.v);
            for (li, (gw, gb)) in grads.iter().enumerate() {
                ndarray::Zip::from(&mut m[li].0)
                    .and(&mut v[li].0)
                    .and(gw)
                    .for_each(|m, v, &g| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                    });
                ndarray::Zip::from(&mut m[li].1)
                    .and(&mut v[li].1)
                    .and(gb)
                    .for_each(|m, v, &g| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                    });
            }
            let (m, v) = (&adam.m, &adam.v);
            let mut updates: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(m.len());
            for li in 0..m.len() {
                let dw = ndarray::Zip::from(&m[li].0)
                    .and(&v[li].0)
                    .map_collect(|&m, &v| lr * m / (v.sqrt() + eps));
                let db = ndarray::Zip::from(&m[li].1)
                    .and(&v[li].1)
                    .map_collect(|&m, &v| lr * m / (v.sqrt() + eps));
                updates.push((dw, db));
            }
            for (layer, (dw, db)) in net.layers_mut().into_iter().zip(updates.iter()) {
                layer.w -= dw;
                layer.b -= db;
            }
        }
        record.train_loss.push(epoch_loss / seen as f64);

        match val {
            Some(vset) => {
                let vl = mse(net, vset)?;
                if !vl.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                record.val_loss.push(vl);
                if vl < best_val {
                    best_val = vl;
                    record.best_epoch = epoch;
                    best_params = snapshot(net);
                    since_best = 0;
                } else {
                    since_best += 1;
                    if opts.patience > 0 && since_best >= opts.patience {
                        break;
                    }
                }
            }
            None => {
                record.best_epoch = epoch;
            }
        }
    }

    if val.is_some() {
        restore(net, &best_params);
    }
    record.wall_seconds = started.elapsed().as_secs_f64();
    Ok(record)
}
