//! Mini-batch training with synchronous multi-worker gradient averaging.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Dropout, Network};
use super::optim::RmsProp;
use super::patch::PatchSample;
use super::real::Real;
use crate::error::{Error, Result};
use crate::loss::axial_angle_atan2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Coefficient of Σw² over weights (biases are not penalized).
    pub l2: f64,
    /// Drop probability of the dropout layer.
    pub dropout: f64,
    /// Global batch size, split across workers.
    pub batch_size: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    /// Non-improving epochs tolerated before stopping.
    pub early_stop_patience: usize,
    pub rng_seed: u64,
    pub worker_count: usize,
    /// Multiply the learning rate by `worker_count`.
    pub linear_scaling: bool,
    pub max_epochs: usize,
    pub max_steps: Option<usize>,
    pub time_budget_secs: Option<f64>,
    /// Stop as soon as the validation error drops to this value.
    pub target_val_error: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 6e-5,
            l2: 1e-3,
            dropout: 0.1,
            batch_size: 40,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            early_stop_patience: 20,
            rng_seed: 0,
            worker_count: 1,
            linear_scaling: true,
            max_epochs: 200,
            max_steps: None,
            time_budget_secs: None,
            target_val_error: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.worker_count == 0 {
            return bad("worker_count must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) || !(self.rmsprop_epsilon > 0.0) {
            return bad("rmsprop_decay must lie in [0, 1) and rmsprop_epsilon be positive");
        }
        Ok(())
    }

    /// Learning rate after the linear scaling rule.
    pub fn effective_learning_rate(&self) -> f64 {
        if self.linear_scaling {
            self.learning_rate * self.worker_count as f64
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_error_rad: f64,
    pub val_error_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
    MaxSteps,
    TimeBudget,
    TargetReached,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters at the best validation epoch.
    pub network: Network<T>,
    pub best_epoch: usize,
    pub best_val_error: f64,
    pub history: Vec<EpochRecord>,
    pub steps: usize,
    pub stop: StopReason,
    pub elapsed: Duration,
}

/// Mean and median axial angular error in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
}

/// Angular error of every sample under inference mode, in sample order.
pub fn angular_errors<T: Real>(net: &Network<T>, samples: &[PatchSample]) -> Result<Vec<f64>> {
    let chunks: Vec<Vec<f64>> = samples
        .par_chunks(MAX_SUB_BATCH)
        .map(|chunk| {
            let refs: Vec<&PatchSample> = chunk.iter().collect();
            net.predict_batch(&refs, MAX_SUB_BATCH)?
                .iter()
                .zip(chunk)
                .map(|((p, _), s)| Ok(axial_angle_atan2(&s.target, p)?.0.radians()))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.concat())
}

pub fn summarize(errors: &[f64]) -> ErrorSummary {
    if errors.is_empty() {
        return ErrorSummary {
            count: 0,
            mean: f64::NAN,
            median: f64::NAN,
        };
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    ErrorSummary {
        count: n,
        mean: errors.iter().sum::<f64>() / n as f64,
        median,
    }
}

pub fn evaluate<T: Real>(net: &Network<T>, samples: &[PatchSample]) -> Result<ErrorSummary> {
    Ok(summarize(&angular_errors(net, samples)?))
}

/// Largest number of samples pushed through one batched pass.
const MAX_SUB_BATCH: usize = 64;

/// Dropout seed for the sample at `position` of global step `step`; it does
/// not depend on which worker processes the sample.
fn dropout_seed(rng_seed: u64, step: usize, position: usize) -> u64 {
    rng_seed.rotate_left(32) ^ ((step as u64) << 16) ^ position as u64
}

/// Sum of per-sample gradients (no L2) over `indices` and the angle sum.
fn chunk_gradient<T: Real>(
    net: &Network<T>,
    samples: &[PatchSample],
    indices: &[usize],
    first_position: usize,
    step: usize,
    config: &TrainConfig,
) -> Result<(Network<T>, f64)> {
    let mut grad = Network::zeros(net.architecture())?;
    let mut angles = 0.0;
    let mut position = first_position;
    for sub in indices.chunks(MAX_SUB_BATCH) {
        let batch: Vec<&PatchSample> = sub.iter().map(|&i| &samples[i]).collect();
        let dropout: Vec<Dropout> = (0..sub.len())
            .map(|k| {
                if config.dropout > 0.0 {
                    Dropout::On {
                        rate: config.dropout,
                        seed: dropout_seed(config.rng_seed, step, position + k),
                    }
                } else {
                    Dropout::Off
                }
            })
            .collect();
        position += sub.len();
        let targets: Vec<_> = batch.iter().map(|s| s.target).collect();
        let trace = net.forward_batch(&batch, &dropout)?;
        angles += net
            .backward(&trace, &targets, &mut grad)?
            .iter()
            .map(|l| l.angle)
            .sum::<f64>();
    }
    Ok((grad, angles))
}

/// Averaged batch gradient including the L2 term, and the batch angle sum.
///
/// The batch is split into `worker_count` contiguous chunks processed in
/// parallel; chunk sums are added in worker order.
pub fn batch_gradient<T: Real>(
    net: &Network<T>,
    samples: &[PatchSample],
    batch: &[usize],
    step: usize,
    config: &TrainConfig,
) -> Result<(Network<T>, f64)> {
    let per_worker = batch.len().div_ceil(config.worker_count).max(1);
    let chunks: Vec<(usize, &[usize])> = batch
        .chunks(per_worker)
        .enumerate()
        .map(|(w, c)| (w * per_worker, c))
        .collect();
    let parts: Vec<Result<(Network<T>, f64)>> = if chunks.len() == 1 {
        vec![chunk_gradient(net, samples, chunks[0].1, 0, step, config)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|&(pos, c)| {
                    scope.spawn(move || chunk_gradient(net, samples, c, pos, step, config))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        })
    };
    let mut iter = parts.into_iter();
    let (mut total, mut angles) = iter.next().expect("at least one chunk")?;
    for part in iter {
        let (g, a) = part?;
        total.add_assign(&g);
        angles += a;
    }
    total.scale(T::from_f64(1.0 / batch.len() as f64));
    net.add_l2_gradient(config.l2, &mut total);
    Ok((total, angles))
}

/// Runs one optimizer step on `batch`; returns the batch angle sum.
pub fn train_step<T: Real>(
    net: &mut Network<T>,
    opt: &mut RmsProp<T>,
    samples: &[PatchSample],
    batch: &[usize],
    step: usize,
    config: &TrainConfig,
) -> Result<f64> {
    let (grad, angles) = batch_gradient(net, samples, batch, step, config)?;
    opt.step(net, &grad, config.effective_learning_rate());
    Ok(angles)
}

/// Trains `net` with early stopping on `val` and returns the best snapshot.
pub fn train<T: Real>(
    mut net: Network<T>,
    train_set: &[PatchSample],
    val_set: &[PatchSample],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config(
            "training and validation sets must both be non-empty".into(),
        ));
    }
    let start = Instant::now();
    let budget = config.time_budget_secs.map(Duration::from_secs_f64);
    let mut opt = RmsProp::new(&net, config.rmsprop_decay, config.rmsprop_epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0, net.clone());
    let mut wait = 0;
    let mut steps = 0;
    let mut stop = StopReason::MaxEpochs;

    'epochs: for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut angle_sum = 0.0;
        let mut seen = 0;
        let mut interrupted = None;
        for batch in order.chunks(config.batch_size) {
            angle_sum += train_step(&mut net, &mut opt, train_set, batch, steps, config)?;
            seen += batch.len();
            steps += 1;
            if config.max_steps.is_some_and(|m| steps >= m) {
                interrupted = Some(StopReason::MaxSteps);
                break;
            }
            if budget.is_some_and(|b| start.elapsed() >= b) {
                interrupted = Some(StopReason::TimeBudget);
                break;
            }
        }
        let val = evaluate(&net, val_set)?.mean;
        history.push(EpochRecord {
            epoch,
            train_error_rad: angle_sum / seen as f64,
            val_error_rad: val,
        });
        if val < best.0 {
            best = (val, epoch, net.clone());
            wait = 0;
        } else {
            wait += 1;
        }
        if let Some(reason) = interrupted {
            stop = reason;
            break 'epochs;
        }
        if config.target_val_error.is_some_and(|t| val <= t) {
            stop = StopReason::TargetReached;
            break;
        }
        if wait > config.early_stop_patience {
            stop = StopReason::Patience;
            break;
        }
    }
    let (best_val_error, best_epoch, network) = best;
    Ok(TrainOutcome {
        network,
        best_epoch,
        best_val_error,
        history,
        steps,
        stop,
        elapsed: start.elapsed(),
    })
}

/// Loss history as CSV with header `epoch,train_error_rad,val_error_rad`.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_error_rad,val_error_rad\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_error_rad, r.val_error_rad));
    }
    out
}
