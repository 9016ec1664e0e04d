//! Training loop for trainable denoisers: uniform step sampling, forward
//! noising, condition projection, clean-grid prediction, endpoint-weighted
//! reconstruction loss, and minibatch SGD with momentum.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::grid::{ConditionMatrix, Grid};
use crate::diffusion::schedule::NoiseSchedule;
use crate::diffusion::{
    forward_diffuse, project_conditions, weighted_mse, weighted_mse_grad, LossWeights,
    TrainableDenoiser,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(
                "momentum must be in [0, 1)".to_string(),
            ));
        }
        Ok(())
    }
}

/// Per-batch loss trace of a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_trace: Vec<f64>,
    pub steps: usize,
}

/// Trains `denoiser` to reconstruct clean grids from noised ones. Each batch
/// sample draws `n` uniformly from `1..=N`, noises the whole grid, projects
/// the conditions back, predicts the clean grid, and backpropagates the
/// weighted squared error. Deterministic per seed; aborts with a diagnostic
/// if the loss stops being finite.
pub fn train<D: TrainableDenoiser>(
    denoiser: &mut D,
    dataset: &[ConditionMatrix],
    schedule: &NoiseSchedule,
    weights: &LossWeights,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("empty training set".to_string()));
    }
    config.validate()?;
    let layout = dataset[0].layout().clone();
    for sample in dataset {
        if sample.layout() != &layout {
            return Err(Error::ShapeMismatch(
                "training samples share one layout".to_string(),
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_trace = Vec::new();
    let mut step = 0usize;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            denoiser.reset_gradients();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let sample = &dataset[idx];
                let x0 = sample.target();
                let n = rng.random_range(1..=schedule.len());
                let eps = gaussian_like(&x0, &mut rng);
                let x_n = forward_diffuse(&x0, n, &eps, schedule)?;
                let x_n = project_conditions(&x_n, sample)?;
                let pred = denoiser.denoise(&x_n, n);
                batch_loss += weighted_mse(&pred, &x0, &layout, weights)?;
                let grad = weighted_mse_grad(&pred, &x0, &layout, weights);
                denoiser.accumulate_gradients(&x_n, n, &grad);
            }
            batch_loss /= batch.len() as f64;
            step += 1;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    loss: batch_loss,
                });
            }
            denoiser.apply_gradients(config.learning_rate, config.momentum, 1.0 / batch.len() as f64);
            loss_trace.push(batch_loss);
        }
    }

    Ok(TrainReport {
        loss_trace,
        steps: step,
    })
}

fn gaussian_like<R: Rng>(like: &Grid, rng: &mut R) -> Grid {
    let data = (0..like.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Grid::from_vec(like.rows(), like.cols(), data).expect("same shape by construction")
}
