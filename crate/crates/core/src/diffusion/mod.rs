//! Conditioned projected diffusion over action grids: the forward noising
//! formula, the condition projection that pins observation/recommendation/
//! padding cells after every step, the endpoint-weighted reconstruction
//! loss, and reverse sampling under a clean-grid-prediction posterior.

mod denoiser;
mod grid;
mod schedule;
mod train;

pub use denoiser::{
    Denoiser, DenoiserCheckpoint, MlpDenoiser, OracleDenoiser, TrainableDenoiser,
};
pub use grid::{CellKind, ConditionMatrix, Grid, GridLayout};
pub use schedule::NoiseSchedule;
pub use train::{train, TrainConfig, TrainReport};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `x_n = sqrt(alpha_bar_n) * x_0 + eps * sqrt(1 - alpha_bar_n)`, elementwise.
pub fn forward_diffuse(x0: &Grid, n: usize, eps: &Grid, schedule: &NoiseSchedule) -> Result<Grid> {
    if n < 1 || n > schedule.len() {
        return Err(Error::InvalidConfig(format!(
            "step {n} outside 1..={}",
            schedule.len()
        )));
    }
    if !x0.same_shape(eps) {
        return Err(Error::ShapeMismatch(format!(
            "x0 {}x{} vs eps {}x{}",
            x0.rows(),
            x0.cols(),
            eps.rows(),
            eps.cols()
        )));
    }
    let ab = schedule.alpha_bar(n);
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = x0
        .as_slice()
        .iter()
        .zip(eps.as_slice())
        .map(|(&x, &e)| signal * x + noise * e)
        .collect();
    Grid::from_vec(x0.rows(), x0.cols(), data)
}

/// Overwrites every condition cell (observation, recommendation, zero-pad)
/// with its template value; action cells pass through untouched.
pub fn project_conditions(x: &Grid, template: &ConditionMatrix) -> Result<Grid> {
    let layout = template.layout();
    if !layout.matches(x) {
        return Err(Error::ShapeMismatch(format!(
            "grid {}x{} vs template {}x{}",
            x.rows(),
            x.cols(),
            layout.rows(),
            layout.cols()
        )));
    }
    let mut out = x.clone();
    for row in 0..layout.rows() {
        for col in 0..layout.cols() {
            if layout.kind(row, col).is_condition() {
                out.set(row, col, template.values().get(row, col));
            }
        }
    }
    Ok(out)
}

/// Per-column weights applied to action-row cells in the reconstruction
/// loss; all other cells weigh 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    columns: Vec<f64>,
}

impl LossWeights {
    /// Endpoint emphasis used by the step model.
    pub const STEP_ENDPOINT_WEIGHT: f64 = 10.0;
    /// Endpoint emphasis used by the planning model.
    pub const PLANNING_ENDPOINT_WEIGHT: f64 = 5.0;

    pub fn uniform(horizon: usize) -> Self {
        Self {
            columns: vec![1.0; horizon],
        }
    }

    /// Weight `w` on the first and last columns, 1 in between.
    pub fn endpoint_weighted(horizon: usize, w: f64) -> Self {
        let mut columns = vec![1.0; horizon];
        if horizon > 0 {
            columns[0] = w;
            columns[horizon - 1] = w;
        }
        Self { columns }
    }

    pub fn column(&self, col: usize) -> f64 {
        self.columns[col]
    }

    pub fn horizon(&self) -> usize {
        self.columns.len()
    }
}

/// Sum over cells of `weight(cell) * (pred - target)^2`, where the weight is
/// the column weight on action rows and 1 elsewhere.
pub fn weighted_mse(
    pred: &Grid,
    target: &Grid,
    layout: &GridLayout,
    weights: &LossWeights,
) -> Result<f64> {
    if !pred.same_shape(target) || !layout.matches(pred) {
        return Err(Error::ShapeMismatch(
            "pred/target/layout shapes differ".to_string(),
        ));
    }
    if weights.horizon() != layout.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{} column weights for {} columns",
            weights.horizon(),
            layout.cols()
        )));
    }
    let mut loss = 0.0;
    for row in 0..layout.rows() {
        let w_row = layout.is_action_row(row);
        for col in 0..layout.cols() {
            let w = if w_row { weights.column(col) } else { 1.0 };
            let d = pred.get(row, col) - target.get(row, col);
            loss += w * d * d;
        }
    }
    Ok(loss)
}

// Gradient of weighted_mse with respect to pred: 2 * w * (pred - target).
pub(crate) fn weighted_mse_grad(
    pred: &Grid,
    target: &Grid,
    layout: &GridLayout,
    weights: &LossWeights,
) -> Grid {
    let mut grad = Grid::zeros(pred.rows(), pred.cols());
    for row in 0..layout.rows() {
        let w_row = layout.is_action_row(row);
        for col in 0..layout.cols() {
            let w = if w_row { weights.column(col) } else { 1.0 };
            let d = pred.get(row, col) - target.get(row, col);
            grad.set(row, col, 2.0 * w * d);
        }
    }
    grad
}

/// One reverse step: predict `x_hat_0 = denoiser(x_n, n)` and draw `x_{n-1}`
/// from the diffusion posterior given `(x_n, x_hat_0)`. At `n = 1` the
/// posterior mean is returned without noise.
pub fn denoise_step<D: Denoiser + ?Sized, R: Rng>(
    x_n: &Grid,
    n: usize,
    denoiser: &D,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Grid> {
    if n < 1 || n > schedule.len() {
        return Err(Error::InvalidConfig(format!(
            "step {n} outside 1..={}",
            schedule.len()
        )));
    }
    let x0_hat = denoiser.denoise(x_n, n);
    if !x0_hat.same_shape(x_n) {
        return Err(Error::ShapeMismatch(
            "denoiser changed the grid shape".to_string(),
        ));
    }
    let beta = schedule.beta(n);
    let alpha = 1.0 - beta;
    let ab_n = schedule.alpha_bar(n);
    let ab_prev = schedule.alpha_bar(n - 1);
    let coef_x0 = ab_prev.sqrt() * beta / (1.0 - ab_n);
    let coef_xn = alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab_n);
    let var = (1.0 - ab_prev) / (1.0 - ab_n) * beta;
    let std = var.sqrt();

    let data = x0_hat
        .as_slice()
        .iter()
        .zip(x_n.as_slice())
        .map(|(&x0v, &xnv)| {
            let mean = coef_x0 * x0v + coef_xn * xnv;
            if n == 1 {
                mean
            } else {
                let g: f64 = StandardNormal.sample(rng);
                mean + std * g
            }
        })
        .collect();
    Grid::from_vec(x_n.rows(), x_n.cols(), data)
}

/// Full reverse loop: start from Gaussian noise in the action cells and
/// template values in the condition cells, then alternate denoising and
/// condition projection from step N down to 1. The returned grid satisfies
/// the template exactly.
pub fn sample<D: Denoiser + ?Sized, R: Rng>(
    denoiser: &D,
    template: &ConditionMatrix,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Grid> {
    let layout = template.layout();
    let mut x = Grid::zeros(layout.rows(), layout.cols());
    for row in 0..layout.rows() {
        for col in 0..layout.cols() {
            if layout.kind(row, col).is_condition() {
                x.set(row, col, template.values().get(row, col));
            } else {
                let g: f64 = StandardNormal.sample(rng);
                x.set(row, col, g);
            }
        }
    }
    for n in (1..=schedule.len()).rev() {
        x = denoise_step(&x, n, denoiser, schedule, rng)?;
        x = project_conditions(&x, template)?;
    }
    Ok(x)
}
