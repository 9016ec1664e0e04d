//! The pluggable noise-removal function and its reference implementation: a
//! single-hidden-layer tanh network over the flattened grid concatenated
//! with a sinusoidal embedding of the diffusion step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffusion::grid::Grid;
use crate::error::{Error, Result};

/// Predicts the clean grid `x_0` from a noised grid at step `n` (1-based).
pub trait Denoiser {
    fn denoise(&self, x: &Grid, n: usize) -> Grid;
}

/// A denoiser that can accumulate parameter gradients for training.
pub trait TrainableDenoiser: Denoiser {
    /// Backpropagates `dL/d(output)` for input `(x, n)`, adding parameter
    /// gradients to the internal accumulator.
    fn accumulate_gradients(&mut self, x: &Grid, n: usize, grad_output: &Grid);

    /// One SGD-with-momentum update from the accumulated gradients (scaled
    /// by `scale`, e.g. `1/batch`), then clears the accumulator.
    fn apply_gradients(&mut self, learning_rate: f64, momentum: f64, scale: f64);

    fn reset_gradients(&mut self);

    fn num_params(&self) -> usize;

    fn param(&self, index: usize) -> f64;

    fn set_param(&mut self, index: usize, value: f64);

    fn gradient(&self, index: usize) -> f64;
}

/// Always returns a fixed clean grid; handy for exercising the sampling loop
/// with a known ground truth.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    target: Grid,
}

impl OracleDenoiser {
    pub fn new(target: Grid) -> Self {
        Self { target }
    }
}

impl Denoiser for OracleDenoiser {
    fn denoise(&self, _x: &Grid, _n: usize) -> Grid {
        self.target.clone()
    }
}

pub(crate) fn sinusoidal_embedding(n: usize, dim: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), dim);
    let half = dim / 2;
    for k in 0..half {
        let freq = (10_000f64).powf(-(2.0 * k as f64) / dim as f64);
        out[2 * k] = (n as f64 * freq).sin();
        out[2 * k + 1] = (n as f64 * freq).cos();
    }
    if dim % 2 == 1 {
        out[dim - 1] = 0.0;
    }
}

/// Reference fully connected denoiser:
/// `out = W2 * tanh(W1 * [flatten(x); embed(n)] + b1) + b2`.
#[derive(Debug, Clone)]
pub struct MlpDenoiser {
    grid_rows: usize,
    grid_cols: usize,
    hidden_dim: usize,
    time_embed_dim: usize,
    // Parameters flattened as [w1, b1, w2, b2]; w1 is hidden x input
    // row-major, w2 is output x hidden row-major.
    params: Vec<f64>,
    grads: Vec<f64>,
    velocity: Vec<f64>,
}

impl MlpDenoiser {
    pub fn new(
        grid_rows: usize,
        grid_cols: usize,
        hidden_dim: usize,
        time_embed_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if grid_rows == 0 || grid_cols == 0 || hidden_dim == 0 || time_embed_dim == 0 {
            return Err(Error::InvalidConfig(
                "denoiser dimensions must be positive".to_string(),
            ));
        }
        let input_dim = grid_rows * grid_cols + time_embed_dim;
        let output_dim = grid_rows * grid_cols;
        let count = hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; count];
        let w1_scale = 1.0 / (input_dim as f64).sqrt();
        let w2_scale = 1.0 / (hidden_dim as f64).sqrt();
        for (i, p) in params.iter_mut().enumerate() {
            if i < hidden_dim * input_dim {
                let g: f64 = StandardNormal.sample(&mut rng);
                *p = g * w1_scale;
            } else if i >= hidden_dim * input_dim + hidden_dim
                && i < hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim
            {
                let g: f64 = StandardNormal.sample(&mut rng);
                *p = g * w2_scale;
            }
            // Biases start at zero.
        }
        Ok(Self {
            grid_rows,
            grid_cols,
            hidden_dim,
            time_embed_dim,
            grads: vec![0.0; count],
            velocity: vec![0.0; count],
            params,
        })
    }

    fn input_dim(&self) -> usize {
        self.grid_rows * self.grid_cols + self.time_embed_dim
    }

    fn output_dim(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden_dim * self.input_dim();
        let b1 = w1 + self.hidden_dim;
        let w2 = b1 + self.output_dim() * self.hidden_dim;
        (w1, b1, w2)
    }

    fn build_input(&self, x: &Grid, n: usize) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.input_dim());
        input.extend_from_slice(x.as_slice());
        let start = input.len();
        input.resize(self.input_dim(), 0.0);
        sinusoidal_embedding(n, self.time_embed_dim, &mut input[start..]);
        input
    }

    // Forward pass returning the hidden activations, for reuse in backprop.
    fn forward(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (w1_end, b1_end, w2_end) = self.offsets();
        let in_dim = self.input_dim();
        let w1 = &self.params[..w1_end];
        let b1 = &self.params[w1_end..b1_end];
        let w2 = &self.params[b1_end..w2_end];
        let b2 = &self.params[w2_end..];

        let mut hidden = vec![0.0; self.hidden_dim];
        for (h, hv) in hidden.iter_mut().enumerate() {
            let row = &w1[h * in_dim..(h + 1) * in_dim];
            let mut acc = b1[h];
            for (w, v) in row.iter().zip(input) {
                acc += w * v;
            }
            *hv = acc.tanh();
        }
        let mut output = vec![0.0; self.output_dim()];
        for (o, ov) in output.iter_mut().enumerate() {
            let row = &w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
            let mut acc = b2[o];
            for (w, h) in row.iter().zip(&hidden) {
                acc += w * h;
            }
            *ov = acc;
        }
        (hidden, output)
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn to_checkpoint(&self) -> DenoiserCheckpoint {
        DenoiserCheckpoint {
            grid_rows: self.grid_rows,
            grid_cols: self.grid_cols,
            hidden_dim: self.hidden_dim,
            time_embed_dim: self.time_embed_dim,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &DenoiserCheckpoint) -> Result<Self> {
        let mut net = Self::new(
            ckpt.grid_rows,
            ckpt.grid_cols,
            ckpt.hidden_dim,
            ckpt.time_embed_dim,
            0,
        )?;
        if ckpt.params.len() != net.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint has {} params, layout needs {}",
                ckpt.params.len(),
                net.params.len()
            )));
        }
        net.params.copy_from_slice(&ckpt.params);
        Ok(net)
    }
}

impl Denoiser for MlpDenoiser {
    fn denoise(&self, x: &Grid, n: usize) -> Grid {
        debug_assert_eq!(x.rows(), self.grid_rows);
        debug_assert_eq!(x.cols(), self.grid_cols);
        let input = self.build_input(x, n);
        let (_, output) = self.forward(&input);
        Grid::from_vec(self.grid_rows, self.grid_cols, output)
            .expect("output dim equals grid size")
    }
}

impl TrainableDenoiser for MlpDenoiser {
    fn accumulate_gradients(&mut self, x: &Grid, n: usize, grad_output: &Grid) {
        let input = self.build_input(x, n);
        let (hidden, _) = self.forward(&input);
        let (w1_end, b1_end, w2_end) = self.offsets();
        let in_dim = self.input_dim();
        let hid = self.hidden_dim;
        let go = grad_output.as_slice();

        // d/dW2, d/db2, and the hidden-layer error in one pass.
        let mut hidden_err = vec![0.0; hid];
        {
            let w2 = &self.params[b1_end..w2_end];
            for (o, &g) in go.iter().enumerate() {
                let w2_row = &w2[o * hid..(o + 1) * hid];
                for (h, &w) in w2_row.iter().enumerate() {
                    hidden_err[h] += g * w;
                }
            }
            let (gw2, gb2) = self.grads[b1_end..].split_at_mut(w2_end - b1_end);
            for (o, &g) in go.iter().enumerate() {
                for (h, &hv) in hidden.iter().enumerate() {
                    gw2[o * hid + h] += g * hv;
                }
                gb2[o] += g;
            }
        }

        // Through tanh: d/dpre = err * (1 - h^2).
        let (gw1, gb1) = self.grads[..b1_end].split_at_mut(w1_end);
        for (h, &err) in hidden_err.iter().enumerate() {
            let d_pre = err * (1.0 - hidden[h] * hidden[h]);
            let row = &mut gw1[h * in_dim..(h + 1) * in_dim];
            for (w, &v) in row.iter_mut().zip(&input) {
                *w += d_pre * v;
            }
            gb1[h] += d_pre;
        }
    }

    fn apply_gradients(&mut self, learning_rate: f64, momentum: f64, scale: f64) {
        for ((p, g), v) in self
            .params
            .iter_mut()
            .zip(&mut self.grads)
            .zip(&mut self.velocity)
        {
            *v = momentum * *v + *g * scale;
            *p -= learning_rate * *v;
            *g = 0.0;
        }
    }

    fn reset_gradients(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn param(&self, index: usize) -> f64 {
        self.params[index]
    }

    fn set_param(&mut self, index: usize, value: f64) {
        self.params[index] = value;
    }

    fn gradient(&self, index: usize) -> f64 {
        self.grads[index]
    }
}

/// Flat parameter blob with the layout header needed to rebuild the network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenoiserCheckpoint {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub hidden_dim: usize,
    pub time_embed_dim: usize,
    pub params: Vec<f64>,
}
