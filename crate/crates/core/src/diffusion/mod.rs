//! Conditional denoising diffusion over action logits.
//!
//! The forward process is `x_t = √ᾱ_t·x_0 + √(1-ᾱ_t)·ε`; one reverse step is
//! `x_{t-1} = x_t/√α_t - β_t/√(α_t(1-ᾱ_t))·ε̂(x_t, g, t) + √β_t·z` with
//! `z = 0` at `t = 1`. Timesteps are 1-based throughout.

mod checkpoint;
mod mlp;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{Dense, Mlp, MlpCache, MlpGrads};

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("expected {expected} input columns, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid noise schedule: {0}")]
    Schedule(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl Default for NoiseSchedule {
    /// Ten steps, β linear from 1e-4 to 0.05.
    fn default() -> Self {
        NoiseSchedule::linear(10, 1e-4, 0.05).expect("valid default schedule")
    }
}

impl NoiseSchedule {
    pub fn from_betas(betas: Vec<f64>) -> Result<NoiseSchedule, DiffusionError> {
        if betas.is_empty() {
            return Err(DiffusionError::Schedule("at least one step required".into()));
        }
        if !betas.iter().all(|&b| b > 0.0 && b < 1.0) {
            return Err(DiffusionError::Schedule("every beta must lie in (0, 1)".into()));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(NoiseSchedule {
            betas,
            alphas,
            alpha_bars,
        })
    }

    /// β interpolated linearly from `beta_start` at t=1 to `beta_end` at t=T.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule, DiffusionError> {
        if steps == 0 || !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(DiffusionError::Schedule(format!(
                "need steps >= 1 and 0 < beta_start <= beta_end < 1, got {steps}, {beta_start}, {beta_end}"
            )));
        }
        let betas = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        NoiseSchedule::from_betas(betas)
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    /// `(1/√α_t, β_t/√(α_t(1-ᾱ_t)), √β_t)`.
    pub fn reverse_coefficients(&self, t: usize) -> (f64, f64, f64) {
        let (a, ab, b) = (self.alpha(t), self.alpha_bar(t), self.beta(t));
        (1.0 / a.sqrt(), b / (a * (1.0 - ab)).sqrt(), b.sqrt())
    }
}

pub fn forward_sample(x0: &[f64], t: usize, noise: &[f64], schedule: &NoiseSchedule) -> Vec<f64> {
    let ab = schedule.alpha_bar(t);
    let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.iter().zip(noise).map(|(x, e)| s * x + n * e).collect()
}

/// One reverse step; pass zeros as `fresh_noise` for the final step.
pub fn reverse_step(x_t: &[f64], t: usize, eps_pred: &[f64], fresh_noise: &[f64], schedule: &NoiseSchedule) -> Vec<f64> {
    let (cx, ce, sigma) = schedule.reverse_coefficients(t);
    x_t.iter()
        .zip(eps_pred)
        .zip(fresh_noise)
        .map(|((x, e), z)| cx * x - ce * e + sigma * z)
        .collect()
}

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

/// Noise predictor `ε̂(x_t, g, t)` with input `[x_t, g, t/T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserNet {
    pub mlp: Mlp,
    pub action_dim: usize,
    pub cond_dim: usize,
    pub steps: usize,
}

impl DenoiserNet {
    pub fn new<R: Rng + ?Sized>(action_dim: usize, cond_dim: usize, hidden: &[usize], steps: usize, rng: &mut R) -> DenoiserNet {
        let sizes: Vec<usize> = std::iter::once(action_dim + cond_dim + 1)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(action_dim))
            .collect();
        DenoiserNet {
            mlp: Mlp::new(&sizes, rng),
            action_dim,
            cond_dim,
            steps,
        }
    }

    /// Rows `[x_t, g, t/T]` with a per-row timestep.
    pub fn input(&self, x: ArrayView2<f64>, g: ArrayView2<f64>, ts: &[usize]) -> Array2<f64> {
        let tcol = Array1::from_iter(ts.iter().map(|&t| t as f64 / self.steps as f64)).insert_axis(Axis(1));
        concatenate![Axis(1), x, g, tcol]
    }

    pub fn predict(&self, x: ArrayView2<f64>, g: ArrayView2<f64>, t: usize) -> Result<Array2<f64>, DiffusionError> {
        self.mlp.forward(self.input(x, g, &vec![t; x.nrows()]).view())
    }
}

/// Everything the reverse chain drew and computed, kept for backprop.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub x_start: Array2<f64>,
    /// Fresh noise used at each `t`, indexed `t - 1`; zero at `t = 1`.
    pub noises: Vec<Array2<f64>>,
    caches: Vec<MlpCache>,
    pub x0: Array2<f64>,
}

/// Reverse chain from given `x_T` and per-step noises (indexed `t - 1`).
pub fn run_chain(
    net: &DenoiserNet,
    g: ArrayView2<f64>,
    x_start: Array2<f64>,
    mut noises: Vec<Array2<f64>>,
    schedule: &NoiseSchedule,
) -> Result<ChainTrace, DiffusionError> {
    let steps = schedule.steps();
    let batch = g.nrows();
    noises[0].fill(0.0);
    let mut caches: Vec<Option<MlpCache>> = vec![None; steps];
    let mut x = x_start.clone();
    for t in (1..=steps).rev() {
        let input = net.input(x.view(), g, &vec![t; batch]);
        let (eps, cache) = net.mlp.forward_cached(input.view())?;
        let (cx, ce, sigma) = schedule.reverse_coefficients(t);
        x = x * cx - eps * ce + &noises[t - 1] * sigma;
        caches[t - 1] = Some(cache);
    }
    Ok(ChainTrace {
        x_start,
        noises,
        caches: caches.into_iter().map(|c| c.expect("every step ran")).collect(),
        x0: x,
    })
}

/// Reverse chain from `x_T ~ N(0, I)` for a batch of conditions.
pub fn sample_chain<R: Rng + ?Sized>(
    net: &DenoiserNet,
    g: ArrayView2<f64>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<ChainTrace, DiffusionError> {
    let batch = g.nrows();
    let x_start = gaussian(batch, net.action_dim, rng);
    let noises = (0..schedule.steps()).map(|_| gaussian(batch, net.action_dim, rng)).collect();
    run_chain(net, g, x_start, noises, schedule)
}

/// Parameter gradient of a loss with `∂loss/∂x_0 = grad_x0`, treating the
/// chain's noises as constants.
pub fn chain_backward(net: &DenoiserNet, trace: &ChainTrace, grad_x0: ArrayView2<f64>, schedule: &NoiseSchedule) -> MlpGrads {
    let mut grads = MlpGrads::zeros_like(&net.mlp);
    let mut delta = grad_x0.to_owned();
    for t in 1..=schedule.steps() {
        let (cx, ce, _) = schedule.reverse_coefficients(t);
        let grad_eps = &delta * (-ce);
        let (g, grad_in) = net.mlp.backward(&trace.caches[t - 1], grad_eps.view());
        grads.add_scaled(&g, 1.0);
        delta = delta * cx + &grad_in.slice(ndarray::s![.., ..net.action_dim]);
    }
    grads
}

/// Logits `x_0` for a single condition vector.
pub fn generate_action_logits<R: Rng + ?Sized>(
    g: &[f64],
    net: &DenoiserNet,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<Vec<f64>, DiffusionError> {
    let g = ArrayView2::from_shape((1, g.len()), g).expect("row vector");
    let trace = sample_chain(net, g, schedule, rng)?;
    Ok(trace.x0.row(0).to_vec())
}

/// Mean over the batch of `‖ε - ε̂(√ᾱ_t x_0 + √(1-ᾱ_t) ε, g, t)‖²` for given
/// timesteps and noise, with its parameter gradient.
pub fn denoising_loss_with(
    net: &DenoiserNet,
    x0: ArrayView2<f64>,
    g: ArrayView2<f64>,
    ts: &[usize],
    noise: ArrayView2<f64>,
    schedule: &NoiseSchedule,
) -> Result<(f64, MlpGrads), DiffusionError> {
    let batch = x0.nrows();
    let mut xt = Array2::zeros(x0.raw_dim());
    for (i, &t) in ts.iter().enumerate() {
        let ab = schedule.alpha_bar(t);
        let row = &x0.row(i) * ab.sqrt() + &noise.row(i) * (1.0 - ab).sqrt();
        xt.row_mut(i).assign(&row);
    }
    let input = net.input(xt.view(), g, ts);
    let (pred, cache) = net.mlp.forward_cached(input.view())?;
    let resid = &noise - &pred;
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / batch as f64;
    let grad_out = resid * (-2.0 / batch as f64);
    let (grads, _) = net.mlp.backward(&cache, grad_out.view());
    Ok((loss, grads))
}

/// Denoising loss with `t` uniform on `1..=T` and unit Gaussian noise.
pub fn denoising_loss<R: Rng + ?Sized>(
    net: &DenoiserNet,
    x0: ArrayView2<f64>,
    g: ArrayView2<f64>,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<(f64, MlpGrads), DiffusionError> {
    let ts: Vec<usize> = (0..x0.nrows()).map(|_| rng.random_range(1..=schedule.steps())).collect();
    let noise = gaussian(x0.nrows(), x0.ncols(), rng);
    denoising_loss_with(net, x0, g, &ts, noise.view(), schedule)
}
