//! Physics-informed training: data MSE plus a weighted Laplace-equation
//! residual penalty over collocation points.
//!
//! The total loss is `L = L_data + lambda_pde * L_pde` with
//! `L_pde = mean_c (lap u(c))^2`, the Laplacian taken by the five-point
//! stencil on the standardized network output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geostat::Sample2D;
use crate::neural::{self, MlpModel, NeuralError, Regularizer, TrainConfig, TrainedModel, STENCIL};

/// Axis-aligned box in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub const UNIT: Domain = Domain {
        x_min: -1.0,
        x_max: 1.0,
        y_min: -1.0,
        y_max: 1.0,
    };

    pub fn contains(&self, (x, y): (f64, f64)) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self::UNIT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnConfig {
    pub base: TrainConfig,
    pub lambda_pde: f64,
    pub n_collocation: usize,
    pub collocation_seed: u64,
    pub stencil_h: f64,
    pub domain: Domain,
    /// Draw a fresh collocation set every epoch (seeded from
    /// `collocation_seed` and the epoch index).
    pub resample_each_epoch: bool,
}

impl Default for PinnConfig {
    fn default() -> Self {
        Self {
            base: TrainConfig::default(),
            lambda_pde: 1.0,
            n_collocation: 1024,
            collocation_seed: 0,
            stencil_h: 1e-3,
            domain: Domain::UNIT,
            resample_each_epoch: false,
        }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        self.base.validate()?;
        if !(self.lambda_pde.is_finite() && self.lambda_pde >= 0.0) {
            return Err(NeuralError::Config(format!("lambda_pde = {}", self.lambda_pde)));
        }
        if self.n_collocation == 0 {
            return Err(NeuralError::Config("n_collocation must be >= 1".into()));
        }
        if !(self.stencil_h.is_finite() && self.stencil_h > 0.0) {
            return Err(NeuralError::Config(format!("stencil_h = {}", self.stencil_h)));
        }
        let d = &self.domain;
        if !(d.x_min < d.x_max && d.y_min < d.y_max) {
            return Err(NeuralError::Config(format!("degenerate domain {d:?}")));
        }
        Ok(())
    }
}

fn draw_points(n: usize, domain: &Domain, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (
                rng.random_range(domain.x_min..domain.x_max),
                rng.random_range(domain.y_min..domain.y_max),
            )
        })
        .collect()
}

/// `n_collocation` points uniform over the domain, from `collocation_seed`.
pub fn sample_collocation(config: &PinnConfig) -> Vec<(f64, f64)> {
    draw_points(config.n_collocation, &config.domain, config.collocation_seed)
}

/// Mean squared stencil Laplacian over `points`.
pub fn pde_loss(model: &MlpModel, points: &[(f64, f64)], stencil_h: f64) -> f64 {
    let lap = neural::laplacian_batch(model, points, stencil_h);
    lap.iter().fold(0.0, |a, l| a + l * l) / lap.len() as f64
}

/// Loss value and parameter gradient of [`pde_loss`], the gradient scaled by
/// `weight`.
pub fn pde_loss_and_grad(model: &MlpModel, points: &[(f64, f64)], stencil_h: f64, weight: f64) -> (f64, Vec<f64>) {
    let stencil = neural::stencil_points(points, stencil_h);
    let inv_h2 = 1.0 / (stencil_h * stencil_h);
    let n = points.len() as f64;
    let mut sum = 0.0;
    let (_, grad) = neural::forward_backward(model, &stencil, |u| {
        let mut seeds = Vec::with_capacity(u.len());
        for c in u.chunks_exact(STENCIL.len()) {
            let lap = c.iter().zip(&STENCIL).fold(0.0, |a, (u, s)| a + s.2 * u) * inv_h2;
            sum += lap * lap;
            seeds.extend(STENCIL.iter().map(|s| weight * 2.0 * lap * s.2 * inv_h2 / n));
        }
        seeds
    });
    (sum / n, grad)
}

struct LaplaceResidual<'a> {
    config: &'a PinnConfig,
    points: Vec<(f64, f64)>,
}

impl Regularizer for LaplaceResidual<'_> {
    fn evaluate(&mut self, model: &MlpModel, epoch: usize, grad: &mut [f64]) -> f64 {
        if self.config.resample_each_epoch && epoch > 0 {
            let seed = self.config.collocation_seed.wrapping_add(epoch as u64);
            self.points = draw_points(self.config.n_collocation, &self.config.domain, seed);
        }
        let w = self.config.lambda_pde;
        if w == 0.0 {
            return pde_loss(model, &self.points, self.config.stencil_h);
        }
        let (loss, g) = pde_loss_and_grad(model, &self.points, self.config.stencil_h, w);
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        loss
    }

    fn weight(&self) -> f64 {
        self.config.lambda_pde
    }
}

/// Full-batch Adam on `L_data + lambda_pde * L_pde`. The returned trace holds
/// `L_data`, `L_pde` and `L` per epoch. With `lambda_pde = 0` the parameters
/// are bit-identical to [`neural::train_mlp`] on the same base config.
pub fn train_pinn(samples: &[Sample2D], config: &PinnConfig) -> Result<TrainedModel, NeuralError> {
    config.validate()?;
    let mut residual = LaplaceResidual {
        config,
        points: sample_collocation(config),
    };
    neural::train_with(samples, &config.base, Some(&mut residual))
}
