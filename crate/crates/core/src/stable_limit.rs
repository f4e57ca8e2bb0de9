//! Limit objects: the Laplace exponent, spectrally positive stable increments,
//! the reflected stable path, the ladder-height subordinator and Pareto lives.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;
use thiserror::Error;

use crate::forest::reflect_above_infimum;

#[derive(Debug, Error, PartialEq)]
pub enum StableError {
    #[error("gamma = {0} outside (1, 2)")]
    Gamma(f64),
    #[error("a = {0} must be positive")]
    Scale(f64),
    #[error("horizon/mesh = {0} below 1000")]
    Mesh(f64),
}

/// Index `γ`, time unit `a`, and the constant `c` in `ψ(λ) = c (λ/a)^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub gamma: f64,
    pub a: f64,
    pub coefficient: f64,
}

impl StableParams {
    /// `ψ(λ) = (λ/a)^γ / (−Γ(1−γ))`.
    pub fn new(gamma: f64, a: f64) -> Result<Self, StableError> {
        Self::check(gamma, a)?;
        Ok(Self {
            gamma,
            a,
            coefficient: 1.0 / -gamma_fn(1.0 - gamma),
        })
    }

    /// `ψ(λ) = −Γ(1−γ) (λ/a)^γ`: the exponent of `lim v_p S([p])` when
    /// `p P(μ(V) ≥ x/v_p) → (ax)^{−γ}`.
    pub fn lukasiewicz_limit(gamma: f64, a: f64) -> Result<Self, StableError> {
        Self::check(gamma, a)?;
        Ok(Self {
            gamma,
            a,
            coefficient: -gamma_fn(1.0 - gamma),
        })
    }

    fn check(gamma: f64, a: f64) -> Result<(), StableError> {
        if !(gamma > 1.0 && gamma < 2.0) {
            return Err(StableError::Gamma(gamma));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(StableError::Scale(a));
        }
        Ok(())
    }

    /// `log E e^{−λ S_∞(1)}`.
    pub fn psi(&self, lambda: f64) -> f64 {
        if lambda < 0.0 {
            return f64::NAN;
        }
        self.coefficient * (lambda / self.a).powf(self.gamma)
    }

    /// `E e^{−λ S_∞(1)}`.
    pub fn laplace(&self, lambda: f64) -> f64 {
        self.psi(lambda).exp()
    }
}

pub fn psi(lambda: f64, params: &StableParams) -> f64 {
    params.psi(lambda)
}

/// Chambers–Mallows–Stuck draw of `S_∞(dt)`, totally skewed to the right.
pub fn sample_stable_increment<R: Rng + ?Sized>(params: &StableParams, dt: f64, rng: &mut R) -> f64 {
    let alpha = params.gamma;
    let kappa = dt * params.coefficient * params.a.powf(-alpha);
    let tan = (FRAC_PI_2 * alpha).tan();
    let sigma = (kappa * (FRAC_PI_2 * alpha).cos().abs()).powf(1.0 / alpha);
    let b = tan.atan() / alpha;
    let s = (1.0 + tan * tan).powf(0.5 / alpha);
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
    sigma * x
}

/// One path of `S_∞` on a uniform grid, with its reflection above the running infimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPathSample {
    pub mesh: f64,
    /// `values[i] = S_∞(i·mesh)`.
    pub values: Vec<f64>,
    pub reflected: Vec<f64>,
}

impl LimitPathSample {
    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| i as f64 * self.mesh).collect()
    }

    /// Reflected value at the grid point nearest `t`.
    pub fn reflected_at(&self, t: f64) -> f64 {
        let i = ((t / self.mesh).round() as usize).min(self.reflected.len() - 1);
        self.reflected[i]
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let i = ((t / self.mesh).round() as usize).min(self.values.len() - 1);
        self.values[i]
    }
}

pub fn simulate_reflected_limit<R: Rng + ?Sized>(
    params: &StableParams,
    horizon: f64,
    mesh: f64,
    rng: &mut R,
) -> Result<LimitPathSample, StableError> {
    let ratio = horizon / mesh;
    if !(ratio >= 1000.0 - 1e-9) {
        return Err(StableError::Mesh(ratio));
    }
    let n = ratio.round() as usize;
    let mut values = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    values.push(x);
    for _ in 0..n {
        x += sample_stable_increment(params, mesh, rng);
        values.push(x);
    }
    let reflected = reflect_above_infimum(&values);
    Ok(LimitPathSample {
        mesh,
        values,
        reflected,
    })
}

/// Increment over `ds` of the subordinator with `E e^{−λ Z(s)} = e^{−s c λ^{γ−1}}`, `c = 1`.
pub fn sample_z_infinity_increment<R: Rng + ?Sized>(params: &StableParams, ds: f64, rng: &mut R) -> f64 {
    positive_stable(params.gamma - 1.0, ds, rng)
}

/// Kanter's representation of the positive `α`-stable law with `E e^{−λX} = e^{−scale λ^α}`.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, scale: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let w: f64 = Exp1.sample(rng);
    let x = (alpha * u).sin() / u.sin().powf(1.0 / alpha) * (((1.0 - alpha) * u).sin() / w).powf((1.0 - alpha) / alpha);
    scale.powf(1.0 / alpha) * x
}

/// Pareto draw with `P(V ≥ x) = x^{−γ}`, `x ≥ 1`.
pub fn sample_v_infinity<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    (e / params.gamma).exp()
}
