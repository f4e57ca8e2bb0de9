//! Characteristics `(V, μ)` of CMJ processes.
//!
//! A [`CharacteristicSpec`] pairs a life-length law with a variant describing
//! how the birth point process `μ` is generated. Each individual carries
//! `P = μ|_V`. The module also calibrates specs to criticality
//! `E μ(V) = 1`, computes the scaling sequence `v_p` and estimates the two
//! regularity assumptions on `μ` (law of large numbers with drift `1/a`, and
//! negligible large deviations at scale `x/v_p`).

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};
use thiserror::Error;

use crate::measures::{AtomicMeasure, Measure};
use crate::report::{Quantity, ReportRow, TestReport, Verdict};
use crate::rng::{substream, tag};
use crate::special::{clopper_pearson, hurwitz_zeta, mean_se, zeta};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("tail index gamma = {0} must lie in (1, 2)")]
    GammaOutOfRange(f64),
    #[error("counterexample needs 1 < gamma' < gamma, got gamma' = {gamma_prime}, gamma = {gamma}")]
    GammaPrime { gamma_prime: f64, gamma: f64 },
    #[error("counterexample needs a Pareto life law")]
    CounterexampleLife,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("switching chain: {0}")]
    Chain(String),
    #[error("no tunable parameter: E mu(V) = {0} is fixed by the offspring law")]
    NoFreeParameter(f64),
    #[error("bisection failed to bracket E mu(V) = 1 (got {lo} .. {hi})")]
    NoBracket { lo: f64, hi: f64 },
    #[error("calibration reached |E mu(V) - 1| = {0}, above tolerance")]
    Tolerance(f64),
    #[error("life-law quantile unavailable for v_p at p = {0}")]
    NoQuantile(u64),
}

fn positive(name: &str, x: f64) -> Result<(), ModelError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ModelError::Parameter(format!("{name} = {x} must be positive")))
    }
}

#[inline]
fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Law of the life length `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LifeLaw {
    /// `P(V ≥ x) = (x/x0)^{-γ}` for `x ≥ x0`.
    Pareto { gamma: f64, x0: f64 },
    Constant { value: f64 },
    Exponential { mean: f64 },
}

impl LifeLaw {
    pub fn pareto(gamma: f64, x0: f64) -> Self {
        LifeLaw::Pareto { gamma, x0 }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LifeLaw::Pareto { gamma, x0 } => x0 * (exp1(rng) / gamma).exp(),
            LifeLaw::Constant { value } => value,
            LifeLaw::Exponential { mean } => mean * exp1(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LifeLaw::Pareto { gamma, x0 } => gamma * x0 / (gamma - 1.0),
            LifeLaw::Constant { value } => value,
            LifeLaw::Exponential { mean } => mean,
        }
    }

    /// `P(V ≥ x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match *self {
            LifeLaw::Pareto { gamma, x0 } => {
                if x <= x0 {
                    1.0
                } else {
                    (x0 / x).powf(gamma)
                }
            }
            LifeLaw::Constant { value } => f64::from(x <= value),
            LifeLaw::Exponential { mean } => (-x.max(0.0) / mean).exp(),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            LifeLaw::Pareto { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            LifeLaw::Pareto { x0, .. } => x0,
            LifeLaw::Constant { value } => value,
            LifeLaw::Exponential { mean } => mean,
        }
    }

    pub fn with_scale(&self, s: f64) -> Self {
        match *self {
            LifeLaw::Pareto { gamma, .. } => LifeLaw::Pareto { gamma, x0: s },
            LifeLaw::Constant { .. } => LifeLaw::Constant { value: s },
            LifeLaw::Exponential { .. } => LifeLaw::Exponential { mean: s },
        }
    }

    /// `∫_h^∞ P(V ≥ t) dt`.
    fn integrated_tail(&self, h: f64) -> f64 {
        match *self {
            LifeLaw::Pareto { gamma, x0 } => {
                if h >= x0 {
                    x0.powf(gamma) * h.powf(1.0 - gamma) / (gamma - 1.0)
                } else {
                    (x0 - h) + x0 / (gamma - 1.0)
                }
            }
            LifeLaw::Constant { value } => (value - h).max(0.0),
            LifeLaw::Exponential { mean } => mean * (-h / mean).exp(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match *self {
            LifeLaw::Pareto { gamma, x0 } => {
                if !(gamma > 1.0 && gamma < 2.0) {
                    return Err(ModelError::GammaOutOfRange(gamma));
                }
                positive("x0", x0)
            }
            LifeLaw::Constant { value } => positive("value", value),
            LifeLaw::Exponential { mean } => positive("mean", mean),
        }
    }
}

/// Law of an offspring count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountLaw {
    Deterministic { k: u64 },
    Poisson { mean: f64 },
    /// Geometric on `{0, 1, …}` with the given mean.
    Geometric { mean: f64 },
    /// `probs[k] = P(N = k)`.
    Categorical { probs: Vec<f64> },
}

impl CountLaw {
    pub fn mean(&self) -> f64 {
        match self {
            CountLaw::Deterministic { k } => *k as f64,
            CountLaw::Poisson { mean } | CountLaw::Geometric { mean } => *mean,
            CountLaw::Categorical { probs } => {
                probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            CountLaw::Deterministic { k } => *k,
            CountLaw::Poisson { mean } => poisson(*mean, rng),
            CountLaw::Geometric { mean } => {
                // Number of failures before a success with P(success) = 1/(1+mean).
                let u: f64 = rng.sample(Open01);
                let q = mean / (1.0 + mean);
                if q == 0.0 {
                    0
                } else {
                    (u.ln() / q.ln()).floor() as u64
                }
            }
            CountLaw::Categorical { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as u64;
                    }
                }
                (probs.len() - 1) as u64
            }
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match self {
            CountLaw::Deterministic { .. } => Ok(()),
            CountLaw::Poisson { mean } | CountLaw::Geometric { mean } => {
                if mean.is_finite() && *mean >= 0.0 {
                    Ok(())
                } else {
                    Err(ModelError::Parameter(format!("count mean {mean}")))
                }
            }
            CountLaw::Categorical { probs } => {
                let total: f64 = probs.iter().sum();
                if probs.is_empty() || probs.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
                    Err(ModelError::Parameter("categorical probabilities".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Law of a positive step (renewal spacing or block length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepLaw {
    Deterministic { value: f64 },
    Exponential { mean: f64 },
    Gamma { shape: f64, mean: f64 },
}

impl StepLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            StepLaw::Deterministic { value } => value,
            StepLaw::Exponential { mean } | StepLaw::Gamma { mean, .. } => mean,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            StepLaw::Deterministic { value } => value,
            StepLaw::Exponential { mean } => mean * exp1(rng),
            StepLaw::Gamma { shape, mean } => gamma_sample(shape, mean / shape, rng),
        }
    }

    /// Law of the sum of `n` steps, when it has a closed form.
    fn sample_sum<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Option<f64> {
        let n = n as f64;
        match *self {
            StepLaw::Deterministic { value } => Some(n * value),
            StepLaw::Exponential { mean } => Some(gamma_sample(n, mean, rng)),
            StepLaw::Gamma { shape, mean } => Some(gamma_sample(n * shape, mean / shape, rng)),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match *self {
            StepLaw::Deterministic { value } => positive("step", value),
            StepLaw::Exponential { mean } => positive("step mean", mean),
            StepLaw::Gamma { shape, mean } => {
                positive("step shape", shape)?;
                positive("step mean", mean)
            }
        }
    }
}

fn gamma_sample<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, scale).expect("positive gamma parameters").sample(rng)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite Poisson mean").sample(rng) as u64
}

/// How the birth point process `μ` is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    /// `V = 1` and all offspring born at age 1; the life law is ignored.
    GaltonWatson { offspring: CountLaw },
    /// All offspring born at death: `P = N δ_V` with `N` independent of `V`.
    BellmanHarris { offspring: CountLaw },
    /// `μ` a Poisson process of rate `rate`.
    BinaryHomogeneous { rate: f64 },
    /// `μ` a renewal process without delay.
    RenewalOffspring { step: StepLaw },
    /// Poisson process whose intensity is constant on iid blocks and follows a
    /// Markov chain from block to block.
    SwitchingPoisson {
        block: StepLaw,
        intensities: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
    /// `μ = τ δ_{1/2} + Σ_{k ≥ 1} δ_k` with `τ = ⌈X⌉`, `P(X ≥ x) = x^{-γ'}` on `[1, ∞)`.
    Counterexample { gamma_prime: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicSpec {
    pub variant: Variant,
    pub life: LifeLaw,
}

impl CharacteristicSpec {
    pub fn new(variant: Variant, life: LifeLaw) -> Result<Self, ModelError> {
        let spec = Self { variant, life };
        spec.validate()?;
        Ok(spec)
    }

    pub fn binary_homogeneous(rate: f64, gamma: f64, x0: f64) -> Result<Self, ModelError> {
        Self::new(Variant::BinaryHomogeneous { rate }, LifeLaw::pareto(gamma, x0))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.life.validate()?;
        match &self.variant {
            Variant::GaltonWatson { offspring } | Variant::BellmanHarris { offspring } => {
                offspring.validate()
            }
            Variant::BinaryHomogeneous { rate } => positive("rate", *rate),
            Variant::RenewalOffspring { step } => step.validate(),
            Variant::SwitchingPoisson {
                block,
                intensities,
                transition,
            } => {
                block.validate()?;
                Chain::new(intensities, transition).map(|_| ())
            }
            Variant::Counterexample { gamma_prime } => {
                let LifeLaw::Pareto { gamma, .. } = self.life else {
                    return Err(ModelError::CounterexampleLife);
                };
                if !(*gamma_prime > 1.0 && *gamma_prime < gamma) {
                    return Err(ModelError::GammaPrime {
                        gamma_prime: *gamma_prime,
                        gamma,
                    });
                }
                Ok(())
            }
        }
    }

    /// Tail index of the life law.
    pub fn gamma(&self) -> Option<f64> {
        self.life.gamma()
    }

    /// Drift constant `a` with `μ(t)/t → 1/a`; `None` when `μ` is finite.
    pub fn drift_constant(&self) -> Option<f64> {
        match &self.variant {
            Variant::GaltonWatson { .. } | Variant::BellmanHarris { .. } => None,
            Variant::BinaryHomogeneous { rate } => Some(1.0 / rate),
            Variant::RenewalOffspring { step } => Some(step.mean()),
            Variant::SwitchingPoisson {
                intensities,
                transition,
                ..
            } => Chain::new(intensities, transition)
                .ok()
                .map(|c| 1.0 / c.mean_intensity()),
            Variant::Counterexample { .. } => Some(1.0),
        }
    }

    /// `E μ(V)` in closed form, when available.
    pub fn mean_offspring_exact(&self) -> Option<f64> {
        match (&self.variant, &self.life) {
            (Variant::GaltonWatson { offspring }, _) | (Variant::BellmanHarris { offspring }, _) => {
                Some(offspring.mean())
            }
            (Variant::BinaryHomogeneous { rate }, life) => Some(rate * life.mean()),
            (Variant::RenewalOffspring { step: StepLaw::Exponential { mean } }, life) => {
                Some(life.mean() / mean)
            }
            (Variant::RenewalOffspring { step }, LifeLaw::Pareto { gamma, x0 }) => {
                renewal_pareto_mean(step, *gamma, *x0)
            }
            (Variant::Counterexample { gamma_prime }, LifeLaw::Pareto { gamma, x0 }) if *x0 <= 0.5 => {
                Some(x0.powf(*gamma) * (zeta(*gamma) + 2f64.powf(*gamma) * (1.0 + zeta(*gamma_prime))))
            }
            _ => None,
        }
    }

    pub fn sampler(&self) -> Result<LifeSampler, ModelError> {
        LifeSampler::new(self.clone())
    }

    pub fn with_life_scale(&self, s: f64) -> Self {
        Self {
            variant: self.variant.clone(),
            life: self.life.with_scale(s),
        }
    }
}

/// `E μ(V)` for a renewal `μ` and Pareto `V`, summing `P(V ≥ A(n))` over `n`.
fn renewal_pareto_mean(step: &StepLaw, gamma: f64, x0: f64) -> Option<f64> {
    let a = step.mean();
    match *step {
        StepLaw::Deterministic { value } => {
            // Atoms n·value ≤ x0 contribute 1, the others (x0/(n value))^γ.
            let head = (x0 / value).floor();
            Some(head + (x0 / value).powf(gamma) * hurwitz_zeta(gamma, head + 1.0))
        }
        StepLaw::Exponential { mean } => Some(gamma * x0 / (gamma - 1.0) / mean),
        StepLaw::Gamma { shape, mean } => {
            // A(n) ~ Gamma(n·shape, theta).
            let theta = mean / shape;
            let y = x0 / theta;
            let c = x0.powf(gamma) * theta.powf(-gamma);
            const N: u64 = 4000;
            let mut s = 0.0;
            for n in 1..=N {
                let sh = n as f64 * shape;
                s += gamma_lr(sh, y) + c * upper_gamma_over_gamma(sh - gamma, sh, y);
            }
            // Beyond N the lower part vanishes and Γ(s−γ)/Γ(s) = s^{−γ}(1 + γ(γ+1)/(2s) + O(s^{−2})).
            let q = N as f64 + 1.0;
            s += (x0 / a).powf(gamma)
                * (hurwitz_zeta(gamma, q) + gamma * (gamma + 1.0) / (2.0 * shape) * hurwitz_zeta(gamma + 1.0, q));
            Some(s)
        }
    }
}

/// `Γ(c, y) / Γ(sh)` with `Γ(c, y)` the upper incomplete gamma function; `c`
/// may be negative (non-integer).
fn upper_gamma_over_gamma(c: f64, sh: f64, y: f64) -> f64 {
    if c > 0.0 {
        (ln_gamma(c) - ln_gamma(sh)).exp() * gamma_ur(c, y)
    } else {
        // Γ(c, y) = (Γ(c+1, y) − y^c e^{−y}) / c.
        (upper_gamma_over_gamma(c + 1.0, sh, y) - (c * y.ln() - y - ln_gamma(sh)).exp()) / c
    }
}

/// Markov chain of block intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub intensities: Vec<f64>,
    pub stationary: Vec<f64>,
    cum_rows: Vec<Vec<f64>>,
    cum_stationary: Vec<f64>,
}

impl Chain {
    pub fn new(intensities: &[f64], transition: &[Vec<f64>]) -> Result<Self, ModelError> {
        let k = intensities.len();
        if k == 0 || transition.len() != k || transition.iter().any(|r| r.len() != k) {
            return Err(ModelError::Chain("transition matrix must be square and match intensities".into()));
        }
        if intensities.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || intensities.iter().all(|l| *l == 0.0) {
            return Err(ModelError::Chain("intensities must be nonnegative, not all zero".into()));
        }
        for row in transition {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(ModelError::Chain("rows must be probability vectors".into()));
            }
        }
        if !irreducible(transition) {
            return Err(ModelError::Chain("transition matrix is not irreducible".into()));
        }
        let stationary = stationary_vector(transition)?;
        let cum = |v: &[f64]| {
            let mut acc = 0.0;
            v.iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<_>>()
        };
        Ok(Self {
            intensities: intensities.to_vec(),
            cum_rows: transition.iter().map(|r| cum(r)).collect(),
            cum_stationary: cum(&stationary),
            stationary,
        })
    }

    /// `E Λ_∞`.
    pub fn mean_intensity(&self) -> f64 {
        self.stationary.iter().zip(&self.intensities).map(|(p, l)| p * l).sum()
    }

    fn pick<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
        cum.partition_point(|&c| c <= u).min(cum.len() - 1)
    }

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        Self::pick(&self.cum_stationary, rng)
    }

    fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        Self::pick(&self.cum_rows[state], rng)
    }
}

fn irreducible(p: &[Vec<f64>]) -> bool {
    let k = p.len();
    (0..k).all(|start| {
        let mut seen = vec![false; k];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if p[i][j] > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|s| *s)
    })
}

/// Solves `π P = π`, `Σ π = 1`.
fn stationary_vector(p: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let k = p.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..k {
        m[(k - 1, j)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    rhs[k - 1] = 1.0;
    let pi = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ModelError::Chain("singular stationary system".into()))?;
    Ok(pi.iter().map(|x| x.max(0.0)).collect())
}

/// Generator state of `μ`, allowing atoms beyond the life length to be drawn later.
#[derive(Debug, Clone, PartialEq)]
pub enum MuCursor {
    /// `remaining` atoms left, all at time `at`.
    Finite { remaining: u64, at: f64 },
    Poisson { t: f64 },
    Renewal { t: f64, n: u64 },
    Switching { t: f64, block_end: f64, state: usize },
    Counterexample { tau_left: u64, next_int: u64 },
}

/// One individual: life length and offspring `P = μ|_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct LifeSample {
    pub v: f64,
    pub offspring: AtomicMeasure,
    pub mu_state: MuState,
}

/// Cursor of the `μ` generator plus the first atom already drawn beyond `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuState {
    cursor: MuCursor,
    pending: Option<f64>,
}

/// Validated spec with precomputed tables, shared by all replicas.
#[derive(Debug, Clone)]
pub struct LifeSampler {
    spec: CharacteristicSpec,
    chain: Option<Chain>,
}

impl LifeSampler {
    pub fn new(spec: CharacteristicSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let chain = match &spec.variant {
            Variant::SwitchingPoisson {
                intensities,
                transition,
                ..
            } => Some(Chain::new(intensities, transition)?),
            _ => None,
        };
        Ok(Self { spec, chain })
    }

    pub fn spec(&self) -> &CharacteristicSpec {
        &self.spec
    }

    #[inline]
    pub fn sample_v<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.spec.variant {
            Variant::GaltonWatson { .. } => 1.0,
            _ => self.spec.life.sample(rng),
        }
    }

    /// Fresh `μ` generator; `v` is only used by Bellman–Harris.
    pub fn cursor<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> MuCursor {
        match &self.spec.variant {
            Variant::GaltonWatson { offspring } => MuCursor::Finite {
                remaining: offspring.sample(rng),
                at: 1.0,
            },
            Variant::BellmanHarris { offspring } => MuCursor::Finite {
                remaining: offspring.sample(rng),
                at: v,
            },
            Variant::BinaryHomogeneous { .. } => MuCursor::Poisson { t: 0.0 },
            Variant::RenewalOffspring { .. } => MuCursor::Renewal { t: 0.0, n: 0 },
            Variant::SwitchingPoisson { block, .. } => {
                let chain = self.chain.as_ref().expect("chain prepared");
                MuCursor::Switching {
                    t: 0.0,
                    block_end: block.sample(rng),
                    state: chain.initial(rng),
                }
            }
            Variant::Counterexample { gamma_prime } => MuCursor::Counterexample {
                tau_left: self.sample_tau(*gamma_prime, rng),
                next_int: 1,
            },
        }
    }

    fn sample_tau<R: Rng + ?Sized>(&self, gamma_prime: f64, rng: &mut R) -> u64 {
        let x = (exp1(rng) / gamma_prime).exp();
        x.ceil().min(u64::MAX as f64 / 4.0) as u64
    }

    /// Next atom of `μ`, or `None` once `μ` is exhausted.
    #[inline]
    pub fn next_atom<R: Rng + ?Sized>(&self, cursor: &mut MuCursor, rng: &mut R) -> Option<f64> {
        match cursor {
            MuCursor::Finite { remaining, at } => {
                if *remaining == 0 {
                    None
                } else {
                    *remaining -= 1;
                    Some(*at)
                }
            }
            MuCursor::Poisson { t } => {
                let Variant::BinaryHomogeneous { rate } = self.spec.variant else {
                    unreachable!()
                };
                *t += exp1(rng) / rate;
                Some(*t)
            }
            MuCursor::Renewal { t, n } => {
                let Variant::RenewalOffspring { step } = &self.spec.variant else {
                    unreachable!()
                };
                *n += 1;
                *t = match *step {
                    StepLaw::Deterministic { value } => *n as f64 * value,
                    _ => *t + step.sample(rng),
                };
                Some(*t)
            }
            MuCursor::Switching {
                t,
                block_end,
                state,
            } => {
                let Variant::SwitchingPoisson { block, .. } = &self.spec.variant else {
                    unreachable!()
                };
                let chain = self.chain.as_ref().expect("chain prepared");
                loop {
                    let rate = chain.intensities[*state];
                    if rate > 0.0 {
                        let cand = *t + exp1(rng) / rate;
                        if cand <= *block_end {
                            *t = cand;
                            return Some(cand);
                        }
                    }
                    // Memoryless: restart from the block boundary.
                    *t = *block_end;
                    *state = chain.step(*state, rng);
                    *block_end += block.sample(rng);
                }
            }
            MuCursor::Counterexample { tau_left, next_int } => {
                if *tau_left > 0 {
                    *tau_left -= 1;
                    Some(0.5)
                } else {
                    let k = *next_int;
                    *next_int += 1;
                    Some(k as f64)
                }
            }
        }
    }

    /// Draws one individual into `atoms` (cleared first) and returns `V`.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, atoms: &mut Vec<f64>) -> f64 {
        atoms.clear();
        let v = self.sample_v(rng);
        if let Variant::BinaryHomogeneous { rate } = self.spec.variant {
            let mut t = exp1(rng) / rate;
            while t <= v {
                atoms.push(t);
                t += exp1(rng) / rate;
            }
            return v;
        }
        let mut cursor = self.cursor(v, rng);
        while let Some(a) = self.next_atom(&mut cursor, rng) {
            if a > v {
                break;
            }
            atoms.push(a);
        }
        v
    }

    pub fn sample_life<R: Rng + ?Sized>(&self, rng: &mut R) -> LifeSample {
        let v = self.sample_v(rng);
        let mut cursor = self.cursor(v, rng);
        let mut atoms = Vec::new();
        let mut pending = None;
        while let Some(a) = self.next_atom(&mut cursor, rng) {
            if a > v {
                pending = Some(a);
                break;
            }
            atoms.push(a);
        }
        LifeSample {
            v,
            offspring: AtomicMeasure::from_sorted_unchecked(atoms),
            mu_state: MuState { cursor, pending },
        }
    }

    /// `μ|_horizon` for an individual already drawn, extending past `V` if needed.
    pub fn extend_mu<R: Rng + ?Sized>(&self, life: &LifeSample, horizon: f64, rng: &mut R) -> AtomicMeasure {
        if horizon <= life.v {
            return life.offspring.restrict(horizon);
        }
        let mut atoms = life.offspring.atoms().to_vec();
        let mut cursor = life.mu_state.cursor.clone();
        let mut next = life.mu_state.pending;
        while let Some(a) = next {
            if a > horizon {
                break;
            }
            atoms.push(a);
            next = self.next_atom(&mut cursor, rng);
        }
        AtomicMeasure::from_sorted_unchecked(atoms)
    }

    /// `(V, μ(V))` without storing atoms.
    pub fn sample_count<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, u64) {
        let v = self.sample_v(rng);
        let n = match &self.spec.variant {
            Variant::GaltonWatson { offspring } | Variant::BellmanHarris { offspring } => offspring.sample(rng),
            Variant::BinaryHomogeneous { rate } => poisson(rate * v, rng),
            Variant::RenewalOffspring {
                step: StepLaw::Deterministic { value },
            } => (v / value).floor() as u64,
            Variant::Counterexample { gamma_prime } => {
                let tau = self.sample_tau(*gamma_prime, rng);
                v.floor() as u64 + if v >= 0.5 { tau } else { 0 }
            }
            _ => return (v, self.count_by_cursor(v, v, rng)),
        };
        (v, n)
    }

    fn count_by_cursor<R: Rng + ?Sized>(&self, v: f64, horizon: f64, rng: &mut R) -> u64 {
        let mut cursor = self.cursor(v, rng);
        let mut n = 0;
        while let Some(a) = self.next_atom(&mut cursor, rng) {
            if a > horizon {
                break;
            }
            n += 1;
        }
        n
    }

    /// `Σ_{k<p} μ_k(V_k)` over `p` iid individuals.
    pub fn sum_counts<R: Rng + ?Sized>(&self, p: u64, rng: &mut R) -> u64 {
        if let Variant::BinaryHomogeneous { rate } = self.spec.variant {
            let total_v: f64 = (0..p).map(|_| self.spec.life.sample(rng)).sum();
            return poisson(rate * total_v, rng);
        }
        (0..p).map(|_| self.sample_count(rng).1).sum()
    }

    /// `μ(t)` for a fixed `t`, independent of any life length.
    pub fn count_up_to_sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> u64 {
        match &self.spec.variant {
            Variant::GaltonWatson { offspring } => {
                let n = offspring.sample(rng);
                if t >= 1.0 {
                    n
                } else {
                    0
                }
            }
            Variant::BinaryHomogeneous { rate } => poisson(rate * t, rng),
            Variant::RenewalOffspring {
                step: StepLaw::Deterministic { value },
            } => (t / value + 1e-12).floor() as u64,
            Variant::Counterexample { gamma_prime } => {
                let tau = self.sample_tau(*gamma_prime, rng);
                t.floor() as u64 + if t >= 0.5 { tau } else { 0 }
            }
            _ => {
                let v = self.sample_v(rng);
                self.count_by_cursor(v, t, rng)
            }
        }
    }

    /// One draw of the location `A_μ(n)` of the `n`-th atom (`∞` if absent).
    pub fn atom_location_sample<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match &self.spec.variant {
            Variant::BinaryHomogeneous { rate } => gamma_sample(n as f64, 1.0 / rate, rng),
            Variant::RenewalOffspring { step } => step.sample_sum(n, rng).expect("closed form"),
            Variant::Counterexample { gamma_prime } => {
                let tau = self.sample_tau(*gamma_prime, rng);
                if n <= tau {
                    0.5
                } else {
                    (n - tau) as f64
                }
            }
            _ => {
                let v = self.sample_v(rng);
                let mut cursor = self.cursor(v, rng);
                let mut last = f64::INFINITY;
                for _ in 0..n {
                    match self.next_atom(&mut cursor, rng) {
                        Some(a) => last = a,
                        None => return f64::INFINITY,
                    }
                }
                last
            }
        }
    }

    /// Whether `μ(h) ≥ m`, stopping as soon as it is decided.
    fn count_reaches<R: Rng + ?Sized>(&self, m: u64, h: f64, rng: &mut R) -> bool {
        match &self.spec.variant {
            Variant::BinaryHomogeneous { .. } | Variant::RenewalOffspring { .. } | Variant::Counterexample { .. } => {
                self.atom_location_sample(m, rng) <= h
            }
            _ => {
                let v = self.sample_v(rng);
                let mut cursor = self.cursor(v, rng);
                let mut n = 0;
                while n < m {
                    match self.next_atom(&mut cursor, rng) {
                        Some(a) if a <= h => n += 1,
                        _ => return false,
                    }
                }
                true
            }
        }
    }
}

/// `v_p` solving `P(V ≥ 1/v_p) = 1/p`.
pub fn scaling_vp(spec: &CharacteristicSpec, p: u64) -> Result<f64, ModelError> {
    if p == 0 {
        return Err(ModelError::NoQuantile(p));
    }
    if let Variant::GaltonWatson { .. } = spec.variant {
        return Err(ModelError::NoQuantile(p));
    }
    let pf = p as f64;
    match spec.life {
        LifeLaw::Pareto { gamma, x0 } => Ok(pf.powf(-1.0 / gamma) / x0),
        LifeLaw::Exponential { mean } if p > 1 => Ok(1.0 / (mean * pf.ln())),
        _ => Err(ModelError::NoQuantile(p)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CalibrationMethod {
    Unchanged,
    ClosedForm,
    Series,
    Bisection { iterations: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub spec: CharacteristicSpec,
    pub method: CalibrationMethod,
    /// `E μ(V)` at the returned spec (exact, or the Monte Carlo objective).
    pub mean_offspring: f64,
    /// Standard error of `mean_offspring`; zero for exact methods.
    pub std_error: f64,
    pub n_used: u64,
}

impl Calibration {
    pub fn achieved(&self) -> f64 {
        (self.mean_offspring - 1.0).abs()
    }
}

/// Tunes the free scale so that `E μ(V) = 1`.
///
/// Closed forms are used for Bellman–Harris/Galton–Watson (checked only),
/// binary homogeneous (rate), exponential and deterministic renewals and the
/// counterexample; Gamma renewals with Pareto lives use an exact series in the
/// life scale; everything else runs a common-random-numbers bisection on the
/// life scale with `budget` sampled `μ` paths.
pub fn calibrate_criticality(
    spec: &CharacteristicSpec,
    tol: f64,
    budget: u64,
    seed: u64,
) -> Result<Calibration, ModelError> {
    spec.validate()?;
    let exact = |spec: CharacteristicSpec, method| {
        let m = spec.mean_offspring_exact().expect("closed form");
        Calibration {
            spec,
            method,
            mean_offspring: m,
            std_error: 0.0,
            n_used: 0,
        }
    };
    match (&spec.variant, &spec.life) {
        (Variant::GaltonWatson { offspring }, _) | (Variant::BellmanHarris { offspring }, _) => {
            let m = offspring.mean();
            if (m - 1.0).abs() <= tol {
                Ok(exact(spec.clone(), CalibrationMethod::Unchanged))
            } else {
                Err(ModelError::NoFreeParameter(m))
            }
        }
        (Variant::BinaryHomogeneous { .. }, life) => {
            let s = CharacteristicSpec {
                variant: Variant::BinaryHomogeneous { rate: 1.0 / life.mean() },
                life: life.clone(),
            };
            Ok(exact(s, CalibrationMethod::ClosedForm))
        }
        (Variant::RenewalOffspring { step }, life) => match (step, life) {
            (StepLaw::Exponential { mean }, life) => {
                // E μ(V) = E V / mean, and E V is linear in the scale.
                let s = spec.with_life_scale(mean * life.scale() / life.mean());
                Ok(exact(s, CalibrationMethod::ClosedForm))
            }
            (StepLaw::Deterministic { value }, LifeLaw::Pareto { gamma, .. }) => Ok(exact(
                spec.with_life_scale(value * zeta(*gamma).powf(-1.0 / gamma)),
                CalibrationMethod::ClosedForm,
            )),
            (StepLaw::Gamma { .. }, LifeLaw::Pareto { .. }) => {
                let f = |x0: f64| spec.with_life_scale(x0).mean_offspring_exact().expect("series");
                let (x0, _) = bisect_scale(f, spec.life.scale())?;
                Ok(exact(spec.with_life_scale(x0), CalibrationMethod::Series))
            }
            _ => calibrate_by_bisection(spec, tol, budget, seed),
        },
        (Variant::Counterexample { gamma_prime }, LifeLaw::Pareto { gamma, .. }) => {
            let c = zeta(*gamma) + 2f64.powf(*gamma) * (1.0 + zeta(*gamma_prime));
            Ok(exact(spec.with_life_scale(c.powf(-1.0 / gamma)), CalibrationMethod::ClosedForm))
        }
        _ => calibrate_by_bisection(spec, tol, budget, seed),
    }
}

/// Bisection of an increasing function of the scale for the level 1.
fn bisect_scale<F: Fn(f64) -> f64>(f: F, start: f64) -> Result<(f64, u32), ModelError> {
    let (mut lo, mut hi) = (start, start);
    let mut steps = 0;
    while f(lo) > 1.0 {
        lo /= 2.0;
        steps += 1;
        if steps > 200 {
            return Err(ModelError::NoBracket { lo: f(lo), hi: f(hi) });
        }
    }
    while f(hi) < 1.0 {
        hi *= 2.0;
        steps += 1;
        if steps > 200 {
            return Err(ModelError::NoBracket { lo: f(lo), hi: f(hi) });
        }
    }
    let mut iterations = 0;
    while (hi - lo) > 1e-14 * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok((0.5 * (lo + hi), iterations))
}

/// Common-random-numbers bisection on the life scale.
///
/// `budget` paths of `μ` are drawn once up to a horizon `h`; for a given
/// scale the objective is `E Σ_n P(V ≥ A(n))` (the conditional expectation of
/// `μ(V)` given `μ`), with the part beyond `h` replaced by `∫_h^∞ P(V ≥ t) dt / a`.
fn calibrate_by_bisection(
    spec: &CharacteristicSpec,
    tol: f64,
    budget: u64,
    seed: u64,
) -> Result<Calibration, ModelError> {
    let a = spec
        .drift_constant()
        .ok_or(ModelError::NoFreeParameter(f64::NAN))?;
    let sampler = spec.sampler()?;
    let horizon = 200.0 * a.max(spec.life.scale());
    let paths: Vec<Vec<f64>> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, tag("calibrate"), i);
            let mut cursor = sampler.cursor(f64::INFINITY, &mut rng);
            let mut atoms = Vec::new();
            while let Some(t) = sampler.next_atom(&mut cursor, &mut rng) {
                if t > horizon {
                    break;
                }
                atoms.push(t);
            }
            atoms
        })
        .collect();
    let per_path = |life: &LifeLaw, path: &[f64]| -> f64 {
        path.iter().map(|&t| life.tail(t)).sum::<f64>() + life.integrated_tail(horizon) / a
    };
    let objective = |s: f64| -> f64 {
        let life = spec.life.with_scale(s);
        paths.iter().map(|p| per_path(&life, p)).sum::<f64>() / budget as f64
    };
    let (s, iterations) = bisect_scale(objective, spec.life.scale())?;
    let life = spec.life.with_scale(s);
    let values: Vec<f64> = paths.iter().map(|p| per_path(&life, p)).collect();
    let (mean, se) = mean_se(&values);
    if (mean - 1.0).abs() > tol {
        return Err(ModelError::Tolerance((mean - 1.0).abs()));
    }
    Ok(Calibration {
        spec: spec.with_life_scale(s),
        method: CalibrationMethod::Bisection { iterations },
        mean_offspring: mean,
        std_error: se,
        n_used: budget,
    })
}

/// Monte Carlo `E μ(V)` with standard error.
pub fn estimate_mean_offspring(spec: &CharacteristicSpec, n: u64, seed: u64) -> Result<(f64, f64), ModelError> {
    let sampler = spec.sampler()?;
    let counts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, tag("mean-offspring"), i);
            sampler.sample_count(&mut rng).1 as f64
        })
        .collect();
    Ok(mean_se(&counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct R1Options {
    /// PASS threshold on `a·E|μ(t)/t − 1/a|` at the largest `t`.
    pub threshold: f64,
}

impl Default for R1Options {
    fn default() -> Self {
        Self { threshold: 0.05 }
    }
}

/// Estimates `E|μ(t)/t − 1/a|` along `t_grid`.
pub fn estimate_r1(
    spec: &CharacteristicSpec,
    t_grid: &[f64],
    n_samples: u64,
    opts: &R1Options,
    seed: u64,
) -> Result<TestReport, ModelError> {
    let sampler = spec.sampler()?;
    let a = spec
        .drift_constant()
        .ok_or_else(|| ModelError::Parameter("R1 needs an infinite birth process".into()))?;
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] <= 0.0 {
        return Err(ModelError::Parameter("t_grid must be positive and increasing".into()));
    }
    let mut report = TestReport::new("assumption_r1", seed);
    let mut stats = Vec::new();
    for (j, &t) in t_grid.iter().enumerate() {
        let devs: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, tag("r1") ^ j as u64, i);
                (sampler.count_up_to_sample(t, &mut rng) as f64 / t - 1.0 / a).abs()
            })
            .collect();
        let (m, se) = mean_se(&devs);
        stats.push((m, se));
        report
            .rows
            .push(ReportRow::new(format!("t={t}"), t, m, 0.0).ci(m - 2.0 * se, m + 2.0 * se));
    }
    let threshold = opts.threshold / a;
    let decreasing = stats
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + 3.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let (last, se) = *stats.last().unwrap();
    report.verdict = if !decreasing || last - 2.0 * se > threshold {
        Verdict::Fail
    } else if last + 2.0 * se <= threshold {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    if let Some(r) = report.rows.last_mut() {
        r.verdict = report.verdict;
    }
    report.target = Quantity::Value(0.0);
    report.estimate = Quantity::Value(last);
    report.uncertainty = se;
    report.n_used = n_samples * t_grid.len() as u64;
    report.notes.push(format!("a = {a}, threshold = {threshold}"));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct R2Options {
    /// PASS threshold on `p·P(v_p μ(x/v_p)/x ≥ 1/a')` at the largest `p`.
    pub threshold: f64,
    /// Confidence level of the Clopper–Pearson intervals is `1 − alpha`.
    pub alpha: f64,
}

impl Default for R2Options {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            alpha: 0.05,
        }
    }
}

/// Estimates `p·P(v_p μ(x/v_p)/x ≥ 1/a')` along `p_grid`.
pub fn estimate_r2(
    spec: &CharacteristicSpec,
    p_grid: &[u64],
    x: f64,
    a_prime: f64,
    n_samples: u64,
    opts: &R2Options,
    seed: u64,
) -> Result<TestReport, ModelError> {
    let sampler = spec.sampler()?;
    positive("x", x)?;
    positive("a'", a_prime)?;
    if let Some(a) = spec.drift_constant() {
        if a_prime >= a {
            return Err(ModelError::Parameter(format!("a' = {a_prime} must be below a = {a}")));
        }
    }
    let mut report = TestReport::new("assumption_r2", seed);
    let mut stats = Vec::new();
    for (j, &p) in p_grid.iter().enumerate() {
        if n_samples < 10 * p {
            report
                .warnings
                .push(format!("n_samples = {n_samples} < 10 p at p = {p}: O(1/p) probabilities unresolved"));
        }
        let vp = scaling_vp(spec, p)?;
        let h = x / vp;
        let m = (x / (a_prime * vp)).ceil().max(1.0) as u64;
        let hits: u64 = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, tag("r2") ^ j as u64, i);
                u64::from(sampler.count_reaches(m, h, &mut rng))
            })
            .sum();
        let pf = p as f64;
        let est = pf * hits as f64 / n_samples as f64;
        let (lo, hi) = clopper_pearson(hits, n_samples, opts.alpha);
        stats.push((est, pf * lo, pf * hi));
        report
            .rows
            .push(ReportRow::new(format!("p={p}"), pf, est, 0.0).ci(pf * lo, pf * hi));
    }
    let (last, lo, hi) = *stats.last().ok_or_else(|| ModelError::Parameter("empty p_grid".into()))?;
    let (first, _, first_hi) = stats[0];
    let rising = stats.len() > 1 && lo > first_hi && last > first;
    report.verdict = if lo > opts.threshold || rising {
        Verdict::Fail
    } else if hi <= opts.threshold {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    if let Some(r) = report.rows.last_mut() {
        r.verdict = report.verdict;
    }
    report.target = Quantity::Value(0.0);
    report.estimate = Quantity::Value(last);
    report.uncertainty = (hi - lo) / 2.0;
    report.n_used = n_samples * p_grid.len() as u64;
    report.notes.push(format!("x = {x}, a' = {a_prime}"));
    Ok(report)
}
