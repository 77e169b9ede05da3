//! (μ/μ_w, λ)-CMA-ES with cumulative step-size adaptation and rank-one plus
//! rank-μ covariance updates. Minimizes.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmaesError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("initial step size {0} must be positive and finite")]
    InvalidSigma(f64),
    #[error("budget must allow at least one generation")]
    EmptyBudget,
    #[error("population size {0} must be at least 2")]
    InvalidPopulation(usize),
}

/// Default population size `4 + ⌊3 ln d⌋`.
pub fn default_population(dimension: usize) -> usize {
    4 + (3.0 * (dimension as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesConfig {
    pub population: Option<usize>,
    pub max_generations: usize,
    pub max_evaluations: usize,
    /// Stop once the best value drops to this level.
    pub target: Option<f64>,
    /// Stop once `σ · max √C_ii` falls below this.
    pub tol_x: f64,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        CmaesConfig {
            population: None,
            max_generations: 300,
            max_evaluations: 30_000,
            target: None,
            tol_x: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxGenerations,
    MaxEvaluations,
    TargetReached,
    TolX,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub evaluations: usize,
    pub best_so_far: f64,
    pub generation_best: f64,
    pub sigma: f64,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaesResult {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub history: Vec<GenerationRecord>,
    pub stop: StopReason,
}

struct Params {
    lambda: usize,
    mu: usize,
    weights: DVector<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Params {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights = DVector::from_iterator(mu, raw.iter().map(|w| w / sum));
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Params {
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

pub fn cma_es_minimize<F>(
    objective: F,
    init_mean: &[f64],
    init_sigma: f64,
    config: &CmaesConfig,
    seed: u64,
) -> Result<CmaesResult, CmaesError>
where
    F: FnMut(&[f64]) -> f64,
{
    cma_es_minimize_observed(objective, init_mean, init_sigma, config, seed, |_| {})
}

/// As [`cma_es_minimize`], calling `observer` after every generation.
pub fn cma_es_minimize_observed<F, O>(
    mut objective: F,
    init_mean: &[f64],
    init_sigma: f64,
    config: &CmaesConfig,
    seed: u64,
    mut observer: O,
) -> Result<CmaesResult, CmaesError>
where
    F: FnMut(&[f64]) -> f64,
    O: FnMut(&GenerationRecord),
{
    let n = init_mean.len();
    if n == 0 {
        return Err(CmaesError::ZeroDimension);
    }
    if !(init_sigma > 0.0 && init_sigma.is_finite()) {
        return Err(CmaesError::InvalidSigma(init_sigma));
    }
    if config.max_generations == 0 || config.max_evaluations == 0 {
        return Err(CmaesError::EmptyBudget);
    }
    let lambda = config.population.unwrap_or_else(|| default_population(n));
    if lambda < 2 {
        return Err(CmaesError::InvalidPopulation(lambda));
    }
    let p = Params::new(n, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut mean = DVector::from_column_slice(init_mean);
    let mut sigma = init_sigma;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);

    let mut best_x = init_mean.to_vec();
    let mut best_value = f64::INFINITY;
    let mut evaluations = 0;
    let mut history = Vec::new();
    let mut stop = StopReason::MaxGenerations;

    for generation in 0..config.max_generations {
        let mut ys = Vec::with_capacity(p.lambda);
        let mut scored = Vec::with_capacity(p.lambda);
        for k in 0..p.lambda {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let y = &basis * z.component_mul(&scales);
            let x = &mean + &y * sigma;
            let mut value = objective(x.as_slice());
            if !value.is_finite() {
                log::warn!("non-finite objective value at generation {generation}; treated as worst");
                value = f64::INFINITY;
            }
            evaluations += 1;
            if value < best_value {
                best_value = value;
                best_x = x.as_slice().to_vec();
            }
            ys.push(y);
            scored.push((value, k));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut y_w = DVector::<f64>::zeros(n);
        for (i, &(_, k)) in scored.iter().take(p.mu).enumerate() {
            y_w += &ys[k] * p.weights[i];
        }
        mean += &y_w * sigma;

        // C^{-1/2} y_w = B D^{-1} Bᵀ y_w
        let inv_sqrt = &basis * (basis.transpose() * &y_w).component_div(&scales);
        p_sigma = &p_sigma * (1.0 - p.c_sigma)
            + inv_sqrt * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm
            / (1.0 - (1.0 - p.c_sigma).powi(2 * (generation as i32 + 1))).sqrt()
            < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        p_c = &p_c * (1.0 - p.c_c) + &y_w * (h * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt());

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (i, &(_, k)) in scored.iter().take(p.mu).enumerate() {
            rank_mu += &ys[k] * ys[k].transpose() * p.weights[i];
        }
        let delta_h = (1.0 - h) * p.c_c * (2.0 - p.c_c);
        cov = &cov * (1.0 - p.c_1 - p.c_mu)
            + (&p_c * p_c.transpose() + &cov * delta_h) * p.c_1
            + rank_mu * p.c_mu;
        cov = (&cov + cov.transpose()) * 0.5;

        sigma *= ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();

        let eig = SymmetricEigen::new(cov.clone());
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|e| e.max(1e-300).sqrt());

        let record = GenerationRecord {
            generation,
            evaluations,
            best_so_far: best_value,
            generation_best: scored[0].0,
            sigma,
            mean: mean.as_slice().to_vec(),
        };
        observer(&record);
        history.push(record);

        if let Some(target) = config.target {
            if best_value <= target {
                stop = StopReason::TargetReached;
                break;
            }
        }
        if !sigma.is_finite() || scales.iter().any(|s| !s.is_finite()) {
            stop = StopReason::Degenerate;
            break;
        }
        if sigma * scales.max() < config.tol_x {
            stop = StopReason::TolX;
            break;
        }
        if evaluations + p.lambda > config.max_evaluations {
            stop = StopReason::MaxEvaluations;
            break;
        }
    }

    Ok(CmaesResult {
        best_x,
        best_value,
        evaluations,
        history,
        stop,
    })
}
