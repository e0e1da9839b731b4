//! The spread pricing series, and closed-form and stochastic oracles used to
//! validate it.
//!
//! With `d_j = ln(S₀,j/K)` the price is `K e^{-rT} E[H(X_T + d)]` for the
//! canonical payoff `H`. Sampling the damped transform at the lattice gives
//! `Ṽ = K e^{-rT-⟨d,ε⟩} P⁻ⁿ Σ_m Φ(u_m, T) e^{-2πi⟨m,d⟩/P} g(u_m)` with
//! `u_m = -2πm/P + iε`.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::complexmath::C64;
use crate::density::{
    build_density, eval_density_grid, frequency, magnitude_order, AutoGrid, CompensatedSum,
    DensityError, LatticeSpec, Truncation,
};
use crate::martingale::{enforce_emm, EmmPolicy, MartingaleError, RisklessRate};
use crate::models::{
    characteristic_function, BasketModel, LevyExponentSpec, ModelError, TimeHorizon,
};
use crate::payoff::{payoff_coefficient, payoff_l1_constant, DampingVector, PayoffError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("oracle not applicable: {0}")]
    UnsupportedOracle(String),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Martingale(#[from] MartingaleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Pays `(S₁,T - Σ_{j≥2} S_j,T - K)_+` at maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadContract {
    spot: Vec<f64>,
    strike: f64,
    maturity: TimeHorizon,
    rate: RisklessRate,
}

impl SpreadContract {
    pub fn new(
        spot: Vec<f64>,
        strike: f64,
        maturity: f64,
        rate: f64,
    ) -> Result<Self, PricingError> {
        if spot.is_empty() {
            return Err(PricingError::InvalidContract("spot vector is empty".into()));
        }
        if let Some((j, s)) = spot
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.is_finite() && **s > 0.0))
        {
            return Err(PricingError::InvalidContract(format!(
                "spot[{j}] = {s} must be positive"
            )));
        }
        if !(strike.is_finite() && strike >= 0.0) {
            return Err(PricingError::InvalidContract(format!(
                "strike must be non-negative, got {strike}"
            )));
        }
        let maturity =
            TimeHorizon::new(maturity).map_err(|e| PricingError::InvalidContract(e.to_string()))?;
        let rate =
            RisklessRate::new(rate).map_err(|e| PricingError::InvalidContract(e.to_string()))?;
        Ok(Self {
            spot,
            strike,
            maturity,
            rate,
        })
    }

    pub fn spot(&self) -> &[f64] {
        &self.spot
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> TimeHorizon {
        self.maturity
    }

    pub fn rate(&self) -> RisklessRate {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.spot.len()
    }

    /// `d_j = ln(S₀,j/K)`.
    pub fn log_moneyness(&self) -> Result<Vec<f64>, PricingError> {
        if !(self.strike > 0.0) {
            return Err(PricingError::InvalidContract(
                "the Fourier series needs a positive strike".into(),
            ));
        }
        Ok(self.spot.iter().map(|s| (s / self.strike).ln()).collect())
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self, PricingError> {
        Self::new(
            self.spot.clone(),
            strike,
            self.maturity.years(),
            self.rate.value(),
        )
    }

    pub fn with_spot(&self, spot: Vec<f64>) -> Result<Self, PricingError> {
        Self::new(spot, self.strike, self.maturity.years(), self.rate.value())
    }

    fn discounted_payoff(&self, terminal: &[f64]) -> f64 {
        let rest: f64 = terminal[1..].iter().sum();
        (-self.rate.value() * self.maturity.years()).exp()
            * (terminal[0] - rest - self.strike).max(0.0)
    }
}

/// Diagnostic error terms; not certified bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundComponents {
    /// Payoff mass outside the box `(P/2 - ‖d‖∞)Qₙ`.
    pub tail_bound: f64,
    /// Aliasing plus lattice-truncation estimate.
    pub trunc_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub value: f64,
    pub imag_residue: f64,
    pub lattice_size: usize,
    pub bounds: BoundComponents,
    pub eps: Vec<f64>,
    pub period: f64,
    pub ln_r: Option<f64>,
}

/// How the pricing lattice is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum GridChoice {
    Auto(AutoGrid),
    Fixed(LatticeSpec),
}

/// Options shared by pricing runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingOptions {
    pub grid: GridChoice,
    pub eps: Option<DampingVector>,
    pub policy: EmmPolicy,
    /// Per-axis decay-constant overrides for the auto grid.
    pub decay_overrides: Vec<Option<f64>>,
    /// Lattice size limit for the auto grid.
    pub lattice_cap: Option<usize>,
}

impl Default for PricingOptions {
    fn default() -> Self {
        Self {
            grid: GridChoice::Auto(AutoGrid::default()),
            eps: None,
            policy: EmmPolicy::AutoAdjust,
            decay_overrides: Vec::new(),
            lattice_cap: None,
        }
    }
}

/// Spatial decay rate of the damped, shifted integrand: governs aliasing.
pub fn damped_decay_rate(model: &BasketModel, eps: &DampingVector) -> f64 {
    let e = eps.as_slice();
    let rest: f64 = e[1..].iter().sum();
    let mut rate = -1.0 - e[0] - rest;
    for &v in &e[1..] {
        rate = rate.min(v);
    }
    for (s, &v) in e.iter().enumerate() {
        rate = rate
            .min(v - model.strip_lower()[s])
            .min(model.strip_upper()[s] - v);
    }
    rate
}

const MIN_DECAY_RATE: f64 = 1e-2;

/// Resolve the damping vector, enforce the martingale condition and pick
/// the lattice.
pub fn prepare(
    contract: &SpreadContract,
    model: &BasketModel,
    options: &PricingOptions,
) -> Result<(BasketModel, DampingVector, LatticeSpec), PricingError> {
    let n = model.dim();
    if contract.dim() != n {
        return Err(PricingError::InvalidInput(format!(
            "contract has {} legs, model has {n}",
            contract.dim()
        )));
    }
    // Damping feasibility does not depend on drifts, so report it first.
    let eps = match &options.eps {
        Some(e) => {
            e.check_model(model)?;
            e.clone()
        }
        None => DampingVector::default_for(model)?,
    };
    let t = contract.maturity();
    let (model, _) = enforce_emm(model, &vec![contract.rate(); n], t, options.policy)?;
    let spec = match &options.grid {
        GridChoice::Fixed(spec) => spec.clone(),
        GridChoice::Auto(auto) => {
            let d = contract.log_moneyness()?;
            let offset = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut rate = damped_decay_rate(&model, &eps);
            if rate < MIN_DECAY_RATE {
                log::warn!("damping vector sits at a strip edge; tail decay rate clamped to {MIN_DECAY_RATE}");
                rate = MIN_DECAY_RATE;
            }
            let spec = auto.pick(&model, t, &options.decay_overrides, rate, offset)?;
            match options.lattice_cap {
                Some(cap) => spec.with_cap(cap),
                None => spec,
            }
        }
    };
    Ok((model, eps, spec))
}

/// Price with automatic or fixed grid, per `options`.
pub fn price(
    contract: &SpreadContract,
    model: &BasketModel,
    options: &PricingOptions,
) -> Result<PricingResult, PricingError> {
    let (model, eps, spec) = prepare(contract, model, options)?;
    price_spread(contract, &model, &spec, Some(&eps), EmmPolicy::Strict)
}

/// Evaluate the pricing series on the lattice of `spec`.
pub fn price_spread(
    contract: &SpreadContract,
    model: &BasketModel,
    spec: &LatticeSpec,
    eps: Option<&DampingVector>,
    policy: EmmPolicy,
) -> Result<PricingResult, PricingError> {
    let n = model.dim();
    if contract.dim() != n || spec.dim() != n {
        return Err(PricingError::InvalidInput(format!(
            "dimension mismatch: contract {}, model {n}, lattice {}",
            contract.dim(),
            spec.dim()
        )));
    }
    let eps = match eps {
        Some(e) => {
            e.check_model(model)?;
            e.clone()
        }
        None => DampingVector::default_for(model)?,
    };
    let t = contract.maturity();
    let (model, _) = enforce_emm(model, &vec![contract.rate(); n], t, policy)?;
    if (spec.horizon().years() - t.years()).abs() > 1e-12 * t.years() {
        return Err(PricingError::InvalidInput(format!(
            "lattice maturity {} differs from contract maturity {}",
            spec.horizon().years(),
            t.years()
        )));
    }
    let d = contract.log_moneyness()?;
    let period = spec.period();
    let lattice = crate::density::cross_lattice(spec)?;
    let e = eps.as_slice();

    let terms = lattice
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|m| -> Result<C64, PricingError> {
            let z = frequency(m, period, Some(e));
            let phi = characteristic_function(&z, t, &model)?;
            let g = payoff_coefficient(m, &eps, period)?;
            let phase: f64 = m
                .iter()
                .zip(&d)
                .map(|(&ms, &dj)| ms as f64 * dj)
                .sum::<f64>()
                * (-2.0 * PI / period);
            Ok(phi * g * C64::from_polar(1.0, phase))
        })
        .collect::<Result<Vec<C64>, PricingError>>()?;
    let mut acc = CompensatedSum::default();
    for k in magnitude_order(&terms) {
        acc.add(terms[k]);
    }
    let r = contract.rate().value();
    let k = contract.strike();
    let ed: f64 = d.iter().zip(e).map(|(a, b)| a * b).sum();
    let scale = k * (-r * t.years() - ed).exp() / period.powi(n as i32);
    let sum = acc.total() * scale;

    let bounds = diagnostic_bounds(contract, &model, &eps, spec, &d)?;
    Ok(PricingResult {
        value: sum.re,
        imag_residue: sum.im.abs(),
        lattice_size: lattice.len(),
        bounds,
        eps: e.to_vec(),
        period,
        ln_r: spec.ln_r(),
    })
}

fn diagnostic_bounds(
    contract: &SpreadContract,
    model: &BasketModel,
    eps: &DampingVector,
    spec: &LatticeSpec,
    d: &[f64],
) -> Result<BoundComponents, PricingError> {
    let e = eps.as_slice();
    let front = contract.strike() * (-contract.rate().value() * contract.maturity().years()).exp();
    let l1 = payoff_l1_constant(eps)?;
    let period = spec.period();
    let rate = damped_decay_rate(model, eps).max(MIN_DECAY_RATE);
    let lattice_term = match spec.truncation() {
        Truncation::HyperbolicCross { ln_r, axes } if *ln_r > 0.0 => {
            let inv_sum: f64 = axes.iter().map(|a| 1.0 / a.order).sum();
            ln_r.powf(inv_sum - 1.0) * (-ln_r).exp()
        }
        _ => 0.0,
    };
    let trunc_bound = front * l1 * ((-period * rate).exp() + lattice_term);
    let d_max = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let total: f64 = e.iter().sum();
    let worst = e[1..].iter().fold(1.0 + total, |a, v| a.max(-v));
    let tail_bound = front * ((0.5 * period - d_max) * worst).exp();
    Ok(BoundComponents {
        tail_bound,
        trunc_bound,
    })
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Black–Scholes call price.
pub fn black_scholes_call(
    s0: f64,
    strike: f64,
    t: f64,
    r: f64,
    sigma: f64,
) -> Result<f64, PricingError> {
    if !(sigma > 0.0) || !(t > 0.0) {
        return Err(PricingError::InvalidInput(format!(
            "Black-Scholes needs sigma > 0 and T > 0 (sigma={sigma}, T={t})"
        )));
    }
    if !(s0 > 0.0 && strike > 0.0) {
        return Err(PricingError::InvalidInput(
            "spot and strike must be positive".into(),
        ));
    }
    let vol = sigma * t.sqrt();
    let b1 = ((s0 / strike).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
    let b2 = b1 - vol;
    Ok(s0 * normal_cdf(b1) - strike * (-r * t).exp() * normal_cdf(b2))
}

/// Margrabe price of exchanging asset 2 for asset 1, with dividend yields.
pub fn margrabe_exchange(
    s01: f64,
    s02: f64,
    t: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    q1: f64,
    q2: f64,
) -> Result<f64, PricingError> {
    if !(t > 0.0) || !(s01 > 0.0) || !(s02 >= 0.0) || !(-1.0..=1.0).contains(&rho) {
        return Err(PricingError::InvalidInput(format!(
            "Margrabe inputs out of range (S1={s01}, S2={s02}, T={t}, rho={rho})"
        )));
    }
    let a = s01 * (-q1 * t).exp();
    let b = s02 * (-q2 * t).exp();
    if s02 == 0.0 {
        return Ok(a);
    }
    let sigma = (sigma1 * sigma1 + sigma2 * sigma2 - 2.0 * rho * sigma1 * sigma2)
        .max(0.0)
        .sqrt();
    let vol = sigma * t.sqrt();
    if vol == 0.0 {
        return Ok((a - b).max(0.0));
    }
    let d1 = ((s01 / s02).ln() + (q2 - q1 + 0.5 * sigma * sigma) * t) / vol;
    let d2 = d1 - vol;
    Ok(a * normal_cdf(d1) - b * normal_cdf(d2))
}

/// Correlated geometric Brownian motion under the pricing measure:
/// `ln S_j,T = ln S_j,0 + (r - σ_j²/2)T + √T (L Z)_j`, `L Lᵀ = Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmParams {
    covariance: Vec<Vec<f64>>,
    factor: Vec<Vec<f64>>,
}

impl GbmParams {
    /// Annualised covariance matrix (positive semidefinite).
    pub fn from_covariance(covariance: Vec<Vec<f64>>) -> Result<Self, PricingError> {
        let n = covariance.len();
        if n == 0 || covariance.iter().any(|row| row.len() != n) {
            return Err(PricingError::InvalidInput(
                "covariance must be a non-empty square matrix".into(),
            ));
        }
        let factor = cholesky_psd(&covariance)?;
        Ok(Self { covariance, factor })
    }

    pub fn from_vols(sigma: &[f64], corr: &[Vec<f64>]) -> Result<Self, PricingError> {
        let n = sigma.len();
        if corr.len() != n || corr.iter().any(|r| r.len() != n) {
            return Err(PricingError::InvalidInput(
                "correlation matrix shape mismatch".into(),
            ));
        }
        let cov = (0..n)
            .map(|i| (0..n).map(|j| corr[i][j] * sigma[i] * sigma[j]).collect())
            .collect();
        Self::from_covariance(cov)
    }

    /// Covariance implied by an all-Gaussian basket.
    pub fn from_model(model: &BasketModel) -> Result<Self, PricingError> {
        let sigma_of = |s: &LevyExponentSpec| match *s {
            LevyExponentSpec::Gaussian { sigma, .. } => Ok(sigma),
            other => Err(PricingError::UnsupportedOracle(format!(
                "Monte Carlo oracle needs Gaussian components, found {}",
                other.kind_name()
            ))),
        };
        let diag: Vec<f64> = model
            .diag()
            .iter()
            .map(sigma_of)
            .collect::<Result<_, _>>()?;
        let coupling: Vec<f64> = model
            .coupling()
            .iter()
            .map(sigma_of)
            .collect::<Result<_, _>>()?;
        let b = model.loadings();
        let n = model.dim();
        let cov = (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| {
                        let common: f64 = coupling
                            .iter()
                            .enumerate()
                            .map(|(m, s)| b[k][m] * b[l][m] * s * s)
                            .sum();
                        common + if k == l { diag[k] * diag[k] } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        Self::from_covariance(cov)
    }

    pub fn dim(&self) -> usize {
        self.covariance.len()
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }
}

fn cholesky_psd(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, PricingError> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    let scale = (0..n)
        .fold(0.0f64, |m, i| m.max(a[i][i].abs()))
        .max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= l[j][k] * l[j][k];
        }
        if diag < -1e-12 * scale {
            return Err(PricingError::InvalidInput(
                "covariance is not positive semidefinite".into(),
            ));
        }
        if diag <= 1e-14 * scale {
            continue;
        }
        let pivot = diag.sqrt();
        l[j][j] = pivot;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = v / pivot;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Discounted payoff mean over `paths` samples, accumulated serially so a
/// seed reproduces the estimate bit for bit.
pub fn monte_carlo_oracle(
    contract: &SpreadContract,
    gbm: &GbmParams,
    paths: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, PricingError> {
    let n = contract.dim();
    if gbm.dim() != n {
        return Err(PricingError::InvalidInput(format!(
            "GBM has {} assets, contract {n}",
            gbm.dim()
        )));
    }
    if paths < 2 {
        return Err(PricingError::InvalidInput("need at least two paths".into()));
    }
    let t = contract.maturity().years();
    let r = contract.rate().value();
    let sqrt_t = t.sqrt();
    let drift: Vec<f64> = (0..n)
        .map(|j| contract.spot()[j].ln() + (r - 0.5 * gbm.covariance[j][j]) * t)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; n];
    let mut terminal = vec![0.0; n];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for p in 0..paths {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for j in 0..n {
            let shock: f64 = (0..=j).map(|k| gbm.factor[j][k] * z[k]).sum();
            terminal[j] = (drift[j] + sqrt_t * shock).exp();
        }
        let x = contract.discounted_payoff(&terminal);
        let delta = x - mean;
        mean += delta / (p + 1) as f64;
        m2 += delta * (x - mean);
    }
    let variance = m2 / (paths - 1) as f64;
    Ok(MonteCarloEstimate {
        mean,
        std_error: (variance / paths as f64).sqrt(),
    })
}

/// Points per axis of the quadrature oracle.
pub const QUADRATURE_POINTS_1D: usize = 8192;
pub const QUADRATURE_POINTS_2D: usize = 1024;

/// `e^{-rT} ∫ H p dx` by the periodic rectangle rule over `(P/2)Qₙ`, with
/// the density recovered from the unshifted series on `spec`.
pub fn quadrature_price_oracle(
    contract: &SpreadContract,
    model: &BasketModel,
    spec: &LatticeSpec,
) -> Result<f64, PricingError> {
    let n = model.dim();
    let points = match n {
        1 => QUADRATURE_POINTS_1D,
        2 => QUADRATURE_POINTS_2D,
        _ => {
            return Err(PricingError::UnsupportedOracle(format!(
                "quadrature oracle supports at most two legs, got {n}"
            )))
        }
    };
    if contract.dim() != n {
        return Err(PricingError::InvalidInput(
            "contract and model dimensions differ".into(),
        ));
    }
    let (model, _) = enforce_emm(
        model,
        &vec![contract.rate(); n],
        contract.maturity(),
        EmmPolicy::AutoAdjust,
    )?;
    let approx = build_density(&model, spec, None)?;
    let period = spec.period();
    let h = period / points as f64;
    let axis: Vec<f64> = (0..points).map(|k| -0.5 * period + k as f64 * h).collect();
    let axes = vec![axis; n];
    let values = eval_density_grid(&approx, &axes)?;
    let spot = contract.spot();
    let payoff = |x: &[f64]| -> f64 {
        let rest: f64 = x[1..]
            .iter()
            .zip(&spot[1..])
            .map(|(xj, s)| s * xj.exp())
            .sum();
        (spot[0] * x[0].exp() - rest - contract.strike()).max(0.0)
    };
    let mut acc = 0.0;
    let mut comp = 0.0;
    for (idx, v) in values.iter().enumerate() {
        let x: Vec<f64> = match n {
            1 => vec![axes[0][idx]],
            _ => vec![axes[0][idx / points], axes[1][idx % points]],
        };
        neumaier_real(&mut acc, &mut comp, payoff(&x) * v.value);
    }
    let integral = (acc + comp) * h.powi(n as i32);
    Ok((-contract.rate().value() * contract.maturity().years()).exp() * integral)
}

fn neumaier_real(sum: &mut f64, carry: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *carry += (*sum - t) + x;
    } else {
        *carry += (x - t) + *sum;
    }
    *sum = t;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_scholes_reference() {
        // mpmath, 40 digits
        let v = black_scholes_call(100.0, 100.0, 1.0, 0.05, 0.2).unwrap();
        assert!((v - 10.450_583_572_185_567).abs() < 1e-12);
    }

    #[test]
    fn black_scholes_limits() {
        let v = black_scholes_call(100.0, 1e-12, 1.0, 0.05, 0.2).unwrap();
        assert!((v - 100.0).abs() < 1e-9);
        let v = black_scholes_call(100.0, 90.0, 1.0, 0.05, 1e-9).unwrap();
        assert!((v - (100.0 - 90.0 * (-0.05f64).exp())).abs() < 1e-9);
        assert!(black_scholes_call(100.0, 90.0, 1.0, 0.05, 0.0).is_err());
    }

    #[test]
    fn margrabe_limits() {
        let v = margrabe_exchange(100.0, 0.0, 1.0, 0.3, 0.2, 0.4, 0.01, 0.0).unwrap();
        assert!((v - 100.0 * (-0.01f64).exp()).abs() < 1e-12);
        let v = margrabe_exchange(100.0, 95.0, 1.0, 0.25, 0.25, 1.0, 0.0, 0.0).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vol_monte_carlo_is_deterministic() {
        let contract = SpreadContract::new(vec![110.0, 10.0], 90.0, 0.5, 0.05).unwrap();
        let gbm = GbmParams::from_covariance(vec![vec![0.0; 2]; 2]).unwrap();
        let est = monte_carlo_oracle(&contract, &gbm, 1000, 7).unwrap();
        let growth = (0.05f64 * 0.5).exp();
        let want = (-0.025f64).exp() * (110.0 * growth - 10.0 * growth - 90.0);
        assert!((est.mean - want).abs() < 1e-10);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn monte_carlo_seed_reproducible() {
        let contract = SpreadContract::new(vec![110.0, 10.0], 90.0, 0.5, 0.05).unwrap();
        let gbm = GbmParams::from_vols(&[0.2, 0.2], &[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let a = monte_carlo_oracle(&contract, &gbm, 10_000, 42).unwrap();
        let b = monte_carlo_oracle(&contract, &gbm, 10_000, 42).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_oracle(&contract, &gbm, 10_000, 43).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn gbm_rejects_non_gaussian() {
        let k = LevyExponentSpec::KoBoL {
            mu: 0.0,
            c_plus: 1.0,
            c_minus: 1.0,
            lambda_minus: -5.0,
            lambda_plus: 5.0,
            nu: 0.3,
        };
        let model = BasketModel::independent(vec![k]).unwrap();
        assert!(matches!(
            GbmParams::from_model(&model),
            Err(PricingError::UnsupportedOracle(_))
        ));
    }

    #[test]
    fn one_leg_fourier_matches_black_scholes() {
        let model = BasketModel::independent(vec![LevyExponentSpec::Gaussian {
            mu: 0.0,
            sigma: 0.2,
        }])
        .unwrap();
        let contract = SpreadContract::new(vec![100.0], 100.0, 1.0, 0.05).unwrap();
        let res = price(&contract, &model, &PricingOptions::default()).unwrap();
        let bs = black_scholes_call(100.0, 100.0, 1.0, 0.05, 0.2).unwrap();
        assert!((res.value - bs).abs() < 1e-6 * bs, "{} vs {bs}", res.value);
        assert!(res.imag_residue < 1e-8);
    }
}
