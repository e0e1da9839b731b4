//! Fourier transform of the canonical spread payoff
//! `H(y) = (e^{y₁} - Σ_{j≥2} e^{y_j} - 1)_+` on a shifted contour.
//!
//! `g(u) = ∫ e^{-i⟨u,y⟩} H(y) dy = Γ(iΣu - 1) Π_{j≥2} Γ(-iu_j) / Γ(iu₁ + 1)`
//! for `Im u₁ < -1 - Σ_{j≥2} Im u_j` and `Im u_j > 0`. With one leg the
//! product is empty and `g(u) = 1/((iu)(iu - 1))`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::complexmath::{exp_checked, log_gamma, MathError, C64, I};
use crate::models::BasketModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayoffError {
    #[error("invalid damping vector: {0}")]
    InvalidDamping(String),
    #[error("{0}")]
    Adaptedness(String),
    #[error("gamma argument {arg} is within 1e-12 of a pole")]
    Pole { arg: C64 },
    #[error(transparent)]
    Math(#[from] MathError),
}

/// Contour shift `ε`: `ε_j > 0` for `j ≥ 2`, `ε₁ < -1 - Σ_{j≥2} ε_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingVector(Vec<f64>);

impl DampingVector {
    pub fn new(eps: Vec<f64>) -> Result<Self, PayoffError> {
        if eps.is_empty() {
            return Err(PayoffError::InvalidDamping(
                "damping vector is empty".into(),
            ));
        }
        if eps.iter().any(|v| !v.is_finite()) {
            return Err(PayoffError::InvalidDamping(format!(
                "entries must be finite: {eps:?}"
            )));
        }
        let rest: f64 = eps[1..].iter().sum();
        if let Some(j) = eps[1..].iter().position(|&v| v <= 0.0) {
            return Err(PayoffError::InvalidDamping(format!(
                "eps[{}] = {} must be positive",
                j + 1,
                eps[j + 1]
            )));
        }
        if !(eps[0] < -1.0 - rest) {
            return Err(PayoffError::InvalidDamping(format!(
                "eps[0] = {} must be below -1 - (sum of the other entries) = {}",
                eps[0],
                -1.0 - rest
            )));
        }
        Ok(Self(eps))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Check the shift against the model's contour strips.
    pub fn check_model(&self, model: &BasketModel) -> Result<(), PayoffError> {
        let n = model.dim();
        if self.dim() != n {
            return Err(PayoffError::InvalidDamping(format!(
                "damping vector has {} entries for {n} legs",
                self.dim()
            )));
        }
        let lower = model.strip_lower();
        let upper = model.strip_upper();
        if self.0[0] < lower[0] {
            return Err(adaptedness(lower[0], Some(self.0[0])));
        }
        for j in 1..n {
            if self.0[j] > upper[j] {
                return Err(PayoffError::InvalidDamping(format!(
                    "eps[{j}] = {} exceeds the strip upper edge {}",
                    self.0[j], upper[j]
                )));
            }
        }
        Ok(())
    }

    /// Default shift for a model: `ε_j = min(0.75, 0.9 b₊,j)` and
    /// `ε₁ = max(0.9 b₋,1, -2 - Σε_j)`, tightened when that misses the
    /// constraint.
    pub fn default_for(model: &BasketModel) -> Result<Self, PayoffError> {
        let lower = model.strip_lower();
        let upper = model.strip_upper();
        let n = model.dim();
        if !(lower[0] < -1.0) {
            return Err(adaptedness(lower[0], None));
        }
        let mut eps = vec![0.0; n];
        for j in 1..n {
            eps[j] = (0.75f64).min(0.9 * upper[j]);
        }
        let rest: f64 = eps[1..].iter().sum();
        eps[0] = (0.9 * lower[0]).max(-2.0 - rest);
        if !(eps[0] < -1.0 - rest) {
            // Narrow leg-one strip: shrink the other shifts and split the gap.
            let room = -1.0 - lower[0];
            for v in eps.iter_mut().skip(1) {
                *v = v.min(0.25 * room / (n - 1) as f64);
            }
            let rest: f64 = eps[1..].iter().sum();
            eps[0] = 0.5 * (lower[0] + (-1.0 - rest));
        }
        let d = Self::new(eps)?;
        d.check_model(model)?;
        Ok(d)
    }
}

fn adaptedness(lower: f64, eps1: Option<f64>) -> PayoffError {
    let detail = match eps1 {
        Some(e) => format!("eps[0] = {e} lies below the strip edge b- = {lower}"),
        None => format!("the strip edge b- = {lower} of leg 1 is not below -1"),
    };
    PayoffError::Adaptedness(format!(
        "adaptedness violated: {detail}; damping the e^(x1) growth of the payoff needs an exponential tail \
         steepness above 1 on leg 1 (the lambda_+ > 1 requirement on the right tail; in this \
         parametrisation |lambda_minus| of leg 1 and of every coupling factor loading it must exceed 1)"
    ))
}

const POLE_DISTANCE: f64 = 1e-12;

fn checked_log_gamma(arg: C64) -> Result<C64, PayoffError> {
    let nearest = arg.re.round();
    if nearest <= 0.0 && (arg - nearest).norm() < POLE_DISTANCE {
        return Err(PayoffError::Pole { arg });
    }
    Ok(log_gamma(arg)?)
}

/// The gamma-ratio transform, evaluated as one exponential of a log-gamma
/// combination.
pub fn hurd_zhou_g(u: &[C64]) -> Result<C64, PayoffError> {
    if u.is_empty() {
        return Err(PayoffError::InvalidDamping("empty argument".into()));
    }
    let total: C64 = u.iter().sum();
    let mut log_g = checked_log_gamma(I * total - 1.0)? - checked_log_gamma(I * u[0] + 1.0)?;
    for &uj in &u[1..] {
        log_g += checked_log_gamma(-I * uj)?;
    }
    Ok(exp_checked(log_g)?)
}

/// `g(-2πm/P + iε)`, the payoff factor of the pricing series at `m`.
pub fn payoff_coefficient(m: &[i64], eps: &DampingVector, period: f64) -> Result<C64, PayoffError> {
    if m.len() != eps.dim() {
        return Err(PayoffError::InvalidDamping(format!(
            "lattice point has {} entries, damping vector {}",
            m.len(),
            eps.dim()
        )));
    }
    let u: Vec<C64> = m
        .iter()
        .zip(eps.as_slice())
        .map(|(&ms, &e)| C64::new(-2.0 * PI * ms as f64 / period, e))
        .collect();
    hurd_zhou_g(&u)
}

/// `L_ε = ‖H e^{⟨·,ε⟩}‖₁ = Γ(-Σε - 1) Π_{j≥2} Γ(ε_j) / Γ(1 - ε₁)`.
pub fn payoff_l1_constant(eps: &DampingVector) -> Result<f64, PayoffError> {
    let u: Vec<C64> = eps.as_slice().iter().map(|&e| C64::new(0.0, e)).collect();
    Ok(hurd_zhou_g(&u)?.re)
}
