//! Risk-neutral drift adjustment and the one-dimensional Esscher parameter.

use thiserror::Error;

use crate::complexmath::C64;
use crate::models::{
    characteristic_function, multivariate_exponent, BasketModel, LevyExponentSpec, ModelError,
    TimeHorizon,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MartingaleError {
    #[error("component {component}: the point -i e_s is outside the analyticity domain (strip lower edge {strip_lower} > -1)")]
    Infeasible { component: usize, strip_lower: f64 },
    #[error("component {component}: martingale condition violated, Φ(-i e_s, T) = {got}, expected e^(rT) = {want}")]
    NotMartingale {
        component: usize,
        got: f64,
        want: f64,
    },
    #[error("rate vector has {got} entries for {expected} components")]
    RateDimension { expected: usize, got: usize },
    #[error("riskless rate must be finite, got {0}")]
    InvalidRate(f64),
    #[error("no sign change of the Esscher condition on the feasible interval; scanned (theta, residual): {scanned:?}")]
    NoSolution { scanned: Vec<(f64, f64)> },
    #[error("Esscher bisection stalled at theta = {theta} with residual {residual}")]
    NotConverged { theta: f64, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Continuously compounded riskless rate per year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisklessRate(f64);

impl RisklessRate {
    pub fn new(r: f64) -> Result<Self, MartingaleError> {
        if r.is_finite() {
            Ok(Self(r))
        } else {
            Err(MartingaleError::InvalidRate(r))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// How a pricing run treats a model that is not yet risk neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmmPolicy {
    #[default]
    AutoAdjust,
    Strict,
}

/// Relative tolerance of the martingale identity check.
pub const EMM_TOLERANCE: f64 = 1e-10;

fn unit_point(n: usize, s: usize) -> Vec<C64> {
    let mut z = vec![C64::new(0.0, 0.0); n];
    z[s] = C64::new(0.0, -1.0);
    z
}

fn check_point(model: &BasketModel, s: usize) -> Result<(), MartingaleError> {
    let lower = model.strip_lower()[s];
    if lower > -1.0 {
        return Err(MartingaleError::Infeasible {
            component: s,
            strip_lower: lower,
        });
    }
    Ok(())
}

/// Re-set every diagonal drift so that `ψ(-i e_s) = -r`.
pub fn emm_drift_adjust(
    model: &BasketModel,
    r: RisklessRate,
) -> Result<BasketModel, MartingaleError> {
    emm_drift_adjust_per_leg(model, &vec![r; model.dim()])
}

/// As [`emm_drift_adjust`] with one rate per leg.
pub fn emm_drift_adjust_per_leg(
    model: &BasketModel,
    rates: &[RisklessRate],
) -> Result<BasketModel, MartingaleError> {
    let n = model.dim();
    if rates.len() != n {
        return Err(MartingaleError::RateDimension {
            expected: n,
            got: rates.len(),
        });
    }
    let mut out = model.clone();
    for s in 0..n {
        check_point(&out, s)?;
        let z = unit_point(n, s);
        let r = rates[s].value();
        // ψ(-i e_s) = -μ_s + rest, so the solve is linear in μ_s.
        for _ in 0..3 {
            let mu = out.diag()[s].drift();
            let psi = multivariate_exponent(&z, &out)
                .map_err(|e| match e {
                    ModelError::StripViolation { .. }
                    | ModelError::CoupledStripViolation { .. } => MartingaleError::Infeasible {
                        component: s,
                        strip_lower: out.strip_lower()[s],
                    },
                    other => other.into(),
                })?
                .re;
            let delta = psi + r;
            let scale = 1.0 + mu.abs() + (psi + mu).abs() + r.abs();
            if delta.abs() <= 16.0 * f64::EPSILON * scale {
                break;
            }
            out = out.with_diag_drift(s, mu + delta);
        }
    }
    Ok(out)
}

/// Largest relative deviation `|Φ(-i e_s, T) - e^{r_s T}| / e^{r_s T}` over legs.
pub fn emm_residuals(
    model: &BasketModel,
    rates: &[RisklessRate],
    t: TimeHorizon,
) -> Result<Vec<f64>, MartingaleError> {
    let n = model.dim();
    if rates.len() != n {
        return Err(MartingaleError::RateDimension {
            expected: n,
            got: rates.len(),
        });
    }
    (0..n)
        .map(|s| {
            check_point(model, s)?;
            let phi = characteristic_function(&unit_point(n, s), t, model)?;
            let want = (rates[s].value() * t.years()).exp();
            Ok((phi - want).norm() / want)
        })
        .collect()
}

/// Apply the configured policy: adjust drifts, or verify the identity and
/// fail. The flag reports whether any drift moved.
pub fn enforce_emm(
    model: &BasketModel,
    rates: &[RisklessRate],
    t: TimeHorizon,
    policy: EmmPolicy,
) -> Result<(BasketModel, bool), MartingaleError> {
    match policy {
        EmmPolicy::AutoAdjust => {
            let adjusted = emm_drift_adjust_per_leg(model, rates)?;
            let changed = adjusted != *model;
            if changed {
                log::warn!("model drifts re-set to satisfy the martingale condition");
            }
            Ok((adjusted, changed))
        }
        EmmPolicy::Strict => {
            let residuals = emm_residuals(model, rates, t)?;
            for (s, &res) in residuals.iter().enumerate() {
                if res >= EMM_TOLERANCE {
                    let want = (rates[s].value() * t.years()).exp();
                    let phi = characteristic_function(&unit_point(model.dim(), s), t, model)?;
                    return Err(MartingaleError::NotMartingale {
                        component: s,
                        got: phi.re,
                        want,
                    });
                }
            }
            Ok((model.clone(), false))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsscherSolution {
    pub theta: f64,
    pub residual: f64,
    /// Best residual magnitude seen after each bisection step.
    pub residual_trace: Vec<f64>,
}

const SCAN_STEPS: usize = 64;
const BISECTION_WIDTH: f64 = 1e-12;
const ESSCHER_TOLERANCE: f64 = 1e-10;

/// Solve `r + ψ(-i(θ+1)) - ψ(-iθ) = 0`, which is decreasing in `θ`.
pub fn esscher_theta(
    spec: &LevyExponentSpec,
    r: RisklessRate,
) -> Result<EsscherSolution, MartingaleError> {
    spec.validate()?;
    let r = r.value();
    let f = |theta: f64| -> Result<f64, MartingaleError> {
        let a = spec.exponent(C64::new(0.0, -(theta + 1.0)))?;
        let b = spec.exponent(C64::new(0.0, -theta))?;
        Ok(r + (a - b).re)
    };
    // Im(-iθ) = -θ and Im(-i(θ+1)) must both lie in the open strip.
    let (lam_lo, lam_hi) = spec.strip();
    let lo = -lam_hi;
    let hi = -lam_lo - 1.0;
    if !(lo < hi) {
        return Err(MartingaleError::NoSolution {
            scanned: Vec::new(),
        });
    }
    let center = if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo.max(-0.5) + 1.0
    } else if hi.is_finite() {
        hi.min(-0.5) - 1.0
    } else {
        -0.5
    };
    let f_center = f(center)?;
    let mut scanned = vec![(center, f_center)];
    if f_center == 0.0 {
        return Ok(EsscherSolution {
            theta: center,
            residual: 0.0,
            residual_trace: vec![0.0],
        });
    }
    // f decreasing: a positive value means the root lies to the right.
    let towards = if f_center > 0.0 { hi } else { lo };
    let mut prev = (center, f_center);
    let mut bracket = None;
    for k in 1..=SCAN_STEPS {
        let theta = if towards.is_finite() {
            center + (towards - center) * (1.0 - 0.5f64.powi(k as i32))
        } else {
            center + towards.signum() * 2f64.powi(k as i32 - 4)
        };
        if theta == prev.0 {
            break;
        }
        let v = f(theta)?;
        scanned.push((theta, v));
        if v.signum() != f_center.signum() {
            bracket = Some((prev, (theta, v)));
            break;
        }
        prev = (theta, v);
    }
    let Some((a, b)) = bracket else {
        return Err(MartingaleError::NoSolution { scanned });
    };
    let (mut x_pos, mut x_neg) = if a.1 > 0.0 { (a.0, b.0) } else { (b.0, a.0) };
    let mut best = if a.1.abs() <= b.1.abs() { a } else { b };
    let mut trace = vec![best.1.abs()];
    loop {
        let width = (x_pos - x_neg).abs();
        let mid = 0.5 * (x_pos + x_neg);
        if mid == x_pos
            || mid == x_neg
            || (width < BISECTION_WIDTH && best.1.abs() < ESSCHER_TOLERANCE)
        {
            break;
        }
        let v = f(mid)?;
        if v.abs() < best.1.abs() {
            best = (mid, v);
        }
        trace.push(best.1.abs());
        if v == 0.0 {
            break;
        }
        if v > 0.0 {
            x_pos = mid;
        } else {
            x_neg = mid;
        }
    }
    if best.1.abs() >= ESSCHER_TOLERANCE {
        return Err(MartingaleError::NotConverged {
            theta: best.0,
            residual: best.1,
        });
    }
    Ok(EsscherSolution {
        theta: best.0,
        residual: best.1,
        residual_trace: trace,
    })
}
