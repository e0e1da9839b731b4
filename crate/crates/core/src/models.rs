//! Characteristic exponents of one-dimensional Lévy processes and of the
//! coupled basket `U_t = X_t + B Z_t`.
//!
//! The convention throughout is `E[exp(i ξ X_t)] = exp(-t ψ(ξ))`, so every
//! exponent vanishes at the origin and has non-negative real part on the real
//! axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexmath::{gamma_real, principal_log, principal_power, MathError, C64, I};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Im ξ = {im} outside the analyticity strip ({lower}, {upper})")]
    OutsideStrip { im: f64, lower: f64, upper: f64 },
    #[error("component {component}: Im z = {im} outside the strip [{lower}, {upper}]")]
    StripViolation {
        component: usize,
        im: f64,
        lower: f64,
        upper: f64,
    },
    #[error("coupling factor {factor}: coupled argument has Im = {im} outside ({lower}, {upper})")]
    CoupledStripViolation {
        factor: usize,
        im: f64,
        lower: f64,
        upper: f64,
    },
    #[error("KoBoL order ν = {nu} is not supported (need ν in (0,1))")]
    UnsupportedOrder { nu: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(
        "component {component}: no decay constant for a {kind} exponent; configure an override"
    )]
    MissingDecayConstant {
        component: usize,
        kind: &'static str,
    },
    #[error(transparent)]
    Math(#[from] MathError),
}

fn default_zero() -> f64 {
    0.0
}

/// Parametric one-dimensional characteristic exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyExponentSpec {
    /// Tempered stable (KoBoL) exponent of order `nu`.
    #[serde(rename = "kobol")]
    KoBoL {
        #[serde(default = "default_zero")]
        mu: f64,
        c_plus: f64,
        c_minus: f64,
        lambda_minus: f64,
        lambda_plus: f64,
        nu: f64,
    },
    VarianceGamma {
        #[serde(default = "default_zero")]
        mu: f64,
        c_plus: f64,
        c_minus: f64,
        lambda_minus: f64,
        lambda_plus: f64,
    },
    /// Normal inverse Gaussian, generalised by the power `nu` (`nu = 1` is
    /// the classical case).
    Nig {
        #[serde(default = "default_zero")]
        mu: f64,
        alpha: f64,
        beta: f64,
        delta: f64,
        #[serde(default = "default_nig_nu")]
        nu: f64,
    },
    Gaussian {
        #[serde(default = "default_zero")]
        mu: f64,
        sigma: f64,
    },
}

fn default_nig_nu() -> f64 {
    1.0
}

/// Asymptotic decay `|Φ(ξ,t)| ≲ exp(-C t |ξ|^order)` along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisDecay {
    pub constant: f64,
    pub order: f64,
}

impl LevyExponentSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::KoBoL { .. } => "kobol",
            Self::VarianceGamma { .. } => "variance_gamma",
            Self::Nig { .. } => "nig",
            Self::Gaussian { .. } => "gaussian",
        }
    }

    pub fn drift(&self) -> f64 {
        match *self {
            Self::KoBoL { mu, .. }
            | Self::VarianceGamma { mu, .. }
            | Self::Nig { mu, .. }
            | Self::Gaussian { mu, .. } => mu,
        }
    }

    /// Copy with the drift replaced.
    pub fn with_drift(mut self, new_mu: f64) -> Self {
        match &mut self {
            Self::KoBoL { mu, .. }
            | Self::VarianceGamma { mu, .. }
            | Self::Nig { mu, .. }
            | Self::Gaussian { mu, .. } => *mu = new_mu,
        }
        self
    }

    /// Open strip `(lower, upper)` of `Im ξ` on which the exponent is analytic.
    pub fn strip(&self) -> (f64, f64) {
        match *self {
            Self::KoBoL {
                lambda_minus,
                lambda_plus,
                ..
            }
            | Self::VarianceGamma {
                lambda_minus,
                lambda_plus,
                ..
            } => (lambda_minus, lambda_plus),
            Self::Nig { alpha, beta, .. } => (beta - alpha, beta + alpha),
            Self::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidParameter(msg));
        let finite = |name: &str, v: f64| -> Result<(), ModelError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )))
            }
        };
        finite("mu", self.drift())?;
        match *self {
            Self::KoBoL {
                c_plus,
                c_minus,
                lambda_minus,
                lambda_plus,
                nu,
                ..
            } => {
                for (name, v) in [
                    ("c_plus", c_plus),
                    ("c_minus", c_minus),
                    ("lambda_minus", lambda_minus),
                    ("lambda_plus", lambda_plus),
                    ("nu", nu),
                ] {
                    finite(name, v)?;
                }
                if c_plus < 0.0 || c_minus < 0.0 {
                    return bad(format!(
                        "KoBoL intensities must be positive (c_plus={c_plus}, c_minus={c_minus})"
                    ));
                }
                if !(lambda_minus < 0.0 && lambda_plus > 0.0) {
                    return bad(format!(
                        "KoBoL steepness needs lambda_minus < 0 < lambda_plus (got {lambda_minus}, {lambda_plus})"
                    ));
                }
                if !(nu > 0.0 && nu < 1.0) {
                    return Err(ModelError::UnsupportedOrder { nu });
                }
            }
            Self::VarianceGamma {
                c_plus,
                c_minus,
                lambda_minus,
                lambda_plus,
                ..
            } => {
                for (name, v) in [
                    ("c_plus", c_plus),
                    ("c_minus", c_minus),
                    ("lambda_minus", lambda_minus),
                    ("lambda_plus", lambda_plus),
                ] {
                    finite(name, v)?;
                }
                if c_plus < 0.0 || c_minus < 0.0 {
                    return bad("variance gamma intensities must be positive".into());
                }
                if !(lambda_minus < 0.0 && lambda_plus > 0.0) {
                    return bad(format!(
                        "variance gamma steepness needs lambda_minus < 0 < lambda_plus (got {lambda_minus}, {lambda_plus})"
                    ));
                }
            }
            Self::Nig {
                alpha,
                beta,
                delta,
                nu,
                ..
            } => {
                for (name, v) in [
                    ("alpha", alpha),
                    ("beta", beta),
                    ("delta", delta),
                    ("nu", nu),
                ] {
                    finite(name, v)?;
                }
                if alpha <= beta.abs() {
                    return bad(format!(
                        "NIG needs alpha > |beta| (alpha={alpha}, beta={beta})"
                    ));
                }
                if delta < 0.0 {
                    return bad(format!("NIG needs delta >= 0 (got {delta})"));
                }
                if !(nu > 0.0 && nu <= 2.0) {
                    return bad(format!("NIG power nu must lie in (0, 2], got {nu}"));
                }
            }
            Self::Gaussian { sigma, .. } => {
                finite("sigma", sigma)?;
                if sigma <= 0.0 {
                    return bad(format!("gaussian sigma must be positive, got {sigma}"));
                }
            }
        }
        Ok(())
    }

    fn check_strip(&self, xi: C64) -> Result<(), ModelError> {
        let (lower, upper) = self.strip();
        if xi.im > lower && xi.im < upper {
            Ok(())
        } else {
            Err(ModelError::OutsideStrip {
                im: xi.im,
                lower,
                upper,
            })
        }
    }

    /// Evaluate `ψ(ξ)`.
    pub fn exponent(&self, xi: C64) -> Result<C64, ModelError> {
        exponent(xi, self)
    }

    /// Decay profile of `|Φ|` along the real axis, when one is known in
    /// closed form.
    pub fn decay(&self) -> Option<AxisDecay> {
        match *self {
            Self::KoBoL {
                c_plus,
                c_minus,
                nu,
                ..
            } => {
                let c = 0.5 * (c_plus + c_minus);
                let g = gamma_real(-nu).ok()?;
                let constant = 2.0 * c * (-g) * (PI * nu / 2.0).cos() * (nu * PI).cos().min(1.0);
                Some(AxisDecay {
                    constant,
                    order: nu,
                })
            }
            Self::Gaussian { sigma, .. } => Some(AxisDecay {
                constant: 0.5 * sigma * sigma,
                order: 2.0,
            }),
            _ => None,
        }
    }
}

/// KoBoL exponent
/// `-iμξ + c₋Γ(-ν)[(-λ₋)^ν - (-λ₋-iξ)^ν] + c₊Γ(-ν)[λ₊^ν - (λ₊+iξ)^ν]`.
pub fn kobol_exponent(xi: C64, spec: &LevyExponentSpec) -> Result<C64, ModelError> {
    let LevyExponentSpec::KoBoL {
        mu,
        c_plus,
        c_minus,
        lambda_minus,
        lambda_plus,
        nu,
    } = *spec
    else {
        return Err(ModelError::InvalidParameter(format!(
            "expected a kobol spec, got {}",
            spec.kind_name()
        )));
    };
    if nu == 0.0 || nu == 1.0 || !(nu > 0.0 && nu < 1.0) {
        return Err(ModelError::UnsupportedOrder { nu });
    }
    spec.check_strip(xi)?;
    let g = gamma_real(-nu)?;
    let left = C64::new(-lambda_minus, 0.0);
    let right = C64::new(lambda_plus, 0.0);
    let minus_part = principal_power(left, nu)? - principal_power(left - I * xi, nu)?;
    let plus_part = principal_power(right, nu)? - principal_power(right + I * xi, nu)?;
    Ok(-I * mu * xi + c_minus * g * minus_part + c_plus * g * plus_part)
}

/// Variance gamma exponent
/// `-iμξ + c₊[ln(-λ₋-iξ) - ln(-λ₋)] + c₋[ln(λ₊+iξ) - ln λ₊]`.
pub fn vg_exponent(xi: C64, spec: &LevyExponentSpec) -> Result<C64, ModelError> {
    let LevyExponentSpec::VarianceGamma {
        mu,
        c_plus,
        c_minus,
        lambda_minus,
        lambda_plus,
    } = *spec
    else {
        return Err(ModelError::InvalidParameter(format!(
            "expected a variance_gamma spec, got {}",
            spec.kind_name()
        )));
    };
    spec.check_strip(xi)?;
    let left = C64::new(-lambda_minus, 0.0);
    let right = C64::new(lambda_plus, 0.0);
    let a = principal_log(left - I * xi)? - left.ln();
    let b = principal_log(right + I * xi)? - right.ln();
    Ok(-I * mu * xi + c_plus * a + c_minus * b)
}

/// NIG exponent `-iμξ + δ[(α² - (β+iξ)²)^{ν/2} - (α² - β²)^{ν/2}]`.
pub fn nig_exponent(xi: C64, spec: &LevyExponentSpec) -> Result<C64, ModelError> {
    let LevyExponentSpec::Nig {
        mu,
        alpha,
        beta,
        delta,
        nu,
    } = *spec
    else {
        return Err(ModelError::InvalidParameter(format!(
            "expected a nig spec, got {}",
            spec.kind_name()
        )));
    };
    spec.check_strip(xi)?;
    let shifted = C64::new(beta, 0.0) + I * xi;
    let inner = alpha * alpha - shifted * shifted;
    // Same power routine for both terms so that ψ(0) vanishes exactly.
    let base = principal_power(C64::new(alpha * alpha - beta * beta, 0.0), nu / 2.0)?;
    Ok(-I * mu * xi + delta * (principal_power(inner, nu / 2.0)? - base))
}

/// Brownian exponent `-iμξ + σ²ξ²/2`.
pub fn gaussian_exponent(xi: C64, spec: &LevyExponentSpec) -> Result<C64, ModelError> {
    let LevyExponentSpec::Gaussian { mu, sigma } = *spec else {
        return Err(ModelError::InvalidParameter(format!(
            "expected a gaussian spec, got {}",
            spec.kind_name()
        )));
    };
    Ok(-I * mu * xi + 0.5 * sigma * sigma * xi * xi)
}

pub fn exponent(xi: C64, spec: &LevyExponentSpec) -> Result<C64, ModelError> {
    match spec {
        LevyExponentSpec::KoBoL { .. } => kobol_exponent(xi, spec),
        LevyExponentSpec::VarianceGamma { .. } => vg_exponent(xi, spec),
        LevyExponentSpec::Nig { .. } => nig_exponent(xi, spec),
        LevyExponentSpec::Gaussian { .. } => gaussian_exponent(xi, spec),
    }
}

/// Positive maturity in years.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimeHorizon(f64);

impl TimeHorizon {
    pub fn new(t: f64) -> Result<Self, ModelError> {
        if t.is_finite() && t > 0.0 {
            Ok(Self(t))
        } else {
            Err(ModelError::InvalidParameter(format!(
                "maturity must be positive, got {t}"
            )))
        }
    }

    pub fn years(self) -> f64 {
        self.0
    }
}

/// Default ratio between the closed sub-strip used for contour shifts and
/// the open analyticity strip.
pub const DEFAULT_STRIP_FRACTION: f64 = 0.95;

/// `n` diagonal exponents coupled through `q` factor exponents and a
/// non-negative `n × q` loading matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BasketModel {
    diag: Vec<LevyExponentSpec>,
    coupling: Vec<LevyExponentSpec>,
    loadings: Vec<Vec<f64>>,
    strip_fraction: f64,
    strip_lower: Vec<f64>,
    strip_upper: Vec<f64>,
}

impl BasketModel {
    /// `loadings[k][m]` multiplies factor `m` in leg `k`.
    pub fn new(
        diag: Vec<LevyExponentSpec>,
        coupling: Vec<LevyExponentSpec>,
        loadings: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        Self::with_strip_fraction(diag, coupling, loadings, DEFAULT_STRIP_FRACTION)
    }

    pub fn independent(diag: Vec<LevyExponentSpec>) -> Result<Self, ModelError> {
        let n = diag.len();
        Self::new(diag, Vec::new(), vec![Vec::new(); n])
    }

    pub fn with_strip_fraction(
        diag: Vec<LevyExponentSpec>,
        coupling: Vec<LevyExponentSpec>,
        loadings: Vec<Vec<f64>>,
        strip_fraction: f64,
    ) -> Result<Self, ModelError> {
        let n = diag.len();
        if n == 0 {
            return Err(ModelError::InvalidParameter(
                "basket needs at least one leg".into(),
            ));
        }
        if loadings.len() != n {
            return Err(ModelError::Dimension {
                expected: n,
                got: loadings.len(),
            });
        }
        let q = coupling.len();
        for (k, row) in loadings.iter().enumerate() {
            if row.len() != q {
                return Err(ModelError::Dimension {
                    expected: q,
                    got: row.len(),
                });
            }
            for (m, &b) in row.iter().enumerate() {
                if !b.is_finite() || b < 0.0 {
                    return Err(ModelError::InvalidParameter(format!(
                        "loading b[{k}][{m}] = {b} must be finite and non-negative"
                    )));
                }
            }
        }
        if !(strip_fraction > 0.0 && strip_fraction < 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "strip fraction must lie in (0, 1), got {strip_fraction}"
            )));
        }
        for spec in diag.iter().chain(coupling.iter()) {
            spec.validate()?;
        }

        let mut strip_lower = Vec::with_capacity(n);
        let mut strip_upper = Vec::with_capacity(n);
        for (s, spec) in diag.iter().enumerate() {
            let (lo, hi) = spec.strip();
            let mut lower = strip_fraction * lo;
            let mut upper = strip_fraction * hi;
            for (m, factor) in coupling.iter().enumerate() {
                if loadings[s][m] <= 0.0 {
                    continue;
                }
                let col_sum: f64 = loadings.iter().map(|row| row[m]).sum();
                let (flo, fhi) = factor.strip();
                lower = lower.max(strip_fraction * flo / col_sum);
                upper = upper.min(strip_fraction * fhi / col_sum);
            }
            strip_lower.push(lower);
            strip_upper.push(upper);
        }
        Ok(Self {
            diag,
            coupling,
            loadings,
            strip_fraction,
            strip_lower,
            strip_upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[LevyExponentSpec] {
        &self.diag
    }

    pub fn coupling(&self) -> &[LevyExponentSpec] {
        &self.coupling
    }

    pub fn loadings(&self) -> &[Vec<f64>] {
        &self.loadings
    }

    pub fn strip_fraction(&self) -> f64 {
        self.strip_fraction
    }

    /// `b₋`: lower edge of the admissible `Im z_s`.
    pub fn strip_lower(&self) -> &[f64] {
        &self.strip_lower
    }

    /// `b₊`: upper edge of the admissible `Im z_s`.
    pub fn strip_upper(&self) -> &[f64] {
        &self.strip_upper
    }

    /// Copy with the drift of diagonal component `s` replaced.
    pub fn with_diag_drift(&self, s: usize, mu: f64) -> Self {
        let mut out = self.clone();
        out.diag[s] = out.diag[s].with_drift(mu);
        out
    }

    /// True when every exponent is Gaussian.
    pub fn is_gaussian(&self) -> bool {
        self.diag
            .iter()
            .chain(self.coupling.iter())
            .all(|s| matches!(s, LevyExponentSpec::Gaussian { .. }))
    }
}

fn strip_tolerance(bound: f64) -> f64 {
    1e-12 * bound.abs().max(1.0)
}

/// `ψ(z) = Σ_s ψ_s(z_s) + Σ_m ψ'_m(Σ_k b_{k,m} z_k)`.
pub fn multivariate_exponent(z: &[C64], model: &BasketModel) -> Result<C64, ModelError> {
    let n = model.dim();
    if z.len() != n {
        return Err(ModelError::Dimension {
            expected: n,
            got: z.len(),
        });
    }
    let mut total = C64::new(0.0, 0.0);
    for (s, (&zs, spec)) in z.iter().zip(model.diag.iter()).enumerate() {
        let lower = model.strip_lower[s];
        let upper = model.strip_upper[s];
        if zs.im < lower - strip_tolerance(lower) || zs.im > upper + strip_tolerance(upper) {
            return Err(ModelError::StripViolation {
                component: s,
                im: zs.im,
                lower,
                upper,
            });
        }
        total += spec.exponent(zs).map_err(|e| match e {
            ModelError::OutsideStrip { im, lower, upper } => ModelError::StripViolation {
                component: s,
                im,
                lower,
                upper,
            },
            other => other,
        })?;
    }
    for (m, factor) in model.coupling.iter().enumerate() {
        let arg: C64 = z
            .iter()
            .zip(model.loadings.iter())
            .map(|(&zk, row)| zk * row[m])
            .sum();
        total += factor.exponent(arg).map_err(|e| match e {
            ModelError::OutsideStrip { im, lower, upper } => ModelError::CoupledStripViolation {
                factor: m,
                im,
                lower,
                upper,
            },
            other => other,
        })?;
    }
    Ok(total)
}

/// `Φ(z, t) = exp(-t ψ(z))`.
pub fn characteristic_function(
    z: &[C64],
    t: TimeHorizon,
    model: &BasketModel,
) -> Result<C64, ModelError> {
    let psi = multivariate_exponent(z, model)?;
    Ok((-t.years() * psi).exp())
}

/// Per-axis decay profiles used to size truncation lattices.
///
/// KoBoL axes share the smallest KoBoL constant of the basket; Gaussian axes
/// use their exact bound `σ²/2` with order 2. `overrides[s]`, when set,
/// replaces the constant of axis `s` (and supplies one for other kinds, with
/// order taken from the exponent where defined and `1` otherwise).
pub fn axis_decay(
    model: &BasketModel,
    overrides: &[Option<f64>],
) -> Result<Vec<AxisDecay>, ModelError> {
    let n = model.dim();
    if !overrides.is_empty() && overrides.len() != n {
        return Err(ModelError::Dimension {
            expected: n,
            got: overrides.len(),
        });
    }
    let over = |s: usize| overrides.get(s).copied().flatten();
    let kobol_min = model
        .diag
        .iter()
        .filter(|s| matches!(s, LevyExponentSpec::KoBoL { .. }))
        .filter_map(|s| s.decay())
        .map(|d| d.constant)
        .fold(f64::INFINITY, f64::min);

    let mut out = Vec::with_capacity(n);
    for (s, spec) in model.diag.iter().enumerate() {
        let decay = match (spec, over(s)) {
            (LevyExponentSpec::KoBoL { nu, .. }, None) => {
                if *nu >= 0.5 {
                    return Err(ModelError::InvalidParameter(format!(
                        "component {s}: KoBoL order {nu} has no exponential decay bound (need nu < 1/2)"
                    )));
                }
                AxisDecay {
                    constant: kobol_min,
                    order: *nu,
                }
            }
            (LevyExponentSpec::Gaussian { .. }, None) => spec.decay().expect("gaussian decay"),
            (LevyExponentSpec::Nig { nu, .. }, Some(c)) => AxisDecay {
                constant: c,
                order: *nu,
            },
            (_, Some(c)) => AxisDecay {
                constant: c,
                order: spec.decay().map(|d| d.order).unwrap_or(1.0),
            },
            (other, None) => {
                return Err(ModelError::MissingDecayConstant {
                    component: s,
                    kind: other.kind_name(),
                })
            }
        };
        if !(decay.constant > 0.0 && decay.constant.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "component {s}: decay constant {} must be positive",
                decay.constant
            )));
        }
        out.push(decay);
    }
    Ok(out)
}

/// Aggregate decay constant `C = min_s C_s`.
pub fn decay_constant(model: &BasketModel) -> Result<f64, ModelError> {
    decay_constant_with(model, &[])
}

pub fn decay_constant_with(
    model: &BasketModel,
    overrides: &[Option<f64>],
) -> Result<f64, ModelError> {
    Ok(axis_decay(model, overrides)?
        .iter()
        .map(|d| d.constant)
        .fold(f64::INFINITY, f64::min))
}

/// Mean vector and covariance matrix of `U_t`, from central differences of
/// `ψ` at the origin.
pub fn moments(
    model: &BasketModel,
    t: TimeHorizon,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), ModelError> {
    const STEP: f64 = 1e-4;
    let n = model.dim();
    let psi = |z: &[C64]| multivariate_exponent(z, model);
    let zero = vec![C64::new(0.0, 0.0); n];
    let at = |pairs: &[(usize, f64)]| -> Vec<C64> {
        let mut z = zero.clone();
        for &(s, h) in pairs {
            z[s] += h;
        }
        z
    };
    let mut mean = vec![0.0; n];
    let mut cov = vec![vec![0.0; n]; n];
    for s in 0..n {
        let d1 = (psi(&at(&[(s, STEP)]))? - psi(&at(&[(s, -STEP)]))?) / (2.0 * STEP);
        // ψ'(0) = -i E[U]/t
        mean[s] = (I * d1).re * t.years();
        let d2 = (psi(&at(&[(s, STEP)]))? + psi(&at(&[(s, -STEP)]))? - 2.0 * psi(&zero)?)
            / (STEP * STEP);
        cov[s][s] = d2.re * t.years();
        for l in 0..s {
            let mixed = (psi(&at(&[(s, STEP), (l, STEP)]))?
                - psi(&at(&[(s, STEP), (l, -STEP)]))?
                - psi(&at(&[(s, -STEP), (l, STEP)]))?
                + psi(&at(&[(s, -STEP), (l, -STEP)]))?)
                / (4.0 * STEP * STEP);
            cov[s][l] = mixed.re * t.years();
            cov[l][s] = cov[s][l];
        }
    }
    Ok((mean, cov))
}
