//! Complex special functions on the principal branch.
//!
//! Everything here is a pure function. Powers and logarithms use the
//! principal branch with the cut along `(-inf, 0]`; the log-gamma function is
//! the analytic continuation of the real `ln Γ` from the positive axis, with
//! its cut along the negative real axis.

use std::f64::consts::PI;

pub use num_complex::Complex64 as C64;
use thiserror::Error;

/// Errors raised by the special functions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    #[error("argument {z} lies on the branch cut (-inf, 0]")]
    BranchCut { z: C64 },
    #[error("gamma pole at {z}")]
    Pole { z: C64 },
    #[error("gamma overflows: log value {log_value}")]
    Overflow { log_value: C64 },
    #[error("non-finite input {z}")]
    NonFinite { z: C64 },
}

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `0.5 * ln(2π)`
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn check_finite(z: C64) -> Result<(), MathError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(MathError::NonFinite { z })
    }
}

/// True when `z` sits on the principal cut `(-inf, 0]`.
pub fn on_cut(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0
}

/// Principal logarithm, `Im ∈ (-π, π]`.
pub fn principal_log(z: C64) -> Result<C64, MathError> {
    check_finite(z)?;
    if z.re == 0.0 && z.im == 0.0 {
        return Err(MathError::BranchCut { z });
    }
    Ok(z.ln())
}

/// `z^ν = exp(ν Log z)` on the principal branch.
pub fn principal_power(z: C64, nu: f64) -> Result<C64, MathError> {
    check_finite(z)?;
    if !nu.is_finite() {
        return Err(MathError::NonFinite {
            z: C64::new(nu, 0.0),
        });
    }
    if on_cut(z) {
        return Err(MathError::BranchCut { z });
    }
    Ok((z.ln() * nu).exp())
}

fn is_pole(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

fn lanczos_log_gamma(z: C64) -> C64 {
    // Γ(z) = √(2π) t^(z-1/2) e^(-t) A(z), t = z + g - 1/2
    let zm1 = z - 1.0;
    let mut series = C64::new(LANCZOS_COEF[0], 0.0);
    for (k, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (zm1 + k as f64);
    }
    let t = zm1 + LANCZOS_G + 0.5;
    (zm1 + 0.5) * t.ln() - t + HALF_LN_2PI + series.ln()
}

/// `ln sin(πz)` for `Im z >= 0`, continuous in the closed upper half plane
/// away from the integers. Written through `w = e^{2πiz}` so that large
/// imaginary parts do not overflow.
fn ln_sin_pi_upper(z: C64) -> C64 {
    let w = (2.0 * PI * I * z).exp();
    -PI * I * z + (1.0 - w).ln() + C64::new(-std::f64::consts::LN_2, PI / 2.0)
}

/// Logarithm of the gamma function.
///
/// Lanczos (g = 7, 9 terms) for `Re z >= 1/2`, reflection otherwise. The
/// result satisfies `log_gamma(conj z) = conj(log_gamma(z))` off the real
/// axis.
pub fn log_gamma(z: C64) -> Result<C64, MathError> {
    check_finite(z)?;
    if is_pole(z) {
        return Err(MathError::Pole { z });
    }
    if z.re >= 0.5 {
        return Ok(lanczos_log_gamma(z));
    }
    // ln Γ(z) = ln π - ln sin(πz) - ln Γ(1 - z)
    let ln_sin = if z.im >= 0.0 {
        ln_sin_pi_upper(z)
    } else {
        ln_sin_pi_upper(z.conj()).conj()
    };
    Ok(C64::new(PI.ln(), 0.0) - ln_sin - lanczos_log_gamma(1.0 - z))
}

/// The gamma function, `exp(log_gamma(z))`.
pub fn gamma(z: C64) -> Result<C64, MathError> {
    let lg = log_gamma(z)?;
    exp_checked(lg)
}

/// Real gamma function for real arguments.
pub fn gamma_real(x: f64) -> Result<f64, MathError> {
    Ok(gamma(C64::new(x, 0.0))?.re)
}

/// `exp(z)` with overflow reported as an error carrying the exponent.
pub fn exp_checked(z: C64) -> Result<C64, MathError> {
    if z.re > 709.78 {
        return Err(MathError::Overflow { log_value: z });
    }
    let v = z.exp();
    check_finite(v).map_err(|_| MathError::Overflow { log_value: z })?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn power_identity_and_cut_edge() {
        let v = principal_power(C64::new(1.0, 0.0), 0.5).unwrap();
        assert_eq!(v, C64::new(1.0, 0.0));
        let v = principal_power(C64::new(-1.0, 1e-9), 2.0).unwrap();
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-8);
        let v = principal_power(C64::new(0.0, 2.0), 0.5).unwrap();
        assert!((v - C64::new(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn power_on_cut_is_error() {
        assert!(matches!(
            principal_power(C64::new(-2.0, 0.0), 0.3),
            Err(MathError::BranchCut { .. })
        ));
        assert!(principal_power(C64::new(0.0, 0.0), 0.3).is_err());
    }

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(C64::new(1.0, 0.0)).unwrap().norm() < 1e-15);
        let half = log_gamma(C64::new(0.5, 0.0)).unwrap();
        assert!((half.re - PI.sqrt().ln()).abs() < 1e-14);
        assert!(half.im.abs() < 1e-15);
        // mpmath.loggamma(2+3j), 40 digits
        let want = C64::new(-2.092_851_753_092_733, 2.302_396_543_466_867_6);
        assert!(rel(log_gamma(C64::new(2.0, 3.0)).unwrap(), want) < 1e-13);
    }

    #[test]
    fn log_gamma_far_from_axis() {
        // mpmath.loggamma values
        let cases = [
            (
                C64::new(0.3, -150.0),
                C64::new(-235.702_637_233_735_7, -601.281_279_293_789_7),
            ),
            (
                C64::new(-20.5, 40.0),
                C64::new(-140.272_915_073_195_1, 69.285_609_956_930_6),
            ),
        ];
        for (z, want) in cases {
            let got = log_gamma(z).unwrap();
            assert!(rel(got, want) < 1e-12, "{z}: {got} vs {want}");
        }
    }

    #[test]
    fn gamma_values_and_poles() {
        assert!((gamma(C64::new(5.0, 0.0)).unwrap().re - 24.0).abs() < 1e-12);
        let g = gamma(C64::new(-0.5, 0.0)).unwrap();
        assert!((g.re + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!(g.im.abs() < 1e-13);
        assert!(matches!(
            gamma(C64::new(-2.0, 0.0)),
            Err(MathError::Pole { .. })
        ));
        assert!(matches!(
            gamma(C64::new(0.0, 0.0)),
            Err(MathError::Pole { .. })
        ));
    }

    #[test]
    fn gamma_overflow_keeps_log() {
        match gamma(C64::new(200.0, 0.0)) {
            Err(MathError::Overflow { log_value }) => assert!(log_value.re > 800.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn reflection_identity_on_grid() {
        for i in 0..15 {
            for j in 0..9 {
                let z = C64::new(-3.7 + 0.53 * i as f64, -4.0 + 1.0 * j as f64);
                let lhs = gamma(z).unwrap() * gamma(1.0 - z).unwrap();
                let rhs = PI / (PI * z).sin();
                assert!(rel(lhs, rhs) < 1e-10, "{z}");
            }
        }
    }
}
