//! Independent oracles shared by the integration tests: adaptive
//! Gauss–Kronrod quadrature, a Lévy–Khintchine evaluation of the KoBoL
//! exponent, a direct 2-D transform of the spread payoff and a Stirling
//! log-gamma.

#![allow(dead_code)]

use levy_spread::complexmath::C64;
use levy_spread::models::{BasketModel, LevyExponentSpec};

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).norm())
}

/// Adaptive Gauss–Kronrod on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> C64 {
    fn rec<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> C64 {
        let (value, err) = gk15(f, a, b);
        if !err.is_finite()
            || err <= tol.max(64.0 * f64::EPSILON * value.norm())
            || depth >= 40
            || (b - a).abs() < 1e-14 * (1.0 + a.abs())
        {
            return value;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// `∫_a^∞ f`, through `x = a + t/(1-t)`.
pub fn integrate_upper<F: Fn(f64) -> C64>(f: &F, a: f64, tol: f64) -> C64 {
    let g = |t: f64| {
        let s = 1.0 - t;
        let v = f(a + t / s);
        if v.norm() == 0.0 {
            v
        } else {
            v / (s * s)
        }
    };
    integrate(&g, 0.0, 1.0, tol)
}

/// `∫_{-∞}^{∞} f`, split at `center`.
pub fn integrate_line<F: Fn(f64) -> C64>(f: &F, center: f64, tol: f64) -> C64 {
    let mirrored = |x: f64| f(2.0 * center - x);
    integrate_upper(f, center, 0.5 * tol) + integrate_upper(&mirrored, center, 0.5 * tol)
}

/// `e^{iθ} - 1 - iθ` without cancellation for small `θ`.
fn expm1_minus_linear(theta: f64) -> C64 {
    let half = (0.5 * theta).sin();
    let im = if theta.abs() < 1e-2 {
        let t3 = theta * theta * theta;
        -t3 / 6.0 + t3 * theta * theta / 120.0 - t3 * theta.powi(4) / 5040.0
    } else {
        theta.sin() - theta
    };
    C64::new(-2.0 * half * half, im)
}

/// `-∫₀^∞ (e^{iξx} - 1 - iξx 1_{x≤1}) x^{-ν-1} e^{-ax} dx`.
fn one_sided_lk(xi: f64, nu: f64, a: f64) -> C64 {
    // Near zero substitute x = u^{1/(1-ν)}: the density weight becomes smooth.
    let p = 1.0 / (1.0 - nu);
    let near = |u: f64| {
        if u == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let x = u.powf(p);
        // dx = p x/u du
        expm1_minus_linear(xi * x) * (-a * x).exp() * (p * x.powf(-nu - 1.0) * x / u)
    };
    let far = |x: f64| {
        let e = C64::new(0.0, xi * x).exp() - 1.0;
        e * x.powf(-nu - 1.0) * (-a * x).exp()
    };
    -(integrate(&near, 0.0, 1.0, 1e-14) + integrate_upper(&far, 1.0, 1e-14))
}

/// `∫₀¹ x^{-ν} e^{-ax} dx` through `x = u^{1/(1-ν)}`.
fn truncation_constant(nu: f64, a: f64) -> f64 {
    let p = 1.0 / (1.0 - nu);
    let f = |u: f64| C64::new(p * (-a * u.powf(p)).exp(), 0.0);
    integrate(&f, 0.0, 1.0, 1e-15).re
}

/// KoBoL exponent by direct integration over its Lévy measure: jumps up
/// with density `c₋ x^{-ν-1} e^{λ₋ x}`, jumps down with density
/// `c₊ |x|^{-ν-1} e^{-λ₊|x|}`, plus drift `μ`.
pub fn kobol_lk_oracle(xi: f64, spec: &LevyExponentSpec) -> C64 {
    let LevyExponentSpec::KoBoL {
        mu,
        c_plus,
        c_minus,
        lambda_minus,
        lambda_plus,
        nu,
    } = *spec
    else {
        panic!("kobol spec expected");
    };
    let up = one_sided_lk(xi, nu, -lambda_minus)
        - C64::new(0.0, xi * truncation_constant(nu, -lambda_minus));
    let down = one_sided_lk(-xi, nu, lambda_plus)
        + C64::new(0.0, xi * truncation_constant(nu, lambda_plus));
    C64::new(0.0, -mu * xi) + c_minus * up + c_plus * down
}

/// Same oracle at an imaginary argument `ξ = -iθ`, i.e. `-ln E[e^{θX_1}]`,
/// for real `θ` inside the strip.
pub fn kobol_lk_oracle_imag(theta: f64, spec: &LevyExponentSpec) -> f64 {
    let LevyExponentSpec::KoBoL {
        mu,
        c_plus,
        c_minus,
        lambda_minus,
        lambda_plus,
        nu,
    } = *spec
    else {
        panic!("kobol spec expected");
    };
    // -∫ (e^{θx} - 1) Π(dx) for a finite-variation measure.
    let side = |s: f64, c: f64, a: f64| -> f64 {
        let f = |x: f64| {
            let y = s * theta * x;
            let jump = if y.abs() < 1.0 {
                y.exp_m1() * (-a * x).exp()
            } else {
                (y - a * x).exp() - (-a * x).exp()
            };
            C64::new(jump * x.powf(-nu - 1.0), 0.0)
        };
        let p = 1.0 / (1.0 - nu);
        let near = |u: f64| {
            if u == 0.0 {
                return C64::new(p * s * theta, 0.0);
            }
            let x = u.powf(p);
            f(x) * (p * x / u)
        };
        -c * (integrate(&near, 0.0, 1.0, 1e-14) + integrate_upper(&f, 1.0, 1e-14)).re
    };
    -mu * theta + side(1.0, c_minus, -lambda_minus) + side(-1.0, c_plus, lambda_plus)
}

/// `∫∫ e^{-i⟨u,x⟩} (e^{x₁} - e^{x₂} - 1)_+ dx`, nested adaptive quadrature
/// in the coordinates `t = x₁ - ln(1 + e^{x₂})`, `x₂`.
pub fn spread_transform_oracle(u: [C64; 2]) -> C64 {
    let i = C64::new(0.0, 1.0);
    let softplus = |x: f64| {
        if x > 0.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    };
    let outer = |x2: f64| {
        let level = softplus(x2);
        let inner = |t: f64| {
            if t == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let x1 = t + level;
            // Payoff (1 + e^{x₂})(e^t - 1) folded into the exponent against overflow.
            let log_payoff = level + t + (-(-t).exp_m1()).ln();
            (-i * (u[0] * x1 + u[1] * x2) + log_payoff).exp()
        };
        integrate_upper(&inner, 0.0, 1e-13)
    };
    integrate_line(&outer, 0.0, 1e-12)
}

/// Stirling series with upward recursion: `ln Γ(z) = ln Γ(z+N) - Σ ln(z+k)`.
pub fn stirling_log_gamma(z: C64) -> C64 {
    // B_{2k} / (2k(2k-1))
    const COEF: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let mut w = z;
    let mut shift = C64::new(0.0, 0.0);
    while w.norm() < 30.0 || w.re < 15.0 {
        shift += w.ln();
        w += 1.0;
    }
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut series = C64::new(0.0, 0.0);
    let inv = 1.0 / w;
    let inv2 = inv * inv;
    let mut power = inv;
    for c in COEF {
        series += power * c;
        power *= inv2;
    }
    (w - 0.5) * w.ln() - w + half_ln_2pi + series - shift
}

/// The two-leg KoBoL pricing fixture with a Gaussian common factor.
pub fn kobol_fixture() -> BasketModel {
    let k = LevyExponentSpec::KoBoL {
        mu: 0.0,
        c_plus: 1.0,
        c_minus: 1.0,
        lambda_minus: -15.0,
        lambda_plus: 12.0,
        nu: 0.35,
    };
    let g = LevyExponentSpec::Gaussian {
        mu: 0.0,
        sigma: 0.1,
    };
    BasketModel::new(vec![k, k], vec![g, g], vec![vec![0.5; 2]; 2]).unwrap()
}

pub fn gaussian(sigma: f64) -> LevyExponentSpec {
    LevyExponentSpec::Gaussian { mu: 0.0, sigma }
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

/// Two correlated Brownian legs `σ_j W_j`, `corr(W₁, W₂) = ρ ≥ 0`, written
/// as idiosyncratic parts plus one shared unit factor.
pub fn correlated_gaussian_pair(sigma1: f64, sigma2: f64, rho: f64) -> BasketModel {
    let keep = (1.0 - rho).sqrt();
    let load = rho.sqrt();
    BasketModel::new(
        vec![gaussian(sigma1 * keep), gaussian(sigma2 * keep)],
        vec![gaussian(1.0)],
        vec![vec![sigma1 * load], vec![sigma2 * load]],
    )
    .unwrap()
}
