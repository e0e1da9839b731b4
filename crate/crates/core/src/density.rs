//! Density recovery by Poisson summation, truncated to an exponential
//! hyperbolic cross of integer frequencies.
//!
//! The periodised density on the box `(P/2)Qₙ` is
//! `p̃(x) = e^{⟨x,ε⟩} P⁻ⁿ Σ_m Φ(-2πm/P + iε, T) e^{2πi⟨m,x⟩/P}`, where the
//! optional contour shift `ε` is zero for the plain series.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::complexmath::{gamma_real, C64};
use crate::models::{
    axis_decay, characteristic_function, moments, AxisDecay, BasketModel, ModelError, TimeHorizon,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("invalid lattice: {0}")]
    InvalidSpec(String),
    #[error("lattice exceeds the budget of {cap} points (estimated {estimate:.3e})")]
    Budget { estimate: f64, cap: usize },
    #[error("shift has {got} entries for {expected} components")]
    ShiftDimension { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Default maximum number of lattice points.
pub const DEFAULT_LATTICE_CAP: usize = 10_000_000;

/// Which integer frequencies are kept.
#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    /// `{m : T Σ_s C_s |2πm_s/P|^{ν_s} ≤ ln R}`.
    HyperbolicCross { ln_r: f64, axes: Vec<AxisDecay> },
    /// Full square `|m_s| ≤ half_width`.
    Square { dim: usize, half_width: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    period: f64,
    truncation: Truncation,
    horizon: TimeHorizon,
    cap: usize,
}

impl LatticeSpec {
    /// Hyperbolic cross with one decay constant shared by all axes.
    pub fn cross(
        period: f64,
        ln_r: f64,
        constant: f64,
        orders: &[f64],
        t: TimeHorizon,
    ) -> Result<Self, DensityError> {
        let axes = orders
            .iter()
            .map(|&order| AxisDecay { constant, order })
            .collect();
        Self::cross_with_axes(period, ln_r, axes, t)
    }

    pub fn cross_with_axes(
        period: f64,
        ln_r: f64,
        axes: Vec<AxisDecay>,
        t: TimeHorizon,
    ) -> Result<Self, DensityError> {
        check_period(period)?;
        if !(ln_r.is_finite() && ln_r >= 0.0) {
            return Err(DensityError::InvalidSpec(format!(
                "ln R must be finite and non-negative, got {ln_r}"
            )));
        }
        if axes.is_empty() {
            return Err(DensityError::InvalidSpec(
                "lattice needs at least one axis".into(),
            ));
        }
        for (s, a) in axes.iter().enumerate() {
            if !(a.constant.is_finite() && a.constant > 0.0) {
                return Err(DensityError::InvalidSpec(format!(
                    "axis {s}: decay constant must be positive, got {}",
                    a.constant
                )));
            }
            if !(a.order > 0.0 && a.order <= 2.0) {
                return Err(DensityError::InvalidSpec(format!(
                    "axis {s}: decay order must lie in (0, 2], got {}",
                    a.order
                )));
            }
        }
        Ok(Self {
            period,
            truncation: Truncation::HyperbolicCross { ln_r, axes },
            horizon: t,
            cap: DEFAULT_LATTICE_CAP,
        })
    }

    pub fn square(
        period: f64,
        dim: usize,
        half_width: u32,
        t: TimeHorizon,
    ) -> Result<Self, DensityError> {
        check_period(period)?;
        if dim == 0 {
            return Err(DensityError::InvalidSpec(
                "lattice needs at least one axis".into(),
            ));
        }
        Ok(Self {
            period,
            truncation: Truncation::Square { dim, half_width },
            horizon: t,
            cap: DEFAULT_LATTICE_CAP,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn horizon(&self) -> TimeHorizon {
        self.horizon
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dim(&self) -> usize {
        match &self.truncation {
            Truncation::HyperbolicCross { axes, .. } => axes.len(),
            Truncation::Square { dim, .. } => *dim,
        }
    }

    /// `ln R`, or `None` for square truncation.
    pub fn ln_r(&self) -> Option<f64> {
        match &self.truncation {
            Truncation::HyperbolicCross { ln_r, .. } => Some(*ln_r),
            Truncation::Square { .. } => None,
        }
    }

    /// Contribution of one coordinate to the membership cost.
    pub fn axis_cost(&self, s: usize, m: i64) -> f64 {
        match &self.truncation {
            Truncation::HyperbolicCross { axes, .. } => {
                let a = axes[s];
                self.horizon.years()
                    * a.constant
                    * (2.0 * PI * m as f64 / self.period).abs().powf(a.order)
            }
            Truncation::Square { .. } => 0.0,
        }
    }

    /// Largest `|m_s|` that can belong to the lattice.
    pub fn axis_bound(&self, s: usize) -> i64 {
        match &self.truncation {
            Truncation::HyperbolicCross { ln_r, axes } => {
                let a = axes[s];
                let radius = (ln_r / (a.constant * self.horizon.years())).powf(1.0 / a.order);
                (self.period / (2.0 * PI) * radius).ceil() as i64
            }
            Truncation::Square { half_width, .. } => *half_width as i64,
        }
    }

    /// Exact membership test of an integer vector.
    pub fn contains(&self, m: &[i64]) -> bool {
        match &self.truncation {
            Truncation::HyperbolicCross { ln_r, .. } => {
                let mut cost = 0.0;
                for (s, &ms) in m.iter().enumerate() {
                    cost += self.axis_cost(s, ms);
                }
                cost <= *ln_r
            }
            Truncation::Square { half_width, .. } => {
                m.iter().all(|v| v.unsigned_abs() <= *half_width as u64)
            }
        }
    }
}

fn check_period(period: f64) -> Result<(), DensityError> {
    if period.is_finite() && period > 0.0 {
        Ok(())
    } else {
        Err(DensityError::InvalidSpec(format!(
            "period must be positive, got {period}"
        )))
    }
}

/// Integer frequencies, stored flat in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    dim: usize,
    flat: Vec<i64>,
}

impl Lattice {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn point(&self, k: usize) -> &[i64] {
        &self.flat[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i64> {
        self.flat.chunks_exact(self.dim)
    }

    /// Index of `m`, by binary search over the lexicographic order.
    pub fn position(&self, m: &[i64]) -> Option<usize> {
        let n = self.len();
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.point(mid).cmp(m) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }
}

/// Enumerate the lattice in lexicographic order, pruning partial vectors
/// whose cost already exceeds `ln R`.
pub fn cross_lattice(spec: &LatticeSpec) -> Result<Lattice, DensityError> {
    let n = spec.dim();
    let bounds: Vec<i64> = (0..n).map(|s| spec.axis_bound(s)).collect();
    let limit = spec.ln_r().unwrap_or(f64::INFINITY);
    let mut flat = Vec::new();
    let mut current = vec![0i64; n];
    let mut count = 0usize;
    let budget = |count: usize| -> Result<(), DensityError> {
        if count > spec.cap {
            Err(DensityError::Budget {
                estimate: cross_cardinality_estimate(spec).max(count as f64),
                cap: spec.cap,
            })
        } else {
            Ok(())
        }
    };

    // Costs are accumulated left to right so the final test matches
    // `LatticeSpec::contains` bit for bit.
    fn walk(
        spec: &LatticeSpec,
        bounds: &[i64],
        limit: f64,
        depth: usize,
        partial: f64,
        current: &mut Vec<i64>,
        flat: &mut Vec<i64>,
        count: &mut usize,
        budget: &dyn Fn(usize) -> Result<(), DensityError>,
    ) -> Result<(), DensityError> {
        let n = bounds.len();
        for m in -bounds[depth]..=bounds[depth] {
            let cost = partial + spec.axis_cost(depth, m);
            if !(cost <= limit) {
                continue;
            }
            current[depth] = m;
            if depth + 1 == n {
                *count += 1;
                budget(*count)?;
                flat.extend_from_slice(current);
            } else {
                walk(
                    spec,
                    bounds,
                    limit,
                    depth + 1,
                    cost,
                    current,
                    flat,
                    count,
                    budget,
                )?;
            }
        }
        Ok(())
    }

    walk(
        spec,
        &bounds,
        limit,
        0,
        0.0,
        &mut current,
        &mut flat,
        &mut count,
        &budget,
    )?;
    Ok(Lattice { dim: n, flat })
}

/// Volume-based estimate of the lattice size,
/// `(P/2π)ⁿ Π_s (ln R/(C_s T))^{1/ν_s} · 2ⁿ Π Γ(1+1/ν_s) / Γ(1+Σ 1/ν_s)`.
pub fn cross_cardinality_estimate(spec: &LatticeSpec) -> f64 {
    match &spec.truncation {
        Truncation::Square { dim, half_width } => {
            (2.0 * *half_width as f64 + 1.0).powi(*dim as i32)
        }
        Truncation::HyperbolicCross { ln_r, axes } => {
            if *ln_r == 0.0 {
                return 0.0;
            }
            let n = axes.len() as i32;
            let t = spec.horizon.years();
            let mut log_est = n as f64 * (spec.period / (2.0 * PI)).ln() + n as f64 * 2f64.ln();
            let mut inv_sum = 0.0;
            for a in axes {
                let inv = 1.0 / a.order;
                inv_sum += inv;
                log_est += inv * (ln_r / (a.constant * t)).ln();
                log_est += gamma_real(1.0 + inv).map(f64::ln).unwrap_or(f64::INFINITY);
            }
            log_est -= gamma_real(1.0 + inv_sum)
                .map(f64::ln)
                .unwrap_or(f64::NEG_INFINITY);
            log_est.exp()
        }
    }
}

/// Truncated Fourier series of the periodised (optionally shifted) density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityApproximant {
    spec: LatticeSpec,
    lattice: Lattice,
    coefficients: Vec<C64>,
    shift: Option<Vec<f64>>,
    order: Vec<usize>,
}

impl DensityApproximant {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Coefficients in lattice order.
    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn shift(&self) -> Option<&[f64]> {
        self.shift.as_deref()
    }

    pub fn coefficient(&self, m: &[i64]) -> Option<C64> {
        self.lattice.position(m).map(|k| self.coefficients[k])
    }

    pub fn max_coefficient(&self) -> f64 {
        self.order
            .first()
            .map(|&k| self.coefficients[k].norm())
            .unwrap_or(0.0)
    }
}

/// Indices sorted by decreasing magnitude, ties by index.
pub(crate) fn magnitude_order(values: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .norm()
            .partial_cmp(&values[a].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Compensated complex accumulator (Neumaier).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: C64,
    carry: C64,
}

fn neumaier(sum: &mut f64, carry: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *carry += (*sum - t) + x;
    } else {
        *carry += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub fn add(&mut self, x: C64) {
        neumaier(&mut self.sum.re, &mut self.carry.re, x.re);
        neumaier(&mut self.sum.im, &mut self.carry.im, x.im);
    }

    pub fn total(&self) -> C64 {
        self.sum + self.carry
    }
}

/// The frequency `-2πm/P + iε` at which coefficients are sampled.
pub fn frequency(m: &[i64], period: f64, shift: Option<&[f64]>) -> Vec<C64> {
    m.iter()
        .enumerate()
        .map(|(s, &ms)| C64::new(-2.0 * PI * ms as f64 / period, shift.map_or(0.0, |e| e[s])))
        .collect()
}

/// Coefficients `Φ(-2πm/P + iε, T)/Pⁿ` over the lattice.
pub fn build_density(
    model: &BasketModel,
    spec: &LatticeSpec,
    shift: Option<&[f64]>,
) -> Result<DensityApproximant, DensityError> {
    let n = model.dim();
    if spec.dim() != n {
        return Err(DensityError::InvalidSpec(format!(
            "lattice has {} axes but the model has {n} components",
            spec.dim()
        )));
    }
    if let Some(e) = shift {
        if e.len() != n {
            return Err(DensityError::ShiftDimension {
                expected: n,
                got: e.len(),
            });
        }
    }
    let lattice = cross_lattice(spec)?;
    let norm = spec.period.powi(n as i32);
    let t = spec.horizon;
    let coefficients = lattice
        .flat
        .par_chunks_exact(n)
        .map(|m| {
            let z = frequency(m, spec.period, shift);
            Ok(characteristic_function(&z, t, model)? / norm)
        })
        .collect::<Result<Vec<C64>, ModelError>>()?;
    let order = magnitude_order(&coefficients);
    Ok(DensityApproximant {
        spec: spec.clone(),
        lattice,
        coefficients,
        shift: shift.map(<[f64]>::to_vec),
        order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue {
    pub value: f64,
    /// Magnitude of the discarded imaginary part.
    pub residue: f64,
    /// The point lies outside `(P/2)Qₙ`, where the series is a periodic copy.
    pub outside_box: bool,
}

fn outside(x: &[f64], period: f64) -> bool {
    x.iter().any(|v| v.abs() > 0.5 * period)
}

/// Evaluate the series at `x`, summing in decreasing coefficient magnitude.
pub fn eval_density(approx: &DensityApproximant, x: &[f64]) -> DensityValue {
    let omega = 2.0 * PI / approx.spec.period;
    let mut acc = CompensatedSum::default();
    for &k in &approx.order {
        let m = approx.lattice.point(k);
        let phase: f64 = m
            .iter()
            .zip(x)
            .map(|(&ms, &xs)| ms as f64 * xs)
            .sum::<f64>()
            * omega;
        acc.add(approx.coefficients[k] * C64::from_polar(1.0, phase));
    }
    finish(approx, x, acc.total())
}

fn finish(approx: &DensityApproximant, x: &[f64], sum: C64) -> DensityValue {
    let weight = approx.shift.as_ref().map_or(1.0, |e| {
        e.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp()
    });
    DensityValue {
        value: weight * sum.re,
        residue: weight * sum.im.abs(),
        outside_box: outside(x, approx.spec.period),
    }
}

/// Evaluate on the tensor grid `axes[0] × axes[1] × ...`, row-major with
/// the last axis fastest. Two-dimensional grids use separable partial sums.
pub fn eval_density_grid(
    approx: &DensityApproximant,
    axes: &[Vec<f64>],
) -> Result<Vec<DensityValue>, DensityError> {
    let n = approx.lattice.dim;
    if axes.len() != n {
        return Err(DensityError::InvalidSpec(format!(
            "grid has {} axes, lattice has {n}",
            axes.len()
        )));
    }
    if n != 2 {
        let points = tensor_points(axes);
        return Ok(points.par_iter().map(|x| eval_density(approx, x)).collect());
    }
    let omega = 2.0 * PI / approx.spec.period;
    let lattice = &approx.lattice;
    let m1_max = lattice.iter().map(|m| m[0].abs()).max().unwrap_or(0);
    let m2_max = lattice.iter().map(|m| m[1].abs()).max().unwrap_or(0);
    let width = (2 * m2_max + 1) as usize;
    // Phase tables keep trigonometric calls out of the inner loops.
    let phases = |x: f64, m_max: i64| -> Vec<C64> {
        (-m_max..=m_max)
            .map(|m| C64::from_polar(1.0, omega * m as f64 * x))
            .collect()
    };
    let second: Vec<Vec<C64>> = axes[1].par_iter().map(|&x2| phases(x2, m2_max)).collect();
    let rows: Vec<Vec<DensityValue>> = axes[0]
        .par_iter()
        .map(|&x1| {
            let first = phases(x1, m1_max);
            let mut partial = vec![CompensatedSum::default(); width];
            for &k in &approx.order {
                let m = lattice.point(k);
                let term = approx.coefficients[k] * first[(m[0] + m1_max) as usize];
                partial[(m[1] + m2_max) as usize].add(term);
            }
            let partial: Vec<C64> = partial.iter().map(CompensatedSum::total).collect();
            axes[1]
                .iter()
                .zip(&second)
                .map(|(&x2, table)| {
                    let sum: C64 = partial.iter().zip(table).map(|(p, e)| p * e).sum();
                    finish(approx, &[x1, x2], sum)
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// All points of a tensor grid, last axis fastest.
pub fn tensor_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Exact normal density of `U_T` for an all-Gaussian basket, `None` otherwise.
pub fn gaussian_density(model: &BasketModel, t: TimeHorizon, x: &[f64]) -> Option<f64> {
    use crate::models::LevyExponentSpec::Gaussian;
    let n = model.dim();
    let params = |s: &crate::models::LevyExponentSpec| match *s {
        Gaussian { mu, sigma } => Some((mu, sigma)),
        _ => None,
    };
    let diag: Vec<(f64, f64)> = model.diag().iter().map(params).collect::<Option<_>>()?;
    let coupling: Vec<(f64, f64)> = model.coupling().iter().map(params).collect::<Option<_>>()?;
    if x.len() != n {
        return None;
    }
    let b = model.loadings();
    let ty = t.years();
    let mean: Vec<f64> = (0..n)
        .map(|k| {
            ty * (diag[k].0
                + coupling
                    .iter()
                    .enumerate()
                    .map(|(m, c)| b[k][m] * c.0)
                    .sum::<f64>())
        })
        .collect();
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    let common: f64 = coupling
                        .iter()
                        .enumerate()
                        .map(|(m, c)| b[k][m] * b[l][m] * c.1 * c.1)
                        .sum();
                    ty * (common + if k == l { diag[k].1 * diag[k].1 } else { 0.0 })
                })
                .collect()
        })
        .collect();
    // Cholesky of a positive definite matrix: diagonal terms are non-zero.
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = cov[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= 0.0 {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            l[i][j] = (cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (x[i] - mean[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let log_det: f64 = (0..n).map(|i| l[i][i].ln()).sum();
    let quad: f64 = y.iter().map(|v| v * v).sum();
    Some((-0.5 * quad - log_det - 0.5 * n as f64 * (2.0 * PI).ln()).exp())
}

/// Automatic lattice sizing.
///
/// `ln R = ln(1/ε_target)` bounds the truncated coefficient mass. The box
/// half-width `P/2` covers the spatial offset, the mean and
/// `√(2 ln R)` standard deviations, plus the distance `ln R / rate` over
/// which the damped tails decay by the same factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoGrid {
    pub eps_target: f64,
}

impl Default for AutoGrid {
    fn default() -> Self {
        Self { eps_target: 1e-8 }
    }
}

impl AutoGrid {
    pub fn ln_r(&self) -> Result<f64, DensityError> {
        if !(self.eps_target > 0.0 && self.eps_target < 1.0) {
            return Err(DensityError::InvalidSpec(format!(
                "eps_target must lie in (0, 1), got {}",
                self.eps_target
            )));
        }
        Ok(-self.eps_target.ln())
    }

    /// `rate` is the exponential tail-decay rate in space (infinite for
    /// Gaussian tails); `offset` is an extra shift of the region of interest.
    pub fn pick(
        &self,
        model: &BasketModel,
        t: TimeHorizon,
        overrides: &[Option<f64>],
        rate: f64,
        offset: f64,
    ) -> Result<LatticeSpec, DensityError> {
        let ln_r = self.ln_r()?;
        let (mean, cov) = moments(model, t)?;
        let mean_max = mean.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let std_max = (0..model.dim()).fold(0.0f64, |a, s| a.max(cov[s][s].max(0.0).sqrt()));
        let tail = if rate.is_finite() && rate > 0.0 {
            ln_r / rate
        } else {
            0.0
        };
        let period = 2.0 * (tail + offset.abs() + mean_max + (2.0 * ln_r).sqrt() * std_max);
        let axes = axis_decay(model, overrides)?;
        LatticeSpec::cross_with_axes(period, ln_r, axes, t)
    }

    /// Lattice for plain density recovery: the tail rate is the narrowest
    /// strip half-width of the model.
    pub fn pick_for_density(
        &self,
        model: &BasketModel,
        t: TimeHorizon,
        overrides: &[Option<f64>],
    ) -> Result<LatticeSpec, DensityError> {
        let rate = model
            .strip_lower()
            .iter()
            .zip(model.strip_upper())
            .fold(f64::INFINITY, |a, (lo, hi)| a.min(-lo).min(*hi));
        self.pick(model, t, overrides, rate, 0.0)
    }
}
