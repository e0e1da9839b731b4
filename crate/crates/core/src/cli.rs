//! Command-line front end: JSON configuration, subcommands and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{
    build_density, cross_lattice, eval_density, eval_density_grid, gaussian_density, tensor_points,
    AutoGrid, DensityError, Lattice, LatticeSpec,
};
use crate::martingale::{
    emm_drift_adjust_per_leg, emm_residuals, esscher_theta, EmmPolicy, MartingaleError,
    RisklessRate,
};
use crate::models::{
    axis_decay, BasketModel, LevyExponentSpec, ModelError, TimeHorizon, DEFAULT_STRIP_FRACTION,
};
use crate::payoff::{DampingVector, PayoffError};
use crate::pricer::{
    black_scholes_call, margrabe_exchange, monte_carlo_oracle, prepare, price,
    quadrature_price_oracle, GbmParams, GridChoice, PricingError, PricingOptions, SpreadContract,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Numeric(_) => EXIT_NUMERIC,
            Self::Budget(_) => EXIT_BUDGET,
        }
    }
}

fn density_error(e: DensityError) -> CliError {
    match e {
        DensityError::Budget { .. } => CliError::Budget(e.to_string()),
        other => CliError::Numeric(other.to_string()),
    }
}

fn pricing_error(e: PricingError) -> CliError {
    match e {
        PricingError::Density(d) => density_error(d),
        other => CliError::Numeric(other.to_string()),
    }
}

impl From<MartingaleError> for CliError {
    fn from(e: MartingaleError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "levy-spread",
    version,
    about = "Fourier pricing of spread options under multivariate Lévy models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price the configured spread contract.
    Price(CommonArgs),
    /// Evaluate the recovered density on the configured grid.
    Density(DensityArgs),
    /// Re-set drifts to the martingale condition and report Esscher parameters.
    CalibrateEmm(CommonArgs),
    /// Run the applicable closed-form, Monte Carlo and quadrature parity checks.
    Validate(CommonArgs),
    /// Dump the truncation lattice, one integer vector per line.
    Lattice(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 selects automatically, 1 is serial.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Same as `--threads 1`.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also write the lattice to this path.
    #[arg(long)]
    pub lattice_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub contract: ContractConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub pricing: PricingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub diag: Vec<LevyExponentSpec>,
    #[serde(default)]
    pub coupling: Vec<LevyExponentSpec>,
    /// `n × q` non-negative loadings; omitted when there is no coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loadings: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_strip_fraction")]
    pub strip_fraction: f64,
}

fn default_strip_fraction() -> f64 {
    DEFAULT_STRIP_FRACTION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractConfig {
    pub spot: Vec<f64>,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
    /// Per-leg rates for the martingale condition; defaults to `rate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg_rates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    Auto {
        #[serde(default = "default_eps_target")]
        eps_target: f64,
        #[serde(default)]
        decay_overrides: Vec<Option<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lattice_cap: Option<usize>,
    },
    Manual {
        period: f64,
        ln_r: f64,
        #[serde(default)]
        decay_overrides: Vec<Option<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lattice_cap: Option<usize>,
    },
    Square {
        period: f64,
        half_width: u32,
    },
}

fn default_eps_target() -> f64 {
    AutoGrid::default().eps_target
}

impl Default for GridConfig {
    fn default() -> Self {
        Self::Auto {
            eps_target: default_eps_target(),
            decay_overrides: Vec::new(),
            lattice_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmmPolicyConfig {
    #[default]
    AutoAdjust,
    Strict,
}

impl From<EmmPolicyConfig> for EmmPolicy {
    fn from(p: EmmPolicyConfig) -> Self {
        match p {
            EmmPolicyConfig::AutoAdjust => EmmPolicy::AutoAdjust,
            EmmPolicyConfig::Strict => EmmPolicy::Strict,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub emm_policy: EmmPolicyConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub axes: Vec<AxisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    /// Apply the martingale drift adjustment before recovering the density.
    #[serde(default)]
    pub adjust_emm: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_paths")]
    pub mc_paths: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tolerance: f64,
    #[serde(default = "default_se_multiple")]
    pub se_multiple: f64,
}

fn default_paths() -> usize {
    1_000_000
}

fn default_rel_tol() -> f64 {
    1e-3
}

fn default_se_multiple() -> f64 {
    3.0
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            mc_paths: default_paths(),
            rel_tolerance: default_rel_tol(),
            se_multiple: default_se_multiple(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
        }
    }
}

/// Parse a configuration, reporting the JSON path of any schema error.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("config field `{path}`: {}", e.into_inner()))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

fn config_err(path: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config field `{path}`: {e}"))
}

/// Validated inputs built from a configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: BasketModel,
    pub contract: SpreadContract,
    pub rates: Vec<RisklessRate>,
    pub eps: Option<DampingVector>,
    pub policy: EmmPolicy,
}

impl RunConfig {
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let n = self.model.diag.len();
        if n == 0 {
            return Err(config_err(
                "model.diag",
                "at least one component is required",
            ));
        }
        for (s, spec) in self.model.diag.iter().enumerate() {
            spec.validate()
                .map_err(|e| config_err(&format!("model.diag[{s}]"), e))?;
        }
        for (m, spec) in self.model.coupling.iter().enumerate() {
            spec.validate()
                .map_err(|e| config_err(&format!("model.coupling[{m}]"), e))?;
        }
        let q = self.model.coupling.len();
        let loadings = match &self.model.loadings {
            Some(b) => b.clone(),
            None if q == 0 => vec![Vec::new(); n],
            None => {
                return Err(config_err(
                    "model.loadings",
                    format!("required: an {n}x{q} matrix"),
                ))
            }
        };
        if loadings.len() != n {
            return Err(config_err(
                "model.loadings",
                format!("expected {n} rows, got {}", loadings.len()),
            ));
        }
        for (k, row) in loadings.iter().enumerate() {
            if row.len() != q {
                return Err(config_err(
                    &format!("model.loadings[{k}]"),
                    format!("expected {q} entries, got {}", row.len()),
                ));
            }
            if let Some(m) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(config_err(
                    &format!("model.loadings[{k}][{m}]"),
                    "must be finite and non-negative",
                ));
            }
        }
        let model = BasketModel::with_strip_fraction(
            self.model.diag.clone(),
            self.model.coupling.clone(),
            loadings,
            self.model.strip_fraction,
        )
        .map_err(|e| config_err("model", e))?;

        let c = &self.contract;
        if c.spot.len() != n {
            return Err(config_err(
                "contract.spot",
                format!("expected {n} entries, got {}", c.spot.len()),
            ));
        }
        let contract = SpreadContract::new(c.spot.clone(), c.strike, c.maturity, c.rate)
            .map_err(|e| config_err("contract", e))?;
        let rates = match &c.leg_rates {
            Some(v) if v.len() != n => {
                return Err(config_err(
                    "contract.leg_rates",
                    format!("expected {n} entries, got {}", v.len()),
                ))
            }
            Some(v) => v
                .iter()
                .enumerate()
                .map(|(s, &r)| {
                    RisklessRate::new(r)
                        .map_err(|e| config_err(&format!("contract.leg_rates[{s}]"), e))
                })
                .collect::<Result<_, _>>()?,
            None => vec![contract.rate(); n],
        };
        let eps = match &self.pricing.eps {
            Some(v) => {
                Some(DampingVector::new(v.clone()).map_err(|e| config_err("pricing.eps", e))?)
            }
            None => None,
        };
        if let Some(v) = eps.as_ref().filter(|v| v.dim() != n) {
            return Err(config_err(
                "pricing.eps",
                format!("expected {n} entries, got {}", v.dim()),
            ));
        }
        self.check_grid(n)?;
        if let Some(d) = &self.density {
            if d.axes.len() != n {
                return Err(config_err(
                    "density.axes",
                    format!("expected {n} axes, got {}", d.axes.len()),
                ));
            }
            for (s, a) in d.axes.iter().enumerate() {
                if a.points == 0 || !a.start.is_finite() || !a.stop.is_finite() {
                    return Err(config_err(
                        &format!("density.axes[{s}]"),
                        "needs finite bounds and at least one point",
                    ));
                }
            }
            if let Some(shift) = &d.shift {
                if shift.len() != n {
                    return Err(config_err(
                        "density.shift",
                        format!("expected {n} entries, got {}", shift.len()),
                    ));
                }
            }
        }
        if self.validate.mc_paths < 2 {
            return Err(config_err("validate.mc_paths", "need at least two paths"));
        }
        Ok(Prepared {
            model,
            contract,
            rates,
            eps,
            policy: self.pricing.emm_policy.into(),
        })
    }

    fn check_grid(&self, n: usize) -> Result<(), CliError> {
        let overrides_ok = |v: &Vec<Option<f64>>| -> Result<(), CliError> {
            if !v.is_empty() && v.len() != n {
                return Err(config_err(
                    "grid.decay_overrides",
                    format!("expected {n} entries, got {}", v.len()),
                ));
            }
            if let Some(s) = v
                .iter()
                .position(|c| c.is_some_and(|c| !(c > 0.0 && c.is_finite())))
            {
                return Err(config_err(
                    &format!("grid.decay_overrides[{s}]"),
                    "must be positive",
                ));
            }
            Ok(())
        };
        match &self.grid {
            GridConfig::Auto {
                eps_target,
                decay_overrides,
                ..
            } => {
                if !(*eps_target > 0.0 && *eps_target < 1.0) {
                    return Err(config_err("grid.eps_target", "must lie in (0, 1)"));
                }
                overrides_ok(decay_overrides)
            }
            GridConfig::Manual {
                period,
                ln_r,
                decay_overrides,
                ..
            } => {
                if !(*period > 0.0 && period.is_finite()) {
                    return Err(config_err("grid.period", "must be positive"));
                }
                if !(*ln_r >= 0.0 && ln_r.is_finite()) {
                    return Err(config_err("grid.ln_r", "must be non-negative"));
                }
                overrides_ok(decay_overrides)
            }
            GridConfig::Square { period, .. } => {
                if !(*period > 0.0 && period.is_finite()) {
                    return Err(config_err("grid.period", "must be positive"));
                }
                Ok(())
            }
        }
    }

    fn overrides(&self) -> Vec<Option<f64>> {
        match &self.grid {
            GridConfig::Auto {
                decay_overrides, ..
            }
            | GridConfig::Manual {
                decay_overrides, ..
            } => decay_overrides.clone(),
            GridConfig::Square { .. } => Vec::new(),
        }
    }

    fn cap(&self) -> Option<usize> {
        match &self.grid {
            GridConfig::Auto { lattice_cap, .. } | GridConfig::Manual { lattice_cap, .. } => {
                *lattice_cap
            }
            GridConfig::Square { .. } => None,
        }
    }

    /// A fixed lattice, or `None` in auto mode.
    fn fixed_lattice(
        &self,
        model: &BasketModel,
        t: TimeHorizon,
    ) -> Result<Option<LatticeSpec>, CliError> {
        let spec = match &self.grid {
            GridConfig::Auto { .. } => return Ok(None),
            GridConfig::Manual { period, ln_r, .. } => {
                let axes = axis_decay(model, &self.overrides())
                    .map_err(|e| config_err("grid.decay_overrides", e))?;
                LatticeSpec::cross_with_axes(*period, *ln_r, axes, t)
                    .map_err(|e| config_err("grid", e))?
            }
            GridConfig::Square { period, half_width } => {
                LatticeSpec::square(*period, model.dim(), *half_width, t)
                    .map_err(|e| config_err("grid", e))?
            }
        };
        Ok(Some(self.apply_cap(spec)))
    }

    fn apply_cap(&self, spec: LatticeSpec) -> LatticeSpec {
        match self.cap() {
            Some(cap) => spec.with_cap(cap),
            None => spec,
        }
    }

    fn pricing_options(&self, prepared: &Prepared) -> Result<PricingOptions, CliError> {
        let t = prepared.contract.maturity();
        let grid = match self.fixed_lattice(&prepared.model, t)? {
            Some(spec) => GridChoice::Fixed(spec),
            None => {
                let GridConfig::Auto { eps_target, .. } = self.grid else {
                    unreachable!("fixed grids handled above")
                };
                GridChoice::Auto(AutoGrid { eps_target })
            }
        };
        Ok(PricingOptions {
            grid,
            eps: prepared.eps.clone(),
            policy: prepared.policy,
            decay_overrides: self.overrides(),
            lattice_cap: self.cap(),
        })
    }

    /// Lattice used by the pricer for this configuration.
    fn pricing_lattice(&self, prepared: &Prepared) -> Result<LatticeSpec, CliError> {
        let options = self.pricing_options(prepared)?;
        let (_, _, spec) =
            prepare(&prepared.contract, &prepared.model, &options).map_err(pricing_error)?;
        Ok(spec)
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Numeric(format!("cannot write stdout: {e}")))
        }
    }
}

fn configure_threads(args: &CommonArgs) {
    let threads = if args.serial { 1 } else { args.threads };
    if threads > 0 {
        // Fails only when a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

pub fn cmd_price(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let prepared = config.prepare()?;
    let options = config.pricing_options(&prepared)?;
    let result = price(&prepared.contract, &prepared.model, &options).map_err(pricing_error)?;
    let csv = format!(
        "value,imag_residue,lattice_size,tail_bound,trunc_bound\n{},{},{},{},{}\n",
        fmt_f64(result.value),
        fmt_f64(result.imag_residue),
        result.lattice_size,
        fmt_f64(result.bounds.tail_bound),
        fmt_f64(result.bounds.trunc_bound)
    );
    write_output(args.out.as_deref(), &csv)?;
    eprintln!(
        "price {:.10} (imaginary residue {:.3e}); {} lattice points, period {:.6}, ln R {}, damping {:?}",
        result.value,
        result.imag_residue,
        result.lattice_size,
        result.period,
        result.ln_r.map_or("n/a".to_string(), |v| format!("{v:.6}")),
        result.eps
    );
    Ok(())
}

fn linspace(a: &crate::cli::AxisConfig) -> Vec<f64> {
    if a.points == 1 {
        return vec![a.start];
    }
    let step = (a.stop - a.start) / (a.points - 1) as f64;
    (0..a.points).map(|k| a.start + k as f64 * step).collect()
}

fn lattice_text(lattice: &Lattice) -> String {
    let mut text = String::new();
    for m in lattice.iter() {
        let row: Vec<String> = m.iter().map(i64::to_string).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

pub fn cmd_density(args: &DensityArgs) -> Result<(), CliError> {
    let config = load_config(&args.common.config)?;
    let prepared = config.prepare()?;
    let Some(dconf) = &config.density else {
        return Err(config_err(
            "density",
            "section required by the density command",
        ));
    };
    let t = prepared.contract.maturity();
    let model = if dconf.adjust_emm {
        emm_drift_adjust_per_leg(&prepared.model, &prepared.rates)?
    } else {
        if let Ok(res) = emm_residuals(&prepared.model, &prepared.rates, t) {
            if res.iter().any(|r| *r >= crate::martingale::EMM_TOLERANCE) {
                log::warn!("model is not risk neutral; the density is under the configured drifts");
            }
        }
        prepared.model.clone()
    };
    let spec = match config.fixed_lattice(&model, t)? {
        Some(spec) => spec,
        None => {
            let GridConfig::Auto { eps_target, .. } = config.grid else {
                unreachable!("fixed grids handled above")
            };
            let spec = AutoGrid { eps_target }
                .pick_for_density(&model, t, &config.overrides())
                .map_err(density_error)?;
            config.apply_cap(spec)
        }
    };
    let approx = build_density(&model, &spec, dconf.shift.as_deref()).map_err(density_error)?;
    if let Some(path) = &args.lattice_dump {
        fs::write(path, lattice_text(approx.lattice()))
            .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))?;
    }
    let axes: Vec<Vec<f64>> = dconf.axes.iter().map(linspace).collect();
    let points = tensor_points(&axes);
    let values = if points.len() > 1 {
        eval_density_grid(&approx, &axes).map_err(density_error)?
    } else {
        points.iter().map(|x| eval_density(&approx, x)).collect()
    };
    let n = model.dim();
    let closed = model.is_gaussian();
    let mut header: Vec<String> = (1..=n).map(|s| format!("x{s}")).collect();
    header.extend(["density", "residue", "outside_box"].map(String::from));
    if closed {
        header.push("closed_form".into());
    }
    let mut text = header.join(",");
    text.push('\n');
    for (x, v) in points.iter().zip(&values) {
        let mut row: Vec<String> = x.iter().map(|&c| fmt_f64(c)).collect();
        row.push(fmt_f64(v.value));
        row.push(fmt_f64(v.residue));
        row.push(u8::from(v.outside_box).to_string());
        if closed {
            row.push(fmt_f64(gaussian_density(&model, t, x).unwrap_or(f64::NAN)));
        }
        let _ = writeln!(text, "{}", row.join(","));
    }
    write_output(args.common.out.as_deref(), &text)?;
    eprintln!(
        "density on {} points from {} lattice coefficients (period {:.6})",
        points.len(),
        approx.lattice().len(),
        spec.period()
    );
    Ok(())
}

pub fn cmd_calibrate_emm(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let prepared = config.prepare()?;
    let adjusted = emm_drift_adjust_per_leg(&prepared.model, &prepared.rates)?;
    let t = prepared.contract.maturity();
    let residuals = emm_residuals(&adjusted, &prepared.rates, t)?;
    let mut report = String::from(
        "component,kind,drift_before,drift_after,emm_residual,esscher_theta,esscher_residual\n",
    );
    for (s, (before, after)) in prepared
        .model
        .diag()
        .iter()
        .zip(adjusted.diag())
        .enumerate()
    {
        let (theta, res) = match esscher_theta(before, prepared.rates[s]) {
            Ok(sol) => (fmt_f64(sol.theta), fmt_f64(sol.residual)),
            Err(e) => {
                log::info!("component {s}: no Esscher parameter: {e}");
                ("nan".to_string(), "nan".to_string())
            }
        };
        let _ = writeln!(
            report,
            "{s},{},{},{},{},{theta},{res}",
            before.kind_name(),
            fmt_f64(before.drift()),
            fmt_f64(after.drift()),
            fmt_f64(residuals[s])
        );
    }
    print!("{report}");
    let mut copy = config.clone();
    copy.model.diag = adjusted.diag().to_vec();
    let json = serde_json::to_string_pretty(&copy).map_err(|e| CliError::Numeric(e.to_string()))?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.config.with_extension("emm.json"));
    fs::write(&out, json + "\n")
        .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", out.display())))?;
    eprintln!("adjusted configuration written to {}", out.display());
    Ok(())
}

/// One line of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityRow {
    pub check: &'static str,
    pub fourier: f64,
    pub oracle: f64,
    pub std_error: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

fn relative_row(check: &'static str, fourier: f64, oracle: f64, tol: f64) -> ParityRow {
    let pass = (fourier - oracle).abs() <= tol * oracle.abs().max(1e-12);
    ParityRow {
        check,
        fourier,
        oracle,
        std_error: None,
        tolerance: tol,
        pass,
    }
}

fn se_row(check: &'static str, fourier: f64, oracle: f64, se: f64, multiple: f64) -> ParityRow {
    ParityRow {
        check,
        fourier,
        oracle,
        std_error: Some(se),
        tolerance: multiple,
        pass: (fourier - oracle).abs() <= multiple * se,
    }
}

/// Run every parity check applicable to the configuration.
pub fn validation_rows(config: &RunConfig, seed: u64) -> Result<Vec<ParityRow>, CliError> {
    let prepared = config.prepare()?;
    let model = &prepared.model;
    let contract = &prepared.contract;
    let n = model.dim();
    let v = &config.validate;
    let options = config.pricing_options(&prepared)?;
    let mut rows = Vec::new();
    let fourier = price(contract, model, &options)
        .map_err(pricing_error)?
        .value;

    if model.is_gaussian() {
        let gbm = GbmParams::from_model(model).map_err(pricing_error)?;
        let cov = gbm.covariance().to_vec();
        let t = contract.maturity().years();
        let r = contract.rate().value();

        // Leg-one marginal against the closed form.
        let sigma1 = cov[0][0].sqrt();
        let one_leg = BasketModel::independent(vec![LevyExponentSpec::Gaussian {
            mu: 0.0,
            sigma: sigma1,
        }])
        .map_err(|e| CliError::Numeric(e.to_string()))?;
        let strike = if contract.strike() > 0.0 {
            contract.strike()
        } else {
            contract.spot()[0]
        };
        let call =
            SpreadContract::new(vec![contract.spot()[0]], strike, t, r).map_err(pricing_error)?;
        let call_options = PricingOptions {
            grid: GridChoice::Auto(AutoGrid::default()),
            ..PricingOptions::default()
        };
        let bs_fourier = price(&call, &one_leg, &call_options)
            .map_err(pricing_error)?
            .value;
        let bs =
            black_scholes_call(contract.spot()[0], strike, t, r, sigma1).map_err(pricing_error)?;
        rows.push(relative_row("bs", bs_fourier, bs, v.rel_tolerance));

        if n == 2 {
            let (s1, s2) = (cov[0][0].sqrt(), cov[1][1].sqrt());
            let rho = if s1 > 0.0 && s2 > 0.0 {
                cov[0][1] / (s1 * s2)
            } else {
                0.0
            };
            let exchange = margrabe_exchange(
                contract.spot()[0],
                contract.spot()[1],
                t,
                s1,
                s2,
                rho,
                0.0,
                0.0,
            )
            .map_err(pricing_error)?;
            let k0 = contract.with_strike(0.0).map_err(pricing_error)?;
            let mc = monte_carlo_oracle(&k0, &gbm, v.mc_paths, seed).map_err(pricing_error)?;
            rows.push(se_row(
                "margrabe",
                exchange,
                mc.mean,
                mc.std_error,
                v.se_multiple,
            ));
        }
        let mc = monte_carlo_oracle(contract, &gbm, v.mc_paths, seed).map_err(pricing_error)?;
        rows.push(se_row(
            "monte_carlo",
            fourier,
            mc.mean,
            mc.std_error,
            v.se_multiple,
        ));
    }
    if n <= 2 {
        let t = contract.maturity();
        let adjusted = emm_drift_adjust_per_leg(model, &vec![contract.rate(); n])?;
        let spec = AutoGrid::default()
            .pick_for_density(&adjusted, t, &config.overrides())
            .map_err(density_error)?;
        let quad = quadrature_price_oracle(contract, model, &spec).map_err(pricing_error)?;
        rows.push(relative_row("quadrature", fourier, quad, v.rel_tolerance));
    }
    Ok(rows)
}

pub fn cmd_validate(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(config.output.seed);
    let rows = validation_rows(&config, seed)?;
    let mut text = String::from("check,fourier,oracle,std_error,tolerance,pass\n");
    for row in &rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            row.check,
            fmt_f64(row.fourier),
            fmt_f64(row.oracle),
            row.std_error.map_or(String::new(), fmt_f64),
            fmt_f64(row.tolerance),
            if row.pass { "pass" } else { "fail" }
        );
    }
    write_output(args.out.as_deref(), &text)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "parity checks failed: {}",
            failed.join(", ")
        )))
    }
}

pub fn cmd_lattice(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let prepared = config.prepare()?;
    let spec = match config.fixed_lattice(&prepared.model, prepared.contract.maturity())? {
        Some(spec) => spec,
        None => config.pricing_lattice(&prepared)?,
    };
    let lattice = cross_lattice(&spec).map_err(density_error)?;
    write_output(args.out.as_deref(), &lattice_text(&lattice))?;
    eprintln!("{} lattice points", lattice.len());
    Ok(())
}

/// Run a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let common = match &cli.command {
        Command::Price(a)
        | Command::CalibrateEmm(a)
        | Command::Validate(a)
        | Command::Lattice(a) => a,
        Command::Density(a) => &a.common,
    };
    configure_threads(common);
    let result = match &cli.command {
        Command::Price(a) => cmd_price(a),
        Command::Density(a) => cmd_density(a),
        Command::CalibrateEmm(a) => cmd_calibrate_emm(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Lattice(a) => cmd_lattice(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error_code={code} {e}");
            code
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<PayoffError> for CliError {
    fn from(e: PayoffError) -> Self {
        CliError::Numeric(e.to_string())
    }
}
