//! Run configuration: TOML file plus command-line overrides.
//!
//! The file is fully validated — including kernel shape-parameter
//! domains — before any data file is opened, so a bad configuration
//! never pays for a data pass. Unknown keys are rejected outright.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qlsarma::{FitConfig, KernelFamily, KernelKind, ModelSpec, ParamVector};

use crate::error::{CliError, CliResult};

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "QLSARMA_OUT_DIR";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub forecast: Option<ForecastSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_kernel")]
    pub kernel: String,
    /// First kernel shape parameter, when the family takes one.
    pub extra: Option<f64>,
    /// Second kernel shape parameter (contaminated-normal, ebs-t).
    pub extra2: Option<f64>,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub q: usize,
    pub tau_level: Option<f64>,
    pub tau_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub mean_covariates: Vec<String>,
    #[serde(default)]
    pub disp_covariates: Vec<String>,
    #[serde(default = "default_link")]
    pub mean_link: String,
    #[serde(default = "default_link")]
    pub disp_link: String,
}

fn default_kernel() -> String {
    "normal".into()
}

fn default_link() -> String {
    "log".into()
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kernel: default_kernel(),
            extra: None,
            extra2: None,
            p: 0,
            q: 0,
            tau_level: None,
            tau_grid: None,
            mean_covariates: Vec::new(),
            disp_covariates: Vec::new(),
            mean_link: default_link(),
            disp_link: default_link(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Response column; defaults to the first non-date column.
    pub response: Option<String>,
    /// Label column echoed into outputs, never used numerically.
    pub date_column: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "d_step_tol")]
    pub step_tol: f64,
    #[serde(default = "d_multistart")]
    pub multistart: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
}

fn d_max_iters() -> usize {
    FitConfig::default().max_iters
}
fn d_grad_tol() -> f64 {
    FitConfig::default().grad_tol
}
fn d_step_tol() -> f64 {
    FitConfig::default().step_tol
}
fn d_multistart() -> usize {
    FitConfig::default().multistart
}
fn d_seed() -> u64 {
    FitConfig::default().seed
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            max_iters: d_max_iters(),
            grad_tol: d_grad_tol(),
            step_tol: d_step_tol(),
            multistart: d_multistart(),
            seed: d_seed(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSection {
    pub horizon: usize,
    /// `[τ_lo, τ_hi]` band levels.
    pub interval: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub beta: Vec<f64>,
    pub tau_coefs: Vec<f64>,
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
}

impl TruthSection {
    pub fn to_params(&self) -> ParamVector {
        ParamVector {
            beta: nalgebra::DVector::from_vec(self.beta.clone()),
            tau_coefs: nalgebra::DVector::from_vec(self.tau_coefs.clone()),
            phi: nalgebra::DVector::from_vec(self.phi.clone()),
            theta: nalgebra::DVector::from_vec(self.theta.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    pub truth: TruthSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub kind: String,
    pub extra: Option<f64>,
    pub extra2: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    /// Kernels to run side by side; defaults to the `[model]` kernel.
    #[serde(default)]
    pub kernels: Vec<KernelSection>,
    pub n_grid: Vec<usize>,
    pub tau_grid: Vec<f64>,
    pub replications: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    pub truth: TruthSection,
}

/// Command-line overrides mirroring the configuration keys.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonOpts {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernel family: normal, student-t, power-exponential, hyperbolic,
    /// slash, contaminated-normal, ebs, ebs-t.
    #[arg(long)]
    pub kernel: Option<String>,
    /// First kernel shape parameter.
    #[arg(long)]
    pub extra: Option<f64>,
    /// Second kernel shape parameter.
    #[arg(long)]
    pub extra2: Option<f64>,
    /// Autoregressive order.
    #[arg(long)]
    pub p: Option<usize>,
    /// Moving-average order.
    #[arg(long)]
    pub q: Option<usize>,
    /// Quantile level in (0, 1).
    #[arg(long)]
    pub tau_level: Option<f64>,
    /// Comma-separated quantile levels for a profile fit.
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    /// Comma-separated mean-submodel covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub mean_covariates: Option<Vec<String>>,
    /// Comma-separated dispersion-submodel covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub disp_covariates: Option<Vec<String>>,
    /// Response column name.
    #[arg(long)]
    pub response: Option<String>,
    /// Date/label column, echoed into outputs.
    #[arg(long)]
    pub date_column: Option<String>,
    /// Optimizer iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Gradient sup-norm tolerance.
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Step-size floor.
    #[arg(long)]
    pub step_tol: Option<f64>,
    /// Number of optimizer starts.
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forecast horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated band levels, e.g. 0.025,0.975.
    #[arg(long, value_delimiter = ',')]
    pub interval: Option<Vec<f64>>,
    /// Output directory (default: $QLSARMA_OUT_DIR or the working dir).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Loads the file (when given), applies flag overrides, and runs
    /// the compute-free validation pass.
    pub fn resolve(opts: &CommonOpts) -> CliResult<Self> {
        let mut cfg = match &opts.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply(opts);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }

    fn apply(&mut self, o: &CommonOpts) {
        if let Some(v) = &o.kernel {
            self.model.kernel = v.clone();
        }
        if let Some(v) = o.extra {
            self.model.extra = Some(v);
        }
        if let Some(v) = o.extra2 {
            self.model.extra2 = Some(v);
        }
        if let Some(v) = o.p {
            self.model.p = v;
        }
        if let Some(v) = o.q {
            self.model.q = v;
        }
        if let Some(v) = o.tau_level {
            self.model.tau_level = Some(v);
        }
        if let Some(v) = &o.tau_grid {
            self.model.tau_grid = Some(v.clone());
        }
        if let Some(v) = &o.mean_covariates {
            self.model.mean_covariates = v.clone();
        }
        if let Some(v) = &o.disp_covariates {
            self.model.disp_covariates = v.clone();
        }
        if let Some(v) = &o.response {
            self.data.response = Some(v.clone());
        }
        if let Some(v) = &o.date_column {
            self.data.date_column = Some(v.clone());
        }
        if let Some(v) = o.max_iters {
            self.fit.max_iters = v;
        }
        if let Some(v) = o.grad_tol {
            self.fit.grad_tol = v;
        }
        if let Some(v) = o.step_tol {
            self.fit.step_tol = v;
        }
        if let Some(v) = o.multistart {
            self.fit.multistart = v;
        }
        if let Some(v) = o.seed {
            self.fit.seed = v;
        }
        if o.horizon.is_some() || o.interval.is_some() {
            let fc = self.forecast.get_or_insert(ForecastSection {
                horizon: 0,
                interval: None,
            });
            if let Some(h) = o.horizon {
                fc.horizon = h;
            }
            if let Some(iv) = &o.interval {
                fc.interval = Some(iv.clone());
            }
        }
        if let Some(v) = &o.out_dir {
            self.output.dir = Some(v.clone());
        }
    }

    /// Everything checkable without touching data files.
    fn validate(&self) -> CliResult<()> {
        self.kernel()?;
        for link in [&self.model.mean_link, &self.model.disp_link] {
            if link != "log" {
                return Err(CliError::Input(format!(
                    "unsupported link '{link}': only 'log' is available"
                )));
            }
        }
        if let Some(grid) = &self.model.tau_grid {
            if grid.is_empty() {
                return Err(CliError::Input("tau_grid must not be empty".into()));
            }
            for t in grid {
                check_tau(*t)?;
            }
        }
        if let Some(t) = self.model.tau_level {
            check_tau(t)?;
        }
        self.fit_config()
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        if let Some(fc) = &self.forecast {
            if let Some(iv) = &fc.interval {
                if iv.len() != 2 || !(0.0 < iv[0] && iv[0] < iv[1] && iv[1] < 1.0) {
                    return Err(CliError::Input(format!(
                        "interval must be two levels with 0 < lo < hi < 1, got {iv:?}"
                    )));
                }
            }
        }
        if let Some(mc) = &self.montecarlo {
            for k in &mc.kernels {
                kernel_from(&k.kind, k.extra, k.extra2)?;
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> CliResult<KernelFamily> {
        kernel_from(&self.model.kernel, self.model.extra, self.model.extra2)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            max_iters: self.fit.max_iters,
            grad_tol: self.fit.grad_tol,
            step_tol: self.fit.step_tol,
            multistart: self.fit.multistart,
            seed: self.fit.seed,
        }
    }

    /// Levels for a (possibly single-entry) profile fit.
    pub fn tau_levels(&self) -> CliResult<Vec<f64>> {
        match (&self.model.tau_grid, self.model.tau_level) {
            (Some(grid), _) => Ok(grid.clone()),
            (None, Some(level)) => Ok(vec![level]),
            (None, None) => Err(CliError::Input(
                "set tau_level (or tau_grid) in [model] or via --tau-level".into(),
            )),
        }
    }

    /// The unique level commands like forecast/residuals require.
    pub fn single_tau(&self) -> CliResult<f64> {
        let levels = self.tau_levels()?;
        if levels.len() != 1 {
            return Err(CliError::Input(format!(
                "this command needs exactly one quantile level, got {}",
                levels.len()
            )));
        }
        Ok(levels[0])
    }

    pub fn model_spec(&self, tau: f64) -> CliResult<ModelSpec> {
        let kernel = self.kernel()?;
        ModelSpec::new(
            self.model.p,
            self.model.q,
            self.model.mean_covariates.len(),
            self.model.disp_covariates.len(),
            tau,
            kernel,
        )
        .map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output.dir {
            return dir.clone();
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(".")
    }
}

fn check_tau(t: f64) -> CliResult<()> {
    if !(0.0 < t && t < 1.0) {
        return Err(CliError::Input(format!(
            "quantile level must lie strictly inside (0, 1), got {t}"
        )));
    }
    Ok(())
}

/// Builds a validated kernel from its report name and shape parameters.
pub fn kernel_from(name: &str, extra: Option<f64>, extra2: Option<f64>) -> CliResult<KernelFamily> {
    let kind = match name {
        "normal" => KernelKind::Normal,
        "student-t" => KernelKind::StudentT,
        "power-exponential" => KernelKind::PowerExponential,
        "hyperbolic" => KernelKind::Hyperbolic,
        "slash" => KernelKind::Slash,
        "contaminated-normal" => KernelKind::ContaminatedNormal,
        "ebs" => KernelKind::ExtendedBirnbaumSaunders,
        "ebs-t" => KernelKind::ExtendedBirnbaumSaundersT,
        other => {
            return Err(CliError::Input(format!(
                "unknown kernel '{other}'; expected one of normal, student-t, \
                 power-exponential, hyperbolic, slash, contaminated-normal, ebs, ebs-t"
            )));
        }
    };
    let extras: Vec<f64> = match (extra, extra2) {
        (None, None) => vec![],
        (Some(a), None) => vec![a],
        (Some(a), Some(b)) => vec![a, b],
        (None, Some(_)) => {
            return Err(CliError::Input(
                "extra2 given without extra; shape parameters fill in order".into(),
            ));
        }
    };
    KernelFamily::new(kind, &extras).map_err(|e| CliError::Input(e.to_string()))
}
