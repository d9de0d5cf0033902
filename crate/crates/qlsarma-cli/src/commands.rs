//! The five subcommand drivers. Each resolves configuration first (so
//! config mistakes never pay for a data pass), then loads data, runs
//! the library, and serializes plot-ready tables plus a key/value
//! summary into the output directory.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlsarma::{
    CovariateLaw, DesignData, EnvelopeTarget, FitResult, ForecastRequest, LikelihoodContext,
    McDesign, McReport, ModelSpec, StandardKernel, fit, fit_profile, forecast_metrics,
    forecast_with_intervals, qq_envelope, residuals, simulate_series,
};

use crate::config::{CommonOpts, KernelSection, RunConfig, kernel_from};
use crate::data::SeriesFile;
use crate::error::{CliError, CliResult};
use crate::report::{num, opt_num, out_path, write_summary, write_table};

/// Human- and machine-readable labels in packed coefficient order.
fn parameter_labels(spec: &ModelSpec, mean_cov: &[String], disp_cov: &[String]) -> Vec<String> {
    let mut labels = Vec::with_capacity(spec.n_params());
    labels.push("beta0".to_owned());
    for (j, name) in mean_cov.iter().enumerate() {
        labels.push(format!("beta{}({})", j + 1, name));
    }
    labels.push("tau0".to_owned());
    for (j, name) in disp_cov.iter().enumerate() {
        labels.push(format!("tau{}({})", j + 1, name));
    }
    for i in 1..=spec.p {
        labels.push(format!("phi{i}"));
    }
    for j in 1..=spec.q {
        labels.push(format!("theta{j}"));
    }
    labels
}

fn load_design(cfg: &RunConfig, series_path: &Path) -> CliResult<(SeriesFile, DesignData, String)> {
    let file = SeriesFile::load(series_path, cfg.data.date_column.as_deref())?;
    let (resp_name, y) = file.response(cfg.data.response.as_deref())?;
    let x = file.design_matrix(&cfg.model.mean_covariates)?;
    let w = file.design_matrix(&cfg.model.disp_covariates)?;
    let data = DesignData::new(y, x, w).map_err(|e| CliError::Input(e.to_string()))?;
    Ok((file, data, resp_name))
}

fn model_header(cfg: &RunConfig, resp: &str, n: usize) -> Vec<(String, String)> {
    let mut pairs = vec![
        ("kernel".to_owned(), cfg.model.kernel.clone()),
        ("p".to_owned(), cfg.model.p.to_string()),
        ("q".to_owned(), cfg.model.q.to_string()),
        ("response".to_owned(), resp.to_owned()),
        ("n".to_owned(), n.to_string()),
        (
            "mean_covariates".to_owned(),
            cfg.model.mean_covariates.join(","),
        ),
        (
            "disp_covariates".to_owned(),
            cfg.model.disp_covariates.join(","),
        ),
        ("seed".to_owned(), cfg.fit.seed.to_string()),
    ];
    if let Some(e) = cfg.model.extra {
        pairs.insert(1, ("extra".to_owned(), num(e)));
    }
    if let Some(e) = cfg.model.extra2 {
        pairs.insert(2, ("extra2".to_owned(), num(e)));
    }
    pairs
}

pub fn cmd_fit(opts: &CommonOpts, series_path: &Path) -> CliResult<()> {
    let cfg = RunConfig::resolve(opts)?;
    let levels = cfg.tau_levels()?;
    let spec = cfg.model_spec(levels[0])?;
    let kernel = StandardKernel::new(spec.kernel.clone())?;
    let (file, data, resp_name) = load_design(&cfg, series_path)?;
    let labels = parameter_labels(&spec, &cfg.model.mean_covariates, &cfg.model.disp_covariates);

    let profile = fit_profile(&spec, &data, &kernel, &cfg.fit_config(), &levels)?;
    let dir = cfg.out_dir();

    let mut estimate_rows = Vec::new();
    let mut criteria_rows = Vec::new();
    let mut fitted_rows = Vec::new();
    let mut summary = model_header(&cfg, &resp_name, data.n());
    let mut failures: Vec<String> = Vec::new();
    for entry in &profile {
        let tau = num(entry.tau);
        match &entry.fit {
            Err(e) => {
                failures.push(format!("τ = {}: {e}", entry.tau));
                summary.push((format!("fit[{tau}]"), format!("failed: {e}")));
            }
            Ok(fit_result) => {
                let packed = fit_result.params.pack();
                for (j, label) in labels.iter().enumerate() {
                    estimate_rows.push(vec![
                        tau.clone(),
                        label.clone(),
                        num(packed[j]),
                        opt_num(fit_result.se.as_ref().map(|s| s[j])),
                    ]);
                }
                let c = &fit_result.criteria;
                criteria_rows.push(vec![
                    tau.clone(),
                    num(fit_result.loglik),
                    fit_result.n_used.to_string(),
                    num(c.aic),
                    num(c.bic),
                    num(c.caic),
                    num(c.hqic),
                    fit_result.converged.to_string(),
                    fit_result.iterations.to_string(),
                    num(fit_result.grad_norm),
                ]);
                let m = spec.m();
                for t in 0..data.n() {
                    let mut row = vec![tau.clone(), (t + 1).to_string()];
                    if let Some(dates) = &file.dates {
                        row.push(dates[t].clone());
                    }
                    row.push(num(data.y()[t]));
                    row.push(num(fit_result.fitted_q[t]));
                    row.push(if t < m {
                        String::new()
                    } else {
                        num(fit_result.innovations[t])
                    });
                    fitted_rows.push(row);
                }
                summary.push((
                    format!("loglik[{tau}]"),
                    num(fit_result.loglik),
                ));
                summary.push((format!("aic[{tau}]"), num(c.aic)));
                summary.push((
                    format!("converged[{tau}]"),
                    fit_result.converged.to_string(),
                ));
                if !fit_result.converged {
                    failures.push(format!("τ = {} did not converge", entry.tau));
                }
                if !fit_result.warnings.is_empty() {
                    summary.push((
                        format!("warnings[{tau}]"),
                        fit_result.warnings.join("; "),
                    ));
                }
            }
        }
    }

    write_table(
        &out_path(&dir, "estimates.csv")?,
        &["tau", "parameter", "estimate", "se"],
        estimate_rows,
    )?;
    write_table(
        &out_path(&dir, "criteria.csv")?,
        &[
            "tau", "loglik", "n_used", "aic", "bic", "caic", "hqic", "converged", "iterations",
            "grad_norm",
        ],
        criteria_rows,
    )?;
    let mut fitted_headers = vec!["tau", "index"];
    if file.dates.is_some() {
        fitted_headers.push("date");
    }
    fitted_headers.extend(["y", "fitted", "innovation"]);
    write_table(&out_path(&dir, "fitted.csv")?, &fitted_headers, fitted_rows)?;
    write_summary(&out_path(&dir, "summary.txt")?, &summary)?;

    if !failures.is_empty() {
        return Err(CliError::Numeric(failures.join("; ")));
    }
    Ok(())
}

pub fn cmd_forecast(
    opts: &CommonOpts,
    series_path: &Path,
    future_path: &Path,
    actuals_path: Option<&Path>,
) -> CliResult<()> {
    let cfg = RunConfig::resolve(opts)?;
    let tau = cfg.single_tau()?;
    let fc = cfg.forecast.as_ref().ok_or_else(|| {
        CliError::Input("forecasting needs a [forecast] section or --horizon".into())
    })?;
    if fc.horizon == 0 {
        return Err(CliError::Input("forecast horizon must be at least 1".into()));
    }
    let spec = cfg.model_spec(tau)?;
    let kernel = StandardKernel::new(spec.kernel.clone())?;
    let (_, data, resp_name) = load_design(&cfg, series_path)?;

    let future = SeriesFile::load(future_path, cfg.data.date_column.as_deref())?;
    if future.n != fc.horizon {
        return Err(CliError::Input(format!(
            "horizon {} but future file has {} rows",
            fc.horizon, future.n
        )));
    }
    let future_x = future.design_matrix(&cfg.model.mean_covariates)?;
    let future_w = future.design_matrix(&cfg.model.disp_covariates)?;
    let interval_levels = fc.interval.as_ref().map(|iv| (iv[0], iv[1]));
    let req = ForecastRequest {
        horizon: fc.horizon,
        future_x,
        future_w,
        interval_levels,
    };
    let (point_fit, result) =
        forecast_with_intervals(&spec, &data, &kernel, &cfg.fit_config(), &req)?;

    let dir = cfg.out_dir();
    let mut headers = vec!["step"];
    if future.dates.is_some() {
        headers.push("date");
    }
    headers.extend(["point", "lower", "upper"]);
    let rows = (0..fc.horizon).map(|h| {
        let mut row = vec![(h + 1).to_string()];
        if let Some(dates) = &future.dates {
            row.push(dates[h].clone());
        }
        row.push(num(result.point[h]));
        row.push(opt_num(result.lower.as_ref().map(|v| v[h])));
        row.push(opt_num(result.upper.as_ref().map(|v| v[h])));
        row
    });
    write_table(&out_path(&dir, "forecast.csv")?, &headers, rows)?;

    let mut summary = model_header(&cfg, &resp_name, data.n());
    summary.push(("basis_tau".to_owned(), num(result.basis_tau)));
    summary.push(("horizon".to_owned(), fc.horizon.to_string()));
    if let Some((lo, hi)) = interval_levels {
        summary.push(("interval".to_owned(), format!("{},{}", num(lo), num(hi))));
    }
    summary.push(("loglik".to_owned(), num(point_fit.loglik)));

    if let Some(actuals_path) = actuals_path {
        let actuals_file = SeriesFile::load(actuals_path, cfg.data.date_column.as_deref())?;
        let (_, actual) = actuals_file.response(cfg.data.response.as_deref())?;
        if actual.len() != fc.horizon {
            return Err(CliError::Input(format!(
                "horizon {} but actuals file has {} rows",
                fc.horizon,
                actual.len()
            )));
        }
        let alpha = interval_levels.map_or(0.05, |(lo, hi)| 1.0 - (hi - lo));
        let metrics = forecast_metrics(
            &actual,
            &result.point,
            result.lower.as_deref(),
            result.upper.as_deref(),
            data.y().as_slice(),
            alpha,
        )?;
        write_table(
            &out_path(&dir, "metrics.csv")?,
            &["rmse", "mae", "mase", "smape", "msis"],
            [vec![
                num(metrics.rmse),
                num(metrics.mae),
                num(metrics.mase),
                num(metrics.smape),
                opt_num(metrics.msis),
            ]],
        )?;
        summary.push(("rmse".to_owned(), num(metrics.rmse)));
        summary.push(("mae".to_owned(), num(metrics.mae)));
        summary.push(("mase".to_owned(), num(metrics.mase)));
        summary.push(("smape".to_owned(), num(metrics.smape)));
        summary.push(("msis".to_owned(), opt_num(metrics.msis)));
    }
    write_summary(&out_path(&dir, "summary.txt")?, &summary)?;
    Ok(())
}

pub fn cmd_simulate(opts: &CommonOpts) -> CliResult<()> {
    let cfg = RunConfig::resolve(opts)?;
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Input("simulation needs a [simulate] section".into()))?;
    if sim.n == 0 {
        return Err(CliError::Input("simulated length must be positive".into()));
    }
    let tau = cfg.single_tau()?;
    let truth = sim.truth.to_params();
    if truth.beta.is_empty() || truth.tau_coefs.is_empty() {
        return Err(CliError::Input(
            "truth needs at least intercepts in beta and tau_coefs".into(),
        ));
    }
    let k = truth.beta.len() - 1;
    let l = truth.tau_coefs.len() - 1;
    let family = cfg.kernel()?;
    let spec = ModelSpec::new(cfg.model.p, cfg.model.q, k, l, tau, family)
        .map_err(|e| CliError::Input(e.to_string()))?;
    truth
        .check_against(&spec)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let kernel = StandardKernel::new(spec.kernel.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut draw_design = |cols: usize| {
        let mut m = nalgebra::DMatrix::from_element(sim.n, cols + 1, 1.0);
        for j in 1..=cols {
            for i in 0..sim.n {
                m[(i, j)] = rand::Rng::random::<f64>(&mut rng);
            }
        }
        m
    };
    let x = draw_design(k);
    let w = draw_design(l);
    let y = simulate_series(&spec, &truth, &x, &w, &kernel, &mut rng)?;

    let mut headers: Vec<String> = vec!["index".into(), "y".into()];
    headers.extend((1..=k).map(|j| format!("x{j}")));
    headers.extend((1..=l).map(|j| format!("w{j}")));
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let rows = (0..sim.n).map(|t| {
        let mut row = vec![(t + 1).to_string(), num(y[t])];
        row.extend((1..=k).map(|j| num(x[(t, j)])));
        row.extend((1..=l).map(|j| num(w[(t, j)])));
        row
    });
    let dir = cfg.out_dir();
    write_table(&out_path(&dir, "series.csv")?, &header_refs, rows)?;
    write_summary(
        &out_path(&dir, "summary.txt")?,
        &[
            ("kernel".to_owned(), cfg.model.kernel.clone()),
            ("tau".to_owned(), num(tau)),
            ("n".to_owned(), sim.n.to_string()),
            ("seed".to_owned(), sim.seed.to_string()),
            ("p".to_owned(), cfg.model.p.to_string()),
            ("q".to_owned(), cfg.model.q.to_string()),
        ],
    )?;
    Ok(())
}

pub fn cmd_montecarlo(opts: &CommonOpts) -> CliResult<()> {
    let cfg = RunConfig::resolve(opts)?;
    let mc = cfg
        .montecarlo
        .as_ref()
        .ok_or_else(|| CliError::Input("this command needs a [montecarlo] section".into()))?;
    let kernels: Vec<KernelSection> = if mc.kernels.is_empty() {
        vec![KernelSection {
            kind: cfg.model.kernel.clone(),
            extra: cfg.model.extra,
            extra2: cfg.model.extra2,
        }]
    } else {
        mc.kernels.clone()
    };
    let truth = mc.truth.to_params();
    if truth.beta.is_empty() || truth.tau_coefs.is_empty() {
        return Err(CliError::Input(
            "truth needs at least intercepts in beta and tau_coefs".into(),
        ));
    }
    let k = truth.beta.len() - 1;
    let l = truth.tau_coefs.len() - 1;

    // One battery per kernel on common random numbers (shared seed).
    let mut reports: Vec<(String, McReport)> = Vec::new();
    let mut spec_for_labels: Option<ModelSpec> = None;
    for ks in &kernels {
        let family = kernel_from(&ks.kind, ks.extra, ks.extra2)?;
        let spec = ModelSpec::new(cfg.model.p, cfg.model.q, k, l, 0.5, family)
            .map_err(|e| CliError::Input(e.to_string()))?;
        truth
            .check_against(&spec)
            .map_err(|e| CliError::Input(e.to_string()))?;
        let design = McDesign {
            spec: spec.clone(),
            truth: truth.clone(),
            n_grid: mc.n_grid.clone(),
            tau_grid: mc.tau_grid.clone(),
            replications: mc.replications,
            covariate_law: CovariateLaw::Uniform01,
            seed: mc.seed,
        };
        reports.push((ks.kind.clone(), qlsarma::run_mc(&design)?));
        spec_for_labels.get_or_insert(spec);
    }
    let spec = spec_for_labels.expect("at least one kernel");
    let x_names: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();
    let w_names: Vec<String> = (1..=l).map(|j| format!("w{j}")).collect();
    let labels = parameter_labels(&spec, &x_names, &w_names);

    let dir = cfg.out_dir();
    let mut error_rows = Vec::new();
    let mut convergence_rows = Vec::new();
    for (name, report) in &reports {
        for cell in &report.cells {
            for (j, label) in labels.iter().enumerate() {
                error_rows.push(vec![
                    name.clone(),
                    cell.n.to_string(),
                    num(cell.tau),
                    label.clone(),
                    num(cell.bias[j]),
                    num(cell.mse[j]),
                ]);
            }
            convergence_rows.push(vec![
                name.clone(),
                cell.n.to_string(),
                num(cell.tau),
                cell.n_converged.to_string(),
                cell.n_total.to_string(),
                cell.low_convergence.to_string(),
            ]);
        }
    }
    write_table(
        &out_path(&dir, "mc_errors.csv")?,
        &["kernel", "n", "q", "parameter", "bias", "mse"],
        error_rows,
    )?;
    write_table(
        &out_path(&dir, "mc_convergence.csv")?,
        &["kernel", "n", "q", "converged", "total", "low_convergence"],
        convergence_rows,
    )?;

    // Residual-shape tables: one row per (n, q, statistic), one column
    // per kernel.
    let mut stat_headers: Vec<String> = vec!["n".into(), "q".into(), "statistic".into()];
    stat_headers.extend(reports.iter().map(|(name, _)| name.clone()));
    let stat_header_refs: Vec<&str> = stat_headers.iter().map(String::as_str).collect();
    let n_cells = reports[0].1.cells.len();
    for (file_name, pick) in [
        ("mc_residual_gcs.csv", true),
        ("mc_residual_rq.csv", false),
    ] {
        let mut rows = Vec::new();
        for ci in 0..n_cells {
            let lead = &reports[0].1.cells[ci];
            for (stat_name, get) in STAT_PICKERS {
                let mut row = vec![lead.n.to_string(), num(lead.tau), (*stat_name).to_owned()];
                for (_, report) in &reports {
                    let cell = &report.cells[ci];
                    let stats = if pick { &cell.gcs_stats } else { &cell.rq_stats };
                    row.push(get(stats));
                }
                rows.push(row);
            }
        }
        write_table(&out_path(&dir, file_name)?, &stat_header_refs, rows)?;
    }

    write_summary(
        &out_path(&dir, "summary.txt")?,
        &[
            (
                "kernels".to_owned(),
                kernels
                    .iter()
                    .map(|k| k.kind.clone())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "n_grid".to_owned(),
                mc.n_grid
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "tau_grid".to_owned(),
                mc.tau_grid.iter().map(|t| num(*t)).collect::<Vec<_>>().join(","),
            ),
            ("replications".to_owned(), mc.replications.to_string()),
            ("seed".to_owned(), mc.seed.to_string()),
        ],
    )?;
    Ok(())
}

type StatPicker = fn(&qlsarma::ResidualStatMeans) -> String;
const STAT_PICKERS: &[(&str, StatPicker)] = &[
    ("MN", |s| num(s.mean)),
    ("MD", |s| num(s.median)),
    ("SD", |s| num(s.sd)),
    ("CS", |s| opt_num(s.skewness)),
    ("CK", |s| opt_num(s.kurtosis)),
];

pub fn cmd_residuals(
    opts: &CommonOpts,
    series_path: &Path,
    max_lag: usize,
    envelope_sims: usize,
) -> CliResult<()> {
    let cfg = RunConfig::resolve(opts)?;
    let tau = cfg.single_tau()?;
    let spec = cfg.model_spec(tau)?;
    let kernel = StandardKernel::new(spec.kernel.clone())?;
    let (file, data, resp_name) = load_design(&cfg, series_path)?;
    let ctx = LikelihoodContext::new(&spec, &data, &kernel)?;
    let fit_result: FitResult = fit(&ctx, &cfg.fit_config())?;
    if !fit_result.converged {
        return Err(CliError::Numeric(
            "fit did not converge; diagnostics would be unreliable".into(),
        ));
    }
    let n_used = data.n() - spec.m();
    let lag = max_lag.min(n_used.saturating_sub(1)).max(1);
    let report = residuals(&fit_result, &ctx, lag)?;

    let dir = cfg.out_dir();
    let m = spec.m();
    let mut res_headers = vec!["index"];
    if file.dates.is_some() {
        res_headers.push("date");
    }
    res_headers.extend(["gcs", "rq"]);
    let rows = (0..report.gcs.len()).map(|i| {
        let mut row = vec![(m + i + 1).to_string()];
        if let Some(dates) = &file.dates {
            row.push(dates[m + i].clone());
        }
        row.push(num(report.gcs[i]));
        row.push(num(report.rq[i]));
        row
    });
    write_table(&out_path(&dir, "residuals.csv")?, &res_headers, rows)?;

    let stats_rows = {
        let g = &report.stats_gcs;
        let r = &report.stats_rq;
        vec![
            vec!["MN".into(), num(g.mean), num(r.mean)],
            vec!["MD".into(), num(g.median), num(r.median)],
            vec!["SD".into(), num(g.sd), num(r.sd)],
            vec!["CS".into(), opt_num(g.skewness), opt_num(r.skewness)],
            vec!["CK".into(), opt_num(g.kurtosis), opt_num(r.kurtosis)],
            vec!["MIN".into(), num(g.min), num(r.min)],
            vec!["MAX".into(), num(g.max), num(r.max)],
            vec!["CV".into(), opt_num(g.cv), opt_num(r.cv)],
            vec!["N".into(), g.n.to_string(), r.n.to_string()],
        ]
    };
    write_table(
        &out_path(&dir, "residual_stats.csv")?,
        &["statistic", "gcs", "rq"],
        stats_rows,
    )?;

    let acf_rows = (0..report.acf.len()).map(|lag_i| {
        vec![
            lag_i.to_string(),
            num(report.acf[lag_i]),
            if lag_i == 0 {
                String::new()
            } else {
                num(report.pacf[lag_i - 1])
            },
        ]
    });
    write_table(
        &out_path(&dir, "acf.csv")?,
        &["lag", "acf", "pacf"],
        acf_rows,
    )?;

    for (file_name, series, target, seed_salt) in [
        ("rq_envelope.csv", &report.rq, EnvelopeTarget::StandardNormal, 0u64),
        (
            "gcs_envelope.csv",
            &report.gcs,
            EnvelopeTarget::StandardExponential,
            1u64,
        ),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.fit.seed ^ seed_salt);
        let env = qq_envelope(series, target, envelope_sims, &mut rng)?;
        let rows = (0..env.observed.len()).map(|i| {
            vec![
                (i + 1).to_string(),
                num(env.theoretical[i]),
                num(env.observed[i]),
                num(env.lower[i]),
                num(env.upper[i]),
            ]
        });
        write_table(
            &out_path(&dir, file_name)?,
            &["rank", "theoretical", "observed", "lower", "upper"],
            rows,
        )?;
    }

    let mut summary = model_header(&cfg, &resp_name, data.n());
    summary.push(("tau".to_owned(), num(tau)));
    summary.push(("loglik".to_owned(), num(fit_result.loglik)));
    summary.push(("clamped".to_owned(), report.clamped.to_string()));
    summary.push(("max_lag".to_owned(), lag.to_string()));
    summary.push(("envelope_sims".to_owned(), envelope_sims.to_string()));
    write_summary(&out_path(&dir, "summary.txt")?, &summary)?;
    Ok(())
}
