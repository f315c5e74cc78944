use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::summary::{clt_scaled_errors, clt_summary, consistency_summary, studentize, Summary};
use super::table::EstimateTable;
use crate::error::{Error, Result};
use crate::estimate::{
    estimate, regression_jacobian, EstimateOptions, EstimateReport, FD_REL_STEP, REPORT_FIELDS,
};
use crate::model::ModelParams;
use crate::rng::stream_seed;
use crate::simulate::{
    fmt17, laplace_check_curve, LaplaceCheckReport, ObservationSeries, SimConfig,
};
use crate::stats::normal_qq;

/// Result of a Monte Carlo experiment, before anything is written.
#[derive(Clone, Debug)]
pub enum McReport {
    Consistency {
        truth: ModelParams,
        delta: f64,
        table: EstimateTable,
        summary: Summary,
    },
    Clt {
        truth: ModelParams,
        delta: f64,
        table: EstimateTable,
        summary: Summary,
    },
    Laplace {
        checks: Vec<LaplaceCheckReport>,
        summary: Summary,
    },
}

impl McReport {
    pub fn summary(&self) -> &Summary {
        match self {
            McReport::Consistency { summary, .. }
            | McReport::Clt { summary, .. }
            | McReport::Laplace { summary, .. } => summary,
        }
    }

    pub fn table(&self) -> Option<&EstimateTable> {
        match self {
            McReport::Consistency { table, .. } | McReport::Clt { table, .. } => Some(table),
            McReport::Laplace { .. } => None,
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub report: Option<McReport>,
    pub estimate: Option<EstimateReport>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn options(cfg: &ExperimentConfig, with_covariance: bool) -> EstimateOptions {
    EstimateOptions {
        rho_normalization: cfg.rho_normalization,
        with_covariance,
    }
}

fn replicate_sim(cfg: &ExperimentConfig, r: usize, n_obs: usize) -> SimConfig {
    SimConfig {
        n_obs,
        seed: stream_seed(cfg.seed(), r as u64),
        ..cfg.sim
    }
}

fn prefix(series: &ObservationSeries, n: usize) -> ObservationSeries {
    ObservationSeries {
        delta: series.delta,
        obs: series.obs[..=n].to_vec(),
        meta: series.meta.clone(),
    }
}

fn table_columns(extra: &[&str]) -> Vec<String> {
    std::iter::once("replicate".to_string())
        .chain(REPORT_FIELDS.iter().cloned())
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

fn row_fields(r: usize, report: &EstimateReport, extra: &[f64]) -> Vec<String> {
    std::iter::once(r.to_string())
        .chain(report.values())
        .chain(extra.iter().map(|&v| fmt17(v)))
        .collect()
}

/// Each replicate simulates one path of length `max(n_grid)` and fits every
/// prefix of length `n ∈ n_grid`, so errors across sizes are paired.
pub fn mc_consistency(cfg: &ExperimentConfig) -> Result<McReport> {
    let n_max = *cfg
        .n_grid
        .last()
        .ok_or_else(|| Error::ConfigParse("empty n_grid".into()))?;
    let rows: Vec<Vec<Vec<String>>> = pool(cfg.jobs)?.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let path = cfg.sampler.simulate(&replicate_sim(cfg, r, n_max))?;
                cfg.n_grid
                    .iter()
                    .map(|&n| {
                        let rep =
                            estimate(&prefix(&path, n), &cfg.weight, options(cfg, cfg.covariance))?;
                        Ok(row_fields(r, &rep, &[]))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut table = EstimateTable::new(table_columns(&[]));
    for f in rows.iter().flatten() {
        table.push_fields(f)?;
    }
    let summary = consistency_summary(&table, &cfg.model, cfg.sim.delta)?;
    Ok(McReport::Consistency {
        truth: cfg.model,
        delta: cfg.sim.delta,
        table,
        summary,
    })
}

/// Independent replicates of length `sim.n_obs`. Besides the report fields
/// each row carries `gamma11_avar`, the delta-method asymptotic variance of
/// `√n(γ̂₁₁ − γ₁₁)` from the sandwich at `θ̂`.
pub fn mc_clt(cfg: &ExperimentConfig) -> Result<McReport> {
    let rows: Vec<Vec<String>> = pool(cfg.jobs)?.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let series = cfg
                    .sampler
                    .simulate(&replicate_sim(cfg, r, cfg.sim.n_obs))?;
                let rep = estimate(&series, &cfg.weight, options(cfg, cfg.covariance))?;
                let avar = match (&rep.covariance, rep.theta_hat()) {
                    (Some(cov), Some(theta)) => {
                        let jac = regression_jacobian(&theta, series.delta, FD_REL_STEP)?;
                        let grad: [f64; 8] = std::array::from_fn(|i| jac[i][2]);
                        cov.variance_of(&grad) * series.n() as f64
                    }
                    _ => f64::NAN,
                };
                Ok(row_fields(r, &rep, &[avar]))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut table = EstimateTable::new(table_columns(&["gamma11_avar"]));
    for f in &rows {
        table.push_fields(f)?;
    }
    let summary = clt_summary(&table, &cfg.model, cfg.sim.delta)?;
    Ok(McReport::Clt {
        truth: cfg.model,
        delta: cfg.sim.delta,
        table,
        summary,
    })
}

/// Formula vs. Monte Carlo Laplace transform from `sim.x0` for every
/// `λ ∈ laplace.lambda` at every `t ∈ laplace.t`. The `j`-th `λ` uses
/// stream `j` of the master seed.
pub fn laplace_experiment(cfg: &ExperimentConfig) -> Result<McReport> {
    let checks = pool(cfg.jobs)?.install(|| -> Result<Vec<LaplaceCheckReport>> {
        let mut all = Vec::new();
        for (j, &lambda) in cfg.laplace.lambdas.iter().enumerate() {
            let sim = SimConfig {
                seed: stream_seed(cfg.seed(), j as u64),
                ..cfg.sim
            };
            all.extend(laplace_check_curve(
                &sim,
                cfg.sampler,
                lambda,
                &cfg.laplace.times,
                cfg.laplace.paths,
            )?);
        }
        Ok(all)
    })?;
    let mut summary = Summary::default();
    summary.push("checks", checks.len() as f64);
    summary.push("paths", cfg.laplace.paths as f64);
    summary.push(
        "max_abs_z",
        checks.iter().fold(0.0, |m: f64, c| m.max(c.z.abs())),
    );
    Ok(McReport::Laplace { checks, summary })
}

fn write(dir: &Path, name: &str, content: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn table_csv(t: &EstimateTable) -> String {
    let adm = t.index("admissible").ok();
    let rep = t.index("replicate").ok();
    let n = t.index("n").ok();
    csv(
        &t.columns.join(","),
        t.rows.iter().map(|r| {
            r.iter()
                .enumerate()
                .map(|(i, &v)| {
                    if Some(i) == adm {
                        (v == 1.0).to_string()
                    } else if Some(i) == rep || Some(i) == n {
                        (v as u64).to_string()
                    } else {
                        fmt17(v)
                    }
                })
                .collect()
        }),
    )
}

/// Writes the `plotdata_*.csv` files of a report into `dir`:
/// `plotdata_consistency.csv` (`n`, drift RMSE), `plotdata_qq_<name>.csv`
/// per `θ` component (standard normal quantile, studentized error) and
/// `plotdata_laplace.csv`.
pub fn emit_plotdata(report: &McReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    match report {
        McReport::Consistency { table, summary, .. } => {
            let mut grid: Vec<u64> = table.column("n")?.into_iter().map(|v| v as u64).collect();
            grid.sort_unstable();
            grid.dedup();
            let rows = grid.iter().map(|n| {
                let y = summary.get(&format!("n{n}.rmse_drift")).unwrap_or(f64::NAN);
                vec![n.to_string(), fmt17(y)]
            });
            write(
                dir,
                "plotdata_consistency.csv",
                &csv("n,rmse_drift", rows),
                &mut files,
            )?;
        }
        McReport::Clt {
            truth,
            delta,
            table,
            ..
        } => {
            for (name, z) in clt_scaled_errors(table, truth, *delta)?.iter().take(8) {
                let rows = normal_qq(&studentize(z))
                    .into_iter()
                    .map(|(q, x)| vec![fmt17(q), fmt17(x)]);
                write(
                    dir,
                    &format!("plotdata_qq_{name}.csv"),
                    &csv("normal_quantile,studentized", rows),
                    &mut files,
                )?;
            }
        }
        McReport::Laplace { checks, .. } => {
            let rows = checks.iter().map(|c| {
                [
                    c.lambda.v1,
                    c.lambda.v2,
                    c.t,
                    c.formula,
                    c.empirical,
                    c.std_err,
                    c.z,
                ]
                .map(fmt17)
                .to_vec()
            });
            write(
                dir,
                "plotdata_laplace.csv",
                &csv("lambda1,lambda2,t,formula,empirical,std_err,z", rows),
                &mut files,
            )?;
        }
    }
    Ok(files)
}

/// Runs a resolved config and writes its artifacts into `output_dir`:
/// always `resolved_config.txt`; then `series.csv` (simulate, and estimate
/// without `input`), `estimate.txt` + `estimates.csv` (estimate),
/// `estimates.csv` + `summary.txt` + plot data (Monte Carlo kinds),
/// `summary.txt` + `plotdata_laplace.csv` (laplace_check).
///
/// A non-admissible `γ̂` in `estimate` is written out and then returned as
/// [`Error::NonAdmissibleGamma`].
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    write(dir, "resolved_config.txt", &cfg.resolved_text(), &mut files)?;
    let mut outcome = RunOutcome {
        files: Vec::new(),
        report: None,
        estimate: None,
    };

    match cfg.kind {
        ExperimentKind::Simulate => {
            let series = cfg.sampler.simulate(&cfg.sim)?;
            write(dir, "series.csv", &series.to_csv(), &mut files)?;
        }
        ExperimentKind::Estimate => {
            let series = match &cfg.input {
                Some(p) => ObservationSeries::read_csv(p)?,
                None => {
                    let s = cfg.sampler.simulate(&cfg.sim)?;
                    write(dir, "series.csv", &s.to_csv(), &mut files)?;
                    s
                }
            };
            let rep = estimate(&series, &cfg.weight, options(cfg, cfg.covariance))?;
            write(dir, "estimate.txt", &rep.to_key_value(), &mut files)?;
            write(
                dir,
                "estimates.csv",
                &csv(&EstimateReport::csv_header(), [rep.values()]),
                &mut files,
            )?;
            if !rep.drift.admissible {
                rep.drift.require_admissible()?;
            }
            outcome.estimate = Some(rep);
        }
        ExperimentKind::McConsistency | ExperimentKind::McClt | ExperimentKind::LaplaceCheck => {
            let report = match cfg.kind {
                ExperimentKind::McConsistency => mc_consistency(cfg)?,
                ExperimentKind::McClt => mc_clt(cfg)?,
                _ => laplace_experiment(cfg)?,
            };
            if let Some(t) = report.table() {
                write(dir, "estimates.csv", &table_csv(t), &mut files)?;
            }
            write(dir, "summary.txt", &report.summary().to_text(), &mut files)?;
            files.extend(emit_plotdata(&report, dir)?);
            outcome.report = Some(report);
        }
    }
    outcome.files = files;
    Ok(outcome)
}

/// Reads `estimates.csv` of a finished Monte Carlo run and recomputes its
/// summary.
pub fn recompute_summary(
    kind: ExperimentKind,
    truth: &ModelParams,
    delta: f64,
    estimates_csv: &str,
) -> Result<Summary> {
    let table = EstimateTable::from_csv(estimates_csv)?;
    match kind {
        ExperimentKind::McConsistency => consistency_summary(&table, truth, delta),
        ExperimentKind::McClt => clt_summary(&table, truth, delta),
        other => Err(Error::Config(format!(
            "{} has no estimates table",
            other.name()
        ))),
    }
}
