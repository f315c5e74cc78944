use std::fmt::Write as _;

use super::table::EstimateTable;
use crate::error::{Error, Result};
use crate::estimate::parse_key_value;
use crate::model::{ModelParams, THETA_NAMES};
use crate::simulate::fmt17;
use crate::stats::{ks_standard_normal, mean, median, sample_sd, sample_variance};

/// Ordered `name = value` statistics written to `summary.txt`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary(pub Vec<(String, f64)>);

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: f64) {
        self.0.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k} = {}", fmt17(*v));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_key_value(text)?
            .into_iter()
            .map(|(k, v)| {
                let x = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("summary value '{v}' for {k}")))?;
                Ok((k, x))
            })
            .collect::<Result<_>>()
            .map(Summary)
    }
}

/// Regression-level quantities `(ρ, γ, σ²)` with their table columns.
pub const REGRESSION_FIELDS: [&str; 8] = [
    "rho1",
    "rho2",
    "gamma11",
    "gamma12",
    "gamma21",
    "gamma22",
    "sigma1_sq",
    "sigma2_sq",
];

/// True `(ρ, γ, σ²)` at spacing `delta`.
pub fn regression_truth(model: &ModelParams, delta: f64) -> Result<[f64; 8]> {
    let (rho, gamma) = model.drift().regression(delta)?;
    let s = model.sigma_sq();
    Ok([
        rho.v1, rho.v2, gamma.m11, gamma.m12, gamma.m21, gamma.m22, s.v1, s.v2,
    ])
}

/// `θ̂` of one row: `σᵢ = √(σ̂ᵢ²)`.
fn theta_row(table: &EstimateTable, row: &[f64]) -> Result<[f64; 8]> {
    let mut out = [0.0; 8];
    for (i, name) in THETA_NAMES.iter().enumerate() {
        out[i] = match *name {
            "sigma1" => row[table.index("sigma1_sq")?].sqrt(),
            "sigma2" => row[table.index("sigma2_sq")?].sqrt(),
            n => row[table.index(n)?],
        };
    }
    Ok(out)
}

fn rmse(errors: &[f64]) -> f64 {
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m: f64, x| {
        if x.is_nan() {
            f64::INFINITY
        } else {
            m.max(x.abs())
        }
    })
}

fn admissible(table: &EstimateTable, row: &[f64]) -> Result<bool> {
    Ok(row[table.index("admissible")?] == 1.0)
}

/// Per-row errors at one sample size.
struct RowErrors {
    replicate: f64,
    drift: f64,
    sigma: f64,
    full: f64,
}

/// Summary of a consistency run: per sample size, bias and RMSE of every
/// regression-level and `θ` component, medians of the max-norm errors;
/// across sizes, the ratio of first to last and the fraction of replicates
/// whose error improved. Missing `σ̂²` (non-admissible rows) count as
/// infinite error.
pub fn consistency_summary(
    table: &EstimateTable,
    truth: &ModelParams,
    delta: f64,
) -> Result<Summary> {
    let reg_truth = regression_truth(truth, delta)?;
    let theta_truth = truth.theta();
    let n_col = table.index("n")?;
    let rep_col = table.index("replicate")?;
    let reg_cols = REGRESSION_FIELDS.map(|f| table.index(f));
    let reg_cols: Vec<usize> = reg_cols.into_iter().collect::<Result<_>>()?;

    let mut grid: Vec<usize> = table.rows.iter().map(|r| r[n_col] as usize).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::Parse("empty consistency table".into()));
    }

    let mut s = Summary::default();
    let mut per_n: Vec<Vec<RowErrors>> = Vec::new();
    let (mut median_drift, mut rmse_drift) = (Vec::new(), Vec::new());
    for &n in &grid {
        let rows: Vec<&Vec<f64>> = table
            .rows
            .iter()
            .filter(|r| r[n_col] as usize == n)
            .collect();
        let p = format!("n{n}.");
        let mut non_adm = 0usize;
        let mut errs = Vec::with_capacity(rows.len());
        let mut drift_sq = Vec::new();
        for r in &rows {
            let e: Vec<f64> = reg_cols
                .iter()
                .zip(&reg_truth)
                .map(|(&c, t)| r[c] - t)
                .collect();
            drift_sq.extend_from_slice(&e[..6]);
            let drift = max_abs(e[..6].iter().copied());
            let sigma = max_abs(e[6..].iter().copied());
            if !admissible(table, r)? {
                non_adm += 1;
            }
            errs.push(RowErrors {
                replicate: r[rep_col],
                drift,
                sigma,
                full: drift.max(sigma),
            });
        }
        s.push(format!("{p}replicates"), rows.len() as f64);
        s.push(format!("{p}non_admissible"), non_adm as f64);
        let md = median(&errs.iter().map(|e| e.drift).collect::<Vec<_>>());
        let rd = rmse(&drift_sq);
        s.push(format!("{p}median_drift_err"), md);
        s.push(format!("{p}rmse_drift"), rd);
        s.push(
            format!("{p}median_sigma_sq_err"),
            median(&errs.iter().map(|e| e.sigma).collect::<Vec<_>>()),
        );
        s.push(
            format!("{p}median_full_err"),
            median(&errs.iter().map(|e| e.full).collect::<Vec<_>>()),
        );
        for (j, f) in REGRESSION_FIELDS.iter().enumerate() {
            let e: Vec<f64> = rows
                .iter()
                .map(|r| r[reg_cols[j]] - reg_truth[j])
                .filter(|x| x.is_finite())
                .collect();
            s.push(format!("{p}{f}.bias"), mean(&e));
            s.push(format!("{p}{f}.rmse"), rmse(&e));
            if j >= 6 {
                s.push(
                    format!("{p}{f}.median_abs_err"),
                    median(&e.iter().map(|x| x.abs()).collect::<Vec<_>>()),
                );
            }
        }
        push_theta_stats(&mut s, &p, table, &rows, &theta_truth)?;
        median_drift.push(md);
        rmse_drift.push(rd);
        per_n.push(errs);
    }

    let last = grid.len() - 1;
    s.push(
        "median_drift_err_ratio",
        median_drift[0] / median_drift[last],
    );
    s.push("rmse_drift_ratio", rmse_drift[0] / rmse_drift[last]);
    let monotone = median_drift.windows(2).all(|w| w[1] < w[0]);
    s.push(
        "median_drift_err_decreasing",
        if monotone { 1.0 } else { 0.0 },
    );
    let mut improved = 0usize;
    for first in &per_n[0] {
        if let Some(l) = per_n[last].iter().find(|e| e.replicate == first.replicate) {
            if l.full < first.full {
                improved += 1;
            }
        }
    }
    s.push("improved_fraction", improved as f64 / per_n[0].len() as f64);
    Ok(s)
}

/// Bias, standard error of the mean and RMSE of each `θ` component over the
/// admissible rows.
fn push_theta_stats(
    s: &mut Summary,
    prefix: &str,
    table: &EstimateTable,
    rows: &[&Vec<f64>],
    truth: &[f64; 8],
) -> Result<()> {
    let mut thetas = Vec::new();
    for r in rows {
        if admissible(table, r)? {
            thetas.push(theta_row(table, r)?);
        }
    }
    for (i, name) in THETA_NAMES.iter().enumerate() {
        let e: Vec<f64> = thetas.iter().map(|t| t[i] - truth[i]).collect();
        let se = if e.len() > 1 {
            sample_sd(&e) / (e.len() as f64).sqrt()
        } else {
            f64::NAN
        };
        s.push(format!("{prefix}theta.{name}.bias"), mean(&e));
        s.push(format!("{prefix}theta.{name}.se"), se);
        s.push(format!("{prefix}theta.{name}.rmse"), rmse(&e));
    }
    Ok(())
}

/// `√n(θ̂ − θ)` and `√n(γ̂ − γ)` per admissible row, by name.
pub fn clt_scaled_errors(
    table: &EstimateTable,
    truth: &ModelParams,
    delta: f64,
) -> Result<Vec<(String, Vec<f64>)>> {
    let theta = truth.theta();
    let reg = regression_truth(truth, delta)?;
    let n_col = table.index("n")?;
    let mut out: Vec<(String, Vec<f64>)> = THETA_NAMES
        .iter()
        .chain(&REGRESSION_FIELDS[2..6])
        .map(|n| (n.to_string(), Vec::new()))
        .collect();
    for r in &table.rows {
        if !admissible(table, r)? {
            continue;
        }
        let sq = r[n_col].sqrt();
        let t = theta_row(table, r)?;
        for i in 0..8 {
            out[i].1.push(sq * (t[i] - theta[i]));
        }
        for j in 0..4 {
            out[8 + j]
                .1
                .push(sq * (r[table.index(REGRESSION_FIELDS[2 + j])?] - reg[2 + j]));
        }
    }
    Ok(out)
}

/// `z / sd(z)`: centred on the true value, scaled by the replicate sample
/// deviation.
pub fn studentize(z: &[f64]) -> Vec<f64> {
    let sd = sample_sd(z);
    z.iter().map(|v| v / sd).collect()
}

/// Summary of a CLT run. For every `θ` component and every `γ` entry:
/// mean and sd of `√n(θ̂ − θ)`, KS statistic and p-value of the studentized
/// sample against N(0, 1) (`ks_p`), and the same after centring on the
/// sample mean (`ks_p_centred`). For `θ` and `γ₁₁` also the empirical
/// variance against the mean reported sandwich variance.
pub fn clt_summary(table: &EstimateTable, truth: &ModelParams, delta: f64) -> Result<Summary> {
    let scaled = clt_scaled_errors(table, truth, delta)?;
    let adm: Vec<&Vec<f64>> = {
        let c = table.index("admissible")?;
        table.rows.iter().filter(|r| r[c] == 1.0).collect()
    };
    let n_col = table.index("n")?;
    let mut s = Summary::default();
    s.push("replicates", table.rows.len() as f64);
    s.push("non_admissible", (table.rows.len() - adm.len()) as f64);
    s.push("n", adm.first().map_or(f64::NAN, |r| r[n_col]));

    let mut min_p = f64::INFINITY;
    for (k, (name, z)) in scaled.iter().enumerate() {
        let p = if k < 8 {
            format!("theta.{name}.")
        } else {
            format!("{name}.")
        };
        let m = mean(z);
        let ks = ks_standard_normal(&studentize(z));
        let centred: Vec<f64> = z.iter().map(|v| v - m).collect();
        let ks_c = ks_standard_normal(&studentize(&centred));
        s.push(format!("{p}mean_z"), m);
        s.push(format!("{p}sd_z"), sample_sd(z));
        s.push(format!("{p}ks_stat"), ks.statistic);
        s.push(format!("{p}ks_p"), ks.p_value);
        s.push(format!("{p}ks_p_centred"), ks_c.p_value);
        let avar_col = if k < 8 {
            Some(table.index(&format!("cov_{}{}", k + 1, k + 1))?)
        } else if name == "gamma11" {
            table.index("gamma11_avar").ok()
        } else {
            None
        };
        if let Some(c) = avar_col {
            // cov_ii is the variance of θ̂ᵢ; gamma11_avar is already asymptotic
            let scale = |r: &Vec<f64>| if k < 8 { r[n_col] } else { 1.0 };
            let sandwich = mean(&adm.iter().map(|r| scale(r) * r[c]).collect::<Vec<_>>());
            let emp = sample_variance(z);
            s.push(format!("{p}emp_var"), emp);
            s.push(format!("{p}sandwich_var"), sandwich);
            s.push(format!("{p}var_ratio"), emp / sandwich);
        }
        if k < 8 {
            min_p = min_p.min(ks.p_value);
        }
    }
    s.push("min_theta_ks_p", min_p);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_text_round_trip() {
        let mut s = Summary::default();
        s.push("a.b", 0.1);
        s.push("c", f64::NAN);
        s.push("d", -1e300);
        let back = Summary::from_text(&s.to_text()).unwrap();
        assert_eq!(back.0[0], s.0[0]);
        assert!(back.get("c").unwrap().is_nan());
        assert_eq!(back.get("d"), Some(-1e300));
    }

    #[test]
    fn max_abs_treats_nan_as_infinite() {
        assert_eq!(max_abs([1.0, -3.0]), 3.0);
        assert_eq!(max_abs([1.0, f64::NAN]), f64::INFINITY);
    }
}
