use super::{DiffusionEstimate, DriftEstimate, SandwichCovariance};
use crate::error::{Error, Result};
use crate::simulate::fmt17;

/// Fixed field order of the key-value and CSV serialisations. The last 36
/// are the upper triangle of the covariance of `θ̂`, 1-based, row-major.
pub static REPORT_FIELDS: std::sync::LazyLock<Vec<String>> = std::sync::LazyLock::new(|| {
    let mut f: Vec<String> = [
        "rho1",
        "rho2",
        "gamma11",
        "gamma12",
        "gamma21",
        "gamma22",
        "a1",
        "a2",
        "b11",
        "b12",
        "b21",
        "b22",
        "sigma1_sq",
        "sigma2_sq",
        "admissible",
        "n",
        "delta",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 1..=8 {
        for j in i..=8 {
            f.push(format!("cov_{i}{j}"));
        }
    }
    f
});

/// Everything one fit produces.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub drift: DriftEstimate,
    pub diffusion: Option<DiffusionEstimate>,
    pub covariance: Option<SandwichCovariance>,
}

impl EstimateReport {
    /// `(a₁, a₂, b₁₁, b₁₂, b₂₁, b₂₂, σ₁, σ₂)` from the fitted pieces, using the
    /// clamped `σ̂²`. `None` unless the drift is admissible.
    pub fn theta_from(drift: &DriftEstimate, diffusion: &DiffusionEstimate) -> Option<[f64; 8]> {
        let (a, b) = (drift.a_hat?, drift.b_hat?);
        Some([
            a.v1,
            a.v2,
            b.m11,
            -b.m12,
            -b.m21,
            b.m22,
            diffusion.sigma1_sq.sqrt(),
            diffusion.sigma2_sq.sqrt(),
        ])
    }

    pub fn theta_hat(&self) -> Option<[f64; 8]> {
        Self::theta_from(&self.drift, self.diffusion.as_ref()?)
    }

    /// Values in [`REPORT_FIELDS`] order; missing pieces render as `NaN`.
    pub fn values(&self) -> Vec<String> {
        let d = &self.drift;
        let nan = f64::NAN;
        let (a, b) = match (d.a_hat, d.b_hat) {
            (Some(a), Some(b)) => ([a.v1, a.v2], [b.m11, -b.m12, -b.m21, b.m22]),
            _ => ([nan; 2], [nan; 4]),
        };
        let s = self
            .diffusion
            .map_or([nan; 2], |s| [s.sigma1_sq, s.sigma2_sq]);
        let mut out: Vec<String> = [
            d.rho_hat.v1,
            d.rho_hat.v2,
            d.gamma_hat.m11,
            d.gamma_hat.m12,
            d.gamma_hat.m21,
            d.gamma_hat.m22,
        ]
        .into_iter()
        .chain(a)
        .chain(b)
        .chain(s)
        .map(fmt17)
        .collect();
        out.push(d.admissible.to_string());
        out.push(d.n.to_string());
        out.push(fmt17(d.delta));
        for i in 0..8 {
            for j in i..8 {
                out.push(fmt17(
                    self.covariance.as_ref().map_or(nan, |c| c.cov_hat[(i, j)]),
                ));
            }
        }
        out
    }

    /// One `name = value` line per field.
    pub fn to_key_value(&self) -> String {
        REPORT_FIELDS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn csv_header() -> String {
        REPORT_FIELDS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }
}

/// Parses `name = value` lines (blank lines and `#` comments skipped) in
/// file order.
pub fn parse_key_value(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::ConfigParse(format!(
                "line {}: expected 'name = value', got '{raw}'",
                lineno + 1
            ))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::ConfigParse(format!(
                "line {}: empty key",
                lineno + 1
            )));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{estimate, EstimateOptions, WeightFn};
    use crate::model::ModelParams;
    use crate::simulate::{simulate_exact_diagonal, SimConfig};

    fn report() -> EstimateReport {
        let p = ModelParams::diagonal(1.0, 1.0, 1.0).unwrap();
        let s = simulate_exact_diagonal(&SimConfig::new(p, 500, 5)).unwrap();
        estimate(&s, &WeightFn::Constant, EstimateOptions::default()).unwrap()
    }

    #[test]
    fn field_list_shape() {
        assert_eq!(REPORT_FIELDS.len(), 17 + 36);
        assert_eq!(REPORT_FIELDS[17], "cov_11");
        assert_eq!(REPORT_FIELDS[52], "cov_88");
    }

    #[test]
    fn key_value_round_trips_losslessly() {
        let r = report();
        let kv = parse_key_value(&r.to_key_value()).unwrap();
        assert_eq!(kv.len(), REPORT_FIELDS.len());
        let get = |name: &str| {
            kv.iter()
                .find(|(k, _)| k == name)
                .unwrap()
                .1
                .parse::<f64>()
                .unwrap()
        };
        assert_eq!(get("gamma12"), r.drift.gamma_hat.m12);
        assert_eq!(get("b21"), -r.drift.b_hat.unwrap().m21);
        assert_eq!(
            get("cov_37"),
            r.covariance.as_ref().unwrap().cov_hat[(2, 6)]
        );
        assert_eq!(kv[14].1, "true");
    }

    #[test]
    fn csv_row_matches_header() {
        let r = report();
        assert_eq!(
            r.csv_row().split(',').count(),
            EstimateReport::csv_header().split(',').count()
        );
    }

    #[test]
    fn missing_pieces_are_nan() {
        let mut r = report();
        r.diffusion = None;
        r.covariance = None;
        let kv = parse_key_value(&r.to_key_value()).unwrap();
        assert!(kv[12].1.parse::<f64>().unwrap().is_nan());
        assert!(kv[52].1.parse::<f64>().unwrap().is_nan());
        assert!(r.theta_hat().is_none());
    }

    #[test]
    fn parser_rejects_garbage_and_skips_comments() {
        assert!(
            parse_key_value("# only comment\n\n a = 1 # trailing\n").unwrap()
                == vec![("a".into(), "1".into())]
        );
        assert!(matches!(
            parse_key_value("novalue"),
            Err(Error::ConfigParse(_))
        ));
        assert!(matches!(
            parse_key_value(" = 3"),
            Err(Error::ConfigParse(_))
        ));
    }
}
