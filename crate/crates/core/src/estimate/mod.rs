//! Weighted conditional least squares estimation.
//!
//! Drift: `(ρ, γ)` of the one-step regression `X_k = ρ + γX_{k−1} + ε_k` by
//! weighted least squares, then `B̂ = −ln(γ̂)/Δ` and
//! `Â = B̂(I − γ̂)⁻¹ρ̂`. Diffusion: `(σ₁², σ₂²)` by weighted least squares of
//! the squared residual matrices on `σ₁²η₁ + σ₂²η₂`. The asymptotic
//! covariance comes from the sandwich `V⁻¹WV⁻ᵀ/n` of the joint estimating
//! equation.

mod diffusion;
mod drift;
mod report;
mod sandwich;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mat2::Vec2;
use crate::simulate::ObservationSeries;

pub use diffusion::{estimate_diffusion, solve_diffusion_normal_equations, DiffusionEstimate};
pub use drift::{
    drift_statistics, estimate_drift, estimate_drift_with, DriftEstimate, DriftStatistics,
    RhoNormalization,
};
pub use report::{parse_key_value, EstimateReport, REPORT_FIELDS};
pub use sandwich::{
    regression_jacobian, sandwich_covariance, Matrix8, SandwichCovariance, FD_REL_STEP,
};

/// Observation weight `g(X_{k−1})`.
#[derive(Clone)]
pub enum WeightFn {
    /// `g ≡ 1`: plain conditional least squares.
    Constant,
    /// `g(x) = 1/(1 + |x|)` with the Euclidean norm.
    InverseNorm,
    Custom {
        name: String,
        f: Arc<dyn Fn(Vec2) -> f64 + Send + Sync>,
    },
}

impl WeightFn {
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        WeightFn::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn tag(&self) -> &str {
        match self {
            WeightFn::Constant => "constant",
            WeightFn::InverseNorm => "inverse_norm",
            WeightFn::Custom { name, .. } => name,
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "constant" => Ok(WeightFn::Constant),
            "inverse_norm" => Ok(WeightFn::InverseNorm),
            other => Err(Error::ConfigParse(format!(
                "unknown weight '{other}' (expected constant|inverse_norm)"
            ))),
        }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        match self {
            WeightFn::Constant => 1.0,
            WeightFn::InverseNorm => 1.0 / (1.0 + x.norm()),
            WeightFn::Custom { f, .. } => f(x),
        }
    }

    /// `g_k = g(X_{k−1})` for `k = 1..n`; every weight must be positive and
    /// finite.
    pub(crate) fn weights(&self, series: &ObservationSeries) -> Result<Vec<f64>> {
        series.obs[..series.n()]
            .iter()
            .map(|&x| {
                let g = self.eval(x);
                if g > 0.0 && g.is_finite() {
                    Ok(g)
                } else {
                    Err(Error::InvalidParameter(format!(
                        "weight g({x:?}) = {g} is not positive and finite"
                    )))
                }
            })
            .collect()
    }
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightFn({})", self.tag())
    }
}

/// Knobs for [`estimate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateOptions {
    pub rho_normalization: RhoNormalization,
    pub with_covariance: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            rho_normalization: RhoNormalization::default(),
            with_covariance: true,
        }
    }
}

/// Full fit: drift, then (when the drift is admissible) diffusion and the
/// sandwich covariance.
///
/// A non-admissible `γ̂` is not an error here: the report carries `ρ̂, γ̂`
/// with `admissible = false` and no `(Â, B̂, σ̂²)`.
pub fn estimate(
    series: &ObservationSeries,
    g: &WeightFn,
    opts: EstimateOptions,
) -> Result<EstimateReport> {
    let drift = estimate_drift_with(series, g, opts.rho_normalization)?;
    if !drift.admissible {
        return Ok(EstimateReport {
            drift,
            diffusion: None,
            covariance: None,
        });
    }
    let diffusion = estimate_diffusion(series, g, &drift)?;
    let covariance = if opts.with_covariance {
        let theta = EstimateReport::theta_from(&drift, &diffusion).expect("admissible drift");
        Some(sandwich_covariance(series, g, &theta)?)
    } else {
        None
    };
    Ok(EstimateReport {
        drift,
        diffusion: Some(diffusion),
        covariance,
    })
}
