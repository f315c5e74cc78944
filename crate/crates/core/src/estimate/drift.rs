use num_complex::Complex64;

use super::WeightFn;
use crate::error::{Error, Result};
use crate::mat2::{Mat2, Vec2};
use crate::model::Drift;
use crate::simulate::ObservationSeries;
use crate::stats::CompensatedSum;

/// Weighted sample moments entering the closed-form `(ρ̂, γ̂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftStatistics {
    pub n: usize,
    /// `ḡ = (1/n) Σ g_k`
    pub g_bar: f64,
    /// `X̄ = (1/n) Σ g_k X_k`
    pub x_bar: Vec2,
    /// `X̃ = (1/n) Σ g_k X_{k−1}`
    pub x_tilde: Vec2,
    /// `T̄₁ = (1/n) Σ (g_kX_k − X̄)(g_kX_{k−1} − X̃)ᵀ`
    pub t1_bar: Mat2,
    /// `T̃₁ = (1/n) Σ (g_k − ḡ)(g_kX_kX_{k−1}ᵀ − S₁)`, `S₁ = (1/n) Σ g_kX_kX_{k−1}ᵀ`
    pub t1_tilde: Mat2,
    /// `T̄₂ = (1/n) Σ (g_kX_{k−1} − X̃)(g_kX_{k−1} − X̃)ᵀ`
    pub t2_bar: Mat2,
    /// `T̃₂ = (1/n) Σ (g_k − ḡ)(g_kX_{k−1}X_{k−1}ᵀ − S₂)`, `S₂ = (1/n) Σ g_kX_{k−1}X_{k−1}ᵀ`
    pub t2_tilde: Mat2,
    /// `S₂`, kept as the scale for the singular-design test.
    pub s2: Mat2,
}

impl DriftStatistics {
    /// `T̄₁ − T̃₁` (equals `ḡS₁ − X̄X̃ᵀ`).
    pub fn cross_moment(&self) -> Mat2 {
        self.t1_bar - self.t1_tilde
    }

    /// `T̄₂ − T̃₂` (equals `ḡS₂ − X̃X̃ᵀ`).
    pub fn design(&self) -> Mat2 {
        self.t2_bar - self.t2_tilde
    }
}

fn mat(a: &[f64]) -> Mat2 {
    Mat2::new(a[0], a[1], a[2], a[3])
}

/// Two compensated passes over the series: weighted means first, then the
/// centred cross products.
pub fn drift_statistics(series: &ObservationSeries, g: &WeightFn) -> Result<DriftStatistics> {
    let n = series.n();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 transitions, got {n}"
        )));
    }
    let w = g.weights(series)?;
    let nf = n as f64;

    let mut first = CompensatedSum::<13>::new();
    for k in 1..=n {
        let (x, xp, gk) = (series.obs[k], series.obs[k - 1], w[k - 1]);
        let s1 = x.outer(xp);
        let s2 = xp.outer(xp);
        first.add(&[
            gk,
            gk * x.v1,
            gk * x.v2,
            gk * xp.v1,
            gk * xp.v2,
            gk * s1.m11,
            gk * s1.m12,
            gk * s1.m21,
            gk * s1.m22,
            gk * s2.m11,
            gk * s2.m12,
            gk * s2.m21,
            gk * s2.m22,
        ]);
    }
    let m = first.total().map(|v| v / nf);
    let g_bar = m[0];
    let x_bar = Vec2::new(m[1], m[2]);
    let x_tilde = Vec2::new(m[3], m[4]);
    let s1 = mat(&m[5..9]);
    let s2 = mat(&m[9..13]);

    let mut second = CompensatedSum::<16>::new();
    for k in 1..=n {
        let (x, xp, gk) = (series.obs[k], series.obs[k - 1], w[k - 1]);
        let t1b = (gk * x - x_bar).outer(gk * xp - x_tilde);
        let t1t = (gk - g_bar) * (gk * x.outer(xp) - s1);
        let t2b = (gk * xp - x_tilde).outer(gk * xp - x_tilde);
        let t2t = (gk - g_bar) * (gk * xp.outer(xp) - s2);
        let mut row = [0.0; 16];
        row[..4].copy_from_slice(&t1b.to_array());
        row[4..8].copy_from_slice(&t1t.to_array());
        row[8..12].copy_from_slice(&t2b.to_array());
        row[12..].copy_from_slice(&t2t.to_array());
        second.add(&row);
    }
    let t = second.total().map(|v| v / nf);
    Ok(DriftStatistics {
        n,
        g_bar,
        x_bar,
        x_tilde,
        t1_bar: mat(&t[0..4]),
        t1_tilde: mat(&t[4..8]),
        t2_bar: mat(&t[8..12]),
        t2_tilde: mat(&t[12..16]),
        s2,
    })
}

/// How the weighted intercept is normalised by `ḡ`.
///
/// The least-squares minimiser is `ρ̂ = ḡ⁻¹(X̄ − γ̂X̃)`; the multiplicative
/// variant `ḡ(X̄ − γ̂X̃)` is kept for comparison and only agrees with it
/// when `ḡ = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RhoNormalization {
    #[default]
    Divide,
    Multiply,
}

impl RhoNormalization {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "divide" => Ok(RhoNormalization::Divide),
            "multiply" => Ok(RhoNormalization::Multiply),
            other => Err(Error::ConfigParse(format!(
                "unknown rho normalization '{other}' (expected divide|multiply)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RhoNormalization::Divide => "divide",
            RhoNormalization::Multiply => "multiply",
        }
    }
}

/// Drift fit. `a_hat`/`b_hat` are present only when `admissible`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftEstimate {
    pub rho_hat: Vec2,
    pub gamma_hat: Mat2,
    pub a_hat: Option<Vec2>,
    pub b_hat: Option<Mat2>,
    /// Both eigenvalues of `γ̂` have positive real part and modulus below 1,
    /// so `B̂ = −ln(γ̂)/Δ` exists and is stable.
    pub admissible: bool,
    pub gamma_eigenvalues: [Complex64; 2],
    pub n: usize,
    pub delta: f64,
}

impl DriftEstimate {
    /// `(Â, B̂)` or [`Error::NonAdmissibleGamma`].
    pub fn require_admissible(&self) -> Result<Drift> {
        match (self.a_hat, self.b_hat) {
            (Some(a), Some(b)) if self.admissible => Ok(Drift::new(a, b)),
            _ => Err(Error::NonAdmissibleGamma(format!(
                "{} and {}",
                self.gamma_eigenvalues[0], self.gamma_eigenvalues[1]
            ))),
        }
    }
}

pub fn estimate_drift(series: &ObservationSeries, g: &WeightFn) -> Result<DriftEstimate> {
    estimate_drift_with(series, g, RhoNormalization::default())
}

pub fn estimate_drift_with(
    series: &ObservationSeries,
    g: &WeightFn,
    norm: RhoNormalization,
) -> Result<DriftEstimate> {
    let st = drift_statistics(series, g)?;
    let design = st.design();
    if design.max_abs() <= 1e-12 * st.s2.max_abs() {
        return Err(Error::SingularDesign(format!(
            "lagged observations have no spread (|T2 - T2~| = {:e})",
            design.max_abs()
        )));
    }
    let design_inv = design
        .inverse()
        .map_err(|e| Error::SingularDesign(format!("T2 - T2~ not invertible: {e}")))?;
    let gamma_hat = st.cross_moment() * design_inv;
    let centred = st.x_bar - gamma_hat * st.x_tilde;
    let rho_hat = match norm {
        RhoNormalization::Divide => (1.0 / st.g_bar) * centred,
        RhoNormalization::Multiply => st.g_bar * centred,
    };

    let eig = gamma_hat.eigenvalues();
    let admissible = eig.iter().all(|z| z.re > 0.0 && z.norm() < 1.0);
    let (a_hat, b_hat) = if admissible {
        let b = (-1.0 / series.delta) * gamma_hat.logm()?;
        let a = b * ((Mat2::IDENTITY - gamma_hat).inverse()? * rho_hat);
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(DriftEstimate {
        rho_hat,
        gamma_hat,
        a_hat,
        b_hat,
        admissible,
        gamma_eigenvalues: eig,
        n: st.n,
        delta: series.delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: &[(f64, f64)]) -> ObservationSeries {
        ObservationSeries::external(1.0, points.iter().map(|&(a, b)| Vec2::new(a, b)).collect())
            .unwrap()
    }

    /// Noise-free orbit of `x ↦ ρ + γx`, with `γ` a damped rotation so the
    /// lagged design keeps rank 2.
    fn noiseless(n: usize) -> (ObservationSeries, Vec2, Mat2) {
        let (r, th) = (0.995f64, 0.4f64);
        let gamma = Mat2::new(r * th.cos(), -r * th.sin(), r * th.sin(), r * th.cos());
        let fixed = Vec2::new(5.0, 5.0);
        let rho = fixed - gamma * fixed;
        let mut x = Vec2::new(7.0, 5.0);
        let mut obs = vec![x];
        for _ in 0..n {
            x = rho + gamma * x;
            obs.push(x);
        }
        (ObservationSeries::external(1.0, obs).unwrap(), rho, gamma)
    }

    #[test]
    fn three_point_statistics_by_hand() {
        // X = (1,0), (0,1), (1,1), (2,0); g ≡ 1, n = 3. Evaluated by hand:
        //   X̄ = (1, 2/3), X̃ = (2/3, 2/3)
        //   lagged deviations (1/3,−2/3), (−2/3,1/3), (1/3,1/3)
        //   leading deviations (−1,1/3), (0,1/3), (1,−2/3)
        //   T̄₂ = [[2/9, −1/9], [−1/9, 2/9]], T̄₁ = [[0, 1/3], [−1/9, −1/9]]
        let s = series(&[(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (2.0, 0.0)]);
        let st = drift_statistics(&s, &WeightFn::Constant).unwrap();
        let close = |a: Mat2, b: Mat2| (a - b).max_abs() < 1e-15;
        assert_eq!(st.n, 3);
        assert_eq!(st.g_bar, 1.0);
        assert!((st.x_bar - Vec2::new(1.0, 2.0 / 3.0)).max_abs() < 1e-15);
        assert!((st.x_tilde - Vec2::new(2.0 / 3.0, 2.0 / 3.0)).max_abs() < 1e-15);
        assert!(close(
            st.t2_bar,
            Mat2::new(2.0 / 9.0, -1.0 / 9.0, -1.0 / 9.0, 2.0 / 9.0)
        ));
        assert!(close(
            st.t1_bar,
            Mat2::new(0.0, 1.0 / 3.0, -1.0 / 9.0, -1.0 / 9.0)
        ));
        assert_eq!(st.t1_tilde, Mat2::ZERO);
        assert_eq!(st.t2_tilde, Mat2::ZERO);
    }

    #[test]
    fn weighted_statistics_match_expanded_form() {
        // T̄ − T̃ = ḡS − (weighted mean)(weighted mean)ᵀ, evaluated directly
        let (s, _, _) = noiseless(40);
        let g = WeightFn::InverseNorm;
        let st = drift_statistics(&s, &g).unwrap();
        let n = s.n() as f64;
        let (mut gs, mut s1, mut s2, mut xb, mut xt) =
            (0.0, Mat2::ZERO, Mat2::ZERO, Vec2::ZERO, Vec2::ZERO);
        for k in 1..=s.n() {
            let (x, xp) = (s.obs[k], s.obs[k - 1]);
            let gk = g.eval(xp);
            gs += gk / n;
            s1 += (gk / n) * x.outer(xp);
            s2 += (gk / n) * xp.outer(xp);
            xb += (gk / n) * x;
            xt += (gk / n) * xp;
        }
        assert!((st.cross_moment() - (gs * s1 - xb.outer(xt))).max_abs() < 1e-12);
        assert!((st.design() - (gs * s2 - xt.outer(xt))).max_abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_singular() {
        let s = series(&[(2.0, 3.0); 10]);
        let st = drift_statistics(&s, &WeightFn::Constant).unwrap();
        assert!(st.design().max_abs() < 1e-14);
        assert!(matches!(
            estimate_drift(&s, &WeightFn::Constant),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn too_short_series() {
        let s = series(&[(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)]);
        assert!(estimate_drift(&s, &WeightFn::Constant).is_err());
    }

    #[test]
    fn noiseless_regression_is_recovered() {
        let (s, rho, gamma) = noiseless(60);
        for g in [WeightFn::Constant, WeightFn::InverseNorm] {
            let est = estimate_drift(&s, &g).unwrap();
            assert!((est.gamma_hat - gamma).max_abs() < 1e-10, "{g:?}");
            assert!((est.rho_hat - rho).max_abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn custom_unit_weight_is_bit_identical_to_constant() {
        let (s, _, _) = noiseless(30);
        let a = estimate_drift(&s, &WeightFn::Constant).unwrap();
        let b = estimate_drift(&s, &WeightFn::custom("one", |_| 1.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weight_scaling_invariance() {
        let (s, _, _) = noiseless(30);
        let a = estimate_drift(&s, &WeightFn::InverseNorm).unwrap();
        let b =
            estimate_drift(&s, &WeightFn::custom("scaled", |x| 3.5 / (1.0 + x.norm()))).unwrap();
        assert!((a.gamma_hat - b.gamma_hat).max_abs() < 1e-12);
        assert!((a.rho_hat - b.rho_hat).max_abs() < 1e-12);
        let m =
            estimate_drift_with(&s, &WeightFn::InverseNorm, RhoNormalization::Multiply).unwrap();
        let sm = drift_statistics(&s, &WeightFn::InverseNorm).unwrap();
        assert!((m.rho_hat - (sm.g_bar * sm.g_bar) * a.rho_hat).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_weight() {
        let (s, _, _) = noiseless(10);
        assert!(estimate_drift(&s, &WeightFn::custom("neg", |_| -1.0)).is_err());
    }

    #[test]
    fn non_admissible_gamma_is_reported() {
        // damped rotation by 0.4 rad with modulus 0.995 is admissible; a pure
        // reflection is not
        let (s, _, _) = noiseless(60);
        assert!(estimate_drift(&s, &WeightFn::Constant).unwrap().admissible);
        let mut obs = Vec::new();
        let mut x = Vec2::new(3.0, 2.0);
        let gamma = Mat2::new(-0.5, 0.3, -0.3, -0.5);
        for _ in 0..30 {
            obs.push(x);
            x = Vec2::new(4.0, 4.0) + gamma * x;
        }
        let s = ObservationSeries::external(1.0, obs).unwrap();
        let est = estimate_drift(&s, &WeightFn::Constant).unwrap();
        assert!(!est.admissible);
        assert!(est.a_hat.is_none() && est.b_hat.is_none());
        assert!((est.gamma_hat - gamma).max_abs() < 1e-9);
        assert!(matches!(
            est.require_admissible(),
            Err(Error::NonAdmissibleGamma(_))
        ));
    }
}
