use nalgebra::{SMatrix, SVector};

use super::WeightFn;
use crate::error::{Error, Result};
use crate::mat2::{Mat2, Vec2};
use crate::model::{Drift, EtaBasis};
use crate::simulate::ObservationSeries;
use crate::stats::CompensatedSum;

pub type Matrix8 = SMatrix<f64, 8, 8>;
type Vector8 = SVector<f64, 8>;

/// Relative central-difference step for all θ-derivatives.
pub const FD_REL_STEP: f64 = 1e-5;

/// Plug-in sandwich `V̂⁻¹ŴV̂⁻ᵀ/n`, parameter order
/// `(a₁, a₂, b₁₁, b₁₂, b₂₁, b₂₂, σ₁, σ₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichCovariance {
    pub v_hat: Matrix8,
    pub w_hat: Matrix8,
    /// Covariance of `θ̂` itself (already divided by `n`).
    pub cov_hat: Matrix8,
    pub n: usize,
}

impl SandwichCovariance {
    /// `V̂⁻¹ŴV̂⁻ᵀ`, the asymptotic covariance of `√n(θ̂ − θ)`.
    pub fn asymptotic(&self) -> Matrix8 {
        self.cov_hat * self.n as f64
    }

    pub fn std_errors(&self) -> [f64; 8] {
        std::array::from_fn(|i| self.cov_hat[(i, i)].max(0.0).sqrt())
    }

    /// `∇ᵀ cov ∇` for a smooth scalar function of `θ` with gradient `grad`.
    pub fn variance_of(&self, grad: &[f64; 8]) -> f64 {
        let g = Vector8::from_column_slice(grad);
        (g.transpose() * self.cov_hat * g)[(0, 0)]
    }
}

fn drift_of(theta: &[f64; 8]) -> Drift {
    let [a1, a2, b11, b12, b21, b22, ..] = *theta;
    Drift::new(Vec2::new(a1, a2), Mat2::new(b11, -b12, -b21, b22))
}

/// Model quantities entering the estimating equation at one `θ`.
struct Local {
    rho: Vec2,
    gamma: Mat2,
    eta: EtaBasis,
    /// `σ₁²η₁ + σ₂²η₂` in affine-basis form.
    v: [Mat2; 3],
}

impl Local {
    fn at(theta: &[f64; 8], delta: f64) -> Result<Self> {
        let drift = drift_of(theta);
        let (rho, gamma) = drift.regression(delta)?;
        let eta = EtaBasis::new(&drift, delta)?;
        let v = eta.variance_basis(Vec2::new(theta[6] * theta[6], theta[7] * theta[7]));
        Ok(Local { rho, gamma, eta, v })
    }

    fn regression_vec(&self) -> [f64; 6] {
        [
            self.rho.v1,
            self.rho.v2,
            self.gamma.m11,
            self.gamma.m12,
            self.gamma.m21,
            self.gamma.m22,
        ]
    }
}

/// Central differences of `(ρ, γ)` and of the `v` basis in each coordinate.
struct Derivatives {
    rho: [Vec2; 8],
    gamma: [Mat2; 8],
    v: [[Mat2; 3]; 8],
}

fn perturbed(theta: &[f64; 8], i: usize, h: f64) -> [f64; 8] {
    let mut t = *theta;
    t[i] += h;
    t
}

fn step(theta_i: f64, rel: f64) -> f64 {
    rel * (1.0 + theta_i.abs())
}

fn derivatives(theta: &[f64; 8], delta: f64) -> Result<Derivatives> {
    let mut d = Derivatives {
        rho: [Vec2::ZERO; 8],
        gamma: [Mat2::ZERO; 8],
        v: [[Mat2::ZERO; 3]; 8],
    };
    for i in 0..8 {
        let h = step(theta[i], FD_REL_STEP);
        let hi = Local::at(&perturbed(theta, i, h), delta)?;
        let lo = Local::at(&perturbed(theta, i, -h), delta)?;
        let s = 1.0 / (2.0 * h);
        d.rho[i] = s * (hi.rho - lo.rho);
        d.gamma[i] = s * (hi.gamma - lo.gamma);
        for j in 0..3 {
            d.v[i][j] = s * (hi.v[j] - lo.v[j]);
        }
    }
    Ok(d)
}

/// `∂(ρ₁, ρ₂, γ₁₁, γ₁₂, γ₂₁, γ₂₂)/∂θᵢ` by central differences with step
/// `rel_step·(1 + |θᵢ|)`; row `i` is the derivative in `θᵢ`.
pub fn regression_jacobian(theta: &[f64; 8], delta: f64, rel_step: f64) -> Result<[[f64; 6]; 8]> {
    let mut out = [[0.0; 6]; 8];
    for (i, row) in out.iter_mut().enumerate() {
        let h = step(theta[i], rel_step);
        let hi = Local::at(&perturbed(theta, i, h), delta)?.regression_vec();
        let lo = Local::at(&perturbed(theta, i, -h), delta)?.regression_vec();
        for j in 0..6 {
            row[j] = (hi[j] - lo[j]) / (2.0 * h);
        }
    }
    Ok(out)
}

fn affine(b: &[Mat2; 3], x: Vec2) -> Mat2 {
    b[0] + x.v1 * b[1] + x.v2 * b[2]
}

/// Sandwich covariance of the joint estimating equation
/// `Σ g_k{w₀(X_{k−1})(X_k − m) + w₁(X_{k−1})vec(Z_k − v)} = 0`.
///
/// `w₀` has rows `∂m/∂θᵢ` for the six drift coordinates and zero rows for
/// `σ`; `w₁` has rows `vec(η₁)`, `vec(η₂)` in the `σ` slots and zeros
/// elsewhere.
pub fn sandwich_covariance(
    series: &ObservationSeries,
    g: &WeightFn,
    theta_hat: &[f64; 8],
) -> Result<SandwichCovariance> {
    let drift = drift_of(theta_hat);
    let eig = drift.b.eigenvalues();
    if eig.iter().any(|z| z.re <= 0.0) || !theta_hat.iter().all(|t| t.is_finite()) {
        return Err(Error::NonAdmissibleGamma(format!(
            "B eigenvalues {} and {}",
            eig[0], eig[1]
        )));
    }
    let n = series.n();
    if n == 0 {
        return Err(Error::InvalidParameter("empty series".into()));
    }
    let delta = series.delta;
    let here = Local::at(theta_hat, delta)?;
    let d = derivatives(theta_hat, delta)?;
    let w = g.weights(series)?;

    let mut v_acc = CompensatedSum::<64>::new();
    let mut w_acc = CompensatedSum::<64>::new();
    let mut vk = [0.0; 64];
    let mut wk = [0.0; 64];
    for k in 1..=n {
        let (x, xp, gk) = (series.obs[k], series.obs[k - 1], w[k - 1]);
        let resid = x - (here.rho + here.gamma * xp);
        let z_minus_v = (resid.outer(resid) - affine(&here.v, xp)).vec();
        let (e1, e2) = here.eta.eval(xp);
        let (e1, e2) = (e1.vec(), e2.vec());

        let dm: [Vec2; 8] = std::array::from_fn(|i| d.rho[i] + d.gamma[i] * xp);
        let dv = std::array::from_fn::<_, 8, _>(|i| affine(&d.v[i], xp).vec());

        // Rows 0..6 from w₀, rows 6, 7 from w₁.
        let mut h = [0.0; 8];
        for i in 0..6 {
            h[i] = dm[i].dot(resid);
        }
        h[6] = e1.dot(&z_minus_v);
        h[7] = e2.dot(&z_minus_v);

        for i in 0..8 {
            for j in 0..8 {
                let row = if i < 6 {
                    dm[i].dot(dm[j])
                } else {
                    let e = if i == 6 { &e1 } else { &e2 };
                    e.dot(&dv[j])
                };
                vk[8 * i + j] = -gk * row;
                wk[8 * i + j] = gk * gk * h[i] * h[j];
            }
        }
        v_acc.add(&vk);
        w_acc.add(&wk);
    }
    let nf = n as f64;
    let v_hat = Matrix8::from_row_slice(&v_acc.total().map(|x| x / nf));
    let w_hat = Matrix8::from_row_slice(&w_acc.total().map(|x| x / nf));

    let sv = v_hat.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-12 * smax) {
        return Err(Error::SingularV { smallest_sv: smin });
    }
    let v_inv = v_hat
        .try_inverse()
        .ok_or(Error::SingularV { smallest_sv: smin })?;
    let mut cov_hat = v_inv * w_hat * v_inv.transpose() / nf;
    cov_hat = 0.5 * (cov_hat + cov_hat.transpose());
    Ok(SandwichCovariance {
        v_hat,
        w_hat,
        cov_hat,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::simulate::{simulate_exact_diagonal, simulate_path, SimConfig};

    fn coupled() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0, 0.2, 0.3, 1.0, 0.5, 0.7).unwrap()
    }

    #[test]
    fn jacobian_is_stable_under_step_halving() {
        for theta in [
            coupled().theta(),
            ModelParams::diagonal(1.0, 1.0, 1.0).unwrap().theta(),
        ] {
            let j1 = regression_jacobian(&theta, 1.0, FD_REL_STEP).unwrap();
            let j2 = regression_jacobian(&theta, 1.0, FD_REL_STEP / 2.0).unwrap();
            let scale = j1.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for (r1, r2) in j1.iter().zip(&j2) {
                for (a, b) in r1.iter().zip(r2) {
                    assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_scalar_closed_form_on_diagonal() {
        // γ = e^{−bΔ}, ρ = a(1 − e^{−bΔ})/b per coordinate.
        let (a, b) = (1.3, 0.7);
        let theta = ModelParams::diagonal(a, b, 1.0).unwrap().theta();
        let j = regression_jacobian(&theta, 1.0, FD_REL_STEP).unwrap();
        let e = (-b).exp();
        let drho_da = (1.0 - e) / b;
        let drho_db = a * (e / b - (1.0 - e) / (b * b));
        assert!((j[0][0] - drho_da).abs() < 1e-9);
        assert!((j[2][0] - drho_db).abs() < 1e-9);
        assert!((j[2][2] + e).abs() < 1e-9);
        assert!(j[0][2].abs() < 1e-12 && j[6][0].abs() < 1e-12);
    }

    #[test]
    fn w_is_symmetric_psd_and_cov_symmetric() {
        let mut cfg = SimConfig::new(coupled(), 400, 11);
        cfg.euler_dt = 1e-2;
        let s = simulate_path(&cfg).unwrap();
        let sc = sandwich_covariance(&s, &WeightFn::InverseNorm, &coupled().theta()).unwrap();
        let w = &sc.w_hat;
        assert!((w - w.transpose()).amax() <= 1e-14 * w.amax());
        let eig = w.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-10 * eig.max());
        assert_eq!(sc.cov_hat, sc.cov_hat.transpose());
        assert!(sc.std_errors().iter().all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn constant_series_makes_v_singular() {
        let s = ObservationSeries::external(1.0, vec![Vec2::new(1.0, 1.0); 20]).unwrap();
        let r = sandwich_covariance(&s, &WeightFn::Constant, &coupled().theta());
        assert!(matches!(r, Err(Error::SingularV { .. })));
    }

    #[test]
    fn rejects_unstable_drift() {
        let s = ObservationSeries::external(
            1.0,
            vec![
                Vec2::new(1.0, 2.0),
                Vec2::new(2.0, 1.0),
                Vec2::new(1.5, 1.5),
            ],
        )
        .unwrap();
        let mut theta = coupled().theta();
        theta[2] = -1.0;
        assert!(sandwich_covariance(&s, &WeightFn::Constant, &theta).is_err());
    }

    #[test]
    fn variance_of_picks_diagonal_entry() {
        let p = ModelParams::diagonal(1.0, 1.0, 1.0).unwrap();
        let s = simulate_exact_diagonal(&SimConfig::new(p, 300, 3)).unwrap();
        let sc = sandwich_covariance(&s, &WeightFn::Constant, &p.theta()).unwrap();
        let mut e = [0.0; 8];
        e[2] = 1.0;
        assert!((sc.variance_of(&e) - sc.cov_hat[(2, 2)]).abs() < 1e-15);
        assert!((sc.asymptotic()[(2, 2)] - 300.0 * sc.cov_hat[(2, 2)]).abs() < 1e-12);
    }
}
