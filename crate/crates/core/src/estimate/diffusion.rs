use super::{DriftEstimate, WeightFn};
use crate::error::{Error, Result};
use crate::mat2::{Mat2, Vec2};
use crate::model::EtaBasis;
use crate::simulate::ObservationSeries;
use crate::stats::CompensatedSum;

/// Fitted `(σ₁², σ₂²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionEstimate {
    /// Unconstrained least-squares solution; may be negative in short samples.
    pub sigma1_sq_raw: f64,
    pub sigma2_sq_raw: f64,
    /// Raw values clamped at zero.
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// Determinant of the 2×2 normal-equation matrix.
    pub conditioning: f64,
}

/// Solves the normal equations of
/// `Σ g_k ‖vec(Z_k − σ₁²η₁,k − σ₂²η₂,k)‖²`
/// over terms `(g_k, Z_k, η₁,k, η₂,k)` by Cramer's rule.
pub fn solve_diffusion_normal_equations<I>(terms: I) -> Result<DiffusionEstimate>
where
    I: IntoIterator<Item = (f64, Mat2, Mat2, Mat2)>,
{
    let mut acc = CompensatedSum::<5>::new();
    let mut n = 0usize;
    for (g, z, e1, e2) in terms {
        let (v1, v2, vz) = (e1.vec(), e2.vec(), z.vec());
        acc.add(&[
            g * v1.dot(&v1),
            g * v1.dot(&v2),
            g * v2.dot(&v2),
            g * vz.dot(&v1),
            g * vz.dot(&v2),
        ]);
        n += 1;
    }
    let [m11, m12, m22, r1, r2] = acc.total().map(|v| v / n.max(1) as f64);
    let det = m11 * m22 - m12 * m12;
    if !(det >= 1e-12 * m11 * m22) || !(det > 0.0) {
        return Err(Error::IllConditioned { det });
    }
    let s1 = (r1 * m22 - r2 * m12) / det;
    let s2 = (r2 * m11 - r1 * m12) / det;
    Ok(DiffusionEstimate {
        sigma1_sq_raw: s1,
        sigma2_sq_raw: s2,
        sigma1_sq: s1.max(0.0),
        sigma2_sq: s2.max(0.0),
        conditioning: det,
    })
}

/// Diffusion fit given an admissible drift fit. Residuals use
/// `m(x) = ρ̂ + γ̂x`; `η̂ᵢ(X_{k−1})` is evaluated under `(Â, B̂)` at each
/// conditioning state.
pub fn estimate_diffusion(
    series: &ObservationSeries,
    g: &WeightFn,
    drift: &DriftEstimate,
) -> Result<DiffusionEstimate> {
    let fitted = drift.require_admissible()?;
    let basis = EtaBasis::new(&fitted, series.delta)?;
    let w = g.weights(series)?;
    let (rho, gamma) = (drift.rho_hat, drift.gamma_hat);
    let terms = (1..=series.n()).map(|k| {
        let xp: Vec2 = series.obs[k - 1];
        let resid = series.obs[k] - (rho + gamma * xp);
        let (e1, e2) = basis.eval(xp);
        (w[k - 1], resid.outer(resid), e1, e2)
    });
    solve_diffusion_normal_equations(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Drift, ModelParams};

    /// Closed form for state-independent `η₁, η₂`:
    /// `σ̂₁² = (φ₁₁ − φ₁₂)/ψ`, `σ̂₂² = (φ₂₁ − φ₂₂)/ψ` with
    /// `φ₁₁ = (1/n)Σ g⟨Z,η₁⟩⟨η₂,η₂⟩`, `φ₁₂ = (1/n)Σ g⟨Z,η₂⟩⟨η₁,η₂⟩`,
    /// `φ₂₁ = (1/n)Σ g⟨Z,η₂⟩⟨η₁,η₁⟩`, `φ₂₂ = (1/n)Σ g⟨Z,η₁⟩⟨η₁,η₂⟩`,
    /// `ψ = ḡ(⟨η₁,η₁⟩⟨η₂,η₂⟩ − ⟨η₁,η₂⟩²)`.
    fn constant_eta_closed_form(gs: &[f64], zs: &[Mat2], e1: Mat2, e2: Mat2) -> (f64, f64) {
        let n = gs.len() as f64;
        let (v1, v2) = (e1.vec(), e2.vec());
        let (p11, p12, p22) = (v1.dot(&v1), v1.dot(&v2), v2.dot(&v2));
        let (mut f11, mut f12, mut f21, mut f22, mut gbar) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (g, z) in gs.iter().zip(zs) {
            let vz = z.vec();
            f11 += g * vz.dot(&v1) * p22 / n;
            f12 += g * vz.dot(&v2) * p12 / n;
            f21 += g * vz.dot(&v2) * p11 / n;
            f22 += g * vz.dot(&v1) * p12 / n;
            gbar += g / n;
        }
        let psi = gbar * (p11 * p22 - p12 * p12);
        ((f11 - f12) / psi, (f21 - f22) / psi)
    }

    #[test]
    fn reduces_to_closed_form_for_constant_eta() {
        let e1 = Mat2::new(0.4, 0.1, 0.1, 0.05);
        let e2 = Mat2::new(0.03, 0.08, 0.08, 0.5);
        let gs: Vec<f64> = (0..50).map(|k| 1.0 / (1.0 + 0.1 * k as f64)).collect();
        let zs: Vec<Mat2> = (0..50)
            .map(|k| {
                let r = Vec2::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos());
                r.outer(r)
            })
            .collect();
        let fit =
            solve_diffusion_normal_equations(gs.iter().zip(&zs).map(|(&g, &z)| (g, z, e1, e2)))
                .unwrap();
        let (c1, c2) = constant_eta_closed_form(&gs, &zs, e1, e2);
        assert!((fit.sigma1_sq_raw - c1).abs() < 1e-12 * c1.abs().max(1.0));
        assert!((fit.sigma2_sq_raw - c2).abs() < 1e-12 * c2.abs().max(1.0));
    }

    #[test]
    fn exact_recovery_from_synthetic_residuals() {
        let p = ModelParams::new(1.0, 0.6, 1.0, 0.2, 0.3, 0.8, 0.5, 0.7).unwrap();
        let basis = EtaBasis::new(&p.drift(), 1.0).unwrap();
        let xs: Vec<Vec2> = (0..200)
            .map(|k| Vec2::new(1.0 + (k as f64).sin(), 1.5 + (0.3 * k as f64).cos()))
            .collect();
        let terms = xs.iter().map(|&x| {
            let (e1, e2) = basis.eval(x);
            (WeightFn::InverseNorm.eval(x), 0.25 * e1 + 0.49 * e2, e1, e2)
        });
        let fit = solve_diffusion_normal_equations(terms).unwrap();
        assert!((fit.sigma1_sq - 0.25).abs() < 1e-9);
        assert!((fit.sigma2_sq - 0.49).abs() < 1e-9);
    }

    #[test]
    fn clamps_negative_and_keeps_raw() {
        let e1 = Mat2::diag(1.0, 0.0);
        let e2 = Mat2::diag(0.0, 1.0);
        let z = Mat2::diag(-0.2, 0.3);
        let fit = solve_diffusion_normal_equations([(1.0, z, e1, e2); 4]).unwrap();
        assert!((fit.sigma1_sq_raw + 0.2).abs() < 1e-15);
        assert_eq!(fit.sigma1_sq, 0.0);
        assert!((fit.sigma2_sq - 0.3).abs() < 1e-15);
    }

    #[test]
    fn collinear_etas_are_ill_conditioned() {
        let e = Mat2::new(1.0, 0.2, 0.2, 0.5);
        let r = solve_diffusion_normal_equations([(1.0, e, e, 2.0 * e); 5]);
        assert!(matches!(r, Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn requires_admissible_drift() {
        let s = ObservationSeries::external(1.0, vec![Vec2::new(1.0, 1.0); 5]).unwrap();
        let d = DriftEstimate {
            rho_hat: Vec2::ZERO,
            gamma_hat: Mat2::diag(-0.5, 0.5),
            a_hat: None,
            b_hat: None,
            admissible: false,
            gamma_eigenvalues: Mat2::diag(-0.5, 0.5).eigenvalues(),
            n: 4,
            delta: 1.0,
        };
        assert!(matches!(
            estimate_diffusion(&s, &WeightFn::Constant, &d),
            Err(Error::NonAdmissibleGamma(_))
        ));
        let _ = Drift::new(Vec2::ZERO, Mat2::IDENTITY);
    }
}
