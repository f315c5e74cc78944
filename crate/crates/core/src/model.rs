//! Exact analytic objects of the two-type model: parameters, branching
//! mechanisms, the Riccati system behind the Laplace transforms, and the
//! closed-form conditional mean and covariance.

use crate::error::{Error, Result};
use crate::mat2::{Mat2, Vec2};

/// Drift part `(A, B)` of `dX = (A − BX) dt + Σ√X dW`, with
/// `B = [[b11, −b12], [−b21, b22]]`.
///
/// Unlike [`ModelParams`] no sign constraints are imposed, so estimated
/// drifts (which may have a slightly negative cross-feed) and finite
/// difference perturbations can be represented.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drift {
    pub a: Vec2,
    pub b: Mat2,
}

/// Model parameters `θ = (a₁, a₂, b₁₁, b₁₂, b₂₁, b₂₂, σ₁, σ₂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    a1: f64,
    a2: f64,
    b11: f64,
    b12: f64,
    b21: f64,
    b22: f64,
    sigma1: f64,
    sigma2: f64,
}

/// Names of the eight parameters in `θ` order.
pub const THETA_NAMES: [&str; 8] = ["a1", "a2", "b11", "b12", "b21", "b22", "sigma1", "sigma2"];

impl ModelParams {
    /// Validated constructor: `a₁, a₂, b₁₁, b₂₂, σ₁, σ₂ > 0`, `b₁₂, b₂₁ ≥ 0`.
    /// Non-ergodic parameters (`κ ≥ 1`) are accepted; see [`ModelParams::is_ergodic`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a1: f64,
        a2: f64,
        b11: f64,
        b12: f64,
        b21: f64,
        b22: f64,
        sigma1: f64,
        sigma2: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            a1,
            a2,
            b11,
            b12,
            b21,
            b22,
            sigma1,
            sigma2,
        };
        p.check(false)?;
        Ok(p)
    }

    /// Like [`ModelParams::new`] but allows `σ₁ = 0` or `σ₂ = 0`
    /// (deterministic flow); used for limit checks.
    #[allow(clippy::too_many_arguments)]
    pub fn relaxed(
        a1: f64,
        a2: f64,
        b11: f64,
        b12: f64,
        b21: f64,
        b22: f64,
        sigma1: f64,
        sigma2: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            a1,
            a2,
            b11,
            b12,
            b21,
            b22,
            sigma1,
            sigma2,
        };
        p.check(true)?;
        Ok(p)
    }

    pub fn from_theta(theta: [f64; 8]) -> Result<Self> {
        let [a1, a2, b11, b12, b21, b22, s1, s2] = theta;
        Self::new(a1, a2, b11, b12, b21, b22, s1, s2)
    }

    /// Diagonal model with the same `(a, b, σ)` in both coordinates.
    pub fn diagonal(a: f64, b: f64, sigma: f64) -> Result<Self> {
        Self::new(a, a, b, 0.0, 0.0, b, sigma, sigma)
    }

    fn check(&self, allow_zero_sigma: bool) -> Result<()> {
        let theta = self.theta();
        for (name, v) in THETA_NAMES.iter().zip(theta) {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} is not finite"
                )));
            }
        }
        let strict = [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b11", self.b11),
            ("b22", self.b22),
        ];
        for (name, v) in strict {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        for (name, v) in [("b12", self.b12), ("b21", self.b21)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be >= 0"
                )));
            }
        }
        for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if v < 0.0 || (v == 0.0 && !allow_zero_sigma) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> [f64; 8] {
        [
            self.a1,
            self.a2,
            self.b11,
            self.b12,
            self.b21,
            self.b22,
            self.sigma1,
            self.sigma2,
        ]
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a2(&self) -> f64 {
        self.a2
    }
    pub fn b11(&self) -> f64 {
        self.b11
    }
    pub fn b12(&self) -> f64 {
        self.b12
    }
    pub fn b21(&self) -> f64 {
        self.b21
    }
    pub fn b22(&self) -> f64 {
        self.b22
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn a_vector(&self) -> Vec2 {
        Vec2::new(self.a1, self.a2)
    }

    pub fn b_matrix(&self) -> Mat2 {
        Mat2::new(self.b11, -self.b12, -self.b21, self.b22)
    }

    pub fn sigma_sq(&self) -> Vec2 {
        Vec2::new(self.sigma1 * self.sigma1, self.sigma2 * self.sigma2)
    }

    pub fn drift(&self) -> Drift {
        Drift {
            a: self.a_vector(),
            b: self.b_matrix(),
        }
    }

    /// `κ = b₁₂b₂₁ / (b₁₁b₂₂)`.
    pub fn kappa(&self) -> f64 {
        self.b12 * self.b21 / (self.b11 * self.b22)
    }

    /// `κ < 1`, equivalently both eigenvalues of `B` positive.
    pub fn is_ergodic(&self) -> bool {
        self.kappa() < 1.0
    }

    pub fn is_diagonal(&self) -> bool {
        self.b12 == 0.0 && self.b21 == 0.0
    }

    /// Smallest eigenvalue of `B` (real, since `b₁₂b₂₁ ≥ 0`).
    pub fn xi_min(&self) -> f64 {
        self.b_matrix().eigenvalues()[0].re
    }

    pub fn xi_max(&self) -> f64 {
        self.b_matrix().eigenvalues()[1].re
    }
}

impl Drift {
    pub fn new(a: Vec2, b: Mat2) -> Self {
        Drift { a, b }
    }

    /// Closed-form conditional mean
    /// `f(t) = e^{−Bt}x + B⁻¹(I − e^{−Bt})A`.
    pub fn conditional_mean(&self, x: Vec2, t: f64) -> Result<Vec2> {
        let e = (-t * self.b).expm()?;
        let binv = self.b.inverse()?;
        Ok(e * x + binv * ((Mat2::IDENTITY - e) * self.a))
    }

    /// One-step regression coefficients `ρ = B⁻¹(I − e^{−BΔ})A`, `γ = e^{−BΔ}`,
    /// so that `E[X_k | X_{k−1}] = ρ + γX_{k−1}`.
    pub fn regression(&self, delta: f64) -> Result<(Vec2, Mat2)> {
        let gamma = (-delta * self.b).expm()?;
        let rho = self.b.inverse()? * ((Mat2::IDENTITY - gamma) * self.a);
        Ok((rho, gamma))
    }

    /// `(η₁(x), η₂(x))` with
    /// `ηᵢ = ∫₀^Δ e^{−B(Δ−s)} fᵢ(s)·eᵢeᵢᵀ e^{−Bᵀ(Δ−s)} ds`, `f(s)` the
    /// conditional mean started at `x`. Composite Simpson quadrature.
    pub fn eta_matrices(&self, x: Vec2, delta: f64) -> Result<(Mat2, Mat2)> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} must be > 0"
            )));
        }
        let panels = eta_panels(&self.b, delta);
        let h = delta / panels as f64;
        let mut eta1 = Mat2::ZERO;
        let mut eta2 = Mat2::ZERO;
        for j in 0..=panels {
            let s = j as f64 * h;
            let w = simpson_weight(j, panels);
            let e = (-(delta - s) * self.b).expm()?;
            let f = self.conditional_mean(x, s)?;
            let c1 = Vec2::new(e.m11, e.m21);
            let c2 = Vec2::new(e.m12, e.m22);
            eta1 += (w * f.v1) * c1.outer(c1);
            eta2 += (w * f.v2) * c2.outer(c2);
        }
        let scale = h / 3.0;
        Ok((scale * eta1, scale * eta2))
    }
}

/// Number of Simpson panels for the η quadrature; error is
/// `O((Δ·ρ(B)/panels)⁴)` relative.
fn eta_panels(b: &Mat2, delta: f64) -> usize {
    let stiff = (delta * b.spectral_radius()).max(1.0);
    2 * (250.0 * stiff).ceil() as usize
}

fn simpson_weight(j: usize, panels: usize) -> f64 {
    if j == 0 || j == panels {
        1.0
    } else if j % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Composite Simpson rule on equally spaced samples (odd length).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let panels = values.len() - 1;
    debug_assert!(
        panels.is_multiple_of(2),
        "Simpson needs an even number of panels"
    );
    let total: f64 = values
        .iter()
        .enumerate()
        .map(|(j, v)| simpson_weight(j, panels) * v)
        .sum();
    total * h / 3.0
}

/// `η₁, η₂` as affine functions of the conditioning state:
/// `ηᵢ(x) = Cᵢ + x₁Lᵢ₁ + x₂Lᵢ₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaBasis {
    pub eta1: [Mat2; 3],
    pub eta2: [Mat2; 3],
}

impl EtaBasis {
    pub fn new(drift: &Drift, delta: f64) -> Result<Self> {
        let (c1, c2) = drift.eta_matrices(Vec2::ZERO, delta)?;
        let (e11, e21) = drift.eta_matrices(Vec2::new(1.0, 0.0), delta)?;
        let (e12, e22) = drift.eta_matrices(Vec2::new(0.0, 1.0), delta)?;
        Ok(EtaBasis {
            eta1: [c1, e11 - c1, e12 - c1],
            eta2: [c2, e21 - c2, e22 - c2],
        })
    }

    pub fn eval(&self, x: Vec2) -> (Mat2, Mat2) {
        let f = |b: &[Mat2; 3]| b[0] + x.v1 * b[1] + x.v2 * b[2];
        (f(&self.eta1), f(&self.eta2))
    }

    /// `σ₁²η₁(x) + σ₂²η₂(x)` basis.
    pub fn variance_basis(&self, sigma_sq: Vec2) -> [Mat2; 3] {
        let mut out = [Mat2::ZERO; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = sigma_sq.v1 * self.eta1[i] + sigma_sq.v2 * self.eta2[i];
        }
        out
    }
}

/// Branching mechanism `φ(λ) = Bᵀλ + ½(σ₁²λ₁², σ₂²λ₂²)`:
///
/// ```text
/// φ₁(λ) = b₁₁λ₁ − b₂₁λ₂ + σ₁²λ₁²/2
/// φ₂(λ) = −b₁₂λ₁ + b₂₂λ₂ + σ₂²λ₂²/2
/// ```
///
/// The cross terms are the ones generated by the drift of `dX`; see the
/// README for the note on the transposition.
pub fn phi(params: &ModelParams, lambda: Vec2) -> Vec2 {
    let s = params.sigma_sq();
    Vec2::new(
        params.b11 * lambda.v1 - params.b21 * lambda.v2 + 0.5 * s.v1 * lambda.v1 * lambda.v1,
        -params.b12 * lambda.v1 + params.b22 * lambda.v2 + 0.5 * s.v2 * lambda.v2 * lambda.v2,
    )
}

/// Solution `v_t(λ)` of `∂ₜv = −φ(v)`, `v₀ = λ`, on an equally spaced grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiSolution {
    pub times: Vec<f64>,
    pub values: Vec<Vec2>,
    pub lambda: Vec2,
}

impl RiccatiSolution {
    pub fn end(&self) -> Vec2 {
        *self.values.last().expect("non-empty solution")
    }

    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// `∫₀^T ⟨A, v_s⟩ ds` by composite Simpson on the solution grid.
    pub fn integral_against(&self, a: Vec2) -> f64 {
        let ys: Vec<f64> = self.values.iter().map(|v| a.dot(*v)).collect();
        simpson(&ys, self.step())
    }

    /// Least-squares slope of `−ln‖v_t‖` over grid points in `[t_lo, t_hi]`.
    pub fn fitted_decay_rate(&self, t_lo: f64, t_hi: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
            .map(|(t, v)| (*t, v.norm().ln()))
            .collect();
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        -sxy / sxx
    }
}

const NEGATIVITY_TOL: f64 = 1e-12;

fn rk4(params: &ModelParams, lambda: Vec2, t_max: f64, steps: usize) -> Result<RiccatiSolution> {
    let h = t_max / steps as f64;
    let rhs = |v: Vec2| -phi(params, v);
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut v = lambda;
    times.push(0.0);
    values.push(v);
    for i in 1..=steps {
        let k1 = rhs(v);
        let k2 = rhs(v + (0.5 * h) * k1);
        let k3 = rhs(v + (0.5 * h) * k2);
        let k4 = rhs(v + h * k3);
        v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t = i as f64 * h;
        for c in [&mut v.v1, &mut v.v2] {
            if *c < 0.0 {
                if *c < -NEGATIVITY_TOL {
                    return Err(Error::StepTooLarge { t, value: *c });
                }
                *c = 0.0;
            }
        }
        times.push(t);
        values.push(v);
    }
    Ok(RiccatiSolution {
        times,
        values,
        lambda,
    })
}

/// Classical RK4 for the Riccati system. The step is `dt` rounded down so an
/// even number of steps spans `[0, t_max]`; it is halved until halving once
/// more moves `v(t_max)` by less than `1e−8` relative.
pub fn solve_riccati(
    params: &ModelParams,
    lambda: Vec2,
    t_max: f64,
    dt: f64,
) -> Result<RiccatiSolution> {
    if !(lambda.is_finite() && lambda.is_nonnegative()) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda:?} must be >= 0"
        )));
    }
    if !(dt > 0.0) || !(t_max >= dt) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need 0 < dt <= t_max (dt = {dt}, t_max = {t_max})"
        )));
    }
    let mut steps = (t_max / dt).ceil() as usize;
    steps += steps % 2;
    let mut coarse = rk4(params, lambda, t_max, steps)?;
    for _ in 0..12 {
        let fine = rk4(params, lambda, t_max, 2 * steps)?;
        let diff = (coarse.end() - fine.end()).max_abs();
        if diff <= 1e-8 * coarse.end().max_abs() {
            return Ok(coarse);
        }
        coarse = fine;
        steps *= 2;
    }
    Ok(coarse)
}

/// `E_x[e^{−⟨λ, X_t⟩}] = exp{−⟨x, v_t(λ)⟩ − ∫₀ᵗ ⟨A, v_s(λ)⟩ ds}`.
pub fn transition_laplace(
    params: &ModelParams,
    x: Vec2,
    lambda: Vec2,
    t: f64,
    dt: f64,
) -> Result<f64> {
    if !(x.is_finite() && x.is_nonnegative()) {
        return Err(Error::InvalidParameter(format!("x {x:?} must be >= 0")));
    }
    if t == 0.0 {
        if !lambda.is_nonnegative() {
            return Err(Error::InvalidParameter(format!(
                "lambda {lambda:?} must be >= 0"
            )));
        }
        return Ok((-x.dot(lambda)).exp());
    }
    let sol = solve_riccati(params, lambda, t, dt.min(t))?;
    let integral = sol.integral_against(params.a_vector());
    Ok((-x.dot(sol.end()) - integral).exp())
}

/// Laplace transform of the stationary law, `exp{−∫₀^∞ ⟨A, v_s(λ)⟩ ds}`.
///
/// The integral is accumulated over segments of length `10/ξ_min` until the
/// tail bound `⟨A, B⁻ᵀv_T⟩ ≥ ∫_T^∞ ⟨A, v_s⟩ ds` drops below `1e−10`.
pub fn stationary_laplace(params: &ModelParams, lambda: Vec2) -> Result<f64> {
    if !params.is_ergodic() {
        return Err(Error::NonErgodic {
            kappa: params.kappa(),
        });
    }
    if !(lambda.is_finite() && lambda.is_nonnegative()) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda:?} must be >= 0"
        )));
    }
    let a = params.a_vector();
    let bt_inv = params.b_matrix().transpose().inverse()?;
    let s = params.sigma_sq();
    let stiff = 1f64
        .max(params.xi_max())
        .max(0.5 * s.v1.max(s.v2) * lambda.max_abs());
    let dt = 0.005 / stiff;
    let seg = 10.0 / params.xi_min();
    let mut v = lambda;
    let mut integral: f64 = 0.0;
    for _ in 0..10_000 {
        if a.dot(bt_inv * v) < 1e-10 {
            return Ok((-integral).exp());
        }
        let sol = solve_riccati(params, v, seg, dt)?;
        integral += sol.integral_against(a);
        v = sol.end();
    }
    Err(Error::InvalidParameter(
        "stationary integral failed to converge".into(),
    ))
}

/// Free-function form of [`Drift::conditional_mean`].
pub fn conditional_mean(params: &ModelParams, x: Vec2, t: f64) -> Result<Vec2> {
    params.drift().conditional_mean(x, t)
}

/// Free-function form of [`Drift::eta_matrices`].
pub fn eta_matrices(params: &ModelParams, x: Vec2, delta: f64) -> Result<(Mat2, Mat2)> {
    params.drift().eta_matrices(x, delta)
}

/// `Cov[X_Δ | X_0 = x] = σ₁²η₁(x) + σ₂²η₂(x)`.
pub fn conditional_variance(params: &ModelParams, x: Vec2, delta: f64) -> Result<Mat2> {
    let (e1, e2) = eta_matrices(params, x, delta)?;
    let s = params.sigma_sq();
    Ok(s.v1 * e1 + s.v2 * e2)
}
