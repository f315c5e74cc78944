//! Path simulation and observation series.
//!
//! The coupled model has no known exact sampler, so paths are produced by a
//! full-truncation Euler scheme: the positive part `x⁺` of the state enters
//! both the drift and the diffusion, while the unfloored state is carried
//! forward. The decoupled model (`b₁₂ = b₂₁ = 0`) can be sampled exactly
//! through the noncentral chi-square transition of each scalar CIR factor.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mat2::Vec2;
use crate::model::{transition_laplace, ModelParams};
use crate::rng::{rng_from_seed, stream_rng, SimRng};
use crate::stats::CompensatedSum;

/// Simulation settings for one observation series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub euler_dt: f64,
    /// Observation spacing; must be an integer multiple of `euler_dt`.
    pub delta: f64,
    /// Number of transitions `n`; the series holds `n + 1` observations.
    pub n_obs: usize,
    pub burn_in: f64,
    pub x0: Vec2,
    pub seed: u64,
}

impl SimConfig {
    /// Default config: `Δ = 1`, `euler_dt = 1e−3`, burn-in `50/ξ_min`,
    /// started at the long-run mean.
    pub fn new(params: ModelParams, n_obs: usize, seed: u64) -> Self {
        let x0 = params
            .drift()
            .conditional_mean(Vec2::ZERO, 1e6)
            .unwrap_or(Vec2::new(1.0, 1.0));
        SimConfig {
            params,
            euler_dt: 1e-3,
            delta: 1.0,
            n_obs,
            burn_in: 50.0 / params.xi_min(),
            x0: x0.positive_part(),
            seed,
        }
    }

    /// Euler steps per observation interval.
    pub fn steps_per_obs(&self) -> Result<usize> {
        let ratio = self.delta / self.euler_dt;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "delta ({}) must be an integer multiple of euler_dt ({})",
                self.delta, self.euler_dt
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.euler_dt > 0.0 && self.euler_dt.is_finite()) {
            return Err(Error::Config(format!(
                "euler_dt = {} must be > 0",
                self.euler_dt
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta = {} must be > 0", self.delta)));
        }
        if self.n_obs < 1 {
            return Err(Error::Config("n_obs must be >= 1".into()));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::Config(format!(
                "burn_in = {} must be >= 0",
                self.burn_in
            )));
        }
        if !(self.x0.is_finite() && self.x0.is_nonnegative()) {
            return Err(Error::Config(format!("x0 = {:?} must be >= 0", self.x0)));
        }
        self.steps_per_obs()?;
        Ok(())
    }
}

/// Where a series came from.
#[derive(Clone, Debug, PartialEq)]
pub enum SeriesMeta {
    Simulated(SimConfig),
    External,
}

/// Equally spaced observations `X₀, …, X_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSeries {
    pub delta: f64,
    pub obs: Vec<Vec2>,
    pub meta: SeriesMeta,
}

impl ObservationSeries {
    /// Series from external data; all observations must be finite and `≥ 0`.
    pub fn external(delta: f64, obs: Vec<Vec2>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parse(format!("delta = {delta} must be > 0")));
        }
        if let Some((k, x)) = obs
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && x.is_nonnegative()))
        {
            return Err(Error::Parse(format!(
                "observation {k} = {x:?} is not a finite point of [0, inf)^2"
            )));
        }
        Ok(ObservationSeries {
            delta,
            obs,
            meta: SeriesMeta::External,
        })
    }

    /// Number of transitions `n` (one less than the number of observations).
    pub fn n(&self) -> usize {
        self.obs.len().saturating_sub(1)
    }

    /// CSV with header `t,x1,x2`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.obs.len() + 16);
        out.push_str("t,x1,x2\n");
        for (k, x) in self.obs.iter().enumerate() {
            let t = k as f64 * self.delta;
            writeln!(out, "{},{},{}", fmt17(t), fmt17(x.v1), fmt17(x.v2)).expect("write to string");
        }
        out
    }

    /// Parses [`ObservationSeries::to_csv`] output. `Δ` is read from the
    /// first two time stamps (1 if there is a single row).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty series file".into()))?;
        if header.trim() != "t,x1,x2" {
            return Err(Error::Parse(format!(
                "expected header 't,x1,x2', found '{header}'"
            )));
        }
        let mut times = Vec::new();
        let mut obs = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {}: expected 3 fields", i + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: '{s}': {e}", i + 1)))
            };
            times.push(parse(fields[0])?);
            obs.push(Vec2::new(parse(fields[1])?, parse(fields[2])?));
        }
        let delta = if times.len() >= 2 {
            times[1] - times[0]
        } else {
            1.0
        };
        for (k, t) in times.iter().enumerate() {
            if (t - k as f64 * delta).abs() > 1e-9 * delta.max(1.0) * (k as f64).max(1.0) {
                return Err(Error::Parse(format!(
                    "row {}: time {t} is not {k}·Δ",
                    k + 1
                )));
            }
        }
        Self::external(delta, obs)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text)
    }
}

/// Round-trip decimal format: 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One full-truncation Euler step of length `h`.
#[derive(Clone, Copy, Debug)]
struct EulerStepper {
    a: Vec2,
    b11: f64,
    b12: f64,
    b21: f64,
    b22: f64,
    s1: f64,
    s2: f64,
    h: f64,
    sqrt_h: f64,
}

impl EulerStepper {
    fn new(params: &ModelParams, h: f64) -> Self {
        EulerStepper {
            a: params.a_vector(),
            b11: params.b11(),
            b12: params.b12(),
            b21: params.b21(),
            b22: params.b22(),
            s1: params.sigma1(),
            s2: params.sigma2(),
            h,
            sqrt_h: h.sqrt(),
        }
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, x: &mut Vec2, rng: &mut R) {
        let p1 = x.v1.max(0.0);
        let p2 = x.v2.max(0.0);
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let d1 = self.a.v1 - self.b11 * p1 + self.b12 * p2;
        let d2 = self.a.v2 + self.b21 * p1 - self.b22 * p2;
        x.v1 += d1 * self.h + self.s1 * p1.sqrt() * self.sqrt_h * z1;
        x.v2 += d2 * self.h + self.s2 * p2.sqrt() * self.sqrt_h * z2;
    }

    fn advance<R: Rng + ?Sized>(&self, x: &mut Vec2, steps: usize, rng: &mut R) {
        for _ in 0..steps {
            self.step(x, rng);
        }
    }
}

/// Full-truncation Euler path; observations are the post-burn-in states at
/// multiples of `Δ`, floored at zero.
pub fn simulate_path(cfg: &SimConfig) -> Result<ObservationSeries> {
    cfg.validate()?;
    let per_obs = cfg.steps_per_obs()?;
    let stepper = EulerStepper::new(&cfg.params, cfg.delta / per_obs as f64);
    let burn_steps = (cfg.burn_in / stepper.h).round() as usize;
    let mut rng = rng_from_seed(cfg.seed);
    let mut x = cfg.x0;
    stepper.advance(&mut x, burn_steps, &mut rng);
    let mut obs = Vec::with_capacity(cfg.n_obs + 1);
    obs.push(x.positive_part());
    for _ in 0..cfg.n_obs {
        stepper.advance(&mut x, per_obs, &mut rng);
        obs.push(x.positive_part());
    }
    Ok(ObservationSeries {
        delta: cfg.delta,
        obs,
        meta: SeriesMeta::Simulated(*cfg),
    })
}

/// Exact transition of the scalar CIR `dX = (a − bX)dt + σ√X dB` over `t`:
/// `X_t = χ²(4a/σ², 2cxe^{−bt}) / 2c` with `c = 2b / (σ²(1 − e^{−bt}))`,
/// drawn as a Poisson mixture of Gammas.
pub fn sample_cir_transition<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    sigma_sq: f64,
    x: f64,
    t: f64,
    rng: &mut R,
) -> f64 {
    let e = (-b * t).exp();
    let c = 2.0 * b / (sigma_sq * (1.0 - e));
    let half_df = 2.0 * a / sigma_sq;
    let half_nc = c * x * e;
    let n = if half_nc > 0.0 {
        Poisson::new(half_nc)
            .expect("positive Poisson mean")
            .sample(rng)
    } else {
        0.0
    };
    Gamma::new(half_df + n, 1.0 / c)
        .expect("positive gamma shape")
        .sample(rng)
}

/// Exact sampler for the decoupled model. Burn-in is `⌈burn_in/Δ⌉` exact
/// transitions of length `Δ`.
pub fn simulate_exact_diagonal(cfg: &SimConfig) -> Result<ObservationSeries> {
    cfg.validate()?;
    let p = &cfg.params;
    if !p.is_diagonal() {
        return Err(Error::NotDiagonal {
            b12: p.b12(),
            b21: p.b21(),
        });
    }
    let s = p.sigma_sq();
    let mut rng = rng_from_seed(cfg.seed);
    let step = |x: Vec2, rng: &mut SimRng| {
        Vec2::new(
            sample_cir_transition(p.a1(), p.b11(), s.v1, x.v1, cfg.delta, rng),
            sample_cir_transition(p.a2(), p.b22(), s.v2, x.v2, cfg.delta, rng),
        )
    };
    let mut x = cfg.x0;
    let burn = (cfg.burn_in / cfg.delta).ceil() as usize;
    for _ in 0..burn {
        x = step(x, &mut rng);
    }
    let mut obs = Vec::with_capacity(cfg.n_obs + 1);
    obs.push(x);
    for _ in 0..cfg.n_obs {
        x = step(x, &mut rng);
        obs.push(x);
    }
    Ok(ObservationSeries {
        delta: cfg.delta,
        obs,
        meta: SeriesMeta::Simulated(*cfg),
    })
}

/// Which path generator a Monte Carlo harness uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampler {
    Euler,
    ExactDiagonal,
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Euler => "euler",
            Sampler::ExactDiagonal => "exact",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Sampler::Euler),
            "exact" | "exact_diagonal" => Ok(Sampler::ExactDiagonal),
            other => Err(Error::ConfigParse(format!(
                "unknown sampler '{other}' (expected euler|exact)"
            ))),
        }
    }

    pub fn simulate(&self, cfg: &SimConfig) -> Result<ObservationSeries> {
        match self {
            Sampler::Euler => simulate_path(cfg),
            Sampler::ExactDiagonal => simulate_exact_diagonal(cfg),
        }
    }
}

/// Empirical vs. formula Laplace transform at one time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplaceCheckReport {
    pub lambda: Vec2,
    pub t: f64,
    pub formula: f64,
    pub empirical: f64,
    pub std_err: f64,
    pub z: f64,
    pub n_paths: usize,
}

/// Simulates `n_paths` independent paths from `cfg.x0` (no burn-in) and
/// records `e^{−⟨λ, X_t⟩}` at each requested time. Path `i` uses stream `i`
/// of `cfg.seed`.
fn laplace_samples(
    cfg: &SimConfig,
    sampler: Sampler,
    lambda: Vec2,
    times: &[f64],
    n_paths: usize,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Config(
            "laplace times must be nonnegative and sorted".into(),
        ));
    }
    let p = cfg.params;
    if sampler == Sampler::ExactDiagonal && !p.is_diagonal() {
        return Err(Error::NotDiagonal {
            b12: p.b12(),
            b21: p.b21(),
        });
    }
    let stepper = EulerStepper::new(&p, cfg.euler_dt);
    let s = p.sigma_sq();
    let samples = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let mut x = cfg.x0;
            let mut now = 0.0;
            let mut done_steps = 0usize;
            let mut out = Vec::with_capacity(times.len());
            for &t in times {
                match sampler {
                    Sampler::Euler => {
                        let target = (t / cfg.euler_dt).round() as usize;
                        stepper.advance(&mut x, target - done_steps, &mut rng);
                        done_steps = target;
                    }
                    Sampler::ExactDiagonal => {
                        if t > now {
                            x = Vec2::new(
                                sample_cir_transition(
                                    p.a1(),
                                    p.b11(),
                                    s.v1,
                                    x.v1,
                                    t - now,
                                    &mut rng,
                                ),
                                sample_cir_transition(
                                    p.a2(),
                                    p.b22(),
                                    s.v2,
                                    x.v2,
                                    t - now,
                                    &mut rng,
                                ),
                            );
                        }
                        now = t;
                    }
                }
                out.push((-lambda.dot(x.positive_part())).exp());
            }
            out
        })
        .collect();
    Ok(samples)
}

/// [`laplace_check`] at several times from the same set of paths.
pub fn laplace_check_curve(
    cfg: &SimConfig,
    sampler: Sampler,
    lambda: Vec2,
    times: &[f64],
    n_paths: usize,
) -> Result<Vec<LaplaceCheckReport>> {
    if n_paths < 2 {
        return Err(Error::Config("laplace check needs at least 2 paths".into()));
    }
    let samples = laplace_samples(cfg, sampler, lambda, times, n_paths)?;
    let mut reports = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let mut acc = CompensatedSum::<1>::new();
        for row in &samples {
            acc.add(&[row[j]]);
        }
        let mean = acc.total()[0] / n_paths as f64;
        let mut acc2 = CompensatedSum::<1>::new();
        for row in &samples {
            acc2.add(&[(row[j] - mean).powi(2)]);
        }
        let var = acc2.total()[0] / (n_paths as f64 - 1.0);
        let std_err = (var / n_paths as f64).sqrt();
        let formula = transition_laplace(
            &cfg.params,
            cfg.x0,
            lambda,
            t,
            (t / 200.0).clamp(1e-4, 0.01),
        )?;
        let diff = mean - formula;
        let z = if std_err > 0.0 {
            diff / std_err
        } else if diff.abs() <= 1e-15 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        reports.push(LaplaceCheckReport {
            lambda,
            t,
            formula,
            empirical: mean,
            std_err,
            z,
            n_paths,
        });
    }
    Ok(reports)
}

/// Compares the Monte Carlo mean of `e^{−⟨λ, X_t⟩}` over `n_paths`
/// independent paths from `cfg.x0` against [`transition_laplace`].
pub fn laplace_check(
    cfg: &SimConfig,
    sampler: Sampler,
    lambda: Vec2,
    t: f64,
    n_paths: usize,
) -> Result<LaplaceCheckReport> {
    Ok(laplace_check_curve(cfg, sampler, lambda, &[t], n_paths)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_cfg() -> SimConfig {
        let mut c = SimConfig::new(ModelParams::diagonal(1.0, 1.0, 1.0).unwrap(), 100, 11);
        c.burn_in = 5.0;
        c
    }

    #[test]
    fn config_validation() {
        let mut c = diag_cfg();
        c.euler_dt = 0.3;
        assert!(matches!(simulate_path(&c), Err(Error::Config(_))));
        let mut c = diag_cfg();
        c.n_obs = 0;
        assert!(c.validate().is_err());
        let mut c = diag_cfg();
        c.x0 = Vec2::new(-1.0, 0.0);
        assert!(c.validate().is_err());
        let c = diag_cfg();
        assert_eq!(c.steps_per_obs().unwrap(), 1000);
    }

    #[test]
    fn path_is_nonnegative_and_deterministic() {
        let mut c = diag_cfg();
        c.params = ModelParams::new(0.1, 0.1, 1.0, 0.2, 0.3, 1.0, 1.5, 1.5).unwrap();
        c.euler_dt = 0.01;
        let a = simulate_path(&c).unwrap();
        let b = simulate_path(&c).unwrap();
        assert_eq!(a.obs.len(), 101);
        assert!(a.obs.iter().all(|x| x.is_nonnegative()));
        assert!(
            a.obs.iter().any(|x| x.v1 == 0.0 || x.v2 == 0.0),
            "low Feller ratio should hit zero"
        );
        assert_eq!(a.to_csv(), b.to_csv());
        c.seed += 1;
        assert_ne!(simulate_path(&c).unwrap().obs, a.obs);
    }

    #[test]
    fn deterministic_limit_follows_mean_flow() {
        let p = ModelParams::relaxed(1.0, 0.5, 1.0, 0.2, 0.3, 1.0, 0.0, 0.0).unwrap();
        let cfg = SimConfig {
            params: p,
            euler_dt: 1e-4,
            delta: 0.5,
            n_obs: 6,
            burn_in: 0.0,
            x0: Vec2::new(2.0, 0.1),
            seed: 1,
        };
        let s = simulate_path(&cfg).unwrap();
        for (k, x) in s.obs.iter().enumerate() {
            let m = p.drift().conditional_mean(cfg.x0, k as f64 * 0.5).unwrap();
            assert!((*x - m).max_abs() <= 1e-3 * m.max_abs(), "k = {k}");
        }
    }

    #[test]
    fn exact_diagonal_rejects_coupling() {
        let mut c = diag_cfg();
        c.params = ModelParams::new(1.0, 1.0, 1.0, 0.2, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            simulate_exact_diagonal(&c),
            Err(Error::NotDiagonal { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = simulate_exact_diagonal(&diag_cfg()).unwrap();
        let back = ObservationSeries::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back.obs, s.obs);
        assert_eq!(back.delta, s.delta);
        assert_eq!(back.meta, SeriesMeta::External);
        assert!(s.to_csv().starts_with("t,x1,x2\n0.0000000000000000e0,"));
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(ObservationSeries::from_csv("a,b,c\n").is_err());
        assert!(ObservationSeries::from_csv("t,x1,x2\n0,1,-1\n").is_err());
        assert!(ObservationSeries::from_csv("t,x1,x2\n0,1,1\n1,2\n").is_err());
        assert!(ObservationSeries::from_csv("t,x1,x2\n0,1,1\n1,1,1\n5,1,1\n").is_err());
    }

    #[test]
    fn laplace_zero_lambda_is_exact() {
        let r = laplace_check(&diag_cfg(), Sampler::Euler, Vec2::ZERO, 0.5, 50).unwrap();
        assert_eq!(r.empirical, 1.0);
        assert_eq!(r.formula, 1.0);
        assert_eq!(r.z, 0.0);
    }
}
