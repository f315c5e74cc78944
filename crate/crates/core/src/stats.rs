//! Small statistics toolkit: compensated sums, sample moments, normality
//! and two-sample Kolmogorov–Smirnov tests.

use statrs::distribution::{ContinuousCDF, Normal};

/// Neumaier-compensated accumulator over `N` lanes.
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<const N: usize> {
    sum: [f64; N],
    comp: [f64; N],
}

impl<const N: usize> Default for CompensatedSum<N> {
    fn default() -> Self {
        CompensatedSum {
            sum: [0.0; N],
            comp: [0.0; N],
        }
    }
}

impl<const N: usize> CompensatedSum<N> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, values: &[f64; N]) {
        for ((s, c), &x) in self.sum.iter_mut().zip(&mut self.comp).zip(values) {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
    }

    pub fn total(&self) -> [f64; N] {
        std::array::from_fn(|i| self.sum[i] + self.comp[i])
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::<1>::new();
    for &v in values {
        acc.add(&[v]);
    }
    acc.total()[0]
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values) / values.len() as f64
}

/// Unbiased sample variance (divisor `n − 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let mut acc = CompensatedSum::<1>::new();
    for &v in values {
        acc.add(&[(v - m) * (v - m)]);
    }
    acc.total()[0] / (values.len() as f64 - 1.0)
}

pub fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Median; NaNs sort last.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²t²)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        // series converges too slowly here; the tail is 1 to double precision
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Result of a Kolmogorov–Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample KS test of `sample` against the standard normal.
pub fn ks_standard_normal(sample: &[f64]) -> KsResult {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal_cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max(hi - f).max(f - lo);
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
    }
}

/// QQ coordinates `(Φ⁻¹((i − 0.5)/n), x₍ᵢ₎)` of a sample against the standard
/// normal.
pub fn normal_qq(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (normal_quantile((i as f64 + 0.5) / n), x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1e16];
        values.extend(std::iter::repeat_n(1.0, 1000));
        values.push(-1e16);
        assert_eq!(sum(&values), 1000.0);
    }

    #[test]
    fn moments_and_median() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&v), 2.5);
        assert!((sample_variance(&v) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&v), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn kolmogorov_known_quantiles() {
        // classical critical values: Q(1.3581) = 0.05, Q(1.6276) = 0.01
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_accepts_normal_rejects_shifted() {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(3);
        let z: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_standard_normal(&z).p_value > 0.01);
        let shifted: Vec<f64> = z.iter().map(|x| x + 0.3).collect();
        assert!(ks_standard_normal(&shifted).p_value < 1e-6);
        assert!(ks_two_sample(&z[..1000], &z[1000..]).p_value > 0.01);
        assert!(ks_two_sample(&z[..1000], &shifted[1000..]).p_value < 1e-3);
    }

    #[test]
    fn two_sample_statistic_by_hand() {
        // on [3, 3.5) the ECDFs are 0.75 and 0
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[3.5, 4.5, 5.5, 6.5]);
        assert!((r.statistic - 0.75).abs() < 1e-15);
    }
}
