//! Running log-luminance statistics and the one-sided t-test used to stop
//! sampling a pixel once its brightness gap is confidently below threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Streaming count / mean / sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LogLumStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl LogLumStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut s = Self::new();
        s.extend(values);
        s
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn extend(&mut self, values: &[f64]) {
        for &x in values {
            self.push(x);
        }
    }

    /// Combines two disjoint accumulators (Chan et al. pairwise update).
    pub fn merge(&self, other: &LogLumStats) -> LogLumStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        LogLumStats { n, mean, m2 }
    }

    /// Unbiased sample variance; zero below two samples.
    #[inline]
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Folds a batch of log-luminance values into `stats`.
pub fn accumulate(stats: LogLumStats, values: &[f64]) -> LogLumStats {
    let mut s = stats;
    s.extend(values);
    s
}

fn require_samples(a: &LogLumStats, b: &LogLumStats) -> Result<()> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::InvalidArgument(format!(
            "t-test needs at least two samples per side (got {} and {})",
            a.n, b.n
        )));
    }
    Ok(())
}

/// `t = (|μb − μa| − θ) / sqrt((σa² + σb²) / N)` with `N = b.n`.
///
/// With zero pooled variance the result is `±∞` (or 0 when the gap equals θ).
pub fn t_statistic(a: &LogLumStats, b: &LogLumStats, threshold: f64) -> Result<f64> {
    require_samples(a, b)?;
    let excess = (b.mean - a.mean).abs() - threshold;
    let pooled = a.variance() + b.variance();
    if pooled == 0.0 {
        return Ok(if excess > 0.0 {
            f64::INFINITY
        } else if excess < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        });
    }
    Ok(excess / (pooled / b.n as f64).sqrt())
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Remainder of Stirling's series, `ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π]`, for `x ≥ 10`.
fn stirling_remainder(x: f64) -> f64 {
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

/// `ln B(a, b)`; avoids cancellation when one argument is large.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a < b { (a, b) } else { (b, a) };
    if large < 10.0 {
        return ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    }
    // ln Γ(L) − ln Γ(L + s) without subtracting two huge numbers
    let diff = -small * large.ln() - (large + small - 0.5) * (small / large).ln_1p()
        + small
        + stirling_remainder(large)
        - stirling_remainder(large + small);
    ln_gamma(small) + diff
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, taking `x` and `y = 1 − x`
/// separately so callers can supply whichever side is computed exactly.
pub fn regularized_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    let front = (a * ln_x + b * ln_y - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

/// Lower-tail CDF of Student's t distribution with `dof` degrees of freedom.
pub fn student_t_cdf(t: f64, dof: f64) -> Result<f64> {
    if !(dof > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom must be positive, got {dof}"
        )));
    }
    if t.is_nan() {
        return Err(Error::InvalidArgument("t statistic is NaN".into()));
    }
    if t == f64::INFINITY {
        return Ok(1.0);
    }
    if t == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let t2 = t * t;
    let x = dof / (dof + t2);
    let y = t2 / (dof + t2);
    let tail = 0.5 * regularized_beta(0.5 * dof, 0.5, x, y);
    Ok(if t < 0.0 { tail } else { 1.0 - tail })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Terminate,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub t: f64,
    /// Lower-tail probability of `t`.
    pub p: f64,
    pub dof: f64,
    pub decision: Decision,
}

/// Tests whether the gap `|μb − μa|` is significantly smaller than `threshold`.
///
/// Small `p` means the pixel confidently does not fire, so sampling may stop.
/// A pixel that looks like it will fire is never stopped by this test.
pub fn one_tailed_test(
    a: &LogLumStats,
    b: &LogLumStats,
    threshold: f64,
    alpha: f64,
) -> Result<TestOutcome> {
    let t = t_statistic(a, b, threshold)?;
    let dof = (b.n - 1) as f64;
    let p = student_t_cdf(t, dof)?;
    Ok(TestOutcome {
        t,
        p,
        dof,
        decision: if p < alpha {
            Decision::Terminate
        } else {
            Decision::Continue
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: f64, var: f64, n: u64) -> LogLumStats {
        LogLumStats {
            n,
            mean,
            m2: var * (n - 1) as f64,
        }
    }

    #[test]
    fn accumulate_small_list() {
        let s = accumulate(LogLumStats::new(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.n, 3);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.variance(), 1.0);
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        let s = LogLumStats::from_values(&[0.7; 4]);
        assert_eq!(s.variance(), 0.0);
    }

    #[test]
    fn split_accumulation_matches_whole() {
        let (a, b, c) = (0.3, -1.7, 2.9);
        let split = accumulate(accumulate(LogLumStats::new(), &[a, b]), &[c]);
        let whole = LogLumStats::from_values(&[a, b, c]);
        assert!((split.mean - whole.mean).abs() <= 1e-10 * whole.mean.abs());
        assert!((split.variance() - whole.variance()).abs() <= 1e-10 * whole.variance());
        let merged = LogLumStats::from_values(&[a, b]).merge(&LogLumStats::from_values(&[c]));
        assert!((merged.variance() - whole.variance()).abs() <= 1e-10 * whole.variance());
    }

    #[test]
    fn t_statistic_worked_examples() {
        let a = stats(0.0, 0.01, 256);
        let b = stats(0.6, 0.01, 256);
        let t = t_statistic(&a, &b, 0.5).unwrap();
        let direct = (0.6f64 - 0.5) / (0.02f64 / 256.0).sqrt();
        assert!((t - direct).abs() < 1e-12);
        assert!((t - 11.313_708_498_984_76).abs() < 1e-9);

        let a = stats(0.0, 0.02, 256);
        let b = stats(0.1, 0.02, 256);
        let t = t_statistic(&a, &b, 0.5).unwrap();
        assert!((t + 32.0).abs() < 1e-12, "{t}");
    }

    #[test]
    fn t_statistic_null_exactly_satisfied() {
        let a = stats(1.0, 0.3, 10);
        let b = stats(1.5, 0.7, 10);
        assert_eq!(t_statistic(&a, &b, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn t_statistic_zero_variance_limits() {
        let a = LogLumStats::from_values(&[1.0, 1.0]);
        let up = LogLumStats::from_values(&[2.0, 2.0]);
        let same = LogLumStats::from_values(&[1.0, 1.0]);
        let edge = LogLumStats::from_values(&[1.5, 1.5]);
        assert_eq!(t_statistic(&a, &up, 0.5).unwrap(), f64::INFINITY);
        assert_eq!(t_statistic(&a, &same, 0.5).unwrap(), f64::NEG_INFINITY);
        assert_eq!(t_statistic(&a, &edge, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn t_statistic_needs_two_samples() {
        let a = LogLumStats::from_values(&[1.0]);
        let b = LogLumStats::from_values(&[1.0, 2.0]);
        assert!(t_statistic(&a, &b, 0.5).is_err());
        assert!(t_statistic(&b, &a, 0.5).is_err());
    }

    #[test]
    fn cdf_symmetry_point_and_errors() {
        for dof in [1.0, 2.0, 255.0, 1e6] {
            assert_eq!(student_t_cdf(0.0, dof).unwrap(), 0.5);
        }
        assert!(student_t_cdf(1.0, 0.0).is_err());
        assert!(student_t_cdf(1.0, -3.0).is_err());
    }

    #[test]
    fn cdf_critical_values() {
        let p = student_t_cdf(-1.6510, 255.0).unwrap();
        assert!((p - 0.05).abs() < 5e-4, "{p}");
        let p = student_t_cdf(-1.6449, 1e6).unwrap();
        assert!((p - 0.05).abs() < 5e-4, "{p}");
        // Cauchy: F(1) = 3/4
        assert!((student_t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-14);
        // dof = 2 has closed form 1/2 + t / (2 sqrt(2 + t^2))
        for t in [-5.0, -0.3, 0.8, 4.0] {
            let exact = 0.5 + t / (2.0 * (2.0f64 + t * t).sqrt());
            assert!((student_t_cdf(t, 2.0).unwrap() - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        // large-argument ln_beta agrees with the plain formula where both are accurate
        let plain = ln_gamma(12.0) + ln_gamma(0.5) - ln_gamma(12.5);
        assert!((ln_beta(12.0, 0.5) - plain).abs() < 1e-13);
    }

    #[test]
    fn one_tailed_decisions() {
        let a = stats(0.0, 0.02, 256);
        let b = stats(0.1, 0.02, 256);
        let out = one_tailed_test(&a, &b, 0.5, 0.05).unwrap();
        assert_eq!(out.dof, 255.0);
        assert!(out.p < 1e-10);
        assert_eq!(out.decision, Decision::Terminate);

        let a = stats(0.0, 0.01, 256);
        let b = stats(0.6, 0.01, 256);
        let out = one_tailed_test(&a, &b, 0.5, 0.05).unwrap();
        assert!(out.p > 1.0 - 1e-10);
        assert_eq!(out.decision, Decision::Continue);

        let a = stats(1.0, 0.3, 256);
        let b = stats(1.5, 0.7, 256);
        let out = one_tailed_test(&a, &b, 0.5, 0.05).unwrap();
        assert_eq!(out.p, 0.5);
        assert_eq!(out.decision, Decision::Continue);
    }
}
