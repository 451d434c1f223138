//! Target CDFs, empirical CDFs, Kolmogorov–Smirnov distances and interval tests.

use serde::{Deserialize, Serialize};
use libm::erfc;

/// 95% two-sided Kolmogorov band coefficient: the band is `KS_95 / sqrt(n)`.
pub const KS_95: f64 = 1.36;

/// Euler–Mascheroni constant (mean of the standard Gumbel law).
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard Gumbel CDF `exp(-exp(-z))`.
pub fn gumbel_cdf(z: f64) -> f64 {
    (-(-z).exp()).exp()
}

pub fn gumbel_quantile(p: f64) -> f64 {
    -(-p.ln()).ln()
}

/// Median of the standard Gumbel law, `-ln ln 2`.
pub fn gumbel_median() -> f64 {
    gumbel_quantile(0.5)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_cdf`]: Acklam's rational start polished by Newton steps.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile needs p in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let lo = 0.02425;
    let mut x = if p < lo {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..3 {
        let err = normal_cdf(x) - p;
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        x -= err / pdf;
    }
    x
}

/// CDF of `zeta(tau)`, the first time Brownian local time at zero reaches `tau`:
/// `2 (1 - Phi(tau / sqrt(z)))` for `z > 0`, zero otherwise.
pub fn zeta_cdf(z: f64, tau: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    // 2 (1 - Phi(x)) = erfc(x / sqrt 2), computed without cancellation
    erfc(tau / (z.sqrt() * std::f64::consts::SQRT_2))
}

pub fn zeta_quantile(p: f64, tau: f64) -> f64 {
    let x = normal_quantile(1.0 - p / 2.0);
    (tau / x).powi(2)
}

/// A reference distribution to test samples against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetCdf {
    Gumbel,
    Zeta { tau: f64 },
    /// Right-continuous step function through `(x_i, p_i)`, `p` nondecreasing.
    Grid { xs: Vec<f64>, ps: Vec<f64> },
}

impl TargetCdf {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            TargetCdf::Gumbel => gumbel_cdf(x),
            TargetCdf::Zeta { tau } => zeta_cdf(x, *tau),
            TargetCdf::Grid { xs, ps } => {
                let k = xs.partition_point(|&g| g <= x);
                if k == 0 { 0.0 } else { ps[k - 1] }
            }
        }
    }

    /// Left limit `F(x-)`; differs from `cdf` only for step targets.
    fn cdf_left(&self, x: f64) -> f64 {
        match self {
            TargetCdf::Grid { xs, ps } => {
                let k = xs.partition_point(|&g| g < x);
                if k == 0 { 0.0 } else { ps[k - 1] }
            }
            _ => self.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        match self {
            TargetCdf::Gumbel => Some(gumbel_quantile(p)),
            TargetCdf::Zeta { tau } => Some(zeta_quantile(p, *tau)),
            TargetCdf::Grid { .. } => None,
        }
    }
}

/// Empirical CDF of a sample.
#[derive(Clone, Debug)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ecdf { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Distinct jump points with the ECDF value just after each.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = (i + 1) as f64 / n,
                _ => out.push((x, (i + 1) as f64 / n)),
            }
        }
        out
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// `KS_95 / sqrt(n)`.
    pub band95: f64,
    pub n: usize,
}

/// Two-sided KS distance `sup |F_n - F|` between samples and a target.
pub fn ks_distance(samples: &[f64], target: &TargetCdf) -> KsResult {
    ks_with(samples, |x| target.cdf(x), |x| target.cdf_left(x))
}

/// KS distance against a continuous CDF given as a function.
pub fn ks_distance_by(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    ks_with(samples, &cdf, &cdf)
}

fn ks_with(samples: &[f64], cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> KsResult {
    assert!(!samples.is_empty(), "ks_distance needs at least one sample");
    let ecdf = Ecdf::new(samples);
    let n = ecdf.len() as f64;
    let s = ecdf.sorted();
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < s.len() {
        // step over ties so F_n jumps once per distinct value
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let below = i as f64 / n;
        let above = (j + 1) as f64 / n;
        sup = sup
            .max((above - cdf(s[i])).abs())
            .max((cdf_left(s[i]) - below).abs());
        i = j + 1;
    }
    KsResult {
        statistic: sup.min(1.0),
        band95: KS_95 / n.sqrt(),
        n: s.len(),
    }
}

/// Largest difference between two CDFs on a grid.
pub fn sup_difference(grid: &[f64], a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> f64 {
    grid.iter().map(|&x| (a(x) - b(x)).abs()).fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if sorted[lo] == sorted[hi] {
        // also keeps infinite samples from turning into NaN
        return sorted[lo];
    }
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, 0.5)
}

/// Binomial proportion with a Wilson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Proportion {
    /// Wilson score interval at `z` standard deviations.
    pub fn wilson(successes: u64, trials: u64, z: f64) -> Self {
        assert!(trials > 0, "proportion needs at least one trial");
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Proportion {
            successes,
            trials,
            estimate: p,
            lower: (centre - half).max(0.0),
            upper: (centre + half).min(1.0),
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    /// Standard score of the estimate against `p0` using the null variance.
    pub fn z_score(&self, p0: f64) -> f64 {
        let sd = (p0 * (1.0 - p0) / self.trials as f64).sqrt();
        if sd == 0.0 {
            return if self.estimate == p0 { 0.0 } else { f64::INFINITY };
        }
        (self.estimate - p0) / sd
    }

    pub fn within_sigmas(&self, p0: f64, k: f64) -> bool {
        self.z_score(p0).abs() <= k
    }
}

/// Mean and index of dispersion (variance / mean) of a count sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub variance: f64,
    pub index: f64,
    pub n: usize,
}

impl Dispersion {
    pub fn of(counts: &[u64]) -> Self {
        let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let m = mean(&xs);
        let v = variance(&xs);
        Dispersion {
            mean: m,
            variance: v,
            index: v / m,
            n: xs.len(),
        }
    }

    /// `|mean - expected|` in units of the Poisson standard error.
    pub fn mean_z(&self, expected: f64) -> f64 {
        (self.mean - expected) / (expected / self.n as f64).sqrt()
    }
}

/// Standard score of a sample mean against `expected` with known per-sample sd.
pub fn mean_z(xs: &[f64], expected: f64, sd: f64) -> f64 {
    (mean(xs) - expected) / (sd / (xs.len() as f64).sqrt())
}
