//! Exact first-passage sampling for the one-dimensional simple random walk
//! and the walk-skipping moves built on it.
//!
//! For `S` a simple random walk from 0 and `tau = inf{n : S_n = -1}`,
//! `P(tau > 2k - 1) = C(2k, k) / 4^k =: u_k`. Inverting `u_k` gives an exact
//! sampler for `tau`, and the passage time down `m` levels is a sum of `m`
//! independent copies.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

const SMALL: usize = 32;

/// `ln u_k = ln Gamma(k + 1/2) - ln Gamma(k + 1) - ln(pi)/2`.
fn ln_survival(k: u64, table: &[f64; SMALL]) -> f64 {
    if (k as usize) < SMALL {
        return table[k as usize];
    }
    let x = k as f64;
    let x2 = x * x;
    -0.5 * x.ln() - 0.5 * std::f64::consts::PI.ln() - 1.0 / (8.0 * x)
        + 1.0 / (192.0 * x * x2)
        - 1.0 / (640.0 * x * x2 * x2)
        + 17.0 / (14336.0 * x * x2 * x2 * x2)
}

fn small_table() -> [f64; SMALL] {
    let mut t = [0.0; SMALL];
    for k in 1..SMALL {
        t[k] = t[k - 1] + ((2 * k - 1) as f64 / (2 * k) as f64).ln();
    }
    t
}

/// `P(tau > 2k - 1)` for the one-level passage time.
pub fn one_level_survival(k: u64) -> f64 {
    ln_survival(k, &small_table()).exp()
}

/// Sampler for passage times of the one-dimensional walk.
#[derive(Clone, Debug)]
pub struct PassageSampler {
    table: [f64; SMALL],
}

impl Default for PassageSampler {
    fn default() -> Self {
        Self::new()
    }
}

impl PassageSampler {
    pub fn new() -> Self {
        PassageSampler {
            table: small_table(),
        }
    }

    /// Time for the walk to first go one level down, or `None` if it exceeds `cap`.
    pub fn one_level<R: Rng + ?Sized>(&self, rng: &mut R, cap: u64) -> Option<u64> {
        let ln_u = (1.0 - rng.random::<f64>()).ln();
        // smallest k >= 1 with ln u_k < ln_u; tau = 2k - 1
        let cap_k = cap / 2 + 1;
        let mut hi = 1u64;
        while ln_survival(hi, &self.table) >= ln_u {
            if hi > cap_k {
                return None;
            }
            hi = hi.saturating_mul(2);
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ln_survival(mid, &self.table) < ln_u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let tau = 2 * hi - 1;
        (tau <= cap).then_some(tau)
    }

    /// Time to first go `m` levels down, or `None` if it exceeds `cap`.
    pub fn levels<R: Rng + ?Sized>(&self, rng: &mut R, m: u64, cap: u64) -> Option<u64> {
        let mut total = 0u64;
        for _ in 0..m {
            total += self.one_level(rng, cap - total)?;
        }
        Some(total)
    }
}

/// Number of failures before the `successes`-th success of Bernoulli(`p`) trials.
pub fn negative_binomial<R: Rng + ?Sized>(rng: &mut R, successes: u64, p: f64) -> u64 {
    if successes == 0 || p >= 1.0 {
        return 0;
    }
    let rate = Gamma::new(successes as f64, (1.0 - p) / p)
        .expect("positive shape")
        .sample(rng);
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

/// Net displacement of `steps` fair +-1 steps.
pub fn lazy_free_displacement<R: Rng + ?Sized>(rng: &mut R, steps: u64) -> i64 {
    if steps == 0 {
        return 0;
    }
    let ups = Binomial::new(steps, 0.5).expect("valid p").sample(rng);
    2 * ups as i64 - steps as i64
}

/// Splits `steps` uniformly among `parts` axes and returns each axis' net displacement.
pub fn torus_displacement<R: Rng + ?Sized>(rng: &mut R, steps: u64, parts: usize) -> Vec<i64> {
    let mut left = steps;
    let mut out = Vec::with_capacity(parts);
    for i in 0..parts {
        let k = if i + 1 == parts || left == 0 {
            left
        } else {
            Binomial::new(left, 1.0 / (parts - i) as f64)
                .expect("valid p")
                .sample(rng)
        };
        left -= k;
        out.push(lazy_free_displacement(rng, k));
    }
    out
}
