//! Green function of simple random walk on `Z^{d+1}` and full-space capacities.
//!
//! The Fourier representation
//!
//! ```text
//! g(x) = (2 pi)^{-D} \int_{[-pi,pi]^D} cos(k.x) / (1 - (1/D) sum_j cos k_j) dk,   D = d + 1
//! ```
//!
//! is evaluated after writing `1/(1 - phi) = \int_0^inf e^{-t(1-phi)} dt` and
//! doing each `k_j` integral in closed form, which leaves the one-dimensional
//! integral
//!
//! ```text
//! g(x) = D \int_0^inf prod_j e^{-s} I_{|x_j|}(s) ds.
//! ```
//!
//! The integrand is smooth and decays like `(2 pi s)^{-D/2}`. It is integrated
//! with Gauss–Legendre panels on dyadic intervals up to a cutoff, and the tail
//! beyond the cutoff is integrated term by term from the large-`s` expansion of
//! the scaled Bessel functions. Scaled Bessel values come from Miller's backward
//! recurrence normalised by `e^{-s} (I_0 + 2 sum_k I_k) = 1`.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::exact::EquilibriumVector;
use crate::lattice::{LatticePoint, SiteSet, ZLattice};
use crate::linalg::DenseLu;

/// Largest set for the full-space capacity solve.
pub const MAX_CAPACITY_SET: usize = 200;
/// Weights below this are reported as a conditioning failure.
const NEGATIVE_WEIGHT: f64 = -1e-10;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// `e^{-s} I_k(s)` for `k = 0..=kmax`.
pub fn scaled_bessel_i(s: f64, kmax: usize) -> Vec<f64> {
    if s == 0.0 {
        let mut v = vec![0.0; kmax + 1];
        v[0] = 1.0;
        return v;
    }
    // I_k(s)/I_0(s) ~ exp(-k^2 / 2s), so start well past sqrt(2 s * 80)
    let start = kmax.max((12.7 * s.sqrt()) as usize + (s as usize).min(20)) + 30;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    let mut k = start;
    while k > 0 {
        let next = vals[k + 1] + (2.0 * k as f64 / s) * vals[k];
        vals[k - 1] = next;
        k -= 1;
        if next > 1e250 {
            for v in vals[k..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals[1..=start].iter().sum::<f64>();
    vals.truncate(kmax + 1);
    vals.iter_mut().for_each(|v| *v /= norm);
    vals
}

/// Coefficients `c_m` of `e^{-s} I_n(s) ~ (2 pi s)^{-1/2} sum_m c_m s^{-m}`.
fn bessel_asymptotic(n: u32, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (n as f64).powi(2);
    let mut c = vec![1.0; terms];
    for m in 1..terms {
        let odd = (2 * m - 1) as f64;
        c[m] = -c[m - 1] * (mu - odd * odd) / (m as f64 * 8.0);
    }
    c
}

const TAIL_TERMS: usize = 8;

/// Evaluator for `g(x)` with a symmetry-reduced, synchronised cache.
#[derive(Debug)]
pub struct GreenEvaluator {
    d: usize,
    tol: f64,
    cache: RwLock<HashMap<Vec<u32>, f64>>,
    origin_scale: f64,
}

impl GreenEvaluator {
    pub fn new(d: usize, tol: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("d", format!("walk must be transient, need d >= 2, got {d}")));
        }
        if !(1e-8..=1e-4).contains(&tol) {
            return Err(Error::param("tol", format!("{tol} outside [1e-8, 1e-4]")));
        }
        Ok(GreenEvaluator {
            d,
            tol,
            cache: RwLock::new(HashMap::new()),
            origin_scale: 1.0,
        })
    }

    /// Multiplies `g(0)` by `scale`; used to check that self-tests notice a wrong value.
    pub fn with_origin_fault(mut self, scale: f64) -> Self {
        self.origin_scale = scale;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn lattice(&self) -> ZLattice {
        ZLattice::new(self.d).expect("validated at construction")
    }

    fn key(&self, x: &[i64]) -> Vec<u32> {
        assert_eq!(x.len(), self.d + 1, "point has wrong dimension");
        let mut k: Vec<u32> = x.iter().map(|c| c.unsigned_abs() as u32).collect();
        k.sort_unstable();
        k
    }

    pub fn g(&self, x: &[i64]) -> f64 {
        let key = self.key(x);
        let cached = self.cache.read().expect("green cache poisoned").get(&key).copied();
        let v = match cached {
            Some(v) => v,
            None => {
                self.prefetch(std::slice::from_ref(&key));
                self.cache.read().expect("green cache poisoned")[&key]
            }
        };
        if key.iter().all(|&c| c == 0) {
            v * self.origin_scale
        } else {
            v
        }
    }

    pub fn g_point(&self, x: &LatticePoint) -> f64 {
        self.g(x.coords())
    }

    pub fn g0(&self) -> f64 {
        self.g(&vec![0; self.d + 1])
    }

    /// Fills the cache for all displacements `p - q`, `p, q` in `points`.
    pub fn prefetch_differences(&self, points: &[LatticePoint]) {
        let mut keys = Vec::new();
        for p in points {
            for q in points {
                keys.push(self.key(p.minus(q).coords()));
            }
        }
        self.prefetch_keys(keys);
    }

    pub fn prefetch_points(&self, xs: &[LatticePoint]) {
        self.prefetch_keys(xs.iter().map(|x| self.key(x.coords())).collect());
    }

    fn prefetch_keys(&self, mut keys: Vec<Vec<u32>>) {
        keys.sort();
        keys.dedup();
        let missing: Vec<Vec<u32>> = {
            let cache = self.cache.read().expect("green cache poisoned");
            keys.into_iter().filter(|k| !cache.contains_key(k)).collect()
        };
        if !missing.is_empty() {
            self.prefetch(&missing);
        }
    }

    fn prefetch(&self, keys: &[Vec<u32>]) {
        let values = integrate(self.d + 1, keys, self.tol);
        let mut cache = self.cache.write().expect("green cache poisoned");
        for (k, v) in keys.iter().zip(values) {
            cache.insert(k.clone(), v);
        }
    }
}

/// Panel integral of `prod_j e^{-s} I_{n_j}(s)` over `[0, cutoff]` for every key.
fn panel_sum(dim: usize, keys: &[Vec<u32>], cutoff: f64, order: usize) -> Vec<f64> {
    let kmax = keys.iter().flatten().copied().max().unwrap_or(0) as usize;
    let (nodes, weights) = gauss_legendre(order);
    let mut sums = vec![0.0; keys.len()];
    let mut a = 0.0f64;
    let mut b = 0.5f64;
    while a < cutoff {
        let b_eff = b.min(cutoff);
        let half = 0.5 * (b_eff - a);
        let mid = 0.5 * (b_eff + a);
        for (t, w) in nodes.iter().zip(&weights) {
            let s = mid + half * t;
            let e = scaled_bessel_i(s, kmax);
            for (sum, key) in sums.iter_mut().zip(keys) {
                let f: f64 = key.iter().map(|&n| e[n as usize]).product();
                *sum += w * half * f;
            }
        }
        a = b_eff;
        b *= 2.0;
    }
    debug_assert_eq!(dim, keys[0].len());
    sums
}

/// `\int_cutoff^inf` of the asymptotic product expansion.
fn tail_sum(dim: usize, key: &[u32], cutoff: f64) -> f64 {
    let mut poly = vec![1.0];
    for &n in key {
        let c = bessel_asymptotic(n, TAIL_TERMS);
        let mut next = vec![0.0; TAIL_TERMS];
        for (i, p) in poly.iter().enumerate() {
            for (j, q) in c.iter().enumerate() {
                if i + j < TAIL_TERMS {
                    next[i + j] += p * q;
                }
            }
        }
        poly = next;
    }
    let half_dim = dim as f64 / 2.0;
    let pref = (2.0 * std::f64::consts::PI).powf(-half_dim);
    poly.iter()
        .enumerate()
        .map(|(m, c)| {
            let p = half_dim + m as f64 - 1.0;
            c * cutoff.powf(-p) / p
        })
        .sum::<f64>()
        * pref
}

fn integrate(dim: usize, keys: &[Vec<u32>], tol: f64) -> Vec<f64> {
    let kmax = keys.iter().flatten().copied().max().unwrap_or(0) as f64;
    // the expansion is accurate once s >> n^2
    let cutoff = (4096.0f64).max(64.0 * kmax * kmax);
    let mut order = 20;
    let mut prev = panel_sum(dim, keys, cutoff, order);
    loop {
        order += 10;
        let next = panel_sum(dim, keys, cutoff, order);
        let diff = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = next;
        if diff * dim as f64 <= tol * 1e-3 || order >= 60 {
            break;
        }
    }
    prev.iter()
        .zip(keys)
        .map(|(body, key)| dim as f64 * (body + tail_sum(dim, key, cutoff)))
        .collect()
}

/// Full-space equilibrium measure `e_K` from `sum_y g(x-y) e_K(y) = 1`, `x` in `K`.
pub fn equilibrium_zd(
    green: &GreenEvaluator,
    set: &SiteSet<LatticePoint>,
) -> Result<EquilibriumVector<LatticePoint>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if set.len() > MAX_CAPACITY_SET {
        return Err(Error::WindowTooLarge {
            size: set.len(),
            limit: MAX_CAPACITY_SET,
        });
    }
    let pts = set.as_slice();
    green.prefetch_differences(pts);
    let k = pts.len();
    let mut m = vec![0.0; k * k];
    for (i, p) in pts.iter().enumerate() {
        for (j, q) in pts.iter().enumerate() {
            m[i * k + j] = green.g_point(&p.minus(q));
        }
    }
    let e = DenseLu::new(k, m)?.solve(&vec![1.0; k]);
    if let Some(&worst) = e.iter().find(|&&w| w < NEGATIVE_WEIGHT) {
        return Err(Error::IllConditioned {
            residual: worst,
            limit: NEGATIVE_WEIGHT,
        });
    }
    Ok(EquilibriumVector::from_weights(set.clone(), e))
}

/// Capacity of a set in `Z^{d+1}`.
pub fn capacity(green: &GreenEvaluator, set: &SiteSet<LatticePoint>) -> Result<f64> {
    Ok(equilibrium_zd(green, set)?.capacity)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route for d = 2: do the k_3 integral in closed form and
    /// integrate the remaining 2-D Fourier integral on dyadic tensor panels.
    fn fourier_oracle(x: [i64; 3]) -> f64 {
        use std::f64::consts::PI;
        let (nodes, weights) = gauss_legendre(14);
        let mut edges = vec![PI];
        while *edges.last().unwrap() > 1e-12 {
            edges.push(edges.last().unwrap() / 2.0);
        }
        edges.push(0.0);
        edges.reverse();
        let panel: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
        let mut total = 0.0;
        for &(a1, b1) in &panel {
            for &(a2, b2) in &panel {
                for (t1, w1) in nodes.iter().zip(&weights) {
                    let k1 = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * t1;
                    for (t2, w2) in nodes.iter().zip(&weights) {
                        let k2 = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * t2;
                        let am1 = 2.0 * (0.5 * k1).sin().powi(2) + 2.0 * (0.5 * k2).sin().powi(2);
                        let root = (am1 * (am1 + 2.0)).sqrt();
                        let rho = 1.0 + am1 - root;
                        let f = (k1 * x[0] as f64).cos() * (k2 * x[1] as f64).cos() * 3.0 * rho.powi(x[2].abs() as i32) / root;
                        total += w1 * w2 * 0.25 * (b1 - a1) * (b2 - a2) * f;
                    }
                }
            }
        }
        // [0,pi]^2 is a quarter of the torus
        total * 4.0 / (4.0 * PI * PI)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((int - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn scaled_bessel_normalisation_and_values() {
        // e^{-1} I_0(1) and e^{-1} I_1(1) from tables
        let e = scaled_bessel_i(1.0, 3);
        assert!((e[0] - 0.465_759_607_593_640_6).abs() < 1e-14);
        assert!((e[1] - 0.207_910_415_349_708_7).abs() < 1e-14);
        let big = scaled_bessel_i(5e4, 2);
        let asym = (2.0 * std::f64::consts::PI * 5e4f64).powf(-0.5) * (1.0 + 1.0 / (8.0 * 5e4));
        assert!((big[0] / asym - 1.0).abs() < 1e-9);
    }

    #[test]
    fn origin_value_matches_fourier_oracle() {
        let g = GreenEvaluator::new(2, 1e-8).unwrap();
        let oracle = fourier_oracle([0, 0, 0]);
        assert!((g.g0() - oracle).abs() < 1e-7, "{} vs {}", g.g0(), oracle);
        assert!((g.g0() - 1.516_386_059_2).abs() < 1e-9, "{}", g.g0());
    }

    #[test]
    fn off_origin_values_match_fourier_oracle() {
        let g = GreenEvaluator::new(2, 1e-8).unwrap();
        for x in [[1, 0, 0], [2, 1, 0], [0, 0, 3], [1, 2, 3]] {
            let oracle = fourier_oracle(x);
            assert!((g.g(&x) - oracle).abs() < 1e-7, "{x:?}: {} vs {}", g.g(&x), oracle);
        }
    }

    #[test]
    fn harmonic_at_origin_and_away() {
        let g = GreenEvaluator::new(2, 1e-6).unwrap();
        let z = g.lattice();
        assert!((g.g0() - 1.0 - g.g(&[1, 0, 0]) - 0.0).abs() <= 2.0 * g.tol());
        for a in -4i64..=4 {
            for b in -4i64..=4 {
                for c in -4i64..=4 {
                    if (a, b, c) == (0, 0, 0) {
                        continue;
                    }
                    let p = z.point(&[a, b, c]).unwrap();
                    let mean: f64 = crate::lattice::Space::neighbors(&z, &p)
                        .iter()
                        .map(|q| g.g_point(q))
                        .sum::<f64>()
                        / 6.0;
                    assert!((g.g_point(&p) - mean).abs() <= 2.0 * g.tol(), "{p:?}");
                }
            }
        }
    }

    #[test]
    fn symmetry_group_invariance() {
        let g = GreenEvaluator::new(2, 1e-6).unwrap();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                for c in -3i64..=3 {
                    let x = [a, b, c];
                    let base = g.g(&x);
                    for p in perms {
                        for signs in 0..8 {
                            let y: Vec<i64> = (0..3)
                                .map(|i| if signs >> i & 1 == 1 { -x[p[i]] } else { x[p[i]] })
                                .collect();
                            assert!((g.g(&y) - base).abs() <= g.tol());
                        }
                    }
                    if x != [0, 0, 0] {
                        assert!(base < g.g0());
                    }
                }
            }
        }
    }

    #[test]
    fn decay_order() {
        let g = GreenEvaluator::new(2, 1e-8).unwrap();
        for r in [8i64, 16] {
            let ratio = g.g(&[2 * r, 0, 0]) / g.g(&[r, 0, 0]);
            assert!((ratio / 0.5 - 1.0).abs() < 0.15, "r={r}: {ratio}");
        }
    }

    #[test]
    fn capacity_closed_forms() {
        let g = GreenEvaluator::new(2, 1e-6).unwrap();
        let z = g.lattice();
        let o = LatticePoint::origin(3);
        let cap0 = capacity(&g, &SiteSet::new(vec![o.clone()])).unwrap();
        assert!((cap0 - 1.0 / g.g0()).abs() <= 4.0 * g.tol());
        assert!((cap0 - 0.659_463).abs() < 1e-5);
        let e1 = z.point(&[1, 0, 0]).unwrap();
        let cap2 = capacity(&g, &SiteSet::new(vec![o.clone(), e1])).unwrap();
        assert!((cap2 - 2.0 / (2.0 * g.g0() - 1.0)).abs() <= 4.0 * g.tol());
        assert!((cap2 - 0.983_876).abs() < 1e-5);
    }

    #[test]
    fn distant_pair_capacity_nearly_additive() {
        let g = GreenEvaluator::new(2, 1e-6).unwrap();
        let z = g.lattice();
        let set = SiteSet::new(vec![LatticePoint::origin(3), z.point(&[50, 0, 0]).unwrap()]);
        let cap = capacity(&g, &set).unwrap();
        assert!((cap / (2.0 / g.g0()) - 1.0).abs() < 0.02);
    }

    #[test]
    fn capacity_monotone_and_subadditive() {
        let g = GreenEvaluator::new(2, 1e-6).unwrap();
        let z = g.lattice();
        let a = SiteSet::new(vec![z.point(&[0, 0, 0]).unwrap(), z.point(&[1, 1, 0]).unwrap()]);
        let b = SiteSet::new(vec![z.point(&[3, 0, 0]).unwrap(), z.point(&[0, 0, 2]).unwrap()]);
        let ab = a.union(&b);
        let (ca, cb, cab) = (
            capacity(&g, &a).unwrap(),
            capacity(&g, &b).unwrap(),
            capacity(&g, &ab).unwrap(),
        );
        assert!(cab >= ca.max(cb));
        assert!(cab <= ca + cb);
    }

    #[test]
    fn rejects_recurrent_and_bad_tolerance() {
        assert!(GreenEvaluator::new(1, 1e-6).is_err());
        assert!(GreenEvaluator::new(2, 1e-2).is_err());
        assert!(GreenEvaluator::new(2, 1e-12).is_err());
    }

    #[test]
    fn origin_fault_is_visible() {
        let g = GreenEvaluator::new(2, 1e-6).unwrap().with_origin_fault(1.01);
        assert!((g.g0() - 1.0 - g.g(&[1, 0, 0])).abs() > 1e-3);
    }
}
