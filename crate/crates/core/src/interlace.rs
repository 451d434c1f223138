//! Random interlacements seen from a finite window `K` of `Z^{d+1}`.
//!
//! `I^u ∩ K` is the trace on `K` of a Poisson(`u cap(K)`) number of forward
//! walks started from `e_K / cap(K)`. Levels are realised as a Poisson process
//! of arrivals with rate `cap(K)`, so all levels live on one probability space
//! and `I^u ⊂ I^v` for `u <= v` holds pathwise.
//!
//! Two engines produce the trace of one forward walk:
//!
//! * [`Engine::Exact`] runs the chain of successive visits to `K`. From
//!   `x` in `K` the walk next visits `y` with probability
//!   `Q(x, y) = (1/2(d+1)) sum_{w ~ x} P_w(X_{H_K} = y)`, and
//!   `P_w(X_{H_K} = y) = sum_z g(w - z) G_K^{-1}(z, y)`; it escapes with
//!   probability `e_K(x)`. No truncation is involved.
//! * [`Engine::Truncated`] simulates the walk until it leaves an `l_inf` box of
//!   radius `R`. The return probability from outside the box is bounded by
//!   `cap(K) max g` over the box boundary, which must not exceed `epsilon`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::EquilibriumVector;
use crate::green::{equilibrium_zd, GreenEvaluator};
use crate::lattice::{LatticePoint, SiteSet};
use crate::linalg::DenseLu;
use crate::srw::LatticeWalk;

/// Largest set for which [`coverage_prob_exact`] enumerates all subsets.
pub const MAX_INCLUSION_EXCLUSION: usize = 20;
/// Largest dense lookup box used by the truncated engine.
const MAX_LOOKUP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Exact,
    Truncated { epsilon: f64, max_radius: i64 },
}

/// Trace on `K` of one forward trajectory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Index of the entry site in `K`.
    pub entry: usize,
    /// Distinct sites of `K` visited, in order of first visit; starts with `entry`.
    pub visits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterlacementSample {
    pub u: f64,
    pub trajectories: Vec<Trajectory>,
    /// `covered[i]` iff the `i`-th site of `K` lies in `I^u`.
    pub covered: Vec<bool>,
}

impl InterlacementSample {
    pub fn count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn trace(&self, window: &SiteSet<LatticePoint>) -> SiteSet<LatticePoint> {
        window
            .iter()
            .zip(&self.covered)
            .filter(|(_, &c)| c)
            .map(|(p, _)| p.clone())
            .collect()
    }
}

/// Arrivals of trajectories at increasing levels `u_1 < u_2 < ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrivals {
    pub levels: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
}

impl Arrivals {
    /// `I^u ∩ K` from the arrivals at levels `<= u`.
    pub fn sample_at(&self, u: f64, size: usize) -> InterlacementSample {
        let m = self.levels.partition_point(|&l| l <= u);
        let trajectories = self.trajectories[..m].to_vec();
        let mut covered = vec![false; size];
        for t in &trajectories {
            for &i in &t.visits {
                covered[i] = true;
            }
        }
        InterlacementSample {
            u,
            trajectories,
            covered,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverLevelRecord {
    pub arrival_levels: Vec<f64>,
    /// Number of covered sites after each arrival.
    pub covered_after: Vec<usize>,
    /// `C~_F`, the first arrival level at which `F ⊂ I^u`.
    pub cover_level: f64,
}

#[derive(Clone, Debug)]
enum Kernel {
    Chain {
        // row x: categories 0..k are the next site, k is escape
        rows: Vec<WeightedIndex<f64>>,
    },
    Walk {
        center: Vec<i64>,
        radius: i64,
        reach: i64,
        lookup: Vec<u32>,
    },
}

/// Sampler for the interlacement trace on a fixed window.
#[derive(Clone, Debug)]
pub struct WindowSampler {
    sites: SiteSet<LatticePoint>,
    eq: EquilibriumVector<LatticePoint>,
    entry: WeightedIndex<f64>,
    kernel: Kernel,
    bound: f64,
}

impl WindowSampler {
    pub fn new(green: &GreenEvaluator, sites: SiteSet<LatticePoint>, engine: Engine) -> Result<Self> {
        let eq = equilibrium_zd(green, &sites)?;
        let entry = WeightedIndex::new(eq.weights.iter().map(|w| w.max(0.0)))
            .map_err(|e| Error::param("K", e.to_string()))?;
        let (kernel, bound) = match engine {
            Engine::Exact => (chain_kernel(green, &sites, &eq)?, 0.0),
            Engine::Truncated {
                epsilon,
                max_radius,
            } => walk_kernel(green, &sites, eq.capacity, epsilon, max_radius)?,
        };
        Ok(WindowSampler {
            sites,
            eq,
            entry,
            kernel,
            bound,
        })
    }

    pub fn sites(&self) -> &SiteSet<LatticePoint> {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn capacity(&self) -> f64 {
        self.eq.capacity
    }

    pub fn equilibrium(&self) -> &EquilibriumVector<LatticePoint> {
        &self.eq
    }

    /// Per-trajectory return-probability bound; zero for the exact engine.
    pub fn truncation_bound(&self) -> f64 {
        self.bound
    }

    /// Radius of the truncation box, if any.
    pub fn radius(&self) -> Option<i64> {
        match &self.kernel {
            Kernel::Walk { radius, .. } => Some(*radius),
            Kernel::Chain { .. } => None,
        }
    }

    /// Trace of one forward walk from `e_K / cap(K)`.
    pub fn trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        let entry = self.entry.sample(rng);
        let mut visits = vec![entry];
        let k = self.sites.len();
        match &self.kernel {
            Kernel::Chain { rows } => {
                let mut x = entry;
                loop {
                    let y = rows[x].sample(rng);
                    if y == k {
                        break;
                    }
                    if !visits.contains(&y) {
                        visits.push(y);
                    }
                    x = y;
                }
            }
            Kernel::Walk {
                center,
                radius,
                reach,
                lookup,
            } => {
                let side = 2 * reach + 1;
                let mut w = LatticeWalk::new(self.sites.as_slice()[entry].coords());
                loop {
                    w.advance(rng);
                    let mut far = 0;
                    let mut idx = 0i64;
                    for (p, c) in w.pos.iter().zip(center).rev() {
                        let off = p - c;
                        far = far.max(off.abs());
                        idx = idx * side + off + reach;
                    }
                    if far > *radius {
                        break;
                    }
                    if far <= *reach {
                        let v = lookup[idx as usize];
                        if v != u32::MAX && !visits.contains(&(v as usize)) {
                            visits.push(v as usize);
                        }
                    }
                }
            }
        }
        Trajectory { entry, visits }
    }

    /// Arrivals with levels up to `u_max`.
    pub fn arrivals<R: Rng + ?Sized>(&self, u_max: f64, rng: &mut R) -> Arrivals {
        let gap = Exp::new(self.capacity()).expect("positive capacity");
        let mut levels = Vec::new();
        let mut trajectories = Vec::new();
        let mut u = gap.sample(rng);
        while u <= u_max {
            levels.push(u);
            trajectories.push(self.trajectory(rng));
            u += gap.sample(rng);
        }
        Arrivals {
            levels,
            trajectories,
        }
    }

    /// `I^u ∩ K`.
    pub fn sample_interlacement<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> InterlacementSample {
        self.arrivals(u, rng).sample_at(u, self.len())
    }

    /// Runs arrivals until `K` is covered.
    pub fn sample_cover_level<R: Rng + ?Sized>(&self, rng: &mut R) -> CoverLevelRecord {
        let gap = Exp::new(self.capacity()).expect("positive capacity");
        let mut covered = vec![false; self.len()];
        let mut count = 0;
        let mut u = 0.0;
        let mut arrival_levels = Vec::new();
        let mut covered_after = Vec::new();
        while count < self.len() {
            u += gap.sample(rng);
            for i in self.trajectory(rng).visits {
                if !covered[i] {
                    covered[i] = true;
                    count += 1;
                }
            }
            arrival_levels.push(u);
            covered_after.push(count);
        }
        CoverLevelRecord {
            arrival_levels,
            covered_after,
            cover_level: u,
        }
    }
}

fn green_matrix(green: &GreenEvaluator, pts: &[LatticePoint]) -> Vec<f64> {
    let k = pts.len();
    let mut m = vec![0.0; k * k];
    for (i, p) in pts.iter().enumerate() {
        for (j, q) in pts.iter().enumerate() {
            m[i * k + j] = green.g_point(&p.minus(q));
        }
    }
    m
}

fn chain_kernel(
    green: &GreenEvaluator,
    sites: &SiteSet<LatticePoint>,
    eq: &EquilibriumVector<LatticePoint>,
) -> Result<Kernel> {
    let pts = sites.as_slice();
    let k = pts.len();
    let degree = 2 * (green.d() + 1);
    let mut probe: Vec<LatticePoint> = pts.to_vec();
    for p in pts {
        for dir in 0..degree {
            let w = p.step(dir);
            probe.extend(pts.iter().map(|q| w.minus(q)));
        }
    }
    green.prefetch_points(&probe);
    let lu = DenseLu::new(k, green_matrix(green, pts))?;
    let limit = 100.0 * green.tol();
    let mut rows = Vec::with_capacity(k);
    for (x, p) in pts.iter().enumerate() {
        let mut row = vec![0.0; k + 1];
        for dir in 0..degree {
            let w = p.step(dir);
            let gw: Vec<f64> = pts.iter().map(|q| green.g_point(&w.minus(q))).collect();
            // G_K is symmetric, so the hitting law from w is G_K^{-1} gw
            for (y, h) in lu.solve(&gw).into_iter().enumerate() {
                row[y] += h.max(0.0) / degree as f64;
            }
        }
        let moved: f64 = row[..k].iter().sum();
        let escape = eq.weights[x];
        if (1.0 - moved - escape).abs() > limit {
            return Err(Error::IllConditioned {
                residual: (1.0 - moved - escape).abs(),
                limit,
            });
        }
        row[k] = escape.max(0.0);
        rows.push(WeightedIndex::new(row).map_err(|e| Error::param("K", e.to_string()))?);
    }
    Ok(Kernel::Chain { rows })
}

fn walk_kernel(
    green: &GreenEvaluator,
    sites: &SiteSet<LatticePoint>,
    cap: f64,
    epsilon: f64,
    max_radius: i64,
) -> Result<(Kernel, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("{epsilon} not in (0, 1)")));
    }
    let dim = green.d() + 1;
    let center: Vec<i64> = (0..dim)
        .map(|a| {
            let (lo, hi) = sites
                .iter()
                .fold((i64::MAX, i64::MIN), |(lo, hi), p| (lo.min(p.coords()[a]), hi.max(p.coords()[a])));
            lo + (hi - lo) / 2
        })
        .collect();
    let reach = sites
        .iter()
        .map(|p| p.minus(&LatticePoint::new(center.clone()).expect("valid dimension")).linf())
        .max()
        .unwrap_or(0);
    let side = (2 * reach + 1) as usize;
    let cells = side.checked_pow(dim as u32).filter(|&c| c <= MAX_LOOKUP).ok_or(Error::WindowTooLarge {
        size: side.saturating_pow(dim as u32),
        limit: MAX_LOOKUP,
    })?;
    // sites outside the box are at l_inf distance >= radius + 1 - reach from K
    let bound_at = |radius: i64| cap * green.g(LatticePoint::axis(dim, 0, radius + 1 - reach).coords());
    let mut radius = reach + 1;
    while bound_at(radius) > epsilon {
        if radius >= max_radius {
            return Err(Error::Truncation {
                requested: epsilon,
                achieved: bound_at(max_radius),
                radius: max_radius,
            });
        }
        radius = (2 * radius).min(max_radius);
    }
    let (mut lo, mut hi) = (reach + 1, radius);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if bound_at(mid) > epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let radius = if bound_at(lo) <= epsilon { lo } else { hi };
    let mut lookup = vec![u32::MAX; cells];
    for (i, p) in sites.iter().enumerate() {
        let idx = p
            .coords()
            .iter()
            .zip(&center)
            .rev()
            .fold(0i64, |acc, (x, c)| acc * side as i64 + x - c + reach);
        lookup[idx as usize] = i as u32;
    }
    Ok((
        Kernel::Walk {
            center,
            radius,
            reach,
            lookup,
        },
        bound_at(radius),
    ))
}

/// Capacities of all subsets of `F`, for inclusion–exclusion.
#[derive(Clone, Debug)]
pub struct CoverageOracle {
    // (subset size, capacity) per subset mask
    terms: Vec<(u32, f64)>,
}

impl CoverageOracle {
    pub fn new(green: &GreenEvaluator, set: &SiteSet<LatticePoint>) -> Result<Self> {
        let k = set.len();
        if k == 0 {
            return Err(Error::EmptySet);
        }
        if k > MAX_INCLUSION_EXCLUSION {
            return Err(Error::WindowTooLarge {
                size: k,
                limit: MAX_INCLUSION_EXCLUSION,
            });
        }
        let pts = set.as_slice();
        green.prefetch_differences(pts);
        let full = green_matrix(green, pts);
        let mut terms = vec![(0, 0.0)];
        for mask in 1u64..(1 << k) {
            let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            let m = idx.len();
            let sub: Vec<f64> = idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                .map(|(i, j)| full[i * k + j])
                .collect();
            let cap: f64 = DenseLu::new(m, sub)?.solve(&vec![1.0; m]).iter().sum();
            terms.push((m as u32, cap));
        }
        Ok(CoverageOracle { terms })
    }

    /// `P(F ⊂ I^u) = sum_{A ⊂ F} (-1)^{|A|} exp(-u cap(A))`.
    pub fn prob(&self, u: f64) -> f64 {
        let p: f64 = self
            .terms
            .iter()
            .map(|&(m, cap)| if m % 2 == 0 { 1.0 } else { -1.0 } * (-u * cap).exp())
            .sum();
        p.clamp(0.0, 1.0)
    }

    /// Capacity of the subset given by `mask`.
    pub fn capacity(&self, mask: u64) -> f64 {
        self.terms[mask as usize].1
    }
}

pub fn coverage_prob_exact(green: &GreenEvaluator, set: &SiteSet<LatticePoint>, u: f64) -> Result<f64> {
    Ok(CoverageOracle::new(green, set)?.prob(u))
}

/// `P(x ∉ I^u)` = `exp(-u / g(0))`.
pub fn one_point_vacancy(green: &GreenEvaluator, u: f64) -> f64 {
    (-u / green.g0()).exp()
}

/// `P(0, x ∉ I^u)` = `exp(-2u / (g(0) + g(x)))`.
pub fn two_point_vacancy(green: &GreenEvaluator, x: &[i64], u: f64) -> f64 {
    (-2.0 * u / (green.g0() + green.g(x))).exp()
}

/// `sum_{x in F, 0 < |x| < a} P(0, x ∉ I^{g(0) u})`, Euclidean `|x|`.
pub fn two_point_sum(green: &GreenEvaluator, set: &SiteSet<LatticePoint>, u: f64, a: f64) -> f64 {
    let v = green.g0() * u;
    set.iter()
        .filter(|x| {
            let r = x.euclidean();
            r > 0.0 && r < a
        })
        .map(|x| two_point_vacancy(green, x.coords(), v))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{Dispersion, Proportion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn green() -> GreenEvaluator {
        GreenEvaluator::new(2, 1e-8).unwrap()
    }

    fn pts(v: &[[i64; 3]]) -> SiteSet<LatticePoint> {
        v.iter().map(|c| LatticePoint::new(c.to_vec()).unwrap()).collect()
    }

    #[test]
    fn zero_level_gives_empty_trace() {
        let g = green();
        let s = WindowSampler::new(&g, pts(&[[0, 0, 0]]), Engine::Exact).unwrap();
        let sample = s.sample_interlacement(0.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(sample.count(), 0);
        assert!(sample.trace(s.sites()).is_empty());
    }

    #[test]
    fn chain_rows_escape_with_equilibrium_weight() {
        let g = green();
        let k = pts(&[[0, 0, 0], [1, 0, 0], [0, 2, 1], [3, 3, 3]]);
        let s = WindowSampler::new(&g, k, Engine::Exact).unwrap();
        assert!((s.capacity() - s.equilibrium().weights.iter().sum::<f64>()).abs() < 1e-14);
        // a singleton never revisits another site
        let one = WindowSampler::new(&g, pts(&[[0, 0, 0]]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        assert!((0..100).all(|_| one.trajectory(&mut r).visits == vec![0]));
    }

    #[test]
    fn two_point_vacancy_by_chain() {
        let g = green();
        let s = WindowSampler::new(&g, pts(&[[0, 0, 0], [1, 0, 0]]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let n = 50_000u64;
        let both = (0..n)
            .filter(|_| s.sample_interlacement(1.0, &mut r).covered.iter().all(|c| !c))
            .count() as u64;
        let p0 = two_point_vacancy(&g, &[1, 0, 0], 1.0);
        assert!(Proportion::wilson(both, n, 1.0).within_sigmas(p0, 3.0));
    }

    #[test]
    fn truncated_engine_agrees_with_chain() {
        let g = green();
        let k = pts(&[[0, 0, 0], [2, 0, 0], [0, 1, 1]]);
        let trunc = WindowSampler::new(
            &g,
            k.clone(),
            Engine::Truncated {
                epsilon: 0.02,
                max_radius: 200,
            },
        )
        .unwrap();
        assert!(trunc.truncation_bound() <= 0.02);
        let exact = WindowSampler::new(&g, k, Engine::Exact).unwrap();
        let n = 20_000u64;
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let full = |s: &WindowSampler, r: &mut ChaCha8Rng| {
            (0..n).filter(|_| s.trajectory(r).visits.len() == 3).count() as f64 / n as f64
        };
        let (pt, pe) = (full(&trunc, &mut r), full(&exact, &mut r));
        // truncation can only lose visits, by at most the bound per trajectory
        let se = (2.0 * pe * (1.0 - pe) / n as f64).sqrt();
        assert!(pt <= pe + 3.0 * se, "{pt} vs {pe}");
        assert!(pe - pt <= trunc.truncation_bound() + 3.0 * se, "{pt} vs {pe}");
    }

    #[test]
    fn truncation_rejects_unreachable_epsilon() {
        let g = green();
        let err = WindowSampler::new(
            &g,
            pts(&[[0, 0, 0]]),
            Engine::Truncated {
                epsilon: 1e-4,
                max_radius: 50,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Truncation { radius: 50, .. }));
    }

    #[test]
    fn arrival_count_is_poisson() {
        let g = green();
        let s = WindowSampler::new(&g, pts(&[[0, 0, 0], [1, 1, 0], [4, 0, 0]]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let u = 2.0;
        let counts: Vec<u64> = (0..10_000).map(|_| s.arrivals(u, &mut r).levels.len() as u64).collect();
        let disp = Dispersion::of(&counts);
        assert!(disp.mean_z(u * s.capacity()).abs() < 3.0);
        assert!((0.9..=1.1).contains(&disp.index), "{}", disp.index);
    }

    #[test]
    fn monotone_coupling() {
        let g = green();
        let s = WindowSampler::new(&g, pts(&[[0, 0, 0], [1, 0, 0], [0, 3, 0], [5, 5, 5]]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let a = s.arrivals(3.0, &mut r);
            let mut prev = a.sample_at(0.0, s.len());
            for u in [0.3, 0.7, 1.5, 3.0] {
                let next = a.sample_at(u, s.len());
                assert!(prev.covered.iter().zip(&next.covered).all(|(p, n)| !p || *n));
                prev = next;
            }
        }
    }

    #[test]
    fn cover_level_of_a_point_is_exponential() {
        let g = green();
        let s = WindowSampler::new(&g, pts(&[[0, 0, 0]]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let levels: Vec<f64> = (0..10_000).map(|_| s.sample_cover_level(&mut r).cover_level).collect();
        let g0 = g.g0();
        // Exponential with mean g(0) and sd g(0)
        assert!(crate::stats::mean_z(&levels, g0, g0).abs() < 3.0);
    }

    #[test]
    fn cover_level_record_is_consistent() {
        let g = green();
        let s = WindowSampler::new(&g, pts(&[[0, 0, 0], [0, 0, 2], [3, 0, 0]]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let rec = s.sample_cover_level(&mut r);
            assert!(rec.arrival_levels.windows(2).all(|w| w[0] < w[1]));
            assert!(rec.covered_after.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*rec.covered_after.last().unwrap(), 3);
            assert_eq!(rec.cover_level, *rec.arrival_levels.last().unwrap());
        }
    }

    #[test]
    fn inclusion_exclusion_limits_and_singleton() {
        let g = green();
        let one = pts(&[[0, 0, 0]]);
        for u in [0.5, 1.0, 3.0] {
            let p = coverage_prob_exact(&g, &one, u).unwrap();
            assert!((p - (1.0 - one_point_vacancy(&g, u))).abs() < 1e-12);
        }
        let f = pts(&[[0, 0, 0], [1, 0, 0], [0, 2, 0]]);
        let o = CoverageOracle::new(&g, &f).unwrap();
        assert_eq!(o.prob(0.0), 0.0);
        assert!((o.prob(200.0) - 1.0).abs() < 1e-12);
        let pair = CoverageOracle::new(&g, &pts(&[[0, 0, 0], [1, 0, 0]])).unwrap();
        let g0 = g.g0();
        let expected = 1.0 - 2.0 * (-1.0 / g0).exp() + (-2.0 / (2.0 * g0 - 1.0)).exp();
        assert!((pair.prob(1.0) - expected).abs() < 1e-7);
        assert!(CoverageOracle::new(&g, &SiteSet::empty()).is_err());
    }

    #[test]
    fn superposition_of_independent_levels() {
        // I^u ∪ independent I^{v-u} has the one-point law of I^v
        let g = green();
        let s = WindowSampler::new(&g, pts(&[[0, 0, 0]]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let n = 40_000u64;
        let vacant = (0..n)
            .filter(|_| {
                let a = s.sample_interlacement(0.6, &mut r);
                let b = s.sample_interlacement(0.9, &mut r);
                !a.covered[0] && !b.covered[0]
            })
            .count() as u64;
        assert!(Proportion::wilson(vacant, n, 1.0).within_sigmas(one_point_vacancy(&g, 1.5), 3.0));
    }

    #[test]
    fn decoupling_of_distant_points() {
        let g = green();
        let (a, b) = ([0i64, 0, 0], [20i64, 0, 0]);
        let s = WindowSampler::new(&g, pts(&[a, b]), Engine::Exact).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(10);
        let n = 40_000u64;
        let u = 1.0;
        let mut joint = 0;
        let mut ca = 0;
        let mut cb = 0;
        for _ in 0..n {
            let smp = s.sample_interlacement(u, &mut r);
            let (x, y) = (smp.covered[0], smp.covered[1]);
            joint += (x && y) as u64;
            ca += x as u64;
            cb += y as u64;
        }
        let (pj, pa, pb) = (joint as f64 / n as f64, ca as f64 / n as f64, cb as f64 / n as f64);
        let cap1 = 1.0 / g.g0();
        let term = cap1 * cap1 / 20.0;
        let noise = 3.0 * (pj * (1.0 - pj) / n as f64).sqrt() + 3.0 * (pa * (1.0 - pa) / n as f64).sqrt();
        assert!((pj - pa * pb).abs() <= 5.0 * term + noise);
    }

    #[test]
    fn two_point_sum_properties() {
        let g = green();
        let f = pts(&[[0, 0, 0], [1, 0, 0], [0, 2, 0], [3, 1, 0]]);
        assert_eq!(two_point_sum(&g, &f, 1.0, 1.0), 0.0);
        assert_eq!(two_point_sum(&g, &SiteSet::empty(), 1.0, 10.0), 0.0);
        let vals: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&u| two_point_sum(&g, &f, u, 10.0)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        // far site: term / e^{-2u} in [1, e^{2u g(x)/g(0)}]
        let far = [40i64, 0, 0];
        let gx = g.g(&far);
        for u in [0.5, 1.0, 2.0] {
            let ratio = two_point_sum(&g, &pts(&[far]), u, 100.0) / (-2.0 * u).exp();
            assert!(ratio >= 1.0 && ratio <= (2.0 * u * gx / g.g0()).exp() + 1e-12);
        }
    }
}
