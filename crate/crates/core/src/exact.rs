//! Exact potential theory on finite windows.
//!
//! Everything here reduces to linear systems in `I - P_U`, where `P_U` is the
//! simple-random-walk transition matrix restricted to a finite window `U`
//! (mass leaving `U` is killed). Windows are indexed in the order of their
//! [`SiteSet`], which for slabs of the cylinder is height-major, so `I - P_U`
//! is banded with half-bandwidth `N^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Cylinder, CylinderPoint, SiteSet, SlabSpec, Space};
use crate::linalg::{BandedLu, DenseLu};

/// Largest window the solvers accept.
pub const MAX_WINDOW: usize = 20_000;
/// Largest banded storage (in f64 entries) the solvers accept.
const MAX_BAND_ENTRIES: usize = 160_000_000;
/// Largest window for which the full Green matrix may be materialised.
pub const MAX_DENSE_GREEN: usize = 6_000;
/// Residual above which an equilibrium solve is reported as ill-conditioned.
pub const EQUILIBRIUM_RESIDUAL: f64 = 1e-8;

const OUTSIDE: u32 = u32::MAX;

/// A finite window `U` with its nearest-neighbour structure.
#[derive(Clone, Debug)]
pub struct Window<S: Space> {
    space: S,
    sites: SiteSet<S::Point>,
    nbrs: Vec<u32>,
    bandwidth: usize,
}

impl<S: Space + Clone> Window<S> {
    pub fn new(space: &S, sites: SiteSet<S::Point>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::EmptySet);
        }
        if sites.len() > MAX_WINDOW {
            return Err(Error::WindowTooLarge {
                size: sites.len(),
                limit: MAX_WINDOW,
            });
        }
        let deg = space.degree();
        let mut nbrs = Vec::with_capacity(sites.len() * deg);
        let mut bandwidth = 0;
        for (i, p) in sites.iter().enumerate() {
            space.validate(p)?;
            for dir in 0..deg {
                match sites.index_of(&space.neighbor(p, dir)) {
                    Some(j) => {
                        bandwidth = bandwidth.max(i.abs_diff(j));
                        nbrs.push(j as u32);
                    }
                    None => nbrs.push(OUTSIDE),
                }
            }
        }
        if sites.len() * (2 * bandwidth + 1) > MAX_BAND_ENTRIES {
            return Err(Error::WindowTooLarge {
                size: sites.len(),
                limit: MAX_BAND_ENTRIES / (2 * bandwidth + 1),
            });
        }
        Ok(Window {
            space: space.clone(),
            sites,
            nbrs,
            bandwidth,
        })
    }

    pub fn space(&self) -> &S {
        &self.space
    }

    pub fn sites(&self) -> &SiteSet<S::Point> {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    fn degree(&self) -> usize {
        self.space.degree()
    }

    /// Window indices of the in-window neighbours of site `i`.
    pub fn neighbors_of(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let deg = self.degree();
        self.nbrs[i * deg..(i + 1) * deg]
            .iter()
            .filter(|&&j| j != OUTSIDE)
            .map(|&j| j as usize)
    }

    /// Neighbour of site `i` in direction `dir`, if it lies in the window.
    pub fn neighbor_index(&self, i: usize, dir: usize) -> Option<usize> {
        let j = self.nbrs[i * self.degree() + dir];
        (j != OUTSIDE).then_some(j as usize)
    }

    fn indices_of(&self, set: &SiteSet<S::Point>) -> Result<Vec<usize>> {
        set.iter()
            .map(|p| {
                self.sites
                    .index_of(p)
                    .ok_or_else(|| Error::NotContained(format!("{p:?}")))
            })
            .collect()
    }

    /// Factorises `I - P_U` with the rows of `absorbing` replaced by identity
    /// rows and couplings into `absorbing` dropped.
    fn operator(&self, absorbing: Option<&[bool]>) -> Result<BandedLu> {
        let n = self.len();
        let step = 1.0 / self.degree() as f64;
        let mut a = BandedLu::zeros(n, self.bandwidth);
        let absorbed = |i: usize| absorbing.is_some_and(|m| m[i]);
        for i in 0..n {
            a.add(i, i, 1.0);
            if absorbed(i) {
                continue;
            }
            for j in self.neighbors_of(i) {
                if !absorbed(j) {
                    a.add(i, j, -step);
                }
            }
        }
        a.factor()
    }

    fn mask(&self, idx: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.len()];
        for &i in idx {
            m[i] = true;
        }
        m
    }
}

/// Equilibrium measure of a set, either relative to a window or in full space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumVector<P> {
    pub set: SiteSet<P>,
    pub weights: Vec<f64>,
    pub capacity: f64,
}

impl<P: Ord + Clone> EquilibriumVector<P> {
    pub(crate) fn from_weights(set: SiteSet<P>, weights: Vec<f64>) -> Self {
        let capacity = weights.iter().sum();
        EquilibriumVector {
            set,
            weights,
            capacity,
        }
    }

    pub fn weight(&self, p: &P) -> Option<f64> {
        self.set.index_of(p).map(|i| self.weights[i])
    }
}

/// Killed Green function `g_U` of a window, held as a factorisation of `I - P_U`.
///
/// Columns are produced on demand; [`KilledGreenSystem::matrix`] materialises
/// the full `|U| x |U|` matrix for windows up to [`MAX_DENSE_GREEN`] sites.
#[derive(Clone, Debug)]
pub struct KilledGreenSystem<S: Space> {
    window: Window<S>,
    lu: BandedLu,
}

pub fn killed_green<S: Space + Clone>(space: &S, sites: SiteSet<S::Point>) -> Result<KilledGreenSystem<S>> {
    let window = Window::new(space, sites)?;
    KilledGreenSystem::new(window)
}

impl<S: Space + Clone> KilledGreenSystem<S> {
    pub fn new(window: Window<S>) -> Result<Self> {
        let lu = window.operator(None)?;
        Ok(KilledGreenSystem { window, lu })
    }

    pub fn window(&self) -> &Window<S> {
        &self.window
    }

    /// `g_U(., y)` as a vector over the window.
    pub fn column(&self, y: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.window.len()];
        x[y] = 1.0;
        self.lu.solve_in_place(&mut x);
        x
    }

    pub fn value(&self, x: &S::Point, y: &S::Point) -> Result<f64> {
        let xi = self.window.indices_of(&SiteSet::new(vec![x.clone()]))?[0];
        let yi = self.window.indices_of(&SiteSet::new(vec![y.clone()]))?[0];
        Ok(self.column(yi)[xi])
    }

    /// Full row-major matrix `G[x][y] = g_U(x, y)`.
    pub fn matrix(&self) -> Result<Vec<f64>> {
        let n = self.window.len();
        if n > MAX_DENSE_GREEN {
            return Err(Error::WindowTooLarge {
                size: n,
                limit: MAX_DENSE_GREEN,
            });
        }
        let mut g = vec![0.0; n * n];
        for y in 0..n {
            for (x, v) in self.column(y).into_iter().enumerate() {
                g[x * n + y] = v;
            }
        }
        Ok(g)
    }

    /// `|| (I - P_U) G - I ||_inf` for a materialised `G`.
    pub fn residual(&self, g: &[f64]) -> f64 {
        let n = self.window.len();
        let step = 1.0 / self.window.degree() as f64;
        let mut worst = 0.0f64;
        for x in 0..n {
            let mut row_sum = 0.0;
            for y in 0..n {
                let mut v = g[x * n + y];
                for z in self.window.neighbors_of(x) {
                    v -= step * g[z * n + y];
                }
                if x == y {
                    v -= 1.0;
                }
                row_sum += v.abs();
            }
            worst = worst.max(row_sum);
        }
        worst
    }

    /// `G` restricted to `rows x cols`, row-major.
    pub fn block(&self, rows: &SiteSet<S::Point>, cols: &SiteSet<S::Point>) -> Result<Vec<f64>> {
        let ri = self.window.indices_of(rows)?;
        let ci = self.window.indices_of(cols)?;
        let mut out = vec![0.0; ri.len() * ci.len()];
        for (c, &y) in ci.iter().enumerate() {
            let col = self.column(y);
            for (r, &x) in ri.iter().enumerate() {
                out[r * ci.len() + c] = col[x];
            }
        }
        Ok(out)
    }
}

/// Relative equilibrium measure `e_{K,U}` from `G|_{KxK} e = 1`.
pub fn equilibrium_relative<S: Space + Clone>(
    green: &KilledGreenSystem<S>,
    set: &SiteSet<S::Point>,
) -> Result<EquilibriumVector<S::Point>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let k = set.len();
    let gkk = green.block(set, set)?;
    let lu = DenseLu::new(k, gkk.clone())?;
    let e = lu.solve(&vec![1.0; k]);
    let residual = crate::linalg::matvec(k, &gkk, &e)
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    if residual > EQUILIBRIUM_RESIDUAL {
        return Err(Error::IllConditioned {
            residual,
            limit: EQUILIBRIUM_RESIDUAL,
        });
    }
    Ok(EquilibriumVector::from_weights(set.clone(), e))
}

/// Relative equilibrium measure from the escape probabilities
/// `e_{K,U}(x) = P_x(walk leaves U before returning to K)`, one linear solve.
pub fn equilibrium_by_escape<S: Space + Clone>(
    window: &Window<S>,
    set: &SiteSet<S::Point>,
) -> Result<EquilibriumVector<S::Point>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let idx = window.indices_of(set)?;
    let mask = window.mask(&idx);
    let lu = window.operator(Some(&mask))?;
    let step = 1.0 / window.degree() as f64;
    // phi(z) = P_z(H_K < T_U); on K rows the identity row pins phi = 1
    let mut phi = vec![0.0; window.len()];
    for (z, slot) in phi.iter_mut().enumerate() {
        *slot = if mask[z] {
            1.0
        } else {
            window.neighbors_of(z).filter(|&w| mask[w]).count() as f64 * step
        };
    }
    lu.solve_in_place(&mut phi);
    let weights = idx
        .iter()
        .map(|&x| {
            let returned: f64 = window.neighbors_of(x).map(|w| phi[w]).sum::<f64>() * step;
            1.0 - returned
        })
        .collect();
    Ok(EquilibriumVector::from_weights(set.clone(), weights))
}

/// First-entrance law of a set before leaving the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingLaw<P> {
    pub set: SiteSet<P>,
    /// `P(H_K < T_U, X_{H_K} = x)` for `x` in set order.
    pub probs: Vec<f64>,
    /// `P(T_U < H_K)`.
    pub miss: f64,
}

/// Exact law of where the walk started from `start_law` first enters `set`
/// before exiting the window.
pub fn hitting_location<S: Space + Clone>(
    window: &Window<S>,
    start_law: &[(S::Point, f64)],
    set: &SiteSet<S::Point>,
) -> Result<HittingLaw<S::Point>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let idx = window.indices_of(set)?;
    let mask = window.mask(&idx);
    let lu = window.operator(Some(&mask))?;
    let n = window.len();
    let mut mu = vec![0.0; n];
    for (p, w) in start_law {
        let i = window
            .sites
            .index_of(p)
            .ok_or_else(|| Error::NotContained(format!("start {p:?}")))?;
        mu[i] += w;
    }
    let total: f64 = mu.iter().sum();
    // the operator is symmetric, so w = A^{-1} mu gives mu^T A^{-1} b for every target b
    let mut w = mu.clone();
    lu.solve_in_place(&mut w);
    let step = 1.0 / window.degree() as f64;
    let probs: Vec<f64> = idx
        .iter()
        .map(|&x| {
            let through: f64 = window
                .neighbors_of(x)
                .filter(|&z| !mask[z])
                .map(|z| w[z])
                .sum::<f64>()
                * step;
            mu[x] + through
        })
        .collect();
    let hit: f64 = probs.iter().sum();
    Ok(HittingLaw {
        set: set.clone(),
        probs,
        miss: total - hit,
    })
}

/// Mutual energy `sum e_{S1}(x) g_U(x,y) e_{S2}(y)` relative to the window.
pub fn mutual_energy<S: Space + Clone>(
    green: &KilledGreenSystem<S>,
    s1: &SiteSet<S::Point>,
    s2: &SiteSet<S::Point>,
) -> Result<f64> {
    let overlap = s1.intersection_len(s2);
    if overlap > 0 {
        return Err(Error::Overlap(overlap));
    }
    let e1 = equilibrium_relative(green, s1)?;
    let e2 = equilibrium_relative(green, s2)?;
    let g = green.block(s1, s2)?;
    let m = s2.len();
    Ok(e1
        .weights
        .iter()
        .enumerate()
        .map(|(i, a)| a * (0..m).map(|j| g[i * m + j] * e2.weights[j]).sum::<f64>())
        .sum())
}

/// The slab `B~` of the cylinder as a finite window `T_N^d x [-h_N+1, h_N-1]`.
#[derive(Clone, Debug)]
pub struct SlabWindow {
    pub slab: SlabSpec,
    pub cylinder: Cylinder,
    pub green: KilledGreenSystem<Cylinder>,
}

impl SlabWindow {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        let slab = crate::lattice::slab_geometry(n, d)?;
        let cylinder = Cylinder::new(n, d)?;
        let sites = cylinder.slab(-slab.h + 1, slab.h - 1);
        let green = killed_green(&cylinder, sites)?;
        Ok(SlabWindow {
            slab,
            cylinder,
            green,
        })
    }

    pub fn window(&self) -> &Window<Cylinder> {
        self.green.window()
    }

    /// `q`: uniform on `T_N^d x {-r_N, r_N}`.
    pub fn q(&self) -> Vec<(CylinderPoint, f64)> {
        let w = 0.5 / self.cylinder.torus_size() as f64;
        let mut law: Vec<_> = self
            .cylinder
            .level(-self.slab.r)
            .into_iter()
            .map(|p| (p, w))
            .collect();
        law.extend(self.cylinder.level(self.slab.r).into_iter().map(|p| (p, w)));
        law
    }

    /// `q_z`: uniform on `T_N^d x {z}`.
    pub fn q_level(&self, z: i64) -> Vec<(CylinderPoint, f64)> {
        let w = 1.0 / self.cylinder.torus_size() as f64;
        self.cylinder.level(z).into_iter().map(|p| (p, w)).collect()
    }
}

/// Outcome of the entrance-law identity check `K_N P_q(H_K < T_B~, X_{H_K} = x) = e_{K,B~}(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntranceLawCheck {
    pub residual: f64,
    /// `K_N P_q(H_K < T_B~)`.
    pub scaled_hit_mass: f64,
    pub capacity: f64,
}

pub fn entrance_law_residual(slab: &SlabWindow, set: &SiteSet<CylinderPoint>) -> Result<EntranceLawCheck> {
    if let Some(p) = set.iter().find(|p| p.height().abs() >= slab.slab.r) {
        return Err(Error::NotContained(format!(
            "{p:?} is outside T_N x (-r_N, r_N)"
        )));
    }
    let law = hitting_location(slab.window(), &slab.q(), set)?;
    let eq = equilibrium_relative(&slab.green, set)?;
    let k_n = slab.slab.k_n;
    let residual = law
        .probs
        .iter()
        .zip(&eq.weights)
        .map(|(p, e)| (k_n * p - e).abs())
        .fold(0.0, f64::max);
    Ok(EntranceLawCheck {
        residual,
        scaled_hit_mass: k_n * law.probs.iter().sum::<f64>(),
        capacity: eq.capacity,
    })
}
