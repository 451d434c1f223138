//! Geometry of `Z^{d+1}`, the torus `T_N^d` and the cylinder `E_N = T_N^d x Z`.
//!
//! Directions are numbered `0..2(d+1)`: direction `2i` is `+e_i`, `2i + 1`
//! is `-e_i`. On the cylinder, axes `0..d` are torus axes and axis `d` is the
//! height. This numbering is also the mapping from a uniform draw to a walk
//! step, so changing it changes every simulated trajectory.

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A site of `Z^{d+1}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::param(
                "coords",
                format!("need at least 3 coordinates (d >= 2), got {}", coords.len()),
            ));
        }
        Ok(LatticePoint(coords))
    }

    pub fn origin(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    /// `scale * e_axis`.
    pub fn axis(dim: usize, axis: usize, scale: i64) -> Self {
        let mut c = vec![0; dim];
        c[axis] = scale;
        LatticePoint(c)
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn offset(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn minus(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn step(&self, dir: usize) -> LatticePoint {
        let mut c = self.0.clone();
        c[dir / 2] += if dir.is_multiple_of(2) { 1 } else { -1 };
        LatticePoint(c)
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn euclidean(&self) -> f64 {
        (self.0.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A site of the cylinder: canonical torus coordinates in `[0, N)` and a height.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CylinderPoint {
    // height first so the derived order is height-major
    height: i64,
    torus: Vec<i64>,
}

impl CylinderPoint {
    pub fn new(torus: Vec<i64>, height: i64, n: usize) -> Result<Self> {
        if let Some(bad) = torus.iter().find(|&&t| t < 0 || t >= n as i64) {
            return Err(Error::param(
                "torus",
                format!("coordinate {bad} outside [0, {n})"),
            ));
        }
        Ok(CylinderPoint { height, torus })
    }

    pub fn torus(&self) -> &[i64] {
        &self.torus
    }

    pub fn height(&self) -> i64 {
        self.height
    }
}

impl fmt::Debug for CylinderPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {})", self.torus, self.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    Linf,
}

/// Nearest-neighbour graph structure shared by `Z^{d+1}` and the cylinder.
pub trait Space {
    type Point: Clone + Eq + Ord + Hash + fmt::Debug;

    /// Torus dimension `d`; the graph has degree `2(d+1)`.
    fn d(&self) -> usize;

    fn degree(&self) -> usize {
        2 * (self.d() + 1)
    }

    fn validate(&self, p: &Self::Point) -> Result<()>;

    /// Neighbour in direction `dir` (see module docs for the numbering).
    fn neighbor(&self, p: &Self::Point, dir: usize) -> Self::Point;

    fn neighbors(&self, p: &Self::Point) -> Vec<Self::Point> {
        (0..self.degree()).map(|k| self.neighbor(p, k)).collect()
    }

    fn distance(&self, p: &Self::Point, q: &Self::Point, norm: Norm) -> Result<f64>;
}

/// `Z^{d+1}` with `d >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZLattice {
    d: usize,
}

impl ZLattice {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("d", format!("need d >= 2, got {d}")));
        }
        Ok(ZLattice { d })
    }

    pub fn dim(&self) -> usize {
        self.d + 1
    }

    pub fn point(&self, coords: &[i64]) -> Result<LatticePoint> {
        let p = LatticePoint(coords.to_vec());
        self.validate(&p)?;
        Ok(p)
    }
}

fn norm_of(diffs: impl Iterator<Item = i64>, norm: Norm) -> f64 {
    match norm {
        Norm::Euclidean => diffs.map(|c| (c * c) as f64).sum::<f64>().sqrt(),
        Norm::Linf => diffs.map(|c| c.abs()).max().unwrap_or(0) as f64,
    }
}

impl Space for ZLattice {
    type Point = LatticePoint;

    fn d(&self) -> usize {
        self.d
    }

    fn validate(&self, p: &LatticePoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        Ok(())
    }

    fn neighbor(&self, p: &LatticePoint, dir: usize) -> LatticePoint {
        p.step(dir)
    }

    fn distance(&self, p: &LatticePoint, q: &LatticePoint, norm: Norm) -> Result<f64> {
        self.validate(p)?;
        self.validate(q)?;
        Ok(norm_of(p.0.iter().zip(&q.0).map(|(a, b)| a - b), norm))
    }
}

/// The cylinder `T_N^d x Z` with `N >= 3`, `d >= 2`.
///
/// Besides the point-level API it exposes a packed representation (torus
/// index, height) with a precomputed torus neighbour table, which the walk
/// engines use in their inner loops.
#[derive(Clone, Debug)]
pub struct Cylinder {
    n: usize,
    d: usize,
    torus_size: usize,
    // torus_nbrs[idx * 2d + dir] for torus directions dir < 2d
    torus_nbrs: Vec<u32>,
}

impl PartialEq for Cylinder {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }
}

impl Cylinder {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::param("N", format!("need N >= 3, got {n}")));
        }
        if d < 2 {
            return Err(Error::param("d", format!("need d >= 2, got {d}")));
        }
        let torus_size = n
            .checked_pow(d as u32)
            .filter(|&s| s <= u32::MAX as usize)
            .ok_or_else(|| Error::param("N", "torus too large"))?;
        let mut torus_nbrs = Vec::with_capacity(torus_size * 2 * d);
        let mut coords = vec![0i64; d];
        for idx in 0..torus_size {
            decode(idx, n, &mut coords);
            for axis in 0..d {
                for sign in [1i64, -1] {
                    let mut c = coords.clone();
                    c[axis] = (c[axis] + sign).rem_euclid(n as i64);
                    torus_nbrs.push(encode(&c, n) as u32);
                }
            }
        }
        Ok(Cylinder {
            n,
            d,
            torus_size,
            torus_nbrs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `N^d`, the number of sites of one level.
    pub fn torus_size(&self) -> usize {
        self.torus_size
    }

    pub fn point(&self, torus: &[i64], height: i64) -> Result<CylinderPoint> {
        if torus.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: torus.len(),
            });
        }
        CylinderPoint::new(torus.to_vec(), height, self.n)
    }

    /// Same as [`Cylinder::point`] but reduces torus coordinates modulo `N`.
    pub fn point_wrapped(&self, torus: &[i64], height: i64) -> CylinderPoint {
        CylinderPoint {
            torus: torus.iter().map(|t| t.rem_euclid(self.n as i64)).collect(),
            height,
        }
    }

    pub fn torus_index(&self, p: &CylinderPoint) -> usize {
        encode(&p.torus, self.n)
    }

    pub fn from_index(&self, torus_idx: usize, height: i64) -> CylinderPoint {
        let mut c = vec![0; self.d];
        decode(torus_idx, self.n, &mut c);
        CylinderPoint { torus: c, height }
    }

    #[inline]
    pub fn torus_neighbor(&self, torus_idx: usize, dir: usize) -> usize {
        self.torus_nbrs[torus_idx * 2 * self.d + dir] as usize
    }

    /// All sites of the level `T_N^d x {height}`, in torus-index order.
    pub fn level(&self, height: i64) -> Vec<CylinderPoint> {
        (0..self.torus_size)
            .map(|i| self.from_index(i, height))
            .collect()
    }

    /// `T_N^d x [lo, hi]`.
    pub fn slab(&self, lo: i64, hi: i64) -> SiteSet<CylinderPoint> {
        SiteSet::new((lo..=hi).flat_map(|h| self.level(h)).collect())
    }

    /// Minimal wrap-around displacement of torus coordinates plus the height difference.
    pub fn displacement(&self, p: &CylinderPoint, q: &CylinderPoint) -> Vec<i64> {
        let n = self.n as i64;
        p.torus
            .iter()
            .zip(&q.torus)
            .map(|(a, b)| {
                let diff = (a - b).rem_euclid(n);
                diff.min(n - diff)
            })
            .chain(std::iter::once(p.height - q.height))
            .collect()
    }

    /// Unit-diameter of the torus in the given norm, i.e. the largest torus distance.
    pub fn torus_diameter(&self, norm: Norm) -> f64 {
        let half = (self.n / 2) as i64;
        norm_of(std::iter::repeat_n(half, self.d), norm)
    }
}

fn encode(coords: &[i64], n: usize) -> usize {
    coords
        .iter()
        .rev()
        .fold(0usize, |acc, &c| acc * n + c as usize)
}

fn decode(mut idx: usize, n: usize, out: &mut [i64]) {
    for c in out.iter_mut() {
        *c = (idx % n) as i64;
        idx /= n;
    }
}

impl Space for Cylinder {
    type Point = CylinderPoint;

    fn d(&self) -> usize {
        self.d
    }

    fn validate(&self, p: &CylinderPoint) -> Result<()> {
        if p.torus.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: p.torus.len(),
            });
        }
        if p.torus.iter().any(|&t| t < 0 || t >= self.n as i64) {
            return Err(Error::param("torus", format!("{p:?} not canonical for N={}", self.n)));
        }
        Ok(())
    }

    fn neighbor(&self, p: &CylinderPoint, dir: usize) -> CylinderPoint {
        let mut q = p.clone();
        let axis = dir / 2;
        let sign = if dir.is_multiple_of(2) { 1 } else { -1 };
        if axis == self.d {
            q.height += sign;
        } else {
            q.torus[axis] = (q.torus[axis] + sign).rem_euclid(self.n as i64);
        }
        q
    }

    fn distance(&self, p: &CylinderPoint, q: &CylinderPoint, norm: Norm) -> Result<f64> {
        self.validate(p)?;
        self.validate(q)?;
        Ok(norm_of(self.displacement(p, q).into_iter(), norm))
    }
}

/// A finite, sorted, duplicate-free collection of sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteSet<P>(Vec<P>);

impl<P: Ord + Clone> SiteSet<P> {
    pub fn new(mut sites: Vec<P>) -> Self {
        sites.sort();
        sites.dedup();
        SiteSet(sites)
    }

    pub fn empty() -> Self {
        SiteSet(Vec::new())
    }

    fn from_sorted_unique(sites: Vec<P>) -> Self {
        debug_assert!(sites.windows(2).all(|w| w[0] < w[1]));
        SiteSet(sites)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: &P) -> bool {
        self.0.binary_search(p).is_ok()
    }

    pub fn index_of(&self, p: &P) -> Option<usize> {
        self.0.binary_search(p).ok()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, P> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[P] {
        &self.0
    }

    pub fn is_subset(&self, other: &SiteSet<P>) -> bool {
        self.0.iter().all(|p| other.contains(p))
    }

    pub fn intersection_len(&self, other: &SiteSet<P>) -> usize {
        self.0.iter().filter(|p| other.contains(p)).count()
    }

    pub fn union(&self, other: &SiteSet<P>) -> SiteSet<P> {
        SiteSet::new(self.0.iter().chain(&other.0).cloned().collect())
    }

    pub fn subset_by_mask(&self, mask: u64) -> SiteSet<P> {
        SiteSet::from_sorted_unique(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, p)| p.clone())
                .collect(),
        )
    }
}

impl<P> IntoIterator for SiteSet<P> {
    type Item = P;
    type IntoIter = std::vec::IntoIter<P>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a, P> IntoIterator for &'a SiteSet<P> {
    type Item = &'a P;
    type IntoIter = std::slice::Iter<'a, P>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl<P: Ord + Clone> FromIterator<P> for SiteSet<P> {
    fn from_iter<I: IntoIterator<Item = P>>(iter: I) -> Self {
        SiteSet::new(iter.into_iter().collect())
    }
}

/// Inner and outer vertex boundaries of `set`.
pub fn boundaries<S: Space>(
    space: &S,
    set: &SiteSet<S::Point>,
) -> (SiteSet<S::Point>, SiteSet<S::Point>) {
    let members: HashSet<&S::Point> = set.iter().collect();
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for p in set {
        let mut on_edge = false;
        for q in space.neighbors(p) {
            if !members.contains(&q) {
                on_edge = true;
                outer.push(q);
            }
        }
        if on_edge {
            inner.push(p.clone());
        }
    }
    (SiteSet::new(inner), SiteSet::new(outer))
}

/// Levels and normalising constant attached to the slabs
/// `B = T_N x [-r_N, r_N]` and `B~ = T_N x (-h_N, h_N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub n: usize,
    pub d: usize,
    pub r: i64,
    pub h: i64,
    /// `K_N = N^d / ((d+1)(h_N - r_N))`.
    pub k_n: f64,
}

impl SlabSpec {
    /// Numerator and denominator of `K_N` as exact integers.
    pub fn k_n_ratio(&self) -> (u64, u64) {
        (
            (self.n as u64).pow(self.d as u32),
            (self.d as u64 + 1) * (self.h - self.r) as u64,
        )
    }

    pub fn in_b(&self, height: i64) -> bool {
        height.abs() <= self.r
    }

    /// Open slab `B~`.
    pub fn in_b_tilde(&self, height: i64) -> bool {
        height.abs() < self.h
    }
}

/// `r_N = N`, `h_N = floor(N (2 + (ln N)^2))` and `K_N`.
pub fn slab_geometry(n: usize, d: usize) -> Result<SlabSpec> {
    if n < 3 {
        return Err(Error::param("N", format!("need N >= 3, got {n}")));
    }
    if d < 2 {
        return Err(Error::param("d", format!("need d >= 2, got {d}")));
    }
    let nf = n as f64;
    let r = n as i64;
    let h = (nf * (2.0 + nf.ln().powi(2))).floor() as i64;
    let k_n = nf.powi(d as i32) / ((d as f64 + 1.0) * (h - r) as f64);
    Ok(SlabSpec { n, d, r, h, k_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slab_levels() {
        let s = slab_geometry(6, 2).unwrap();
        assert_eq!((s.r, s.h), (6, 31));
        assert!((s.k_n - 0.48).abs() < 1e-15);

        let s = slab_geometry(10, 2).unwrap();
        assert_eq!((s.r, s.h), (10, 73));
        assert!((s.k_n - 100.0 / 189.0).abs() < 1e-15);

        let s = slab_geometry(3, 2).unwrap();
        assert_eq!((s.r, s.h), (3, 9));
    }

    #[test]
    fn slab_rejects_small_parameters() {
        assert!(slab_geometry(2, 2).is_err());
        assert!(slab_geometry(5, 1).is_err());
    }

    #[test]
    fn slab_invariants_over_range() {
        for n in 3..200 {
            for d in 2..5 {
                let s = slab_geometry(n, d).unwrap();
                assert!(s.h > 2 * n as i64, "N={n}");
                let (num, den) = s.k_n_ratio();
                assert_eq!(num, (n as u64).pow(d as u32));
                assert_eq!(den, (d as u64 + 1) * (s.h - s.r) as u64);
                assert!((s.k_n * den as f64 - num as f64).abs() <= 1e-9 * num as f64);
            }
        }
    }

    #[test]
    fn lattice_neighbors() {
        let z = ZLattice::new(2).unwrap();
        let p = z.point(&[3, -1, 7]).unwrap();
        let nb = z.neighbors(&p);
        assert_eq!(nb.len(), 6);
        assert_eq!(SiteSet::new(nb).len(), 6);
    }

    #[test]
    fn cylinder_wraps() {
        let c = Cylinder::new(4, 2).unwrap();
        let p = c.point(&[0, 0], 5).unwrap();
        let nb = c.neighbors(&p);
        assert_eq!(nb.len(), 6);
        assert!(nb.contains(&c.point(&[3, 0], 5).unwrap()));
        assert!(nb.contains(&c.point(&[0, 0], 6).unwrap()));
        assert!(nb.contains(&c.point(&[0, 0], 4).unwrap()));
    }

    #[test]
    fn packed_neighbors_agree_with_points() {
        let c = Cylinder::new(5, 3).unwrap();
        for idx in 0..c.torus_size() {
            let p = c.from_index(idx, 0);
            assert_eq!(c.torus_index(&p), idx);
            for dir in 0..6 {
                let q = c.neighbor(&p, dir);
                assert_eq!(c.torus_index(&q), c.torus_neighbor(idx, dir));
            }
        }
    }

    #[test]
    fn distances() {
        let z = ZLattice::new(2).unwrap();
        let o = LatticePoint::origin(3);
        let q = z.point(&[1, 1, 1]).unwrap();
        assert_eq!(z.distance(&o, &q, Norm::Linf).unwrap(), 1.0);
        assert!((z.distance(&o, &q, Norm::Euclidean).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(z.distance(&q, &q, Norm::Euclidean).unwrap(), 0.0);

        let c = Cylinder::new(10, 2).unwrap();
        let a = c.point(&[1, 0], 0).unwrap();
        let b = c.point(&[9, 0], 0).unwrap();
        assert_eq!(c.distance(&a, &b, Norm::Linf).unwrap(), 2.0);
        assert_eq!(c.distance(&a, &a, Norm::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let z = ZLattice::new(2).unwrap();
        let p = LatticePoint::origin(3);
        let q = LatticePoint::origin(4);
        assert!(matches!(
            z.distance(&p, &q, Norm::Linf),
            Err(Error::DimensionMismatch { .. })
        ));
        let c = Cylinder::new(4, 2).unwrap();
        assert!(c.point(&[0, 0, 0], 0).is_err());
        assert!(c.point(&[4, 0], 0).is_err());
    }

    #[test]
    fn boundaries_singleton() {
        let z = ZLattice::new(2).unwrap();
        let p = LatticePoint::origin(3);
        let (inner, outer) = boundaries(&z, &SiteSet::new(vec![p.clone()]));
        assert_eq!(inner.as_slice(), std::slice::from_ref(&p));
        assert_eq!(outer, SiteSet::new(z.neighbors(&p)));
    }

    #[test]
    fn boundaries_cube() {
        let z = ZLattice::new(2).unwrap();
        let mut cube = Vec::new();
        for a in -1..=1 {
            for b in -1..=1 {
                for c in -1..=1 {
                    cube.push(z.point(&[a, b, c]).unwrap());
                }
            }
        }
        let cube = SiteSet::new(cube);
        let (inner, outer) = boundaries(&z, &cube);
        // brute-force enumeration over the enclosing 5x5x5 box
        let mut brute_outer = 0;
        for a in -2i64..=2 {
            for b in -2i64..=2 {
                for c in -2i64..=2 {
                    let p = z.point(&[a, b, c]).unwrap();
                    if !cube.contains(&p) && z.neighbors(&p).iter().any(|q| cube.contains(q)) {
                        brute_outer += 1;
                    }
                }
            }
        }
        assert_eq!(inner.len(), 26);
        assert_eq!(outer.len(), 54);
        assert_eq!(brute_outer, 54);
    }

    #[test]
    fn boundaries_slab_faces() {
        let c = Cylinder::new(4, 2).unwrap();
        let s = slab_geometry(4, 2).unwrap();
        let slab = c.slab(-s.h + 1, s.h - 1);
        let (inner, outer) = boundaries(&c, &slab);
        let mut faces = c.level(-s.h);
        faces.extend(c.level(s.h));
        assert_eq!(outer, SiteSet::new(faces));
        assert_eq!(inner.len(), 2 * c.torus_size());
    }

    #[test]
    fn empty_set_has_empty_boundaries() {
        let z = ZLattice::new(2).unwrap();
        let (i, o) = boundaries(&z, &SiteSet::<LatticePoint>::empty());
        assert!(i.is_empty() && o.is_empty());
    }

    fn small_set() -> impl Strategy<Value = Vec<(i64, i64, i64)>> {
        prop::collection::vec((-3i64..3, -3i64..3, -3i64..3), 0..25)
    }

    proptest! {
        #[test]
        fn boundary_containment(pts in small_set()) {
            let z = ZLattice::new(2).unwrap();
            let set: SiteSet<_> = pts.iter().map(|&(a, b, c)| z.point(&[a, b, c]).unwrap()).collect();
            let (inner, outer) = boundaries(&z, &set);
            prop_assert!(inner.is_subset(&set));
            prop_assert_eq!(outer.intersection_len(&set), 0);
        }

        #[test]
        fn cylinder_neighbor_symmetry(t0 in 0i64..7, t1 in 0i64..7, h in -20i64..20) {
            let c = Cylinder::new(7, 2).unwrap();
            let p = c.point(&[t0, t1], h).unwrap();
            let nb = c.neighbors(&p);
            prop_assert_eq!(nb.len(), 6);
            for q in &nb {
                prop_assert!(c.neighbors(q).contains(&p));
                prop_assert_eq!(c.distance(&p, q, Norm::Euclidean).unwrap(), 1.0);
            }
        }
    }
}
