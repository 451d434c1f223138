//! Exact-oracle checks bundled for the command-line self-test.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exact::{entrance_law_residual, SlabWindow};
use crate::green::{capacity, GreenEvaluator};
use crate::lattice::{Cylinder, CylinderPoint, LatticePoint, SiteSet, Space};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

/// Five test sets inside `T_N x (-r_N, r_N)`.
pub fn entrance_law_sets(cyl: &Cylinder) -> Vec<SiteSet<CylinderPoint>> {
    let p = |t: &[i64], h: i64| cyl.point_wrapped(t, h);
    let d = cyl.d();
    let mut t1 = vec![0i64; d];
    t1[0] = 1;
    let mut t2 = vec![0i64; d];
    t2[0] = 2;
    t2[1] = 1;
    let zero = vec![0i64; d];
    vec![
        SiteSet::new(vec![p(&zero, 0)]),
        SiteSet::new(vec![p(&zero, 0), p(&t1, 0)]),
        SiteSet::new(vec![p(&zero, -1), p(&t2, 2)]),
        SiteSet::new(vec![p(&zero, 0), p(&t1, 0), p(&t2, 0), p(&zero, 1)]),
        SiteSet::new(cyl.level(1)),
    ]
}

/// Largest entrance-law residual over [`entrance_law_sets`] on the slab of size `n`.
pub fn entrance_law_max_residual(n: usize, d: usize) -> Result<f64> {
    let sw = SlabWindow::new(n, d)?;
    let mut worst = 0.0f64;
    for set in entrance_law_sets(&sw.cylinder) {
        worst = worst.max(entrance_law_residual(&sw, &set)?.residual);
    }
    Ok(worst)
}

fn unit(dim: usize, axis: usize, s: i64) -> Vec<i64> {
    let mut v = vec![0; dim];
    v[axis] = s;
    v
}

/// `|g(x) - (1/2D) sum_e g(x+e) - 1{x=0}|`.
pub fn harmonic_defect(green: &GreenEvaluator, x: &[i64]) -> f64 {
    let dim = x.len();
    let mut avg = 0.0;
    for axis in 0..dim {
        for s in [-1, 1] {
            let y: Vec<i64> = x.iter().zip(unit(dim, axis, s)).map(|(a, b)| a + b).collect();
            avg += green.g(&y);
        }
    }
    avg /= (2 * dim) as f64;
    let delta = if x.iter().all(|&c| c == 0) { 1.0 } else { 0.0 };
    (green.g(x) - avg - delta).abs()
}

/// Largest `|cap({0, x}) - 2/(g(0) + g(x))|` over `0 < |x|_inf <= reach`.
pub fn pair_capacity_defect(green: &GreenEvaluator, reach: i64) -> Result<f64> {
    let dim = green.d() + 1;
    let o = LatticePoint::origin(dim);
    let g0 = green.g0();
    let mut worst = 0.0f64;
    let side = (2 * reach + 1) as usize;
    for i in 0..side.pow(dim as u32) {
        let mut c = vec![0i64; dim];
        let mut k = i;
        for slot in c.iter_mut() {
            *slot = (k % side) as i64 - reach;
            k /= side;
        }
        // by symmetry one representative per orbit suffices
        if c.iter().all(|&v| v == 0) || c.iter().any(|&v| v < 0) || c.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        let x = LatticePoint::new(c)?;
        let cap = capacity(green, &SiteSet::new(vec![o.clone(), x.clone()]))?;
        worst = worst.max((cap - 2.0 / (g0 + green.g_point(&x))).abs());
    }
    Ok(worst)
}

/// Residual table: entrance law on the given slab sizes, Green harmonicity,
/// and capacity closed forms. The single-site capacity is compared with
/// `1/g(0)` where `g(0)` is recomputed from its neighbours.
pub fn run_checks(green: &GreenEvaluator, slab_sizes: &[usize]) -> Result<Vec<Check>> {
    let tol = green.tol();
    let dim = green.d() + 1;
    let mut out = Vec::new();
    for &n in slab_sizes {
        out.push(Check::new(
            format!("entrance law residual, N={n}"),
            entrance_law_max_residual(n, green.d())?,
            1e-8,
        ));
    }
    let origin = vec![0i64; dim];
    out.push(Check::new("green harmonic defect at 0", harmonic_defect(green, &origin), 10.0 * tol));
    let mut off = vec![0i64; dim];
    off[0] = 1;
    off[1] = 1;
    out.push(Check::new("green harmonic defect at (1,1,..)", harmonic_defect(green, &off), 10.0 * tol));
    let neighbours: f64 = (0..dim).map(|a| green.g(&unit(dim, a, 1))).sum::<f64>() / dim as f64;
    let cap0 = capacity(green, &SiteSet::new(vec![LatticePoint::origin(dim)]))?;
    out.push(Check::new(
        "cap({0}) vs 1/(1 + mean g(e))",
        (cap0 - 1.0 / (1.0 + neighbours)).abs(),
        4.0 * tol,
    ));
    out.push(Check::new(
        "cap({0,x}) vs 2/(g(0)+g(x)), |x|inf <= 4",
        pair_capacity_defect(green, 4)?,
        4.0 * tol,
    ));
    Ok(out)
}
