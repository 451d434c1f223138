//! Poisson process of excursions on the cylinder and the observable
//! consequences of the walk/interlacement couplings.
//!
//! A sample at level `u` has `J ~ Poisson(u K_N)` independent excursions,
//! each a walk from `q` stopped on exiting `B~`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::lattice::{slab_geometry, Cylinder, CylinderPoint, SiteSet, SlabSpec};
use crate::rng::Streams;
use crate::srw::{kappa_excursion_visit, CoverOptions, CoverRunner, CoverTarget, StartLaw, StopRule};
use crate::stats::Proportion;

/// Trace of a Poisson process of excursions on `T_N x [-h_N, h_N]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoeSample {
    pub u: f64,
    /// Start and end (torus index, height) of each excursion.
    pub endpoints: Vec<((usize, i64), (usize, i64))>,
    h: i64,
    torus_size: usize,
    visited: Vec<bool>,
}

impl PpoeSample {
    pub fn count(&self) -> usize {
        self.endpoints.len()
    }

    pub fn contains(&self, torus: usize, height: i64) -> bool {
        height.abs() <= self.h && self.visited[(height + self.h) as usize * self.torus_size + torus]
    }

    pub fn trace(&self, cyl: &Cylinder) -> SiteSet<CylinderPoint> {
        self.visited
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| cyl.from_index(i % self.torus_size, (i / self.torus_size) as i64 - self.h))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct PpoeSampler {
    cyl: Cylinder,
    slab: SlabSpec,
}

impl PpoeSampler {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        Ok(PpoeSampler {
            cyl: Cylinder::new(n, d)?,
            slab: slab_geometry(n, d)?,
        })
    }

    pub fn slab(&self) -> &SlabSpec {
        &self.slab
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cyl
    }

    pub fn sample<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> PpoeSample {
        let h = self.slab.h;
        let ts = self.cyl.torus_size();
        let mut visited = vec![false; ts * (2 * h as usize + 1)];
        let mean = u * self.slab.k_n;
        let count = if mean > 0.0 {
            Poisson::new(mean).expect("positive mean").sample(rng) as usize
        } else {
            0
        };
        let mut endpoints = Vec::with_capacity(count);
        for _ in 0..count {
            let mut first = None;
            let mut last = (0, 0);
            kappa_excursion_visit(&self.cyl, &self.slab, &StartLaw::Q, rng, |t, z| {
                visited[(z + h) as usize * ts + t] = true;
                first.get_or_insert((t, z));
                last = (t, z);
            });
            endpoints.push((first.expect("excursion has a start"), last));
        }
        PpoeSample {
            u,
            endpoints,
            h,
            torus_size: ts,
            visited,
        }
    }
}

pub fn sample_ppoe<R: Rng + ?Sized>(n: usize, d: usize, u: f64, rng: &mut R) -> Result<PpoeSample> {
    Ok(PpoeSampler::new(n, d)?.sample(u, rng))
}

/// A replica where `D_[(1-δ)uK_N] < γ_{uN^d} <= D_[(1+δ)uK_N]` failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketFailure {
    pub replica: u64,
    /// Local time at `D_[(1-δ)uK_N]` and at `D_[(1+δ)uK_N]`.
    pub local_at_lower: u64,
    pub local_at_upper: u64,
    /// `u N^d`.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketingReport {
    pub u: f64,
    pub delta: f64,
    pub lower_index: usize,
    pub upper_index: usize,
    pub frequency: Proportion,
    pub failures: Vec<BracketFailure>,
}

/// Bracketing frequencies for several `δ` on shared walks.
pub fn bracketing(
    n: usize,
    d: usize,
    u: f64,
    deltas: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<BracketingReport>> {
    let slab = slab_geometry(n, d)?;
    let cyl = Cylinder::new(n, d)?;
    let uk = u * slab.k_n;
    if uk < 2.0 {
        return Err(Error::param("u", format!("need u K_N >= 2, got {uk}")));
    }
    if let Some(bad) = deltas.iter().find(|&&x| !(x > 0.0 && x < 0.5)) {
        return Err(Error::param("delta", format!("{bad} not in (0, 1/2)")));
    }
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let index = |x: f64| (x * uk).floor() as usize;
    let deepest = deltas.iter().map(|&x| index(1.0 + x)).max().unwrap_or(1);
    let target = u * cyl.torus_size() as f64;
    let runner = CoverRunner::new(cyl.clone(), slab, CoverTarget::zero_level(&cyl))?;
    let opts = CoverOptions {
        max_steps: u64::MAX,
        stop: StopRule::Departures(deepest),
        ..Default::default()
    };
    let locals = Streams::new(seed, "bracketing").map(replicas, |_, rng| {
        runner.run(&StartLaw::Level { z: 0 }, &opts, rng).excursions.local_at_departure
    });
    Ok(deltas
        .iter()
        .map(|&delta| {
            let (lo, hi) = (index(1.0 - delta), index(1.0 + delta));
            let mut failures = Vec::new();
            for (i, l) in locals.iter().enumerate() {
                let (a, b) = (l[lo - 1], l[hi - 1]);
                // gamma_t > D_lo iff L at D_lo < t; gamma_t <= D_hi iff L at D_hi >= t
                if !((a as f64) < target && (b as f64) >= target) {
                    failures.push(BracketFailure {
                        replica: i as u64,
                        local_at_lower: a,
                        local_at_upper: b,
                        target,
                    });
                }
            }
            let ok = (replicas - failures.len()) as u64;
            BracketingReport {
                u,
                delta,
                lower_index: lo,
                upper_index: hi,
                frequency: Proportion::wilson(ok, replicas as u64, 3.0),
                failures,
            }
        })
        .collect())
}

pub fn bracketing_event_freq(
    n: usize,
    d: usize,
    u: f64,
    delta: f64,
    replicas: usize,
    seed: u64,
) -> Result<BracketingReport> {
    Ok(bracketing(n, d, u, &[delta], replicas, seed)?.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichSite {
    pub site: CylinderPoint,
    pub walk_vacancy: Proportion,
    pub ppoe_vacancy: Proportion,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub u: f64,
    pub delta: f64,
    pub excursions: usize,
    /// `[exp(-u(1+δ)/g(0)), exp(-u(1-δ)/g(0))]`.
    pub band: (f64, f64),
    pub sites: Vec<SandwichSite>,
    /// Vacant sites of `A` per replica: (walk, excursion process).
    pub per_replica: Vec<(u32, u32)>,
    pub pass: bool,
}

/// One-site vacancies of the walk up to `D_[uK_N]` and of the excursion
/// process at level `u`, against the interlacement band at levels `u(1±δ)`.
#[allow(clippy::too_many_arguments)]
pub fn vacancy_sandwich(
    green: &GreenEvaluator,
    n: usize,
    d: usize,
    u: f64,
    delta: f64,
    sites: SiteSet<CylinderPoint>,
    replicas: usize,
    seed: u64,
) -> Result<SandwichReport> {
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let cyl = Cylinder::new(n, d)?;
    let slab = slab_geometry(n, d)?;
    let target = CoverTarget::new(&cyl, sites)?;
    let excursions = (u * slab.k_n).floor() as usize;
    let runner = CoverRunner::new(cyl.clone(), slab, target.clone())?;
    let opts = CoverOptions {
        max_steps: u64::MAX,
        stop: StopRule::Departures(excursions),
        ..Default::default()
    };
    let ppoe = PpoeSampler::new(n, d)?;
    let pts: Vec<(usize, i64)> = target
        .sites()
        .iter()
        .map(|p| (cyl.torus_index(p), p.height()))
        .collect();
    let per_replica = Streams::new(seed, "sandwich").map(replicas, |_, rng| {
        let walk: Vec<bool> = if excursions == 0 {
            vec![true; pts.len()]
        } else {
            let rec = runner.run(&StartLaw::Level { z: 0 }, &opts, rng);
            rec.first_hit_step.iter().map(|s| s.is_none()).collect()
        };
        let sample = ppoe.sample(u, rng);
        let pp: Vec<bool> = pts.iter().map(|&(t, z)| !sample.contains(t, z)).collect();
        (walk, pp)
    });
    let g0 = green.g0();
    let band = ((-u * (1.0 + delta) / g0).exp(), (-u * (1.0 - delta) / g0).exp());
    let site_reports: Vec<SandwichSite> = target
        .sites()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let wv = per_replica.iter().filter(|r| r.0[i]).count() as u64;
            let pv = per_replica.iter().filter(|r| r.1[i]).count() as u64;
            let walk_vacancy = Proportion::wilson(wv, replicas as u64, 3.0);
            let ppoe_vacancy = Proportion::wilson(pv, replicas as u64, 3.0);
            let slack = walk_vacancy.half_width();
            let pass = walk_vacancy.upper >= band.0 - slack && walk_vacancy.lower <= band.1 + slack;
            SandwichSite {
                site: p.clone(),
                walk_vacancy,
                ppoe_vacancy,
                pass,
            }
        })
        .collect();
    let pass = site_reports.iter().all(|s| s.pass);
    let count = |v: &[bool]| v.iter().filter(|x| **x).count() as u32;
    Ok(SandwichReport {
        per_replica: per_replica.iter().map(|(w, p)| (count(w), count(p))).collect(),
        u,
        delta,
        excursions,
        band,
        sites: site_reports,
        pass,
    })
}
