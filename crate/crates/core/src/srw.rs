//! Simple random walk on the cylinder `T_N^d x Z` and on `Z^{d+1}`.
//!
//! One step draws `k` uniformly from `0..2(d+1)`. Even `k` moves along
//! `+e_{k/2}`, odd `k` along `-e_{k/2}`; axis `d` is the height. This mapping
//! is part of the reproducibility contract: the same seed gives the same path.
//!
//! Cover runs track only counters, first-hit times and excursion indices.
//! While the walk is outside `B~` it cannot touch the zero level or any target
//! site, so by default that stretch is replaced by an exact draw of its
//! duration and torus displacement (see [`crate::passage`]).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Cylinder, CylinderPoint, SiteSet, SlabSpec, Space};
use crate::passage::{negative_binomial, torus_displacement, PassageSampler};

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000_000;

/// Starting distribution of a cylinder walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartLaw {
    /// `q_z`: height `z`, torus coordinate uniform.
    Level { z: i64 },
    /// `q`: uniform on `T_N^d x {-r_N, r_N}`.
    Q,
    Point { point: CylinderPoint },
}

impl StartLaw {
    /// Draws a start as (torus index, height).
    pub fn sample<R: Rng + ?Sized>(&self, cyl: &Cylinder, slab: &SlabSpec, rng: &mut R) -> (usize, i64) {
        match self {
            StartLaw::Level { z } => (rng.random_range(0..cyl.torus_size()), *z),
            StartLaw::Q => {
                let t = rng.random_range(0..2 * cyl.torus_size());
                let h = if t < cyl.torus_size() { -slab.r } else { slab.r };
                (t % cyl.torus_size(), h)
            }
            StartLaw::Point { point } => (cyl.torus_index(point), point.height()),
        }
    }
}

/// Walk on the cylinder in packed form.
#[derive(Clone, Debug)]
pub struct CylinderWalk<'a> {
    cyl: &'a Cylinder,
    torus_dirs: usize,
    pub torus: usize,
    pub height: i64,
    pub step: u64,
}

impl<'a> CylinderWalk<'a> {
    pub fn new(cyl: &'a Cylinder, torus: usize, height: i64) -> Self {
        CylinderWalk {
            cyl,
            torus_dirs: 2 * cyl.d(),
            torus,
            height,
            step: 0,
        }
    }

    pub fn position(&self) -> CylinderPoint {
        self.cyl.from_index(self.torus, self.height)
    }

    #[inline]
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let k = rng.random_range(0..self.torus_dirs + 2);
        if k < self.torus_dirs {
            self.torus = self.cyl.torus_neighbor(self.torus, k);
        } else if k == self.torus_dirs {
            self.height += 1;
        } else {
            self.height -= 1;
        }
        self.step += 1;
    }
}

/// Walk on `Z^{d+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeWalk {
    pub pos: Vec<i64>,
    pub step: u64,
}

impl LatticeWalk {
    pub fn new(start: &[i64]) -> Self {
        LatticeWalk {
            pos: start.to_vec(),
            step: 0,
        }
    }

    #[inline]
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let k = rng.random_range(0..2 * self.pos.len());
        self.pos[k / 2] += if k % 2 == 0 { 1 } else { -1 };
        self.step += 1;
    }
}

/// Return times `R_k` to `B` and departure times `D_k` from `B~`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    pub returns: Vec<u64>,
    pub departures: Vec<u64>,
    /// Local time at the zero level at each `D_k`.
    pub local_at_departure: Vec<u64>,
}

impl ExcursionRecord {
    /// `R_1 <= D_1 < R_2 <= D_2 < ...`
    pub fn is_interleaved(&self) -> bool {
        let n = self.departures.len();
        if self.returns.len() < n || self.returns.len() > n + 1 {
            return false;
        }
        (0..self.returns.len()).all(|k| {
            let ok_d = k >= n || self.returns[k] <= self.departures[k];
            let ok_r = k == 0 || self.departures[k - 1] < self.returns[k];
            ok_d && ok_r
        })
    }

    /// `D_k` for 1-based `k`.
    pub fn departure(&self, k: usize) -> Option<u64> {
        k.checked_sub(1).and_then(|i| self.departures.get(i).copied())
    }
}

/// Online detection of `R_k` and `D_k`.
#[derive(Clone, Debug)]
pub struct ExcursionTracker {
    r: i64,
    h: i64,
    inside: bool,
    record: ExcursionRecord,
}

impl ExcursionTracker {
    pub fn new(slab: &SlabSpec) -> Self {
        ExcursionTracker {
            r: slab.r,
            h: slab.h,
            inside: false,
            record: ExcursionRecord::default(),
        }
    }

    /// Feeds the position at `step`; returns true if `step` is a departure.
    #[inline]
    pub fn observe(&mut self, step: u64, height: i64, local: u64) -> bool {
        let a = height.abs();
        if self.inside {
            if a >= self.h {
                self.inside = false;
                self.record.departures.push(step);
                self.record.local_at_departure.push(local);
                return true;
            }
        } else if a <= self.r {
            self.inside = true;
            self.record.returns.push(step);
        }
        false
    }

    /// Between some `R_k` and the following `D_k`.
    pub fn inside(&self) -> bool {
        self.inside
    }

    pub fn record(&self) -> &ExcursionRecord {
        &self.record
    }

    pub fn into_record(self) -> ExcursionRecord {
        self.record
    }
}

/// Zero-level local time `L_n = #{i <= n : X_i in T_N x {0}}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalTimeTracker {
    /// Step indices of the zero-level visits, in order.
    visits: Vec<u64>,
}

impl LocalTimeTracker {
    #[inline]
    pub fn observe(&mut self, step: u64, height: i64) {
        if height == 0 {
            self.visits.push(step);
        }
    }

    pub fn value(&self) -> u64 {
        self.visits.len() as u64
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }
}

/// `gamma_u = min{n : L_n >= u}`, or `None` if the run stopped before `L` reached `u`.
pub fn gamma_time(tracker: &LocalTimeTracker, u: f64) -> Option<u64> {
    if u <= 0.0 {
        return Some(0);
    }
    let k = u.ceil() as usize;
    tracker.visits.get(k - 1).copied()
}

/// When a cover run stops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum StopRule {
    /// At `C_F`.
    Cover,
    /// At `gamma_u` for the given integer `u`.
    LocalTime(u64),
    /// At `D_k`.
    Departures(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverOptions {
    pub max_steps: u64,
    /// Keep the full path; disables the outer skip.
    pub retain_path: bool,
    pub outer_skip: bool,
    pub stop: StopRule,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            max_steps: DEFAULT_MAX_STEPS,
            retain_path: false,
            outer_skip: true,
            stop: StopRule::Cover,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverRunRecord {
    /// `C_F`, if `F` was covered before the run stopped.
    pub cover_time: Option<u64>,
    pub local_time_at_cover: Option<u64>,
    pub end_step: u64,
    pub local_time: LocalTimeTracker,
    /// Indexed like the target set.
    pub first_hit_step: Vec<Option<u64>>,
    pub first_hit_local: Vec<Option<u64>>,
    /// Target indices in order of first hit.
    pub hit_order: Vec<usize>,
    pub excursions: ExcursionRecord,
    /// The step guard fired before the stop rule was met.
    pub censored: bool,
    pub path: Option<Vec<CylinderPoint>>,
}

impl CoverRunRecord {
    pub fn end_local_time(&self) -> u64 {
        self.local_time.value()
    }

    pub fn gamma(&self, u: f64) -> Option<u64> {
        gamma_time(&self.local_time, u)
    }
}

/// A target set `F` with a dense lookup over `T_N x [-N/2, N/2]`.
#[derive(Clone, Debug)]
pub struct CoverTarget {
    sites: SiteSet<CylinderPoint>,
    half: i64,
    torus_size: usize,
    table: Vec<u32>,
}

const NO_SITE: u32 = u32::MAX;

impl CoverTarget {
    pub fn new(cyl: &Cylinder, sites: SiteSet<CylinderPoint>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::EmptySet);
        }
        let half = (cyl.n() / 2) as i64;
        let torus_size = cyl.torus_size();
        let mut table = vec![NO_SITE; torus_size * (2 * half as usize + 1)];
        for (i, p) in sites.iter().enumerate() {
            cyl.validate(p)?;
            if p.height().abs() > half {
                return Err(Error::NotContained(format!(
                    "{p:?} lies outside T_N x [-N/2, N/2]"
                )));
            }
            table[(p.height() + half) as usize * torus_size + cyl.torus_index(p)] = i as u32;
        }
        Ok(CoverTarget {
            sites,
            half,
            torus_size,
            table,
        })
    }

    pub fn zero_level(cyl: &Cylinder) -> Self {
        Self::new(cyl, SiteSet::new(cyl.level(0))).expect("zero level is a valid target")
    }

    pub fn sites(&self) -> &SiteSet<CylinderPoint> {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    fn lookup(&self, torus: usize, height: i64) -> Option<usize> {
        if height.abs() > self.half {
            return None;
        }
        let v = self.table[(height + self.half) as usize * self.torus_size + torus];
        (v != NO_SITE).then_some(v as usize)
    }
}

/// Cover-run engine for one cylinder and target; shareable across threads.
#[derive(Clone, Debug)]
pub struct CoverRunner {
    cyl: Cylinder,
    slab: SlabSpec,
    target: CoverTarget,
    passage: PassageSampler,
}

struct RunState {
    local: LocalTimeTracker,
    exc: ExcursionTracker,
    first_hit_step: Vec<Option<u64>>,
    first_hit_local: Vec<Option<u64>>,
    hit_order: Vec<usize>,
    cover_time: Option<u64>,
    local_at_cover: Option<u64>,
    path: Option<Vec<CylinderPoint>>,
}

impl CoverRunner {
    pub fn new(cyl: Cylinder, slab: SlabSpec, target: CoverTarget) -> Result<Self> {
        if slab.n != cyl.n() || slab.d != cyl.d() {
            return Err(Error::param("slab", "slab and cylinder disagree on N or d"));
        }
        Ok(CoverRunner {
            cyl,
            slab,
            target,
            passage: PassageSampler::new(),
        })
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cyl
    }

    pub fn slab(&self) -> &SlabSpec {
        &self.slab
    }

    pub fn target(&self) -> &CoverTarget {
        &self.target
    }

    #[inline]
    fn observe(&self, st: &mut RunState, step: u64, torus: usize, height: i64) {
        st.local.observe(step, height);
        if let Some(i) = self.target.lookup(torus, height) {
            if st.first_hit_step[i].is_none() {
                st.first_hit_step[i] = Some(step);
                st.first_hit_local[i] = Some(st.local.value());
                st.hit_order.push(i);
                if st.hit_order.len() == self.target.len() {
                    st.cover_time = Some(step);
                    st.local_at_cover = Some(st.local.value());
                }
            }
        }
        st.exc.observe(step, height, st.local.value());
        if let Some(p) = st.path.as_mut() {
            p.push(self.cyl.from_index(torus, height));
        }
    }

    fn done(&self, st: &RunState, stop: StopRule) -> bool {
        match stop {
            StopRule::Cover => st.cover_time.is_some(),
            StopRule::LocalTime(u) => st.local.value() >= u,
            StopRule::Departures(k) => st.exc.record().departures.len() >= k,
        }
    }

    /// Moves a walk at `|height| >= h_N` to its first entrance into `B`.
    /// Returns false if that entrance lies beyond `max_steps`.
    fn skip_outside<R: Rng + ?Sized>(&self, w: &mut CylinderWalk<'_>, max_steps: u64, rng: &mut R) -> bool {
        let m = (w.height.abs() - self.slab.r) as u64;
        let budget = max_steps - w.step;
        let Some(vertical) = self.passage.levels(rng, m, budget) else {
            return false;
        };
        let d = self.cyl.d();
        let flat = negative_binomial(rng, vertical, 1.0 / (d as f64 + 1.0));
        let total = vertical.saturating_add(flat);
        if total > budget {
            return false;
        }
        let shift = torus_displacement(rng, flat, d);
        let here = self.cyl.from_index(w.torus, 0);
        let moved: Vec<i64> = here.torus().iter().zip(&shift).map(|(a, b)| a + b).collect();
        w.torus = self.cyl.torus_index(&self.cyl.point_wrapped(&moved, 0));
        w.height = w.height.signum() * self.slab.r;
        w.step += total;
        true
    }

    pub fn run<R: Rng + ?Sized>(&self, start: &StartLaw, opts: &CoverOptions, rng: &mut R) -> CoverRunRecord {
        let (torus, height) = start.sample(&self.cyl, &self.slab, rng);
        let mut w = CylinderWalk::new(&self.cyl, torus, height);
        let f = self.target.len();
        let mut st = RunState {
            local: LocalTimeTracker::default(),
            exc: ExcursionTracker::new(&self.slab),
            first_hit_step: vec![None; f],
            first_hit_local: vec![None; f],
            hit_order: Vec::with_capacity(f),
            cover_time: None,
            local_at_cover: None,
            path: opts.retain_path.then(Vec::new),
        };
        let skip = opts.outer_skip && !opts.retain_path;
        self.observe(&mut st, 0, w.torus, w.height);
        let mut censored = false;
        while !self.done(&st, opts.stop) {
            if skip && !st.exc.inside() && w.height.abs() >= self.slab.h {
                if !self.skip_outside(&mut w, opts.max_steps, rng) {
                    censored = true;
                    break;
                }
            } else {
                if w.step >= opts.max_steps {
                    censored = true;
                    break;
                }
                w.advance(rng);
            }
            self.observe(&mut st, w.step, w.torus, w.height);
        }
        CoverRunRecord {
            cover_time: st.cover_time,
            local_time_at_cover: st.local_at_cover,
            end_step: w.step,
            local_time: st.local,
            first_hit_step: st.first_hit_step,
            first_hit_local: st.first_hit_local,
            hit_order: st.hit_order,
            excursions: st.exc.into_record(),
            censored,
            path: st.path,
        }
    }
}

/// Runs a walk from `start` until `F` is covered; see [`CoverRunner::run`].
pub fn run_cover<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    sites: SiteSet<CylinderPoint>,
    start: &StartLaw,
    opts: &CoverOptions,
    rng: &mut R,
) -> Result<CoverRunRecord> {
    let cyl = Cylinder::new(n, d)?;
    let slab = crate::lattice::slab_geometry(n, d)?;
    let target = CoverTarget::new(&cyl, sites)?;
    Ok(CoverRunner::new(cyl, slab, target)?.run(start, opts, rng))
}

/// Walks from `start` until the exit time of `B~`, calling `visit` on every
/// position including the first and the last.
pub fn kappa_excursion_visit<R: Rng + ?Sized>(
    cyl: &Cylinder,
    slab: &SlabSpec,
    start: &StartLaw,
    rng: &mut R,
    mut visit: impl FnMut(usize, i64),
) -> u64 {
    let (torus, height) = start.sample(cyl, slab, rng);
    let mut w = CylinderWalk::new(cyl, torus, height);
    visit(w.torus, w.height);
    while w.height.abs() < slab.h {
        w.advance(rng);
        visit(w.torus, w.height);
    }
    w.step
}

/// A path from `kappa_e`: the walk from `e` stopped at its exit from `B~`.
pub fn sample_kappa_excursion<R: Rng + ?Sized>(
    cyl: &Cylinder,
    slab: &SlabSpec,
    start: &StartLaw,
    rng: &mut R,
) -> Vec<CylinderPoint> {
    let mut path = Vec::new();
    kappa_excursion_visit(cyl, slab, start, rng, |t, h| path.push(cyl.from_index(t, h)));
    path
}
