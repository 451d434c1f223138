//! Flat `key = value` run configuration and tolerance fixtures.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key            | type                         | default                      |
//! |----------------|------------------------------|------------------------------|
//! | `experiment`   | experiment name              | required (or `--experiment`) |
//! | `n`            | integer >= 3                 | required on the cylinder     |
//! | `d`            | integer >= 2                 | 2                            |
//! | `set`          | `zero-level`, `scattered`, `box`, `explicit` | per experiment |
//! | `set.k`        | integer                      | 64                           |
//! | `set.spacing`  | integer                      | 10                           |
//! | `set.side`     | integer                      | 3                            |
//! | `set.sites`    | `x,y,z; x,y,z; ...`          | required for `explicit`      |
//! | `z_grid`       | comma list                   | `-2,-1,0,1,2`                |
//! | `u`            | real                         | required for excursion runs  |
//! | `delta`        | comma list in (0, 1/2)       | `0.45`                       |
//! | `k`            | integer >= 2                 | 2                            |
//! | `replicas`     | integer >= 1                 | required                     |
//! | `seed`         | integer                      | required (or `--seed`)       |
//! | `epsilon`      | real                         | unset: exact engine          |
//! | `max_steps`    | integer                      | 1000000000                   |
//! | `green_tol`    | real in [1e-8, 1e-4]         | 1e-8                         |
//! | `tolerances`   | path                         | built-in fixture             |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Cylinder, CylinderPoint, LatticePoint, SiteSet, Space, ZLattice};
use crate::srw::DEFAULT_MAX_STEPS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GumbelCylinder,
    CoverTimeZeta,
    PointProcess,
    LastK,
    GumbelInterlacement,
    Bracketing,
    VacancySandwich,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::GumbelCylinder,
        Experiment::CoverTimeZeta,
        Experiment::PointProcess,
        Experiment::LastK,
        Experiment::GumbelInterlacement,
        Experiment::Bracketing,
        Experiment::VacancySandwich,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GumbelCylinder => "gumbel-cylinder",
            Experiment::CoverTimeZeta => "cover-time-zeta",
            Experiment::PointProcess => "point-process",
            Experiment::LastK => "last-k",
            Experiment::GumbelInterlacement => "gumbel-interlacement",
            Experiment::Bracketing => "bracketing",
            Experiment::VacancySandwich => "vacancy-sandwich",
        }
    }

    fn on_cylinder(self) -> bool {
        self != Experiment::GumbelInterlacement
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::config("experiment", format!("unknown experiment `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// Named site-set shapes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum SetShape {
    /// `T_N^d x {0}`.
    ZeroLevel,
    /// `k` sites on a cubic grid with the given spacing.
    Scattered { k: usize, spacing: i64 },
    /// `[0, side)^{d+1}`, shifted to be centred in height on the cylinder.
    Box { side: i64 },
    Explicit { sites: Vec<Vec<i64>> },
}

impl SetShape {
    /// Grid points `spacing * (i_0, .., i_{dim-1})`, first `k` in lexicographic order.
    fn grid(k: usize, spacing: i64, dim: usize) -> Vec<Vec<i64>> {
        let mut m = 1usize;
        while m.pow(dim as u32) < k {
            m += 1;
        }
        (0..k)
            .map(|mut i| {
                let mut c = vec![0i64; dim];
                for slot in c.iter_mut().rev() {
                    *slot = (i % m) as i64 * spacing;
                    i /= m;
                }
                c
            })
            .collect()
    }

    fn boxed(side: i64, dim: usize) -> Vec<Vec<i64>> {
        Self::grid((side as usize).pow(dim as u32), 1, dim)
    }

    pub fn lattice_sites(&self, d: usize) -> Result<SiteSet<LatticePoint>> {
        let z = ZLattice::new(d)?;
        let coords = match self {
            SetShape::ZeroLevel => {
                return Err(Error::config("set", "zero-level is only defined on the cylinder"));
            }
            SetShape::Scattered { k, spacing } => Self::grid(*k, *spacing, d + 1),
            SetShape::Box { side } => Self::boxed(*side, d + 1),
            SetShape::Explicit { sites } => sites.clone(),
        };
        coords
            .iter()
            .map(|c| z.point(c).map_err(|e| Error::config("set.sites", e.to_string())))
            .collect()
    }

    pub fn cylinder_sites(&self, cyl: &Cylinder) -> Result<SiteSet<CylinderPoint>> {
        let d = cyl.d();
        let n = cyl.n() as i64;
        let coords = match self {
            SetShape::ZeroLevel => return Ok(SiteSet::new(cyl.level(0))),
            SetShape::Scattered { k, spacing } => {
                // spread over the zero level
                let mut v = Self::grid(*k, *spacing, d);
                if v.iter().flatten().any(|&c| c >= n) {
                    return Err(Error::config("set.k", format!("{k} sites at spacing {spacing} do not fit in T_{n}")));
                }
                v.iter_mut().for_each(|c| c.push(0));
                v
            }
            SetShape::Box { side } => {
                let mut v = Self::boxed(*side, d + 1);
                v.iter_mut().for_each(|c| c[d] -= side / 2);
                v
            }
            SetShape::Explicit { sites } => sites.clone(),
        };
        coords
            .iter()
            .map(|c| {
                if c.len() != d + 1 {
                    return Err(Error::config("set.sites", format!("{c:?} needs {} coordinates", d + 1)));
                }
                cyl.point(&c[..d], c[d]).map_err(|e| Error::config("set.sites", e.to_string()))
            })
            .collect()
    }
}

impl fmt::Display for SetShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetShape::ZeroLevel => write!(f, "zero-level"),
            SetShape::Scattered { k, spacing } => write!(f, "scattered(k={k}, spacing={spacing})"),
            SetShape::Box { side } => write!(f, "box(side={side})"),
            SetShape::Explicit { sites } => write!(f, "explicit({} sites)", sites.len()),
        }
    }
}

/// Raw `key = value` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")))?;
            let key = k.trim().to_string();
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(key, "given more than once"));
            }
        }
        Ok(KeyValues(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::config(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Error::config(key, format!("`{s}`: {e}"))))
                    .collect()
            })
            .transpose()
    }
}

/// Versioned desk-scale tolerances, keyed `experiment.name`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances(BTreeMap<String, f64>);

pub const DEFAULT_TOLERANCES: &str = include_str!("../fixtures/tolerances.cfg");

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::parse(DEFAULT_TOLERANCES).expect("built-in fixture parses")
    }
}

impl Tolerances {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let mut map = BTreeMap::new();
        for key in kv.keys() {
            map.insert(key.to_string(), kv.typed::<f64>(key)?.expect("key present"));
        }
        Ok(Tolerances(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.0
            .get(key)
            .copied()
            .ok_or_else(|| Error::config("tolerances", format!("fixture has no `{key}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: Option<usize>,
    pub d: usize,
    pub set: SetShape,
    pub z_grid: Vec<f64>,
    pub u: Option<f64>,
    pub deltas: Vec<f64>,
    pub k: usize,
    pub replicas: usize,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub max_steps: u64,
    pub green_tol: f64,
    pub tolerances: Option<PathBuf>,
}

const KNOWN_KEYS: [&str; 18] = [
    "experiment",
    "n",
    "d",
    "set",
    "set.k",
    "set.spacing",
    "set.side",
    "set.sites",
    "z_grid",
    "u",
    "delta",
    "k",
    "replicas",
    "seed",
    "epsilon",
    "max_steps",
    "green_tol",
    "tolerances",
];

impl RunConfig {
    /// Parses and validates; `kv` already carries any command-line overrides.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        if let Some(bad) = kv.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(Error::config(bad, "unknown key"));
        }
        let experiment: Experiment = kv
            .get("experiment")
            .ok_or_else(|| Error::config("experiment", "missing"))?
            .parse()?;
        let replicas: usize = kv.typed("replicas")?.ok_or_else(|| Error::config("replicas", "missing"))?;
        if replicas == 0 {
            return Err(Error::config("replicas", "must be at least 1"));
        }
        let seed: u64 = kv.typed("seed")?.ok_or_else(|| Error::config("seed", "missing"))?;
        let d: usize = kv.typed("d")?.unwrap_or(2);
        if d < 2 {
            return Err(Error::config("d", format!("need d >= 2, got {d}")));
        }
        let n: Option<usize> = kv.typed("n")?;
        if experiment.on_cylinder() {
            match n {
                None => return Err(Error::config("n", "missing")),
                Some(n) if n < 3 => return Err(Error::config("n", format!("need N >= 3, got {n}"))),
                _ => {}
            }
        }
        let set = Self::parse_set(kv, experiment)?;
        let z_grid = kv.list("z_grid")?.unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        if z_grid.is_empty() || z_grid.iter().any(|z| !z.is_finite()) {
            return Err(Error::config("z_grid", "needs finite values"));
        }
        let u: Option<f64> = kv.typed("u")?;
        if let Some(u) = u {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(Error::config("u", format!("need u >= 0, got {u}")));
            }
        }
        if matches!(experiment, Experiment::Bracketing | Experiment::VacancySandwich) && u.is_none() {
            return Err(Error::config("u", "missing"));
        }
        let deltas = kv.list("delta")?.unwrap_or_else(|| vec![0.45]);
        if deltas.is_empty() || deltas.iter().any(|x| !(*x > 0.0 && *x < 0.5)) {
            return Err(Error::config("delta", "values must lie in (0, 1/2)"));
        }
        let k: usize = kv.typed("k")?.unwrap_or(2);
        if k < 2 {
            return Err(Error::config("k", "need k >= 2"));
        }
        let epsilon: Option<f64> = kv.typed("epsilon")?;
        if let Some(e) = epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::config("epsilon", format!("need 0 < epsilon < 1, got {e}")));
            }
        }
        let max_steps: u64 = kv.typed("max_steps")?.unwrap_or(DEFAULT_MAX_STEPS);
        let green_tol: f64 = kv.typed("green_tol")?.unwrap_or(1e-8);
        if !(1e-8..=1e-4).contains(&green_tol) {
            return Err(Error::config("green_tol", format!("{green_tol} outside [1e-8, 1e-4]")));
        }
        let cfg = RunConfig {
            experiment,
            n,
            d,
            set,
            z_grid,
            u,
            deltas,
            k,
            replicas,
            seed,
            epsilon,
            max_steps,
            green_tol,
            tolerances: kv.get("tolerances").map(PathBuf::from),
        };
        cfg.check_set()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    fn parse_set(kv: &KeyValues, experiment: Experiment) -> Result<SetShape> {
        let default = match experiment {
            Experiment::GumbelInterlacement => "scattered",
            Experiment::VacancySandwich => "box",
            _ => "zero-level",
        };
        let shape = match kv.get("set").unwrap_or(default) {
            "zero-level" => SetShape::ZeroLevel,
            "scattered" => SetShape::Scattered {
                k: kv.typed("set.k")?.unwrap_or(64),
                spacing: kv.typed("set.spacing")?.unwrap_or(10),
            },
            "box" => SetShape::Box {
                side: kv.typed("set.side")?.unwrap_or(3),
            },
            "explicit" => {
                let text = kv.get("set.sites").ok_or_else(|| Error::config("set.sites", "missing"))?;
                let sites = text
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.split(',')
                            .map(|c| c.trim().parse::<i64>().map_err(|e| Error::config("set.sites", format!("`{c}`: {e}"))))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                SetShape::Explicit { sites }
            }
            other => return Err(Error::config("set", format!("unknown shape `{other}`"))),
        };
        match &shape {
            SetShape::Scattered { k, spacing } if *k == 0 || *spacing < 1 => {
                Err(Error::config("set.k", "need k >= 1 and spacing >= 1"))
            }
            SetShape::Box { side } if *side < 1 => Err(Error::config("set.side", "need side >= 1")),
            _ => Ok(shape),
        }
    }

    /// Checks the site set against the experiment's preconditions.
    fn check_set(&self) -> Result<()> {
        let len = match self.experiment {
            Experiment::GumbelInterlacement => self.set.lattice_sites(self.d)?.len(),
            _ => {
                let cyl = Cylinder::new(self.n.expect("checked"), self.d).map_err(|e| Error::config("n", e.to_string()))?;
                let sites = self.set.cylinder_sites(&cyl)?;
                crate::srw::CoverTarget::new(&cyl, sites.clone()).map_err(|e| Error::config("set", e.to_string()))?;
                if matches!(self.experiment, Experiment::PointProcess | Experiment::LastK) && self.set != SetShape::ZeroLevel {
                    return Err(Error::config("set", "this experiment runs on the zero level"));
                }
                sites.len()
            }
        };
        let min = match self.experiment {
            Experiment::GumbelCylinder | Experiment::VacancySandwich => 1,
            Experiment::LastK => self.k,
            _ => 2,
        };
        if len < min {
            return Err(Error::config("set", format!("needs at least {min} sites, got {len}")));
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        match &self.tolerances {
            Some(p) => Tolerances::load(p).map_err(|e| Error::config("tolerances", e.to_string())),
            None => Ok(Tolerances::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_replicas_names_the_key() {
        let err = RunConfig::parse("experiment = gumbel-cylinder\nn = 4\nseed = 1\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "replicas"), "{err}");
    }

    #[test]
    fn unknown_key_and_bad_value_are_named() {
        let base = "experiment = last-k\nn = 4\nseed = 1\nreplicas = 3\n";
        let err = RunConfig::parse(&format!("{base}colour = red\n")).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "colour"));
        let err = RunConfig::parse(&format!("{base}k = two\n")).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "k"));
        let err = RunConfig::parse(&format!("{base}delta = 0.7\n")).unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "delta"));
    }

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::parse("# comment\nexperiment = gumbel-interlacement\nreplicas = 10\nseed = 7\n").unwrap();
        assert_eq!(c.set, SetShape::Scattered { k: 64, spacing: 10 });
        assert_eq!(c.z_grid, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(c.d, 2);
        assert_eq!(c.set.lattice_sites(2).unwrap().len(), 64);
    }

    #[test]
    fn explicit_sites_parse() {
        let c = RunConfig::parse(
            "experiment = gumbel-interlacement\nreplicas = 1\nseed = 0\nset = explicit\nset.sites = 0,0,0; 1,0,0; 0,2,0\n",
        )
        .unwrap();
        assert_eq!(c.set.lattice_sites(2).unwrap().len(), 3);
    }

    #[test]
    fn shapes_on_the_cylinder() {
        let cyl = Cylinder::new(6, 2).unwrap();
        assert_eq!(SetShape::ZeroLevel.cylinder_sites(&cyl).unwrap().len(), 36);
        let b = SetShape::Box { side: 3 }.cylinder_sites(&cyl).unwrap();
        assert_eq!(b.len(), 27);
        assert!(b.iter().all(|p| p.height().abs() <= 1));
        assert!(SetShape::Scattered { k: 9, spacing: 3 }.cylinder_sites(&cyl).is_err());
        assert_eq!(SetShape::Scattered { k: 4, spacing: 3 }.cylinder_sites(&cyl).unwrap().len(), 4);
    }

    #[test]
    fn fixture_has_every_tolerance() {
        let t = Tolerances::default();
        assert_eq!(t.get("gumbel_cylinder.ks_max").unwrap(), 0.15);
        assert!(t.get("nope").is_err());
    }
}
