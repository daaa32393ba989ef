//! Run configuration, parsed from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ambient::{AmbientSpace, SpaceDescriptor, SpaceKind};
use crate::bounds::Tolerances;
use crate::families::SurfaceSpec;
use crate::spectrum::{ShiftPolicy, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constructor {
    RoundSphere,
    CliffordTorus,
    HopfTorus,
    SliceSphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceBlock {
    pub constructor: Constructor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Non-CMC perturbation amplitude, for solver stress tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Grid size for tori, icosphere level for spheres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u32>,
    /// Refinement ladder used by `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<u32>>,
}

impl SurfaceBlock {
    pub fn spec(&self) -> Result<SurfaceSpec, ConfigError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| ConfigError::new(format!("surface.{key}"), "missing parameter for this constructor"))
        };
        let base = match self.constructor {
            Constructor::RoundSphere => SurfaceSpec::RoundSphere {
                radius: need(self.radius, "radius")?,
            },
            Constructor::CliffordTorus => SurfaceSpec::CliffordTorus { h: need(self.h, "h")? },
            Constructor::HopfTorus => SurfaceSpec::HopfTorus {
                c_gamma: need(self.c_gamma, "c_gamma")?,
            },
            Constructor::SliceSphere => SurfaceSpec::SliceSphere { t: self.t.unwrap_or(0.0) },
        };
        Ok(match self.amplitude {
            Some(a) if a != 0.0 => SurfaceSpec::Perturbed {
                base: Box::new(base),
                amplitude: a,
            },
            _ => base,
        })
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.constructor, Constructor::RoundSphere | Constructor::SliceSphere)
    }

    pub fn resolution(&self) -> u32 {
        self.resolution.unwrap_or(if self.is_sphere() { 4 } else { 96 })
    }

    pub fn ladder(&self) -> Vec<u32> {
        self.ladder.clone().unwrap_or_else(|| vec![self.resolution()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub shift_policy: ShiftPolicy,
    pub seed: u64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            k: d.k,
            tol: d.tol,
            max_iter: d.max_iter,
            shift_policy: d.shift,
            seed: d.seed,
        }
    }
}

impl SolverBlock {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            k: self.k,
            tol: self.tol,
            max_iter: self.max_iter,
            shift: self.shift_policy,
            seed: self.seed,
            require_positive_rho: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// One case per closed-form family, with a refinement ladder.
    Default,
    /// The full family grid at a single resolution.
    Grid,
    /// Only the surface given in the config.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    pub tol_eq: f64,
    pub tol_verify: f64,
    pub tol_stability: f64,
    pub tol_cmc: f64,
    pub suite: Suite,
    /// Restricts the suite to these case names when non-empty.
    pub cases: Vec<String>,
    pub torus_ladder: Vec<u32>,
    pub sphere_ladder: Vec<u32>,
    pub min_order: f64,
    /// Test hook: added to the Jacobi potential before solving.
    pub potential_offset: f64,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            tol_eq: t.tol_eq,
            tol_verify: t.tol_verify,
            tol_stability: t.tol_stability,
            tol_cmc: t.tol_cmc,
            suite: Suite::Default,
            cases: Vec::new(),
            torus_ladder: vec![24, 48, 96],
            sphere_ladder: vec![2, 3, 4],
            min_order: 1.7,
            potential_offset: 0.0,
        }
    }
}

impl VerifyBlock {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            tol_eq: self.tol_eq,
            tol_verify: self.tol_verify,
            tol_stability: self.tol_stability,
            tol_cmc: self.tol_cmc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("cmc-out"),
            formats: vec![Format::Json, Format::Csv, Format::Off],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.from],
            n => (0..n)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Parameter ranges swept over the `[space]` and `[surface]` blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_gamma: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Range>,
    #[serde(default = "default_max_jobs")]
    pub max_jobs: usize,
}

fn default_max_jobs() -> usize {
    256
}

/// Parameter names accepted by sweeps, in cartesian-product order.
pub const SWEEP_KEYS: [&str; 7] = ["kappa", "tau", "c", "h", "c_gamma", "radius", "t"];

impl SweepBlock {
    fn range(&self, key: &str) -> Option<&Range> {
        match key {
            "kappa" => self.kappa.as_ref(),
            "tau" => self.tau.as_ref(),
            "c" => self.c.as_ref(),
            "h" => self.h.as_ref(),
            "c_gamma" => self.c_gamma.as_ref(),
            "radius" => self.radius.as_ref(),
            "t" => self.t.as_ref(),
            _ => None,
        }
    }

    /// Cartesian product of all ranges, last key varying fastest.
    pub fn jobs(&self) -> Result<Vec<Vec<(&'static str, f64)>>, ConfigError> {
        let mut jobs: Vec<Vec<(&'static str, f64)>> = vec![Vec::new()];
        let mut any = false;
        for key in SWEEP_KEYS {
            let Some(r) = self.range(key) else { continue };
            any = true;
            let vals = r.values();
            if vals.is_empty() || !(r.from.is_finite() && r.to.is_finite()) {
                return Err(ConfigError::new(format!("sweep.{key}"), "empty or non-finite range"));
            }
            jobs = jobs
                .into_iter()
                .flat_map(|j| {
                    vals.iter().map(move |v| {
                        let mut j = j.clone();
                        j.push((key, *v));
                        j
                    })
                })
                .collect();
            if jobs.len() > self.max_jobs {
                return Err(ConfigError::new(
                    "sweep.max_jobs",
                    format!("more than {} jobs requested", self.max_jobs),
                ));
            }
        }
        if !any {
            return Err(ConfigError::new("sweep", "no parameter ranges given"));
        }
        Ok(jobs)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::de::Deserializer::parse(text).map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.solver.k == 0 {
            return Err(ConfigError::new("solver.k", "must be at least 1"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(ConfigError::new("solver.tol", "must be positive"));
        }
        if self.solver.max_iter == 0 {
            return Err(ConfigError::new("solver.max_iter", "must be positive"));
        }
        let v = &self.verify;
        for (key, val) in [
            ("tol_eq", v.tol_eq),
            ("tol_verify", v.tol_verify),
            ("tol_stability", v.tol_stability),
            ("tol_cmc", v.tol_cmc),
        ] {
            if !(val > 0.0) {
                return Err(ConfigError::new(format!("verify.{key}"), "must be positive"));
            }
        }
        if v.torus_ladder.iter().any(|n| *n < 8) {
            return Err(ConfigError::new("verify.torus_ladder", "grid sizes must be at least 8"));
        }
        if v.sphere_ladder.iter().any(|n| *n > 7) {
            return Err(ConfigError::new("verify.sphere_ladder", "subdivision levels above 7 are not supported"));
        }
        if let Some(s) = &self.surface {
            let bad = |r: u32| if s.is_sphere() { r > 7 } else { r < 8 };
            if s.resolution.is_some_and(bad) {
                return Err(ConfigError::new("surface.resolution", "resolution out of range"));
            }
            if s.ladder.as_ref().is_some_and(|l| l.is_empty() || l.iter().any(|r| bad(*r))) {
                return Err(ConfigError::new("surface.ladder", "ladder empty or out of range"));
            }
        }
        if let (Some(d), Some(s)) = (&self.space, &self.surface) {
            let space = AmbientSpace::new(d.clone()).map_err(|e| ConfigError::new("space", e.to_string()))?;
            check_compatible(&space, s)?;
            s.spec()?;
        } else if let Some(d) = &self.space {
            AmbientSpace::new(d.clone()).map_err(|e| ConfigError::new("space", e.to_string()))?;
        }
        if let Some(sw) = &self.sweep {
            sw.jobs()?;
            if self.space.is_none() || self.surface.is_none() {
                return Err(ConfigError::new("sweep", "a sweep needs [space] and [surface] blocks"));
            }
        }
        Ok(())
    }

    /// The validated space and surface pair.
    pub fn single(&self) -> Result<(AmbientSpace, SurfaceBlock), ConfigError> {
        let d = self
            .space
            .clone()
            .ok_or_else(|| ConfigError::new("space", "missing [space] block"))?;
        let s = self
            .surface
            .clone()
            .ok_or_else(|| ConfigError::new("surface", "missing [surface] block"))?;
        let space = AmbientSpace::new(d).map_err(|e| ConfigError::new("space", e.to_string()))?;
        Ok((space, s))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output.directory = PathBuf::new();
        let text = serde_json::to_string(&canon).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Rejects constructors that do not exist in the space kind.
pub fn check_compatible(space: &AmbientSpace, s: &SurfaceBlock) -> Result<(), ConfigError> {
    let ok = match s.constructor {
        Constructor::RoundSphere => space.kind() == SpaceKind::SpaceForm,
        Constructor::CliffordTorus => space.kind() == SpaceKind::SpaceForm && space.c() > 0.0,
        Constructor::HopfTorus => matches!(space.kind(), SpaceKind::ProductS2S1 | SpaceKind::BergerSphere),
        Constructor::SliceSphere => matches!(space.kind(), SpaceKind::ProductS2R | SpaceKind::ProductS2S1),
    };
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(
            "surface.constructor",
            format!("{:?} is not available in {}", s.constructor, space.kind().name()),
        ))
    }
}
