//! Built-in CMC test families with closed-form first eigenvalues, and the
//! pipeline that meshes, solves and verifies one case.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambient::{AmbientSpace, SpaceKind};
use crate::bounds::{verify, BoundsError, Tolerances, Verification};
use crate::mesh::GeometryMesh;
use crate::spectrum::{analyze, lambda1_identity_residual, IdentityReport, SolverOptions, SpectrumError, SpectrumResult};
use crate::surface::{self, HopfTorusSpec, Immersion, SurfaceError, Topology};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("surface: {0}")]
    Surface(#[from] SurfaceError),
    #[error("solver: {0}")]
    Spectrum(#[from] SpectrumError),
    #[error("bounds: {0}")]
    Bounds(#[from] BoundsError),
}

impl CaseError {
    pub fn stage(&self) -> &'static str {
        match self {
            CaseError::Surface(_) => "mesh",
            CaseError::Spectrum(_) => "solver",
            CaseError::Bounds(_) => "bounds",
        }
    }
}

/// A model surface, independent of the ambient space it lives in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constructor", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    RoundSphere { radius: f64 },
    CliffordTorus { h: f64 },
    HopfTorus { c_gamma: f64 },
    SliceSphere { t: f64 },
    Perturbed { base: Box<SurfaceSpec>, amplitude: f64 },
}

impl SurfaceSpec {
    pub fn build(&self, space: &AmbientSpace) -> Result<Immersion, SurfaceError> {
        match self {
            SurfaceSpec::RoundSphere { radius } => surface::round_sphere(space, *radius),
            SurfaceSpec::CliffordTorus { h } => surface::clifford_torus(space, *h),
            SurfaceSpec::HopfTorus { c_gamma } => surface::hopf_torus(&HopfTorusSpec {
                space: space.clone(),
                c_gamma: *c_gamma,
            }),
            SurfaceSpec::SliceSphere { t } => surface::slice_sphere(space, *t),
            SurfaceSpec::Perturbed { base, amplitude } => surface::perturbed(&base.build(space)?, *amplitude),
        }
    }

    /// Mean curvature predicted for the model, up to sign.
    pub fn expected_h(&self, space: &AmbientSpace) -> Option<f64> {
        match self {
            SurfaceSpec::RoundSphere { radius } => {
                let c = space.c();
                Some(if c > 0.0 {
                    c.sqrt() / (c.sqrt() * radius).tan()
                } else if c < 0.0 {
                    (-c).sqrt() / ((-c).sqrt() * radius).tanh()
                } else {
                    1.0 / radius
                })
            }
            SurfaceSpec::CliffordTorus { h } => Some(*h),
            SurfaceSpec::HopfTorus { c_gamma } => Some(0.5 * c_gamma),
            SurfaceSpec::SliceSphere { .. } => Some(0.0),
            SurfaceSpec::Perturbed { .. } => None,
        }
    }

    /// Closed-form `λ₁` where the model has one.
    pub fn closed_form_lambda1(&self, space: &AmbientSpace) -> Option<f64> {
        let h2 = self.expected_h(space)?.powi(2);
        Some(match self {
            SurfaceSpec::RoundSphere { .. } => -2.0 * (h2 + space.c()),
            SurfaceSpec::CliffordTorus { .. } => -4.0 * (h2 + space.c()),
            SurfaceSpec::HopfTorus { .. } => -4.0 * h2 - space.kappa(),
            SurfaceSpec::SliceSphere { .. } => 0.0,
            SurfaceSpec::Perturbed { .. } => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmcCase {
    pub name: String,
    pub space: AmbientSpace,
    pub surface: SurfaceSpec,
    /// Grid size for tori, icosphere level for spheres.
    pub resolution: u32,
    /// Refinement ladder used for convergence measurements.
    pub ladder: Vec<u32>,
}

impl CmcCase {
    pub fn new(name: impl Into<String>, space: AmbientSpace, surface: SurfaceSpec) -> Self {
        let sphere = matches!(surface, SurfaceSpec::RoundSphere { .. } | SurfaceSpec::SliceSphere { .. });
        let (resolution, ladder) = if sphere { (4, vec![2, 3, 4]) } else { (96, vec![24, 48, 96]) };
        Self {
            name: name.into(),
            space,
            surface,
            resolution,
            ladder,
        }
    }

    pub fn with_resolution(mut self, resolution: u32) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn closed_form_lambda1(&self) -> Option<f64> {
        self.surface.closed_form_lambda1(&self.space)
    }
}

fn s3(c: f64) -> AmbientSpace {
    AmbientSpace::space_form(c).unwrap()
}

/// Default S¹ length for `S²×S¹`.
pub const DEFAULT_CIRCLE_LENGTH: f64 = TAU;

/// Great sphere, minimal Clifford torus, Hopf tori in `S²×S¹` and a Berger
/// sphere, and a horizontal slice.
pub fn default_suite() -> Vec<CmcCase> {
    vec![
        CmcCase::new("great_sphere_s3", s3(1.0), SurfaceSpec::RoundSphere { radius: FRAC_PI_2 }),
        CmcCase::new("clifford_minimal_s3", s3(1.0), SurfaceSpec::CliffordTorus { h: 0.0 }),
        CmcCase::new(
            "hopf_s2s1",
            AmbientSpace::product_s2s1(1.0, DEFAULT_CIRCLE_LENGTH).unwrap(),
            SurfaceSpec::HopfTorus { c_gamma: 1.0 },
        ),
        CmcCase::new(
            "hopf_berger",
            AmbientSpace::berger(4.0, 0.9).unwrap(),
            SurfaceSpec::HopfTorus { c_gamma: 0.0 },
        ),
        CmcCase::new(
            "slice_s2r",
            AmbientSpace::product_s2r(1.0).unwrap(),
            SurfaceSpec::SliceSphere { t: 0.0 },
        ),
    ]
}

/// The full family grid, at moderate resolution.
pub fn family_grid() -> Vec<CmcCase> {
    let mut out = Vec::new();
    let mut push = |name: String, space: AmbientSpace, spec: SurfaceSpec| {
        let case = CmcCase::new(name, space, spec);
        let res = if case.resolution > 8 { 32 } else { 3 };
        out.push(case.with_resolution(res));
    };
    for c in [0.5_f64, 1.0, 2.0] {
        let half = PI / c.sqrt();
        for frac in [0.5, 0.3] {
            push(format!("sphere_s3_c{c}_r{frac}"), s3(c), SurfaceSpec::RoundSphere { radius: frac * half });
        }
        for h in [0.0, 0.25, 0.5, 1.0] {
            push(format!("clifford_s3_c{c}_h{h}"), s3(c), SurfaceSpec::CliffordTorus { h });
        }
    }
    for r in [0.5, 1.0, 2.0] {
        push(format!("sphere_r3_r{r}"), s3(0.0), SurfaceSpec::RoundSphere { radius: r });
    }
    for d in [0.5, 1.0, 1.5] {
        push(format!("sphere_h3_d{d}"), s3(-1.0), SurfaceSpec::RoundSphere { radius: d });
    }
    for k in [0.5, 1.0, 2.0] {
        push(
            format!("slice_s2r_k{k}"),
            AmbientSpace::product_s2r(k).unwrap(),
            SurfaceSpec::SliceSphere { t: 0.3 },
        );
    }
    for k in [1.0, 2.0] {
        let space = AmbientSpace::product_s2s1(k, DEFAULT_CIRCLE_LENGTH).unwrap();
        push(format!("slice_s2s1_k{k}"), space.clone(), SurfaceSpec::SliceSphere { t: 1.0 });
        for c_gamma in [0.0, 1.0, 2.0] {
            push(format!("hopf_s2s1_k{k}_c{c_gamma}"), space.clone(), SurfaceSpec::HopfTorus { c_gamma });
        }
    }
    // Berger spheres with κ − 4τ² of both signs.
    for (k, t) in [(4.0, 0.9), (1.0, 0.4), (1.0, 0.8), (2.0, 1.0)] {
        let space = AmbientSpace::berger(k, t).unwrap();
        for c_gamma in [0.0, 1.0] {
            push(format!("hopf_berger_k{k}_t{t}_c{c_gamma}"), space.clone(), SurfaceSpec::HopfTorus { c_gamma });
        }
    }
    out
}

/// Everything computed for one case at one resolution.
#[derive(Clone, Debug, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub kind: SpaceKind,
    pub resolution: u32,
    pub vertices: usize,
    pub mesh_size: f64,
    pub min_angle_deg: f64,
    pub h: f64,
    pub area: f64,
    pub genus: i64,
    pub gauss_bonnet_residual: f64,
    pub closed_form: Option<f64>,
    /// `|2|H| − |c_gamma||` for Hopf tori.
    pub hopf_relation_error: Option<f64>,
    pub spectrum: SpectrumResult,
    pub identity: IdentityReport,
    pub verification: Verification,
}

impl CaseOutcome {
    pub fn lambda1(&self) -> f64 {
        self.spectrum.lambda1()
    }
}

pub fn mesh_case(case: &CmcCase, resolution: u32) -> Result<GeometryMesh, SurfaceError> {
    let imm = case.surface.build(&case.space)?;
    GeometryMesh::from_resolution(&imm, resolution)
}

/// Mean edge length.
pub fn mesh_size(mesh: &GeometryMesh) -> f64 {
    let total: f64 = mesh.edge_lengths.iter().flatten().sum();
    total / (3 * mesh.edge_lengths.len()) as f64
}

/// Meshes, solves and verifies one case.
pub fn evaluate_mesh(
    case: &CmcCase,
    mesh: &GeometryMesh,
    resolution: u32,
    opts: &SolverOptions,
    tol: &Tolerances,
    potential_offset: f64,
) -> Result<CaseOutcome, CaseError> {
    let (_, spectrum) = if potential_offset == 0.0 {
        analyze(mesh, opts)?
    } else {
        let mut corrupted = mesh.clone();
        for v in &mut corrupted.vertices {
            v.geometry.q += potential_offset;
        }
        analyze(&corrupted, opts)?
    };
    let identity = lambda1_identity_residual(mesh, &spectrum, tol.tol_cmc)?;
    let verification = verify(mesh, &spectrum, tol)?;
    let hopf_relation_error = match case.surface {
        SurfaceSpec::HopfTorus { c_gamma } => Some((2.0 * mesh.mean_h().abs() - c_gamma.abs()).abs()),
        _ => None,
    };
    Ok(CaseOutcome {
        name: case.name.clone(),
        kind: case.space.kind(),
        resolution,
        vertices: mesh.len(),
        mesh_size: mesh_size(mesh),
        min_angle_deg: mesh.min_angle_degrees(),
        h: mesh.mean_h(),
        area: mesh.area,
        genus: mesh.genus,
        gauss_bonnet_residual: mesh.gauss_bonnet_residual(),
        closed_form: case.closed_form_lambda1(),
        hopf_relation_error,
        spectrum,
        identity,
        verification,
    })
}

pub fn evaluate(case: &CmcCase, resolution: u32, opts: &SolverOptions, tol: &Tolerances) -> Result<CaseOutcome, CaseError> {
    let mesh = mesh_case(case, resolution)?;
    evaluate_mesh(case, &mesh, resolution, opts, tol, 0.0)
}

/// Convergence of a sequence of errors under uniform refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ConvergenceOrder {
    /// Every error is below the floor.
    Exact,
    Measured(f64),
    Undetermined,
}

impl ConvergenceOrder {
    pub fn passes(&self, min_order: f64) -> bool {
        match self {
            ConvergenceOrder::Exact => true,
            ConvergenceOrder::Measured(p) => *p >= min_order,
            ConvergenceOrder::Undetermined => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConvergenceOrder::Exact => "exact".into(),
            ConvergenceOrder::Measured(p) => format!("{p:.3}"),
            ConvergenceOrder::Undetermined => "undetermined".into(),
        }
    }
}

/// Smallest observed order `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` across the
/// ladder; pairs whose finer error is below `floor` are skipped.
pub fn convergence_order(h: &[f64], errors: &[f64], floor: f64) -> ConvergenceOrder {
    if errors.iter().all(|e| *e < floor) {
        return ConvergenceOrder::Exact;
    }
    let mut worst: Option<f64> = None;
    for i in 0..errors.len().saturating_sub(1) {
        if errors[i + 1] < floor {
            continue;
        }
        let p = (errors[i] / errors[i + 1]).ln() / (h[i] / h[i + 1]).ln();
        worst = Some(worst.map_or(p, |w: f64| w.min(p)));
    }
    match worst {
        Some(p) if p.is_finite() => ConvergenceOrder::Measured(p),
        _ if errors.last().is_some_and(|e| *e < floor) => ConvergenceOrder::Exact,
        _ => ConvergenceOrder::Undetermined,
    }
}

/// Order from successive differences, for quantities without a closed form.
pub fn self_convergence_order(h: &[f64], values: &[f64]) -> ConvergenceOrder {
    if values.len() < 3 {
        return ConvergenceOrder::Undetermined;
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let mids: Vec<f64> = h.windows(2).map(|w| w[0]).collect();
    convergence_order(&mids, &diffs, 1e-12)
}

/// Refinement study of one case.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStudy {
    pub name: String,
    pub resolutions: Vec<u32>,
    pub mesh_sizes: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub gauss_bonnet: Vec<f64>,
    pub closed_form: Option<f64>,
    pub lambda1_order: ConvergenceOrder,
    pub lambda2_order: ConvergenceOrder,
}

pub const EXACT_FLOOR: f64 = 1e-9;

pub fn convergence_study(outcomes: &[CaseOutcome]) -> ConvergenceStudy {
    let hs: Vec<f64> = outcomes.iter().map(|o| o.mesh_size).collect();
    let l1: Vec<f64> = outcomes.iter().map(|o| o.lambda1()).collect();
    let l2: Vec<f64> = outcomes
        .iter()
        .map(|o| o.spectrum.eigenvalues.get(1).copied().unwrap_or(f64::NAN))
        .collect();
    let closed = outcomes.first().and_then(|o| o.closed_form);
    let lambda1_order = match closed {
        Some(exact) => {
            let errs: Vec<f64> = l1.iter().map(|l| (l - exact).abs()).collect();
            convergence_order(&hs, &errs, EXACT_FLOOR * (1.0 + exact.abs()))
        }
        None => self_convergence_order(&hs, &l1),
    };
    ConvergenceStudy {
        name: outcomes.first().map(|o| o.name.clone()).unwrap_or_default(),
        resolutions: outcomes.iter().map(|o| o.resolution).collect(),
        mesh_sizes: hs.clone(),
        lambda1: l1,
        lambda2: l2.clone(),
        gauss_bonnet: outcomes.iter().map(|o| o.gauss_bonnet_residual).collect(),
        closed_form: closed,
        lambda1_order,
        lambda2_order: self_convergence_order(&hs, &l2),
    }
}

/// Whether the surface is a torus (grid resolution) or a sphere (subdivision level).
pub fn is_torus(case: &CmcCase) -> bool {
    case.surface
        .build(&case.space)
        .map(|i| matches!(i.topology(), Topology::Torus { .. }))
        .unwrap_or(false)
}
