//! Upper bounds for `λ₁`, equality classification and strong-stability checks.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambient::{AmbientSpace, SpaceKind};
use crate::mesh::GeometryMesh;
use crate::spectrum::{stability_of, SpectrumResult, Stability};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("{0:?} has no homogeneous-space theorem; use the space-form bounds")]
    UnsupportedSpace(SpaceKind),
    #[error("mean curvature is not constant (deviation {0:.3e})")]
    NonConstantH(f64),
}

#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    T1_1_i,
    T1_1_ii,
    C1_2_i,
    C1_2_ii,
    S2R_i,
    S2R_ii,
    S2S1_i,
    S2S1_ii,
    H2R_i,
    H2R_ii,
    NIL_i,
    NIL_ii,
    SB_A_i,
    SB_A_ii,
    SB_B_i,
    SB_B_ii,
    SL2_i,
    SL2_ii,
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualityCase {
    None,
    TotallyUmbilicMinRicci,
    HopfTorus,
    HorizontalSlice,
    CliffordTorus,
}

impl EqualityCase {
    pub fn as_str(self) -> &'static str {
        match self {
            EqualityCase::None => "none",
            EqualityCase::TotallyUmbilicMinRicci => "totally_umbilic_min_ricci",
            EqualityCase::HopfTorus => "hopf_torus",
            EqualityCase::HorizontalSlice => "horizontal_slice",
            EqualityCase::CliffordTorus => "clifford_torus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Equality detection, relative to `max(1, |bound|)`.
    pub tol_eq: f64,
    /// Allowed violation, relative to `|bound| + 1`.
    pub tol_verify: f64,
    /// Band around zero treated as marginal stability.
    pub tol_stability: f64,
    /// Allowed `max |H − H̄| / (1 + |H̄|)`.
    pub tol_cmc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_eq: 1e-3,
            tol_verify: 0.02,
            tol_stability: 1e-6,
            tol_cmc: 1e-8,
        }
    }
}

/// A bound as stated by a theorem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoremBound {
    pub theorem_id: TheoremId,
    pub bound: f64,
    pub strict: bool,
    /// The theorem predicts `λ₁ = bound` rather than an inequality.
    pub predicted_equality: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem_id: TheoremId,
    #[serde(rename = "bound")]
    pub bound_value: f64,
    pub lambda1: f64,
    pub margin: f64,
    pub strict: bool,
    pub equality_case: EqualityCase,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorollaryCheck {
    pub id: &'static str,
    pub applicable: bool,
    pub consistent: bool,
    pub detail: String,
}

/// Aggregate surface data entering the theorems and the equality tests.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceSummary {
    pub h: f64,
    pub genus: i64,
    pub area: f64,
    pub max_phi2: f64,
    pub max_abs_nxi: Option<f64>,
    pub min_nxi2: Option<f64>,
    pub max_abs_k: f64,
    pub k_spread: f64,
    pub max_sectional_gap: f64,
    pub max_ricci_gap: f64,
}

impl SurfaceSummary {
    /// `c` is the lower bound of the ambient sectional curvature.
    pub fn from_mesh(mesh: &GeometryMesh, c: f64) -> Self {
        let geo = || mesh.vertices.iter().map(|v| &v.geometry);
        let fmax = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
        let fmin = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
        let has_xi = mesh.space.has_killing_field();
        SurfaceSummary {
            h: mesh.mean_h(),
            genus: mesh.genus,
            area: mesh.area,
            max_phi2: fmax(&mut geo().map(|g| g.phi_norm2)),
            max_abs_nxi: has_xi.then(|| fmax(&mut geo().map(|g| g.nxi.unwrap_or(0.0).abs()))),
            min_nxi2: has_xi.then(|| fmin(&mut geo().map(|g| g.nxi.unwrap_or(0.0).powi(2)))),
            max_abs_k: fmax(&mut geo().map(|g| g.k.abs())),
            k_spread: fmax(&mut geo().map(|g| g.k)) - fmin(&mut geo().map(|g| g.k)),
            max_sectional_gap: fmax(&mut geo().map(|g| (g.sectional - c).abs())),
            max_ricci_gap: fmax(&mut geo().map(|g| (g.ricci - 2.0 * c).abs())),
        }
    }

    fn umbilic(&self) -> bool {
        self.max_phi2 < 1e-8
    }

    fn vertical(&self) -> bool {
        self.max_abs_nxi.is_some_and(|x| x < 1e-6) && self.genus == 1
    }

    fn horizontal(&self) -> bool {
        self.min_nxi2.is_some_and(|x| x > 1.0 - 1e-6)
    }

    fn flat_torus(&self, tol: f64) -> bool {
        self.genus == 1 && self.max_abs_k < tol
    }
}

/// Both bounds of the general theorem: `−2(H²+c)` and `−4(H²+c) − 8π(g−1)/Area`.
pub fn bound_theorem_1_1(c: f64, h: f64, g: i64, area: f64) -> (f64, f64) {
    let s = h * h + c;
    (-2.0 * s, -4.0 * s - 8.0 * PI * (g as f64 - 1.0) / area)
}

/// The pair of bounds of the theorem matching the kind of `E(κ,τ)`.
pub fn bound_homogeneous(space: &AmbientSpace, h: f64, g: i64, area: f64) -> Result<Vec<TheoremBound>, BoundsError> {
    let (k, t2, h2) = (space.kappa(), space.tau() * space.tau(), h * h);
    let topo = 8.0 * PI * (g as f64 - 1.0) / area;
    let mk = |theorem_id, bound, strict| TheoremBound {
        theorem_id,
        bound,
        strict,
        predicted_equality: false,
    };
    use TheoremId::*;
    Ok(match space.kind() {
        SpaceKind::SpaceForm => return Err(BoundsError::UnsupportedSpace(SpaceKind::SpaceForm)),
        SpaceKind::ProductS2R => vec![
            mk(S2R_i, -2.0 * h2, false),
            mk(S2R_ii, -4.0 * h2 - k - topo, true),
        ],
        SpaceKind::ProductS2S1 => vec![
            mk(S2S1_i, -2.0 * h2, false),
            mk(S2S1_ii, -4.0 * h2 - k - topo, false),
        ],
        SpaceKind::ProductH2R => vec![
            mk(H2R_i, -2.0 * h2 - k, true),
            mk(H2R_ii, -4.0 * h2 - 2.0 * k - topo, true),
        ],
        SpaceKind::Heisenberg => vec![
            mk(NIL_i, -2.0 * (h2 - t2), true),
            mk(NIL_ii, -4.0 * (h2 - t2) - topo, true),
        ],
        SpaceKind::BergerSphere if k - 4.0 * t2 > 0.0 => vec![
            mk(SB_A_i, -2.0 * (h2 + t2), true),
            mk(SB_A_ii, -4.0 * h2 - k - topo, false),
        ],
        SpaceKind::BergerSphere if k - 4.0 * t2 == 0.0 => return Err(BoundsError::UnsupportedSpace(space.kind())),
        SpaceKind::BergerSphere => vec![
            mk(SB_B_i, -2.0 * h2 - k + 2.0 * t2, true),
            mk(SB_B_ii, -4.0 * h2 - 2.0 * k + 4.0 * t2 - topo, true),
        ],
        SpaceKind::Sl2Universal => vec![
            mk(SL2_i, -2.0 * h2 - k + 2.0 * t2, true),
            mk(SL2_ii, -4.0 * h2 - 2.0 * k + 4.0 * t2 - topo, true),
        ],
    })
}

/// Space-form dichotomy: totally umbilic surfaces have `λ₁ = −2(H²+c)`,
/// all others satisfy `λ₁ ≤ −4(H²+c)`.
pub fn bound_space_form(c: f64, h: f64, is_totally_umbilic: bool) -> TheoremBound {
    let s = h * h + c;
    if is_totally_umbilic {
        TheoremBound {
            theorem_id: TheoremId::C1_2_i,
            bound: -2.0 * s,
            strict: false,
            predicted_equality: true,
        }
    } else {
        TheoremBound {
            theorem_id: TheoremId::C1_2_ii,
            bound: -4.0 * s,
            strict: false,
            predicted_equality: false,
        }
    }
}

/// All applicable theorem bounds for a surface.
pub fn applicable_bounds(space: &AmbientSpace, s: &SurfaceSummary) -> Vec<TheoremBound> {
    let c = space.sectional_lower_bound();
    let (b_i, b_ii) = bound_theorem_1_1(c, s.h, s.genus, s.area);
    let mut out = vec![
        TheoremBound {
            theorem_id: TheoremId::T1_1_i,
            bound: b_i,
            strict: false,
            predicted_equality: false,
        },
        TheoremBound {
            theorem_id: TheoremId::T1_1_ii,
            bound: b_ii,
            strict: false,
            predicted_equality: false,
        },
    ];
    match bound_homogeneous(space, s.h, s.genus, s.area) {
        Ok(b) => out.extend(b),
        Err(_) => out.push(bound_space_form(c, s.h, s.umbilic())),
    }
    out
}

fn classify(b: &TheoremBound, s: &SurfaceSummary, space: &AmbientSpace, tol_eq: f64) -> EqualityCase {
    use TheoremId::*;
    let ricci_min = s.max_ricci_gap < tol_eq;
    match b.theorem_id {
        T1_1_i if s.umbilic() && ricci_min => EqualityCase::TotallyUmbilicMinRicci,
        T1_1_ii if s.k_spread < tol_eq && s.max_sectional_gap < tol_eq && ricci_min => {
            if s.umbilic() {
                EqualityCase::TotallyUmbilicMinRicci
            } else if space.kind() == SpaceKind::SpaceForm && s.flat_torus(tol_eq) {
                EqualityCase::CliffordTorus
            } else if s.vertical() {
                EqualityCase::HopfTorus
            } else {
                EqualityCase::None
            }
        }
        C1_2_i if s.umbilic() => EqualityCase::TotallyUmbilicMinRicci,
        C1_2_ii if s.flat_torus(tol_eq) => EqualityCase::CliffordTorus,
        S2R_i | S2S1_i if s.horizontal() => EqualityCase::HorizontalSlice,
        S2S1_ii | SB_A_ii if s.vertical() => EqualityCase::HopfTorus,
        _ => EqualityCase::None,
    }
}

/// Compares `λ₁` with one bound.
pub fn report(b: &TheoremBound, lambda1: f64, s: &SurfaceSummary, space: &AmbientSpace, tol: &Tolerances) -> BoundReport {
    let margin = b.bound - lambda1;
    let slack = tol.tol_verify * (b.bound.abs() + 1.0);
    let mut pass = margin >= -slack;
    if b.predicted_equality {
        pass &= margin <= slack;
    }
    let near = margin.abs() < tol.tol_eq * b.bound.abs().max(1.0);
    let equality_case = if !b.strict && near {
        classify(b, s, space, tol.tol_eq)
    } else {
        EqualityCase::None
    };
    BoundReport {
        theorem_id: b.theorem_id,
        bound_value: b.bound,
        lambda1,
        margin,
        strict: b.strict,
        equality_case,
        pass,
    }
}

/// Strong-stability corollaries; each check is consistent unless `λ₁`
/// contradicts it.
pub fn stability_corollaries(
    space: &AmbientSpace,
    s: &SurfaceSummary,
    lambda1: f64,
    tol_stability: f64,
) -> Vec<CorollaryCheck> {
    let stable = stability_of(lambda1, tol_stability) != Stability::Unstable;
    let (h2, g) = (s.h * s.h, s.genus as f64);
    let topo = 2.0 * PI * (g - 1.0);
    let c = space.sectional_lower_bound();
    let hc = h2 + c;
    let mut out = Vec::new();
    let (consistent, detail) = if hc > 1e-12 {
        (!stable, format!("H^2+c = {hc:.6} > 0 forbids strong stability"))
    } else if hc.abs() <= 1e-12 {
        (!stable || s.genus <= 1, "H^2+c = 0: strongly stable surfaces have genus 0 or 1".to_string())
    } else {
        (
            !stable || s.area * hc.abs() >= topo,
            format!("Area|H^2+c| = {:.6} vs 2pi(g-1) = {topo:.6}", s.area * hc.abs()),
        )
    };
    out.push(CorollaryCheck {
        id: "C1_3",
        applicable: true,
        consistent,
        detail,
    });
    let (k, t2) = (space.kappa(), space.tau() * space.tau());
    let strict_check = |id, threshold: f64, lhs: f64, rhs: f64| {
        let ok = h2 < threshold && lhs > rhs;
        CorollaryCheck {
            id,
            applicable: true,
            consistent: !stable || ok,
            detail: format!("stable requires H^2 < {threshold:.6} and {lhs:.6} > {rhs:.6}"),
        }
    };
    match space.kind() {
        SpaceKind::ProductS2R => out.push(CorollaryCheck {
            id: "S2R_STABLE",
            applicable: true,
            consistent: !stable || s.horizontal(),
            detail: "only horizontal slices are strongly stable".into(),
        }),
        SpaceKind::ProductH2R => out.push(strict_check(
            "H2R_STABLE",
            -k / 2.0,
            s.area * (2.0 * h2 + k).abs(),
            2.0 * topo,
        )),
        SpaceKind::Heisenberg => out.push(strict_check("NIL_STABLE", t2, s.area * (h2 - t2).abs(), topo)),
        SpaceKind::Sl2Universal => out.push(strict_check(
            "SL2_STABLE",
            t2 - k / 2.0,
            s.area * (h2 - t2 + k / 2.0).abs(),
            topo,
        )),
        SpaceKind::BergerSphere => out.push(CorollaryCheck {
            id: "BERGER_STABLE",
            applicable: true,
            consistent: !stable,
            detail: "no strongly stable compact CMC surfaces exist".into(),
        }),
        _ => {}
    }
    out
}

/// Area fraction where the normal is nearly vertical; should be small for `τ ≠ 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerticalNormalDiagnostic {
    pub epsilon: f64,
    pub area_fraction: f64,
    pub warning: bool,
}

pub fn vertical_normal_diagnostic(mesh: &GeometryMesh, epsilon: f64) -> Option<VerticalNormalDiagnostic> {
    if !mesh.space.has_killing_field() || mesh.space.tau() == 0.0 {
        return None;
    }
    let frac = mesh.integrate(|g| f64::from(u8::from(g.nxi.unwrap_or(0.0).powi(2) > 1.0 - epsilon))) / mesh.area;
    Some(VerticalNormalDiagnostic {
        epsilon,
        area_fraction: frac,
        warning: frac > 0.1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub summary: SurfaceSummary,
    pub reports: Vec<BoundReport>,
    pub corollaries: Vec<CorollaryCheck>,
    pub vertical_normals: Option<VerticalNormalDiagnostic>,
    pub pass: bool,
}

/// Every applicable theorem and corollary for a CMC mesh and its spectrum.
pub fn verify(mesh: &GeometryMesh, spec: &SpectrumResult, tol: &Tolerances) -> Result<Verification, BoundsError> {
    let dev = mesh.cmc_deviation();
    if !mesh.cmc || dev > tol.tol_cmc {
        return Err(BoundsError::NonConstantH(dev));
    }
    let space = &mesh.space;
    let summary = SurfaceSummary::from_mesh(mesh, space.sectional_lower_bound());
    let lambda1 = spec.lambda1();
    let reports: Vec<BoundReport> = applicable_bounds(space, &summary)
        .iter()
        .map(|b| report(b, lambda1, &summary, space, tol))
        .collect();
    let corollaries = stability_corollaries(space, &summary, lambda1, tol.tol_stability);
    let pass = reports.iter().all(|r| r.pass) && corollaries.iter().all(|c| c.consistent);
    Ok(Verification {
        vertical_normals: vertical_normal_diagnostic(mesh, 1e-3),
        summary,
        reports,
        corollaries,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn general_bounds() {
        let (b_i, b_ii) = bound_theorem_1_1(1.0, 0.0, 0, 4.0 * PI);
        assert!(close(b_i, -2.0) && close(b_ii, -2.0));
        assert!(close(bound_theorem_1_1(1.0, 0.0, 1, 7.0).1, -4.0));
        assert!(close(bound_theorem_1_1(0.0, 1.0, 0, 4.0 * PI).0, -2.0));
    }

    #[test]
    fn homogeneous_dispatch() {
        let s2s1 = AmbientSpace::product_s2s1(1.0, 2.0).unwrap();
        let b = bound_homogeneous(&s2s1, 0.5, 1, 3.0).unwrap();
        assert_eq!(b[1].theorem_id, TheoremId::S2S1_ii);
        assert!(close(b[1].bound, -2.0) && !b[1].strict);

        let nil = AmbientSpace::heisenberg(0.5).unwrap();
        let b = bound_homogeneous(&nil, 0.0, 0, 10.0).unwrap();
        assert!(close(b[0].bound, 0.5) && b[0].strict);

        let sb = AmbientSpace::berger(4.0, 0.9).unwrap();
        let b = bound_homogeneous(&sb, 0.0, 1, 10.0).unwrap();
        assert_eq!(b[1].theorem_id, TheoremId::SB_A_ii);
        assert!(close(b[1].bound, -4.0) && !b[1].strict);

        let sb = AmbientSpace::berger(1.0, 0.8).unwrap();
        assert_eq!(bound_homogeneous(&sb, 0.0, 1, 1.0).unwrap()[0].theorem_id, TheoremId::SB_B_i);

        assert!(bound_homogeneous(&AmbientSpace::space_form(1.0).unwrap(), 0.0, 0, 1.0).is_err());
    }

    #[test]
    fn space_form_dichotomy() {
        let b = bound_space_form(1.0, 0.0, true);
        assert!(close(b.bound, -2.0) && b.predicted_equality);
        let b = bound_space_form(1.0, 0.0, false);
        assert!(close(b.bound, -4.0));
        assert!(close(bound_space_form(-1.0, 2f64.sqrt(), true).bound, -2.0));
    }

    #[test]
    fn strict_bounds_never_claim_equality() {
        let space = AmbientSpace::heisenberg(0.5).unwrap();
        let s = SurfaceSummary {
            h: 0.0,
            genus: 1,
            area: 1.0,
            max_phi2: 0.0,
            max_abs_nxi: Some(0.0),
            min_nxi2: Some(0.0),
            max_abs_k: 0.0,
            k_spread: 0.0,
            max_sectional_gap: 0.0,
            max_ricci_gap: 0.0,
        };
        let b = bound_homogeneous(&space, 0.0, 1, 1.0).unwrap();
        let r = report(&b[0], b[0].bound, &s, &space, &Tolerances::default());
        assert_eq!(r.equality_case, EqualityCase::None);
        assert!(r.pass);
    }
}
