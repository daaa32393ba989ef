//! Parametric model surfaces and their pointwise extrinsic geometry.

use nalgebra::{Matrix2, Vector3};
use thiserror::Error;

use crate::ambient::{AmbientError, AmbientPoint, AmbientSpace, AmbientVector, SpaceKind};
use crate::jet::Jet2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("immersion degenerates at {0:?}")]
    DegenerateImmersion(ParamPoint),
    #[error("chart guard violated: {0}")]
    ChartGuardViolation(#[from] AmbientError),
    #[error("{constructor} is not defined in {kind:?}")]
    UnsupportedSpace { constructor: &'static str, kind: SpaceKind },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mesh is not closed: {0}")]
    NonClosedMesh(String),
    #[error("triangle orientation disagrees with the surface normal")]
    InconsistentOrientation,
}

/// A parameter sample: grid coordinates for tori, a unit direction for spheres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamPoint {
    Grid { u: f64, v: f64 },
    Sphere { dir: Vector3<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    Torus { u_period: f64, v_period: f64 },
    Sphere,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    /// Product torus `S¹(r1)×S¹(r2) ⊂ S³(c)`, stereographically projected.
    Clifford { r1: f64, r2: f64, sqrt_c: f64 },
    /// Vertical cylinder over a base circle of chart radius `radius`.
    Hopf { radius: f64, fibre: f64 },
    RoundSphere { chart_radius: f64 },
    Slice { t: f64 },
    Perturbed { base: Box<Immersion>, amplitude: f64 },
}

/// A closed parametric surface in an ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct Immersion {
    space: AmbientSpace,
    shape: Shape,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HopfTorusSpec {
    pub space: AmbientSpace,
    pub c_gamma: f64,
}

/// Pointwise geometry of an immersion.
#[derive(Clone, Debug, PartialEq)]
pub struct PointGeometry {
    pub point: AmbientPoint,
    pub tangents: [Vector3<f64>; 2],
    pub first_form: Matrix2<f64>,
    pub second_form: Matrix2<f64>,
    /// Shape operator `A = I⁻¹ II`.
    pub shape: Matrix2<f64>,
    pub normal: AmbientVector,
    pub h: f64,
    pub a_norm2: f64,
    pub phi_norm2: f64,
    /// Gauss curvature from the Gauss equation.
    pub k: f64,
    /// Ambient sectional curvature of the tangent plane, `K̄_Σ`.
    pub sectional: f64,
    pub ricci: f64,
    /// `⟨N, ξ⟩`; `None` in space forms.
    pub nxi: Option<f64>,
    /// Jacobi potential `|A|² + Ric(N,N)`.
    pub q: f64,
}

/// Chart radius of a geodesic sphere of radius `d` in the conformal chart of `M³(c)`.
pub fn chart_radius(c: f64, d: f64) -> f64 {
    if c > 0.0 {
        let s = c.sqrt();
        2.0 / s * (0.5 * s * d).tan()
    } else if c < 0.0 {
        let s = (-c).sqrt();
        2.0 / s * (0.5 * s * d).tanh()
    } else {
        d
    }
}

/// Chart radius of the base circle with geodesic curvature `c_gamma` in `S²(κ)`.
pub fn hopf_base_radius(kappa: f64, c_gamma: f64) -> f64 {
    2.0 * ((c_gamma * c_gamma + kappa).sqrt() - c_gamma) / kappa
}

pub fn clifford_torus(space: &AmbientSpace, h: f64) -> Result<Immersion, SurfaceError> {
    if space.kind() != SpaceKind::SpaceForm || space.c() <= 0.0 {
        return Err(SurfaceError::UnsupportedSpace {
            constructor: "clifford_torus",
            kind: space.kind(),
        });
    }
    if !h.is_finite() {
        return Err(SurfaceError::InvalidParameter(format!("H = {h}")));
    }
    let sqrt_c = space.c().sqrt();
    let a = 0.5 * (std::f64::consts::FRAC_PI_2 + (h / sqrt_c).atan());
    let big_r = 1.0 / sqrt_c;
    Ok(Immersion {
        space: space.clone(),
        shape: Shape::Clifford {
            r1: big_r * a.cos(),
            r2: big_r * a.sin(),
            sqrt_c,
        },
    })
}

pub fn hopf_torus(spec: &HopfTorusSpec) -> Result<Immersion, SurfaceError> {
    let space = &spec.space;
    let fibre = match space.kind() {
        SpaceKind::BergerSphere | SpaceKind::ProductS2S1 => space.fiber_period().unwrap(),
        kind => {
            return Err(SurfaceError::UnsupportedSpace {
                constructor: "hopf_torus",
                kind,
            })
        }
    };
    if !spec.c_gamma.is_finite() {
        return Err(SurfaceError::InvalidParameter(format!("c_gamma = {}", spec.c_gamma)));
    }
    let radius = hopf_base_radius(space.kappa(), spec.c_gamma);
    space.check_point(&AmbientPoint::new(0, [radius, 0.0, 0.0]))?;
    Ok(Immersion {
        space: space.clone(),
        shape: Shape::Hopf { radius, fibre },
    })
}

pub fn slice_sphere(space: &AmbientSpace, t: f64) -> Result<Immersion, SurfaceError> {
    match space.kind() {
        SpaceKind::ProductS2R | SpaceKind::ProductS2S1 => {}
        kind => {
            return Err(SurfaceError::UnsupportedSpace {
                constructor: "slice_sphere",
                kind,
            })
        }
    }
    if !t.is_finite() {
        return Err(SurfaceError::InvalidParameter(format!("t = {t}")));
    }
    Ok(Immersion {
        space: space.clone(),
        shape: Shape::Slice { t },
    })
}

/// Geodesic sphere of geodesic radius `radius` centred at the chart origin.
pub fn round_sphere(space: &AmbientSpace, radius: f64) -> Result<Immersion, SurfaceError> {
    if space.kind() != SpaceKind::SpaceForm {
        return Err(SurfaceError::UnsupportedSpace {
            constructor: "round_sphere",
            kind: space.kind(),
        });
    }
    let c = space.c();
    if !(radius > 0.0) || (c > 0.0 && radius >= std::f64::consts::PI / c.sqrt()) {
        return Err(SurfaceError::InvalidParameter(format!("radius = {radius}")));
    }
    let chart_radius = chart_radius(c, radius);
    space.check_point(&AmbientPoint::new(0, [chart_radius, 0.0, 0.0]))?;
    Ok(Immersion {
        space: space.clone(),
        shape: Shape::RoundSphere { chart_radius },
    })
}

/// Scales the first two chart coordinates of `base` by `1 + ε sin(x) cos(y)`.
/// Not CMC; meant for solver stress tests.
pub fn perturbed(base: &Immersion, amplitude: f64) -> Result<Immersion, SurfaceError> {
    if !amplitude.is_finite() {
        return Err(SurfaceError::InvalidParameter(format!("amplitude = {amplitude}")));
    }
    Ok(Immersion {
        space: base.space.clone(),
        shape: Shape::Perturbed {
            base: Box::new(base.clone()),
            amplitude,
        },
    })
}

/// Orthonormal `e1, e2` with `e1 × e2 = −d`.
fn sphere_frame(d: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (seed - d * seed.dot(d)).normalize();
    let e2 = e1.cross(d);
    (e1, e2)
}

/// Unit direction as jets of local coordinates `(a, b)` centred at `d`.
fn sphere_jet(d: &Vector3<f64>) -> [Jet2; 3] {
    let (e1, e2) = sphere_frame(d);
    let a = Jet2::var(0.0, 0);
    let b = Jet2::var(0.0, 1);
    let w: [Jet2; 3] = std::array::from_fn(|i| a * e1[i] + b * e2[i] + d[i]);
    let inv = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt().recip();
    w.map(|c| c * inv)
}

impl Immersion {
    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn topology(&self) -> Topology {
        match &self.shape {
            Shape::Clifford { .. } => Topology::Torus {
                u_period: std::f64::consts::TAU,
                v_period: std::f64::consts::TAU,
            },
            Shape::Hopf { fibre, .. } => Topology::Torus {
                u_period: std::f64::consts::TAU,
                v_period: *fibre,
            },
            Shape::RoundSphere { .. } | Shape::Slice { .. } => Topology::Sphere,
            Shape::Perturbed { base, .. } => base.topology(),
        }
    }

    /// True for every constructor except [`perturbed`].
    pub fn is_cmc(&self) -> bool {
        !matches!(self.shape, Shape::Perturbed { .. })
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            Shape::Clifford { .. } => "clifford_torus",
            Shape::Hopf { .. } => "hopf_torus",
            Shape::RoundSphere { .. } => "round_sphere",
            Shape::Slice { .. } => "slice_sphere",
            Shape::Perturbed { .. } => "perturbed",
        }
    }

    /// Chart id and chart coordinates as jets of two local parameters at `p`.
    pub fn local_jet(&self, p: &ParamPoint) -> Result<(u8, [Jet2; 3]), SurfaceError> {
        let grid = |p: &ParamPoint| match *p {
            ParamPoint::Grid { u, v } => Ok((Jet2::var(u, 0), Jet2::var(v, 1))),
            ParamPoint::Sphere { .. } => Err(SurfaceError::InvalidParameter(
                "sphere sample passed to a torus".into(),
            )),
        };
        let sphere = |p: &ParamPoint| match *p {
            ParamPoint::Sphere { dir } => Ok(dir.normalize()),
            ParamPoint::Grid { .. } => Err(SurfaceError::InvalidParameter(
                "grid sample passed to a sphere".into(),
            )),
        };
        match &self.shape {
            Shape::Clifford { r1, r2, sqrt_c } => {
                let (u, v) = grid(p)?;
                let x = [u.cos() * *r1, u.sin() * *r1, v.cos() * *r2];
                let x4 = v.sin() * *r2;
                let scale = (1.0 - x4 * *sqrt_c).recip() * 2.0;
                Ok((0, x.map(|c| c * scale)))
            }
            Shape::Hopf { radius, .. } => {
                let (u, t) = grid(p)?;
                Ok((0, [u.cos() * *radius, u.sin() * *radius, t]))
            }
            Shape::RoundSphere { chart_radius } => {
                let w = sphere_jet(&sphere(p)?);
                Ok((0, w.map(|c| c * *chart_radius)))
            }
            Shape::Slice { t } => {
                let w = sphere_jet(&sphere(p)?);
                let s = 2.0 / self.space.kappa().sqrt();
                let t = Jet2::constant(*t);
                if w[2].v <= 0.0 {
                    let den = (1.0 - w[2]).recip() * s;
                    Ok((0, [w[0] * den, w[1] * den, t]))
                } else {
                    let den = (w[2] + 1.0).recip() * s;
                    Ok((1, [w[0] * den, -(w[1] * den), t]))
                }
            }
            Shape::Perturbed { base, amplitude } => {
                let (chart, x) = base.local_jet(p)?;
                let f = x[0].sin() * x[1].cos() * *amplitude + 1.0;
                Ok((chart, [x[0] * f, x[1] * f, x[2]]))
            }
        }
    }

    pub fn eval(&self, p: &ParamPoint) -> Result<AmbientPoint, SurfaceError> {
        let (chart, x) = self.local_jet(p)?;
        let pt = AmbientPoint::new(chart, [x[0].v, x[1].v, x[2].v]);
        self.space.check_point(&pt)?;
        Ok(pt)
    }

    /// Full pointwise geometry at `p`.
    pub fn geometry(&self, p: &ParamPoint) -> Result<PointGeometry, SurfaceError> {
        let (chart, x) = self.local_jet(p)?;
        let point = AmbientPoint::new(chart, [x[0].v, x[1].v, x[2].v]);
        let geo = self.space.chart_geometry(&point)?;
        let t: [Vector3<f64>; 2] = std::array::from_fn(|a| Vector3::new(x[0].d[a], x[1].d[a], x[2].d[a]));
        let first = Matrix2::from_fn(|a, b| t[a].dot(&(geo.g * t[b])));
        let det = first.determinant();
        if !(det > 1e-14 * first.trace().powi(2)) {
            return Err(SurfaceError::DegenerateImmersion(*p));
        }
        let covector = t[0].cross(&t[1]);
        let raised = geo.g_inv * covector;
        let n = raised / covector.dot(&raised).sqrt();
        let gn = geo.g * n;
        let second = Matrix2::from_fn(|a, b| {
            let acc = Vector3::new(x[0].h[a][b], x[1].h[a][b], x[2].h[a][b])
                + geo.christoffel.contract(&t[a], &t[b]);
            acc.dot(&gn)
        });
        let second = 0.5 * (second + second.transpose());
        let shape = first.try_inverse().ok_or(SurfaceError::DegenerateImmersion(*p))? * second;
        let h = 0.5 * shape.trace();
        let a_norm2 = (shape * shape).trace();
        let normal = AmbientVector::new(point, n);
        let sectional = self.space.sectional(&normal)?;
        let ricci = self.space.ricci_quadratic(&normal)?;
        let nxi = if self.space.has_killing_field() {
            Some(self.space.killing_component(&normal)?)
        } else {
            None
        };
        Ok(PointGeometry {
            point,
            tangents: t,
            first_form: first,
            second_form: second,
            shape,
            normal,
            h,
            a_norm2,
            phi_norm2: a_norm2 - 2.0 * h * h,
            k: 2.0 * h * h + sectional - 0.5 * a_norm2,
            sectional,
            ricci,
            nxi,
            q: a_norm2 + ricci,
        })
    }
}

/// Shape operator and unit normal at grid parameters `(u, v)`.
pub fn shape_operator(imm: &Immersion, u: f64, v: f64) -> Result<(Matrix2<f64>, AmbientVector), SurfaceError> {
    let g = imm.geometry(&ParamPoint::Grid { u, v })?;
    Ok((g.shape, g.normal))
}

/// Gauss curvature via `K = 2H² + K̄_Σ − |A|²/2`.
pub fn gauss_curvature(imm: &Immersion, p: &ParamPoint) -> Result<f64, SurfaceError> {
    Ok(imm.geometry(p)?.k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s3() -> AmbientSpace {
        AmbientSpace::space_form(1.0).unwrap()
    }

    #[test]
    fn minimal_clifford_torus() {
        let imm = clifford_torus(&s3(), 0.0).unwrap();
        for (u, v) in [(0.1, 0.2), (2.0, 4.0), (5.5, 1.0)] {
            let g = imm.geometry(&ParamPoint::Grid { u, v }).unwrap();
            assert!(g.h.abs() < 1e-12);
            assert!((g.a_norm2 - 2.0).abs() < 1e-12);
            assert!(g.k.abs() < 1e-12);
            assert!((g.q - 4.0).abs() < 1e-12);
            // Self-adjointness of A with respect to I.
            let s = g.first_form * g.shape;
            assert!((s - s.transpose()).norm() < 1e-12);
        }
    }

    #[test]
    fn cmc_clifford_torus_has_requested_h() {
        for c in [0.5, 1.0, 3.0] {
            let space = AmbientSpace::space_form(c).unwrap();
            for h in [-0.7, 0.3, 1.0] {
                let g = clifford_torus(&space, h)
                    .unwrap()
                    .geometry(&ParamPoint::Grid { u: 0.4, v: 1.9 })
                    .unwrap();
                assert!((g.h.abs() - h.abs()).abs() < 1e-10, "{} vs {h}", g.h);
                assert!(g.k.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn great_sphere_is_totally_geodesic() {
        let imm = round_sphere(&s3(), std::f64::consts::FRAC_PI_2).unwrap();
        let g = imm
            .geometry(&ParamPoint::Sphere {
                dir: Vector3::new(0.3, -0.5, 0.8),
            })
            .unwrap();
        assert!(g.shape.norm() < 1e-12);
        assert!((g.k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_sphere_in_euclidean_space() {
        let imm = round_sphere(&AmbientSpace::space_form(0.0).unwrap(), 1.0).unwrap();
        let g = imm
            .geometry(&ParamPoint::Sphere {
                dir: Vector3::new(-0.2, 0.9, 0.1),
            })
            .unwrap();
        assert!((g.h - 1.0).abs() < 1e-12);
        assert!(g.phi_norm2.abs() < 1e-12);
        assert!((g.k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_geodesic_sphere() {
        let space = AmbientSpace::space_form(-1.0).unwrap();
        let d = 0.8_f64;
        let g = round_sphere(&space, d)
            .unwrap()
            .geometry(&ParamPoint::Sphere { dir: Vector3::z() })
            .unwrap();
        assert!((g.h - 1.0 / d.tanh()).abs() < 1e-10);
        assert!(g.phi_norm2.abs() < 1e-10);
    }

    #[test]
    fn hopf_tori_are_flat_and_vertical() {
        let cases = [
            AmbientSpace::product_s2s1(1.0, 5.0).unwrap(),
            AmbientSpace::berger(4.0, 0.9).unwrap(),
            AmbientSpace::berger(1.0, 0.8).unwrap(),
        ];
        for space in cases {
            for c_gamma in [0.0, 1.0, 2.0] {
                let imm = hopf_torus(&HopfTorusSpec {
                    space: space.clone(),
                    c_gamma,
                })
                .unwrap();
                let g = imm.geometry(&ParamPoint::Grid { u: 1.1, v: 0.3 }).unwrap();
                assert!(g.nxi.unwrap().abs() < 1e-12);
                assert!(g.k.abs() < 1e-10, "K = {}", g.k);
                assert!((2.0 * g.h.abs() - c_gamma).abs() < 1e-10);
                assert!((g.q - (4.0 * g.h * g.h + space.kappa())).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn slices_in_both_charts() {
        let space = AmbientSpace::product_s2r(2.0).unwrap();
        let imm = slice_sphere(&space, 0.4).unwrap();
        let mut signs = Vec::new();
        for dir in [Vector3::new(0.1, 0.2, -0.9), Vector3::new(0.3, -0.1, 0.8)] {
            let g = imm.geometry(&ParamPoint::Sphere { dir }).unwrap();
            assert!(g.shape.norm() < 1e-12);
            assert!((g.nxi.unwrap().powi(2) - 1.0).abs() < 1e-12);
            assert!((g.k - 2.0).abs() < 1e-12);
            assert!(g.q.abs() < 1e-12);
            signs.push(g.nxi.unwrap().signum());
        }
        assert_eq!(signs[0], signs[1]);
    }

    #[test]
    fn constructors_reject_wrong_spaces() {
        let nil = AmbientSpace::heisenberg(0.5).unwrap();
        assert!(matches!(
            hopf_torus(&HopfTorusSpec { space: nil.clone(), c_gamma: 0.0 }),
            Err(SurfaceError::UnsupportedSpace { .. })
        ));
        assert!(slice_sphere(&nil, 0.0).is_err());
        assert!(clifford_torus(&AmbientSpace::space_form(-1.0).unwrap(), 0.0).is_err());
        assert!(round_sphere(&s3(), 4.0).is_err());
    }

    #[test]
    fn chart_radius_limits() {
        assert!((chart_radius(1.0, std::f64::consts::FRAC_PI_2) - 2.0).abs() < 1e-14);
        assert_eq!(chart_radius(0.0, 1.5), 1.5);
        assert!(chart_radius(-1.0, 5.0) < 2.0);
        let r = hopf_base_radius(1.0, 1.0);
        assert!((1.0 / r - r / 4.0 - 1.0).abs() < 1e-14);
    }
}
