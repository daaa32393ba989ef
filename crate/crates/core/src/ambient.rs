//! Homogeneous ambient 3-manifolds `E(κ,τ)` and simply connected space forms.
//!
//! Every space is realized on explicit coordinate charts:
//!
//! * space forms `M³(c)` use the conformally flat chart
//!   `g = λ² (dx² + dy² + dz²)`, `λ = 1 / (1 + c r² / 4)`, which is the
//!   Euclidean chart for `c = 0`, stereographic coordinates for `c > 0` and
//!   the Poincaré ball for `c < 0`;
//! * every `E(κ,τ)` uses the fibred chart
//!   `g = λ² (dx² + dy²) + (dt + τ λ (y dx − x dy))²`,
//!   `λ = 1 / (1 + κ (x² + y²) / 4)`, with unit Killing field `ξ = ∂t`.
//!   The fibre coordinate `t` is periodic for `S²×S¹` (period
//!   `circle_length`) and for Berger spheres (period `8π|τ|/κ`, the fibre
//!   length). The two `S²` products carry a second chart, related to the
//!   first by the holomorphic inversion of the base, so horizontal slices can
//!   be covered without touching the point at infinity.
//!
//! Metric derivatives come from [`crate::jet`], so Christoffel symbols and the
//! chart curvature tensor are exact to rounding. The closed-form model
//! curvature, Ricci and sectional formulas are kept as an independent route;
//! the test suite checks both against each other.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{Jet, Jet3};

/// Minimum distance, in chart coordinates, kept from any chart singularity.
pub const CHART_GUARD: f64 = 1e-6;

const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmbientError {
    #[error("invalid space descriptor: {0}")]
    InvalidSpace(String),
    #[error("point {coords:?} lies outside chart {chart} (or within the singularity guard)")]
    PointOutsideChart { chart: u8, coords: [f64; 3] },
    #[error("vectors are based at different points")]
    MismatchedBasePoints,
    #[error("vector is not unit length (|X| = {0})")]
    NotUnitVector(f64),
    #[error("space forms carry no unit Killing field")]
    NoKillingField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    SpaceForm,
    ProductS2R,
    ProductS2S1,
    ProductH2R,
    BergerSphere,
    Heisenberg,
    Sl2Universal,
}

impl SpaceKind {
    pub const ALL: [SpaceKind; 7] = [
        SpaceKind::SpaceForm,
        SpaceKind::ProductS2R,
        SpaceKind::ProductS2S1,
        SpaceKind::ProductH2R,
        SpaceKind::BergerSphere,
        SpaceKind::Heisenberg,
        SpaceKind::Sl2Universal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::SpaceForm => "SpaceForm",
            SpaceKind::ProductS2R => "ProductS2R",
            SpaceKind::ProductS2S1 => "ProductS2S1",
            SpaceKind::ProductH2R => "ProductH2R",
            SpaceKind::BergerSphere => "BergerSphere",
            SpaceKind::Heisenberg => "Heisenberg",
            SpaceKind::Sl2Universal => "Sl2Universal",
        }
    }
}

/// Structured-text form of a space: the `[space]` block of a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle_length: Option<f64>,
}

/// A validated ambient space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDescriptor", into = "SpaceDescriptor")]
pub struct AmbientSpace {
    kind: SpaceKind,
    c: f64,
    kappa: f64,
    tau: f64,
    circle_length: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientPoint {
    pub chart_id: u8,
    pub coords: Vector3<f64>,
}

impl AmbientPoint {
    pub fn new(chart_id: u8, coords: [f64; 3]) -> Self {
        Self {
            chart_id,
            coords: Vector3::from(coords),
        }
    }

    pub fn origin() -> Self {
        Self::new(0, [0.0; 3])
    }
}

/// A tangent vector, components in the chart of its base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientVector {
    pub base: AmbientPoint,
    pub components: Vector3<f64>,
}

impl AmbientVector {
    pub fn new(base: AmbientPoint, components: Vector3<f64>) -> Self {
        Self { base, components }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.base, self.components * s)
    }
}

/// Christoffel symbols `Γ^a_{bc}`, stored as `[a][b][c]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel(pub [[[f64; 3]; 3]; 3]);

impl Christoffel {
    /// `Γ(X, Y)^k = Γ^k_{ij} X^i Y^j`.
    pub fn contract(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += self.0[k][i][j] * x[i] * y[j];
                }
            }
            out[k] = s;
        }
        out
    }
}

/// Metric, its inverse, Christoffel symbols and their first derivatives at a
/// point of a chart.
#[derive(Clone, Debug)]
pub struct ChartGeometry {
    pub g: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
    /// `dg[k] = ∂_k g`.
    pub dg: [Matrix3<f64>; 3],
    pub christoffel: Christoffel,
    /// `dchristoffel[e][a][b][c] = ∂_e Γ^a_{bc}`.
    pub dchristoffel: [[[[f64; 3]; 3]; 3]; 3],
}

impl ChartGeometry {
    /// `R^a_{bcd}` with `R(∂_c, ∂_d) ∂_b = R^a_{bcd} ∂_a`.
    pub fn riemann(&self) -> [[[[f64; 3]; 3]; 3]; 3] {
        let gm = &self.christoffel.0;
        let dg = &self.dchristoffel;
        let mut r = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        let mut v = dg[c][a][d][b] - dg[d][a][c][b];
                        for e in 0..3 {
                            v += gm[a][c][e] * gm[e][d][b] - gm[a][d][e] * gm[e][c][b];
                        }
                        r[a][b][c][d] = v;
                    }
                }
            }
        }
        r
    }

    /// `⟨R(X,Y)Z, W⟩` evaluated from the chart connection.
    pub fn curvature(
        &self,
        x: &Vector3<f64>,
        y: &Vector3<f64>,
        z: &Vector3<f64>,
        w: &Vector3<f64>,
    ) -> f64 {
        let r = self.riemann();
        let gw = self.g * w;
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        s += r[a][b][c][d] * x[c] * y[d] * z[b] * gw[a];
                    }
                }
            }
        }
        s
    }
}

impl TryFrom<SpaceDescriptor> for AmbientSpace {
    type Error = AmbientError;

    fn try_from(d: SpaceDescriptor) -> Result<Self, Self::Error> {
        let bad = |m: &str| Err(AmbientError::InvalidSpace(format!("{}: {m}", d.kind.name())));
        let finite = |v: Option<f64>| v.is_none_or(f64::is_finite);
        if !(finite(d.c) && finite(d.kappa) && finite(d.tau) && finite(d.circle_length)) {
            return bad("parameters must be finite");
        }
        if d.kind == SpaceKind::SpaceForm {
            if d.kappa.is_some() || d.tau.is_some() || d.circle_length.is_some() {
                return bad("only `c` applies to a space form");
            }
            let Some(c) = d.c else {
                return bad("missing `c`");
            };
            return Ok(Self {
                kind: d.kind,
                c,
                kappa: 0.0,
                tau: 0.0,
                circle_length: None,
            });
        }
        if d.c.is_some() {
            return bad("`c` applies only to space forms");
        }
        if d.circle_length.is_some() && d.kind != SpaceKind::ProductS2S1 {
            return bad("`circle_length` applies only to ProductS2S1");
        }
        let kappa = d.kappa.unwrap_or(0.0);
        let tau = d.tau.unwrap_or(0.0);
        let ok = match d.kind {
            SpaceKind::ProductS2R | SpaceKind::ProductS2S1 => kappa > 0.0 && tau == 0.0,
            SpaceKind::ProductH2R => kappa < 0.0 && tau == 0.0,
            SpaceKind::BergerSphere => kappa > 0.0 && tau != 0.0,
            SpaceKind::Heisenberg => kappa == 0.0 && tau != 0.0,
            SpaceKind::Sl2Universal => kappa < 0.0 && tau != 0.0,
            SpaceKind::SpaceForm => unreachable!(),
        };
        if !ok {
            return bad(&format!("kappa = {kappa}, tau = {tau} outside the admissible range"));
        }
        let circle_length = if d.kind == SpaceKind::ProductS2S1 {
            match d.circle_length {
                None => Some(std::f64::consts::TAU),
                Some(l) if l > 0.0 => Some(l),
                _ => return bad("circle_length must be positive"),
            }
        } else {
            None
        };
        Ok(Self {
            kind: d.kind,
            c: 0.0,
            kappa,
            tau,
            circle_length,
        })
    }
}

impl From<AmbientSpace> for SpaceDescriptor {
    fn from(s: AmbientSpace) -> Self {
        let bundle = s.kind != SpaceKind::SpaceForm;
        SpaceDescriptor {
            kind: s.kind,
            c: (!bundle).then_some(s.c),
            kappa: bundle.then_some(s.kappa),
            tau: bundle.then_some(s.tau),
            circle_length: s.circle_length,
        }
    }
}

impl AmbientSpace {
    pub fn new(descriptor: SpaceDescriptor) -> Result<Self, AmbientError> {
        Self::try_from(descriptor)
    }

    fn bundle(kind: SpaceKind, kappa: f64, tau: f64, circle_length: Option<f64>) -> Result<Self, AmbientError> {
        Self::try_from(SpaceDescriptor {
            kind,
            c: None,
            kappa: Some(kappa),
            tau: Some(tau),
            circle_length,
        })
    }

    pub fn space_form(c: f64) -> Result<Self, AmbientError> {
        Self::try_from(SpaceDescriptor {
            kind: SpaceKind::SpaceForm,
            c: Some(c),
            kappa: None,
            tau: None,
            circle_length: None,
        })
    }

    pub fn product_s2r(kappa: f64) -> Result<Self, AmbientError> {
        Self::bundle(SpaceKind::ProductS2R, kappa, 0.0, None)
    }

    pub fn product_s2s1(kappa: f64, circle_length: f64) -> Result<Self, AmbientError> {
        Self::bundle(SpaceKind::ProductS2S1, kappa, 0.0, Some(circle_length))
    }

    pub fn product_h2r(kappa: f64) -> Result<Self, AmbientError> {
        Self::bundle(SpaceKind::ProductH2R, kappa, 0.0, None)
    }

    pub fn berger(kappa: f64, tau: f64) -> Result<Self, AmbientError> {
        Self::bundle(SpaceKind::BergerSphere, kappa, tau, None)
    }

    pub fn heisenberg(tau: f64) -> Result<Self, AmbientError> {
        Self::bundle(SpaceKind::Heisenberg, 0.0, tau, None)
    }

    pub fn sl2(kappa: f64, tau: f64) -> Result<Self, AmbientError> {
        Self::bundle(SpaceKind::Sl2Universal, kappa, tau, None)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Space-form curvature (zero for bundle kinds).
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn circle_length(&self) -> Option<f64> {
        self.circle_length
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        self.clone().into()
    }

    /// True for every `E(κ,τ)` kind.
    pub fn has_killing_field(&self) -> bool {
        self.kind != SpaceKind::SpaceForm
    }

    /// Period of the fibre coordinate `t`, when the fibres are circles.
    pub fn fiber_period(&self) -> Option<f64> {
        match self.kind {
            SpaceKind::ProductS2S1 => self.circle_length,
            SpaceKind::BergerSphere => Some(8.0 * PI * self.tau.abs() / self.kappa),
            _ => None,
        }
    }

    pub fn chart_count(&self) -> u8 {
        match self.kind {
            SpaceKind::ProductS2R | SpaceKind::ProductS2S1 => 2,
            _ => 1,
        }
    }

    /// Curvature entering the conformal factor of the chart.
    fn chart_curvature(&self) -> f64 {
        if self.kind == SpaceKind::SpaceForm {
            self.c
        } else {
            self.kappa
        }
    }

    fn conformal_radius2(&self, p: &Vector3<f64>) -> f64 {
        if self.kind == SpaceKind::SpaceForm {
            p.norm_squared()
        } else {
            p.x * p.x + p.y * p.y
        }
    }

    /// Rejects points outside the chart or within [`CHART_GUARD`] of a
    /// coordinate singularity (the boundary of the ball or disk model, or the
    /// point at infinity of a stereographic chart).
    pub fn check_point(&self, p: &AmbientPoint) -> Result<(), AmbientError> {
        let err = || AmbientError::PointOutsideChart {
            chart: p.chart_id,
            coords: [p.coords.x, p.coords.y, p.coords.z],
        };
        if p.chart_id >= self.chart_count() || !p.coords.iter().all(|v| v.is_finite()) {
            return Err(err());
        }
        let k = self.chart_curvature();
        let r = self.conformal_radius2(&p.coords).sqrt();
        if k < 0.0 {
            let boundary = 2.0 / (-k).sqrt();
            if r >= boundary - CHART_GUARD {
                return Err(err());
            }
        } else if k > 0.0 && r >= 1.0 / CHART_GUARD {
            return Err(err());
        }
        Ok(())
    }

    /// Metric components as jets of the chart coordinates.
    pub fn metric_jet<const N: usize>(&self, x: &[Jet<N>; 3]) -> [[Jet<N>; 3]; 3] {
        let zero = Jet::<N>::constant(0.0);
        let mut g = [[zero; 3]; 3];
        if self.kind == SpaceKind::SpaceForm {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let lam = (r2 * (self.c / 4.0) + 1.0).recip();
            let l2 = lam * lam;
            for (i, row) in g.iter_mut().enumerate() {
                row[i] = l2;
            }
            return g;
        }
        let r2 = x[0] * x[0] + x[1] * x[1];
        let lam = (r2 * (self.kappa / 4.0) + 1.0).recip();
        let l2 = lam * lam;
        let theta = [
            lam * x[1] * self.tau,
            lam * x[0] * (-self.tau),
            Jet::<N>::constant(1.0),
        ];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = theta[i] * theta[j];
            }
        }
        g[0][0] = g[0][0] + l2;
        g[1][1] = g[1][1] + l2;
        g
    }

    pub fn metric_at(&self, p: &AmbientPoint) -> Result<Matrix3<f64>, AmbientError> {
        self.check_point(p)?;
        Ok(self.metric_unchecked(&p.coords))
    }

    fn metric_unchecked(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let xs = [
            Jet::<0>::constant(x.x),
            Jet::<0>::constant(x.y),
            Jet::<0>::constant(x.z),
        ];
        let g = self.metric_jet(&xs);
        Matrix3::from_fn(|i, j| g[i][j].v)
    }

    /// Metric, connection and connection derivatives at `p`.
    pub fn chart_geometry(&self, p: &AmbientPoint) -> Result<ChartGeometry, AmbientError> {
        self.check_point(p)?;
        let xs = [
            Jet3::var(p.coords.x, 0),
            Jet3::var(p.coords.y, 1),
            Jet3::var(p.coords.z, 2),
        ];
        let gj = self.metric_jet(&xs);
        let g = Matrix3::from_fn(|i, j| gj[i][j].v);
        let dg: [Matrix3<f64>; 3] = std::array::from_fn(|k| Matrix3::from_fn(|i, j| gj[i][j].d[k]));
        let ddg = |k: usize, l: usize, i: usize, j: usize| gj[i][j].h[k][l];
        let g_inv = g.try_inverse().ok_or(AmbientError::PointOutsideChart {
            chart: p.chart_id,
            coords: [p.coords.x, p.coords.y, p.coords.z],
        })?;
        let dg_inv: [Matrix3<f64>; 3] = std::array::from_fn(|k| -g_inv * dg[k] * g_inv);

        // First-kind symbols Γ_{dbc} = ½(∂_b g_dc + ∂_c g_db − ∂_d g_bc) and their derivatives.
        let first = |d: usize, b: usize, c: usize| 0.5 * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
        let dfirst = |e: usize, d: usize, b: usize, c: usize| {
            0.5 * (ddg(e, b, d, c) + ddg(e, c, d, b) - ddg(e, d, b, c))
        };
        let mut gamma = [[[0.0; 3]; 3]; 3];
        let mut dgamma = [[[[0.0; 3]; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let mut s = 0.0;
                    for d in 0..3 {
                        s += g_inv[(a, d)] * first(d, b, c);
                    }
                    gamma[a][b][c] = s;
                    for e in 0..3 {
                        let mut ds = 0.0;
                        for d in 0..3 {
                            ds += dg_inv[e][(a, d)] * first(d, b, c) + g_inv[(a, d)] * dfirst(e, d, b, c);
                        }
                        dgamma[e][a][b][c] = ds;
                    }
                }
            }
        }
        Ok(ChartGeometry {
            g,
            g_inv,
            dg,
            christoffel: Christoffel(gamma),
            dchristoffel: dgamma,
        })
    }

    pub fn christoffel_at(&self, p: &AmbientPoint) -> Result<Christoffel, AmbientError> {
        Ok(self.chart_geometry(p)?.christoffel)
    }

    fn same_base(vs: &[&AmbientVector]) -> Result<AmbientPoint, AmbientError> {
        let base = vs[0].base;
        if vs.iter().any(|v| v.base != base) {
            return Err(AmbientError::MismatchedBasePoints);
        }
        Ok(base)
    }

    pub fn inner(&self, x: &AmbientVector, y: &AmbientVector) -> Result<f64, AmbientError> {
        let base = Self::same_base(&[x, y])?;
        let g = self.metric_at(&base)?;
        Ok(x.components.dot(&(g * y.components)))
    }

    pub fn norm(&self, x: &AmbientVector) -> Result<f64, AmbientError> {
        Ok(self.inner(x, x)?.sqrt())
    }

    fn require_unit(&self, x: &AmbientVector) -> Result<(), AmbientError> {
        let n = self.norm(x)?;
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(AmbientError::NotUnitVector(n));
        }
        Ok(())
    }

    /// `⟨R̄(X,Y)Z, W⟩` computed from the chart Christoffel symbols.
    pub fn curvature_4tensor(
        &self,
        x: &AmbientVector,
        y: &AmbientVector,
        z: &AmbientVector,
        w: &AmbientVector,
    ) -> Result<f64, AmbientError> {
        let base = Self::same_base(&[x, y, z, w])?;
        let geo = self.chart_geometry(&base)?;
        Ok(geo.curvature(&x.components, &y.components, &z.components, &w.components))
    }

    /// `⟨R̄(X,Y)Z, W⟩` from the invariant closed form of the model space.
    pub fn model_curvature_4tensor(
        &self,
        x: &AmbientVector,
        y: &AmbientVector,
        z: &AmbientVector,
        w: &AmbientVector,
    ) -> Result<f64, AmbientError> {
        let base = Self::same_base(&[x, y, z, w])?;
        let g = self.metric_at(&base)?;
        let ip = |a: &AmbientVector, b: &AmbientVector| a.components.dot(&(g * b.components));
        let form = ip(y, z) * ip(x, w) - ip(x, z) * ip(y, w);
        if self.kind == SpaceKind::SpaceForm {
            return Ok(self.c * form);
        }
        let xi = self.killing_at(&base)?;
        let (k, t2) = (self.kappa, self.tau * self.tau);
        let bundle_term = ip(x, &xi) * ip(z, &xi) * ip(y, w) - ip(y, &xi) * ip(z, &xi) * ip(x, w)
            + ip(x, z) * ip(y, &xi) * ip(&xi, w)
            - ip(y, z) * ip(x, &xi) * ip(&xi, w);
        Ok((k - 3.0 * t2) * form + (k - 4.0 * t2) * bundle_term)
    }

    /// `Ric(X,X)` for a unit vector, from the model formula.
    pub fn ricci_quadratic(&self, x: &AmbientVector) -> Result<f64, AmbientError> {
        self.require_unit(x)?;
        if self.kind == SpaceKind::SpaceForm {
            return Ok(2.0 * self.c);
        }
        let s = self.killing_component(x)?.powi(2);
        let t2 = self.tau * self.tau;
        Ok(self.kappa - 2.0 * t2 + s * (4.0 * t2 - self.kappa))
    }

    /// `Ric(X,X)` as the trace of the chart curvature tensor over an orthonormal frame.
    pub fn ricci_from_curvature(&self, x: &AmbientVector) -> Result<f64, AmbientError> {
        self.require_unit(x)?;
        let geo = self.chart_geometry(&x.base)?;
        let frame = orthonormal_frame(&geo.g);
        Ok(frame
            .iter()
            .map(|e| geo.curvature(e, &x.components, &x.components, e))
            .sum())
    }

    /// Sectional curvature of the plane with unit normal `ν`, from the model formula.
    pub fn sectional(&self, nu: &AmbientVector) -> Result<f64, AmbientError> {
        self.require_unit(nu)?;
        if self.kind == SpaceKind::SpaceForm {
            return Ok(self.c);
        }
        let s = self.killing_component(nu)?.powi(2);
        let t2 = self.tau * self.tau;
        Ok(t2 + s * (self.kappa - 4.0 * t2))
    }

    /// Sectional curvature of the plane with unit normal `ν`, from the chart tensor.
    pub fn sectional_from_curvature(&self, nu: &AmbientVector) -> Result<f64, AmbientError> {
        self.require_unit(nu)?;
        let geo = self.chart_geometry(&nu.base)?;
        let [e1, e2] = plane_basis(&geo.g, &nu.components);
        Ok(geo.curvature(&e1, &e2, &e2, &e1))
    }

    /// The unit Killing field `ξ`.
    pub fn killing_at(&self, p: &AmbientPoint) -> Result<AmbientVector, AmbientError> {
        if !self.has_killing_field() {
            return Err(AmbientError::NoKillingField);
        }
        self.check_point(p)?;
        // ξ = ∂t in both charts; the second chart of the S² products keeps t.
        Ok(AmbientVector::new(*p, Vector3::new(0.0, 0.0, 1.0)))
    }

    /// `⟨X, ξ⟩`.
    pub fn killing_component(&self, x: &AmbientVector) -> Result<f64, AmbientError> {
        let xi = self.killing_at(&x.base)?;
        self.inner(x, &xi)
    }

    /// `∇̄_X ξ` through the chart connection (`ξ` has constant components).
    pub fn killing_derivative(&self, x: &AmbientVector) -> Result<AmbientVector, AmbientError> {
        let xi = self.killing_at(&x.base)?;
        let gamma = self.christoffel_at(&x.base)?;
        Ok(AmbientVector::new(
            x.base,
            gamma.contract(&x.components, &xi.components),
        ))
    }

    /// Vector product for the orientation in which the chart coordinates
    /// `(x, y, t)` are positive; with it `∇̄_X ξ = τ X∧ξ` holds.
    pub fn vector_product(&self, x: &AmbientVector, y: &AmbientVector) -> Result<AmbientVector, AmbientError> {
        let base = Self::same_base(&[x, y])?;
        let g = self.metric_at(&base)?;
        Ok(AmbientVector::new(base, wedge(&g, &x.components, &y.components)))
    }

    /// Lower bound of the sectional curvature over all planes.
    pub fn sectional_lower_bound(&self) -> f64 {
        if self.kind == SpaceKind::SpaceForm {
            return self.c;
        }
        let t2 = self.tau * self.tau;
        t2.min(self.kappa - 3.0 * t2)
    }

    pub fn sectional_upper_bound(&self) -> f64 {
        if self.kind == SpaceKind::SpaceForm {
            return self.c;
        }
        let t2 = self.tau * self.tau;
        t2.max(self.kappa - 3.0 * t2)
    }

    /// Minimum of `Ric(X,X)` over unit vectors.
    pub fn ricci_lower_bound(&self) -> f64 {
        if self.kind == SpaceKind::SpaceForm {
            return 2.0 * self.c;
        }
        let t2 = self.tau * self.tau;
        (self.kappa - 2.0 * t2).min(2.0 * t2)
    }

    /// Re-express `p` in chart `chart`.
    pub fn to_chart(&self, p: &AmbientPoint, chart: u8) -> Result<AmbientPoint, AmbientError> {
        if chart >= self.chart_count() {
            return Err(AmbientError::PointOutsideChart {
                chart,
                coords: [p.coords.x, p.coords.y, p.coords.z],
            });
        }
        if chart == p.chart_id {
            return Ok(*p);
        }
        // Holomorphic inversion of the S² base; an involution.
        let (a, b) = (p.coords.x, p.coords.y);
        let r2 = a * a + b * b;
        let s = 4.0 / (self.kappa * r2);
        let q = AmbientPoint::new(chart, [s * a, -s * b, p.coords.z]);
        self.check_point(&q)?;
        Ok(q)
    }

    /// Coordinate difference `q − p` in the chart of `p`, with the fibre
    /// coordinate wrapped to the nearest representative.
    pub fn chart_delta(&self, p: &AmbientPoint, q: &AmbientPoint) -> Result<Vector3<f64>, AmbientError> {
        let q = self.to_chart(q, p.chart_id)?;
        let mut delta = q.coords - p.coords;
        if let Some(period) = self.fiber_period() {
            delta.z -= period * (delta.z / period).round();
        }
        Ok(delta)
    }

    /// Length of the coordinate segment from `p` to `q` in the chart of `p`,
    /// with the fibre coordinate wrapped to the nearest representative.
    pub fn chord_length(&self, p: &AmbientPoint, q: &AmbientPoint) -> Result<f64, AmbientError> {
        self.check_point(p)?;
        let delta = self.chart_delta(p, q)?;
        // Three-point Gauss-Legendre on [0, 1].
        const NODES: [(f64, f64); 3] = [
            (0.112_701_665_379_258_3, 5.0 / 18.0),
            (0.5, 8.0 / 18.0),
            (0.887_298_334_620_741_7, 5.0 / 18.0),
        ];
        let mut len = 0.0;
        for (s, w) in NODES {
            let x = p.coords + delta * s;
            let g = self.metric_unchecked(&x);
            len += w * delta.dot(&(g * delta)).sqrt();
        }
        Ok(len)
    }

    /// Coordinates in a fixed Euclidean report frame, used for mesh export.
    ///
    /// Space forms and the non-product bundles report chart coordinates. The
    /// `S²` products map `(ω, t)` to `e^{√κ t} ω / √κ`, a global embedding of
    /// `S²×ℝ` (for `S²×S¹`, `t` is first reduced modulo the circle length).
    pub fn report_frame(&self, p: &AmbientPoint) -> [f64; 3] {
        match self.kind {
            SpaceKind::ProductS2R | SpaceKind::ProductS2S1 => {
                let sk = self.kappa.sqrt();
                let (y1, y2) = (0.5 * sk * p.coords.x, 0.5 * sk * p.coords.y);
                let r2 = y1 * y1 + y2 * y2;
                let omega = if p.chart_id == 0 {
                    [2.0 * y1, 2.0 * y2, r2 - 1.0]
                } else {
                    [2.0 * y1, -2.0 * y2, 1.0 - r2]
                };
                let mut t = p.coords.z;
                if let Some(period) = self.fiber_period() {
                    t = t.rem_euclid(period);
                }
                let scale = (sk * t).exp() / (sk * (1.0 + r2));
                omega.map(|w| w * scale)
            }
            _ => [p.coords.x, p.coords.y, p.coords.z],
        }
    }
}

/// `X∧Y` for metric `g`: the vector `Z` with `⟨Z, W⟩ = vol(X, Y, W)`.
pub fn wedge(g: &Matrix3<f64>, x: &Vector3<f64>, y: &Vector3<f64>) -> Vector3<f64> {
    let sqrt_det = g.determinant().sqrt();
    let covector = x.cross(y) * sqrt_det;
    g.try_inverse().unwrap_or_else(Matrix3::zeros) * covector
}

/// Gram-Schmidt of the coordinate basis with respect to `g`.
pub fn orthonormal_frame(g: &Matrix3<f64>) -> [Vector3<f64>; 3] {
    let mut out: [Vector3<f64>; 3] = [Vector3::x(), Vector3::y(), Vector3::z()];
    for i in 0..3 {
        let mut v = out[i];
        for j in 0..i {
            let proj = v.dot(&(g * out[j]));
            v -= out[j] * proj;
        }
        let n = v.dot(&(g * v)).sqrt();
        out[i] = v / n;
    }
    out
}

/// A `g`-orthonormal basis of the plane `ν^⊥`.
pub fn plane_basis(g: &Matrix3<f64>, nu: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let gnu = g * nu;
    let mut basis = Vec::with_capacity(2);
    for seed in [Vector3::x(), Vector3::y(), Vector3::z()] {
        let mut v = seed - nu * seed.dot(&gnu);
        for b in &basis {
            let b: &Vector3<f64> = b;
            v -= b * v.dot(&(g * b));
        }
        let n = v.dot(&(g * v)).sqrt();
        if n > 1e-6 {
            basis.push(v / n);
        }
        if basis.len() == 2 {
            break;
        }
    }
    [basis[0], basis[1]]
}
