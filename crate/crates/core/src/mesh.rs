//! Closed triangle meshes carrying per-vertex surface geometry.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::ambient::AmbientSpace;
use crate::surface::{Immersion, ParamPoint, PointGeometry, SurfaceError, Topology};

#[derive(Clone, Debug)]
pub struct MeshVertex {
    pub param: ParamPoint,
    pub geometry: PointGeometry,
}

#[derive(Clone, Debug)]
pub struct GeometryMesh {
    pub space: AmbientSpace,
    pub label: String,
    pub cmc: bool,
    pub vertices: Vec<MeshVertex>,
    pub triangles: Vec<[usize; 3]>,
    /// `edge_lengths[t][k]`: length of the side opposite corner `k`.
    pub edge_lengths: Vec<[f64; 3]>,
    pub triangle_areas: Vec<f64>,
    pub area: f64,
    pub chi: i64,
    pub genus: i64,
}

/// Triangle area from side lengths, in the numerically stable ordering.
pub fn heron(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * p.max(0.0).sqrt()
}

/// Cotangents of the three corner angles of a triangle with the given
/// opposite side lengths.
pub fn corner_cotangents(l: &[f64; 3], area: f64) -> [f64; 3] {
    let sq = l.map(|x| x * x);
    std::array::from_fn(|k| (sq[(k + 1) % 3] + sq[(k + 2) % 3] - sq[k]) / (4.0 * area))
}

fn corner_angles(l: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| {
        let (a, b, c) = (l[(k + 1) % 3], l[(k + 2) % 3], l[k]);
        ((a * a + b * b - c * c) / (2.0 * a * b)).clamp(-1.0, 1.0).acos()
    })
}

/// Uniform periodic grid on a torus, each cell split along its diagonal.
pub fn torus_grid(nu: usize, nv: usize, u_period: f64, v_period: f64) -> (Vec<ParamPoint>, Vec<[usize; 3]>) {
    let mut params = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            params.push(ParamPoint::Grid {
                u: u_period * i as f64 / nu as f64,
                v: v_period * j as f64 / nv as f64,
            });
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (params, tris)
}

/// Icosahedron subdivided `level` times, vertices projected to the unit sphere.
pub fn icosphere(level: u32) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    (verts, tris)
}

impl GeometryMesh {
    /// Builds a mesh from parameter samples and triangles, evaluating the
    /// immersion at every vertex and checking closedness and orientation.
    pub fn build(imm: &Immersion, params: Vec<ParamPoint>, mut triangles: Vec<[usize; 3]>) -> Result<Self, SurfaceError> {
        let space = imm.space().clone();
        let vertices = params
            .par_iter()
            .map(|p| {
                let geometry = imm.geometry(p)?;
                space.check_point(&geometry.point)?;
                Ok(MeshVertex { param: *p, geometry })
            })
            .collect::<Result<Vec<_>, SurfaceError>>()?;
        let chi = check_closed(vertices.len(), &triangles)?;

        // Align triangle winding with the normal field.
        let mut positive = 0usize;
        for t in &triangles {
            let g0 = &vertices[t[0]].geometry;
            let d1 = space.chart_delta(&g0.point, &vertices[t[1]].geometry.point)?;
            let d2 = space.chart_delta(&g0.point, &vertices[t[2]].geometry.point)?;
            let gn = space.metric_at(&g0.point)? * g0.normal.components;
            if d1.cross(&d2).dot(&gn) > 0.0 {
                positive += 1;
            }
        }
        if positive == 0 {
            for t in &mut triangles {
                t.swap(1, 2);
            }
        } else if positive != triangles.len() {
            return Err(SurfaceError::InconsistentOrientation);
        }

        let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
        let mut edge_lengths = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let mut l = [0.0; 3];
            for k in 0..3 {
                let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                l[k] = match cache.get(&key) {
                    Some(v) => *v,
                    None => {
                        let v = space.chord_length(&vertices[key.0].geometry.point, &vertices[key.1].geometry.point)?;
                        cache.insert(key, v);
                        v
                    }
                };
            }
            edge_lengths.push(l);
        }
        let triangle_areas: Vec<f64> = edge_lengths.iter().map(|l| heron(l[0], l[1], l[2])).collect();
        let area = triangle_areas.iter().sum();
        Ok(Self {
            space,
            label: imm.name().to_string(),
            cmc: imm.is_cmc(),
            vertices,
            triangles,
            edge_lengths,
            triangle_areas,
            area,
            chi,
            genus: 1 - chi / 2,
        })
    }

    /// Torus tessellation on an `nu × nv` periodic grid.
    pub fn tessellate(imm: &Immersion, nu: usize, nv: usize) -> Result<Self, SurfaceError> {
        let Topology::Torus { u_period, v_period } = imm.topology() else {
            return Err(SurfaceError::InvalidParameter("grid tessellation needs a torus".into()));
        };
        if nu < 8 || nv < 8 {
            return Err(SurfaceError::InvalidParameter(format!("grid {nu}x{nv} below 8x8")));
        }
        let (params, tris) = torus_grid(nu, nv, u_period, v_period);
        Self::build(imm, params, tris)
    }

    /// Sphere tessellation by icosahedral subdivision.
    pub fn tessellate_sphere(imm: &Immersion, level: u32) -> Result<Self, SurfaceError> {
        if imm.topology() != Topology::Sphere {
            return Err(SurfaceError::InvalidParameter("icosphere tessellation needs a sphere".into()));
        }
        let (dirs, tris) = icosphere(level);
        let params = dirs.into_iter().map(|dir| ParamPoint::Sphere { dir }).collect();
        Self::build(imm, params, tris)
    }

    /// Grid size `resolution × resolution` for tori, subdivision level for spheres.
    pub fn from_resolution(imm: &Immersion, resolution: u32) -> Result<Self, SurfaceError> {
        match imm.topology() {
            Topology::Torus { .. } => Self::tessellate(imm, resolution as usize, resolution as usize),
            Topology::Sphere => Self::tessellate_sphere(imm, resolution),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Barycentric lumped vertex areas.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.len()];
        for (t, a) in self.triangles.iter().zip(&self.triangle_areas) {
            for &i in t {
                m[i] += a / 3.0;
            }
        }
        m
    }

    pub fn area_and_genus(&self) -> (f64, i64) {
        (self.area, self.genus)
    }

    /// Lumped quadrature of a per-vertex quantity.
    pub fn integrate(&self, f: impl Fn(&PointGeometry) -> f64) -> f64 {
        self.vertex_areas()
            .iter()
            .zip(&self.vertices)
            .map(|(m, v)| m * f(&v.geometry))
            .sum()
    }

    pub fn mean_h(&self) -> f64 {
        self.vertices.iter().map(|v| v.geometry.h).sum::<f64>() / self.len() as f64
    }

    /// `max |H − H̄| / (1 + |H̄|)`.
    pub fn cmc_deviation(&self) -> f64 {
        let hbar = self.mean_h();
        self.vertices
            .iter()
            .map(|v| (v.geometry.h - hbar).abs())
            .fold(0.0, f64::max)
            / (1.0 + hbar.abs())
    }

    /// `|∫ K dA − 2πχ|` with the Gauss-equation curvature.
    pub fn gauss_bonnet_residual(&self) -> f64 {
        (self.integrate(|g| g.k) - 2.0 * PI * self.chi as f64).abs()
    }

    /// Discrete Gauss curvature `(2π − Σθ) / M_ii` from angle defects.
    pub fn angle_defect_curvature(&self) -> Vec<f64> {
        let mut defect = vec![2.0 * PI; self.len()];
        for (t, l) in self.triangles.iter().zip(&self.edge_lengths) {
            let ang = corner_angles(l);
            for k in 0..3 {
                defect[t[k]] -= ang[k];
            }
        }
        defect.iter().zip(self.vertex_areas()).map(|(d, m)| d / m).collect()
    }

    /// Smallest corner angle in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        self.edge_lengths
            .iter()
            .flat_map(corner_angles)
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for t in &self.triangles {
            for k in 0..3 {
                adj[t[k]].push(t[(k + 1) % 3]);
                adj[t[(k + 1) % 3]].push(t[k]);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }

    /// OFF text with vertices in the report frame of the ambient space.
    pub fn to_off(&self, header: &[String]) -> String {
        let mut s = String::from("OFF\n");
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        let _ = writeln!(s, "{} {} 0", self.len(), self.triangles.len());
        for v in &self.vertices {
            let p = self.space.report_frame(&v.geometry.point);
            let _ = writeln!(s, "{:.12} {:.12} {:.12}", p[0], p[1], p[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    /// Per-vertex CSV sidecar; `extra` adds a named column (e.g. an eigenfunction).
    pub fn sidecar_csv(&self, header: &[String], extra: Option<(&str, &[f64])>) -> String {
        let mut s = String::new();
        for h in header {
            let _ = writeln!(s, "# {h}");
        }
        s.push_str("vertex,H,A_norm2,phi_norm2,nxi,K,q");
        if let Some((name, _)) = extra {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for (i, v) in self.vertices.iter().enumerate() {
            let g = &v.geometry;
            let nxi = g.nxi.map_or(String::new(), |x| format!("{x:.12e}"));
            let _ = write!(
                s,
                "{i},{:.12e},{:.12e},{:.12e},{nxi},{:.12e},{:.12e}",
                g.h, g.a_norm2, g.phi_norm2, g.k, g.q
            );
            if let Some((_, col)) = extra {
                let _ = write!(s, ",{:.12e}", col[i]);
            }
            s.push('\n');
        }
        s
    }
}

/// Every directed edge must appear once and its reverse once. Returns `χ`.
fn check_closed(n: usize, triangles: &[[usize; 3]]) -> Result<i64, SurfaceError> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let e = (t[k], t[(k + 1) % 3]);
            if e.0 >= n || e.1 >= n || e.0 == e.1 {
                return Err(SurfaceError::NonClosedMesh(format!("bad edge {e:?}")));
            }
            *directed.entry(e).or_default() += 1;
        }
    }
    for (&(a, b), &count) in &directed {
        if count != 1 || directed.get(&(b, a)) != Some(&1) {
            return Err(SurfaceError::NonClosedMesh(format!("edge ({a}, {b}) not shared by exactly two triangles")));
        }
    }
    let edges = directed.len() / 2;
    let chi = n as i64 - edges as i64 + triangles.len() as i64;
    if chi % 2 != 0 || chi > 2 {
        return Err(SurfaceError::NonClosedMesh(format!("odd or invalid Euler characteristic {chi}")));
    }
    Ok(chi)
}
