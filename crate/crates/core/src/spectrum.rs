//! Discrete Jacobi operator and its lowest eigenpairs.
//!
//! P1 elements with cotangent stiffness `L` (discretizing `−Δ`), lumped mass
//! `M` and vertex-sampled potential `Q = M diag(q)`. Eigenvalues follow the
//! convention `J f + λ f = 0`, i.e. `(L − Q) x = λ M x`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, FillInReduction, TriMat};
use sprs_ldl::Ldl;
use thiserror::Error;

use crate::mesh::{corner_cotangents, GeometryMesh};

pub const CONVENTION: &str = "Jf+lambda f=0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("mesh is disconnected")]
    DisconnectedMesh,
    #[error("non-positive mass entry {value} at vertex {vertex}")]
    NegativeMassEntry { vertex: usize, value: f64 },
    #[error("solver did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    SolverNoConvergence { iterations: usize, best_residual: f64 },
    #[error("shift {shift} is not below the spectrum (factorization is indefinite)")]
    IndefiniteShift { shift: f64 },
    #[error("first eigenfunction changes sign; the mesh is likely too coarse")]
    IndefiniteFirstEigenfunction,
    #[error("test function is zero")]
    ZeroFunction,
    #[error("eigenfunction is not strictly positive")]
    NonPositiveEigenfunction,
    #[error("mean curvature is not constant (deviation {0:.3e})")]
    NonConstantH(f64),
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

#[derive(Clone, Debug)]
pub struct DiscreteJacobi {
    pub stiffness: CsMat<f64>,
    pub mass: Vec<f64>,
    /// Vertex potential `q = |A|² + Ric(N,N)`; `Q = M diag(q)`.
    pub potential: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    /// `σ = −max q − 1`, strictly below every eigenvalue.
    Safe,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub shift: ShiftPolicy,
    pub seed: u64,
    pub require_positive_rho: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            k: 5,
            tol: 1e-10,
            max_iter: 500,
            shift: ShiftPolicy::Safe,
            seed: 0,
            require_positive_rho: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    #[serde(rename = "lambda")]
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenfunctions: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub alpha: Option<f64>,
    pub rho_positive: bool,
    pub iterations: usize,
    pub shift: f64,
    pub convention: &'static str,
}

impl SpectrumResult {
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn rho(&self) -> &[f64] {
        &self.eigenfunctions[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        }
    }
}

pub fn assemble_jacobi(mesh: &GeometryMesh) -> Result<DiscreteJacobi, SpectrumError> {
    let q = mesh.vertices.iter().map(|v| v.geometry.q).collect();
    assemble_with_potential(mesh, q)
}

/// Assembly with an explicit vertex potential.
pub fn assemble_with_potential(mesh: &GeometryMesh, potential: Vec<f64>) -> Result<DiscreteJacobi, SpectrumError> {
    if !mesh.is_connected() {
        return Err(SpectrumError::DisconnectedMesh);
    }
    let n = mesh.len();
    let mass = mesh.vertex_areas();
    if let Some((vertex, &value)) = mass.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
        return Err(SpectrumError::NegativeMassEntry { vertex, value });
    }
    let mut tri = TriMat::with_capacity((n, n), 9 * mesh.triangles.len());
    for ((t, l), &area) in mesh.triangles.iter().zip(&mesh.edge_lengths).zip(&mesh.triangle_areas) {
        if !(area > 0.0) {
            return Err(SpectrumError::NegativeMassEntry {
                vertex: t[0],
                value: area,
            });
        }
        let cot = corner_cotangents(l, area);
        for k in 0..3 {
            let (i, j) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            let w = 0.5 * cot[k];
            tri.add_triplet(i, j, -w);
            tri.add_triplet(j, i, -w);
            tri.add_triplet(i, i, w);
            tri.add_triplet(j, j, w);
        }
    }
    Ok(DiscreteJacobi {
        stiffness: tri.to_csr(),
        mass,
        potential,
    })
}

impl DiscreteJacobi {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `(L − Q) x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, row) in self.stiffness.outer_iterator().enumerate() {
            let mut s = 0.0;
            for (j, v) in row.iter() {
                s += v * x[j];
            }
            y[i] = s - self.mass[i] * self.potential[i] * x[i];
        }
        y
    }

    pub fn mass_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    /// `L − Q − σM` as a sparse matrix.
    fn shifted(&self, sigma: f64) -> CsMat<f64> {
        let n = self.len();
        let diag: Vec<f64> = (0..n).map(|i| -self.mass[i] * (self.potential[i] + sigma)).collect();
        let d = CsMat::new_csc((n, n), (0..=n).collect(), (0..n).collect(), diag).to_csr();
        &self.stiffness + &d
    }

    /// Dense `L − Q`.
    pub fn dense_operator(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for (i, row) in self.stiffness.outer_iterator().enumerate() {
            for (j, v) in row.iter() {
                a[(i, j)] += v;
            }
            a[(i, i)] -= self.mass[i] * self.potential[i];
        }
        a
    }
}

/// All eigenvalues, ascending, from a dense decomposition of
/// `M^{-1/2} (L − Q) M^{-1/2}`.
pub fn dense_eigenvalues(op: &DiscreteJacobi) -> Vec<f64> {
    let s: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = op.dense_operator();
    let b = DMatrix::from_fn(op.len(), op.len(), |i, j| s[i] * a[(i, j)] * s[j]);
    let mut ev: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `‖r‖` in the `M⁻¹` norm, the dual of the `M` norm of eigenvectors.
fn dual_norm(r: &[f64], mass: &[f64]) -> f64 {
    r.iter().zip(mass).map(|(v, m)| v * v / m).sum::<f64>().sqrt()
}

fn m_orthonormalize(cols: &mut [Vec<f64>], op: &DiscreteJacobi, rng: &mut ChaCha8Rng) {
    for i in 0..cols.len() {
        for attempt in 0..3 {
            for _ in 0..2 {
                for j in 0..i {
                    let p = op.mass_dot(&cols[i], &cols[j]);
                    let (head, tail) = cols.split_at_mut(i);
                    for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                        *x -= p * y;
                    }
                }
            }
            let nrm = op.mass_dot(&cols[i], &cols[i]).sqrt();
            if nrm > 1e-12 || attempt == 2 {
                cols[i].iter_mut().for_each(|x| *x /= nrm);
                break;
            }
            cols[i].iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
    }
}

/// The `k` smallest eigenpairs of `(L − Q) x = λ M x` by shift-invert block
/// iteration with Rayleigh-Ritz projection.
pub fn lowest_eigenpairs(op: &DiscreteJacobi, opts: &SolverOptions) -> Result<SpectrumResult, SpectrumError> {
    let n = op.len();
    if opts.k == 0 || opts.k > n {
        return Err(SpectrumError::InvalidOption(format!("k = {} for {n} vertices", opts.k)));
    }
    if !(opts.tol > 0.0) {
        return Err(SpectrumError::InvalidOption(format!("tol = {}", opts.tol)));
    }
    let qmax = op.potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sigma = match opts.shift {
        ShiftPolicy::Safe => -qmax - 1.0,
        ShiftPolicy::Fixed(s) => s,
    };
    let shifted = op.shifted(sigma);
    let ldl = Ldl::new()
        .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
        .numeric(shifted.view())
        .map_err(|_| SpectrumError::IndefiniteShift { shift: sigma })?;
    if ldl.d().iter().any(|d| !(*d > 0.0)) {
        return Err(SpectrumError::IndefiniteShift { shift: sigma });
    }

    let k = opts.k;
    let p = n.min((2 * k).max(k + 8));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            if j == 0 {
                vec![1.0; n]
            } else {
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
            }
        })
        .collect();
    m_orthonormalize(&mut x, op, &mut rng);

    let mut best = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let mut y: Vec<Vec<f64>> = x
            .iter()
            .map(|col| {
                let rhs: Vec<f64> = col.iter().zip(&op.mass).map(|(v, m)| v * m).collect();
                ldl.solve(&rhs)
            })
            .collect();
        m_orthonormalize(&mut y, op, &mut rng);
        let ay: Vec<Vec<f64>> = y.iter().map(|c| op.apply(c)).collect();
        let proj = DMatrix::from_fn(p, p, |i, j| {
            0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i]))
        });
        let eig = SymmetricEigen::new(proj);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let combine = |basis: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (r, b) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(r, col)];
                for (o, v) in out.iter_mut().zip(b) {
                    *o += c * v;
                }
            }
            out
        };
        x = order.iter().map(|&i| combine(&y, i)).collect();
        let ax: Vec<Vec<f64>> = order.iter().take(k).map(|&i| combine(&ay, i)).collect();
        let residuals: Vec<f64> = (0..k)
            .map(|i| {
                let r: Vec<f64> = ax[i]
                    .iter()
                    .zip(&x[i])
                    .zip(&op.mass)
                    .map(|((a, v), m)| a - theta[i] * m * v)
                    .collect();
                dual_norm(&r, &op.mass)
            })
            .collect();
        let worst = residuals
            .iter()
            .zip(&theta)
            .map(|(r, t)| r / t.abs().max(1.0))
            .fold(0.0, f64::max);
        best = best.min(worst);
        if worst < opts.tol {
            let mut funcs: Vec<Vec<f64>> = x.into_iter().take(k).collect();
            let first = &mut funcs[0];
            let peak = first.iter().copied().fold(0.0, |a: f64, v| if v.abs() > a.abs() { v } else { a });
            if peak < 0.0 {
                first.iter_mut().for_each(|v| *v = -*v);
            }
            let rho_positive = first.iter().all(|v| *v > 0.0);
            if opts.require_positive_rho && !rho_positive {
                return Err(SpectrumError::IndefiniteFirstEigenfunction);
            }
            return Ok(SpectrumResult {
                eigenvalues: theta[..k].to_vec(),
                eigenfunctions: funcs,
                residuals,
                alpha: None,
                rho_positive,
                iterations: iter,
                shift: sigma,
                convention: CONVENTION,
            });
        }
    }
    Err(SpectrumError::SolverNoConvergence {
        iterations: opts.max_iter,
        best_residual: best,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Assembles, solves and attaches `α` from the first eigenfunction.
pub fn analyze(mesh: &GeometryMesh, opts: &SolverOptions) -> Result<(DiscreteJacobi, SpectrumResult), SpectrumError> {
    let op = assemble_jacobi(mesh)?;
    let mut spec = lowest_eigenpairs(&op, opts)?;
    if spec.rho_positive {
        spec.alpha = Some(alpha_invariant(mesh, spec.rho())?);
    }
    Ok((op, spec))
}

/// `(fᵀ(L − Q)f) / (fᵀ M f)`.
pub fn rayleigh_quotient(op: &DiscreteJacobi, f: &[f64]) -> Result<f64, SpectrumError> {
    let den = op.mass_dot(f, f);
    if !(den > 0.0) {
        return Err(SpectrumError::ZeroFunction);
    }
    Ok(dot(f, &op.apply(f)) / den)
}

/// `α = ∫ ρ⁻² |∇ρ|²` with the P1 gradient and the face-averaged `ρ`.
pub fn alpha_invariant(mesh: &GeometryMesh, rho: &[f64]) -> Result<f64, SpectrumError> {
    if rho.iter().any(|r| !(*r > 0.0)) {
        return Err(SpectrumError::NonPositiveEigenfunction);
    }
    let mut alpha = 0.0;
    for ((t, l), &area) in mesh.triangles.iter().zip(&mesh.edge_lengths).zip(&mesh.triangle_areas) {
        let cot = corner_cotangents(l, area);
        let mut grad2 = 0.0;
        for k in 0..3 {
            let d = rho[t[(k + 1) % 3]] - rho[t[(k + 2) % 3]];
            grad2 += 0.5 * cot[k] * d * d;
        }
        let mean = (rho[t[0]] + rho[t[1]] + rho[t[2]]) / 3.0;
        alpha += grad2 / (mean * mean);
    }
    Ok(alpha)
}

/// Both sides of the first-eigenvalue identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lambda1: f64,
    /// `−4H² − (α + 8π(g−1) + ∫(2K̄_Σ + Ric(N,N))) / Area`.
    pub general_rhs: f64,
    /// `−4H² − κ − (α + 8π(g−1) + (κ−4τ²)∫⟨N,ξ⟩²) / Area`, in `E(κ,τ)`.
    pub homogeneous_rhs: Option<f64>,
    pub residual: f64,
}

/// `|λ₁ − RHS|` for the first-eigenvalue identity of a CMC mesh.
pub fn lambda1_identity_residual(
    mesh: &GeometryMesh,
    spec: &SpectrumResult,
    cmc_tol: f64,
) -> Result<IdentityReport, SpectrumError> {
    let dev = mesh.cmc_deviation();
    if dev > cmc_tol {
        return Err(SpectrumError::NonConstantH(dev));
    }
    let alpha = match spec.alpha {
        Some(a) => a,
        None => alpha_invariant(mesh, spec.rho())?,
    };
    let h = mesh.mean_h();
    let area = mesh.area;
    let topo = 8.0 * PI * (mesh.genus as f64 - 1.0);
    let curv = mesh.integrate(|g| 2.0 * g.sectional + g.ricci);
    let general_rhs = -4.0 * h * h - (alpha + topo + curv) / area;
    let space = &mesh.space;
    let homogeneous_rhs = space.has_killing_field().then(|| {
        let (k, t2) = (space.kappa(), space.tau() * space.tau());
        let nxi2 = mesh.integrate(|g| g.nxi.unwrap_or(0.0).powi(2));
        -4.0 * h * h - k - (alpha + topo + (k - 4.0 * t2) * nxi2) / area
    });
    let lambda1 = spec.lambda1();
    Ok(IdentityReport {
        lambda1,
        general_rhs,
        homogeneous_rhs,
        residual: (lambda1 - general_rhs).abs(),
    })
}

/// Stable if `λ₁ > tol`, unstable if `λ₁ < −tol`, marginal otherwise.
pub fn is_strongly_stable(spec: &SpectrumResult, tol: f64) -> Stability {
    stability_of(spec.lambda1(), tol)
}

pub fn stability_of(lambda1: f64, tol: f64) -> Stability {
    if lambda1 > tol {
        Stability::Stable
    } else if lambda1 < -tol {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}
