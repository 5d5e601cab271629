//! Error measures for manufactured solutions: Bochner norms in space-time,
//! the V-energy flux error, the dual-norm bound of the time derivative,
//! errors against L²-projected references, and EOCs.

use rayon::prelude::*;

use crate::bem::{self, BemSpacePair};
use crate::fem::{self, barycentric_gradients, Diffusion, L2Projector};
use crate::linalg::{BandedLu, DenseMatrix, SparseMatrix};
use crate::mesh::{BoundaryMesh, Point2};
use crate::quadrature::{GaussLegendre, TriangleRule};
use crate::timestep::{CoupledTrajectory, Discretization, QuadratureConfig};
use crate::{Error, Result};
use std::sync::Arc;

/// Exact solution of a manufactured interface problem.
pub trait ExactSolution: Send + Sync {
    /// Interior solution `u`.
    fn u(&self, p: Point2, t: f64) -> f64;
    fn grad_u(&self, p: Point2, t: f64) -> Point2;
    fn dt_u(&self, p: Point2, t: f64) -> f64;
    /// Exterior solution `u_e`.
    fn exterior(&self, p: Point2, t: f64) -> f64;
    /// Exterior flux `φ = ∂_n u_e` for the outward normal `n` of Ω.
    fn flux(&self, p: Point2, n: Point2, t: f64) -> f64;
}

/// Spatial norm in a Bochner error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1Semi,
}

/// Errors of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelErrors {
    pub inv_h: f64,
    pub n_intervals: usize,
    pub l2: f64,
    pub l2_proj: f64,
    pub h1semi: f64,
    pub h1semi_proj: f64,
    pub h1dual: f64,
    pub energy_v: f64,
    pub energy_v_proj: f64,
    pub global_energy: f64,
    pub global_energy_proj: f64,
}

impl LevelErrors {
    /// Fills the two aggregate columns from the components.
    pub fn with_aggregates(mut self) -> Self {
        self.global_energy =
            (self.l2.powi(2) + self.h1semi.powi(2) + self.h1dual.powi(2)).sqrt() + self.energy_v;
        self.global_energy_proj = (self.l2_proj.powi(2)
            + self.h1semi_proj.powi(2)
            + self.h1dual.powi(2))
        .sqrt()
            + self.energy_v_proj;
        self
    }
}

/// Precomputed operators for measuring errors on one level.
pub struct ErrorMeasure<'a> {
    disc: &'a Discretization,
    quad: QuadratureConfig,
    rule: TriangleRule,
    edge_rule: GaussLegendre,
    projector: L2Projector,
    unit_stiffness: SparseMatrix,
    auxiliary: BandedLu,
    fine: BoundaryMesh,
    fine_single_layer: DenseMatrix,
    parts: usize,
}

/// Accumulates `Σ_n Σ_q w_q · f(n, t_q)` over the trajectory's time grid.
fn time_integral(
    traj: &CoupledTrajectory,
    quad: QuadratureConfig,
    mut f: impl FnMut(usize, f64) -> Result<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for n in 1..=traj.grid.n_steps() {
        for (t, w) in quad.time.rule(&traj.grid, n) {
            total += w * f(n, t)?;
        }
    }
    Ok(total)
}

impl<'a> ErrorMeasure<'a> {
    /// `refine_extra` is the number of bisections of each boundary segment
    /// used for the V-energy reference (≥ 1).
    pub fn new(disc: &'a Discretization, quad: QuadratureConfig, refine_extra: usize) -> Result<Self> {
        if refine_extra == 0 {
            return Err(Error::InvalidInput("V-energy reference needs refine_extra ≥ 1".into()));
        }
        let projector = L2Projector::new(&disc.space, quad.space)?;
        let unit_stiffness = fem::assemble_stiffness(&disc.space, &Diffusion::Constant(1.0))?;
        let auxiliary = unit_stiffness
            .linear_combination(1.0, projector.mass(), 1.0)
            .factorize()?;
        let fine = disc.pair.boundary().subdivided(refine_extra);
        let fine_single_layer =
            bem::assemble_single_layer(&BemSpacePair::new(Arc::new(fine.clone())))?;
        Ok(Self {
            disc,
            quad,
            rule: TriangleRule::with_degree(quad.space.volume_degree)?,
            edge_rule: GaussLegendre::new(quad.space.edge_points.max(1)),
            projector,
            unit_stiffness,
            auxiliary,
            fine,
            fine_single_layer,
            parts: 1 << refine_extra,
        })
    }

    fn spatial_error_squared(&self, exact: &dyn ExactSolution, coeffs: &[f64], t: f64, kind: NormKind) -> f64 {
        let mesh = self.disc.mesh();
        let per_triangle: Vec<f64> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|tri| {
                let p = mesh.triangle_points(tri);
                let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
                let v = mesh.triangles()[tri];
                let local = [coeffs[v[0]], coeffs[v[1]], coeffs[v[2]]];
                let grad_h = match kind {
                    NormKind::H1Semi => {
                        let g = barycentric_gradients(&p);
                        g[0] * local[0] + g[1] * local[1] + g[2] * local[2]
                    }
                    NormKind::L2 => Point2::default(),
                };
                self.rule
                    .points()
                    .iter()
                    .map(|(l, w)| {
                        let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
                        let e = match kind {
                            NormKind::L2 => {
                                let uh = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
                                (exact.u(x, t) - uh).powi(2)
                            }
                            NormKind::H1Semi => {
                                let d = exact.grad_u(x, t) - grad_h;
                                d.dot(d)
                            }
                        };
                        w * area * e
                    })
                    .sum()
            })
            .collect();
        per_triangle.iter().sum()
    }

    /// `(∫₀ᵀ ‖u − u_{h,τ}‖² dt)^{1/2}` for the chosen spatial norm.
    pub fn bochner_error(&self, traj: &CoupledTrajectory, exact: &dyn ExactSolution, kind: NormKind) -> Result<f64> {
        let total = time_integral(traj, self.quad, |n, t| {
            Ok(self.spatial_error_squared(exact, &traj.u_on_interval(n, t), t, kind))
        })?;
        Ok(total.max(0.0).sqrt())
    }

    fn segment_means(&self, boundary: &BoundaryMesh, exact: &dyn ExactSolution, t: f64) -> Vec<f64> {
        boundary
            .segments()
            .iter()
            .zip(boundary.normals())
            .map(|(seg, &n)| {
                self.edge_rule
                    .on_interval(0.0, 1.0)
                    .map(|(s, w)| w * exact.flux(seg.point_at(s), n, t))
                    .sum()
            })
            .collect()
    }

    /// `(∫₀ᵀ ⟨V e, e⟩ dt)^{1/2}` with `e = φ − φ_{h,τ}` represented on the
    /// subdivided boundary.
    pub fn v_energy_error(&self, traj: &CoupledTrajectory, exact: &dyn ExactSolution) -> Result<f64> {
        let total = time_integral(traj, self.quad, |n, t| {
            let phi_h = &traj.phi[n - 1];
            let e: Vec<f64> = self
                .segment_means(&self.fine, exact, t)
                .into_iter()
                .enumerate()
                .map(|(k, mean)| mean - phi_h[k / self.parts])
                .collect();
            Ok(self.fine_single_layer.quadratic_form(&e))
        })?;
        Ok(total.max(0.0).sqrt())
    }

    /// `(∫₀ᵀ ‖z‖²_{H¹} dt)^{1/2}` where `(A₁ + M) z = ⟨∂_t u, v⟩ − M d_τuⁿ`.
    pub fn dual_norm_bound(&self, traj: &CoupledTrajectory, exact: &dyn ExactSolution) -> Result<f64> {
        let mesh = self.disc.space.mesh();
        let mut total = 0.0;
        for n in 1..=traj.grid.n_steps() {
            let dq = traj.difference_quotient(n);
            let mdq = self.projector.mass().matvec(&dq);
            for (t, w) in self.quad.time.rule(&traj.grid, n) {
                let locals: Vec<[f64; 3]> = (0..mesh.n_triangles())
                    .into_par_iter()
                    .map(|tri| {
                        let p = mesh.triangle_points(tri);
                        let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
                        let mut local = [0.0; 3];
                        for (l, qw) in self.rule.points() {
                            let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
                            let f = exact.dt_u(x, t) * qw * area;
                            for k in 0..3 {
                                local[k] += f * l[k];
                            }
                        }
                        local
                    })
                    .collect();
                let mut b: Vec<f64> = mdq.iter().map(|v| -v).collect();
                for (tri, local) in mesh.triangles().iter().zip(&locals) {
                    for k in 0..3 {
                        b[tri[k]] += local[k];
                    }
                }
                let z = self.auxiliary.solve(&b)?;
                total += w * z.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        Ok(total.max(0.0).sqrt())
    }

    /// L² projection `ū_h(t)` of `u(·,t)` and segment means `φ̄_h(t)`.
    pub fn projected_reference(&self, exact: &dyn ExactSolution, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mesh = self.disc.mesh();
        let rhs: Vec<[f64; 3]> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|tri| {
                let p = mesh.triangle_points(tri);
                let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
                let mut local = [0.0; 3];
                for (l, w) in self.rule.points() {
                    let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
                    let f = exact.u(x, t) * w * area;
                    for k in 0..3 {
                        local[k] += f * l[k];
                    }
                }
                local
            })
            .collect();
        let mut moments = vec![0.0; self.disc.space.n_dofs()];
        for (tri, local) in mesh.triangles().iter().zip(&rhs) {
            for k in 0..3 {
                moments[tri[k]] += local[k];
            }
        }
        let u_bar = self.projector.solve_moments(&moments)?;
        let phi_bar = self.segment_means(self.disc.pair.boundary(), exact, t);
        Ok((u_bar, phi_bar))
    }

    /// Errors of the discrete solution against the projected references:
    /// `(L², H¹-seminorm, V-energy)`.
    pub fn projected_errors(&self, traj: &CoupledTrajectory, exact: &dyn ExactSolution) -> Result<(f64, f64, f64)> {
        let mut acc = [0.0; 3];
        let mass = self.projector.mass();
        let v = &self.disc.operators.single_layer;
        for n in 1..=traj.grid.n_steps() {
            for (t, w) in self.quad.time.rule(&traj.grid, n) {
                let (u_bar, phi_bar) = self.projected_reference(exact, t)?;
                let e: Vec<f64> = u_bar
                    .iter()
                    .zip(traj.u_on_interval(n, t))
                    .map(|(a, b)| a - b)
                    .collect();
                let ephi: Vec<f64> = phi_bar.iter().zip(&traj.phi[n - 1]).map(|(a, b)| a - b).collect();
                acc[0] += w * quadratic(mass, &e);
                acc[1] += w * quadratic(&self.unit_stiffness, &e);
                acc[2] += w * v.quadratic_form(&ephi);
            }
        }
        Ok((acc[0].max(0.0).sqrt(), acc[1].max(0.0).sqrt(), acc[2].max(0.0).sqrt()))
    }

    /// Every column of the error table for this level.
    pub fn measure_all(&self, traj: &CoupledTrajectory, exact: &dyn ExactSolution) -> Result<LevelErrors> {
        let (l2_proj, h1semi_proj, energy_v_proj) = self.projected_errors(traj, exact)?;
        Ok(LevelErrors {
            inv_h: 1.0 / self.disc.mesh().mesh_size(),
            n_intervals: traj.grid.n_steps(),
            l2: self.bochner_error(traj, exact, NormKind::L2)?,
            l2_proj,
            h1semi: self.bochner_error(traj, exact, NormKind::H1Semi)?,
            h1semi_proj,
            h1dual: self.dual_norm_bound(traj, exact)?,
            energy_v: self.v_energy_error(traj, exact)?,
            energy_v_proj,
            global_energy: 0.0,
            global_energy_proj: 0.0,
        }
        .with_aggregates())
    }
}

fn quadratic(m: &SparseMatrix, x: &[f64]) -> f64 {
    m.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
}

/// `rate_ℓ = ln(e_{ℓ−1}/e_ℓ) / ln(p_{ℓ−1}/p_ℓ)`; NaN where undefined.
pub fn compute_eoc(errors: &[f64], params: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .zip(params.windows(2))
        .map(|(e, p)| {
            let valid = e.iter().chain(p).all(|v| v.is_finite() && *v > 0.0) && p[0] != p[1];
            if valid {
                (e[0] / e[1]).ln() / (p[0] / p[1]).ln()
            } else {
                f64::NAN
            }
        })
        .collect()
}
