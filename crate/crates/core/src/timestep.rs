//! Weighted-average implicit Euler for the coupled FEM-BEM system.
//!
//! Each step solves
//!
//! ```text
//! [ M/τ + θA   −C ] [uⁿ]   [ f̂ⁿ + M uⁿ⁻¹/τ − (1−θ) A uⁿ⁻¹ ]
//! [ θB          V ] [φⁿ] = [ ĝⁿ − (1−θ) B uⁿ⁻¹            ]
//! ```
//!
//! with `B = (½M_Γ − K) R`, `θ = 1` for the Euler variant and `θ = ½` for
//! the Crank–Nicolson variant. Right-hand sides are weighted averages over
//! each interval.

use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};

use crate::bem::{self, BemSpacePair};
use crate::fem::{
    self, apply_lifting, BoundaryField, DirichletConstraint, DirichletSpec, Diffusion, FemSpace,
    L2Projector, ScalarField, SpaceQuadrature,
};
use crate::linalg::{BorderedLu, BorderedMatrix, DenseMatrix, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, TimeGrid, TriMesh};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Largest step for which unique solvability is guaranteed.
pub const MAX_GUARANTEED_STEP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// `ωⁿ(t) = (6t − 2tⁿ − 4tⁿ⁻¹)/τⁿ`
    #[default]
    EulerVariant,
    /// `ωⁿ ≡ 1`
    CrankNicolsonVariant,
}

impl WeightScheme {
    /// `ωⁿ(t)` on `[t_prev, t_next]`.
    pub fn weight(self, t: f64, t_prev: f64, t_next: f64) -> f64 {
        match self {
            WeightScheme::EulerVariant => {
                let s = (t - t_prev) / (t_next - t_prev);
                6.0 * s - 2.0
            }
            WeightScheme::CrankNicolsonVariant => 1.0,
        }
    }

    /// Weight of `uⁿ` in the averaged trajectory (`ûⁿ = θuⁿ + (1−θ)uⁿ⁻¹`).
    pub fn implicitness(self) -> f64 {
        match self {
            WeightScheme::EulerVariant => 1.0,
            WeightScheme::CrankNicolsonVariant => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::EulerVariant => "euler",
            WeightScheme::CrankNicolsonVariant => "cn",
        }
    }
}

impl FromStr for WeightScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euler" => Ok(WeightScheme::EulerVariant),
            "cn" | "crank-nicolson" | "crank_nicolson" => Ok(WeightScheme::CrankNicolsonVariant),
            other => Err(Error::InvalidInput(format!("unknown scheme '{other}' (euler|cn)"))),
        }
    }
}

/// Gauss rule per time interval, with extra composite panels on the first
/// interval for data that is singular at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeQuadrature {
    points: usize,
    first_interval_panels: usize,
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        Self {
            points: 4,
            first_interval_panels: 8,
        }
    }
}

impl TimeQuadrature {
    pub fn new(points: usize, first_interval_panels: usize) -> Result<Self> {
        if points < 2 || first_interval_panels == 0 {
            return Err(Error::InvalidInput(format!(
                "time quadrature needs ≥ 2 points and ≥ 1 panel (got {points}, {first_interval_panels})"
            )));
        }
        Ok(Self {
            points,
            first_interval_panels,
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn first_interval_panels(&self) -> usize {
        self.first_interval_panels
    }

    /// Nodes and weights on interval `n` (1-based); weights sum to `τⁿ`.
    pub fn rule(&self, grid: &TimeGrid, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = (grid.nodes()[n - 1], grid.nodes()[n]);
        let panels = if n == 1 { self.first_interval_panels } else { 1 };
        let gauss = GaussLegendre::new(self.points);
        (0..panels)
            .flat_map(|k| {
                let lo = a + (b - a) * k as f64 / panels as f64;
                let hi = a + (b - a) * (k + 1) as f64 / panels as f64;
                gauss.on_interval(lo, hi).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// `v̂ⁿ = (1/τⁿ) ∫ v(t) ωⁿ(t) dt` over interval `n` (1-based).
pub fn weighted_average(
    mut v: impl FnMut(f64) -> Result<Vec<f64>>,
    grid: &TimeGrid,
    n: usize,
    scheme: WeightScheme,
    quad: TimeQuadrature,
) -> Result<Vec<f64>> {
    let (a, b) = (grid.nodes()[n - 1], grid.nodes()[n]);
    let tau = b - a;
    let mut acc: Option<Vec<f64>> = None;
    for (t, w) in quad.rule(grid, n) {
        let scale = w * scheme.weight(t, a, b) / tau;
        let value = v(t)?;
        match &mut acc {
            None => acc = Some(value.into_iter().map(|x| scale * x).collect()),
            Some(sum) => {
                if sum.len() != value.len() {
                    return Err(Error::DimensionMismatch {
                        expected: sum.len(),
                        found: value.len(),
                    });
                }
                for (s, x) in sum.iter_mut().zip(value) {
                    *s += scale * x;
                }
            }
        }
    }
    Ok(acc.unwrap_or_default())
}

/// Spatial and temporal quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QuadratureConfig {
    pub space: SpaceQuadrature,
    pub time: TimeQuadrature,
}

/// Matrices entering the saddle-point system.
#[derive(Debug, Clone)]
pub struct CouplingOperators {
    /// `M` (n × n)
    pub mass: SparseMatrix,
    /// `A` (n × n)
    pub stiffness: SparseMatrix,
    /// `C` (n × m)
    pub coupling: SparseMatrix,
    /// `B = (½M_Γ − K) R` (m × n)
    pub trace_block: SparseMatrix,
    /// `V` (m × m)
    pub single_layer: DenseMatrix,
}

impl CouplingOperators {
    pub fn n_volume(&self) -> usize {
        self.mass.rows()
    }

    pub fn n_flux(&self) -> usize {
        self.single_layer.rows()
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_volume(), self.n_flux());
        for (expected, found) in [
            ((n, n), (self.mass.rows(), self.mass.cols())),
            ((n, n), (self.stiffness.rows(), self.stiffness.cols())),
            ((n, m), (self.coupling.rows(), self.coupling.cols())),
            ((m, n), (self.trace_block.rows(), self.trace_block.cols())),
            ((m, m), (self.single_layer.rows(), self.single_layer.cols())),
        ] {
            if expected.0 != found.0 {
                return Err(Error::DimensionMismatch { expected: expected.0, found: found.0 });
            }
            if expected.1 != found.1 {
                return Err(Error::DimensionMismatch { expected: expected.1, found: found.1 });
            }
        }
        Ok(())
    }
}

/// Everything assembled once per mesh level.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub space: FemSpace,
    pub pair: BemSpacePair,
    pub operators: CouplingOperators,
    /// `M_Γ` (m × trace dofs)
    pub boundary_mass: SparseMatrix,
    /// `K` (m × trace dofs)
    pub double_layer: DenseMatrix,
    /// `½M_Γ − K` (m × trace dofs)
    pub trace_operator: DenseMatrix,
    /// `R` (trace dofs × n)
    pub restriction: SparseMatrix,
}

impl Discretization {
    pub fn new(mesh: Arc<TriMesh>, diffusion: &Diffusion) -> Result<Self> {
        let space = FemSpace::new(mesh.clone());
        let boundary = mesh.extract_boundary(BoundaryTag::Coupling)?;
        let pair = BemSpacePair::new(Arc::new(boundary));
        let n = space.n_dofs();
        let mass = fem::assemble_mass(&space);
        let stiffness = fem::assemble_stiffness(&space, diffusion)?;
        let single_layer = bem::assemble_single_layer(&pair)?;
        let double_layer = bem::assemble_double_layer(&pair)?;
        let (coupling, boundary_mass) = bem::assemble_trace_coupling(&pair, n)?;
        let restriction = bem::trace_restriction(&pair, n)?;

        let mut trace_operator = double_layer.scaled(-1.0);
        for (e, j, v) in boundary_mass.triplets() {
            trace_operator[(e, j)] += 0.5 * v;
        }
        let volume = pair.boundary().volume_vertices().unwrap_or_default();
        let mut b = TripletBuilder::new(pair.n_flux(), n);
        for e in 0..pair.n_flux() {
            for (j, &v) in trace_operator.row(e).iter().enumerate() {
                if v != 0.0 {
                    b.add(e, volume[j], v);
                }
            }
        }
        let operators = CouplingOperators {
            mass,
            stiffness,
            coupling,
            trace_block: b.finalize(),
            single_layer,
        };
        debug!(
            "discretization: {} volume dofs, {} boundary segments",
            n,
            pair.n_flux()
        );
        Ok(Self {
            space,
            pair,
            operators,
            boundary_mass,
            double_layer,
            trace_operator,
            restriction,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.space.mesh()
    }

    /// P1 boundary interpolant of `g(·, t)` on the trace dofs.
    pub fn interpolate_trace(&self, g: &ScalarField, t: f64) -> Vec<f64> {
        self.pair.boundary().points().iter().map(|&p| g(p, t)).collect()
    }

    /// Trace dofs of a volume coefficient vector.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.restriction.matvec(u)
    }
}

/// Block system for step size `tau` (unconstrained).
pub fn assemble_saddle_system(
    ops: &CouplingOperators,
    tau: f64,
    scheme: WeightScheme,
) -> Result<BorderedMatrix> {
    ops.validate()?;
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive (got {tau})")));
    }
    let theta = scheme.implicitness();
    BorderedMatrix::new(
        ops.mass.linear_combination(1.0 / tau, &ops.stiffness, theta),
        ops.coupling.scaled(-1.0),
        ops.trace_block.scaled(theta),
        ops.single_layer.clone(),
    )
}

struct CachedSystem {
    tau_bits: u64,
    unconstrained: BorderedMatrix,
    lu: BorderedLu,
}

/// One-step solver; refactors only when the step size changes.
pub struct TimeStepper<'a> {
    ops: &'a CouplingOperators,
    scheme: WeightScheme,
    dirichlet: &'a DirichletConstraint,
    cache: Option<CachedSystem>,
    factorizations: usize,
}

impl<'a> TimeStepper<'a> {
    pub fn new(
        ops: &'a CouplingOperators,
        scheme: WeightScheme,
        dirichlet: &'a DirichletConstraint,
    ) -> Result<Self> {
        ops.validate()?;
        Ok(Self {
            ops,
            scheme,
            dirichlet,
            cache: None,
            factorizations: 0,
        })
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn system(&mut self, tau: f64) -> Result<&CachedSystem> {
        let bits = tau.to_bits();
        if self.cache.as_ref().map(|c| c.tau_bits) != Some(bits) {
            let unconstrained = assemble_saddle_system(self.ops, tau, self.scheme)?;
            let constrained = fem::constrain_system(&unconstrained, self.dirichlet.dofs());
            let lu = BorderedLu::factorize(&constrained)?;
            self.factorizations += 1;
            self.cache = Some(CachedSystem {
                tau_bits: bits,
                unconstrained,
                lu,
            });
        }
        Ok(self.cache.as_ref().unwrap())
    }

    /// Advances from `prev_u` over a step of size `tau` ending at `t_next`,
    /// given the averaged data `f_hat` (volume) and `g_hat` (flux rows).
    pub fn step(
        &mut self,
        tau: f64,
        t_next: f64,
        prev_u: &[f64],
        f_hat: &[f64],
        g_hat: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.ops.n_volume(), self.ops.n_flux());
        for (expected, found) in [(n, prev_u.len()), (n, f_hat.len()), (m, g_hat.len())] {
            if expected != found {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        let explicit = 1.0 - self.scheme.implicitness();
        let mut rhs = Vec::with_capacity(n + m);
        rhs.extend_from_slice(f_hat);
        self.ops.mass.matvec_add(1.0 / tau, prev_u, &mut rhs);
        let mut bottom = g_hat.to_vec();
        if explicit != 0.0 {
            self.ops.stiffness.matvec_add(-explicit, prev_u, &mut rhs);
            self.ops.trace_block.matvec_add(-explicit, prev_u, &mut bottom);
        }
        rhs.extend(bottom);

        let values = self.dirichlet.values(t_next)?;
        let dirichlet = self.dirichlet;
        let system = self.system(tau)?;
        if !dirichlet.is_empty() {
            let lift = fem::dirichlet_lifting(&system.unconstrained, dirichlet.dofs(), &values);
            apply_lifting(&mut rhs, dirichlet.dofs(), &lift);
        }
        let mut x = system.lu.solve(&rhs)?;
        let phi = x.split_off(n);
        Ok((x, phi))
    }
}

/// Solution coefficients: `u` at every node, `φ` per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub grid: TimeGrid,
    /// `u[k]` at node `tᵏ`, `k = 0..=N`.
    pub u: Vec<Vec<f64>>,
    /// `phi[n−1]` on interval `n = 1..=N`.
    pub phi: Vec<Vec<f64>>,
    /// Number of factorizations performed.
    pub factorizations: usize,
}

impl CoupledTrajectory {
    /// Interval index `n` (1-based) containing `t`.
    pub fn interval_of(&self, t: f64) -> usize {
        let nodes = self.grid.nodes();
        let k = nodes.partition_point(|&s| s < t);
        k.clamp(1, self.grid.n_steps())
    }

    /// Linear-in-time reconstruction of `u` on interval `n`.
    pub fn u_on_interval(&self, n: usize, t: f64) -> Vec<f64> {
        let (a, b) = (self.grid.nodes()[n - 1], self.grid.nodes()[n]);
        let s = (t - a) / (b - a);
        self.u[n - 1]
            .iter()
            .zip(&self.u[n])
            .map(|(p, q)| (1.0 - s) * p + s * q)
            .collect()
    }

    pub fn u_at(&self, t: f64) -> Vec<f64> {
        self.u_on_interval(self.interval_of(t), t)
    }

    /// Difference quotient `d_τ uⁿ`.
    pub fn difference_quotient(&self, n: usize) -> Vec<f64> {
        let tau = self.grid.step(n);
        self.u[n]
            .iter()
            .zip(&self.u[n - 1])
            .map(|(b, a)| (b - a) / tau)
            .collect()
    }
}

/// Time-marching driver for arbitrary averaged data: `rhs(n)` returns
/// `(f̂ⁿ, ĝⁿ)` for interval `n` (1-based).
pub fn evolve(
    ops: &CouplingOperators,
    grid: &TimeGrid,
    scheme: WeightScheme,
    dirichlet: &DirichletConstraint,
    initial: Vec<f64>,
    mut rhs: impl FnMut(usize) -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<CoupledTrajectory> {
    if initial.len() != ops.n_volume() {
        return Err(Error::DimensionMismatch {
            expected: ops.n_volume(),
            found: initial.len(),
        });
    }
    if grid.tau_max() > MAX_GUARANTEED_STEP {
        warn!(
            "time step {} exceeds {}; unique solvability is not guaranteed",
            grid.tau_max(),
            MAX_GUARANTEED_STEP
        );
    }
    let mut stepper = TimeStepper::new(ops, scheme, dirichlet)?;
    let mut u = Vec::with_capacity(grid.n_steps() + 1);
    let mut phi = Vec::with_capacity(grid.n_steps());
    u.push(initial);
    for n in 1..=grid.n_steps() {
        let (f_hat, g_hat) = rhs(n)?;
        let (un, phin) = stepper.step(grid.step(n), grid.nodes()[n], &u[n - 1], &f_hat, &g_hat)?;
        if un.iter().chain(&phin).any(|v| !v.is_finite()) {
            return Err(Error::Diverged(n));
        }
        u.push(un);
        phi.push(phin);
    }
    Ok(CoupledTrajectory {
        grid: grid.clone(),
        u,
        phi,
        factorizations: stepper.factorizations(),
    })
}

/// Data of the interface problem. Absent fields are zero.
#[derive(Clone, Default)]
pub struct ProblemData {
    /// Interior source `f̃`.
    pub source: Option<ScalarField>,
    /// Trace jump `g̃ = u − u_e` on Γ.
    pub trace_jump: Option<ScalarField>,
    /// Flux jump `h̃ = ∂_n u − φ` on Γ.
    pub flux_jump: Option<BoundaryField>,
    pub diffusion: Diffusion,
    pub dirichlet: DirichletSpec,
    /// Initial state, L²-projected; zero when absent.
    pub initial: Option<ScalarField>,
    pub end_time: f64,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("source", &self.source.is_some())
            .field("trace_jump", &self.trace_jump.is_some())
            .field("flux_jump", &self.flux_jump.is_some())
            .field("diffusion", &self.diffusion)
            .field("dirichlet", &self.dirichlet)
            .field("initial", &self.initial.is_some())
            .field("end_time", &self.end_time)
            .finish()
    }
}

/// Full discretization of the interface problem on `disc` over `grid`.
pub fn solve_evolution(
    disc: &Discretization,
    data: &ProblemData,
    grid: &TimeGrid,
    scheme: WeightScheme,
    quad: QuadratureConfig,
) -> Result<CoupledTrajectory> {
    if (grid.end_time() - data.end_time).abs() > 1e-12 * data.end_time.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "time grid ends at {} but the problem at {}",
            grid.end_time(),
            data.end_time
        )));
    }
    let dirichlet = DirichletConstraint::new(disc.mesh(), data.dirichlet.clone())?;
    let initial = match &data.initial {
        Some(u0) => L2Projector::new(&disc.space, quad.space)?.project(u0, 0.0)?,
        None => vec![0.0; disc.space.n_dofs()],
    };
    let n_flux = disc.pair.n_flux();
    let rhs = |n: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let f_hat = if data.source.is_some() || data.flux_jump.is_some() {
            weighted_average(
                |t| {
                    fem::assemble_load(
                        &disc.space,
                        data.source.as_ref(),
                        data.flux_jump.as_ref(),
                        t,
                        quad.space,
                    )
                },
                grid,
                n,
                scheme,
                quad.time,
            )?
        } else {
            vec![0.0; disc.space.n_dofs()]
        };
        let g_hat = match &data.trace_jump {
            Some(g) => {
                let averaged = weighted_average(
                    |t| Ok(disc.interpolate_trace(g, t)),
                    grid,
                    n,
                    scheme,
                    quad.time,
                )?;
                disc.trace_operator.matvec(&averaged)
            }
            None => vec![0.0; n_flux],
        };
        Ok((f_hat, g_hat))
    };
    evolve(&disc.operators, grid, scheme, &dirichlet, initial, rhs)
}
