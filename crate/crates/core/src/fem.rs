//! P1 finite elements on a [`TriMesh`]: mass, stiffness and load assembly,
//! L² projection and Dirichlet constraints.
//!
//! Element contributions are computed in parallel and accumulated in a fixed
//! order, so assembled objects are bit-reproducible.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::linalg::{BandedLu, BorderedMatrix, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryTag, Point2, TriMesh};
use crate::quadrature::{GaussLegendre, TriangleRule};
use crate::{Error, Result};

/// Space-time scalar field `(x, t) ↦ value`.
pub type ScalarField = Arc<dyn Fn(Point2, f64) -> f64 + Send + Sync>;

/// Field on Γ that may depend on the outward normal: `(x, n, t) ↦ value`.
pub type BoundaryField = Arc<dyn Fn(Point2, Point2, f64) -> f64 + Send + Sync>;

/// Continuous piecewise-linear functions; one dof per mesh vertex.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Arc<TriMesh>,
}

impl FemSpace {
    pub fn new(mesh: Arc<TriMesh>) -> Self {
        Self { mesh }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    /// Nodal interpolant of `g(·, t)`.
    pub fn interpolate(&self, g: &ScalarField, t: f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|&p| g(p, t)).collect()
    }

    /// Value of the P1 function `coeffs` at barycentric point `lambda` of
    /// triangle `tri`.
    pub fn evaluate(&self, coeffs: &[f64], tri: usize, lambda: [f64; 3]) -> f64 {
        let v = self.mesh.triangles()[tri];
        (0..3).map(|k| lambda[k] * coeffs[v[k]]).sum()
    }

    /// Constant gradient of the P1 function `coeffs` on triangle `tri`.
    pub fn gradient(&self, coeffs: &[f64], tri: usize) -> Point2 {
        let v = self.mesh.triangles()[tri];
        let grads = barycentric_gradients(&self.mesh.triangle_points(tri));
        (0..3).fold(Point2::default(), |acc, k| acc + grads[k] * coeffs[v[k]])
    }
}

/// Gradients of the three barycentric coordinates of a triangle.
pub fn barycentric_gradients(p: &[Point2; 3]) -> [Point2; 3] {
    let two_area = (p[1] - p[0]).cross(p[2] - p[0]);
    let grad = |i: usize| {
        let e = p[(i + 2) % 3] - p[(i + 1) % 3];
        Point2::new(-e.y / two_area, e.x / two_area)
    };
    [grad(0), grad(1), grad(2)]
}

/// Piecewise-constant diffusion coefficient.
#[derive(Debug, Clone, PartialEq)]
pub enum Diffusion {
    Constant(f64),
    PerTriangle(Vec<f64>),
}

impl Default for Diffusion {
    fn default() -> Self {
        Diffusion::Constant(1.0)
    }
}

impl Diffusion {
    pub fn on_triangle(&self, t: usize) -> f64 {
        match self {
            Diffusion::Constant(k) => *k,
            Diffusion::PerTriangle(ks) => ks[t],
        }
    }

    fn validate(&self, n_triangles: usize) -> Result<()> {
        let ok = match self {
            Diffusion::Constant(k) => *k > 0.0 && k.is_finite(),
            Diffusion::PerTriangle(ks) => {
                ks.len() == n_triangles && ks.iter().all(|k| *k > 0.0 && k.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "diffusion must be positive and finite on every triangle".into(),
            ))
        }
    }
}

/// Quadrature used for loads and error integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceQuadrature {
    /// Polynomial degree of the triangle rule.
    pub volume_degree: usize,
    /// Gauss points per boundary edge.
    pub edge_points: usize,
}

impl Default for SpaceQuadrature {
    fn default() -> Self {
        Self {
            volume_degree: 4,
            edge_points: 4,
        }
    }
}

fn assemble_elementwise(
    mesh: &TriMesh,
    element: impl Fn(usize, &[Point2; 3]) -> [[f64; 3]; 3] + Sync,
) -> SparseMatrix {
    let blocks: Vec<[[f64; 3]; 3]> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| element(t, &mesh.triangle_points(t)))
        .collect();
    let n = mesh.n_vertices();
    let mut builder = TripletBuilder::new(n, n);
    for (tri, block) in mesh.triangles().iter().zip(&blocks) {
        for i in 0..3 {
            for j in 0..3 {
                builder.add(tri[i], tri[j], block[i][j]);
            }
        }
    }
    builder.finalize()
}

/// Consistent mass matrix `M_ij = ∫ φ_i φ_j`.
pub fn assemble_mass(space: &FemSpace) -> SparseMatrix {
    assemble_elementwise(space.mesh(), |_, p| {
        let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
        let mut m = [[area / 12.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = area / 6.0;
        }
        m
    })
}

/// Stiffness matrix `A_ij = ∫ κ ∇φ_i·∇φ_j`.
pub fn assemble_stiffness(space: &FemSpace, diffusion: &Diffusion) -> Result<SparseMatrix> {
    diffusion.validate(space.mesh().n_triangles())?;
    Ok(assemble_elementwise(space.mesh(), |t, p| {
        let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
        let g = barycentric_gradients(p);
        let k = diffusion.on_triangle(t) * area;
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = k * g[i].dot(g[j]);
            }
        }
        a
    }))
}

/// Load vector `∫_Ω f̃(·,t) φ_i + ∫_Γ h̃(·,t) φ_i` with Γ the Coupling edges.
pub fn assemble_load(
    space: &FemSpace,
    source: Option<&ScalarField>,
    flux_jump: Option<&BoundaryField>,
    t: f64,
    quad: SpaceQuadrature,
) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let mut load = vec![0.0; space.n_dofs()];
    if let Some(f) = source {
        let rule = TriangleRule::with_degree(quad.volume_degree)?;
        let locals: Vec<[f64; 3]> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|tri| {
                let p = mesh.triangle_points(tri);
                let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
                let mut local = [0.0; 3];
                for (l, w) in rule.points() {
                    let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
                    let fx = f(x, t) * w * area;
                    for k in 0..3 {
                        local[k] += fx * l[k];
                    }
                }
                local
            })
            .collect();
        for (tri, local) in mesh.triangles().iter().zip(&locals) {
            for k in 0..3 {
                load[tri[k]] += local[k];
            }
        }
    }
    if let Some(h) = flux_jump {
        if quad.edge_points == 0 {
            return Err(Error::InvalidInput("edge quadrature needs at least one point".into()));
        }
        let gauss = GaussLegendre::new(quad.edge_points);
        let vertices = mesh.vertices();
        for edge in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Coupling) {
            let [ia, ib] = edge.vertices;
            let (a, b) = (vertices[ia], vertices[ib]);
            let len = a.distance(b);
            let tangent = (b - a) * (1.0 / len);
            let normal = Point2::new(tangent.y, -tangent.x);
            for (s, w) in gauss.on_interval(0.0, 1.0) {
                let hx = h(a.lerp(b, s), normal, t) * w * len;
                load[ia] += hx * (1.0 - s);
                load[ib] += hx * s;
            }
        }
    }
    Ok(load)
}

/// Reusable L² projector onto the P1 space (factored mass matrix).
#[derive(Debug)]
pub struct L2Projector {
    space: FemSpace,
    mass: SparseMatrix,
    lu: BandedLu,
    quad: SpaceQuadrature,
}

impl L2Projector {
    pub fn new(space: &FemSpace, quad: SpaceQuadrature) -> Result<Self> {
        let mass = assemble_mass(space);
        let lu = mass.factorize()?;
        Ok(Self {
            space: space.clone(),
            mass,
            lu,
            quad,
        })
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// Coefficients `x` with `M x = (g(·,t), φ_i)`.
    pub fn project(&self, g: &ScalarField, t: f64) -> Result<Vec<f64>> {
        let rhs = assemble_load(&self.space, Some(g), None, t, self.quad)?;
        self.lu.solve(&rhs)
    }

    /// Solves `M x = rhs` for an already assembled moment vector.
    pub fn solve_moments(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(rhs)
    }
}

/// One-shot L² projection of `g(·, t)`.
pub fn l2_project(space: &FemSpace, g: &ScalarField, t: f64) -> Result<Vec<f64>> {
    L2Projector::new(space, SpaceQuadrature::default())?.project(g, t)
}

/// Dirichlet data per boundary label.
#[derive(Clone, Default)]
pub struct DirichletSpec {
    values: BTreeMap<u32, ScalarField>,
}

impl std::fmt::Debug for DirichletSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSpec")
            .field("labels", &self.values.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl DirichletSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: u32, value: ScalarField) -> Self {
        self.values.insert(label, value);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.values.keys().copied()
    }
}

/// Dirichlet dofs of a mesh together with their data.
#[derive(Debug, Clone)]
pub struct DirichletConstraint {
    points: Vec<Point2>,
    dofs: Vec<usize>,
    /// Labels touching each constrained dof.
    labels: Vec<Vec<u32>>,
    spec: DirichletSpec,
}

/// Tolerance for agreeing values of two labels at a shared vertex.
const DIRICHLET_AGREEMENT: f64 = 1e-12;

impl DirichletConstraint {
    /// Collects the vertices on Dirichlet-tagged edges. Every label present
    /// in the mesh must have data in `spec`.
    pub fn new(mesh: &TriMesh, spec: DirichletSpec) -> Result<Self> {
        let mut by_vertex: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for edge in mesh.boundary_edges() {
            if let BoundaryTag::Dirichlet(label) = edge.tag {
                if !spec.values.contains_key(&label) {
                    return Err(Error::InvalidInput(format!(
                        "no Dirichlet data for boundary label {label}"
                    )));
                }
                for v in edge.vertices {
                    let labels = by_vertex.entry(v).or_default();
                    if !labels.contains(&label) {
                        labels.push(label);
                    }
                }
            }
        }
        let dofs: Vec<usize> = by_vertex.keys().copied().collect();
        let points = dofs.iter().map(|&v| mesh.vertices()[v]).collect();
        let labels = by_vertex.into_values().collect();
        Ok(Self {
            points,
            dofs,
            labels,
            spec,
        })
    }

    /// Constraint without constrained dofs.
    pub fn none() -> Self {
        Self {
            points: Vec::new(),
            dofs: Vec::new(),
            labels: Vec::new(),
            spec: DirichletSpec::default(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Constrained dofs, increasing.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    /// Prescribed values at [`dofs`](Self::dofs) at time `t`.
    pub fn values(&self, t: f64) -> Result<Vec<f64>> {
        self.dofs
            .iter()
            .zip(&self.points)
            .zip(&self.labels)
            .map(|((&dof, &p), labels)| {
                let mut value: Option<f64> = None;
                for label in labels {
                    let v = (self.spec.values[label])(p, t);
                    match value {
                        Some(prev) if (prev - v).abs() > DIRICHLET_AGREEMENT * (1.0 + v.abs()) => {
                            return Err(Error::InconsistentDirichlet(dof));
                        }
                        _ => value = Some(v),
                    }
                }
                Ok(value.unwrap_or(0.0))
            })
            .collect()
    }
}

/// Replaces the constrained rows of the primary block by identity rows and
/// zeroes the constrained columns everywhere.
pub fn constrain_system(system: &BorderedMatrix, dofs: &[usize]) -> BorderedMatrix {
    let mut mask = vec![false; system.n_primary()];
    for &d in dofs {
        mask[d] = true;
    }
    let mut a = TripletBuilder::new(system.a.rows(), system.a.cols());
    for (r, c, v) in system.a.triplets() {
        if !mask[r] && !mask[c] {
            a.add(r, c, v);
        }
    }
    for &d in dofs {
        a.add(d, d, 1.0);
    }
    BorderedMatrix {
        a: a.finalize(),
        b: system.b.filtered(|r, _| !mask[r]),
        c: system.c.filtered(|_, c| !mask[c]),
        d: system.d.clone(),
    }
}

/// Lifting vector for prescribed `values` at `dofs`: `−S·g` off the
/// constrained rows and `g` on them, where `S` is the unconstrained system
/// and `g` the zero extension of `values`.
pub fn dirichlet_lifting(system: &BorderedMatrix, dofs: &[usize], values: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; system.dim()];
    for (&d, &v) in dofs.iter().zip(values) {
        g[d] = v;
    }
    let mut lift: Vec<f64> = system.matvec(&g).into_iter().map(|v| -v).collect();
    for (&d, &v) in dofs.iter().zip(values) {
        lift[d] = v;
    }
    lift
}

/// Combines an unconstrained right-hand side with a lifting vector.
pub fn apply_lifting(rhs: &mut [f64], dofs: &[usize], lift: &[f64]) {
    for &d in dofs {
        rhs[d] = 0.0;
    }
    for (r, l) in rhs.iter_mut().zip(lift) {
        *r += l;
    }
}

/// Constrained system and lifting vector for the data of `constraint` at `t`.
pub fn apply_dirichlet(
    system: &BorderedMatrix,
    constraint: &DirichletConstraint,
    t: f64,
) -> Result<(BorderedMatrix, Vec<f64>)> {
    let values = constraint.values(t)?;
    let constrained = constrain_system(system, constraint.dofs());
    let lift = dirichlet_lifting(system, constraint.dofs(), &values);
    Ok((constrained, lift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::mesh::{build_capacitor_mesh, build_lshape_mesh, BoundaryEdge};

    fn unit_triangle() -> FemSpace {
        let mesh = TriMesh::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::Coupling },
                BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::Coupling },
                BoundaryEdge { vertices: [2, 0], tag: BoundaryTag::Coupling },
            ],
            1.0,
        )
        .unwrap();
        FemSpace::new(Arc::new(mesh))
    }

    fn field(f: impl Fn(Point2, f64) -> f64 + Send + Sync + 'static) -> ScalarField {
        Arc::new(f)
    }

    #[test]
    fn unit_triangle_element_matrices() {
        let space = unit_triangle();
        let m = assemble_mass(&space).to_dense();
        let expected = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[(i, j)] - expected[i][j] / 24.0).abs() < 1e-16);
            }
        }
        let a = assemble_stiffness(&space, &Diffusion::Constant(1.0)).unwrap().to_dense();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - expected[i][j]).abs() < 1e-15);
            }
        }
        let a5 = assemble_stiffness(&space, &Diffusion::Constant(5.0)).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a5[(i, j)] - 5.0 * a[(i, j)]).abs() < 1e-14);
            }
        }
        assert!(assemble_stiffness(&space, &Diffusion::Constant(0.0)).is_err());
    }

    #[test]
    fn unit_triangle_load_of_x() {
        let space = unit_triangle();
        let f = field(|p, _| p.x);
        let load = assemble_load(&space, Some(&f), None, 0.0, SpaceQuadrature::default()).unwrap();
        for (got, want) in load.iter().zip([1.0 / 24.0, 1.0 / 12.0, 1.0 / 24.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn lshape_sums() {
        let space = FemSpace::new(Arc::new(build_lshape_mesh(1)));
        let m = assemble_mass(&space);
        let ones = vec![1.0; space.n_dofs()];
        let total: f64 = m.matvec(&ones).iter().sum();
        assert!((total - 0.1875).abs() < 1e-14);
        assert!(m.is_symmetric(1e-15));
        assert!(m.to_dense().is_positive_definite());

        let a = assemble_stiffness(&space, &Diffusion::default()).unwrap();
        assert!(a.is_symmetric(1e-15));
        assert!(a.matvec(&ones).iter().all(|v| v.abs() < 1e-12));

        let one = field(|_, _| 1.0);
        let f_load = assemble_load(&space, Some(&one), None, 0.0, SpaceQuadrature::default()).unwrap();
        assert!((f_load.iter().sum::<f64>() - 0.1875).abs() < 1e-14);
        let h: BoundaryField = Arc::new(|_, _, _| 1.0);
        let h_load = assemble_load(&space, None, Some(&h), 0.0, SpaceQuadrature::default()).unwrap();
        assert!((h_load.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn degree_two_load_is_exact() {
        let space = FemSpace::new(Arc::new(build_lshape_mesh(1)));
        let f = field(|p, _| p.x * p.x + p.x * p.y);
        let load = assemble_load(&space, Some(&f), None, 0.0, SpaceQuadrature {
            volume_degree: 2,
            edge_points: 1,
        })
        .unwrap();
        let ix2 = 0.25f64.powi(3) / 3.0 * 0.25 * 3.0;
        // ∫xy per quadrant is ±q², the two x<0 quadrants cancel
        let q = 0.25f64.powi(2) / 2.0;
        let ixy = q * q;
        assert!((load.iter().sum::<f64>() - (ix2 + ixy)).abs() < 1e-15);
    }

    #[test]
    fn projection_of_space_functions_is_exact() {
        let space = FemSpace::new(Arc::new(build_lshape_mesh(1)));
        let three = field(|_, _| 3.0);
        for c in l2_project(&space, &three, 0.0).unwrap() {
            assert!((c - 3.0).abs() < 1e-12);
        }
        let affine = field(|p, _| 1.0 + 2.0 * p.x - 0.5 * p.y);
        let want = space.interpolate(&affine, 0.0);
        let got = l2_project(&space, &affine, 0.0).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn patch_test_reproduces_linear_solution() {
        let mesh = build_lshape_mesh(2);
        let space = FemSpace::new(Arc::new(mesh.clone()));
        // relabel all boundary edges as Dirichlet(1)
        let edges = mesh
            .boundary_edges()
            .iter()
            .map(|e| BoundaryEdge { vertices: e.vertices, tag: BoundaryTag::Dirichlet(1) })
            .collect();
        let dmesh = TriMesh::new(mesh.vertices().to_vec(), mesh.triangles().to_vec(), edges, 0.125).unwrap();
        let exact = field(|p, _| 0.3 + 2.0 * p.x - 1.5 * p.y);
        let constraint = DirichletConstraint::new(&dmesh, DirichletSpec::new().with(1, exact.clone())).unwrap();
        let a = assemble_stiffness(&space, &Diffusion::default()).unwrap();
        let n = space.n_dofs();
        let system = BorderedMatrix::new(
            a,
            SparseMatrix::zeros(n, 0),
            SparseMatrix::zeros(0, n),
            DenseMatrix::zeros(0, 0),
        )
        .unwrap();
        let (constrained, lift) = apply_dirichlet(&system, &constraint, 0.0).unwrap();
        let mut rhs = vec![0.0; n];
        apply_lifting(&mut rhs, constraint.dofs(), &lift);
        let u = crate::linalg::factorize(&constrained).unwrap().solve(&rhs).unwrap();
        for (got, want) in u.iter().zip(space.interpolate(&exact, 0.0)) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn capacitor_dirichlet_polarity() {
        let mesh = build_capacitor_mesh(0);
        let left = field(|_, t| if t < 0.5 { -1.0 } else { 1.0 });
        let right = field(|_, t| if t < 0.5 { 1.0 } else { -1.0 });
        let spec = DirichletSpec::new().with(1, left).with(2, right);
        let c = DirichletConstraint::new(&mesh, spec).unwrap();
        for (t, sign) in [(0.25, -1.0), (0.75, 1.0)] {
            let values = c.values(t).unwrap();
            for (&d, v) in c.dofs().iter().zip(values) {
                let x = mesh.vertices()[d].x;
                assert_eq!(v, if x < 0.0 { sign } else { -sign });
            }
        }
        let missing = DirichletSpec::new().with(1, field(|_, _| 0.0));
        assert!(DirichletConstraint::new(&mesh, missing).is_err());
    }

    #[test]
    fn conflicting_labels_are_rejected() {
        let space = unit_triangle();
        let mesh = space.mesh();
        let edges = vec![
            BoundaryEdge { vertices: [0, 1], tag: BoundaryTag::Dirichlet(1) },
            BoundaryEdge { vertices: [1, 2], tag: BoundaryTag::Dirichlet(2) },
            BoundaryEdge { vertices: [2, 0], tag: BoundaryTag::Dirichlet(1) },
        ];
        let m = TriMesh::new(mesh.vertices().to_vec(), mesh.triangles().to_vec(), edges, 1.0).unwrap();
        let spec = DirichletSpec::new().with(1, field(|_, _| 1.0)).with(2, field(|_, _| 2.0));
        let c = DirichletConstraint::new(&m, spec).unwrap();
        assert!(matches!(c.values(0.0), Err(Error::InconsistentDirichlet(_))));
        let agree = DirichletSpec::new().with(1, field(|_, _| 1.0)).with(2, field(|_, _| 1.0));
        assert_eq!(DirichletConstraint::new(&m, agree).unwrap().values(0.0).unwrap(), vec![1.0; 3]);
    }
}
