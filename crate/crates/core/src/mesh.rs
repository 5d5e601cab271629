//! Points, conforming triangulations with tagged boundaries, uniform red
//! refinement, boundary extraction and time grids.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn lerp(self, other: Point2, s: f64) -> Point2 {
        Point2::new(
            self.x + s * (other.x - self.x),
            self.y + s * (other.y - self.y),
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Boundary part an edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Interface Γ to the unbounded exterior.
    Coupling,
    /// Interior Dirichlet boundary with a label.
    Dirichlet(u32),
}

/// Boundary edge oriented so that the domain lies to its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Diagonal used to split a structured grid cell into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagonal {
    /// From lower-left to upper-right.
    Rising,
    /// From lower-right to upper-left.
    Falling,
}

/// Conforming triangulation with counterclockwise triangles and tagged,
/// consistently oriented boundary edges.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    mesh_size: f64,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    /// Builds and validates a mesh. `mesh_size` is the nominal mesh width `h`
    /// (grid spacing of the start mesh, halved by each refinement).
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        mesh_size: f64,
    ) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
            boundary_edges,
            mesh_size,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Triangulates the active cells of the tensor grid `xs × ys`.
    ///
    /// Boundary edges are detected as edges owned by a single triangle and
    /// tagged by `tag` evaluated at the edge midpoint.
    pub fn from_structured_grid(
        xs: &[f64],
        ys: &[f64],
        active: impl Fn(Point2) -> bool,
        diagonal: impl Fn(Point2) -> Diagonal,
        tag: impl Fn(Point2) -> BoundaryTag,
        mesh_size: f64,
    ) -> Result<Self> {
        let nx = xs.len();
        let ny = ys.len();
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidMesh("grid needs at least 2×2 lines".into()));
        }
        let grid_index = |i: usize, j: usize| j * nx + i;
        let mut used = vec![usize::MAX; nx * ny];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let vertex_of = |g: usize, used: &mut Vec<usize>, vertices: &mut Vec<Point2>| {
            if used[g] == usize::MAX {
                used[g] = vertices.len();
                vertices.push(Point2::new(xs[g % nx], ys[g / nx]));
            }
            used[g]
        };
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let center = Point2::new(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
                if !active(center) {
                    continue;
                }
                let v00 = vertex_of(grid_index(i, j), &mut used, &mut vertices);
                let v10 = vertex_of(grid_index(i + 1, j), &mut used, &mut vertices);
                let v11 = vertex_of(grid_index(i + 1, j + 1), &mut used, &mut vertices);
                let v01 = vertex_of(grid_index(i, j + 1), &mut used, &mut vertices);
                match diagonal(center) {
                    Diagonal::Rising => {
                        triangles.push([v00, v10, v11]);
                        triangles.push([v00, v11, v01]);
                    }
                    Diagonal::Falling => {
                        triangles.push([v00, v10, v01]);
                        triangles.push([v10, v11, v01]);
                    }
                }
            }
        }

        let mut owners: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                owners
                    .entry(edge_key(a, b))
                    .and_modify(|e| e.0 += 1)
                    .or_insert((1, [a, b]));
            }
        }
        let mut boundary_edges: Vec<BoundaryEdge> = owners
            .values()
            .filter(|(count, _)| *count == 1)
            .map(|&(_, [a, b])| BoundaryEdge {
                vertices: [a, b],
                tag: tag(vertices[a].midpoint(vertices[b])),
            })
            .collect();
        boundary_edges.sort_by_key(|e| e.vertices);
        Self::new(vertices, triangles, boundary_edges, mesh_size)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Nominal mesh width `h`.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area (positive for counterclockwise triangles).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * (b - a).cross(c - a)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Largest triangle diameter.
    pub fn h_max(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| triangle_diameter(&self.triangle_points(t)))
            .fold(0.0, f64::max)
    }

    /// `max_T h_T / min_T ρ_T` with `ρ_T` the inradius.
    pub fn quasi_uniformity(&self) -> f64 {
        let mut h_max: f64 = 0.0;
        let mut rho_min = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.triangle_points(t);
            h_max = h_max.max(triangle_diameter(&p));
            let perimeter = p[0].distance(p[1]) + p[1].distance(p[2]) + p[2].distance(p[0]);
            rho_min = rho_min.min(2.0 * self.triangle_area(t) / perimeter);
        }
        h_max / rho_min
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| self.vertices[e.vertices[0]].distance(self.vertices[e.vertices[1]]))
            .sum()
    }

    /// Distinct boundary tags present, sorted.
    pub fn boundary_tags(&self) -> Vec<BoundaryTag> {
        let mut tags: Vec<BoundaryTag> = self.boundary_edges.iter().map(|e| e.tag).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    /// Checks conformity, orientation and closedness of the boundary.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(p) = self.vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        if !(self.mesh_size > 0.0) {
            return Err(Error::InvalidMesh("mesh size must be positive".into()));
        }
        let mut edges: HashMap<(usize, usize), Vec<[usize; 2]>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("triangle {t} has out-of-range vertex")));
            }
            if !(self.triangle_area(t) > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area")));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.entry(edge_key(a, b)).or_default().push([a, b]);
            }
        }
        let mut boundary: HashMap<(usize, usize), [usize; 2]> = HashMap::new();
        for (key, owners) in &edges {
            match owners.len() {
                1 => {
                    boundary.insert(*key, owners[0]);
                }
                2 => {
                    if owners[0] == owners[1] {
                        return Err(Error::InvalidMesh(format!("edge {key:?} has inconsistent orientation")));
                    }
                }
                k => {
                    return Err(Error::InvalidMesh(format!("edge {key:?} shared by {k} triangles")));
                }
            }
        }
        if boundary.len() != self.boundary_edges.len() {
            return Err(Error::InvalidMesh(format!(
                "{} topological boundary edges but {} tagged",
                boundary.len(),
                self.boundary_edges.len()
            )));
        }
        let mut balance = vec![0i64; n];
        for e in &self.boundary_edges {
            let [a, b] = e.vertices;
            match boundary.get(&edge_key(a, b)) {
                Some(oriented) if *oriented == [a, b] => {}
                Some(_) => {
                    return Err(Error::InvalidMesh(format!("boundary edge ({a},{b}) is not oriented with the domain on its left")));
                }
                None => return Err(Error::InvalidMesh(format!("tagged edge ({a},{b}) is interior"))),
            }
            balance[a] += 1;
            balance[b] -= 1;
        }
        if balance.iter().any(|&d| d != 0) {
            return Err(Error::InvalidMesh("boundary edges do not form closed loops".into()));
        }
        Ok(())
    }

    /// Red refinement: every triangle is split into four by its edge midpoints.
    pub fn uniform_refine(&self) -> TriMesh {
        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point2>| -> usize {
            *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                vertices.push(vertices[a].midpoint(vertices[b]));
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        for e in &self.boundary_edges {
            let [a, b] = e.vertices;
            let m = midpoint(a, b, &mut vertices);
            boundary_edges.push(BoundaryEdge { vertices: [a, m], tag: e.tag });
            boundary_edges.push(BoundaryEdge { vertices: [m, b], tag: e.tag });
        }
        TriMesh {
            vertices,
            triangles,
            boundary_edges,
            mesh_size: 0.5 * self.mesh_size,
        }
    }

    pub fn refined(&self, levels: usize) -> TriMesh {
        let mut mesh = self.clone();
        for _ in 0..levels {
            mesh = mesh.uniform_refine();
        }
        mesh
    }

    /// Ordered boundary polygon(s) of the edges carrying `tag`.
    pub fn extract_boundary(&self, tag: BoundaryTag) -> Result<BoundaryMesh> {
        let edges: Vec<[usize; 2]> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| e.vertices)
            .collect();
        if edges.is_empty() {
            return Err(Error::NoSuchBoundary(tag));
        }
        let mut by_start: HashMap<usize, usize> = HashMap::new();
        for (k, e) in edges.iter().enumerate() {
            if by_start.insert(e[0], k).is_some() {
                return Err(Error::DegenerateGeometry(format!(
                    "boundary vertex {} starts two {tag:?} edges",
                    e[0]
                )));
            }
        }
        let mut visited = vec![false; edges.len()];
        let mut ordered = Vec::with_capacity(edges.len());
        let mut loops = Vec::new();
        for first in 0..edges.len() {
            if visited[first] {
                continue;
            }
            let start = ordered.len();
            let mut k = first;
            loop {
                visited[k] = true;
                ordered.push(edges[k]);
                let next_vertex = edges[k][1];
                if next_vertex == edges[first][0] {
                    break;
                }
                match by_start.get(&next_vertex) {
                    Some(&next) if !visited[next] => k = next,
                    _ => {
                        return Err(Error::DegenerateGeometry(format!(
                            "{tag:?} boundary is not closed at vertex {next_vertex}"
                        )))
                    }
                }
            }
            loops.push(start..ordered.len());
        }

        let mut local_of: HashMap<usize, usize> = HashMap::new();
        let mut volume_vertices = Vec::new();
        let mut seg_vertices = Vec::with_capacity(ordered.len());
        for &[a, b] in &ordered {
            let mut local = |v: usize| {
                *local_of.entry(v).or_insert_with(|| {
                    volume_vertices.push(v);
                    volume_vertices.len() - 1
                })
            };
            let la = local(a);
            let lb = local(b);
            seg_vertices.push([la, lb]);
        }
        let points = volume_vertices.iter().map(|&v| self.vertices[v]).collect();
        Ok(BoundaryMesh::from_parts(
            points,
            seg_vertices,
            Some(volume_vertices),
            loops,
        ))
    }

    /// Plain-text dump: counts, vertices, triangles, tagged boundary edges.
    pub fn to_off_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "OFF2D {} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for p in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", p.x, p.y);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let tag = match e.tag {
                BoundaryTag::Coupling => "coupling".to_string(),
                BoundaryTag::Dirichlet(l) => format!("dirichlet{l}"),
            };
            let _ = writeln!(s, "2 {} {} {}", e.vertices[0], e.vertices[1], tag);
        }
        s
    }
}

fn triangle_diameter(p: &[Point2; 3]) -> f64 {
    p[0].distance(p[1])
        .max(p[1].distance(p[2]))
        .max(p[2].distance(p[0]))
}

/// Uniform start triangulation of `(−1/4,1/4)² ∖ [0,1/4]×[−1/4,0]` with grid
/// spacing `h = 0.125`, refined `levels` times. The whole boundary is Γ.
pub fn build_lshape_mesh(levels: usize) -> TriMesh {
    let lines = [-0.25, -0.125, 0.0, 0.125, 0.25];
    let start = TriMesh::from_structured_grid(
        &lines,
        &lines,
        |c| !(c.x > 0.0 && c.y < 0.0),
        |_| Diagonal::Rising,
        |_| BoundaryTag::Coupling,
        0.125,
    )
    .expect("L-shape start mesh is valid");
    start.refined(levels)
}

/// Lower-left and upper-right corners of the two electrodes.
pub const CAPACITOR_ELECTRODES: [(Point2, Point2); 2] = [
    (Point2::new(-0.8, -0.8), Point2::new(-0.6, 0.8)),
    (Point2::new(0.6, -0.8), Point2::new(0.8, 0.8)),
];

/// Capacitor domain `(−2,2)²` minus two electrodes, start grid spacing 1,
/// refined `levels` times. The outer square is Γ, the electrode boundaries
/// are `Dirichlet(1)` (left) and `Dirichlet(2)` (right). Mirror symmetric in
/// `x ↦ −x`, including connectivity.
pub fn build_capacitor_mesh(levels: usize) -> TriMesh {
    let xs = [-2.0, -1.0, -0.8, -0.6, 0.0, 0.6, 0.8, 1.0, 2.0];
    let ys = [-2.0, -1.0, -0.8, 0.0, 0.8, 1.0, 2.0];
    let inside_electrode = |p: Point2| {
        CAPACITOR_ELECTRODES
            .iter()
            .any(|(lo, hi)| p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y)
    };
    let start = TriMesh::from_structured_grid(
        &xs,
        &ys,
        |c| !inside_electrode(c),
        |c| if c.x < 0.0 { Diagonal::Rising } else { Diagonal::Falling },
        |m| {
            if m.x.abs() == 2.0 || m.y.abs() == 2.0 {
                BoundaryTag::Coupling
            } else if m.x < 0.0 {
                BoundaryTag::Dirichlet(1)
            } else {
                BoundaryTag::Dirichlet(2)
            }
        },
        1.0,
    )
    .expect("capacitor start mesh is valid");
    start.refined(levels)
}

/// Straight boundary segment from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn tangent(&self) -> Point2 {
        (self.b - self.a) * (1.0 / self.length())
    }

    /// Right-hand unit normal, outward when the domain lies to the left.
    pub fn normal(&self) -> Point2 {
        let t = self.tangent();
        Point2::new(t.y, -t.x)
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        self.a.lerp(self.b, s)
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        let d = self.b - self.a;
        let s = ((p - self.a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
        p.distance(self.point_at(s))
    }
}

/// Ordered segmentation of Γ. Hosts the P0 flux space (one dof per segment)
/// and the P1 trace space (one dof per boundary vertex).
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    points: Vec<Point2>,
    seg_vertices: Vec<[usize; 2]>,
    volume_vertices: Option<Vec<usize>>,
    loops: Vec<std::ops::Range<usize>>,
    segments: Vec<Segment>,
    normals: Vec<Point2>,
    lengths: Vec<f64>,
}

impl BoundaryMesh {
    fn from_parts(
        points: Vec<Point2>,
        seg_vertices: Vec<[usize; 2]>,
        volume_vertices: Option<Vec<usize>>,
        loops: Vec<std::ops::Range<usize>>,
    ) -> Self {
        let segments: Vec<Segment> = seg_vertices
            .iter()
            .map(|&[a, b]| Segment { a: points[a], b: points[b] })
            .collect();
        let normals = segments.iter().map(Segment::normal).collect();
        let lengths = segments.iter().map(Segment::length).collect();
        Self {
            points,
            seg_vertices,
            volume_vertices,
            loops,
            segments,
            normals,
            lengths,
        }
    }

    /// A single closed polygon through `points` (counterclockwise for an
    /// outward normal pointing away from the enclosed region).
    pub fn polygon(points: Vec<Point2>) -> Self {
        let n = points.len();
        let seg_vertices = (0..n).map(|k| [k, (k + 1) % n]).collect();
        Self::from_parts(points, seg_vertices, None, vec![0..n])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn normals(&self) -> &[Point2] {
        &self.normals
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    /// Local trace-vertex indices of each segment.
    pub fn segment_vertices(&self) -> &[[usize; 2]] {
        &self.seg_vertices
    }

    /// Volume-mesh vertex of each trace vertex, when the boundary is the
    /// trace of a volume mesh.
    pub fn volume_vertices(&self) -> Option<&[usize]> {
        self.volume_vertices.as_deref()
    }

    pub fn loops(&self) -> &[std::ops::Range<usize>] {
        &self.loops
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn max_segment_length(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                d = d.max(p.distance(*q));
            }
        }
        d
    }

    /// Splits every segment into `2^levels` equal pieces. Fine segment
    /// `k · 2^levels + j` lies inside coarse segment `k`. The result is not
    /// linked to a volume mesh.
    pub fn subdivided(&self, levels: usize) -> BoundaryMesh {
        let parts = 1usize << levels;
        let mut points = Vec::with_capacity(self.n_segments() * parts);
        let mut seg_vertices = Vec::with_capacity(self.n_segments() * parts);
        let mut loops = Vec::with_capacity(self.loops.len());
        for range in &self.loops {
            let first_point = points.len();
            let first_seg = seg_vertices.len();
            for seg in &self.segments[range.clone()] {
                for j in 0..parts {
                    points.push(seg.point_at(j as f64 / parts as f64));
                }
            }
            let count = points.len() - first_point;
            for k in 0..count {
                seg_vertices.push([first_point + k, first_point + (k + 1) % count]);
            }
            loops.push(first_seg..seg_vertices.len());
        }
        Self::from_parts(points, seg_vertices, None, loops)
    }

    /// Shortest distance from `p` to the polygon and the index of the
    /// closest segment.
    pub fn distance_to(&self, p: Point2) -> (f64, usize) {
        self.segments
            .iter()
            .enumerate()
            .map(|(k, s)| (s.distance_to(p), k))
            .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best })
    }
}

/// Partition `0 = t⁰ < … < tᴺ = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    /// Exact step of a uniform grid; node differences may differ in the last bit.
    uniform_step: Option<f64>,
}

impl TimeGrid {
    /// Uniform grid with `n` steps of size `end_time / n`.
    pub fn uniform(end_time: f64, n: usize) -> Result<Self> {
        if n == 0 || !(end_time > 0.0) || !end_time.is_finite() {
            return Err(Error::InvalidInput(format!(
                "time grid needs N ≥ 1 and T > 0 (got N={n}, T={end_time})"
            )));
        }
        let tau = end_time / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|k| k as f64 * tau).collect();
        nodes[n] = end_time;
        Ok(Self {
            nodes,
            uniform_step: Some(tau),
        })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "time nodes must start at 0 and increase strictly".into(),
            ));
        }
        Ok(Self {
            nodes,
            uniform_step: None,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn end_time(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Step size τⁿ for `n` in `1..=N`.
    pub fn step(&self, n: usize) -> f64 {
        assert!((1..self.nodes.len()).contains(&n), "step index {n} out of range");
        self.uniform_step.unwrap_or(self.nodes[n] - self.nodes[n - 1])
    }

    pub fn tau_max(&self) -> f64 {
        (1..=self.n_steps()).map(|n| self.step(n)).fold(0.0, f64::max)
    }

    /// Index of the node closest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &s) in self.nodes.iter().enumerate() {
            if (s - t).abs() < (self.nodes[best] - t).abs() {
                best = k;
            }
        }
        best
    }
}
