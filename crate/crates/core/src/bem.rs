//! Galerkin boundary elements for the 2D Laplace kernel
//! `G(x, y) = −(1/2π) log|x − y|`.
//!
//! Flux unknowns are piecewise constant per segment (P0), traces are
//! continuous piecewise linear on the boundary vertices (P1). Inner
//! integrals over a segment are evaluated in closed form; the outer
//! integral uses Gauss rules chosen by the segment-pair geometry.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::linalg::{DenseMatrix, SparseMatrix, TripletBuilder};
use crate::mesh::{BoundaryMesh, Point2, Segment};
use crate::quadrature::{graded_rule, GaussLegendre};
use crate::{Error, Result};

/// Gauss points per panel for well-separated segment pairs.
const FAR_POINTS: usize = 8;
/// Gauss points per panel for nearby segment pairs.
const NEAR_POINTS: usize = 16;
const MAX_NEAR_PANELS: usize = 64;
/// Geometric grading towards a shared vertex.
const GRADED_POINTS: usize = 16;
const GRADED_LEVELS: usize = 40;
const GRADED_RATIO: f64 = 0.5;
/// Cap on the per-panel splitting used for narrow wedges.
const MAX_WEDGE_SUBDIVISIONS: usize = 16;

/// P0 flux space and P1 trace space on one boundary mesh.
#[derive(Debug, Clone)]
pub struct BemSpacePair {
    boundary: Arc<BoundaryMesh>,
}

impl BemSpacePair {
    pub fn new(boundary: Arc<BoundaryMesh>) -> Self {
        Self { boundary }
    }

    pub fn boundary(&self) -> &BoundaryMesh {
        &self.boundary
    }

    pub fn n_flux(&self) -> usize {
        self.boundary.n_segments()
    }

    pub fn n_trace(&self) -> usize {
        self.boundary.n_vertices()
    }
}

/// Closed-form integrals over one segment for a fixed target `x`:
/// `log = ∫ log|x−y| ds_y` and
/// `dlp[k] = ∫ (x−y)·n_y / |x−y|² · ψ_k(y) ds_y`
/// with `ψ_0`, `ψ_1` the linear hats at the start and end point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMoments {
    pub log: f64,
    pub dlp: [f64; 2],
}

impl SegmentMoments {
    /// Double-layer integral of the constant 1 (minus the subtended angle).
    pub fn dlp_total(&self) -> f64 {
        self.dlp[0] + self.dlp[1]
    }
}

/// `½ u log(u² + d²)` with the limit 0 at `u = d = 0`.
fn half_u_log(u: f64, d: f64) -> f64 {
    let r2 = u * u + d * d;
    if r2 == 0.0 {
        0.0
    } else {
        0.5 * u * r2.ln()
    }
}

pub fn segment_moments(seg: &Segment, x: Point2) -> SegmentMoments {
    let h = seg.length();
    let t = seg.tangent();
    let n = Point2::new(t.y, -t.x);
    let rel = x - seg.a;
    let xi = rel.dot(t);
    let mut d = rel.dot(n);
    if d.abs() <= 1e-14 * h {
        d = 0.0;
    }
    let u1 = -xi;
    let u2 = h - xi;
    let theta = if d == 0.0 {
        0.0
    } else {
        (d * (u2 - u1)).atan2(d * d + u1 * u2)
    };
    let log = half_u_log(u2, d) - half_u_log(u1, d) - (u2 - u1) + d * theta;
    let dlp = if d == 0.0 {
        [0.0, 0.0]
    } else {
        let d0 = theta;
        let d1 = xi * theta + 0.5 * d * ((u2 * u2 + d * d) / (u1 * u1 + d * d)).ln();
        [d0 - d1 / h, d1 / h]
    };
    SegmentMoments { log, dlp }
}

/// How two segments relate geometrically.
#[derive(Debug, Clone, Copy, PartialEq)]
enum PairRelation {
    Identical,
    /// Shared vertex at parameter 0 (`false`) or 1 (`true`) of the outer
    /// segment; narrow wedges split every graded panel into `subdivisions`.
    SharedVertex { at_end: bool, subdivisions: usize },
    Separated { distance: f64 },
}

fn segment_distance(e: &Segment, f: &Segment) -> f64 {
    let cross = |p: Point2, q: Point2, r: Point2| (q - p).cross(r - p);
    let o1 = cross(e.a, e.b, f.a);
    let o2 = cross(e.a, e.b, f.b);
    let o3 = cross(f.a, f.b, e.a);
    let o4 = cross(f.a, f.b, e.b);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return 0.0;
    }
    e.distance_to(f.a)
        .min(e.distance_to(f.b))
        .min(f.distance_to(e.a))
        .min(f.distance_to(e.b))
}

fn classify(e: &Segment, f: &Segment) -> Result<PairRelation> {
    if (e.a == f.a && e.b == f.b) || (e.a == f.b && e.b == f.a) {
        return Ok(PairRelation::Identical);
    }
    let shared = if e.a == f.a || e.a == f.b {
        Some((false, e.a))
    } else if e.b == f.a || e.b == f.b {
        Some((true, e.b))
    } else {
        None
    };
    let scale = e.length().max(f.length());
    if let Some((at_end, v)) = shared {
        let e_other = if at_end { e.a } else { e.b };
        let f_other = if f.a == v { f.b } else { f.a };
        let (de, df) = (e_other - v, f_other - v);
        if de.cross(df).abs() <= 1e-12 * de.norm() * df.norm() && de.dot(df) > 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "overlapping segments meeting at ({}, {})",
                v.x, v.y
            )));
        }
        // a point at distance ρ from the vertex is ρ·sin α away from the other
        // segment when the wedge angle α is acute
        let sin_wedge = de.cross(df).abs() / (de.norm() * df.norm());
        let subdivisions = if de.dot(df) <= 0.0 {
            1
        } else {
            ((0.5 / sin_wedge).ceil() as usize).clamp(1, MAX_WEDGE_SUBDIVISIONS)
        };
        return Ok(PairRelation::SharedVertex { at_end, subdivisions });
    }
    let distance = segment_distance(e, f);
    if distance <= 1e-12 * scale {
        return Err(Error::DegenerateGeometry(format!(
            "segments ({:?}, {:?}) and ({:?}, {:?}) touch or intersect",
            e.a, e.b, f.a, f.b
        )));
    }
    Ok(PairRelation::Separated { distance })
}

/// Outer quadrature on `[0, 1]` for the parameter of `e`.
fn outer_rule(e: &Segment, f: &Segment, relation: PairRelation) -> Vec<(f64, f64)> {
    match relation {
        PairRelation::Identical => Vec::new(),
        PairRelation::SharedVertex { at_end, subdivisions } => {
            let rule = graded_rule(GRADED_POINTS, GRADED_LEVELS, GRADED_RATIO, subdivisions);
            if at_end {
                rule.into_iter().map(|(s, w)| (1.0 - s, w)).collect()
            } else {
                rule
            }
        }
        PairRelation::Separated { distance } => {
            let (he, hf) = (e.length(), f.length());
            if distance > 0.5 * (he + hf) {
                GaussLegendre::new(FAR_POINTS).on_interval(0.0, 1.0).collect()
            } else {
                let panels = ((2.0 * he / distance).ceil() as usize).clamp(1, MAX_NEAR_PANELS);
                let gauss = GaussLegendre::new(NEAR_POINTS);
                (0..panels)
                    .flat_map(|k| {
                        let lo = k as f64 / panels as f64;
                        let hi = (k + 1) as f64 / panels as f64;
                        gauss.on_interval(lo, hi).collect::<Vec<_>>()
                    })
                    .collect()
            }
        }
    }
}

/// Single-layer entry for a segment with itself.
pub fn single_layer_self(h: f64) -> f64 {
    h * h / (2.0 * PI) * (1.5 - h.ln())
}

/// `∫_e ∫_f G(x, y) ds_y ds_x`.
pub fn single_layer_entry(e: &Segment, f: &Segment) -> Result<f64> {
    let relation = classify(e, f)?;
    if relation == PairRelation::Identical {
        return Ok(single_layer_self(e.length()));
    }
    let he = e.length();
    let integral: f64 = outer_rule(e, f, relation)
        .into_iter()
        .map(|(s, w)| w * segment_moments(f, e.point_at(s)).log)
        .sum();
    Ok(-he * integral / (2.0 * PI))
}

/// `∫_e ∫_f ∂_{n_y}G(x, y) ψ_k(y) ds_y ds_x` for the two hats of `f`.
pub fn double_layer_entries(e: &Segment, f: &Segment) -> Result<[f64; 2]> {
    let relation = classify(e, f)?;
    if relation == PairRelation::Identical {
        return Ok([0.0, 0.0]);
    }
    let he = e.length();
    let mut acc = [0.0, 0.0];
    for (s, w) in outer_rule(e, f, relation) {
        let m = segment_moments(f, e.point_at(s));
        acc[0] += w * m.dlp[0];
        acc[1] += w * m.dlp[1];
    }
    let scale = he / (2.0 * PI);
    Ok([acc[0] * scale, acc[1] * scale])
}

/// Galerkin single-layer matrix `V` (P0 × P0), symmetric.
pub fn assemble_single_layer(pair: &BemSpacePair) -> Result<DenseMatrix> {
    let segments = pair.boundary().segments();
    let m = segments.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i..m)
                .map(|j| single_layer_entry(&segments[i], &segments[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut v = DenseMatrix::zeros(m, m);
    for (i, row) in rows.iter().enumerate() {
        for (k, &value) in row.iter().enumerate() {
            v[(i, i + k)] = value;
            v[(i + k, i)] = value;
        }
    }
    Ok(v)
}

/// Galerkin double-layer matrix `K` (P0 test rows × P1 trace columns).
pub fn assemble_double_layer(pair: &BemSpacePair) -> Result<DenseMatrix> {
    let boundary = pair.boundary();
    let segments = boundary.segments();
    let seg_vertices = boundary.segment_vertices();
    let n_trace = pair.n_trace();
    let rows: Vec<Vec<f64>> = (0..segments.len())
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n_trace];
            for (f, &[a, b]) in segments.iter().zip(seg_vertices) {
                let [ka, kb] = double_layer_entries(&segments[i], f)?;
                row[a] += ka;
                row[b] += kb;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut k = DenseMatrix::zeros(segments.len(), n_trace);
    for (i, row) in rows.into_iter().enumerate() {
        k.row_mut(i).copy_from_slice(&row);
    }
    Ok(k)
}

/// Mixed boundary mass `M_Γ[e][j] = ∫_e ψ_j ds` (P0 × P1).
pub fn assemble_boundary_mass(pair: &BemSpacePair) -> SparseMatrix {
    let boundary = pair.boundary();
    let mut b = TripletBuilder::new(pair.n_flux(), pair.n_trace());
    for (e, (&[va, vb], &h)) in boundary.segment_vertices().iter().zip(boundary.lengths()).enumerate() {
        b.add(e, va, 0.5 * h);
        b.add(e, vb, 0.5 * h);
    }
    b.finalize()
}

/// Trace coupling `C[i][e] = ∫_e φ_i ds` (volume dofs × P0) and the
/// boundary mass `M_Γ`. The boundary must be the trace of a volume mesh
/// with `n_volume` vertices.
pub fn assemble_trace_coupling(
    pair: &BemSpacePair,
    n_volume: usize,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let mass = assemble_boundary_mass(pair);
    // C = Rᵀ M_Γᵀ: the boundary mass lifted to volume numbering
    let restriction = trace_restriction(pair, n_volume)?;
    let mut b = TripletBuilder::new(n_volume, pair.n_flux());
    for (e, j, v) in mass.triplets() {
        for (vol, _) in restriction.row(j) {
            b.add(vol, e, v);
        }
    }
    Ok((b.finalize(), mass))
}

/// Restriction `R` from volume dofs to trace dofs (P1 × volume).
pub fn trace_restriction(pair: &BemSpacePair, n_volume: usize) -> Result<SparseMatrix> {
    let volume = pair.boundary().volume_vertices().ok_or_else(|| {
        Error::InvalidInput("boundary mesh is not the trace of a volume mesh".into())
    })?;
    let mut b = TripletBuilder::new(pair.n_trace(), n_volume);
    for (k, &v) in volume.iter().enumerate() {
        if v >= n_volume {
            return Err(Error::DimensionMismatch {
                expected: n_volume,
                found: v + 1,
            });
        }
        b.add(k, v, 1.0);
    }
    Ok(b.finalize())
}

/// Where a point lies relative to the boundary polygon(s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointLocation {
    /// Outside Ω̄; `near_field` when closer to Γ than the nearest segment's length.
    Exterior { near_field: bool },
    OnBoundary,
    Interior,
}

pub fn locate(boundary: &BoundaryMesh, p: Point2) -> PointLocation {
    let (distance, nearest) = boundary.distance_to(p);
    if distance <= 1e-12 * boundary.max_segment_length() {
        return PointLocation::OnBoundary;
    }
    // the double layer of 1 equals −2π inside and 0 outside
    let total: f64 = boundary
        .segments()
        .iter()
        .map(|s| segment_moments(s, p).dlp_total())
        .sum();
    if -total / (2.0 * PI) > 0.5 {
        PointLocation::Interior
    } else {
        PointLocation::Exterior {
            near_field: distance < boundary.lengths()[nearest],
        }
    }
}

/// Exterior potential values with their near-field flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorValues {
    pub values: Vec<f64>,
    pub near_field: Vec<bool>,
}

/// Representation formula
/// `u_e(x) = ∫_Γ ∂_{n_y}G(x,y) u_e(y) ds_y − ∫_Γ G(x,y) φ(y) ds_y`.
pub fn evaluate_exterior(
    pair: &BemSpacePair,
    trace: &[f64],
    flux: &[f64],
    points: &[Point2],
) -> Result<ExteriorValues> {
    let boundary = pair.boundary();
    if trace.len() != pair.n_trace() {
        return Err(Error::DimensionMismatch {
            expected: pair.n_trace(),
            found: trace.len(),
        });
    }
    if flux.len() != pair.n_flux() {
        return Err(Error::DimensionMismatch {
            expected: pair.n_flux(),
            found: flux.len(),
        });
    }
    let results: Vec<(f64, bool)> = points
        .par_iter()
        .enumerate()
        .map(|(index, &p)| {
            let near_field = match locate(boundary, p) {
                PointLocation::Exterior { near_field } => near_field,
                _ => {
                    return Err(Error::InteriorEvaluationPoint {
                        index,
                        x: p.x,
                        y: p.y,
                    })
                }
            };
            let mut value = 0.0;
            for ((seg, &[a, b]), &phi) in boundary
                .segments()
                .iter()
                .zip(boundary.segment_vertices())
                .zip(flux)
            {
                let m = segment_moments(seg, p);
                value += m.dlp[0] * trace[a] + m.dlp[1] * trace[b] + phi * m.log;
            }
            Ok((value / (2.0 * PI), near_field))
        })
        .collect::<Result<_>>()?;
    let (values, near_field) = results.into_iter().unzip();
    Ok(ExteriorValues { values, near_field })
}

/// `a = (1/2π) ∫_Γ φ ds` for a P0 flux.
pub fn radiation_coefficient(pair: &BemSpacePair, flux: &[f64]) -> f64 {
    pair.boundary()
        .lengths()
        .iter()
        .zip(flux)
        .map(|(h, phi)| h * phi)
        .sum::<f64>()
        / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_lshape_mesh, BoundaryTag};

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment {
            a: Point2::new(ax, ay),
            b: Point2::new(bx, by),
        }
    }

    fn lshape_pair(levels: usize) -> BemSpacePair {
        let mesh = build_lshape_mesh(levels);
        BemSpacePair::new(Arc::new(mesh.extract_boundary(BoundaryTag::Coupling).unwrap()))
    }

    #[test]
    fn self_entry_closed_form() {
        let s = seg(0.1, 0.2, 0.4, 0.6);
        let h: f64 = 0.5;
        let want = h * h / (2.0 * PI) * (1.5 - h.ln());
        assert!((single_layer_entry(&s, &s).unwrap() - want).abs() < 1e-15);
        assert_eq!(double_layer_entries(&s, &s).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn collinear_neighbours_have_zero_double_layer() {
        let e = seg(0.0, 0.0, 1.0, 0.0);
        let f = seg(1.0, 0.0, 2.0, 0.0);
        assert_eq!(double_layer_entries(&e, &f).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn degenerate_pairs_are_rejected() {
        let e = seg(0.0, 0.0, 1.0, 0.0);
        let overlap = seg(0.0, 0.0, 0.5, 0.0);
        let crossing = seg(0.5, -0.5, 0.5, 0.5);
        assert!(matches!(single_layer_entry(&e, &overlap), Err(Error::DegenerateGeometry(_))));
        assert!(matches!(double_layer_entries(&e, &crossing), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn moments_far_field_match_point_source() {
        let s = seg(0.0, 0.0, 0.01, 0.0);
        let x = Point2::new(3.0, 4.0);
        let m = segment_moments(&s, x);
        let mid = Point2::new(0.005, 0.0);
        assert!((m.log - 0.01 * x.distance(mid).ln()).abs() < 1e-8);
    }

    #[test]
    fn galerkin_identity_on_lshape() {
        let pair = lshape_pair(1);
        let k = assemble_double_layer(&pair).unwrap();
        let mg = assemble_boundary_mass(&pair).to_dense();
        let ones = vec![1.0; pair.n_trace()];
        let lhs: Vec<f64> = mg
            .matvec(&ones)
            .iter()
            .zip(k.matvec(&ones))
            .map(|(m, kk)| 0.5 * m - kk)
            .collect();
        for (v, h) in lhs.iter().zip(pair.boundary().lengths()) {
            assert!((v - h).abs() < 1e-10, "{v} vs {h}");
        }
    }

    #[test]
    fn single_layer_is_spd_on_lshape() {
        let v = assemble_single_layer(&lshape_pair(0)).unwrap();
        assert!(v.symmetry_defect() < 1e-12);
        assert!(v.is_positive_definite());
    }

    #[test]
    fn trace_coupling_entries() {
        let mesh = build_lshape_mesh(0);
        let pair = BemSpacePair::new(Arc::new(mesh.extract_boundary(BoundaryTag::Coupling).unwrap()));
        let (c, mg) = assemble_trace_coupling(&pair, mesh.n_vertices()).unwrap();
        let total: f64 = mg.triplets().map(|t| t.2).sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert_eq!(c.rows(), mesh.n_vertices());
        assert_eq!(c.cols(), pair.n_flux());
        let volume = pair.boundary().volume_vertices().unwrap();
        for (e, j, v) in mg.triplets() {
            assert_eq!(c.get(volume[j], e), v);
        }
    }

    #[test]
    fn exterior_evaluation_rejects_interior_points() {
        let pair = lshape_pair(0);
        let zeros_t = vec![0.0; pair.n_trace()];
        let zeros_f = vec![0.0; pair.n_flux()];
        let out = evaluate_exterior(&pair, &zeros_t, &zeros_f, &[Point2::new(1.0, 1.0)]).unwrap();
        assert_eq!(out.values, vec![0.0]);
        let inside = evaluate_exterior(&pair, &zeros_t, &zeros_f, &[Point2::new(-0.1, 0.1)]);
        assert!(matches!(inside, Err(Error::InteriorEvaluationPoint { index: 0, .. })));
        // the missing quadrant is exterior
        assert!(matches!(
            locate(pair.boundary(), Point2::new(0.1, -0.1)),
            PointLocation::Exterior { .. }
        ));
    }

    #[test]
    fn radiation_coefficient_of_constant_flux() {
        let pair = lshape_pair(0);
        let a = radiation_coefficient(&pair, &vec![3.0; pair.n_flux()]);
        assert!((a - 3.0 * 2.0 / (2.0 * PI)).abs() < 1e-14);
    }
}
