//! Brute-force reference integrals of the raw Laplace kernels by tanh-sinh
//! quadrature, split at points of closest approach. Shares no code with the
//! closed-form formulas.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::PI;

use fembem::mesh::{Point2, Segment};

const MAX_LEVEL: usize = 9;

/// Tanh-sinh sum with step `h` on `[a, b]`; endpoint distances are computed
/// directly so singular endpoints are never evaluated.
fn tanh_sinh_sum(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, h: f64) -> f64 {
    let r = 0.5 * (b - a);
    let mut total = FRAC_PI_2 * f(a + r);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u).exp();
        // 1 − tanh(u) and the weight dx/dt / r
        let gap = 2.0 * e / (1.0 + e);
        let w = FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let delta = r * gap;
        // nodes that round onto an endpoint carry a negligible tail
        if w < 1e-20 || a + delta == a || b - delta == b {
            break;
        }
        total += w * (f(a + delta) + f(b - delta));
        k += 1;
    }
    total * r * h
}

/// Tanh-sinh integral of `f` over `[a, b]`, halving the step until two
/// successive levels agree to `tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut h = 0.5;
    let mut previous = tanh_sinh_sum(&mut f, a, b, h);
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let current = tanh_sinh_sum(&mut f, a, b, h);
        if (current - previous).abs() <= tol {
            return current;
        }
        previous = current;
    }
    previous
}

/// Integral over `[0, 1]` split at the given interior parameters.
fn split_integral(mut f: impl FnMut(f64) -> f64, cuts: &[f64], tol: f64) -> f64 {
    let mut knots = vec![0.0, 1.0];
    knots.extend(cuts.iter().copied().filter(|c| *c > 1e-14 && *c < 1.0 - 1e-14));
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    knots.windows(2).map(|w| integrate(&mut f, w[0], w[1], tol)).sum()
}

/// Parameter of the point on `s` closest to `x`, clamped to `[0, 1]`.
fn closest_parameter(s: &Segment, x: Point2) -> f64 {
    let d = s.b - s.a;
    ((x - s.a).dot(d) / d.dot(d)).clamp(0.0, 1.0)
}

/// `∫_0^1 g(x − y(r), r) dr` over `f`, integrated in offsets from the point
/// of `f` closest to `x` so that tiny offsets keep full precision.
fn inner(f: &Segment, x: Point2, g: impl Fn(Point2, f64) -> f64, tol: f64) -> f64 {
    let s0 = closest_parameter(f, x);
    let d = f.b - f.a;
    let mut base = x - f.point_at(s0);
    // points of f itself: drop the rounding residue
    if base.norm() <= 1e-13 * d.norm() {
        base = Point2::new(0.0, 0.0);
    }
    let h = |sigma: f64| g(base - d * sigma, s0 + sigma);
    integrate(&h, -s0, 0.0, 0.5 * tol) + integrate(&h, 0.0, 1.0 - s0, 0.5 * tol)
}

fn outer_cuts(e: &Segment, f: &Segment) -> [f64; 2] {
    [closest_parameter(e, f.a), closest_parameter(e, f.b)]
}

/// `∫_e ∫_f −(1/2π) log|x−y| ds_y ds_x`.
pub fn single_layer(e: &Segment, f: &Segment, tol: f64) -> f64 {
    let (he, hf) = (e.length(), f.length());
    let outer = |s: f64| {
        let g = |diff: Point2, _r: f64| -diff.norm().ln() / (2.0 * PI) * hf;
        inner(f, e.point_at(s), g, 0.01 * tol)
    };
    split_integral(outer, &outer_cuts(e, f), tol) * he
}

/// `∫_e ∫_f ∂_{n_y}G(x,y) ψ_k(y) ds_y ds_x` for the start (`k = 0`) and end
/// (`k = 1`) hats of `f`, `n_y` the right-hand normal of `f`.
pub fn double_layer(e: &Segment, f: &Segment, k: usize, tol: f64) -> f64 {
    let (he, hf) = (e.length(), f.length());
    let t = (f.b - f.a) * (1.0 / hf);
    let n = Point2::new(t.y, -t.x);
    let outer = |s: f64| {
        let g = |diff: Point2, r: f64| {
            let r2 = diff.dot(diff);
            let hat = if k == 0 { 1.0 - r } else { r };
            if r2 == 0.0 {
                0.0
            } else {
                diff.dot(n) / r2 / (2.0 * PI) * hat * hf
            }
        };
        inner(f, e.point_at(s), g, 0.01 * tol)
    };
    split_integral(outer, &outer_cuts(e, f), tol) * he
}
