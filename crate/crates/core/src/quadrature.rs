//! Gauss–Legendre rules, geometrically graded rules and symmetric triangle
//! rules.

use std::f64::consts::PI;

use crate::{Error, Result};

/// n-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite rule on `[0, 1]` graded geometrically towards 0: panels
/// `[σᵏ⁺¹, σᵏ]` for `k < levels` plus `[0, σ^levels]`, each split into
/// `subdivisions` equal parts with `points` Gauss nodes. Integrates
/// `s log s`-type endpoint behaviour to near machine precision.
pub fn graded_rule(points: usize, levels: usize, sigma: f64, subdivisions: usize) -> Vec<(f64, f64)> {
    let gauss = GaussLegendre::new(points);
    let parts = subdivisions.max(1);
    let mut rule = Vec::with_capacity(points * parts * (levels + 1));
    let mut panel = |lo: f64, hi: f64| {
        let width = (hi - lo) / parts as f64;
        for p in 0..parts {
            let a = lo + p as f64 * width;
            rule.extend(gauss.on_interval(a, a + width));
        }
    };
    let mut hi = 1.0;
    for _ in 0..levels {
        let lo = hi * sigma;
        panel(lo, hi);
        hi = lo;
    }
    panel(0.0, hi);
    rule
}

/// Symmetric triangle rule in barycentric coordinates; weights sum to 1.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    degree: usize,
    points: Vec<([f64; 3], f64)>,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree` (1 ≤ degree ≤ 5).
    /// Degree 3 uses the degree-4 rule.
    pub fn with_degree(degree: usize) -> Result<Self> {
        let points = match degree {
            1 => vec![([1.0 / 3.0; 3], 1.0)],
            2 => permutations_of(1.0 / 6.0, 1.0 / 3.0),
            3 | 4 => {
                let mut p = permutations_of(0.445_948_490_915_964_886, 0.223_381_589_678_011_466);
                p.extend(permutations_of(0.091_576_213_509_770_743, 0.109_951_743_655_321_868));
                p
            }
            5 => {
                let mut p = vec![([1.0 / 3.0; 3], 0.225)];
                p.extend(permutations_of(0.470_142_064_105_115_090, 0.132_394_152_788_506_181));
                p.extend(permutations_of(0.101_286_507_323_456_339, 0.125_939_180_544_827_152));
                p
            }
            _ => {
                return Err(Error::InvalidInput(format!(
                    "triangle quadrature degree {degree} not available (1..=5)"
                )))
            }
        };
        Ok(Self { degree, points })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points(&self) -> &[([f64; 3], f64)] {
        &self.points
    }
}

/// The three points `(a, a, 1−2a)` and permutations, each with weight `w`.
fn permutations_of(a: f64, w: f64) -> Vec<([f64; 3], f64)> {
    let b = 1.0 - 2.0 * a;
    vec![([a, a, b], w), ([a, b, a], w), ([b, a, a], w)]
}
