//! Manufactured solutions on the L-shape and the capacitor configuration.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use crate::convergence::ExactSolution;
use crate::fem::{BoundaryField, DirichletSpec, Diffusion, ScalarField};
use crate::mesh::Point2;
use crate::timestep::ProblemData;
use crate::{Error, Result};

/// Logarithmic pole of every exterior solution (inside the L-shape).
pub const EXTERIOR_CENTER: Point2 = Point2::new(-0.125, 0.125);

/// Interior diffusion of the capacitor demo.
pub const CAPACITOR_DIFFUSION: f64 = 5.0;

/// Time at which the electrode polarity flips.
pub const POLARITY_SWITCH: f64 = 0.5;

/// Smallest radius used when dividing by `r` near the re-entrant corner.
const RADIUS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedCase {
    /// `u = sin(2πt)·p(x)`
    Smooth,
    /// `u = (1 + t²)·r^{2/3} sin(2θ/3)`
    Corner,
    /// `u = t^{5/6}·p(x)`
    TimeSingular,
}

impl FromStr for ManufacturedCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smooth" => Ok(ManufacturedCase::Smooth),
            "corner" => Ok(ManufacturedCase::Corner),
            "time_singular" | "time-singular" => Ok(ManufacturedCase::TimeSingular),
            other => Err(Error::InvalidInput(format!("unknown manufactured case '{other}'"))),
        }
    }
}

/// `p(x) = (1 − 100|x|²) e^{−50|x|²}` with gradient and Laplacian.
fn bump(p: Point2) -> (f64, Point2, f64) {
    let s = p.dot(p);
    let e = (-50.0 * s).exp();
    let value = (1.0 - 100.0 * s) * e;
    let ds = e * (-150.0 + 5000.0 * s);
    let laplace = 4.0 * e * (-150.0 + 17500.0 * s - 250000.0 * s * s);
    (value, p * (2.0 * ds), laplace)
}

/// `r^{2/3} sin(2θ/3)` with θ ∈ [−π/4, 7π/4) and its gradient; harmonic.
fn corner(p: Point2) -> (f64, Point2) {
    let mut theta = p.y.atan2(p.x);
    if theta < -PI / 4.0 {
        theta += 2.0 * PI;
    }
    let r = p.norm();
    let value = r.powf(2.0 / 3.0) * (2.0 * theta / 3.0).sin();
    let scale = 2.0 / 3.0 * r.max(RADIUS_FLOOR).powf(-1.0 / 3.0);
    let grad = Point2::new(-(theta / 3.0).sin(), (theta / 3.0).cos()) * scale;
    (value, grad)
}

impl ManufacturedCase {
    pub fn name(self) -> &'static str {
        match self {
            ManufacturedCase::Smooth => "smooth",
            ManufacturedCase::Corner => "corner",
            ManufacturedCase::TimeSingular => "time_singular",
        }
    }

    /// `(a(t), a'(t))` of the separable interior solution `a(t)·s(x)`.
    fn time_factor(self, t: f64) -> (f64, f64) {
        match self {
            ManufacturedCase::Smooth => ((2.0 * PI * t).sin(), 2.0 * PI * (2.0 * PI * t).cos()),
            ManufacturedCase::Corner => (1.0 + t * t, 2.0 * t),
            ManufacturedCase::TimeSingular => {
                if t <= 0.0 {
                    (0.0, f64::INFINITY)
                } else {
                    (t.powf(5.0 / 6.0), 5.0 / 6.0 * t.powf(-1.0 / 6.0))
                }
            }
        }
    }

    /// `(s, ∇s, Δs)` of the spatial profile.
    fn profile(self, p: Point2) -> (f64, Point2, f64) {
        match self {
            ManufacturedCase::Smooth | ManufacturedCase::TimeSingular => bump(p),
            ManufacturedCase::Corner => {
                let (v, g) = corner(p);
                (v, g, 0.0)
            }
        }
    }

    /// Source `f̃ = ∂_t u − Δu`.
    pub fn source(self, p: Point2, t: f64) -> f64 {
        let (a, da) = self.time_factor(t);
        let (s, _, lap) = self.profile(p);
        da * s - a * lap
    }

    /// Problem data with `f̃`, `g̃ = u − u_e`, `h̃ = ∂_n u − φ` on the L-shape.
    pub fn problem_data(self) -> ProblemData {
        let source: ScalarField = Arc::new(move |p, t| self.source(p, t));
        let trace_jump: ScalarField = Arc::new(move |p, t| self.u(p, t) - self.exterior(p, t));
        let flux_jump: BoundaryField =
            Arc::new(move |p, n, t| self.grad_u(p, t).dot(n) - self.flux(p, n, t));
        let initial: Option<ScalarField> = match self {
            ManufacturedCase::Corner => Some(Arc::new(move |p, _| self.u(p, 0.0))),
            _ => None,
        };
        ProblemData {
            source: Some(source),
            trace_jump: Some(trace_jump),
            flux_jump: Some(flux_jump),
            diffusion: Diffusion::Constant(1.0),
            dirichlet: DirichletSpec::new(),
            initial,
            end_time: 1.0,
        }
    }
}

impl ExactSolution for ManufacturedCase {
    fn u(&self, p: Point2, t: f64) -> f64 {
        self.time_factor(t).0 * self.profile(p).0
    }

    fn grad_u(&self, p: Point2, t: f64) -> Point2 {
        self.profile(p).1 * self.time_factor(t).0
    }

    fn dt_u(&self, p: Point2, t: f64) -> f64 {
        self.time_factor(t).1 * self.profile(p).0
    }

    fn exterior(&self, p: Point2, t: f64) -> f64 {
        (1.0 - t) * p.distance(EXTERIOR_CENTER).ln()
    }

    fn flux(&self, p: Point2, n: Point2, t: f64) -> f64 {
        let d = p - EXTERIOR_CENTER;
        (1.0 - t) * d.dot(n) / d.dot(d)
    }
}

/// Electrode potential of `label` (1 = left, 2 = right) at time `t`.
pub fn electrode_potential(label: u32, t: f64) -> f64 {
    let left = if t < POLARITY_SWITCH { -1.0 } else { 1.0 };
    if label == 1 {
        left
    } else {
        -left
    }
}

/// Capacitor problem: no sources or jumps, interior diffusion 5, electrodes
/// at ±1 with reversed polarity from `t = 0.5`.
pub fn capacitor_problem() -> ProblemData {
    let spec = DirichletSpec::new()
        .with(1, Arc::new(|_, t| electrode_potential(1, t)))
        .with(2, Arc::new(|_, t| electrode_potential(2, t)));
    ProblemData {
        source: None,
        trace_jump: None,
        flux_jump: None,
        diffusion: Diffusion::Constant(CAPACITOR_DIFFUSION),
        dirichlet: spec,
        initial: None,
        end_time: 1.0,
    }
}
