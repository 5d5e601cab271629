use std::sync::Arc;

use fembem::convergence::{compute_eoc, ErrorMeasure, ExactSolution, LevelErrors, NormKind};
use fembem::fem::{Diffusion, ScalarField};
use fembem::mesh::{build_lshape_mesh, Point2, TimeGrid};
use fembem::timestep::{CoupledTrajectory, Discretization, QuadratureConfig};
use proptest::prelude::*;

/// `u = (1 + t)(a + b·x + c·y)` with a constant exterior flux.
struct Affine {
    a: f64,
    b: f64,
    c: f64,
    flux: f64,
}

impl Affine {
    fn spatial(&self, p: Point2) -> f64 {
        self.a + self.b * p.x + self.c * p.y
    }
}

impl ExactSolution for Affine {
    fn u(&self, p: Point2, t: f64) -> f64 {
        (1.0 + t) * self.spatial(p)
    }
    fn grad_u(&self, _: Point2, t: f64) -> Point2 {
        Point2::new(self.b, self.c) * (1.0 + t)
    }
    fn dt_u(&self, p: Point2, _: f64) -> f64 {
        self.spatial(p)
    }
    fn exterior(&self, _: Point2, _: f64) -> f64 {
        0.0
    }
    fn flux(&self, _: Point2, _: Point2, _: f64) -> f64 {
        self.flux
    }
}

fn disc(level: usize) -> Discretization {
    Discretization::new(Arc::new(build_lshape_mesh(level)), &Diffusion::default()).unwrap()
}

fn trajectory(disc: &Discretization, grid: TimeGrid, u: impl Fn(f64) -> Vec<f64>, phi: f64) -> CoupledTrajectory {
    let n_flux = disc.pair.n_flux();
    CoupledTrajectory {
        u: grid.nodes().iter().map(|&t| u(t)).collect(),
        phi: vec![vec![phi; n_flux]; grid.n_steps()],
        grid,
        factorizations: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn representable_solutions_have_zero_error(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, flux in -2.0f64..2.0,
    ) {
        let d = disc(1);
        let exact = Affine { a, b, c, flux };
        let field: ScalarField = Arc::new(move |p, _| a + b * p.x + c * p.y);
        let nodal = d.space.interpolate(&field, 0.0);
        let traj = trajectory(&d, TimeGrid::uniform(1.0, 4).unwrap(), |t| nodal.iter().map(|v| (1.0 + t) * v).collect(), flux);
        let measure = ErrorMeasure::new(&d, QuadratureConfig::default(), 1).unwrap();
        let errors = measure.measure_all(&traj, &exact).unwrap();
        for value in [errors.l2, errors.h1semi, errors.h1dual, errors.energy_v, errors.l2_proj, errors.h1semi_proj, errors.energy_v_proj] {
            prop_assert!(value < 1e-10, "{errors:?}");
        }
    }
}

#[test]
fn l2_error_of_the_zero_trajectory() {
    // u = t on the L-shape of area 3/16: (∫₀¹ t² · 3/16 dt)^{1/2} = 1/4
    struct Ramp;
    impl ExactSolution for Ramp {
        fn u(&self, _: Point2, t: f64) -> f64 {
            t
        }
        fn grad_u(&self, _: Point2, _: f64) -> Point2 {
            Point2::default()
        }
        fn dt_u(&self, _: Point2, _: f64) -> f64 {
            1.0
        }
        fn exterior(&self, _: Point2, _: f64) -> f64 {
            0.0
        }
        fn flux(&self, _: Point2, _: Point2, _: f64) -> f64 {
            0.0
        }
    }
    let d = disc(1);
    let n = d.space.n_dofs();
    let traj = trajectory(&d, TimeGrid::uniform(1.0, 3).unwrap(), |_| vec![0.0; n], 0.0);
    let measure = ErrorMeasure::new(&d, QuadratureConfig::default(), 1).unwrap();
    let l2 = measure.bochner_error(&traj, &Ramp, NormKind::L2).unwrap();
    assert!((l2 - 0.25).abs() < 1e-13, "{l2}");
    assert_eq!(measure.bochner_error(&traj, &Ramp, NormKind::H1Semi).unwrap(), 0.0);
}

#[test]
fn dual_bound_ignores_constant_shifts() {
    let d = disc(1);
    let exact = Affine { a: 0.3, b: -1.0, c: 2.0, flux: 0.0 };
    let n = d.space.n_dofs();
    let wobble = |t: f64| -> Vec<f64> { (0..n).map(|i| (i as f64 + 5.0 * t).sin()).collect() };
    let grid = TimeGrid::uniform(1.0, 5).unwrap();
    let measure = ErrorMeasure::new(&d, QuadratureConfig::default(), 1).unwrap();
    let base = measure.dual_norm_bound(&trajectory(&d, grid.clone(), wobble, 0.0), &exact).unwrap();
    let shifted = measure
        .dual_norm_bound(&trajectory(&d, grid, |t| wobble(t).iter().map(|v| v + 7.0).collect(), 0.0), &exact)
        .unwrap();
    assert!(base > 0.1);
    assert!((base - shifted).abs() < 1e-12 * base);
}

#[test]
fn v_energy_of_a_constant_offset() {
    let d = disc(1);
    let n = d.space.n_dofs();
    let exact = Affine { a: 0.0, b: 0.0, c: 0.0, flux: 0.0 };
    let offset = -1.5;
    let end_time = 0.75;
    let traj = trajectory(&d, TimeGrid::uniform(end_time, 3).unwrap(), |_| vec![0.0; n], offset);
    let ones = vec![1.0; d.pair.n_flux()];
    let capacity = d.operators.single_layer.quadratic_form(&ones);
    let expected = offset.abs() * (end_time * capacity).sqrt();
    for refine in [1, 2, 3] {
        let measure = ErrorMeasure::new(&d, QuadratureConfig::default(), refine).unwrap();
        let value = measure.v_energy_error(&traj, &exact).unwrap();
        assert!((value - expected).abs() < 1e-11 * expected, "refine {refine}: {value} vs {expected}");
    }
    assert!(ErrorMeasure::new(&d, QuadratureConfig::default(), 0).is_err());
}

#[test]
fn eoc_values() {
    let h = [0.5, 0.25, 0.125, 0.0625];
    let cubic: Vec<f64> = h.iter().map(|x| 3.0 * x * x * x).collect();
    assert!(compute_eoc(&cubic, &h).iter().all(|r| (r - 3.0).abs() < 1e-12));
    let n = [20.0, 40.0, 80.0];
    let e = [0.4, 0.2, 0.1];
    assert!(compute_eoc(&e, &n).iter().all(|r| (r + 1.0).abs() < 1e-12));
    let rates = compute_eoc(&[1.0, 0.0, 0.5], &[1.0, 0.5, 0.25]);
    assert!(rates.iter().all(|r| r.is_nan()));
    assert!(compute_eoc(&[1.0], &[1.0]).is_empty());
}

#[test]
fn aggregates_combine_components() {
    let errors = LevelErrors {
        inv_h: 8.0,
        n_intervals: 20,
        l2: 3.0,
        l2_proj: 1.0,
        h1semi: 4.0,
        h1semi_proj: 2.0,
        h1dual: 12.0,
        energy_v: 0.5,
        energy_v_proj: 0.25,
        global_energy: 0.0,
        global_energy_proj: 0.0,
    }
    .with_aggregates();
    assert_eq!(errors.global_energy, 13.5);
    assert!((errors.global_energy_proj - (149.0f64.sqrt() + 0.25)).abs() < 1e-14);
}
