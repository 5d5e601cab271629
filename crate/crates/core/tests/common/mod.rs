#![allow(dead_code)]

pub mod oracle;

use fembem::mesh::{Point2, Segment};
use rand::Rng;

pub fn seg(a: Point2, b: Point2) -> Segment {
    Segment { a, b }
}

pub fn random_point<R: Rng>(rng: &mut R, half_width: f64) -> Point2 {
    Point2::new(rng.gen_range(-half_width..half_width), rng.gen_range(-half_width..half_width))
}

/// Random point at distance `r` from `p`.
pub fn around<R: Rng>(rng: &mut R, p: Point2, r: f64) -> Point2 {
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    Point2::new(p.x + r * a.cos(), p.y + r * a.sin())
}
