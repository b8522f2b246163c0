//! Shared fixtures for the benchmarks.

use firefront::force::build_fields;
use firefront::force::EdgeParams;
use firefront::phantom::{generate_phantom, PhantomKind, PhantomSpec};
use firefront::{EdgeMap, ForceFieldParams, Grid, Point, VectorField};

/// Edge map of a ring of unit-strength pixels, the usual potential workload.
pub fn ring_edges(n: usize, radius: f64) -> EdgeMap {
    let c = n as f64 / 2.0;
    EdgeMap::new(Grid::from_fn(n, n, |x, y| {
        let d = (x as f64 - c).hypot(y as f64 - c);
        if (d - radius).abs() < 0.5 {
            1.0
        } else {
            0.0
        }
    }))
    .unwrap()
}

/// Normalized force of the default two-circle phantom.
pub fn two_circle_force() -> (VectorField, Point, f64) {
    let ph = generate_phantom(&PhantomSpec::new(PhantomKind::TwoCircle)).unwrap();
    let fields = build_fields(&ph.image, &EdgeParams::default(), &ForceFieldParams::default(), true).unwrap();
    (fields.force, ph.seed.center, ph.seed.radius)
}
