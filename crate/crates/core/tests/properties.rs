use approx::{assert_abs_diff_eq, assert_relative_eq};
use proptest::prelude::*;

use firefront::image::{gradient_magnitude, threshold_edges};
use firefront::io::{contour_csv, read_contour_csv, write_text};
use firefront::levelset::{init_level_set, reinit_sdf, CircleStencil, SdfShape};
use firefront::marching::extract_zero_level;
use firefront::{compute_potential, EdgeMap, ForceFieldParams, GrayImage, Grid, Point, SeedRegion, TransferKind};

fn image(n: usize, values: &[f64]) -> GrayImage {
    GrayImage::new(Grid::from_fn(n, n, |x, y| values[y * n + x])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn thresholding_is_idempotent(values in prop::collection::vec(0.0..1.0f64, 64), t in 0.0..0.8f64) {
        let e = gradient_magnitude(&image(8, &values));
        let once = threshold_edges(&e, t).unwrap();
        let twice = threshold_edges(&once, t).unwrap();
        prop_assert_eq!(once.grid(), twice.grid());
        prop_assert!(once.grid().data().iter().all(|&v| v == 0.0 || v >= t));
    }

    #[test]
    fn edges_ignore_inversion(values in prop::collection::vec(0.0..1.0f64, 49)) {
        let img = image(7, &values);
        let a = gradient_magnitude(&img);
        let b = gradient_magnitude(&img.inverted());
        for (x, y) in a.grid().data().iter().zip(b.grid().data()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn potential_is_linear_in_the_edge_strength(
        values in prop::collection::vec(0.0..1.0f64, 100),
        scale in 0.1..10.0f64,
        h in 0.5..2.0f64,
    ) {
        let params = ForceFieldParams { h, k: 1.0, p: 1.0, kind: TransferKind::InversePower, r_max: 6.0 };
        let e = EdgeMap::new(Grid::from_fn(10, 10, |x, y| values[y * 10 + x])).unwrap();
        let s = EdgeMap::new(Grid::from_fn(10, 10, |x, y| scale * values[y * 10 + x])).unwrap();
        let a = compute_potential(&e, &params).unwrap();
        let b = compute_potential(&s, &params).unwrap();
        for (x, y) in a.grid().data().iter().zip(b.grid().data()) {
            assert_relative_eq!(scale * x, *y, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn contour_csv_round_trips_through_a_file(
        pts in prop::collection::vec((-500.0..500.0f64, -500.0..500.0f64), 3..40),
    ) {
        let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_text(&path, &contour_csv(&points)).unwrap();
        let (back, frozen) = read_contour_csv(&path).unwrap();
        prop_assert_eq!(back.len(), points.len());
        prop_assert!(frozen.iter().all(|f| !f));
        for (p, q) in points.iter().zip(&back) {
            assert_abs_diff_eq!(p.x, q.x, epsilon = 5e-7);
            assert_abs_diff_eq!(p.y, q.y, epsilon = 5e-7);
        }
    }

    #[test]
    fn zero_level_of_a_circle_lies_on_it(cx in 20.0..28.0f64, cy in 20.0..28.0f64, r in 4.0..15.0f64) {
        let c = Point::new(cx, cy);
        let phi = Grid::from_fn(48, 48, |x, y| Point::new(x as f64, y as f64).dist(c) - r);
        let loops = extract_zero_level(&phi);
        prop_assert_eq!(loops.len(), 1);
        for p in &loops[0] {
            prop_assert!((p.dist(c) - r).abs() <= 0.1, "{p:?}");
        }
    }

    #[test]
    fn reinit_keeps_every_sign(cx in 20.0..28.0f64, cy in 20.0..28.0f64, r in 5.0..14.0f64, band in 3.0..7.0f64) {
        let seed = SeedRegion::Disk { center: Point::new(cx, cy), radius: r };
        let g = init_level_set(&seed, 48, 48, band).unwrap();
        for shape in [SdfShape::R, SdfShape::KTimesR(2.0), SdfShape::RSquared] {
            let out = reinit_sdf(&g, &CircleStencil::new(band), shape).unwrap();
            prop_assert_eq!(out.inside_mask(), g.inside_mask());
        }
    }
}
