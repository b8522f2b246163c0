//! Synthetic test scenes with analytic ground truth: dark shapes on a light
//! background, antialiased by supersampling, with optional seeded uniform
//! noise.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{circle_polyline, ellipse_polyline, point_in_polygon, signed_area, Point};
use crate::grid::{Grid, Mask};
use crate::image::GrayImage;

pub const BACKGROUND: f64 = 0.9;
pub const FOREGROUND: f64 = 0.1;
const MARGIN: f64 = 4.0;
const SUPERSAMPLE: usize = 4;
const TRUTH_VERTICES: usize = 360;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    TwoCircle,
    ThreeCircle,
    GapCircle,
    TTube,
    NBlobPlate,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 5] = [
        PhantomKind::TwoCircle,
        PhantomKind::ThreeCircle,
        PhantomKind::GapCircle,
        PhantomKind::TTube,
        PhantomKind::NBlobPlate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::TwoCircle => "two-circle",
            PhantomKind::ThreeCircle => "three-circle",
            PhantomKind::GapCircle => "gap-circle",
            PhantomKind::TTube => "t-tube",
            PhantomKind::NBlobPlate => "n-blob-plate",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhantomKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid("kind", format!("unknown phantom `{s}`")))
    }
}

/// Scene description. Geometry fields not used by `kind` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub size: usize,
    /// Half-width of the additive uniform noise, in `[0, 1)`.
    pub noise: f64,
    pub seed: u64,
    /// Light shapes on a dark background instead.
    pub inverse: bool,
    /// two-circle: container ring centre and radius.
    pub container_center: Point,
    pub container_radius: f64,
    /// Stroke width of drawn rings (two-circle container, gap-circle).
    pub ring_width: f64,
    /// two-circle inner disk; gap-circle ring centre and radius.
    pub inner_center: Point,
    pub inner_radius: f64,
    /// three-circle disks as `(centre, radius)`.
    pub disks: Vec<(Point, f64)>,
    pub gap_degrees: f64,
    /// Direction of the middle of the gap, degrees, measured from +x toward
    /// +y (down).
    pub gap_direction: f64,
    /// t-tube: width of both bars.
    pub tube_width: f64,
    pub blob_count: usize,
}

impl PhantomSpec {
    /// Canonical 256 x 256 scene of the given kind.
    pub fn new(kind: PhantomKind) -> Self {
        let mut s = Self {
            kind,
            size: 256,
            noise: 0.0,
            seed: 0,
            inverse: false,
            container_center: Point::new(128.0, 128.0),
            container_radius: 80.0,
            ring_width: 2.0,
            inner_center: Point::new(150.0, 100.0),
            inner_radius: 15.0,
            disks: vec![
                (Point::new(75.0, 80.0), 30.0),
                (Point::new(185.0, 85.0), 25.0),
                (Point::new(125.0, 185.0), 28.0),
            ],
            gap_degrees: 40.0,
            gap_direction: 0.0,
            tube_width: 32.0,
            blob_count: 7,
        };
        if kind == PhantomKind::GapCircle {
            s.inner_center = Point::new(128.0, 128.0);
            s.inner_radius = 40.0;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(invalid("size", format!("{} is below 32 pixels", self.size)));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(invalid(
                "noise",
                format!("{} is outside [0, 1)", self.noise),
            ));
        }
        if !(self.ring_width > 0.0) {
            return Err(invalid("ring_width", "must be positive"));
        }
        if !(0.0..360.0).contains(&self.gap_degrees) {
            return Err(invalid("gap_degrees", "must be in [0, 360)"));
        }
        if !(self.tube_width > 0.0) {
            return Err(invalid("tube_width", "must be positive"));
        }
        if self.kind == PhantomKind::NBlobPlate && !(1..=8).contains(&self.blob_count) {
            return Err(invalid("blob_count", "must be between 1 and 8"));
        }
        Ok(())
    }
}

/// Seed suggestions that suit the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedHint {
    /// A small circle inside the region to explore.
    pub center: Point,
    pub radius: f64,
    /// A rectangle `(x0, y0, x1, y1)` crossing object borders, for scenes
    /// meant to exercise the attraction stage.
    pub rect: Option<(f64, f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: GrayImage,
    /// Clockwise ground-truth boundaries, one per object.
    pub truth: Vec<Vec<Point>>,
    /// Pixels whose centre lies inside a drawn shape.
    pub interior: Mask,
    pub seed: SeedHint,
}

enum Shape {
    Disk(Point, f64),
    Ellipse(Point, f64, f64),
    /// Annulus between radii, with an optional angular gap `(mid, half)`
    /// in radians.
    Ring(Point, f64, f64, Option<(f64, f64)>),
    Polygon(Vec<Point>),
}

impl Shape {
    fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disk(c, r) => p.dist(*c) <= *r,
            Shape::Ellipse(c, rx, ry) => {
                let dx = (p.x - c.x) / rx;
                let dy = (p.y - c.y) / ry;
                dx * dx + dy * dy <= 1.0
            }
            Shape::Ring(c, r0, r1, gap) => {
                let d = p.dist(*c);
                if d < *r0 || d > *r1 {
                    return false;
                }
                match gap {
                    None => true,
                    Some((mid, half)) => {
                        let a = (p.y - c.y).atan2(p.x - c.x);
                        let mut delta = (a - mid).rem_euclid(std::f64::consts::TAU);
                        if delta > std::f64::consts::PI {
                            delta -= std::f64::consts::TAU;
                        }
                        delta.abs() > *half
                    }
                }
            }
            Shape::Polygon(v) => point_in_polygon(p, v),
        }
    }

    fn bbox(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Disk(c, r) => (c.x - r, c.y - r, c.x + r, c.y + r),
            Shape::Ellipse(c, rx, ry) => (c.x - rx, c.y - ry, c.x + rx, c.y + ry),
            Shape::Ring(c, _, r1, _) => (c.x - r1, c.y - r1, c.x + r1, c.y + r1),
            Shape::Polygon(v) => v.iter().fold(
                (f64::MAX, f64::MAX, f64::MIN, f64::MIN),
                |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
            ),
        }
    }
}

/// Renders the scene described by `spec`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (shapes, truth, seed) = layout(spec, &mut rng);

    let n = spec.size as f64;
    for s in &shapes {
        let (x0, y0, x1, y1) = s.bbox();
        if x0 < MARGIN || y0 < MARGIN || x1 > n - 1.0 - MARGIN || y1 > n - 1.0 - MARGIN {
            return Err(Error::PhantomOutOfBounds(format!(
                "{} shape spans ({x0:.1}, {y0:.1})-({x1:.1}, {y1:.1}) in a {}-pixel image with a {MARGIN}-pixel margin",
                spec.kind, spec.size
            )));
        }
    }

    let size = spec.size;
    let (bg, fg) = if spec.inverse {
        (FOREGROUND, BACKGROUND)
    } else {
        (BACKGROUND, FOREGROUND)
    };
    let sub = SUPERSAMPLE as f64;
    let interior = Mask::from_fn(size, size, |x, y| {
        let p = Point::new(x as f64, y as f64);
        shapes.iter().any(|s| s.contains(p))
    });
    let mut grid = Grid::from_fn(size, size, |x, y| {
        let mut hits = 0usize;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let p = Point::new(
                    x as f64 - 0.5 + (sx as f64 + 0.5) / sub,
                    y as f64 - 0.5 + (sy as f64 + 0.5) / sub,
                );
                if shapes.iter().any(|s| s.contains(p)) {
                    hits += 1;
                }
            }
        }
        let cover = hits as f64 / (sub * sub);
        bg + (fg - bg) * cover
    });
    if spec.noise > 0.0 {
        for v in grid.data_mut() {
            *v = (*v + rng.gen_range(-spec.noise..=spec.noise)).clamp(0.0, 1.0);
        }
    }
    Ok(Phantom {
        image: GrayImage::new(grid)?,
        truth,
        interior,
        seed,
    })
}

fn clockwise(mut v: Vec<Point>) -> Vec<Point> {
    if signed_area(&v) > 0.0 {
        v.reverse();
    }
    v
}

type Layout = (Vec<Shape>, Vec<Vec<Point>>, SeedHint);

fn layout(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Layout {
    let n = spec.size as f64;
    let half_w = spec.ring_width / 2.0;
    match spec.kind {
        PhantomKind::TwoCircle => {
            let c = spec.container_center;
            let r = spec.container_radius;
            let shapes = vec![
                Shape::Ring(c, r - half_w, r + half_w, None),
                Shape::Disk(spec.inner_center, spec.inner_radius),
            ];
            let truth = vec![
                circle_polyline(c, r, TRUTH_VERTICES),
                circle_polyline(spec.inner_center, spec.inner_radius, TRUTH_VERTICES),
            ];
            // lower left of the container, away from the inner disk
            let dir = Point::new(-0.55, 0.55);
            let seed = SeedHint {
                center: c + dir * (r * 0.9),
                radius: 8.0,
                rect: None,
            };
            (shapes, truth, seed)
        }
        PhantomKind::ThreeCircle => {
            let shapes = spec.disks.iter().map(|&(c, r)| Shape::Disk(c, r)).collect();
            let truth = spec
                .disks
                .iter()
                .map(|&(c, r)| circle_polyline(c, r, TRUTH_VERTICES))
                .collect();
            let seed = SeedHint {
                center: Point::new(n / 2.0, n / 2.0),
                radius: 8.0,
                rect: three_circle_rect(&spec.disks, n),
            };
            (shapes, truth, seed)
        }
        PhantomKind::GapCircle => {
            let c = spec.inner_center;
            let r = spec.inner_radius;
            let gap = (spec.gap_degrees > 0.0).then(|| {
                (
                    spec.gap_direction.to_radians(),
                    spec.gap_degrees.to_radians() / 2.0,
                )
            });
            let shapes = vec![Shape::Ring(c, r - half_w, r + half_w, gap)];
            let truth = vec![circle_polyline(c, r, TRUTH_VERTICES)];
            let seed = SeedHint {
                center: c,
                radius: 10.0,
                rect: None,
            };
            (shapes, truth, seed)
        }
        PhantomKind::TTube => {
            let t = spec.tube_width;
            let cx = n / 2.0;
            let top = n * 0.22;
            let bottom = n * 0.85;
            let arm = n * 0.31;
            let outline = clockwise(vec![
                Point::new(cx - arm, top),
                Point::new(cx + arm, top),
                Point::new(cx + arm, top + t),
                Point::new(cx + t / 2.0, top + t),
                Point::new(cx + t / 2.0, bottom),
                Point::new(cx - t / 2.0, bottom),
                Point::new(cx - t / 2.0, top + t),
                Point::new(cx - arm, top + t),
            ]);
            let seed = SeedHint {
                center: Point::new(cx, bottom - 2.0 * t),
                radius: (t / 5.0).max(3.0),
                rect: None,
            };
            (vec![Shape::Polygon(outline.clone())], vec![outline], seed)
        }
        PhantomKind::NBlobPlate => {
            // 3 x 3 cells; the centre cell holds the seed, blobs fill the
            // others in reading order
            let cell = n / 3.0;
            let mut shapes = Vec::new();
            let mut truth = Vec::new();
            let order = [0usize, 1, 2, 3, 5, 6, 7, 8];
            for &k in order.iter().take(spec.blob_count) {
                let (i, j) = ((k % 3) as f64, (k / 3) as f64);
                let jitter = cell * 0.07;
                let c = Point::new(
                    (i + 0.5) * cell + rng.gen_range(-jitter..=jitter),
                    (j + 0.5) * cell + rng.gen_range(-jitter..=jitter),
                );
                let rx = cell * rng.gen_range(0.17..0.26);
                let ry = cell * rng.gen_range(0.17..0.26);
                shapes.push(Shape::Ellipse(c, rx, ry));
                truth.push(ellipse_polyline(c, rx, ry, TRUTH_VERTICES));
            }
            let seed = SeedHint {
                center: Point::new(n / 2.0, n / 2.0),
                radius: 8.0,
                rect: None,
            };
            (shapes, truth, seed)
        }
    }
}

/// A rectangle around the first two disks whose bottom side cuts through
/// the third disk below its centre.
fn three_circle_rect(disks: &[(Point, f64)], n: f64) -> Option<(f64, f64, f64, f64)> {
    if disks.len() < 3 {
        return None;
    }
    let (a, ra) = disks[0];
    let (b, rb) = disks[1];
    let (c, rc) = disks[2];
    let pad = 10.0;
    let x0 = (a.x - ra).min(b.x - rb) - pad;
    let y0 = (a.y - ra).min(b.y - rb) - pad;
    let x1 = (a.x + ra).max(b.x + rb) + pad;
    let y1 = c.y + 0.4 * rc;
    Some((x0.max(2.0), y0.max(2.0), x1.min(n - 3.0), y1.min(n - 3.0)))
}
