//! Parametric snake: tension, image force and balloon pressure integrated
//! with explicit Euler, plus arc-length resampling.
//!
//! The update for each free vertex is
//! `v += dt * (alpha * (v[i-1] - 2 v[i] + v[i+1]) + gamma * F(v) + lambda * n(v))`
//! with no fourth-order rigidity term.

use crate::error::{invalid, Error, Result};
use crate::force::{sample_force, VectorField};
use crate::geometry::{point_segment_distance, signed_area, Point};

/// Traversal direction as seen on screen (y down).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Clockwise,
    CounterClockwise,
}

impl Orientation {
    pub fn reversed(self) -> Self {
        match self {
            Orientation::Clockwise => Orientation::CounterClockwise,
            Orientation::CounterClockwise => Orientation::Clockwise,
        }
    }
}

/// Closed polyline with per-vertex freeze flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SnakeContour {
    vertices: Vec<Point>,
    frozen: Vec<bool>,
}

impl SnakeContour {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let n = vertices.len();
        Self::with_frozen(vertices, vec![false; n])
    }

    pub fn with_frozen(vertices: Vec<Point>, frozen: Vec<bool>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(Error::ContourVanished);
        }
        if frozen.len() != vertices.len() {
            return Err(invalid("frozen", "flag count differs from vertex count"));
        }
        if vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(invalid("vertices", "non-finite coordinate"));
        }
        Ok(Self { vertices, frozen })
    }

    /// Regular polygon approximating a circle, clockwise on screen.
    pub fn circle(center: Point, radius: f64, n: usize) -> Result<Self> {
        Self::new(crate::geometry::circle_polyline(center, radius, n))
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn set_frozen(&mut self, i: usize, v: bool) {
        self.frozen[i] = v;
    }

    pub fn freeze_all(&mut self, v: bool) {
        self.frozen.iter_mut().for_each(|f| *f = v);
    }

    pub fn all_frozen(&self) -> bool {
        self.frozen.iter().all(|&f| f)
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn orientation(&self) -> Orientation {
        if self.signed_area() < 0.0 {
            Orientation::Clockwise
        } else {
            Orientation::CounterClockwise
        }
    }

    /// Reverses the traversal (keeping each vertex's flag).
    pub fn reversed(&self) -> SnakeContour {
        let mut v = self.vertices.clone();
        let mut f = self.frozen.clone();
        v.reverse();
        f.reverse();
        SnakeContour {
            vertices: v,
            frozen: f,
        }
    }

    pub fn with_orientation(self, o: Orientation) -> SnakeContour {
        if self.orientation() == o {
            self
        } else {
            self.reversed()
        }
    }

    pub(crate) fn set_vertices_unchecked(&mut self, v: Vec<Point>) {
        debug_assert_eq!(v.len(), self.frozen.len());
        self.vertices = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnakeParams {
    /// Tension weight.
    pub alpha: f64,
    /// Image-force weight.
    pub gamma: f64,
    /// Balloon weight; negative deflates a clockwise contour.
    pub lambda: f64,
    pub dt: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Displacement (pixels per step) below which a step counts as still.
    pub conv_eps: f64,
    pub conv_window: usize,
}

impl Default for SnakeParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 1.0,
            lambda: 0.4,
            dt: 0.5,
            d_min: 1.0,
            d_max: 2.0,
            conv_eps: 0.01,
            conv_window: 20,
        }
    }
}

impl SnakeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.alpha < 0.0 {
            return Err(invalid("alpha", format!("{} must be >= 0", self.alpha)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("{} must be > 0", self.dt)));
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max) || !self.d_max.is_finite() {
            return Err(invalid(
                "d_min",
                format!("need 0 < d_min ({}) < d_max ({})", self.d_min, self.d_max),
            ));
        }
        if !(self.conv_eps > 0.0) {
            return Err(invalid(
                "conv_eps",
                format!("{} must be > 0", self.conv_eps),
            ));
        }
        if self.conv_window == 0 {
            return Err(invalid("conv_window", "must be >= 1"));
        }
        Ok(())
    }

    /// Upper bound on how far one step can move a vertex whose neighbours
    /// are at most `d_max` away, given the largest force magnitude.
    pub fn max_step(&self, max_force: f64) -> f64 {
        self.dt * (2.0 * self.alpha * self.d_max + self.gamma.abs() * max_force + self.lambda.abs())
    }

    /// Checks the per-step displacement bound stays below `d_min`, so a
    /// vertex cannot jump across a burn band of that width in one step.
    pub fn validate_with_force(&self, max_force: f64) -> Result<()> {
        self.validate()?;
        let s = self.max_step(max_force);
        if s >= self.d_min {
            return Err(invalid(
                "dt",
                format!(
                    "maximum step {s:.3} px must stay below d_min = {}; reduce dt or the weights",
                    self.d_min
                ),
            ));
        }
        Ok(())
    }
}

/// Discrete second derivative along the contour, cyclic.
pub fn tension(contour: &SnakeContour) -> Vec<Point> {
    let v = &contour.vertices;
    let n = v.len();
    (0..n)
        .map(|i| {
            let prev = v[(i + n - 1) % n];
            let next = v[(i + 1) % n];
            prev + next - v[i] * 2.0
        })
        .collect()
}

/// Unit balloon normals `(dy, -dx) / |d|` with `d = v[i+1] - v[i-1]`. For a
/// contour that is clockwise on screen they point outward. A degenerate
/// tangent reuses the nearest preceding valid normal.
pub fn balloon_normal(contour: &SnakeContour) -> Vec<Point> {
    let v = &contour.vertices;
    let n = v.len();
    let raw: Vec<Option<Point>> = (0..n)
        .map(|i| {
            let d = v[(i + 1) % n] - v[(i + n - 1) % n];
            let len = d.norm();
            (len >= 1e-12).then(|| Point::new(d.y / len, -d.x / len))
        })
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .find_map(|back| raw[(i + n - back) % n])
                .unwrap_or(Point::ZERO)
        })
        .collect()
}

/// Candidate positions for every vertex after one Euler step, computed from
/// the current positions (Jacobi update) and clamped to the field bounds.
/// Frozen vertices keep their position.
pub fn propose(contour: &SnakeContour, force: &VectorField, params: &SnakeParams) -> Vec<Point> {
    let t = tension(contour);
    let nrm = balloon_normal(contour);
    let maxx = (force.width() - 1) as f64;
    let maxy = (force.height() - 1) as f64;
    contour
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if contour.frozen[i] {
                return p;
            }
            let f = if params.gamma != 0.0 {
                sample_force(force, p)
            } else {
                Point::ZERO
            };
            let vel = t[i] * params.alpha + f * params.gamma + nrm[i] * params.lambda;
            let q = p + vel * params.dt;
            Point::new(q.x.clamp(0.0, maxx), q.y.clamp(0.0, maxy))
        })
        .collect()
}

/// One explicit Euler step of the snake equations.
pub fn step(contour: &SnakeContour, force: &VectorField, params: &SnakeParams) -> SnakeContour {
    let mut out = contour.clone();
    out.vertices = propose(contour, force, params);
    out
}

/// Largest vertex displacement between two contours with matching vertices.
pub fn max_displacement(a: &[Point], b: &[Point]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.dist(*q)).fold(0.0, f64::max)
}

/// How far the curve moved rather than its parameterization: for each
/// vertex, the distance from its new position to the two old segments that
/// meet at it. Sliding along the curve contributes almost nothing.
pub fn curve_displacement(old: &[Point], new: &[Point]) -> f64 {
    let n = old.len().min(new.len());
    (0..n)
        .map(|i| {
            let prev = old[(i + n - 1) % n];
            let next = old[(i + 1) % n];
            point_segment_distance(new[i], prev, old[i])
                .min(point_segment_distance(new[i], old[i], next))
        })
        .fold(0.0, f64::max)
}

/// Arc-length resampling. Vertices closer than `d_min` to their successor
/// are merged (a frozen vertex keeps its position; a merge involving any
/// frozen vertex stays frozen), then segments longer than `d_max` are split
/// into equal pieces. Inserted vertices are frozen when either segment end
/// is.
pub fn resample(contour: &SnakeContour, params: &SnakeParams) -> Result<SnakeContour> {
    let (pts, fr) = merge_close(&contour.vertices, &contour.frozen, params.d_min);
    if pts.len() < 4 {
        return Err(Error::ContourVanished);
    }
    let n = pts.len();
    let mut out_p = Vec::with_capacity(n * 2);
    let mut out_f = Vec::with_capacity(n * 2);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        out_p.push(a);
        out_f.push(fr[i]);
        let len = a.dist(b);
        if len > params.d_max {
            let pieces = (len / params.d_max).ceil() as usize;
            let inserted_frozen = fr[i] || fr[(i + 1) % n];
            for k in 1..pieces {
                out_p.push(a.lerp(b, k as f64 / pieces as f64));
                out_f.push(inserted_frozen);
            }
        }
    }
    SnakeContour::with_frozen(out_p, out_f)
}

fn merge_close(pts: &[Point], frozen: &[bool], d_min: f64) -> (Vec<Point>, Vec<bool>) {
    let mut out_p: Vec<Point> = Vec::with_capacity(pts.len());
    let mut out_f: Vec<bool> = Vec::with_capacity(pts.len());
    for (&p, &f) in pts.iter().zip(frozen) {
        match (out_p.last_mut(), out_f.last_mut()) {
            (Some(lp), Some(lf)) if lp.dist(p) < d_min => {
                *lp = merged_position(*lp, *lf, p, f);
                *lf = *lf || f;
            }
            _ => {
                out_p.push(p);
                out_f.push(f);
            }
        }
    }
    // closing segment
    while out_p.len() > 1 && out_p[out_p.len() - 1].dist(out_p[0]) < d_min {
        let lp = out_p.pop().unwrap_or_default();
        let lf = out_f.pop().unwrap_or_default();
        out_p[0] = merged_position(lp, lf, out_p[0], out_f[0]);
        out_f[0] = out_f[0] || lf;
    }
    (out_p, out_f)
}

fn merged_position(a: Point, fa: bool, b: Point, fb: bool) -> Point {
    match (fa, fb) {
        (true, false) => a,
        (false, true) => b,
        _ => a.midpoint(b),
    }
}

/// True when the last `conv_window` recorded displacements are all below
/// `conv_eps`.
pub fn has_converged(history: &[f64], params: &SnakeParams) -> bool {
    let w = params.conv_window;
    history.len() >= w
        && history[history.len() - w..]
            .iter()
            .all(|&d| d < params.conv_eps)
}
