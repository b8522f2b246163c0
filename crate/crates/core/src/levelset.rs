//! Narrow-band level-set geodesic active contour with a two-stage schedule:
//! propagation plus smoothing first, then image-force advection with
//! constant speed. `phi` is negative inside the contour.

use log::debug;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::force::{build_fields, EdgeParams, ForceFieldParams, PotentialField, VectorField};
use crate::geometry::{point_in_polygon, point_segment_distance, signed_area, Point};
use crate::grid::{Grid, Mask};
use crate::image::GrayImage;
use crate::marching::extract_zero_level;

const GRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvectionMode {
    /// `F / |F|` where `|F| > 1e-8`, zero elsewhere.
    UnitNormalized,
    Raw,
}

/// Transform applied to the reinitialized distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SdfShape {
    R,
    KTimesR(f64),
    RSquared,
}

impl SdfShape {
    fn apply(self, d: f64) -> f64 {
        match self {
            SdfShape::R => d,
            SdfShape::KTimesR(k) => k * d,
            SdfShape::RSquared => d * d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GacParams {
    /// Propagation weight; positive expands the contour.
    pub lambda: f64,
    /// Curvature smoothing weight.
    pub eps: f64,
    /// Advection weight of the second stage.
    pub gamma: f64,
    /// Exponent of the stopping function.
    pub m: f64,
    /// The potential is rescaled so its steepest gradient equals this value
    /// before the stopping function is evaluated.
    pub kl_gain: f64,
    pub dt: f64,
    pub band_radius: f64,
    pub reinit_every: usize,
    pub conv_eps: f64,
    pub conv_window: usize,
    /// Run the second-stage dynamics once before the first stage, pulling a
    /// contour that crosses object borders onto them.
    pub attract: bool,
    pub advection: AdvectionMode,
    pub sdf_shape: SdfShape,
    /// Step cap per stage.
    pub max_steps: usize,
    /// Zero-level loops enclosing less area (pixels) are not reported.
    pub min_contour_area: f64,
}

impl Default for GacParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eps: 0.05,
            gamma: 1.0,
            m: 2.0,
            kl_gain: 1e7,
            dt: 0.4,
            band_radius: 6.0,
            reinit_every: 5,
            conv_eps: 0.01,
            conv_window: 20,
            attract: false,
            advection: AdvectionMode::UnitNormalized,
            sdf_shape: SdfShape::R,
            max_steps: 4000,
            min_contour_area: 10.0,
        }
    }
}

impl GacParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("eps", self.eps),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.eps < 0.0 {
            return Err(invalid("eps", format!("{} must be >= 0", self.eps)));
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(invalid("m", format!("{} must be positive", self.m)));
        }
        if !(self.kl_gain > 0.0) || !self.kl_gain.is_finite() {
            return Err(invalid("kl_gain", format!("{} must be positive", self.kl_gain)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.band_radius >= 2.0) || !self.band_radius.is_finite() {
            return Err(invalid("band_radius", format!("{} is below 2 pixels", self.band_radius)));
        }
        if self.reinit_every == 0 {
            return Err(invalid("reinit_every", "must be >= 1"));
        }
        if !(self.conv_eps > 0.0) {
            return Err(invalid("conv_eps", "must be positive"));
        }
        if self.conv_window == 0 {
            return Err(invalid("conv_window", "must be >= 1"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be >= 1"));
        }
        if let SdfShape::KTimesR(k) = self.sdf_shape {
            if !(k > 0.0) || !k.is_finite() {
                return Err(invalid("sdf_k", format!("{k} must be positive")));
            }
        }
        Ok(())
    }

    /// Largest stable time step for a front speed bound: the hyperbolic
    /// part must move at most half a pixel and the curvature diffusion must
    /// satisfy `dt eps <= 0.25`.
    pub fn max_stable_dt(&self, speed: f64) -> f64 {
        let a = if speed > 0.0 { 0.5 / speed } else { f64::INFINITY };
        let b = if self.eps > 0.0 { 0.25 / self.eps } else { f64::INFINITY };
        a.min(b)
    }

    fn check_cfl(&self, speed: f64) -> Result<()> {
        let max_dt = self.max_stable_dt(speed);
        if self.dt > max_dt + 1e-12 {
            return Err(Error::CflViolation {
                dt: self.dt,
                max_dt,
            });
        }
        Ok(())
    }
}

/// Level-set function with its narrow band.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetGrid {
    phi: Grid,
    band: Vec<usize>,
    band_radius: f64,
}

impl LevelSetGrid {
    /// Builds the band from an existing `phi`: pixels with
    /// `|phi| <= band_radius` form the band, the rest are clamped to
    /// `±(band_radius + 1)`.
    pub fn from_phi(mut phi: Grid, band_radius: f64) -> Self {
        let s = band_radius + 1.0;
        let mut band = Vec::new();
        for (i, v) in phi.data_mut().iter_mut().enumerate() {
            if v.abs() <= band_radius {
                band.push(i);
            } else {
                *v = if *v < 0.0 { -s } else { s };
            }
        }
        Self {
            phi,
            band,
            band_radius,
        }
    }

    pub fn width(&self) -> usize {
        self.phi.width()
    }

    pub fn height(&self) -> usize {
        self.phi.height()
    }

    pub fn phi(&self) -> &Grid {
        &self.phi
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    pub fn band_radius(&self) -> f64 {
        self.band_radius
    }

    /// Pixels with negative `phi`.
    pub fn inside_mask(&self) -> Mask {
        Mask::from_fn(self.width(), self.height(), |x, y| self.phi.get(x, y) < 0.0)
    }

    pub fn zero_level(&self) -> Vec<Vec<Point>> {
        extract_zero_level(&self.phi)
    }
}

/// Initial region for the level set.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedRegion {
    Disk { center: Point, radius: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Polygon(Vec<Point>),
}

impl SeedRegion {
    pub fn validate(&self) -> Result<()> {
        match self {
            SeedRegion::Disk { radius, .. } if !(*radius > 0.0) => {
                Err(invalid("seed", "disk radius must be positive"))
            }
            SeedRegion::Rect { x0, y0, x1, y1 } if !(x1 > x0 && y1 > y0) => {
                Err(invalid("seed", "rectangle must have x1 > x0 and y1 > y0"))
            }
            SeedRegion::Polygon(v) if v.len() < 3 || signed_area(v).abs() < 1e-9 => {
                Err(invalid("seed", "polygon needs at least 3 non-collinear vertices"))
            }
            _ => Ok(()),
        }
    }

    fn outline(&self) -> Vec<Point> {
        match self {
            SeedRegion::Disk { .. } => Vec::new(),
            SeedRegion::Rect { x0, y0, x1, y1 } => vec![
                Point::new(*x0, *y0),
                Point::new(*x1, *y0),
                Point::new(*x1, *y1),
                Point::new(*x0, *y1),
            ],
            SeedRegion::Polygon(v) => v.clone(),
        }
    }

    /// Exact signed distance, negative inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            SeedRegion::Disk { center, radius } => p.dist(*center) - radius,
            _ => {
                let v = self.outline();
                let n = v.len();
                let d = (0..n)
                    .map(|i| point_segment_distance(p, v[i], v[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                if point_in_polygon(p, &v) {
                    -d
                } else {
                    d
                }
            }
        }
    }
}

/// Level set initialized to the exact signed distance of `seed`.
pub fn init_level_set(seed: &SeedRegion, width: usize, height: usize, band_radius: f64) -> Result<LevelSetGrid> {
    seed.validate()?;
    let phi = Grid::from_fn(width, height, |x, y| {
        seed.signed_distance(Point::new(x as f64, y as f64))
    });
    if !phi.data().iter().any(|&v| v < 0.0) {
        return Err(Error::ContourVanished);
    }
    Ok(LevelSetGrid::from_phi(phi, band_radius))
}

/// Stopping function `1 / (1 + |grad P|^m)` with central differences.
pub fn speed_kl(pot: &PotentialField, m: f64) -> Grid {
    let (gx, gy) = pot.grid().gradient();
    let data = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| 1.0 / (1.0 + a.hypot(*b).powf(m)))
        .collect();
    Grid::from_vec(pot.width(), pot.height(), data)
}

/// `pot` rescaled so its steepest central-difference gradient equals
/// `gain`. A flat potential is returned unchanged.
pub fn gain_scaled_potential(pot: &PotentialField, gain: f64) -> PotentialField {
    let (gx, gy) = pot.grid().gradient();
    let max = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0, f64::max);
    if max > 0.0 {
        pot.scaled(gain / max)
    } else {
        pot.clone()
    }
}

/// One-sided and central differences at a pixel, with the grid border
/// replicated.
struct Diffs {
    dxm: f64,
    dxp: f64,
    dym: f64,
    dyp: f64,
}

#[inline]
fn diffs(phi: &Grid, x: usize, y: usize) -> Diffs {
    let (w, h) = phi.dims();
    let c = phi.get(x, y);
    let l = if x > 0 { phi.get(x - 1, y) } else { c };
    let r = if x + 1 < w { phi.get(x + 1, y) } else { c };
    let u = if y > 0 { phi.get(x, y - 1) } else { c };
    let d = if y + 1 < h { phi.get(x, y + 1) } else { c };
    Diffs {
        dxm: c - l,
        dxp: r - c,
        dym: c - u,
        dyp: d - c,
    }
}

/// Godunov upwind `|grad phi|` for a front moving outward (phi decreasing)
/// or inward.
#[inline]
fn godunov(d: &Diffs, outward: bool) -> f64 {
    if outward {
        (d.dxm.max(0.0).powi(2) + d.dxp.min(0.0).powi(2) + d.dym.max(0.0).powi(2) + d.dyp.min(0.0).powi(2))
            .sqrt()
    } else {
        (d.dxm.min(0.0).powi(2) + d.dxp.max(0.0).powi(2) + d.dym.min(0.0).powi(2) + d.dyp.max(0.0).powi(2))
            .sqrt()
    }
}

/// `kappa |grad phi|` from central differences; zero where the gradient
/// vanishes.
#[inline]
fn curvature_term(phi: &Grid, x: usize, y: usize) -> f64 {
    let g = |dx: isize, dy: isize| phi.get_clamped(x as isize + dx, y as isize + dy);
    let c = g(0, 0);
    let px = (g(1, 0) - g(-1, 0)) / 2.0;
    let py = (g(0, 1) - g(0, -1)) / 2.0;
    let pxx = g(1, 0) - 2.0 * c + g(-1, 0);
    let pyy = g(0, 1) - 2.0 * c + g(0, -1);
    let pxy = (g(1, 1) - g(1, -1) - g(-1, 1) + g(-1, -1)) / 4.0;
    let n2 = px * px + py * py;
    if n2.sqrt() < GRAD_EPS {
        return 0.0;
    }
    (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / n2
}

fn apply_update(grid: &LevelSetGrid, rate: impl Fn(usize, usize) -> f64 + Sync, dt: f64) -> LevelSetGrid {
    let w = grid.width();
    let updates: Vec<f64> = grid
        .band
        .par_iter()
        .map(|&i| grid.phi.data()[i] + dt * rate(i % w, i / w))
        .collect();
    let mut out = grid.clone();
    for (&i, v) in grid.band.iter().zip(updates) {
        out.phi.data_mut()[i] = v;
    }
    out
}

/// Propagation with the stopping function plus curvature smoothing.
pub fn step_stage1(grid: &LevelSetGrid, kl: &Grid, params: &GacParams) -> Result<LevelSetGrid> {
    params.check_cfl(params.lambda.abs())?;
    let outward = params.lambda > 0.0;
    let phi = &grid.phi;
    Ok(apply_update(
        grid,
        |x, y| {
            let d = diffs(phi, x, y);
            let prop = if params.lambda != 0.0 {
                -params.lambda * kl.get(x, y) * godunov(&d, outward)
            } else {
                0.0
            };
            let curv = if params.eps != 0.0 {
                params.eps * curvature_term(phi, x, y)
            } else {
                0.0
            };
            prop + curv
        },
        params.dt,
    ))
}

/// Force used by the advection term, per the advection mode.
pub fn advection_field(force: &VectorField, mode: AdvectionMode) -> VectorField {
    match mode {
        AdvectionMode::Raw => force.clone(),
        AdvectionMode::UnitNormalized => {
            let mut f = force.clone();
            for (fx, fy) in f.fx.data_mut().iter_mut().zip(f.fy.data_mut().iter_mut()) {
                let m = fx.hypot(*fy);
                if m > GRAD_EPS {
                    *fx /= m;
                    *fy /= m;
                } else {
                    *fx = 0.0;
                    *fy = 0.0;
                }
            }
            f
        }
    }
}

/// Upwind advection sum `max(Fx,0) D-x + min(Fx,0) D+x + max(Fy,0) D-y +
/// min(Fy,0) D+y`.
#[inline]
fn upwind_advection(d: &Diffs, f: Point) -> f64 {
    f.x.max(0.0) * d.dxm + f.x.min(0.0) * d.dxp + f.y.max(0.0) * d.dym + f.y.min(0.0) * d.dyp
}

/// Curvature smoothing plus upwind advection along an already prepared
/// field (see [`advection_field`]).
pub fn step_stage2(grid: &LevelSetGrid, field: &VectorField, params: &GacParams) -> Result<LevelSetGrid> {
    let fmax = match params.advection {
        AdvectionMode::UnitNormalized => 1.0,
        AdvectionMode::Raw => field.max_magnitude(),
    };
    params.check_cfl(params.gamma.abs() * fmax)?;
    let phi = &grid.phi;
    Ok(apply_update(
        grid,
        |x, y| {
            let d = diffs(phi, x, y);
            let f = field.get(x, y);
            let adv = params.gamma * upwind_advection(&d, f);
            let curv = if params.eps != 0.0 {
                params.eps * curvature_term(phi, x, y)
            } else {
                0.0
            };
            curv - adv
        },
        params.dt,
    ))
}

/// The attraction step has exactly the second-stage dynamics.
pub fn step_attract(grid: &LevelSetGrid, field: &VectorField, params: &GacParams) -> Result<LevelSetGrid> {
    step_stage2(grid, field, params)
}

/// Offsets within a disk of the band radius, sorted by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleStencil {
    radius: f64,
    offsets: Vec<(i32, i32, f64)>,
}

impl CircleStencil {
    pub fn new(radius: f64) -> Self {
        Self::build(radius, |di, dj| ((di * di + dj * dj) as f64).sqrt() <= radius)
    }

    /// Square of half-width `radius` with Euclidean distances; kept for
    /// comparison with the circular stencil.
    pub fn square(radius: f64) -> Self {
        let r = radius.floor() as i32;
        Self::build(radius, |di, dj| di.abs() <= r && dj.abs() <= r)
    }

    fn build(radius: f64, keep: impl Fn(i32, i32) -> bool) -> Self {
        let r = radius.ceil() as i32;
        let mut offsets = Vec::new();
        for dj in -r..=r {
            for di in -r..=r {
                if keep(di, dj) {
                    offsets.push((di, dj, ((di * di + dj * dj) as f64).sqrt()));
                }
            }
        }
        offsets.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
        Self { radius, offsets }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn offsets(&self) -> &[(i32, i32, f64)] {
        &self.offsets
    }
}

/// Sub-pixel points where `phi` changes sign along grid edges, including
/// edges to a virtual positive ring around the grid.
pub fn zero_crossings(phi: &Grid) -> Vec<Point> {
    let (w, h) = phi.dims();
    let pad = 1.0;
    let val = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            pad
        } else {
            phi.get(x as usize, y as usize)
        }
    };
    let mut out = Vec::new();
    for y in -1..h as isize {
        for x in -1..w as isize {
            let a = val(x, y);
            for (bx, by) in [(x + 1, y), (x, y + 1)] {
                if bx > w as isize || by > h as isize {
                    continue;
                }
                let b = val(bx, by);
                if (a < 0.0) != (b < 0.0) {
                    let t = a / (a - b);
                    out.push(Point::new(
                        x as f64 + t * (bx - x) as f64,
                        y as f64 + t * (by - y) as f64,
                    ));
                }
            }
        }
    }
    out
}

/// Rebuilds the band by stamping `stencil` at every zero crossing and
/// keeping, per pixel, the smallest distance to a crossing. Signs come from
/// the current `phi`; unreached pixels become sentinels.
pub fn reinit_sdf(grid: &LevelSetGrid, stencil: &CircleStencil, shape: SdfShape) -> Result<LevelSetGrid> {
    let phi = &grid.phi;
    let (w, h) = phi.dims();
    let crossings = zero_crossings(phi);
    if crossings.is_empty() {
        return Err(Error::ContourVanished);
    }
    let mut dist = vec![f64::INFINITY; w * h];
    for p in &crossings {
        let bx = p.x.round();
        let by = p.y.round();
        let fx = p.x - bx;
        let fy = p.y - by;
        for &(di, dj, _) in &stencil.offsets {
            let x = bx as i64 + di as i64;
            let y = by as i64 + dj as i64;
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                continue;
            }
            let d = (di as f64 - fx).hypot(dj as f64 - fy);
            let i = y as usize * w + x as usize;
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    let sentinel = shape.apply(grid.band_radius + 1.0);
    let mut out = Grid::new(w, h);
    let mut band = Vec::new();
    for (i, (&d, &old)) in dist.iter().zip(phi.data()).enumerate() {
        let sign = if old < 0.0 { -1.0 } else { 1.0 };
        out.data_mut()[i] = if d <= grid.band_radius {
            band.push(i);
            sign * shape.apply(d)
        } else if d.is_finite() && stencil.offsets.last().is_some_and(|o| o.2 > grid.band_radius) {
            // a square stencil reaches past the band radius in its corners
            band.push(i);
            sign * shape.apply(d)
        } else {
            sign * sentinel
        };
    }
    Ok(LevelSetGrid {
        phi: out,
        band,
        band_radius: grid.band_radius,
    })
}

/// Largest nearest-neighbour distance between two vertex sets, taken in
/// both directions. Empty against non-empty counts as infinite motion.
pub fn zero_level_displacement(a: &[Vec<Point>], b: &[Vec<Point>]) -> f64 {
    let pa: Vec<Point> = a.iter().flatten().copied().collect();
    let pb: Vec<Point> = b.iter().flatten().copied().collect();
    match (pa.is_empty(), pb.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    directed_nn(&pa, &pb).max(directed_nn(&pb, &pa))
}

fn directed_nn(from: &[Point], to: &[Point]) -> f64 {
    const CELL: f64 = 2.0;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in to {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let cols = ((x1 - x0) / CELL).floor() as usize + 1;
    let rows = ((y1 - y0) / CELL).floor() as usize + 1;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); cols * rows];
    let cell_of = |p: Point| -> (isize, isize) {
        (((p.x - x0) / CELL).floor() as isize, ((p.y - y0) / CELL).floor() as isize)
    };
    for (i, p) in to.iter().enumerate() {
        let (c, r) = cell_of(*p);
        buckets[r as usize * cols + c as usize].push(i as u32);
    }
    let mut worst: f64 = 0.0;
    for &p in from {
        let (c, r) = cell_of(p);
        let mut best = f64::INFINITY;
        let mut ring = 0isize;
        loop {
            for rr in r - ring..=r + ring {
                for cc in c - ring..=c + ring {
                    if (rr - r).abs() != ring && (cc - c).abs() != ring {
                        continue;
                    }
                    if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                        continue;
                    }
                    for &j in &buckets[rr as usize * cols + cc as usize] {
                        best = best.min(p.dist(to[j as usize]));
                    }
                }
            }
            // every unvisited cell is at least `ring * CELL` away
            if best <= ring as f64 * CELL || ring as usize > cols.max(rows) + 2 {
                break;
            }
            ring += 1;
        }
        worst = worst.max(best);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GacStage {
    Attract,
    Propagate,
    Advect,
}

impl GacStage {
    pub fn name(self) -> &'static str {
        match self {
            GacStage::Attract => "attract",
            GacStage::Propagate => "propagate",
            GacStage::Advect => "advect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GacStageLog {
    pub stage: GacStage,
    pub steps: usize,
    pub converged: bool,
    pub final_displacement: f64,
}

#[derive(Debug, Clone)]
pub struct GacResult {
    /// Closed zero-level loops, negative side on the right.
    pub contours: Vec<Vec<Point>>,
    pub mask: Mask,
    pub stages: Vec<GacStageLog>,
    pub level_set: LevelSetGrid,
}

impl GacResult {
    pub fn converged(&self) -> bool {
        self.stages.iter().all(|s| s.converged)
    }
}

/// State handed to an observer after each step.
pub struct GacSnapshot<'a> {
    pub stage: GacStage,
    pub step: usize,
    pub grid: &'a LevelSetGrid,
}

/// Edge threshold of the default [`GacConfig`]. The stopping speed is
/// sensitive to every surviving edge pixel, so weak noise edges must go.
pub const GAC_EDGE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GacConfig {
    pub edge: EdgeParams,
    pub force: ForceFieldParams,
    pub gac: GacParams,
}

impl Default for GacConfig {
    fn default() -> Self {
        Self {
            edge: EdgeParams {
                threshold: GAC_EDGE_THRESHOLD,
                ..EdgeParams::default()
            },
            force: ForceFieldParams::default(),
            gac: GacParams::default(),
        }
    }
}

/// Runs the configured stages on `img` starting from `seed`.
pub fn segment_gac(img: &GrayImage, seed: &SeedRegion, cfg: &GacConfig) -> Result<GacResult> {
    segment_gac_observed(img, seed, cfg, &mut |_| {})
}

/// [`segment_gac`] with a callback after every step.
pub fn segment_gac_observed(
    img: &GrayImage,
    seed: &SeedRegion,
    cfg: &GacConfig,
    observer: &mut dyn FnMut(&GacSnapshot),
) -> Result<GacResult> {
    let p = &cfg.gac;
    p.validate()?;
    let fields = build_fields(img, &cfg.edge, &cfg.force, true)?;
    let kl = speed_kl(&gain_scaled_potential(&fields.potential, p.kl_gain), p.m);
    let field = advection_field(&fields.force, p.advection);
    let stencil = CircleStencil::new(p.band_radius);

    // the second stage's CFL bound is checked up front so a bad dt fails
    // before any work
    p.check_cfl(p.lambda.abs())?;
    p.check_cfl(
        p.gamma.abs()
            * match p.advection {
                AdvectionMode::UnitNormalized => 1.0,
                AdvectionMode::Raw => field.max_magnitude(),
            },
    )?;

    let mut grid = init_level_set(seed, img.width(), img.height(), p.band_radius)?;
    grid = reinit_sdf(&grid, &stencil, p.sdf_shape)?;

    let mut stages = Vec::new();
    let mut schedule = Vec::new();
    if p.attract {
        schedule.push(GacStage::Attract);
    }
    schedule.push(GacStage::Propagate);
    schedule.push(GacStage::Advect);
    for stage in schedule {
        let (g, log) = run_stage(grid, stage, &kl, &field, &stencil, p, observer)?;
        debug!(
            "{}: {} steps, converged {}, displacement {:.4}",
            stage.name(),
            log.steps,
            log.converged,
            log.final_displacement
        );
        grid = g;
        stages.push(log);
    }

    let contours = grid
        .zero_level()
        .into_iter()
        .filter(|c| signed_area(c).abs() >= p.min_contour_area)
        .collect();
    Ok(GacResult {
        contours,
        mask: grid.inside_mask(),
        stages,
        level_set: grid,
    })
}

fn run_stage(
    mut grid: LevelSetGrid,
    stage: GacStage,
    kl: &Grid,
    field: &VectorField,
    stencil: &CircleStencil,
    p: &GacParams,
    observer: &mut dyn FnMut(&GacSnapshot),
) -> Result<(LevelSetGrid, GacStageLog)> {
    // Between reinitializations an equilibrium front drifts and is then
    // snapped back, so motion is measured from one reinitialized state to
    // the next and expressed per step.
    let cycles_needed = p.conv_window.div_ceil(p.reinit_every);
    let mut history = Vec::new();
    let mut prev = grid.zero_level();
    let mut converged = false;
    let mut steps = 0;
    while steps < p.max_steps {
        grid = match stage {
            GacStage::Propagate => step_stage1(&grid, kl, p)?,
            GacStage::Attract => step_attract(&grid, field, p)?,
            GacStage::Advect => step_stage2(&grid, field, p)?,
        };
        steps += 1;
        if steps % p.reinit_every == 0 {
            grid = reinit_sdf(&grid, stencil, p.sdf_shape)?;
            let now = grid.zero_level();
            history.push(zero_level_displacement(&prev, &now) / p.reinit_every as f64);
            prev = now;
        }
        observer(&GacSnapshot {
            stage,
            step: steps,
            grid: &grid,
        });
        if history.len() >= cycles_needed
            && history[history.len() - cycles_needed..].iter().all(|&d| d < p.conv_eps)
        {
            converged = true;
            break;
        }
    }
    grid = reinit_sdf(&grid, stencil, p.sdf_shape)?;
    Ok((
        grid,
        GacStageLog {
            stage,
            steps,
            converged,
            final_displacement: history.last().copied().unwrap_or(0.0),
        },
    ))
}
