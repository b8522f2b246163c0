//! Burned-region bookkeeping that lets one balloon snake split into child
//! snakes.
//!
//! Pixels swept by the moving contour are marked; once the contour has moved
//! more than `gap` pixels past them they burn. A vertex about to enter burned
//! territory freezes, so two parts of the same contour meeting head-on stop
//! with an unburned band between their fires. Releasing the contour for a few
//! steps burns that band, the burned region becomes connected, and its
//! boundary loops become the child snakes.

use log::{debug, warn};

use crate::error::{invalid, Error, Result};
use crate::force::{build_fields, EdgeParams, ForceFieldParams, VectorField};
use crate::geometry::{point_in_polygon, point_segment_distance, segments_intersect, Point};
use crate::grid::Mask;
use crate::image::GrayImage;
use crate::snake::{
    curve_displacement, has_converged, propose, resample, Orientation, SnakeContour, SnakeParams,
};
use crate::trace::{label_components, moore_trace, Connectivity};

pub const DEFAULT_GAP: f64 = 1.5;

/// Per-pixel burn state plus the swept-but-not-yet-burned pixels waiting for
/// the contour to move far enough away.
#[derive(Debug, Clone)]
pub struct BurnGrid {
    width: usize,
    height: usize,
    gap: f64,
    burned: Mask,
    swept: Mask,
    pending: Vec<usize>,
}

impl BurnGrid {
    pub fn new(width: usize, height: usize, gap: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&gap) {
            return Err(invalid("gap", format!("{gap} is outside [1, 2]")));
        }
        Ok(Self {
            width,
            height,
            gap,
            burned: Mask::new(width, height),
            swept: Mask::new(width, height),
            pending: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn burned(&self) -> &Mask {
        &self.burned
    }

    pub fn swept(&self) -> &Mask {
        &self.swept
    }

    pub fn is_burned(&self, x: usize, y: usize) -> bool {
        self.burned.get(x, y)
    }

    pub fn burned_count(&self) -> usize {
        self.burned.count()
    }

    /// Marks the pixels on one side of `contour` as swept: the interior when
    /// `inside`, otherwise everything outside it. Used for the seed region.
    pub fn mark_region(&mut self, contour: &SnakeContour, inside: bool) {
        let v = contour.vertices();
        for y in 0..self.height {
            for x in 0..self.width {
                let p = Point::new(x as f64, y as f64);
                if point_in_polygon(p, v) == inside {
                    self.mark(y * self.width + x);
                }
            }
        }
    }

    pub fn mark_swept(&mut self, swept: &SweptRegion) {
        for i in swept.rasterize(self.width, self.height) {
            self.mark(i);
        }
    }

    fn mark(&mut self, i: usize) {
        let (x, y) = (i % self.width, i / self.width);
        if !self.swept.get(x, y) {
            self.swept.set(x, y, true);
            if !self.burned.get(x, y) {
                self.pending.push(i);
            }
        }
    }

    /// Burns pending pixels farther than `gap` from `contour`, or all of them
    /// when `contour` is `None`. Returns the number of newly burned pixels.
    fn burn_pending(&mut self, contour: Option<&SnakeContour>) -> usize {
        let index =
            contour.map(|c| SegmentIndex::new(c.vertices(), self.gap, self.width, self.height));
        let w = self.width;
        let gap = self.gap;
        let mut burned = 0;
        let mut keep = Vec::with_capacity(self.pending.len());
        for &i in &self.pending {
            let p = Point::new((i % w) as f64, (i / w) as f64);
            let far = match &index {
                Some(ix) => !ix.within(p, gap),
                None => true,
            };
            if far {
                self.burned.set(i % w, i / w, true);
                burned += 1;
            } else {
                keep.push(i);
            }
        }
        self.pending = keep;
        burned
    }
}

/// Quadrilaterals between the old and new positions of consecutive vertex
/// pairs of one step.
#[derive(Debug, Clone, Default)]
pub struct SweptRegion {
    quads: Vec<[Point; 4]>,
}

impl SweptRegion {
    /// `old` and `new` must index the same vertices. Segments whose ends did
    /// not move contribute nothing.
    pub fn between(old: &[Point], new: &[Point]) -> Self {
        let n = old.len().min(new.len());
        let mut quads = Vec::with_capacity(n);
        for i in 0..n {
            let j = (i + 1) % n;
            if old[i].dist(new[i]) < 1e-9 && old[j].dist(new[j]) < 1e-9 {
                continue;
            }
            quads.push([old[i], old[j], new[j], new[i]]);
        }
        Self { quads }
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    /// Pixel indices whose centre lies inside a quad or within half a pixel
    /// of its outline, sorted and deduplicated.
    pub fn rasterize(&self, width: usize, height: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for q in &self.quads {
            let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
            for p in q {
                x0 = x0.min(p.x);
                y0 = y0.min(p.y);
                x1 = x1.max(p.x);
                y1 = y1.max(p.y);
            }
            let xa = ((x0 - 0.5).ceil().max(0.0)) as usize;
            let ya = ((y0 - 0.5).ceil().max(0.0)) as usize;
            let xb = ((x1 + 0.5).floor().min(width as f64 - 1.0)).max(-1.0);
            let yb = ((y1 + 0.5).floor().min(height as f64 - 1.0)).max(-1.0);
            if xb < 0.0 || yb < 0.0 {
                continue;
            }
            for y in ya..=yb as usize {
                for x in xa..=xb as usize {
                    let p = Point::new(x as f64, y as f64);
                    let near =
                        (0..4).any(|k| point_segment_distance(p, q[k], q[(k + 1) % 4]) <= 0.5);
                    if near || point_in_polygon(p, q) {
                        out.push(y * width + x);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Uniform-grid bucket of closed-polyline segments for short-range distance
/// queries.
struct SegmentIndex<'a> {
    pts: &'a [Point],
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> SegmentIndex<'a> {
    const CELL: f64 = 4.0;

    /// Every segment is registered in each cell its bounding box, padded by
    /// `reach`, overlaps; a query within `reach` then only needs one cell.
    fn new(pts: &'a [Point], reach: f64, width: usize, height: usize) -> Self {
        let cell = Self::CELL;
        let cols = (width as f64 / cell).ceil() as usize + 1;
        let rows = (height as f64 / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        let n = pts.len();
        let clampc = |v: f64, hi: usize| ((v / cell).floor().max(0.0) as usize).min(hi - 1);
        for i in 0..n {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            let c0 = clampc(a.x.min(b.x) - reach, cols);
            let c1 = clampc(a.x.max(b.x) + reach, cols);
            let r0 = clampc(a.y.min(b.y) - reach, rows);
            let r1 = clampc(a.y.max(b.y) + reach, rows);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets[r * cols + c].push(i as u32);
                }
            }
        }
        Self {
            pts,
            cell,
            cols,
            rows,
            buckets,
        }
    }

    /// True when some segment lies within `d` (at most the build reach).
    fn within(&self, p: Point, d: f64) -> bool {
        let c = ((p.x / self.cell).floor().max(0.0) as usize).min(self.cols - 1);
        let r = ((p.y / self.cell).floor().max(0.0) as usize).min(self.rows - 1);
        let n = self.pts.len();
        self.buckets[r * self.cols + c].iter().any(|&i| {
            let i = i as usize;
            point_segment_distance(p, self.pts[i], self.pts[(i + 1) % n]) <= d
        })
    }
}

/// Marks `swept` and burns every pending pixel more than `gap` from the
/// current contour. Returns the number of newly burned pixels.
pub fn update_burn(grid: &mut BurnGrid, contour: &SnakeContour, swept: &SweptRegion) -> usize {
    grid.mark_swept(swept);
    grid.burn_pending(Some(contour))
}

/// True when a burned pixel square lies within half a pixel of `p`.
pub fn collision_check(p: Point, grid: &BurnGrid) -> bool {
    let x0 = (p.x - 1.0).floor().max(0.0) as usize;
    let y0 = (p.y - 1.0).floor().max(0.0) as usize;
    let x1 = ((p.x + 1.0).ceil().max(0.0) as usize).min(grid.width - 1);
    let y1 = ((p.y + 1.0).ceil().max(0.0) as usize).min(grid.height - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if !grid.burned.get(x, y) {
                continue;
            }
            let dx = ((x as f64 - p.x).abs() - 0.5).max(0.0);
            let dy = ((y as f64 - p.y).abs() - 0.5).max(0.0);
            if dx.hypot(dy) <= 0.5 {
                return true;
            }
        }
    }
    false
}

/// One stage-one step: propose, freeze vertices that would collide with the
/// burned region, move, resample, burn. Returns the new contour and the
/// largest vertex displacement.
pub fn grow_step(
    contour: &SnakeContour,
    grid: &mut BurnGrid,
    force: &VectorField,
    params: &SnakeParams,
) -> Result<(SnakeContour, f64)> {
    let old = contour.vertices();
    let mut next = contour.clone();
    let mut proposed = propose(contour, force, params);
    for (i, q) in proposed.iter_mut().enumerate() {
        if !contour.is_frozen(i) && collision_check(*q, grid) {
            next.set_frozen(i, true);
            *q = old[i];
        }
    }
    let disp = curve_displacement(old, &proposed);
    let swept = SweptRegion::between(old, &proposed);
    next.set_vertices_unchecked(proposed);
    let next = resample(&next, params)?;
    update_burn(grid, &next, &swept);
    Ok((next, disp))
}

/// Clears every frozen flag and evolves the contour `extra_steps` more steps
/// without collision checks, burning everything it sweeps with no trailing
/// gap. Afterwards the burned region must be 4-connected. Returns the number
/// of steps run. `extra_steps = 0` leaves both contour flags and grid as
/// they were apart from the flag reset.
pub fn stage_two_release(
    contour: &mut SnakeContour,
    grid: &mut BurnGrid,
    force: &VectorField,
    params: &SnakeParams,
    extra_steps: usize,
) -> Result<usize> {
    contour.freeze_all(false);
    if extra_steps == 0 {
        return Ok(0);
    }
    for _ in 0..extra_steps {
        let old = contour.vertices().to_vec();
        let proposed = propose(contour, force, params);
        let swept = SweptRegion::between(&old, &proposed);
        contour.set_vertices_unchecked(proposed);
        *contour = resample(contour, params)?;
        grid.mark_swept(&swept);
        // burn until nothing changes; without the gap one pass suffices
        while grid.burn_pending(None) > 0 {}
    }
    let comps = label_components(&grid.burned, true, Connectivity::Four).count;
    if comps > 1 {
        return Err(Error::ReleaseIncomplete { components: comps });
    }
    Ok(extra_steps)
}

/// Whether a traced loop belongs to the burned region's outside or to one of
/// its holes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    Outer,
    Hole,
}

#[derive(Debug, Clone)]
pub struct BoundaryLoop {
    pub kind: LoopKind,
    /// Pixel centres in tracing order.
    pub pixels: Vec<(usize, usize)>,
    /// Bounding box comes within one pixel of all four image sides.
    pub hugs_frame: bool,
}

impl BoundaryLoop {
    /// Closed polyline through the pixel centres, oriented so the balloon
    /// normal faces the unburned side: clockwise for outer loops,
    /// counterclockwise for holes.
    pub fn to_contour(&self) -> Result<SnakeContour> {
        let mut pts: Vec<Point> = Vec::with_capacity(self.pixels.len());
        for &(x, y) in &self.pixels {
            let p = Point::new(x as f64, y as f64);
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        while pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        let c = SnakeContour::new(pts)?;
        Ok(match self.kind {
            LoopKind::Outer => c.with_orientation(Orientation::Clockwise),
            LoopKind::Hole => c.with_orientation(Orientation::CounterClockwise),
        })
    }
}

/// Traces every boundary loop of a burned mask: the outer boundary of each
/// 8-connected burned component and the boundary of each 4-connected
/// unburned component that does not touch the image border.
pub fn boundary_loops(burned: &Mask) -> Vec<BoundaryLoop> {
    let (w, h) = burned.dims();
    let mut loops = Vec::new();
    let fg = label_components(burned, true, Connectivity::Eight);
    for label in 1..=fg.count as u32 {
        let pixels = moore_trace(&fg.mask_of(label));
        let hugs_frame = hugs_frame(&pixels, w, h);
        loops.push(BoundaryLoop {
            kind: LoopKind::Outer,
            pixels,
            hugs_frame,
        });
    }
    let bg = label_components(burned, false, Connectivity::Four);
    for label in 1..=bg.count as u32 {
        if bg.touches_border[label as usize] {
            continue;
        }
        loops.push(BoundaryLoop {
            kind: LoopKind::Hole,
            pixels: moore_trace(&bg.mask_of(label)),
            hugs_frame: false,
        });
    }
    loops
}

fn hugs_frame(pixels: &[(usize, usize)], w: usize, h: usize) -> bool {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &(x, y) in pixels {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    !pixels.is_empty() && x0 <= 1 && y0 <= 1 && x1 + 2 >= w && y1 + 2 >= h
}

/// Child contours of the burned region: every boundary loop except an outer
/// loop that runs along the image frame. Loops too short to form a contour
/// are skipped.
pub fn extract_child_contours(grid: &BurnGrid) -> Vec<SnakeContour> {
    boundary_loops(&grid.burned)
        .into_iter()
        .filter(|l| !(l.kind == LoopKind::Outer && l.hugs_frame))
        .filter_map(|l| l.to_contour().ok())
        .collect()
}

/// Outcome of refining one child.
#[derive(Debug, Clone)]
pub struct Refined {
    pub contour: SnakeContour,
    pub steps: usize,
    pub converged: bool,
}

/// Evolves each child under `params` (normally with a small or zero balloon
/// weight) until it converges or `max_steps` is reached. Children that
/// collapse are dropped with a warning.
pub fn refine_children(
    children: &[SnakeContour],
    force: &VectorField,
    params: &SnakeParams,
    max_steps: usize,
) -> Vec<Refined> {
    let mut out = Vec::with_capacity(children.len());
    'child: for (k, child) in children.iter().enumerate() {
        let mut c = child.clone();
        c.freeze_all(false);
        let mut history = Vec::new();
        let mut converged = false;
        let mut steps = 0;
        while steps < max_steps {
            let next = propose(&c, force, params);
            history.push(curve_displacement(c.vertices(), &next));
            c.set_vertices_unchecked(next);
            steps += 1;
            c = match resample(&c, params) {
                Ok(c) => c,
                Err(_) => {
                    warn!("child {k} collapsed during refinement; dropped");
                    continue 'child;
                }
            };
            if has_converged(&history, params) {
                converged = true;
                break;
            }
        }
        out.push(Refined {
            contour: c,
            steps,
            converged,
        });
    }
    out
}

/// Full parameter set for [`segment_multi`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSegConfig {
    pub edge: EdgeParams,
    pub force: ForceFieldParams,
    /// Rescale the force so its largest vector has unit length.
    pub normalize_force: bool,
    pub snake: SnakeParams,
    pub gap: f64,
    pub max_steps: usize,
    /// Stage one also ends once the swept region has not grown for this
    /// many steps (0 disables): the fire has stopped spreading even if a few
    /// vertices still jitter in place.
    pub stall_window: usize,
    /// Release steps per round; `None` derives `ceil(2 gap / (dt |lambda|))`.
    pub extra_steps: Option<usize>,
    /// Release rounds attempted before giving up on connectivity.
    pub release_rounds: usize,
    pub refine_lambda: f64,
    pub refine_max_steps: usize,
    /// Children enclosing less area than this (pixels) are discarded.
    pub min_child_area: f64,
}

impl Default for MultiSegConfig {
    fn default() -> Self {
        Self {
            edge: EdgeParams::default(),
            force: ForceFieldParams::default(),
            normalize_force: true,
            snake: SnakeParams::default(),
            gap: DEFAULT_GAP,
            max_steps: 8000,
            stall_window: 100,
            extra_steps: None,
            release_rounds: 4,
            refine_lambda: 0.0,
            refine_max_steps: 600,
            min_child_area: 16.0,
        }
    }
}

impl MultiSegConfig {
    pub fn validate(&self) -> Result<()> {
        self.force.validate()?;
        self.snake.validate()?;
        if !(1.0..=2.0).contains(&self.gap) {
            return Err(invalid("gap", format!("{} is outside [1, 2]", self.gap)));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be >= 1"));
        }
        if self.snake.lambda == 0.0 {
            return Err(invalid(
                "lambda",
                "stage one needs a nonzero balloon weight",
            ));
        }
        if !self.refine_lambda.is_finite() {
            return Err(invalid("refine_lambda", "must be finite"));
        }
        if !(self.min_child_area >= 0.0) {
            return Err(invalid("min_child_area", "must be >= 0"));
        }
        Ok(())
    }

    pub fn resolved_extra_steps(&self) -> usize {
        self.extra_steps.unwrap_or_else(|| {
            (2.0 * self.gap / (self.snake.dt * self.snake.lambda.abs())).ceil() as usize
        })
    }

    fn refine_params(&self) -> SnakeParams {
        SnakeParams {
            lambda: self.refine_lambda,
            ..self.snake
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageLog {
    pub stage1_steps: usize,
    pub stage1_converged: bool,
    /// Stage one ended through the stall window rather than the displacement
    /// test.
    pub stage1_stalled: bool,
    pub release_steps: usize,
    pub release_complete: bool,
    pub loops_traced: usize,
    pub loops_dropped: usize,
    pub refine_steps: Vec<usize>,
    pub refine_converged: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct MultiSegResult {
    pub children: Vec<SnakeContour>,
    /// Children as extracted, before refinement.
    pub extracted: Vec<SnakeContour>,
    pub mask: Mask,
    pub stage_log: StageLog,
}

impl MultiSegResult {
    /// Stage one converged, release connected the region and every child
    /// refinement converged.
    pub fn converged(&self) -> bool {
        let l = &self.stage_log;
        l.stage1_converged && l.release_complete && l.refine_converged.iter().all(|&c| c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Grow,
    Release,
    Refine,
}

/// State handed to an observer after each step.
pub struct Snapshot<'a> {
    pub stage: Stage,
    pub step: usize,
    pub contours: &'a [SnakeContour],
    pub grid: &'a BurnGrid,
}

/// Segments every object reachable from `seed` with the two-stage balloon
/// model.
pub fn segment_multi(
    img: &GrayImage,
    seed: &SnakeContour,
    cfg: &MultiSegConfig,
) -> Result<MultiSegResult> {
    segment_multi_observed(img, seed, cfg, &mut |_| {})
}

/// [`segment_multi`] with a callback invoked after every step of every
/// stage.
pub fn segment_multi_observed(
    img: &GrayImage,
    seed: &SnakeContour,
    cfg: &MultiSegConfig,
    observer: &mut dyn FnMut(&Snapshot),
) -> Result<MultiSegResult> {
    cfg.validate()?;
    let fields = build_fields(img, &cfg.edge, &cfg.force, cfg.normalize_force)?;
    let force = &fields.force;
    let params = &cfg.snake;
    params.validate_with_force(force.max_magnitude())?;
    cfg.refine_params()
        .validate_with_force(force.max_magnitude())?;

    let (w, h) = (img.width(), img.height());
    let mut grid = BurnGrid::new(w, h, cfg.gap)?;
    let inflating = (params.lambda > 0.0) == (seed.orientation() == Orientation::Clockwise);
    let mut contour = resample(seed, params)?;
    contour.freeze_all(false);
    grid.mark_region(&contour, inflating);
    grid.burn_pending(Some(&contour));

    let mut log = StageLog::default();
    let mut history = Vec::new();
    let mut swept = grid.swept().count();
    let mut last_growth = 0;
    for step in 1..=cfg.max_steps {
        let (next, disp) = grow_step(&contour, &mut grid, force, params)?;
        contour = next;
        history.push(disp);
        log.stage1_steps = step;
        observer(&Snapshot {
            stage: Stage::Grow,
            step,
            contours: std::slice::from_ref(&contour),
            grid: &grid,
        });
        if contour.all_frozen() || has_converged(&history, params) {
            log.stage1_converged = true;
            break;
        }
        let now = grid.swept().count();
        if now != swept {
            swept = now;
            last_growth = step;
        } else if cfg.stall_window > 0 && step - last_growth >= cfg.stall_window {
            log.stage1_converged = true;
            log.stage1_stalled = true;
            break;
        }
    }
    debug!(
        "stage 1: {} steps, converged {}, {} burned",
        log.stage1_steps,
        log.stage1_converged,
        grid.burned_count()
    );

    let extra = cfg.resolved_extra_steps();
    for round in 0..cfg.release_rounds.max(1) {
        match stage_two_release(&mut contour, &mut grid, force, params, extra) {
            Ok(n) => {
                log.release_steps += n;
                log.release_complete = true;
            }
            Err(Error::ReleaseIncomplete { components }) => {
                log.release_steps += extra;
                debug!("release round {round}: {components} burned components remain");
            }
            Err(e) => return Err(e),
        }
        observer(&Snapshot {
            stage: Stage::Release,
            step: log.release_steps,
            contours: std::slice::from_ref(&contour),
            grid: &grid,
        });
        if log.release_complete {
            break;
        }
    }
    if !log.release_complete {
        warn!("burned region still disconnected after stage-two release");
    }

    let loops = boundary_loops(grid.burned());
    log.loops_traced = loops.len();
    let extracted: Vec<SnakeContour> = loops
        .into_iter()
        .filter(|l| !(l.kind == LoopKind::Outer && l.hugs_frame))
        .filter_map(|l| l.to_contour().ok())
        .filter(|c| c.signed_area().abs() >= cfg.min_child_area)
        .filter_map(|c| resample(&c, params).ok())
        .collect();
    log.loops_dropped = log.loops_traced - extracted.len();

    let refined = refine_children(
        &extracted,
        force,
        &cfg.refine_params(),
        cfg.refine_max_steps,
    );
    let children: Vec<SnakeContour> = refined.iter().map(|r| r.contour.clone()).collect();
    log.refine_steps = refined.iter().map(|r| r.steps).collect();
    log.refine_converged = refined.iter().map(|r| r.converged).collect();
    observer(&Snapshot {
        stage: Stage::Refine,
        step: log.refine_steps.iter().copied().max().unwrap_or(0),
        contours: &children,
        grid: &grid,
    });

    Ok(MultiSegResult {
        children,
        extracted,
        mask: grid.burned().clone(),
        stage_log: log,
    })
}

/// Number of places where two burned pixels closer than `gap` lie on
/// opposite sides of the contour, i.e. where the unburned band separating
/// two fire fronts is thinner than `gap`.
pub fn band_violations(grid: &BurnGrid, contour: &SnakeContour) -> usize {
    let (w, h) = (grid.width, grid.height);
    let v = contour.vertices();
    let n = v.len();
    let index = SegmentIndex::new(v, 2.0 * grid.gap, w, h);
    let r = grid.gap.ceil() as isize;
    let mut count = 0;
    for y in 0..h {
        for x in 0..w {
            if !grid.burned.get(x, y) {
                continue;
            }
            let a = Point::new(x as f64, y as f64);
            if !index.within(a, grid.gap) {
                continue;
            }
            for dy in 0..=r {
                for dx in -r..=r {
                    if dy == 0 && dx <= 0 {
                        continue;
                    }
                    let (bx, by) = (x as isize + dx, y as isize + dy);
                    if !grid.burned.get_or_false(bx, by) {
                        continue;
                    }
                    let b = Point::new(bx as f64, by as f64);
                    if a.dist(b) >= grid.gap {
                        continue;
                    }
                    let crosses = (0..n).any(|i| segments_intersect(a, b, v[i], v[(i + 1) % n]));
                    if crosses {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(r: f64, c: Point) -> SnakeContour {
        let n = ((std::f64::consts::TAU * r) / 1.5).ceil() as usize;
        SnakeContour::circle(c, r, n.max(8)).unwrap()
    }

    #[test]
    fn gap_is_validated() {
        assert!(BurnGrid::new(8, 8, 0.5).is_err());
        assert!(BurnGrid::new(8, 8, 2.5).is_err());
        assert!(BurnGrid::new(8, 8, 1.5).is_ok());
    }

    #[test]
    fn stationary_contour_burns_nothing_new() {
        let c = circle(10.0, Point::new(32.0, 32.0));
        let mut g = BurnGrid::new(64, 64, 1.5).unwrap();
        g.mark_region(&c, true);
        g.burn_pending(Some(&c));
        let before = g.burned().clone();
        let swept = SweptRegion::between(c.vertices(), c.vertices());
        assert!(swept.is_empty());
        assert_eq!(update_burn(&mut g, &c, &swept), 0);
        assert_eq!(g.burned(), &before);
    }

    #[test]
    fn inflating_circle_burns_behind_gap() {
        let ctr = Point::new(32.0, 32.0);
        let n = 64;
        let small = SnakeContour::circle(ctr, 5.0, n).unwrap();
        let big = SnakeContour::circle(ctr, 10.0, n).unwrap();
        let mut g = BurnGrid::new(64, 64, 2.0).unwrap();
        g.mark_region(&small, true);
        g.burn_pending(Some(&small));
        let swept = SweptRegion::between(small.vertices(), big.vertices());
        update_burn(&mut g, &big, &swept);
        // the polygon sits slightly inside the true circle between vertices
        let inset = 10.0 * (1.0 - (std::f64::consts::PI / n as f64).cos());
        for y in 0..64 {
            for x in 0..64 {
                let r = Point::new(x as f64, y as f64).dist(ctr);
                if r < 8.0 - inset - 1e-9 {
                    assert!(g.is_burned(x, y), "({x},{y}) r={r}");
                } else if r > 8.0 + 1e-9 {
                    assert!(!g.is_burned(x, y), "({x},{y}) r={r}");
                }
            }
        }
    }

    #[test]
    fn gap_wider_than_sweep_burns_nothing() {
        let ctr = Point::new(16.0, 16.0);
        let a = SnakeContour::circle(ctr, 5.0, 32).unwrap();
        let b = SnakeContour::circle(ctr, 5.5, 32).unwrap();
        let mut g = BurnGrid::new(32, 32, 2.0).unwrap();
        let swept = SweptRegion::between(a.vertices(), b.vertices());
        assert_eq!(update_burn(&mut g, &b, &swept), 0);
    }

    #[test]
    fn collision_cases() {
        let mut g = BurnGrid::new(10, 10, 1.5).unwrap();
        assert!(!collision_check(Point::new(4.0, 4.0), &g));
        g.burned.set(5, 5, true);
        assert!(collision_check(Point::new(5.0, 5.0), &g));
        assert!(collision_check(Point::new(4.0, 5.0), &g));
        assert!(!collision_check(Point::new(3.4, 5.0), &g));
        assert!(!collision_check(Point::new(4.0, 4.0), &g));
    }

    #[test]
    fn release_with_zero_steps_is_noop() {
        let c0 = circle(6.0, Point::new(16.0, 16.0));
        let mut c = c0.clone();
        c.set_frozen(0, true);
        let mut g = BurnGrid::new(32, 32, 1.5).unwrap();
        g.mark_region(&c, true);
        g.burn_pending(Some(&c));
        let before = g.burned().clone();
        let f = VectorField::zeros(32, 32);
        let n = stage_two_release(&mut c, &mut g, &f, &SnakeParams::default(), 0).unwrap();
        assert_eq!(n, 0);
        assert_eq!(g.burned(), &before);
        assert!(!c.frozen().iter().any(|&b| b));
    }

    #[test]
    fn burned_disk_gives_one_clockwise_child() {
        let mut g = BurnGrid::new(40, 40, 1.5).unwrap();
        let ctr = Point::new(20.0, 20.0);
        for y in 0..40 {
            for x in 0..40 {
                if Point::new(x as f64, y as f64).dist(ctr) <= 8.0 {
                    g.burned.set(x, y, true);
                }
            }
        }
        let kids = extract_child_contours(&g);
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].orientation(), Orientation::Clockwise);
        for p in kids[0].vertices() {
            assert!((p.dist(ctr) - 8.0).abs() <= 1.0);
        }
    }

    #[test]
    fn empty_grid_has_no_children() {
        let g = BurnGrid::new(16, 16, 1.5).unwrap();
        assert!(extract_child_contours(&g).is_empty());
    }

    #[test]
    fn zero_force_refinement_only_shrinks_a_little() {
        let c = circle(10.0, Point::new(32.0, 32.0));
        let f = VectorField::zeros(64, 64);
        let p = SnakeParams {
            lambda: 0.0,
            ..SnakeParams::default()
        };
        let out = refine_children(std::slice::from_ref(&c), &f, &p, 20);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].steps, 20);
        let a0 = c.signed_area().abs();
        let a1 = out[0].contour.signed_area().abs();
        assert!(a1 < a0 && a1 > 0.8 * a0);
    }
}
