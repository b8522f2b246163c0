//! Template-plane potential and the image force derived from it.
//!
//! Every edge pixel `(xi, yi)` with strength `g` contributes `g * f(r)` to
//! the potential at `(x, y)` on a plane lifted `h` pixels above the image,
//! where `r = sqrt((x - xi)^2 + (y - yi)^2 + h^2)`. The force is the
//! gradient of that potential, so it points toward edges.

use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::grid::Grid;
use crate::image::{gaussian_smooth, gradient_magnitude, threshold_edges, EdgeMap, GrayImage};

/// Radial transfer function shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransferKind {
    /// `1 / (k r^p)`
    InversePower,
    /// `exp(-k r^p)`
    Exponential,
    /// `pi/2 - atan(k r^p)`
    Arctan,
}

impl TransferKind {
    pub fn name(self) -> &'static str {
        match self {
            TransferKind::InversePower => "inverse_power",
            TransferKind::Exponential => "exponential",
            TransferKind::Arctan => "arctan",
        }
    }
}

impl std::str::FromStr for TransferKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse_power" | "inverse-power" => Ok(TransferKind::InversePower),
            "exponential" => Ok(TransferKind::Exponential),
            "arctan" => Ok(TransferKind::Arctan),
            other => Err(invalid("kind", format!("unknown transfer kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceFieldParams {
    /// Separation between image plane and template plane, pixels.
    pub h: f64,
    pub k: f64,
    pub p: f64,
    pub kind: TransferKind,
    /// Sources with `r >= r_max` are dropped. `f64::INFINITY` disables
    /// truncation.
    pub r_max: f64,
}

impl Default for ForceFieldParams {
    fn default() -> Self {
        Self {
            h: 1.0,
            k: 1.0,
            p: 1.0,
            kind: TransferKind::Exponential,
            r_max: 64.0,
        }
    }
}

impl ForceFieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h <= 2.0) {
            return Err(invalid("h", format!("{} is outside (0, 2]", self.h)));
        }
        self.validate_shape()?;
        if !(self.r_max >= 1.0) {
            return Err(invalid(
                "r_max",
                format!("{} is smaller than 1 pixel", self.r_max),
            ));
        }
        if self.r_max < self.h {
            return Err(invalid(
                "r_max",
                format!("{} is smaller than h = {}", self.r_max, self.h),
            ));
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid("h", format!("{} must be positive", self.h)));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(invalid("k", format!("{} must be positive", self.k)));
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return Err(invalid("p", format!("{} must be positive", self.p)));
        }
        if self.r_max.is_nan() {
            return Err(invalid("r_max", "NaN"));
        }
        Ok(())
    }
}

#[inline]
fn transfer_raw(kind: TransferKind, k: f64, p: f64, r: f64) -> f64 {
    let z = k * r.powf(p);
    match kind {
        TransferKind::InversePower => 1.0 / z,
        TransferKind::Exponential => (-z).exp(),
        TransferKind::Arctan => FRAC_PI_2 - z.atan(),
    }
}

/// Evaluates the transfer function at distance `r > 0`.
pub fn transfer(r: f64, params: &ForceFieldParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid("r", format!("{r} must be positive")));
    }
    Ok(transfer_raw(params.kind, params.k, params.p, r))
}

/// Potential sampled on the template plane above each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField(pub(crate) Grid);

impl PotentialField {
    pub fn from_grid(grid: Grid) -> Self {
        Self(grid)
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn scaled(&self, s: f64) -> PotentialField {
        PotentialField(self.0.map(|v| v * s))
    }
}

/// Force components on the pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub fx: Grid,
    pub fy: Grid,
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            fx: Grid::new(width, height),
            fy: Grid::new(width, height),
        }
    }

    pub fn uniform(width: usize, height: usize, f: Point) -> Self {
        Self {
            fx: Grid::filled(width, height, f.x),
            fy: Grid::filled(width, height, f.y),
        }
    }

    pub fn width(&self) -> usize {
        self.fx.width()
    }

    pub fn height(&self) -> usize {
        self.fx.height()
    }

    pub fn get(&self, x: usize, y: usize) -> Point {
        Point::new(self.fx.get(x, y), self.fy.get(x, y))
    }

    pub fn magnitude(&self) -> Grid {
        let data = self
            .fx
            .data()
            .iter()
            .zip(self.fy.data())
            .map(|(a, b)| a.hypot(*b))
            .collect();
        Grid::from_vec(self.width(), self.height(), data)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.fx
            .data()
            .iter()
            .zip(self.fy.data())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Scales the field so its largest vector has unit length. Returns the
    /// scale factor applied (1 for an all-zero field).
    pub fn normalize_max(&mut self) -> f64 {
        let m = self.max_magnitude();
        if m > 0.0 && m.is_finite() {
            let s = 1.0 / m;
            self.fx.data_mut().iter_mut().for_each(|v| *v *= s);
            self.fy.data_mut().iter_mut().for_each(|v| *v *= s);
            s
        } else {
            1.0
        }
    }
}

/// Precomputed offset kernel: `f(sqrt(dx^2 + dy^2 + h^2))` for every
/// integer offset whose `r` is below `r_max`.
#[derive(Debug, Clone)]
pub struct PotentialKernel {
    radius_x: usize,
    radius_y: usize,
    /// Row-major `(2 radius_y + 1) x (2 radius_x + 1)`; zero outside `r_max`.
    weights: Vec<f64>,
}

impl PotentialKernel {
    /// Builds a kernel sized for an image of `width x height`. Only the
    /// transfer shape is checked, so plane separations outside `(0, 2]` can
    /// be studied.
    pub fn build(params: &ForceFieldParams, width: usize, height: usize) -> Result<Self> {
        params.validate_shape()?;
        let h2 = params.h * params.h;
        let reach = if params.r_max.is_finite() {
            ((params.r_max * params.r_max - h2).max(0.0)).sqrt().floor() as usize
        } else {
            usize::MAX
        };
        let radius_x = reach.min(width.saturating_sub(1));
        let radius_y = reach.min(height.saturating_sub(1));
        let kw = 2 * radius_x + 1;
        let kh = 2 * radius_y + 1;
        let mut weights = vec![0.0; kw * kh];
        for j in 0..kh {
            let dy = j as f64 - radius_y as f64;
            for i in 0..kw {
                let dx = i as f64 - radius_x as f64;
                let r = (dx * dx + dy * dy + h2).sqrt();
                if r < params.r_max {
                    weights[j * kw + i] = transfer_raw(params.kind, params.k, params.p, r);
                }
            }
        }
        Ok(Self {
            radius_x,
            radius_y,
            weights,
        })
    }

    /// Value of the kernel at integer offset `(dx, dy)`.
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        if dx.unsigned_abs() > self.radius_x || dy.unsigned_abs() > self.radius_y {
            return 0.0;
        }
        let kw = 2 * self.radius_x + 1;
        let i = (dx + self.radius_x as isize) as usize;
        let j = (dy + self.radius_y as isize) as usize;
        self.weights[j * kw + i]
    }

    /// Scatters every nonzero source through the kernel. Sources are visited
    /// in row-major order, so the result is deterministic.
    pub fn apply(&self, edges: &EdgeMap) -> PotentialField {
        let (w, h) = (edges.width(), edges.height());
        let mut out = Grid::new(w, h);
        let kw = 2 * self.radius_x + 1;
        let rx = self.radius_x as isize;
        let ry = self.radius_y as isize;
        for sy in 0..h {
            for sx in 0..w {
                let g = edges.get(sx, sy);
                if g == 0.0 {
                    continue;
                }
                let y0 = (sy as isize - ry).max(0) as usize;
                let y1 = ((sy as isize + ry) as usize).min(h - 1);
                let x0 = (sx as isize - rx).max(0) as usize;
                let x1 = ((sx as isize + rx) as usize).min(w - 1);
                let data = out.data_mut();
                for ty in y0..=y1 {
                    let krow = (ty as isize - sy as isize + ry) as usize * kw;
                    let orow = ty * w;
                    for tx in x0..=x1 {
                        let ki = krow + (tx as isize - sx as isize + rx) as usize;
                        data[orow + tx] += g * self.weights[ki];
                    }
                }
            }
        }
        PotentialField(out)
    }
}

/// Template-plane potential via the precomputed offset kernel.
pub fn compute_potential(edges: &EdgeMap, params: &ForceFieldParams) -> Result<PotentialField> {
    params.validate()?;
    Ok(PotentialKernel::build(params, edges.width(), edges.height())?.apply(edges))
}

/// Template-plane potential by direct truncated summation: for each sample,
/// every source inside the truncation window is visited and `f(r)` is
/// evaluated from scratch.
pub fn compute_potential_direct(
    edges: &EdgeMap,
    params: &ForceFieldParams,
) -> Result<PotentialField> {
    params.validate()?;
    let (w, h) = (edges.width(), edges.height());
    let h2 = params.h * params.h;
    let reach = if params.r_max.is_finite() {
        (params.r_max * params.r_max - h2).max(0.0).sqrt().floor() as isize
    } else {
        w.max(h) as isize
    };
    let grid = Grid::from_fn(w, h, |x, y| {
        let mut acc = 0.0;
        let y0 = (y as isize - reach).max(0) as usize;
        let y1 = ((y as isize + reach).max(0) as usize).min(h - 1);
        let x0 = (x as isize - reach).max(0) as usize;
        let x1 = ((x as isize + reach).max(0) as usize).min(w - 1);
        for sy in y0..=y1 {
            for sx in x0..=x1 {
                let g = edges.get(sx, sy);
                if g == 0.0 {
                    continue;
                }
                let dx = x as f64 - sx as f64;
                let dy = y as f64 - sy as f64;
                let r = (dx * dx + dy * dy + h2).sqrt();
                if r < params.r_max {
                    acc += g * transfer_raw(params.kind, params.k, params.p, r);
                }
            }
        }
        acc
    });
    Ok(PotentialField(grid))
}

/// Potential at a continuous template-plane position, summing every source
/// within `r_max`. Only the transfer shape is validated.
pub fn potential_at(edges: &EdgeMap, params: &ForceFieldParams, pos: Point) -> Result<f64> {
    params.validate_shape()?;
    let h2 = params.h * params.h;
    let mut acc = 0.0;
    for sy in 0..edges.height() {
        for sx in 0..edges.width() {
            let g = edges.get(sx, sy);
            if g == 0.0 {
                continue;
            }
            let dx = pos.x - sx as f64;
            let dy = pos.y - sy as f64;
            let r = (dx * dx + dy * dy + h2).sqrt();
            if r < params.r_max {
                acc += g * transfer_raw(params.kind, params.k, params.p, r);
            }
        }
    }
    Ok(acc)
}

/// Force as the central-difference gradient of the potential (one-sided on
/// the border). It points toward increasing potential, i.e. toward edges.
pub fn compute_force(pot: &PotentialField) -> VectorField {
    let (fx, fy) = pot.0.gradient();
    VectorField { fx, fy }
}

/// Bilinear force sample; positions outside the grid are clamped onto it.
pub fn sample_force(field: &VectorField, pos: Point) -> Point {
    Point::new(
        field.fx.sample_bilinear(pos.x, pos.y),
        field.fy.sample_bilinear(pos.x, pos.y),
    )
}

/// Edge extraction ahead of the potential: optional Gaussian pre-smoothing
/// and a threshold on the gradient magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeParams {
    pub smoothing_sigma: f64,
    pub threshold: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            smoothing_sigma: 0.0,
            threshold: 0.05,
        }
    }
}

/// Edge map, potential and force derived from one image.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub edges: EdgeMap,
    pub potential: PotentialField,
    pub force: VectorField,
    /// Largest force magnitude before any normalization.
    pub raw_max_force: f64,
}

/// Runs edge detection, the potential and its gradient. With `normalize`
/// the force is rescaled so its largest vector has unit length.
pub fn build_fields(
    img: &GrayImage,
    edge: &EdgeParams,
    params: &ForceFieldParams,
    normalize: bool,
) -> Result<FieldSet> {
    params.validate()?;
    let smoothed = gaussian_smooth(img, edge.smoothing_sigma);
    let edges = threshold_edges(&gradient_magnitude(&smoothed), edge.threshold)?;
    let potential = compute_potential(&edges, params)?;
    let mut force = compute_force(&potential);
    let raw_max_force = force.max_magnitude();
    if normalize {
        force.normalize_max();
    }
    Ok(FieldSet {
        edges,
        potential,
        force,
        raw_max_force,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, LN_2};

    fn params(kind: TransferKind, k: f64, p: f64, h: f64) -> ForceFieldParams {
        ForceFieldParams {
            h,
            k,
            p,
            kind,
            r_max: 64.0,
        }
    }

    fn single_charge(w: usize, h: usize, x0: usize, y0: usize) -> EdgeMap {
        EdgeMap::new(Grid::from_fn(w, h, |x, y| {
            if (x, y) == (x0, y0) {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap()
    }

    #[test]
    fn transfer_identities() {
        let inv = params(TransferKind::InversePower, 1.0, 1.0, 1.0);
        assert_eq!(transfer(1.0, &inv).unwrap(), 1.0);

        let ex = params(TransferKind::Exponential, 1.0, 1.0, 1.0);
        assert!((transfer(1e-12, &ex).unwrap() - 1.0).abs() < 1e-9);
        assert!((transfer(LN_2, &ex).unwrap() - 0.5).abs() < 1e-15);

        let at = params(TransferKind::Arctan, 1.0, 1.0, 1.0);
        assert!((transfer(1.0, &at).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!(transfer(1e12, &at).unwrap() < 1e-11);

        assert!(transfer(0.0, &ex).is_err());
        assert!(transfer(-1.0, &ex).is_err());
    }

    #[test]
    fn transfer_is_strictly_decreasing() {
        for kind in [
            TransferKind::InversePower,
            TransferKind::Exponential,
            TransferKind::Arctan,
        ] {
            let p = params(kind, 0.7, 1.3, 1.0);
            let mut prev = f64::INFINITY;
            for i in 1..200 {
                let v = transfer(0.1 * i as f64, &p).unwrap();
                assert!(
                    v.is_finite() && v < prev,
                    "{kind:?} at r = {}",
                    0.1 * i as f64
                );
                prev = v;
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = ForceFieldParams::default();
        assert!(p.validate().is_ok());
        p.h = 3.0;
        assert!(p.validate().is_err());
        p.h = 0.0;
        assert!(p.validate().is_err());
        p.h = 2.0;
        assert!(p.validate().is_ok());
        p.r_max = 0.5;
        assert!(p.validate().is_err());
        p.r_max = 1.5;
        assert!(p.validate().is_err()); // below h
        p = ForceFieldParams {
            k: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_edges_give_zero_potential() {
        let e = EdgeMap::new(Grid::new(16, 12)).unwrap();
        let pot = compute_potential(&e, &ForceFieldParams::default()).unwrap();
        assert!(pot.grid().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_charge_values() {
        let e = single_charge(20, 20, 5, 5);
        let p = params(TransferKind::InversePower, 1.0, 1.0, 1.0);
        let pot = compute_potential(&e, &p).unwrap();
        assert!((pot.get(5, 5) - 1.0).abs() < 1e-15);
        assert!((pot.get(8, 9) - 1.0 / 26f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kernel_and_direct_agree() {
        let e = EdgeMap::new(Grid::from_fn(23, 17, |x, y| {
            ((x * 31 + y * 17) % 7) as f64 / 6.0
        }))
        .unwrap();
        for kind in [
            TransferKind::InversePower,
            TransferKind::Exponential,
            TransferKind::Arctan,
        ] {
            let p = ForceFieldParams {
                r_max: 9.5,
                ..params(kind, 0.8, 0.7, 1.3)
            };
            let a = compute_potential(&e, &p).unwrap();
            let b = compute_potential_direct(&e, &p).unwrap();
            for (u, v) in a.grid().data().iter().zip(b.grid().data()) {
                assert!((u - v).abs() <= 1e-12 * v.abs().max(1e-300), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn force_points_toward_single_charge() {
        let (cx, cy) = (15usize, 15usize);
        let e = single_charge(31, 31, cx, cy);
        let pot = compute_potential(&e, &params(TransferKind::Exponential, 0.5, 1.0, 1.0)).unwrap();
        let f = compute_force(&pot);
        for y in 1..30 {
            for x in 1..30 {
                let v = f.get(x, y);
                if v.norm() > 0.0 {
                    let to_charge = Point::new(cx as f64 - x as f64, cy as f64 - y as f64);
                    assert!(v.dot(to_charge) > 0.0, "at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn constant_potential_has_no_force() {
        let f = compute_force(&PotentialField(Grid::filled(7, 5, 3.0)));
        assert_eq!(f.max_magnitude(), 0.0);
    }

    #[test]
    fn symmetric_ring_cancels_at_center() {
        let c = 20.0;
        let e = EdgeMap::new(Grid::from_fn(41, 41, |x, y| {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            if (d - 8.0).abs() < 0.5 {
                1.0
            } else {
                0.0
            }
        }))
        .unwrap();
        let pot = compute_potential(&e, &ForceFieldParams::default()).unwrap();
        let f = compute_force(&pot);
        assert!(f.get(20, 20).norm() < 1e-9);
    }

    #[test]
    fn sampling_contract() {
        let mut field = VectorField::zeros(4, 3);
        field.fx.set(1, 1, 0.0);
        field.fx.set(2, 1, 1.0);
        field.fy.set(2, 1, -2.0);
        assert_eq!(
            sample_force(&field, Point::new(2.0, 1.0)),
            Point::new(1.0, -2.0)
        );
        assert_eq!(sample_force(&field, Point::new(1.5, 1.0)).x, 0.5);
        let u = VectorField::uniform(5, 5, Point::new(0.3, -0.7));
        for pos in [
            Point::new(0.1, 3.9),
            Point::new(2.5, 2.5),
            Point::new(-3.0, 10.0),
        ] {
            let s = sample_force(&u, pos);
            assert!((s.x - 0.3).abs() < 1e-15 && (s.y + 0.7).abs() < 1e-15);
        }
    }
}
