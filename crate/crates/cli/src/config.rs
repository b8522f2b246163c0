//! Sectioned TOML run configuration. Every field has a default so an empty
//! file is valid; the resolved values are echoed into the manifest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use firefront::burn::MultiSegConfig;
use firefront::force::EdgeParams;
use firefront::geometry::Point;
use firefront::levelset::{AdvectionMode, GacConfig, GacParams, SdfShape, SeedRegion, GAC_EDGE_THRESHOLD};
use firefront::phantom::{PhantomKind, PhantomSpec, SeedHint};
use firefront::{Error, ForceFieldParams, Result, SnakeContour, SnakeParams, TransferKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSection,
    pub edge: EdgeSection,
    pub force: ForceSection,
    pub snake: SnakeSection,
    pub burn: BurnSection,
    pub gac: GacSection,
    pub seed: SeedSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// Image file; when set, the phantom fields are ignored.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub phantom: String,
    pub size: usize,
    pub noise: f64,
    pub noise_seed: u64,
    pub inverse: bool,
    pub gap_degrees: f64,
    pub gap_direction: f64,
    pub blob_count: usize,
}

impl Default for InputSection {
    fn default() -> Self {
        let p = PhantomSpec::new(PhantomKind::TwoCircle);
        Self {
            image: None,
            phantom: p.kind.name().to_string(),
            size: p.size,
            noise: p.noise,
            noise_seed: p.seed,
            inverse: p.inverse,
            gap_degrees: p.gap_degrees,
            gap_direction: p.gap_direction,
            blob_count: p.blob_count,
        }
    }
}

impl InputSection {
    pub fn phantom_spec(&self) -> Result<PhantomSpec> {
        let kind: PhantomKind = self.phantom.parse()?;
        let mut s = PhantomSpec::new(kind);
        let scale = self.size as f64 / s.size as f64;
        if scale != 1.0 {
            // keep the canonical layout, scaled to the requested size
            let sp = |p: Point| p * scale;
            s.container_center = sp(s.container_center);
            s.container_radius *= scale;
            s.inner_center = sp(s.inner_center);
            s.inner_radius *= scale;
            s.tube_width *= scale;
            for d in &mut s.disks {
                *d = (sp(d.0), d.1 * scale);
            }
        }
        s.size = self.size;
        s.noise = self.noise;
        s.seed = self.noise_seed;
        s.inverse = self.inverse;
        s.gap_degrees = self.gap_degrees;
        s.gap_direction = self.gap_direction;
        s.blob_count = self.blob_count;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeSection {
    pub smoothing_sigma: f64,
    /// Unset means the default of the pipeline being run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Default for EdgeSection {
    fn default() -> Self {
        Self {
            smoothing_sigma: EdgeParams::default().smoothing_sigma,
            threshold: None,
        }
    }
}

impl EdgeSection {
    pub fn params(&self, default_threshold: f64) -> Result<EdgeParams> {
        let threshold = self.threshold.unwrap_or(default_threshold);
        if !(self.smoothing_sigma >= 0.0) || !self.smoothing_sigma.is_finite() {
            return Err(bad("smoothing_sigma", "must be >= 0"));
        }
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(bad("threshold", "must be >= 0"));
        }
        Ok(EdgeParams {
            smoothing_sigma: self.smoothing_sigma,
            threshold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceSection {
    pub kind: String,
    pub h: f64,
    pub k: f64,
    pub p: f64,
    pub r_max: f64,
}

impl Default for ForceSection {
    fn default() -> Self {
        let f = ForceFieldParams::default();
        Self {
            kind: f.kind.name().to_string(),
            h: f.h,
            k: f.k,
            p: f.p,
            r_max: f.r_max,
        }
    }
}

impl ForceSection {
    pub fn params(&self) -> Result<ForceFieldParams> {
        let kind: TransferKind = self.kind.parse()?;
        let p = ForceFieldParams {
            h: self.h,
            k: self.k,
            p: self.p,
            kind,
            r_max: self.r_max,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnakeSection {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub dt: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub conv_eps: f64,
    pub conv_window: usize,
}

impl Default for SnakeSection {
    fn default() -> Self {
        let s = SnakeParams::default();
        Self {
            alpha: s.alpha,
            gamma: s.gamma,
            lambda: s.lambda,
            dt: s.dt,
            d_min: s.d_min,
            d_max: s.d_max,
            conv_eps: s.conv_eps,
            conv_window: s.conv_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurnSection {
    pub normalize_force: bool,
    pub gap: f64,
    pub max_steps: usize,
    pub stall_window: usize,
    /// 0 derives the count from gap, dt and lambda.
    pub extra_steps: usize,
    pub release_rounds: usize,
    pub refine_lambda: f64,
    pub refine_max_steps: usize,
    pub min_child_area: f64,
}

impl Default for BurnSection {
    fn default() -> Self {
        let m = MultiSegConfig::default();
        Self {
            normalize_force: m.normalize_force,
            gap: m.gap,
            max_steps: m.max_steps,
            stall_window: m.stall_window,
            extra_steps: m.extra_steps.unwrap_or(0),
            release_rounds: m.release_rounds,
            refine_lambda: m.refine_lambda,
            refine_max_steps: m.refine_max_steps,
            min_child_area: m.min_child_area,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GacSection {
    pub lambda: f64,
    pub eps: f64,
    pub gamma: f64,
    pub m: f64,
    pub kl_gain: f64,
    pub dt: f64,
    pub band_radius: f64,
    pub reinit_every: usize,
    pub conv_eps: f64,
    pub conv_window: usize,
    pub attract: bool,
    /// `unit_normalized` or `raw`.
    pub advection: String,
    /// `r`, `k_times_r` or `r_squared`.
    pub sdf_shape: String,
    pub sdf_k: f64,
    pub max_steps: usize,
    pub min_contour_area: f64,
}

impl Default for GacSection {
    fn default() -> Self {
        let g = GacParams::default();
        Self {
            lambda: g.lambda,
            eps: g.eps,
            gamma: g.gamma,
            m: g.m,
            kl_gain: g.kl_gain,
            dt: g.dt,
            band_radius: g.band_radius,
            reinit_every: g.reinit_every,
            conv_eps: g.conv_eps,
            conv_window: g.conv_window,
            attract: g.attract,
            advection: "unit_normalized".into(),
            sdf_shape: "r".into(),
            sdf_k: 1.0,
            max_steps: g.max_steps,
            min_contour_area: g.min_contour_area,
        }
    }
}

impl GacSection {
    pub fn params(&self) -> Result<GacParams> {
        let advection = match self.advection.as_str() {
            "unit_normalized" => AdvectionMode::UnitNormalized,
            "raw" => AdvectionMode::Raw,
            o => return Err(bad("advection", format!("unknown mode `{o}`"))),
        };
        let sdf_shape = match self.sdf_shape.as_str() {
            "r" => SdfShape::R,
            "k_times_r" => SdfShape::KTimesR(self.sdf_k),
            "r_squared" => SdfShape::RSquared,
            o => return Err(bad("sdf_shape", format!("unknown shape `{o}`"))),
        };
        let p = GacParams {
            lambda: self.lambda,
            eps: self.eps,
            gamma: self.gamma,
            m: self.m,
            kl_gain: self.kl_gain,
            dt: self.dt,
            band_radius: self.band_radius,
            reinit_every: self.reinit_every,
            conv_eps: self.conv_eps,
            conv_window: self.conv_window,
            attract: self.attract,
            advection,
            sdf_shape,
            max_steps: self.max_steps,
            min_contour_area: self.min_contour_area,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Initial contour. `auto` takes the phantom's suggestion: a circle for the
/// snake, and for the level set the crossing rectangle when the scene has
/// one (then shrinking with the attract stage) or the circle otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    /// `auto`, `disk`, `rect` or `polygon`.
    pub shape: String,
    pub center: [f64; 2],
    pub radius: f64,
    pub rect: [f64; 4],
    pub vertices: Vec<[f64; 2]>,
    /// Vertex count of a circular snake seed.
    pub snake_vertices: usize,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self {
            shape: "auto".into(),
            center: [0.0, 0.0],
            radius: 0.0,
            rect: [0.0; 4],
            vertices: Vec::new(),
            snake_vertices: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Write an overlay frame every this many steps; 0 writes only the
    /// per-stage frames.
    pub overlay_every: usize,
    /// `png` or `pgm` (overlays then use `ppm`).
    pub format: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            overlay_every: 0,
            format: "png".into(),
        }
    }
}

impl OutputSection {
    pub fn validate(&self) -> Result<()> {
        match self.format.as_str() {
            "png" | "pgm" => Ok(()),
            o => Err(bad("format", format!("unknown output format `{o}`"))),
        }
    }

    pub fn gray_ext(&self) -> &'static str {
        if self.format == "pgm" {
            "pgm"
        } else {
            "png"
        }
    }

    pub fn color_ext(&self) -> &'static str {
        if self.format == "pgm" {
            "ppm"
        } else {
            "png"
        }
    }
}

fn bad(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn pt(a: [f64; 2]) -> Point {
    Point::new(a[0], a[1])
}

impl RunConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn multi_seg(&self) -> Result<MultiSegConfig> {
        let s = &self.snake;
        let b = &self.burn;
        let cfg = MultiSegConfig {
            edge: self.edge.params(EdgeParams::default().threshold)?,
            force: self.force.params()?,
            normalize_force: b.normalize_force,
            snake: SnakeParams {
                alpha: s.alpha,
                gamma: s.gamma,
                lambda: s.lambda,
                dt: s.dt,
                d_min: s.d_min,
                d_max: s.d_max,
                conv_eps: s.conv_eps,
                conv_window: s.conv_window,
            },
            gap: b.gap,
            max_steps: b.max_steps,
            stall_window: b.stall_window,
            extra_steps: (b.extra_steps > 0).then_some(b.extra_steps),
            release_rounds: b.release_rounds,
            refine_lambda: b.refine_lambda,
            refine_max_steps: b.refine_max_steps,
            min_child_area: b.min_child_area,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gac(&self) -> Result<GacConfig> {
        Ok(GacConfig {
            edge: self.edge.params(GAC_EDGE_THRESHOLD)?,
            force: self.force.params()?,
            gac: self.gac.params()?,
        })
    }

    /// Replaces `auto` seeds by the concrete shape derived from `hint`
    /// (GAC rectangles also switch on the attract stage and a shrinking
    /// front), so the echoed configuration reproduces the run.
    pub fn resolve_seed(&mut self, hint: Option<&SeedHint>, gac: bool) -> Result<()> {
        if self.seed.shape != "auto" {
            return Ok(());
        }
        let h = hint.ok_or_else(|| bad("seed", "`auto` needs a phantom input"))?;
        match (gac, h.rect) {
            (true, Some((x0, y0, x1, y1))) => {
                self.seed.shape = "rect".into();
                self.seed.rect = [x0, y0, x1, y1];
                self.gac.attract = true;
                self.gac.lambda = -self.gac.lambda.abs();
            }
            _ => {
                self.seed.shape = "disk".into();
                self.seed.center = [h.center.x, h.center.y];
                self.seed.radius = h.radius;
            }
        }
        Ok(())
    }

    pub fn seed_region(&self) -> Result<SeedRegion> {
        let s = &self.seed;
        let r = match s.shape.as_str() {
            "disk" => SeedRegion::Disk {
                center: pt(s.center),
                radius: s.radius,
            },
            "rect" => SeedRegion::Rect {
                x0: s.rect[0],
                y0: s.rect[1],
                x1: s.rect[2],
                y1: s.rect[3],
            },
            "polygon" => SeedRegion::Polygon(s.vertices.iter().copied().map(pt).collect()),
            o => return Err(bad("seed", format!("unknown seed shape `{o}`"))),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn seed_contour(&self) -> Result<SnakeContour> {
        let s = &self.seed;
        match s.shape.as_str() {
            "disk" => {
                if !(s.radius > 0.0) {
                    return Err(bad("seed", "disk radius must be positive"));
                }
                if s.snake_vertices < 4 {
                    return Err(bad("snake_vertices", "must be >= 4"));
                }
                SnakeContour::circle(pt(s.center), s.radius, s.snake_vertices)
            }
            "polygon" => SnakeContour::new(s.vertices.iter().copied().map(pt).collect()),
            "rect" => SnakeContour::new(vec![
                Point::new(s.rect[0], s.rect[1]),
                Point::new(s.rect[2], s.rect[1]),
                Point::new(s.rect[2], s.rect[3]),
                Point::new(s.rect[0], s.rect[3]),
            ]),
            o => Err(bad("seed", format!("unknown seed shape `{o}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.multi_seg().is_ok());
        assert!(c.gac().is_ok());
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.force.h = 1.5;
        c.seed.vertices = vec![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[force]\nhh = 1.0\n").is_err());
    }

    #[test]
    fn out_of_range_h_fails_validation() {
        let c = RunConfig::parse("[force]\nh = 3.0\n").unwrap();
        assert!(c.multi_seg().is_err());
        assert!(c.gac().is_err());
    }
}
