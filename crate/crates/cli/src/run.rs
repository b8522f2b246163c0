use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use firefront::burn::{segment_multi_observed, Snapshot, Stage};
use firefront::force::{build_fields, EdgeParams, VectorField};
use firefront::image::{load_image, normalized_for_display, save_image, save_mask};
use firefront::io::{contour_csv, grid_csv, snake_csv, write_text};
use firefront::levelset::{segment_gac_observed, GacSnapshot, GacStage};
use firefront::overlay::{render_overlay, save_overlay, Layer, BURN, CHILD, FRONT, INIT, SNAKE};
use firefront::phantom::{generate_phantom, SeedHint};
use firefront::{Error, GrayImage, Mask, Point, Result};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    ForceField,
    SnakeMulti,
    Gac,
    Phantom,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::ForceField => "force-field",
            Pipeline::SnakeMulti => "snake-multi",
            Pipeline::Gac => "gac",
            Pipeline::Phantom => "phantom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    kind: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    pipeline: &'a str,
    status: &'a str,
    files: &'a [FileEntry],
    log: &'a toml::Table,
    config: &'a RunConfig,
}

/// Output directory that records every file it writes.
struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn add(&mut self, name: &str, kind: &str) -> PathBuf {
        self.files.push(FileEntry {
            path: name.to_string(),
            kind: kind.to_string(),
        });
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, kind: &str, text: &str) -> Result<()> {
        let p = self.add(name, kind);
        write_text(p, text)
    }
}

struct Input {
    image: GrayImage,
    hint: Option<SeedHint>,
    truth: Vec<Vec<Point>>,
    interior: Option<Mask>,
}

fn load_input(cfg: &RunConfig) -> Result<Input> {
    if let Some(path) = &cfg.input.image {
        return Ok(Input {
            image: load_image(path)?,
            hint: None,
            truth: Vec::new(),
            interior: None,
        });
    }
    let ph = generate_phantom(&cfg.input.phantom_spec()?)?;
    Ok(Input {
        image: ph.image,
        hint: Some(ph.seed),
        truth: ph.truth,
        interior: Some(ph.interior),
    })
}

/// Runs one pipeline and writes its outputs plus `manifest.toml` into
/// `out`. Configuration problems are reported before any file is written.
pub fn run(pipeline: Pipeline, mut cfg: RunConfig, out: &Path) -> Result<Status> {
    cfg.output.validate()?;
    // the echoed configuration carries the threshold actually used
    let threshold = match pipeline {
        Pipeline::SnakeMulti => cfg.multi_seg()?.edge.threshold,
        Pipeline::Gac => cfg.gac()?.edge.threshold,
        Pipeline::ForceField => {
            cfg.force.params()?;
            cfg.edge.params(EdgeParams::default().threshold)?.threshold
        }
        Pipeline::Phantom => EdgeParams::default().threshold,
    };
    if pipeline != Pipeline::Phantom {
        cfg.edge.threshold = Some(threshold);
    }
    if cfg.input.image.is_none() {
        cfg.input.phantom_spec()?;
    }
    let input = load_input(&cfg)?;
    if matches!(pipeline, Pipeline::SnakeMulti | Pipeline::Gac) {
        cfg.resolve_seed(input.hint.as_ref(), pipeline == Pipeline::Gac)?;
        match pipeline {
            Pipeline::Gac => {
                cfg.seed_region()?;
            }
            _ => {
                cfg.seed_contour()?;
            }
        }
    }

    let mut outs = Outputs::new(out)?;
    let mut log = toml::Table::new();
    let status = match pipeline {
        Pipeline::Phantom => run_phantom(&cfg, &input, &mut outs)?,
        Pipeline::ForceField => run_force_field(&cfg, &input, &mut outs, &mut log)?,
        Pipeline::SnakeMulti => run_snake_multi(&cfg, &input, &mut outs, &mut log)?,
        Pipeline::Gac => run_gac(&cfg, &input, &mut outs, &mut log)?,
    };
    let status_name = match status {
        Status::Ok => "converged",
        Status::NotConverged => "not_converged",
    };
    let files = std::mem::take(&mut outs.files);
    let manifest = Manifest {
        pipeline: pipeline.name(),
        status: status_name,
        files: &files,
        log: &log,
        config: &cfg,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    write_text(out.join("manifest.toml"), &text)?;
    info!("{} finished: {status_name}, {} files", pipeline.name(), files.len());
    Ok(status)
}

fn run_phantom(cfg: &RunConfig, input: &Input, outs: &mut Outputs) -> Result<Status> {
    let ext = cfg.output.gray_ext();
    save_image(&input.image, outs.add(&format!("image.{ext}"), "image"))?;
    if let Some(m) = &input.interior {
        save_mask(m, outs.add(&format!("interior.{ext}"), "mask"))?;
    }
    for (i, t) in input.truth.iter().enumerate() {
        outs.text(&format!("truth_{i:02}.csv"), "contour", &contour_csv(t))?;
    }
    Ok(Status::Ok)
}

fn run_force_field(
    cfg: &RunConfig,
    input: &Input,
    outs: &mut Outputs,
    log: &mut toml::Table,
) -> Result<Status> {
    let fields = build_fields(&input.image, &cfg.edge.params(EdgeParams::default().threshold)?, &cfg.force.params()?, false)?;
    let ext = cfg.output.gray_ext();
    let pot = fields.potential.grid();
    outs.text("potential.csv", "grid", &grid_csv(pot))?;
    outs.text("force.csv", "vector_grid", &force_csv(&fields.force))?;
    outs.text("profile.csv", "profile", &profile_csv(pot))?;
    save_image(
        &normalized_for_display(fields.edges.grid()),
        outs.add(&format!("edges.{ext}"), "image"),
    )?;
    save_image(&normalized_for_display(pot), outs.add(&format!("potential.{ext}"), "image"))?;
    save_image(
        &normalized_for_display(&fields.force.magnitude()),
        outs.add(&format!("force_magnitude.{ext}"), "image"),
    )?;
    log.insert("max_force".into(), fields.raw_max_force.into());
    log.insert("max_potential".into(), pot.max().into());
    Ok(Status::Ok)
}

fn force_csv(f: &VectorField) -> String {
    let mut s = String::from("x,y,fx,fy\n");
    for y in 0..f.height() {
        for x in 0..f.width() {
            let v = f.get(x, y);
            let _ = writeln!(s, "{x},{y},{:.6},{:.6}", v.x, v.y);
        }
    }
    s
}

/// Potential along the middle row.
fn profile_csv(pot: &firefront::Grid) -> String {
    let y = pot.height() / 2;
    let mut s = String::from("x,potential\n");
    for x in 0..pot.width() {
        let _ = writeln!(s, "{x},{:.6}", pot.get(x, y));
    }
    s
}

/// Set pixels with an unset 4-neighbour (the image border counts as unset).
fn front_of(mask: &Mask) -> Mask {
    Mask::from_fn(mask.width(), mask.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        mask.get_or_false(x, y)
            && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(dx, dy)| !mask.get_or_false(x + dx, y + dy))
    })
}

fn run_snake_multi(
    cfg: &RunConfig,
    input: &Input,
    outs: &mut Outputs,
    log: &mut toml::Table,
) -> Result<Status> {
    let mcfg = cfg.multi_seg()?;
    let seed = cfg.seed_contour()?;
    let every = cfg.output.overlay_every;
    let cext = cfg.output.color_ext();
    let mut frame = 0usize;
    let mut last_stage = None;
    let mut pending_err: Option<Error> = None;
    let mut observer = |s: &Snapshot| {
        let stage_start = last_stage != Some(s.stage);
        last_stage = Some(s.stage);
        if !(stage_start || (every > 0 && s.step.is_multiple_of(every))) || pending_err.is_some() {
            return;
        }
        let mut layers = vec![
            Layer::Region {
                mask: s.grid.burned().clone(),
                color: BURN,
            },
            Layer::Region {
                mask: front_of(s.grid.burned()),
                color: FRONT,
            },
            Layer::Contour {
                points: seed.vertices().to_vec(),
                color: INIT,
            },
        ];
        let color = if s.stage == Stage::Refine { CHILD } else { SNAKE };
        for c in s.contours {
            layers.push(Layer::Contour {
                points: c.vertices().to_vec(),
                color,
            });
        }
        let stage = match s.stage {
            Stage::Grow => "grow",
            Stage::Release => "release",
            Stage::Refine => "refine",
        };
        let name = format!("overlay_{frame:05}_{stage}_{:05}.{cext}", s.step);
        frame += 1;
        if let Err(e) = render_overlay(&input.image, &layers)
            .and_then(|img| save_overlay(&img, outs.add(&name, "overlay")))
        {
            pending_err = Some(e);
        }
    };
    let result = segment_multi_observed(&input.image, &seed, &mcfg, &mut observer)?;
    if let Some(e) = pending_err {
        return Err(e);
    }
    save_mask(&result.mask, outs.add(&format!("mask.{}", cfg.output.gray_ext()), "mask"))?;
    let mut layers = vec![Layer::Contour {
        points: seed.vertices().to_vec(),
        color: INIT,
    }];
    for (i, c) in result.children.iter().enumerate() {
        outs.text(&format!("child_{i:02}.csv"), "contour", &snake_csv(c))?;
        layers.push(Layer::Contour {
            points: c.vertices().to_vec(),
            color: CHILD,
        });
    }
    save_overlay(
        &render_overlay(&input.image, &layers)?,
        outs.add(&format!("overlay_final.{cext}"), "overlay"),
    )?;

    let l = &result.stage_log;
    log.insert("children".into(), (result.children.len() as i64).into());
    log.insert("stage1_steps".into(), (l.stage1_steps as i64).into());
    log.insert("stage1_converged".into(), l.stage1_converged.into());
    log.insert("stage1_stalled".into(), l.stage1_stalled.into());
    log.insert("release_steps".into(), (l.release_steps as i64).into());
    log.insert("release_complete".into(), l.release_complete.into());
    log.insert("loops_traced".into(), (l.loops_traced as i64).into());
    log.insert("loops_dropped".into(), (l.loops_dropped as i64).into());
    log.insert(
        "refine_steps".into(),
        l.refine_steps.iter().map(|&s| s as i64).collect::<Vec<_>>().into(),
    );
    log.insert("refine_converged".into(), l.refine_converged.clone().into());
    add_truth_scores(log, input, result.children.iter().map(|c| c.vertices()));
    Ok(if result.converged() {
        Status::Ok
    } else {
        Status::NotConverged
    })
}

fn add_truth_scores<'a>(
    log: &mut toml::Table,
    input: &Input,
    contours: impl Iterator<Item = &'a [Point]>,
) {
    if input.truth.is_empty() {
        return;
    }
    let scores: Vec<f64> = contours
        .map(|c| {
            input
                .truth
                .iter()
                .map(|t| firefront::geometry::hausdorff_closed(c, t))
                .fold(f64::INFINITY, f64::min)
        })
        .map(|v| (v * 1e6).round() / 1e6)
        .collect();
    log.insert("hausdorff_to_truth".into(), scores.into());
}

fn run_gac(
    cfg: &RunConfig,
    input: &Input,
    outs: &mut Outputs,
    log: &mut toml::Table,
) -> Result<Status> {
    let gcfg = cfg.gac()?;
    let seed = cfg.seed_region()?;
    let every = cfg.output.overlay_every;
    let cext = cfg.output.color_ext();
    let init = firefront::levelset::init_level_set(
        &seed,
        input.image.width(),
        input.image.height(),
        gcfg.gac.band_radius,
    )?
    .zero_level();
    let mut frame = 0usize;
    let mut pending_err: Option<Error> = None;
    let mut last_stage: Option<GacStage> = None;
    let mut observer = |s: &GacSnapshot| {
        let stage_start = last_stage != Some(s.stage);
        last_stage = Some(s.stage);
        if !(stage_start || (every > 0 && s.step.is_multiple_of(every))) || pending_err.is_some() {
            return;
        }
        let mut layers: Vec<Layer> = init
            .iter()
            .map(|c| Layer::Contour {
                points: c.clone(),
                color: INIT,
            })
            .collect();
        for c in s.grid.zero_level() {
            layers.push(Layer::Contour {
                points: c,
                color: FRONT,
            });
        }
        let name = format!("overlay_{frame:05}_{}_{:05}.{cext}", s.stage.name(), s.step);
        frame += 1;
        if let Err(e) = render_overlay(&input.image, &layers)
            .and_then(|img| save_overlay(&img, outs.add(&name, "overlay")))
        {
            pending_err = Some(e);
        }
    };
    let result = segment_gac_observed(&input.image, &seed, &gcfg, &mut observer)?;
    if let Some(e) = pending_err {
        return Err(e);
    }
    save_mask(&result.mask, outs.add(&format!("mask.{}", cfg.output.gray_ext()), "mask"))?;
    let mut layers: Vec<Layer> = init
        .iter()
        .map(|c| Layer::Contour {
            points: c.clone(),
            color: INIT,
        })
        .collect();
    for (i, c) in result.contours.iter().enumerate() {
        outs.text(&format!("contour_{i:02}.csv"), "contour", &contour_csv(c))?;
        layers.push(Layer::Contour {
            points: c.clone(),
            color: CHILD,
        });
    }
    save_overlay(
        &render_overlay(&input.image, &layers)?,
        outs.add(&format!("overlay_final.{cext}"), "overlay"),
    )?;
    let mut stages = toml::Table::new();
    for s in &result.stages {
        let mut t = toml::Table::new();
        t.insert("steps".into(), (s.steps as i64).into());
        t.insert("converged".into(), s.converged.into());
        t.insert(
            "final_displacement".into(),
            ((s.final_displacement * 1e6).round() / 1e6).into(),
        );
        stages.insert(s.stage.name().into(), t.into());
    }
    log.insert("contours".into(), (result.contours.len() as i64).into());
    log.insert("stages".into(), stages.into());
    add_truth_scores(log, input, result.contours.iter().map(|c| c.as_slice()));
    Ok(if result.converged() {
        Status::Ok
    } else {
        Status::NotConverged
    })
}
