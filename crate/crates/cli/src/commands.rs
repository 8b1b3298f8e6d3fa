use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use roadforge::cloud::{classify_outliers, load_cloud, remove_outliers, save_cloud, CloudFormat, Point, PointCloud};
use roadforge::glyph::{degrade_batch, glyph_seed, read_glyph, write_glyph, Preset};
use roadforge::groundfilter::filter_ground;
use roadforge::pose::{refine_pose, rotation_error, translation_error, IterationRecord, Pose, SyntheticScene};
use roadforge::raster::{intensity_image, read_pgm, split_tiles, write_pgm, write_tiles, GrayImage, PgmFormat, ThresholdMethod};
use roadforge::tin::{rasterize_dem, Tin, Vertex};

use crate::labels::{read_labels, write_labels, Label};
use crate::{report, Config, Failure, EXIT_DEGENERATE};

pub struct Context {
    pub config: Config,
    pub report: Option<PathBuf>,
}

impl Context {
    fn report_path(&self, out: &Path, is_dir: bool) -> PathBuf {
        self.report.clone().unwrap_or_else(|| report::default_path(out, is_dir))
    }
}

fn load(path: &Path) -> Result<PointCloud, Failure> {
    let cloud = load_cloud(path, CloudFormat::AsciiXyzi)?;
    log::info!("loaded {} points from {}", cloud.len(), path.display());
    Ok(cloud)
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

pub fn clean(ctx: &Context, input: &Path, out: &Path) -> Result<PathBuf, Failure> {
    let cloud = load(input)?;
    let p = &ctx.config.outliers;
    let (inliers, outliers) = remove_outliers(&cloud, p.radius, p.k_min)?;
    save_cloud(&inliers, out)?;
    log::info!("kept {} points, removed {} outliers", inliers.len(), outliers.len());
    report::write(
        &ctx.report_path(out, false),
        "clean",
        &ctx.config,
        json!({ "cloud": show(input) }),
        json!({ "cloud": show(out) }),
        json!({ "points": cloud.len(), "inliers": inliers.len(), "outliers": outliers.len() }),
    )
}

pub fn ground(ctx: &Context, input: &Path, out: &Path) -> Result<PathBuf, Failure> {
    let cloud = load(input)?;
    let p = &ctx.config.outliers;
    let is_outlier = classify_outliers(&cloud, p.radius, p.k_min)?;
    let kept: Vec<usize> = (0..cloud.len()).filter(|&i| !is_outlier[i]).collect();
    let result = filter_ground(&cloud.select(&kept), &ctx.config.filter)?;

    let mut labels = vec![Label::Outlier; cloud.len()];
    for &j in &result.nonground {
        labels[kept[j]] = Label::Nonground;
    }
    for &j in &result.ground {
        labels[kept[j]] = Label::Ground;
    }
    write_labels(out, &labels)?;
    log::info!(
        "{} ground, {} non-ground, {} outliers",
        result.ground.len(),
        result.nonground.len(),
        cloud.len() - kept.len()
    );
    report::write(
        &ctx.report_path(out, false),
        "ground",
        &ctx.config,
        json!({ "cloud": show(input) }),
        json!({ "labels": show(out) }),
        json!({
            "points": cloud.len(),
            "outliers": cloud.len() - kept.len(),
            "ground": result.ground.len(),
            "nonground": result.nonground.len(),
            "levels": result.levels,
            "final_pass": result.final_pass,
            "virtual_seeds": result.virtual_seeds,
        }),
    )
}

fn ground_points(cloud: &PointCloud, labels: &[Label]) -> Vec<(usize, Point)> {
    cloud
        .iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (_, &l))| l == Label::Ground)
        .map(|(i, (p, _))| (i, *p))
        .collect()
}

pub fn dem(ctx: &Context, input: &Path, labels_path: &Path, out: &Path) -> Result<PathBuf, Failure> {
    let cloud = load(input)?;
    let labels = read_labels(labels_path, cloud.len())?;
    let ground = ground_points(&cloud, &labels);

    // The triangulation takes one vertex per XY position; the first wins.
    let mut seen = HashSet::new();
    let vertices: Vec<Vertex> = ground
        .iter()
        .filter(|(_, p)| seen.insert((p.x.to_bits(), p.y.to_bits())))
        .map(|(i, p)| Vertex::from_point(p, *i))
        .collect();
    let duplicates = ground.len() - vertices.len();
    if duplicates > 0 {
        log::warn!("dropped {duplicates} ground points sharing XY with an earlier one");
    }
    let tin = Tin::delaunay(vertices)?;
    let grid = rasterize_dem(&tin, ctx.config.dem.cell)?;
    grid.write_esri_ascii(out)?;
    report::write(
        &ctx.report_path(out, false),
        "dem",
        &ctx.config,
        json!({ "cloud": show(input), "labels": show(labels_path) }),
        json!({ "grid": show(out) }),
        json!({
            "ground_points": ground.len(),
            "duplicate_xy": duplicates,
            "triangles": tin.num_triangles(),
            "rows": grid.n_rows,
            "cols": grid.n_cols,
            "valid_cells": grid.valid_cells(),
        }),
    )
}

pub fn intensity(ctx: &Context, input: &Path, labels_path: &Path, out: &Path, ascii: bool) -> Result<PathBuf, Failure> {
    let cloud = load(input)?;
    let labels = read_labels(labels_path, cloud.len())?;
    let points: Vec<Point> = ground_points(&cloud, &labels).into_iter().map(|(_, p)| p).collect();

    let params = &ctx.config.raster;
    let mut fallback = false;
    let (image, kept) = match intensity_image(&points, params) {
        Err(roadforge::Error::Degenerate(why)) if params.threshold_method == ThresholdMethod::Otsu => {
            log::warn!("{why}; keeping every ground point");
            fallback = true;
            let all = roadforge::raster::RasterParams { threshold_method: ThresholdMethod::Percentile(0.0), ..params.clone() };
            intensity_image(&points, &all)?
        }
        other => other?,
    };
    let (lo, hi) = image.range();
    let gray = GrayImage::from_intensity(&image, lo, hi);
    write_pgm(out, &gray, if ascii { PgmFormat::Ascii } else { PgmFormat::Binary })?;
    report::write(
        &ctx.report_path(out, false),
        "intensity",
        &ctx.config,
        json!({ "cloud": show(input), "labels": show(labels_path) }),
        json!({ "image": show(out) }),
        json!({
            "ground_points": points.len(),
            "retained": kept.retained.len(),
            "threshold": kept.threshold,
            "threshold_fallback": fallback,
            "width": image.width,
            "height": image.height,
            "value_range": [lo, hi],
        }),
    )
}

pub fn tiles(ctx: &Context, input: &Path, out: &Path) -> Result<PathBuf, Failure> {
    let image = read_pgm(input)?.to_intensity();
    let set = split_tiles(&image, &ctx.config.raster)?;
    std::fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let manifest = write_tiles(&set, out)?;
    log::info!("kept {} of {} tiles", manifest.kept.len(), set.total());
    report::write(
        &ctx.report_path(out, true),
        "tiles",
        &ctx.config,
        json!({ "image": show(input) }),
        json!({ "dir": show(out), "manifest": show(&out.join("manifest.json")) }),
        json!({
            "tile_rows": set.tile_rows,
            "tile_cols": set.tile_cols,
            "kept": manifest.kept.len(),
            "dropped": manifest.dropped.len(),
        }),
    )
}

fn parse_presets(names: &[String]) -> Result<Vec<Preset>, Failure> {
    let mut presets = Vec::new();
    for name in names {
        let chosen = if name == "all" {
            Preset::ALL.to_vec()
        } else {
            vec![name.parse::<Preset>().map_err(|e| Failure::new(crate::EXIT_USAGE, e.to_string()))?]
        };
        for p in chosen {
            if !presets.contains(&p) {
                presets.push(p);
            }
        }
    }
    Ok(presets)
}

pub fn glyph(ctx: &Context, input: &Path, out: &Path, preset_names: &[String]) -> Result<PathBuf, Failure> {
    let presets = parse_presets(preset_names)?;
    let entries = std::fs::read_dir(input).map_err(|e| Failure::io(input, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::new(EXIT_DEGENERATE, format!("{}: no .pgm glyphs found", input.display())));
    }
    let glyphs = files.iter().map(read_glyph).collect::<roadforge::Result<Vec<_>>>()?;
    std::fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;

    let base = &ctx.config.glyph;
    let mut manifest = Vec::new();
    for &preset in &presets {
        let degraded = degrade_batch(&glyphs, &preset.apply(base))?;
        for (i, (src, img)) in files.iter().zip(&degraded).enumerate() {
            let stem = src.file_stem().unwrap_or_default().to_string_lossy();
            let name = format!("{stem}_{}.pgm", preset.name());
            write_glyph(out.join(&name), img)?;
            manifest.push(json!({
                "input": src.file_name().unwrap_or_default().to_string_lossy(),
                "preset": preset.name(),
                "seed": glyph_seed(base.rng_seed, i),
                "output": name,
            }));
        }
    }
    let manifest_path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&json!({ "glyphs": manifest })).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(|e| Failure::io(&manifest_path, e))?;
    log::info!("degraded {} glyphs with {} presets", files.len(), presets.len());
    report::write(
        &ctx.report_path(out, true),
        "glyph",
        &ctx.config,
        json!({ "dir": show(input) }),
        json!({ "dir": show(out), "manifest": show(&manifest_path) }),
        json!({
            "glyphs": files.len(),
            "presets": presets.iter().map(|p| p.name()).collect::<Vec<_>>(),
            "written": manifest.len(),
        }),
    )
}

fn print_table(trace: &[IterationRecord]) {
    println!(
        "{:>4} {:>7} {:>7} {:>4} {:>10} {:>11} {:>10} {:>10}",
        "iter", "matches", "inliers", "H", "rmse_px", "rel_change", "rot_deg", "trans_m"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
    for r in trace {
        println!(
            "{:>4} {:>7} {:>7} {:>4} {:>10.4} {:>11.3e} {:>10} {:>10}",
            r.iteration,
            r.matches,
            r.inliers,
            if r.via_homography { "yes" } else { "no" },
            r.rmse_px,
            r.rel_change,
            opt(r.rotation_error_deg),
            opt(r.translation_error_m),
        );
    }
}

pub fn pose_sim(ctx: &Context, out: &Path, scene_out: Option<&Path>) -> Result<PathBuf, Failure> {
    let cfg = &ctx.config;
    let scene = SyntheticScene::generate(&cfg.scene)?;
    if let Some(path) = scene_out {
        let text = serde_json::to_string_pretty(&scene).expect("scene serializes");
        std::fs::write(path, text + "\n").map_err(|e| Failure::io(path, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.pose_sim.offset_seed);
    let initial = scene.perturbed_pose(cfg.pose_sim.angle_deg.to_radians(), cfg.pose_sim.distance_m, &mut rng)?;

    let (outcome, trace, pose, converged) = match refine_pose(&scene, &initial, &cfg.refine) {
        Ok(r) => (None, r.trace, r.pose, r.converged),
        Err(roadforge::Error::Divergence { trace }) => {
            let last = trace.last().map_or(initial, |r| Pose::from_params(&r.pose));
            (Some("diverged"), trace, last, false)
        }
        Err(e) => return Err(e.into()),
    };
    print_table(&trace);

    let rot = rotation_error(&pose, &scene.true_pose).to_degrees();
    let trans = translation_error(&pose, &scene.true_pose);
    let outcome = outcome.unwrap_or(if converged { "converged" } else { "max_iters" });
    let trace_doc = json!({
        "true_pose": scene.true_pose,
        "initial_pose": initial,
        "final_pose": pose,
        "outcome": outcome,
        "rotation_error_deg": rot,
        "translation_error_m": trans,
        "iterations": trace,
    });
    let text = serde_json::to_string_pretty(&trace_doc).expect("trace serializes");
    std::fs::write(out, text + "\n").map_err(|e| Failure::io(out, e))?;
    println!("{outcome} after {} iterations: rotation error {rot:.6} deg, translation error {trans:.6} m", trace.len());

    let mut outputs = json!({ "trace": show(out) });
    if let Some(path) = scene_out {
        outputs["scene"] = json!(show(path));
    }
    let report_path = report::write(
        &ctx.report_path(out, false),
        "pose-sim",
        cfg,
        json!({}),
        outputs,
        json!({
            "outcome": outcome,
            "iterations": trace.len(),
            "initial_rotation_error_deg": rotation_error(&initial, &scene.true_pose).to_degrees(),
            "initial_translation_error_m": translation_error(&initial, &scene.true_pose),
            "rotation_error_deg": rot,
            "translation_error_m": trans,
        }),
    )?;
    if outcome == "diverged" {
        let mut f = Failure::new(EXIT_DEGENERATE, format!("pose refinement diverged after {} iterations", trace.len()));
        f.report_path = Some(report_path);
        return Err(f);
    }
    Ok(report_path)
}
