//! End-to-end orchestration: classify → refine boundary → stack → interpolate →
//! coverage and area series, plus writing the artifacts of each stage.
//!
//! Scenes are processed in parallel on the current rayon pool; results are
//! collected in manifest (date) order, so outputs never depend on scheduling.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::analytics::area_series;
use crate::classify::{classify_scene, cloud_fraction, slope_from_dem};
use crate::config::{ClassifyConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::io::{self, SceneManifest};
use crate::raster::{AreaRecord, ClassMap, Grid, Mask, ReflectanceScene};
use crate::synth::Generated;
use crate::timeseries::{build_stack, coverage_rate, interpolate, ClassStack};
use crate::unmix::{refine_boundary, Refinement};

/// A scene left out because too much of the region of interest was cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedScene {
    pub scene_id: String,
    pub date: NaiveDate,
    pub cloud_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyRun {
    /// Class maps of the retained scenes, in date order.
    pub maps: Vec<ClassMap>,
    pub skipped: Vec<SkippedScene>,
}

/// Every artifact of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub classified: Vec<ClassMap>,
    pub refined: Vec<Refinement>,
    /// Gap-filled copies of the refined maps; the per-scene maps stay untouched.
    pub interpolated: ClassStack,
    pub coverage: Grid,
    pub areas: Vec<AreaRecord>,
    pub skipped: Vec<SkippedScene>,
}

enum Outcome<T> {
    Kept(T),
    Skipped(SkippedScene),
}

fn classify_one(
    scene: &ReflectanceScene,
    slope: &Grid,
    roi: &Mask,
    cfg: &ClassifyConfig,
) -> Result<Outcome<ClassMap>> {
    let map = classify_scene(scene, slope, cfg)?;
    let fraction = cloud_fraction(&map, roi)?;
    if fraction > cfg.cloud_skip_fraction {
        log::info!(
            "skipping scene {}: cloud fraction {:.3} exceeds {:.3}",
            scene.id(),
            fraction,
            cfg.cloud_skip_fraction
        );
        return Ok(Outcome::Skipped(SkippedScene {
            scene_id: scene.id().to_string(),
            date: scene.date(),
            cloud_fraction: fraction,
        }));
    }
    Ok(Outcome::Kept(map))
}

/// Reads the scene of a manifest entry and checks it against the entry.
pub fn load_entry_scene(entry: &io::ManifestEntry) -> Result<ReflectanceScene> {
    let scene = io::read_scene(&entry.path)?;
    let data = io::scene_data_path(&entry.path);
    if scene.id() != entry.scene_id {
        return Err(Error::format(
            data,
            format!("scene id '{}' differs from manifest '{}'", scene.id(), entry.scene_id),
        ));
    }
    if scene.date() != entry.date || scene.sensor() != entry.sensor {
        return Err(Error::format(data, "date or sensor differs from the manifest"));
    }
    Ok(scene)
}

/// The region of interest, or the whole footprint when none is given.
fn roi_or_full(roi: Option<&Mask>, dem: &Grid) -> Result<Mask> {
    match roi {
        Some(m) => {
            dem.shape().ensure_eq(m.shape())?;
            Ok(m.clone())
        }
        None => Ok(Mask::full(dem.width(), dem.height())),
    }
}

fn partition<T>(outcomes: Vec<Outcome<T>>) -> (Vec<T>, Vec<SkippedScene>) {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Kept(t) => kept.push(t),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    (kept, skipped)
}

fn classify_with<F>(
    n: usize,
    load: F,
    dem: &Grid,
    roi: Option<&Mask>,
    cfg: &ClassifyConfig,
) -> Result<ClassifyRun>
where
    F: Fn(usize) -> Result<ReflectanceScene> + Sync,
{
    cfg.validate()?;
    let slope = slope_from_dem(dem);
    let roi = roi_or_full(roi, dem)?;
    let outcomes = (0..n)
        .into_par_iter()
        .map(|i| {
            let scene = load(i)?;
            classify_one(&scene, &slope, &roi, cfg).map_err(|e| e.in_scene(scene.id()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (maps, skipped) = partition(outcomes);
    Ok(ClassifyRun { maps, skipped })
}

/// Classifies every manifest scene, skipping overly cloudy ones.
pub fn classify_manifest(
    manifest: &SceneManifest,
    dem: &Grid,
    roi: Option<&Mask>,
    cfg: &ClassifyConfig,
) -> Result<ClassifyRun> {
    classify_with(
        manifest.entries.len(),
        |i| load_entry_scene(&manifest.entries[i]),
        dem,
        roi,
        cfg,
    )
}

/// Classifies in-memory scenes (sorted by date on output).
pub fn classify_scenes(
    scenes: &[ReflectanceScene],
    dem: &Grid,
    roi: Option<&Mask>,
    cfg: &ClassifyConfig,
) -> Result<ClassifyRun> {
    let mut run = classify_with(scenes.len(), |i| Ok(scenes[i].clone()), dem, roi, cfg)?;
    run.maps.sort_by_key(|m| m.date);
    run.skipped.sort_by_key(|s| s.date);
    Ok(run)
}

fn pipeline_with<F>(
    n: usize,
    load: F,
    dem: &Grid,
    roi: Option<&Mask>,
    cfg: &PipelineConfig,
) -> Result<PipelineRun>
where
    F: Fn(usize) -> Result<ReflectanceScene> + Sync,
{
    cfg.classify.validate()?;
    cfg.unmix.validate()?;
    let slope = slope_from_dem(dem);
    let roi = roi_or_full(roi, dem)?;
    let outcomes = (0..n)
        .into_par_iter()
        .map(|i| {
            let scene = load(i)?;
            let run = || -> Result<Outcome<(ClassMap, Refinement)>> {
                Ok(match classify_one(&scene, &slope, &roi, &cfg.classify)? {
                    Outcome::Kept(map) => {
                        let refined = refine_boundary(&scene, &map, &cfg.unmix)?;
                        Outcome::Kept((map, refined))
                    }
                    Outcome::Skipped(s) => Outcome::Skipped(s),
                })
            };
            run().map_err(|e| e.in_scene(scene.id()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut kept, mut skipped) = partition(outcomes);
    if kept.is_empty() {
        return Err(Error::NoUsableScenes);
    }
    kept.sort_by_key(|(m, _)| m.date);
    skipped.sort_by_key(|s| s.date);
    let (classified, refined): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
    let stack = build_stack(refined.iter().map(|r| r.map.clone()).collect())?;
    let interpolated = interpolate(&stack);
    let coverage = coverage_rate(&interpolated)?;
    let areas = area_series(&interpolated, &roi)?;
    Ok(PipelineRun {
        classified,
        refined,
        interpolated,
        coverage,
        areas,
        skipped,
    })
}

/// Runs every stage over a manifest. Scenes are loaded lazily, one per task.
pub fn run_pipeline(
    manifest: &SceneManifest,
    dem: &Grid,
    roi: Option<&Mask>,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    pipeline_with(
        manifest.entries.len(),
        |i| load_entry_scene(&manifest.entries[i]),
        dem,
        roi,
        cfg,
    )
}

/// Runs every stage over in-memory scenes.
pub fn run_pipeline_scenes(
    scenes: &[ReflectanceScene],
    dem: &Grid,
    roi: Option<&Mask>,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    pipeline_with(scenes.len(), |i| Ok(scenes[i].clone()), dem, roi, cfg)
}

/// `<dir>/<scene_id>.class`
pub fn classmap_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}.class"))
}

/// CSV listing skipped scenes with the reason.
pub fn write_skip_report(path: &Path, skipped: &[SkippedScene], threshold: f64) -> Result<()> {
    let mut out = String::from("scene_id,date,cloud_fraction,reason\n");
    for s in skipped {
        out.push_str(&format!(
            "{},{},{:.6},cloud fraction {:.3} exceeds {:.3}\n",
            s.scene_id,
            s.date.format("%Y-%m-%d"),
            s.cloud_fraction,
            s.cloud_fraction,
            threshold
        ));
    }
    io::write_atomic(path, out.as_bytes())
}

/// Name of the skip report inside an output directory.
pub const SKIP_REPORT: &str = "skipped.csv";

/// Writes `{scene_id}.class` per retained scene plus the skip report.
pub fn write_classify_run(outdir: &Path, run: &ClassifyRun, cfg: &ClassifyConfig) -> Result<()> {
    for m in &run.maps {
        io::write_classmap(&classmap_path(outdir, &m.scene_id), m)?;
    }
    write_skip_report(&outdir.join(SKIP_REPORT), &run.skipped, cfg.cloud_skip_fraction)
}

/// Output layout:
///
/// ```text
/// classified/{scene_id}.class          per-scene classification
/// refined/{scene_id}.class             after boundary refinement
/// refined/{scene_id}.abundance.f32     water abundance of mixed pixels
/// interpolated/{scene_id}.class        gap-filled maps
/// coverage.f32                         water coverage rate
/// areas.csv                            area and division index per date
/// skipped.csv                          scenes left out and why
/// ```
pub fn write_pipeline_run(outdir: &Path, run: &PipelineRun, cfg: &PipelineConfig) -> Result<()> {
    let classified = outdir.join("classified");
    let refined = outdir.join("refined");
    let interpolated = outdir.join("interpolated");
    for m in &run.classified {
        io::write_classmap(&classmap_path(&classified, &m.scene_id), m)?;
    }
    for r in &run.refined {
        io::write_classmap(&classmap_path(&refined, &r.map.scene_id), &r.map)?;
        io::write_grid(
            &refined.join(format!("{}.abundance.f32", r.map.scene_id)),
            &r.abundance,
            "water_abundance",
        )?;
    }
    for m in run.interpolated.maps() {
        io::write_classmap(&classmap_path(&interpolated, &m.scene_id), m)?;
    }
    io::write_grid(&outdir.join("coverage.f32"), &run.coverage, "coverage")?;
    io::write_area_csv(&outdir.join("areas.csv"), &run.areas)?;
    write_skip_report(
        &outdir.join(SKIP_REPORT),
        &run.skipped,
        cfg.classify.cloud_skip_fraction,
    )
}

/// Writes a generated archive: `scenes/{id}` (+ sidecar), `truth/{id}.truth.class`,
/// `truth/{id}.surface.class`, `truth/{id}.water_fraction.f32`, `dem.f32` and
/// `manifest.csv` (paths relative to `outdir`). The DEM is the first scene's.
pub fn write_archive(outdir: &Path, archive: &[Generated]) -> Result<SceneManifest> {
    let first = archive.first().ok_or(Error::EmptyInput)?;
    let mut entries = Vec::with_capacity(archive.len());
    for g in archive {
        let id = g.scene.id();
        let rel = Path::new("scenes").join(id);
        io::write_scene(&outdir.join(&rel), &g.scene)?;
        let truth = outdir.join("truth");
        io::write_classmap(&truth.join(format!("{id}.truth.class")), &g.truth)?;
        io::write_classmap(&truth.join(format!("{id}.surface.class")), &g.surface)?;
        io::write_grid(
            &truth.join(format!("{id}.water_fraction.f32")),
            &g.water_fraction,
            "water_fraction",
        )?;
        entries.push(io::ManifestEntry {
            scene_id: id.to_string(),
            date: g.scene.date(),
            sensor: g.scene.sensor(),
            path: rel,
        });
    }
    io::write_grid(&outdir.join("dem.f32"), &first.dem, "elevation")?;
    let manifest = SceneManifest::new(entries)?;
    io::write_manifest(&outdir.join("manifest.csv"), &manifest)?;
    Ok(manifest)
}
