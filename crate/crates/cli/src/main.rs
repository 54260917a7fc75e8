//! `aquamap` — batch surface water mapping from reflectance archives.
//!
//! Every subcommand reads its inputs from files named by long flags, writes its
//! artifacts atomically under `--out`, logs to standard error and prints only
//! results to standard output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use aquamap::analytics::{self, annual_extrema};
use aquamap::io;
use aquamap::pipeline::{self, SKIP_REPORT};
use aquamap::synth::{generate_archive, ArchiveSpec};
use aquamap::timeseries::{build_stack, coverage_rate, interpolate};
use aquamap::unmix::refine_boundary;
use aquamap::{ClassLabel, ClassMap, Grid, Mask, PipelineConfig};

#[derive(Parser)]
#[command(name = "aquamap", version, about = "Long-term surface water mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every manifest scene; overly cloudy scenes are skipped and reported.
    Classify(ClassifyArgs),
    /// Refine water/land boundaries of classified scenes by spectral unmixing.
    Unmix(UnmixArgs),
    /// Fill cloud and ice gaps from the nearest clear date.
    Interp(InterpArgs),
    /// Coverage rate, area series and annual extrema of an interpolated stack.
    Stats(StatsArgs),
    /// Patch count and landscape division index of one class map.
    Landscape(LandscapeArgs),
    /// Confusion counts and accuracy of a class map against reference samples.
    Validate(ValidateArgs),
    /// Generate a synthetic archive from a JSON spec.
    Synth(SynthArgs),
    /// Run classification, refinement, interpolation and statistics end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the number of processors.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    dem: PathBuf,
    /// Region-of-interest mask; the whole footprint when omitted.
    #[arg(long)]
    roi: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct UnmixArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of `{scene_id}.class` maps from `classify`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InterpArgs {
    /// Directory of class maps.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory of interpolated class maps.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    roi: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LandscapeArgs {
    #[arg(long)]
    classmap: PathBuf,
    #[arg(long)]
    roi: Option<PathBuf>,
    /// Optional path for a patch-id grid (0 = no patch).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    classmap: PathBuf,
    /// CSV with `row,col,truth` (truth: water or land).
    #[arg(long)]
    samples: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    dem: PathBuf,
    #[arg(long)]
    roi: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Classify(a) => with_jobs(a.common.jobs, || classify(&a)),
        Command::Unmix(a) => with_jobs(a.common.jobs, || unmix(&a)),
        Command::Interp(a) => with_jobs(a.jobs, || interp(&a)),
        Command::Stats(a) => stats(&a),
        Command::Landscape(a) => landscape(&a),
        Command::Validate(a) => validate(&a),
        Command::Synth(a) => synth(&a),
        Command::Pipeline(a) => with_jobs(a.common.jobs, || run_pipeline(&a)),
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("cannot start worker threads")?;
    pool.install(f)
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_roi(path: Option<&Path>) -> Result<Option<Mask>> {
    path.map(|p| io::read_mask(p).with_context(|| format!("reading roi {}", p.display())))
        .transpose()
}

fn load_dem(path: &Path) -> Result<Grid> {
    io::read_grid(path).with_context(|| format!("reading dem {}", path.display()))
}

fn load_manifest(path: &Path) -> Result<io::SceneManifest> {
    io::read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}

/// All `*.class` maps of a directory, in date order.
fn load_classmaps(dir: &Path) -> Result<Vec<ClassMap>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "class"));
    paths.sort();
    if paths.is_empty() {
        bail!("no .class files in {}", dir.display());
    }
    let mut maps = paths
        .iter()
        .map(|p| io::read_classmap(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    maps.sort_by_key(|m| m.date);
    Ok(maps)
}

fn classify(a: &ClassifyArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let manifest = load_manifest(&a.manifest)?;
    let dem = load_dem(&a.dem)?;
    let roi = load_roi(a.roi.as_deref())?;
    let run = pipeline::classify_manifest(&manifest, &dem, roi.as_ref(), &cfg.classify)?;
    pipeline::write_classify_run(&a.out, &run, &cfg.classify)?;
    println!(
        "classified {} scenes, skipped {} (see {})",
        run.maps.len(),
        run.skipped.len(),
        a.out.join(SKIP_REPORT).display()
    );
    Ok(())
}

fn unmix(a: &UnmixArgs) -> Result<()> {
    use rayon::prelude::*;
    let cfg = load_config(a.common.config.as_deref())?;
    let manifest = load_manifest(&a.manifest)?;
    let unresolved = manifest
        .entries
        .par_iter()
        .filter_map(|entry| {
            let path = pipeline::classmap_path(&a.input, &entry.scene_id);
            // scenes skipped by classify have no map
            path.exists().then_some((entry, path))
        })
        .map(|(entry, path)| -> Result<usize> {
            let scene = pipeline::load_entry_scene(entry)?;
            let map = io::read_classmap(&path)?;
            let refined = refine_boundary(&scene, &map, &cfg.unmix)
                .with_context(|| format!("scene {}", entry.scene_id))?;
            io::write_classmap(&pipeline::classmap_path(&a.out, &entry.scene_id), &refined.map)?;
            io::write_grid(
                &a.out.join(format!("{}.abundance.f32", entry.scene_id)),
                &refined.abundance,
                "water_abundance",
            )?;
            Ok(refined.unresolved)
        })
        .collect::<Result<Vec<_>>>()?;
    println!(
        "refined {} scenes ({} mixed pixels unresolved)",
        unresolved.len(),
        unresolved.iter().sum::<usize>()
    );
    Ok(())
}

fn interp(a: &InterpArgs) -> Result<()> {
    let stack = build_stack(load_classmaps(&a.input)?)?;
    let filled = interpolate(&stack);
    for m in filled.maps() {
        io::write_classmap(&pipeline::classmap_path(&a.out, &m.scene_id), m)?;
    }
    println!("interpolated {} maps", filled.len());
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let stack = build_stack(load_classmaps(&a.input)?)?;
    let roi = match load_roi(a.roi.as_deref())? {
        Some(r) => r,
        None => Mask::full(stack.width(), stack.height()),
    };
    let coverage = coverage_rate(&stack).context("stats needs interpolated maps")?;
    let areas = analytics::area_series(&stack, &roi)?;
    io::write_grid(&a.out.join("coverage.f32"), &coverage, "coverage")?;
    io::write_area_csv(&a.out.join("areas.csv"), &areas)?;
    let summary = annual_extrema(&areas)?;
    println!("year,max_month,min_month");
    for (year, e) in &summary.years {
        println!("{year},{},{}", e.max_month, e.min_month);
    }
    println!("month,max_count,min_count");
    for m in 0..12 {
        println!("{},{},{}", m + 1, summary.max_counts[m], summary.min_counts[m]);
    }
    Ok(())
}

fn landscape(a: &LandscapeArgs) -> Result<()> {
    let map = io::read_classmap(&a.classmap)?;
    let roi = match load_roi(a.roi.as_deref())? {
        Some(r) => r,
        None => Mask::full(map.width(), map.height()),
    };
    let water = map.mask_of(ClassLabel::Water);
    let patches = analytics::connected_components(&water, &roi)?;
    println!("patches {}", patches.patch_count());
    match analytics::division_index_from_sizes(&patches.sizes) {
        Ok(d) => println!("division_index {d:.6}"),
        Err(aquamap::Error::UndefinedIndex) => println!("division_index undefined"),
        Err(e) => return Err(e.into()),
    }
    if let Some(out) = &a.out {
        let ids = Grid::new(
            map.width(),
            map.height(),
            map.pixel_size_m(),
            patches.ids.iter().map(|&i| i as f32).collect(),
            -1.0,
        )?;
        io::write_grid(out, &ids, "patch_id")?;
    }
    Ok(())
}

fn validate(a: &ValidateArgs) -> Result<()> {
    let map = io::read_classmap(&a.classmap)?;
    let samples = io::read_samples(&a.samples)?;
    let c = analytics::confusion(&map, &samples)
        .with_context(|| format!("validating against {}", a.samples.display()))?;
    let cm = c.matrix;
    let fmt = |r: aquamap::Result<f64>| r.map_or_else(|_| "undefined".to_string(), |v| format!("{v:.1}"));
    println!("tp {}", cm.tp);
    println!("fp {}", cm.fp);
    println!("fn {}", cm.fn_);
    println!("tn {}", cm.tn);
    println!("excluded {}", c.excluded);
    println!("oa {}", fmt(analytics::oa(&cm)));
    println!("precision {}", fmt(analytics::precision(&cm)));
    println!("recall {}", fmt(analytics::recall(&cm)));
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = ArchiveSpec::load(&a.spec)?;
    let archive = generate_archive(&spec)?;
    let manifest = pipeline::write_archive(&a.out, &archive)?;
    println!("wrote {} scenes to {}", manifest.entries.len(), a.out.display());
    Ok(())
}

fn run_pipeline(a: &PipelineArgs) -> Result<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let manifest = load_manifest(&a.manifest)?;
    let dem = load_dem(&a.dem)?;
    let roi = load_roi(a.roi.as_deref())?;
    let run = pipeline::run_pipeline(&manifest, &dem, roi.as_ref(), &cfg)?;
    pipeline::write_pipeline_run(&a.out, &run, &cfg)?;
    println!(
        "processed {} scenes, skipped {}; wrote {}",
        run.classified.len(),
        run.skipped.len(),
        a.out.display()
    );
    Ok(())
}
