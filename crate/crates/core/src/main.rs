use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bevgrid::analysis::{class_overlap, oracle_bound, spatial_overlap, Denominator};
use bevgrid::bundle::{read_bundle, read_manifest, write_bundle, write_json, write_label_png, write_projection};
use bevgrid::completion::{complete, LabelStrategy};
use bevgrid::config::PipelineConfig;
use bevgrid::io::{read_labels, read_point_stream, read_points, write_labels, write_points};
use bevgrid::metrics::{class_weights_with_offset, label_histogram, ConfusionMatrix, MetricsReport};
use bevgrid::projection::{project_file, Manifest, ProjectOptions, Projection, ProjectionConfig};
use bevgrid::remap::{load_predictions, remap_file, PredictionRaster};
use bevgrid::synth::{generate_synthetic_city, Rect, SceneSpec};
#[allow(unused_imports)]
use bevgrid::par::prelude::*;
use bevgrid::{par_iter, CLASS_NAMES};

#[derive(Parser)]
#[command(name = "bevgrid", version, about = "Point cloud to BEV raster toolkit")]
struct Cli {
    /// Flat key = value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "BEVGRID_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled cloud.
    Synth(SynthArgs),
    /// Project a cloud into window bundles.
    Project(ProjectArgs),
    /// Fill nodata pixels of projected bundles.
    Complete(CompleteArgs),
    /// Map per-window label predictions back onto points.
    Remap(RemapArgs),
    /// Overlap statistics and the oracle bound of a labeled cloud.
    Analyze(AnalyzeArgs),
    /// Score predicted point labels against ground truth.
    Evaluate(EvaluateArgs),
    /// Log-inverse class weights from label frequencies.
    Weights(WeightsArgs),
    /// Project, complete, segment, remap and evaluate in one go.
    Pipeline(PipelineArgs),
    /// Render overlap curves from an analysis directory.
    Plot(PlotArgs),
}

#[derive(Args, Default)]
struct GridArgs {
    /// Meters per pixel.
    #[arg(long)]
    scale: Option<f64>,
    /// Window side in meters.
    #[arg(long)]
    size: Option<f64>,
    /// Window stride in meters.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    cell_side: Option<f64>,
    #[arg(long)]
    max_window_pixels: Option<u64>,
    /// Points per read batch.
    #[arg(long)]
    chunk_size: Option<usize>,
}

#[derive(Args, Default)]
struct CompletionArgs {
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long)]
    kernel: Option<u32>,
    #[arg(long)]
    label_strategy: Option<LabelStrategy>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Flat,
    SingleLayer,
    Roof,
    Urban,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (JSON); overrides the preset.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "urban")]
    preset: Preset,
    #[arg(long, default_value_t = 50.0)]
    width: f64,
    #[arg(long, default_value_t = 50.0)]
    height: f64,
    /// Points per square meter.
    #[arg(long, default_value_t = 20.0)]
    density: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; receives cloud.bin and scene.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Input point file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Bundle directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct CompleteArgs {
    /// Bundle directory holding manifest.json.
    #[arg(long)]
    bundles: PathBuf,
    /// Output directory (defaults to the bundle directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite bundles instead of writing `*_c_*` siblings.
    #[arg(long)]
    in_place: bool,
    #[command(flatten)]
    completion: CompletionArgs,
}

#[derive(Args)]
struct RemapArgs {
    /// Bundle directory or manifest.json path.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory of `{window}_label.png` predictions.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory; receives labels.bin and coverage.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    chunk_size: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated probe scales in meters.
    #[arg(long, value_delimiter = ',')]
    probe_scales: Option<Vec<f64>>,
    /// Side of the cells ranked in the overlap curve, meters.
    #[arg(long)]
    analysis_cell: Option<f64>,
    #[arg(long)]
    curve_bins: Option<usize>,
    #[arg(long)]
    denominator: Option<Denominator>,
    /// Print a short summary to stdout.
    #[arg(long)]
    summary: bool,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground truth: a point file or a raw label file.
    #[arg(long)]
    gt: PathBuf,
    /// Predicted labels: a point file or a raw label file.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    /// A point file or a raw label file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    offset: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the projected ground-truth labels as the segmenter output.
    #[arg(long, conflicts_with = "segmenter", required_unless_present = "segmenter")]
    oracle: bool,
    /// Shell command run as the segmenter; `{bundles}` and `{predictions}`
    /// are replaced by the two directories.
    #[arg(long)]
    segmenter: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    completion: CompletionArgs,
}

#[derive(Args)]
struct PlotArgs {
    /// Analysis directory holding overlap.csv.
    #[arg(long)]
    analysis: PathBuf,
    /// Output PNG (defaults to overlap.png next to the CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl GridArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let p = &mut cfg.projection;
        if let Some(v) = self.scale {
            p.g_scale = v;
        }
        if let Some(v) = self.size {
            p.g_size = v;
        }
        if let Some(v) = self.step {
            p.g_step = v;
        }
        if let Some(v) = self.cell_side {
            p.cell_side = v;
        }
        if self.max_window_pixels.is_some() {
            cfg.max_window_pixels = self.max_window_pixels;
        }
        if let Some(v) = self.chunk_size {
            cfg.chunk_size = v;
        }
    }
}

impl CompletionArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.iterations {
            cfg.projection.completion_iterations = v;
        }
        if let Some(v) = self.kernel {
            cfg.projection.kernel = v;
        }
        if let Some(v) = self.label_strategy {
            cfg.label_strategy = v;
        }
    }
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    parallel: bool,
    command: &'a str,
    config: &'a PipelineConfig,
}

fn write_run(dir: &Path, command: &str, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        parallel: bevgrid::par::is_parallel(),
        command,
        config: cfg,
    };
    write_json(&dir.join("run.json"), &record)?;
    Ok(())
}

fn required<'a>(flag: Option<&'a PathBuf>, from_cfg: Option<&'a PathBuf>, name: &str) -> anyhow::Result<&'a Path> {
    match flag.or(from_cfg) {
        Some(p) => Ok(p),
        None => bail!("--{name} is required (or set `{name}` in the config file)"),
    }
}

fn make_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Point files start with the `BEVP` magic; no raw label file can, since
/// `B` is not a valid label.
fn read_any_labels(path: &Path) -> anyhow::Result<Vec<u8>> {
    let mut head = [0u8; 4];
    let is_cloud = {
        use std::io::Read;
        let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        f.read(&mut head)? == 4 && &head == b"BEVP"
    };
    if is_cloud {
        let mut labels = Vec::new();
        for batch in read_point_stream(path, 1 << 16)? {
            labels.extend(batch?.iter().map(|p| p.label));
        }
        Ok(labels)
    } else {
        Ok(read_labels(path)?)
    }
}

fn report(gt: &[u8], pred: &[u8]) -> anyhow::Result<MetricsReport> {
    let cm = ConfusionMatrix::from_labels(gt, pred)?;
    Ok(MetricsReport::from(&cm.summarize()?))
}

fn complete_projection(projection: &mut Projection, cfg: &PipelineConfig) -> anyhow::Result<()> {
    let p = cfg.projection;
    for w in &mut projection.windows {
        w.raster = complete(&w.raster, p.completion_iterations, p.kernel, cfg.label_strategy)?;
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    let spec = match &args.scene {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SceneSpec>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let seed = args.seed.unwrap_or(cfg.rng_seed);
            let (w, h, d) = (args.width, args.height, args.density);
            match args.preset {
                Preset::Flat => SceneSpec::flat_ground(w, h, d, seed),
                Preset::SingleLayer => SceneSpec::single_layer(w, h, d, seed),
                Preset::Roof => {
                    SceneSpec::roof_over_ground(w, h, Rect::new(w * 0.25, h * 0.25, w * 0.5, h * 0.5), 8.0, d, seed)
                }
                Preset::Urban => SceneSpec::urban(w, h, d, seed),
            }
        }
    };
    cfg.rng_seed = spec.rng_seed;
    let out = required(args.out.as_ref(), cfg.output.as_ref(), "out")?.to_path_buf();
    cfg.output = Some(out.clone());
    make_dir(&out)?;
    let points = generate_synthetic_city(&spec)?;
    write_points(out.join("cloud.bin"), &points)?;
    write_json(&out.join("scene.json"), &spec)?;
    write_run(&out, "synth", cfg)?;
    eprintln!("wrote {} points to {}", points.len(), out.join("cloud.bin").display());
    Ok(())
}

fn project_opts(cfg: &PipelineConfig) -> ProjectOptions {
    ProjectOptions {
        jobs: cfg.jobs,
        max_window_pixels: cfg.max_window_pixels,
    }
}

fn cmd_project(args: &ProjectArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    args.grid.apply(cfg);
    cfg.validate()?;
    let input = required(args.input.as_ref(), cfg.input.as_ref(), "input")?.to_path_buf();
    let out = required(args.out.as_ref(), cfg.output.as_ref(), "out")?.to_path_buf();
    cfg.input = Some(input.clone());
    cfg.output = Some(out.clone());
    let projection = project_file(&input, cfg.chunk_size, &cfg.projection, &project_opts(cfg))?;
    let manifest = write_projection(&out, &projection, cfg.jobs)?;
    write_run(&out, "project", cfg)?;
    eprintln!("wrote {} window bundles to {}", manifest.windows.len(), out.display());
    Ok(())
}

fn cmd_complete(args: &CompleteArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    args.completion.apply(cfg);
    let manifest = read_manifest(&args.bundles)?;
    // grid parameters come from the bundles, not the config
    cfg.projection = ProjectionConfig {
        completion_iterations: cfg.projection.completion_iterations,
        kernel: cfg.projection.kernel,
        ..manifest.config
    };
    cfg.validate()?;
    let out = args.out.clone().unwrap_or_else(|| args.bundles.clone());
    cfg.input = Some(args.bundles.clone());
    cfg.output = Some(out.clone());
    make_dir(&out)?;
    let p = cfg.projection;
    let strategy = cfg.label_strategy;
    let results: Vec<anyhow::Result<()>> = bevgrid::par::with_jobs(cfg.jobs, || {
        par_iter!(manifest.windows)
            .map(|entry| -> anyhow::Result<()> {
                let (meta, raster) = read_bundle(&args.bundles, &entry.name)?;
                let done = complete(&raster, p.completion_iterations, p.kernel, strategy)?;
                let stem = if args.in_place {
                    entry.name.clone()
                } else {
                    format!("{}_c", entry.name)
                };
                write_bundle(&out, &stem, &meta, &done)?;
                Ok(())
            })
            .collect()
    });
    results.into_iter().collect::<anyhow::Result<()>>()?;
    if out != args.bundles {
        bevgrid::bundle::write_manifest(&out, &manifest)?;
    }
    write_run(&out, "complete", cfg)?;
    eprintln!("completed {} windows", manifest.windows.len());
    Ok(())
}

fn write_remap_outputs(
    out: &Path,
    labels: &[u8],
    coverage: &bevgrid::remap::Coverage,
) -> anyhow::Result<()> {
    write_labels(out.join("labels.bin"), labels, labels.len() as u64)?;
    write_json(&out.join("coverage.json"), coverage)?;
    Ok(())
}

fn cmd_remap(args: &RemapArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    if let Some(v) = args.chunk_size {
        cfg.chunk_size = v;
    }
    let manifest = read_manifest(&args.manifest)?;
    cfg.projection = ProjectionConfig {
        completion_iterations: cfg.projection.completion_iterations,
        kernel: cfg.projection.kernel,
        ..manifest.config
    };
    cfg.validate()?;
    let input = required(args.input.as_ref(), cfg.input.as_ref(), "input")?.to_path_buf();
    let out = required(args.out.as_ref(), cfg.output.as_ref(), "out")?.to_path_buf();
    cfg.input = Some(input.clone());
    cfg.output = Some(out.clone());
    make_dir(&out)?;
    let preds = load_predictions(&args.predictions, &manifest)?;
    let result = bevgrid::par::with_jobs(cfg.jobs, || remap_file(&manifest, &preds, &input, cfg.chunk_size))?;
    write_remap_outputs(&out, &result.labels, &result.coverage)?;
    write_run(&out, "remap", cfg)?;
    eprintln!(
        "labeled {} of {} points ({} outside every window)",
        result.coverage.points_labeled, result.coverage.points_total, result.coverage.points_outside
    );
    Ok(())
}

#[derive(Serialize)]
struct OracleJson {
    g_scale: f64,
    metrics: MetricsReport,
    confusion: Vec<Vec<u64>>,
}

#[derive(Serialize)]
struct ScaleSummary {
    probe_scale: f64,
    point_count: u64,
    overlapped_point_count: u64,
    spatial_overlap_ratio: f64,
}

fn cmd_analyze(args: &AnalyzeArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    args.grid.apply(cfg);
    if let Some(v) = &args.probe_scales {
        cfg.probe_scales = v.clone();
    }
    if let Some(v) = args.analysis_cell {
        cfg.analysis_cell = v;
    }
    if let Some(v) = args.curve_bins {
        cfg.curve_bins = v;
    }
    if let Some(v) = args.denominator {
        cfg.denominator = v;
    }
    cfg.validate()?;
    let input = required(args.input.as_ref(), cfg.input.as_ref(), "input")?.to_path_buf();
    let out = required(args.out.as_ref(), cfg.output.as_ref(), "out")?.to_path_buf();
    cfg.input = Some(input.clone());
    cfg.output = Some(out.clone());
    make_dir(&out)?;
    let points = read_points(&input)?;

    let (scales, class, oracle) = bevgrid::par::with_jobs(cfg.jobs, || -> anyhow::Result<_> {
        let scales = cfg
            .probe_scales
            .iter()
            .map(|&s| spatial_overlap(&points, s, cfg.analysis_cell, cfg.curve_bins))
            .collect::<bevgrid::Result<Vec<_>>>()?;
        let class = class_overlap(&points, &cfg.projection, cfg.denominator)?;
        let oracle = oracle_bound(&points, &cfg.projection)?;
        Ok((scales, class, oracle))
    })?;

    let mut csv = String::from("scale,rank_percentile,overlap_ratio\n");
    for s in &scales {
        for b in &s.curve {
            csv.push_str(&format!("{},{},{}\n", s.probe_scale, b.rank_percentile, b.overlap_ratio));
        }
    }
    fs::write(out.join("overlap.csv"), csv)?;
    let summary: Vec<ScaleSummary> = scales
        .iter()
        .map(|s| ScaleSummary {
            probe_scale: s.probe_scale,
            point_count: s.point_count,
            overlapped_point_count: s.overlapped_point_count,
            spatial_overlap_ratio: s.spatial_overlap_ratio,
        })
        .collect();
    write_json(&out.join("spatial_overlap.json"), &summary)?;
    write_json(&out.join("class_overlap.json"), &class)?;
    let oracle_json = OracleJson {
        g_scale: cfg.projection.g_scale,
        metrics: MetricsReport::from(&oracle.summary),
        confusion: oracle.confusion.counts.iter().map(|r| r.to_vec()).collect(),
    };
    write_json(&out.join("oracle.json"), &oracle_json)?;
    write_run(&out, "analyze", cfg)?;

    if args.summary {
        for s in &summary {
            println!("spatial overlap @ {} m: {:.4}", s.probe_scale, s.spatial_overlap_ratio);
        }
        println!(
            "class overlap @ {} m: {:.4} ({} of {} points)",
            class.g_scale, class.class_overlap_ratio, class.disagreeing_points, class.evaluated_points
        );
        println!(
            "oracle: OA {:.4}  mAcc {:.4}  mIoU {:.4}",
            oracle.summary.oa, oracle.summary.macc, oracle.summary.miou
        );
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    let gt = read_any_labels(&args.gt)?;
    let pred = read_any_labels(&args.pred)?;
    let metrics = report(&gt, &pred)?;
    let out = required(args.out.as_ref(), cfg.output.as_ref(), "out")?.to_path_buf();
    cfg.input = Some(args.gt.clone());
    cfg.output = Some(out.clone());
    make_dir(&out)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    write_run(&out, "evaluate", cfg)?;
    println!("OA {:.4}  mAcc {:.4}  mIoU {:.4}", metrics.oa, metrics.macc, metrics.miou);
    Ok(())
}

#[derive(Serialize)]
struct WeightsJson {
    offset: f64,
    classes: Vec<&'static str>,
    counts: Vec<u64>,
    weights: Vec<f64>,
}

fn cmd_weights(args: &WeightsArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    if let Some(v) = args.offset {
        cfg.weight_offset = v;
    }
    cfg.validate()?;
    let input = required(args.input.as_ref(), cfg.input.as_ref(), "input")?.to_path_buf();
    let out = required(args.out.as_ref(), cfg.output.as_ref(), "out")?.to_path_buf();
    cfg.input = Some(input.clone());
    cfg.output = Some(out.clone());
    make_dir(&out)?;
    let counts = label_histogram(&read_any_labels(&input)?);
    let weights = class_weights_with_offset(&counts, cfg.weight_offset)?;
    write_json(
        &out.join("weights.json"),
        &WeightsJson {
            offset: cfg.weight_offset,
            classes: CLASS_NAMES.to_vec(),
            counts: counts.to_vec(),
            weights,
        },
    )?;
    write_run(&out, "weights", cfg)?;
    Ok(())
}

fn run_segmenter(template: &str, bundles: &Path, predictions: &Path) -> anyhow::Result<()> {
    let cmd = template
        .replace("{bundles}", &bundles.display().to_string())
        .replace("{predictions}", &predictions.display().to_string());
    let status = std::process::Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .status()
        .with_context(|| format!("running segmenter {cmd:?}"))?;
    if !status.success() {
        bail!("segmenter {cmd:?} failed with {status}");
    }
    Ok(())
}

fn write_oracle_predictions(dir: &Path, projection: &Projection) -> anyhow::Result<()> {
    for w in &projection.windows {
        let pred = PredictionRaster::from_raster(w.meta.window_id, &w.raster);
        write_label_png(
            &dir.join(format!("{}_label.png", w.meta.name())),
            pred.width,
            pred.height,
            &pred.label,
        )?;
    }
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
    args.grid.apply(cfg);
    args.completion.apply(cfg);
    cfg.validate()?;
    let input = required(args.input.as_ref(), cfg.input.as_ref(), "input")?.to_path_buf();
    let out = required(args.out.as_ref(), cfg.output.as_ref(), "out")?.to_path_buf();
    cfg.input = Some(input.clone());
    cfg.output = Some(out.clone());
    let bundles = out.join("bundles");
    let predictions = out.join("predictions");
    make_dir(&bundles)?;
    make_dir(&predictions)?;

    let mut projection = project_file(&input, cfg.chunk_size, &cfg.projection, &project_opts(cfg))?;
    bevgrid::par::with_jobs(cfg.jobs, || complete_projection(&mut projection, cfg))?;
    let manifest: Manifest = write_projection(&bundles, &projection, cfg.jobs)?;

    match &args.segmenter {
        Some(template) => run_segmenter(template, &bundles, &predictions)?,
        None => write_oracle_predictions(&predictions, &projection)?,
    }
    drop(projection);

    let preds = load_predictions(&predictions, &manifest)?;
    let result = bevgrid::par::with_jobs(cfg.jobs, || remap_file(&manifest, &preds, &input, cfg.chunk_size))?;
    write_remap_outputs(&out, &result.labels, &result.coverage)?;

    let gt = read_any_labels(&input)?;
    let metrics = report(&gt, &result.labels)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    write_run(&out, "pipeline", cfg)?;
    println!("OA {:.4}  mAcc {:.4}  mIoU {:.4}", metrics.oa, metrics.macc, metrics.miou);
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> anyhow::Result<()> {
    let csv_path = args.analysis.join("overlap.csv");
    let text = fs::read_to_string(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            bail!("{}:{}: expected 3 fields", csv_path.display(), n + 1);
        }
        curves
            .entry(f[0].to_string())
            .or_default()
            .push((f[1].parse()?, f[2].parse()?));
    }
    let out = args.out.clone().unwrap_or_else(|| args.analysis.join("overlap.png"));
    plot::render(&curves, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

mod plot {
    use std::collections::BTreeMap;
    use std::path::Path;

    use image::{Rgb, RgbImage};

    const W: u32 = 640;
    const H: u32 = 400;
    const MARGIN: u32 = 40;
    const PALETTE: [[u8; 3]; 6] = [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
    ];

    fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
        let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
        for i in 0..=steps {
            let x = x0 + (x1 - x0) * i / steps;
            let y = y0 + (y1 - y0) * i / steps;
            if (0..W as i64).contains(&x) && (0..H as i64).contains(&y) {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }

    /// Rank percentile on x (0 to 100), overlap ratio on y (0 to 1), one
    /// colored polyline per probe scale in ascending scale order.
    pub fn render(curves: &BTreeMap<String, Vec<(f64, f64)>>, out: &Path) -> anyhow::Result<()> {
        let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
        let (l, r, t, b) = (MARGIN as i64, (W - MARGIN) as i64, MARGIN as i64 / 2, (H - MARGIN) as i64);
        let axis = Rgb([0, 0, 0]);
        line(&mut img, (l, b), (r, b), axis);
        line(&mut img, (l, t), (l, b), axis);
        let to_px = |x: f64, y: f64| {
            (
                l + ((x / 100.0).clamp(0.0, 1.0) * (r - l) as f64).round() as i64,
                b - (y.clamp(0.0, 1.0) * (b - t) as f64).round() as i64,
            )
        };
        for (i, pts) in curves.values().enumerate() {
            let color = Rgb(PALETTE[i % PALETTE.len()]);
            for pair in pts.windows(2) {
                line(&mut img, to_px(pair[0].0, pair[0].1), to_px(pair[1].0, pair[1].1), color);
            }
        }
        img.save(out)?;
        Ok(())
    }
}

fn resolve_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, &mut cfg),
        Command::Project(a) => cmd_project(a, &mut cfg),
        Command::Complete(a) => cmd_complete(a, &mut cfg),
        Command::Remap(a) => cmd_remap(a, &mut cfg),
        Command::Analyze(a) => cmd_analyze(a, &mut cfg),
        Command::Evaluate(a) => cmd_evaluate(a, &mut cfg),
        Command::Weights(a) => cmd_weights(a, &mut cfg),
        Command::Pipeline(a) => cmd_pipeline(a, &mut cfg),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
