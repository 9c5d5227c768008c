//! Command-line frontend: single-pair fusion, batch dataset fusion with CSV
//! reporting, and metric evaluation of externally produced fusions.
//!
//! Exit codes: 0 success, 2 input error (missing/unreadable files, empty
//! datasets), 3 validation error (bad parameters, dimension mismatches),
//! 1 internal error.

mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use bayesfusion::{
    discover_pairs, evaluate, fuse, load_grayscale, save_grayscale, DatasetLayout, FusionError,
    FusionParams, ImagePairRecord, IntensityScale, MetricReport, Plane,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use report::{batch_error_row, batch_row, csv_escape, print_report, sig6, BATCH_CSV_HEADER};

#[derive(Parser)]
#[command(
    name = "bayesfusion",
    version,
    about = "Fuse infrared/visible image pairs and score fusion quality"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse one infrared/visible pair and print its quality metrics
    Fuse(FuseArgs),
    /// Fuse every pair in a dataset directory and write a CSV report
    Batch(BatchArgs),
    /// Score an externally produced fused image against its two sources
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// Gradient-penalty strength
    #[arg(long, default_value_t = 0.5)]
    lambda_g: f64,
    /// Splitting-penalty strength
    #[arg(long, default_value_t = 0.001)]
    rho: f64,
    /// Outer EM iterations
    #[arg(long, default_value_t = 15)]
    t_out: usize,
    /// Inner coordinate-descent sweeps per M-step
    #[arg(long, default_value_t = 2)]
    t_in: usize,
    /// Zero-guard floor for the E-step expectations
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Intensity range images are processed in
    #[arg(long, value_enum, default_value_t = ScaleArg::Unit)]
    scale: ScaleArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    /// Intensities in [0, 1]
    Unit,
    /// Intensities in [0, 255]
    Byte,
}

impl From<ScaleArg> for IntensityScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Unit => IntensityScale::Unit,
            ScaleArg::Byte => IntensityScale::Byte,
        }
    }
}

impl ParamArgs {
    fn to_params(&self) -> anyhow::Result<FusionParams<f64>> {
        let params = FusionParams {
            lambda_g: self.lambda_g,
            rho: self.rho,
            t_out: self.t_out,
            t_in: self.t_in,
            eps: self.eps,
            scale: self.scale.into(),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Tno,
    Nir,
    Flat,
}

impl From<LayoutArg> for DatasetLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Tno => DatasetLayout::Tno,
            LayoutArg::Nir => DatasetLayout::Nir,
            LayoutArg::Flat => DatasetLayout::Flat,
        }
    }
}

#[derive(Args)]
struct FuseArgs {
    /// Infrared input image
    #[arg(long)]
    ir: PathBuf,
    /// Visible input image
    #[arg(long)]
    vis: PathBuf,
    /// Output path for the fused image (PNG, PGM, or BMP by extension)
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct BatchArgs {
    /// Dataset root directory
    #[arg(long)]
    dataset: PathBuf,
    /// Directory pairing convention
    #[arg(long, value_enum, default_value_t = LayoutArg::Flat)]
    layout: LayoutArg,
    /// Directory the fused images are written to
    #[arg(long)]
    out_dir: PathBuf,
    /// CSV report path (default: `<out-dir>/report.csv`)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Optional file with one pair id per line; restricts the run
    #[arg(long)]
    ids: Option<PathBuf>,
    /// Worker threads for pair-level parallelism (0 = all cores)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct MetricsArgs {
    /// Infrared source image
    #[arg(long)]
    ir: PathBuf,
    /// Visible source image
    #[arg(long)]
    vis: PathBuf,
    /// Fused image to score
    #[arg(long)]
    fused: PathBuf,
    /// Optional CSV output (header plus one row)
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Intensity range images are processed in
    #[arg(long, value_enum, default_value_t = ScaleArg::Unit)]
    scale: ScaleArg,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fuse(args) => cmd_fuse(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Metrics(args) => cmd_metrics(args),
    };
    match outcome {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

/// Raised when a batch run produced zero successful pairs.
#[derive(Debug)]
struct AllPairsFailed {
    total: usize,
    csv: PathBuf,
}

impl std::fmt::Display for AllPairsFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "all {} pairs failed; per-pair reasons in {}",
            self.total,
            self.csv.display()
        )
    }
}

impl std::error::Error for AllPairsFailed {}

/// Maps error classes onto the documented exit codes.
fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<AllPairsFailed>().is_some() {
        return 2;
    }
    match err.downcast_ref::<FusionError>() {
        Some(FusionError::Io { .. })
        | Some(FusionError::Image { .. })
        | Some(FusionError::UnsupportedFormat { .. })
        | Some(FusionError::NoPairsFound { .. }) => 2,
        Some(FusionError::InvalidInput(_)) | Some(FusionError::InvalidState(_)) => 3,
        Some(FusionError::InternalConsistency(_)) => 1,
        None => 1,
    }
}

fn cmd_fuse(args: FuseArgs) -> anyhow::Result<()> {
    let params = args.params.to_params()?;
    let scale = params.scale;
    let ir: Plane = load_grayscale(&args.ir, scale)?;
    let vis: Plane = load_grayscale(&args.vis, scale)?;
    let fused = fuse(&ir, &vis, &params)?;
    save_atomically(&fused, &args.out, scale)?;
    let report = evaluate(&ir, &vis, &fused, scale)?;
    print_report(&report);
    Ok(())
}

/// Writes through a temporary sibling and renames, so a failed run never
/// leaves a partial output file behind.
fn save_atomically(plane: &Plane, out: &Path, scale: IntensityScale) -> anyhow::Result<()> {
    let file_name = out
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| FusionError::InvalidInput(format!("bad output path {}", out.display())))?;
    let tmp = out.with_file_name(format!(".partial-{file_name}"));
    if let Err(e) = save_grayscale(plane, &tmp, scale) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    std::fs::rename(&tmp, out).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        FusionError::Io {
            path: out.to_path_buf(),
            source: e,
        }
    })?;
    Ok(())
}

/// Pair ids may contain path separators (tno layout); keep file names flat.
fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct PairOutcome {
    id: String,
    wall_ms: u128,
    result: Result<MetricReport<f64>, String>,
}

fn cmd_batch(args: BatchArgs) -> anyhow::Result<()> {
    let params = args.params.to_params()?;
    let scale = params.scale;
    let discovery = discover_pairs(&args.dataset, args.layout.into())?;
    for warning in &discovery.warnings {
        eprintln!("warning: {warning}");
    }
    for (id, reason) in &discovery.rejected {
        eprintln!("warning: pair '{id}' rejected: {reason}");
    }

    let (pairs, rejected) = match &args.ids {
        Some(list) => filter_by_ids(discovery.pairs, discovery.rejected, list)?,
        None => (discovery.pairs, discovery.rejected),
    };
    if pairs.is_empty() && rejected.is_empty() {
        anyhow::bail!(FusionError::NoPairsFound {
            root: args.dataset.clone(),
            expectation: "the id list matched no discovered pair".into(),
        });
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| FusionError::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("building worker pool")?;
    let total = pairs.len();
    let out_dir = args.out_dir.clone();
    let outcomes: Vec<PairOutcome> = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(k, pair)| {
                let outcome = process_pair(pair, &out_dir, &params, scale);
                match &outcome.result {
                    Ok(_) => eprintln!(
                        "[{}/{}] {} ok ({} ms)",
                        k + 1,
                        total,
                        pair.id,
                        outcome.wall_ms
                    ),
                    Err(e) => eprintln!("[{}/{}] {} error: {e}", k + 1, total, pair.id),
                }
                outcome
            })
            .collect()
    });

    // Outcomes were collected in pair order; fold in the discovery-time
    // rejections and sort by id so the CSV is deterministic no matter how
    // many workers ran.
    let mut outcomes = outcomes;
    for (id, reason) in rejected {
        outcomes.push(PairOutcome {
            id,
            wall_ms: 0,
            result: Err(reason),
        });
    }
    outcomes.sort_by(|a, b| a.id.cmp(&b.id));

    let mut lines = vec![BATCH_CSV_HEADER.to_string()];
    let mut successes = Vec::new();
    let mut success_wall = Vec::new();
    for o in &outcomes {
        match &o.result {
            Ok(report) => {
                lines.push(batch_row(&o.id, report, o.wall_ms));
                successes.push(*report);
                success_wall.push(o.wall_ms);
            }
            Err(e) => lines.push(batch_error_row(&o.id, o.wall_ms, e)),
        }
    }
    if let Some(mean) = MetricReport::mean(&successes) {
        let mean_wall = success_wall.iter().sum::<u128>() / success_wall.len() as u128;
        lines.push(batch_row("mean", &mean, mean_wall));
        print_report(&mean);
    }

    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| args.out_dir.join("report.csv"));
    std::fs::write(&csv_path, lines.join("\n") + "\n").map_err(|e| FusionError::Io {
        path: csv_path.clone(),
        source: e,
    })?;
    eprintln!(
        "fused {}/{} pairs, report written to {}",
        successes.len(),
        total,
        csv_path.display()
    );

    if successes.is_empty() {
        anyhow::bail!(AllPairsFailed {
            total: outcomes.len(),
            csv: csv_path,
        });
    }
    Ok(())
}

fn process_pair(
    pair: &ImagePairRecord,
    out_dir: &Path,
    params: &FusionParams<f64>,
    scale: IntensityScale,
) -> PairOutcome {
    let start = Instant::now();
    let result = (|| -> anyhow::Result<MetricReport<f64>> {
        let ir: Plane = load_grayscale(&pair.ir_path, scale)?;
        let vis: Plane = load_grayscale(&pair.vis_path, scale)?;
        let fused = fuse(&ir, &vis, params)?;
        let out_path = out_dir.join(format!("{}_fused.png", sanitize_id(&pair.id)));
        save_atomically(&fused, &out_path, scale)?;
        Ok(evaluate(&ir, &vis, &fused, scale)?)
    })();
    PairOutcome {
        id: pair.id.clone(),
        wall_ms: start.elapsed().as_millis(),
        result: result.map_err(|e| format!("{e:#}")),
    }
}

type RejectedPairs = Vec<(String, String)>;

fn filter_by_ids(
    pairs: Vec<ImagePairRecord>,
    rejected: RejectedPairs,
    list_path: &Path,
) -> anyhow::Result<(Vec<ImagePairRecord>, RejectedPairs)> {
    let text = std::fs::read_to_string(list_path).map_err(|e| FusionError::Io {
        path: list_path.to_path_buf(),
        source: e,
    })?;
    let wanted: BTreeSet<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    let mut have: BTreeSet<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    have.extend(rejected.iter().map(|(id, _)| id.as_str()));
    for id in wanted.iter().filter(|id| !have.contains(id.as_str())) {
        eprintln!(
            "warning: id '{id}' from {} not found in dataset",
            list_path.display()
        );
    }
    Ok((
        pairs
            .into_iter()
            .filter(|p| wanted.contains(p.id.as_str()))
            .collect(),
        rejected
            .into_iter()
            .filter(|(id, _)| wanted.contains(id.as_str()))
            .collect(),
    ))
}

fn cmd_metrics(args: MetricsArgs) -> anyhow::Result<()> {
    let scale: IntensityScale = args.scale.into();
    let ir: Plane = load_grayscale(&args.ir, scale)?;
    let vis: Plane = load_grayscale(&args.vis, scale)?;
    let fused: Plane = load_grayscale(&args.fused, scale)?;
    let report = evaluate(&ir, &vis, &fused, scale)?;
    print_report(&report);

    if let Some(csv_path) = &args.csv {
        let id = args
            .fused
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "fused".to_string());
        let text = format!(
            "id,en,mi,qabf,sd,ssim_sum,ssim_mean\n{},{},{},{},{},{},{}\n",
            csv_escape(&id),
            sig6(report.en),
            sig6(report.mi),
            sig6(report.qabf),
            sig6(report.sd),
            sig6(report.ssim_sum),
            sig6(report.ssim_mean),
        );
        std::fs::write(csv_path, text).map_err(|e| FusionError::Io {
            path: csv_path.clone(),
            source: e,
        })?;
    }
    Ok(())
}
