//! `fovscope` subcommands.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::advisor::{advise, guideline_rows, guideline_table};
use crate::config::{parse_network_config, HeadPlan};
use crate::erf::{default_center, erf_accumulate, ErfConfig, ErfMap, ImageSource};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    find_star, fit_gaussian_2d, predict_fcn_d6, predict_star, DetectionParams, StarGeometry, DEFAULT_ALPHA,
};
use crate::imageio::{atomic_write, render_heatmap};
use crate::report::{DetectionSettings, ErfSummary, RunReport};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "FOVSCOPE_OUT";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_STAR_MISMATCH: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "fovscope", version, about = "Effective receptive fields and atrous-rate selection for ASPP heads")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recommend a base atrous rate for a crop size and output stride.
    Advise(AdviseArgs),
    /// Accumulate the ERF of a network description over an image set.
    Erf(ErfArgs),
    /// Detect ERF peaks and match them against the predicted star.
    Analyze(AnalyzeArgs),
    /// Print the rate guideline table.
    Table(TableArgs),
    /// Render an ERF dump as PNG and PGM heatmaps.
    Render(RenderArgs),
}

/// `L` or `HxW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub height: usize,
    pub width: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{s}` is not a size (use L or HxW)"));
        match s.split_once(['x', 'X']) {
            Some((h, w)) => Ok(Size { height: parse(h)?, width: parse(w)? }),
            None => {
                let l = parse(s)?;
                Ok(Size { height: l, width: l })
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct AdviseArgs {
    /// Crop size, `L` or `HxW`.
    #[arg(long)]
    pub size: Size,
    #[arg(long)]
    pub stride: usize,
    /// Rate to diagnose instead of the recommended one.
    #[arg(long)]
    pub rate: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct ErfArgs {
    /// Network description file.
    #[arg(long)]
    pub config: PathBuf,
    /// Number of images to accumulate.
    #[arg(long, default_value_t = 16)]
    pub images: usize,
    /// Seed of the synthetic image set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: $FOVSCOPE_OUT, else the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the PNG/PGM images of this directory instead of synthetic noise.
    #[arg(long)]
    pub image_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Aspp,
    FcnD6,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Raw ERF dump written by `erf`.
    #[arg(long)]
    pub erf: PathBuf,
    #[arg(long)]
    pub rate: usize,
    #[arg(long)]
    pub stride: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = LayoutArg::Aspp)]
    pub layout: LayoutArg,
    /// Also fit an axis-aligned 2D Gaussian.
    #[arg(long)]
    pub fit_gaussian: bool,
    /// Peak neighborhood half-width in pixels (default: rate·stride/2).
    #[arg(long)]
    pub window: Option<usize>,
    /// Peaks below this fraction of the global maximum are ignored.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    /// Gaussian pre-smoothing sigma in pixels (default: stride/2; 0 disables).
    #[arg(long)]
    pub smooth: Option<f64>,
    #[arg(long, default_value_t = 16.0)]
    pub match_radius: f64,
    /// Required matched fraction of the in-frame taps; below it the exit code is 3.
    #[arg(long, default_value_t = 0.8)]
    pub min_match: f64,
    /// Star center `ROW,COL` (default: the ERF seed position).
    #[arg(long)]
    pub center: Option<String>,
    /// Output directory (default: $FOVSCOPE_OUT, else `analysis/` beside the dump).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub erf: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Output path; `.png` and `.pgm` are written (default: beside the dump).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit code for an error: 2 for bad input, 1 for everything else.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Unsupported(_) | Error::Config(_) | Error::ShapeMismatch(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn out_dir(flag: Option<&Path>, fallback: PathBuf) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or(fallback)
}

/// Runs a parsed command line, writing user-facing output to `stdout`.
pub fn run(cli: &Cli, argv: Vec<String>, stdout: &mut dyn std::io::Write) -> Result<u8> {
    match &cli.command {
        Command::Advise(a) => cmd_advise(a, stdout),
        Command::Erf(a) => cmd_erf(a, argv, stdout),
        Command::Analyze(a) => cmd_analyze(a, argv, stdout),
        Command::Table(a) => cmd_table(a, stdout),
        Command::Render(a) => cmd_render(a, stdout),
    }
}

pub fn cmd_advise(args: &AdviseArgs, stdout: &mut dyn std::io::Write) -> Result<u8> {
    let report = advise(args.size.height, args.size.width, args.stride, args.rate, args.alpha)?;
    let mut v = serde_json::to_value(&report)?;
    crate::report::round_floats(&mut v);
    writeln!(stdout, "{}", serde_json::to_string_pretty(&v)?)?;
    Ok(EXIT_OK)
}

pub fn cmd_table(args: &TableArgs, stdout: &mut dyn std::io::Write) -> Result<u8> {
    for row in guideline_table(&guideline_rows(), args.alpha)? {
        writeln!(stdout, "{row}")?;
    }
    Ok(EXIT_OK)
}

fn star_for(layout: LayoutArg, r: usize, s: usize, center: (usize, usize), alpha: f64) -> Result<StarGeometry> {
    let c = (center.0 as i64, center.1 as i64);
    match layout {
        LayoutArg::Aspp => predict_star(r, s, c, alpha),
        LayoutArg::FcnD6 => predict_fcn_d6(r, s, c, alpha),
    }
}

pub fn cmd_erf(args: &ErfArgs, argv: Vec<String>, stdout: &mut dyn std::io::Write) -> Result<u8> {
    let start = Instant::now();
    let parsed = parse_network_config(&args.config)?;
    for w in &parsed.warnings {
        log::warn!("{}: {w}", args.config.display());
    }
    let plan = parsed.plan;
    let net = plan.build()?;
    let mut config = ErfConfig::synthetic(plan.height, plan.width, args.images, args.seed);
    if let Some(dir) = &args.image_dir {
        config.image_source = ImageSource::Directory(dir.clone());
    }
    log::info!("accumulating {} images at {}x{}", args.images, plan.height, plan.width);
    let erf = erf_accumulate(&net, &config)?;

    let dir = out_dir(args.out.as_deref(), PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let dump = dir.join("erf.bin");
    atomic_write(&dump, &erf.to_dump_bytes())?;
    let heat = render_heatmap(&erf, args.gamma, &dir.join("erf"))?;
    let report_path = dir.join("report.json");

    let (layout, rate) = match plan.head {
        HeadPlan::Aspp { rate, .. } => (LayoutArg::Aspp, rate),
        HeadPlan::FcnD6 { rate, .. } => (LayoutArg::FcnD6, rate),
    };
    let center = (config.center_row, config.center_col);
    let mut report = RunReport::new(argv);
    report.network_digest = Some(plan.digest());
    report.files = vec![args.config.clone(), dump, heat.png, heat.pgm, report_path.clone()];
    if let Some(d) = &args.image_dir {
        report.files.insert(1, d.clone());
    }
    report.seeds.network = Some(plan.seed);
    report.seeds.images = Some(args.seed);
    report.erf = Some(ErfSummary {
        height: erf.height(),
        width: erf.width(),
        n_images: Some(erf.n_accumulated()),
        center,
        max_value: erf.max_value(),
    });
    report.star = Some(star_for(layout, rate, plan.encoder.stride, center, DEFAULT_ALPHA)?);
    report.advisor = advise(plan.height, plan.width, plan.encoder.stride, Some(rate), DEFAULT_ALPHA).ok();
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.write(&report_path)?;
    writeln!(stdout, "{}", report_path.display())?;
    Ok(EXIT_OK)
}

fn parse_center(text: &str) -> Result<(usize, usize)> {
    let bad = || invalid(format!("center must be ROW,COL, got `{text}`"));
    let (r, c) = text.split_once(',').ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

pub fn cmd_analyze(args: &AnalyzeArgs, argv: Vec<String>, stdout: &mut dyn std::io::Write) -> Result<u8> {
    let start = Instant::now();
    if args.rate == 0 || args.stride == 0 {
        return Err(invalid("rate and stride must be >= 1"));
    }
    if !(0.0..=1.0).contains(&args.min_match) {
        return Err(invalid(format!("--min-match must lie in [0, 1], got {}", args.min_match)));
    }
    let erf = ErfMap::read(&args.erf)?;
    let center = match &args.center {
        Some(c) => parse_center(c)?,
        None => default_center(erf.height(), erf.width()),
    };
    let star = star_for(args.layout, args.rate, args.stride, center, args.alpha)?;
    let mut params = DetectionParams::for_rate(args.rate, args.stride);
    params.threshold_frac = args.threshold;
    params.match_radius = args.match_radius;
    if let Some(w) = args.window {
        params.window = w;
    }
    if let Some(sigma) = args.smooth {
        params.smoothing_sigma = sigma;
    }
    let (peaks, star_match) = find_star(&erf, &star, &params)?;
    let in_frame = star.taps_in_frame(erf.height(), erf.width()).len();
    let min_matched = (args.min_match * in_frame as f64).ceil() as usize;

    let dir = out_dir(
        args.out.as_deref(),
        args.erf.parent().unwrap_or(Path::new(".")).join("analysis"),
    );
    std::fs::create_dir_all(&dir)?;
    let report_path = dir.join("report.json");
    let mut report = RunReport::new(argv);
    report.files = vec![args.erf.clone(), report_path.clone()];
    report.erf = Some(ErfSummary {
        height: erf.height(),
        width: erf.width(),
        n_images: None,
        center,
        max_value: erf.max_value(),
    });
    report.detection = Some(DetectionSettings {
        window: params.window,
        threshold_frac: params.threshold_frac,
        smoothing_sigma: params.smoothing_sigma,
        match_radius: params.match_radius,
        n_peaks: peaks.len(),
        taps_in_frame: in_frame,
        min_matched,
    });
    if args.fit_gaussian {
        report.gaussian_fit = Some(fit_gaussian_2d(&erf)?);
    }
    report.advisor = advise(erf.height(), erf.width(), args.stride, Some(args.rate), args.alpha).ok();
    let matched = star_match.matched;
    report.star = Some(star);
    report.star_match = Some(star_match);
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.write(&report_path)?;
    writeln!(stdout, "{}", report_path.display())?;
    writeln!(stdout, "matched {matched}/{in_frame} in-frame taps (need {min_matched})")?;
    if matched < min_matched {
        return Ok(EXIT_STAR_MISMATCH);
    }
    Ok(EXIT_OK)
}

pub fn cmd_render(args: &RenderArgs, stdout: &mut dyn std::io::Write) -> Result<u8> {
    let erf = ErfMap::read(&args.erf)?;
    let target = args.out.clone().unwrap_or_else(|| args.erf.with_extension(""));
    let files = render_heatmap(&erf, args.gamma, &target)?;
    writeln!(stdout, "{}\n{}", files.png.display(), files.pgm.display())?;
    Ok(EXIT_OK)
}
