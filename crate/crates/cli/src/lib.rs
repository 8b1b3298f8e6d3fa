//! Command-line front end of the roadforge pipeline.
//!
//! [`run`] parses an argument vector, executes one subcommand and returns
//! its exit code together with the path of the JSON report it wrote.
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O or
//! malformed input file, 3 degenerate or numerically failed data.

mod commands;
pub mod config;
mod labels;
mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{derive_seed, Config};
pub use labels::{read_labels, write_labels, Label};
pub use report::SCHEMA_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    /// The JSON report, when the command got far enough to write one.
    pub report_path: Option<PathBuf>,
}

/// A failed command: exit code and a one-line diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub report_path: Option<PathBuf>,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Failure {
        Failure { code, message: message.into(), report_path: None }
    }

    pub fn config(message: impl Into<String>) -> Failure {
        Failure::new(EXIT_USAGE, format!("config error: {}", message.into()))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Failure {
        Failure::new(EXIT_IO, format!("{}: {err}", path.display()))
    }
}

impl From<roadforge::Error> for Failure {
    fn from(e: roadforge::Error) -> Failure {
        use roadforge::Error as E;
        let code = match &e {
            E::InvalidParameter(_) => EXIT_USAGE,
            E::Io { .. } | E::Parse { .. } => EXIT_IO,
            _ => EXIT_DEGENERATE,
        };
        Failure::new(code, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "roadforge", version, about = "LiDAR ground filtering, road-marking rasters, glyph degradation and pose refinement")]
struct Cli {
    /// JSON configuration file; unknown keys are rejected.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Where to write the JSON report (default: next to the main output).
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutlierFlags {
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    k_min: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Remove isolated points from an XYZI cloud.
    Clean {
        #[arg(long = "in", value_name = "CLOUD")]
        input: PathBuf,
        #[arg(long, value_name = "CLOUD")]
        out: PathBuf,
        #[command(flatten)]
        outliers: OutlierFlags,
    },
    /// Outlier removal and ground filtering; writes one label per point.
    Ground {
        #[arg(long = "in", value_name = "CLOUD")]
        input: PathBuf,
        #[arg(long, value_name = "LABELS")]
        out: PathBuf,
        #[command(flatten)]
        outliers: OutlierFlags,
        #[arg(long)]
        initial_cell: Option<f64>,
        #[arg(long)]
        min_cell: Option<f64>,
        #[arg(long)]
        dist_thresh: Option<f64>,
        #[arg(long)]
        angle_thresh: Option<f64>,
    },
    /// Triangulate the ground points and write an ESRI ASCII grid.
    Dem {
        #[arg(long = "in", value_name = "CLOUD")]
        input: PathBuf,
        #[arg(long, value_name = "LABELS")]
        labels: PathBuf,
        #[arg(long, value_name = "GRID")]
        out: PathBuf,
        #[arg(long)]
        cell: Option<f64>,
    },
    /// Threshold and rasterize ground intensities into a PGM.
    Intensity {
        #[arg(long = "in", value_name = "CLOUD")]
        input: PathBuf,
        #[arg(long, value_name = "LABELS")]
        labels: PathBuf,
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
        #[arg(long)]
        resolution: Option<f64>,
        /// Write plain-text P2 instead of binary P5.
        #[arg(long)]
        ascii: bool,
    },
    /// Cut a PGM into tiles and keep those with enough edges.
    Tiles {
        #[arg(long = "in", value_name = "PGM")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Degrade every glyph PGM of a directory.
    Glyph {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// plain, distort, standard, optimized1, optimized2 or all; repeatable.
        #[arg(long, default_value = "standard")]
        preset: Vec<String>,
        #[arg(long)]
        target_size: Option<usize>,
    },
    /// Synthetic pose refinement run with a convergence trace.
    PoseSim {
        #[arg(long, value_name = "TRACE")]
        out: PathBuf,
        /// Also write the generated scene.
        #[arg(long, value_name = "SCENE")]
        scene_out: Option<PathBuf>,
        #[arg(long)]
        angle_deg: Option<f64>,
        #[arg(long)]
        distance_m: Option<f64>,
        #[arg(long)]
        pixel_sigma: Option<f64>,
        #[arg(long)]
        outlier_fraction: Option<f64>,
        /// Skip the Gauss–Newton polish.
        #[arg(long)]
        no_polish: bool,
    },
}

fn init_logging() -> Result<(), Failure> {
    let level = match std::env::var("ROADFORGE_LOG").as_deref() {
        Err(_) | Ok("info") => log::LevelFilter::Info,
        Ok("error") => log::LevelFilter::Error,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => {
            return Err(Failure::new(EXIT_USAGE, format!("ROADFORGE_LOG must be error, info or debug, got {other:?}")))
        }
    };
    // A second initialisation in the same process keeps the first logger.
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    log::set_max_level(level);
    Ok(())
}

/// Parses `argv` (program name first) and runs the selected subcommand.
/// Diagnostics go to stderr; nothing here exits the process.
pub fn run<I, T>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match try_run(argv) {
        Ok(report_path) => CommandResult { exit_code: EXIT_OK, report_path },
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("roadforge: {}", f.message);
            }
            CommandResult { exit_code: f.code, report_path: f.report_path }
        }
    }
}

fn try_run<I, T>(argv: I) -> Result<Option<PathBuf>, Failure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return if code == EXIT_OK { Ok(None) } else { Err(Failure::new(code, "")) };
        }
    };
    init_logging()?;

    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    apply_flags(&mut config, &cli.command);
    config.apply_seed();
    config.validate()?;
    log::info!(
        "effective config: {}",
        serde_json::to_string(&config).expect("config serializes")
    );

    let ctx = commands::Context { config, report: cli.report };
    match &cli.command {
        Command::Clean { input, out, .. } => commands::clean(&ctx, input, out),
        Command::Ground { input, out, .. } => commands::ground(&ctx, input, out),
        Command::Dem { input, labels, out, .. } => commands::dem(&ctx, input, labels, out),
        Command::Intensity { input, labels, out, ascii, .. } => commands::intensity(&ctx, input, labels, out, *ascii),
        Command::Tiles { input, out, .. } => commands::tiles(&ctx, input, out),
        Command::Glyph { input, out, preset, .. } => commands::glyph(&ctx, input, out, preset),
        Command::PoseSim { out, scene_out, .. } => commands::pose_sim(&ctx, out, scene_out.as_deref()),
    }
    .map(Some)
}

/// Command-line values win over the configuration file.
fn apply_flags(config: &mut Config, command: &Command) {
    fn set<T: Copy>(slot: &mut T, value: Option<T>) {
        if let Some(v) = value {
            *slot = v;
        }
    }
    let outliers = |config: &mut Config, flags: &OutlierFlags| {
        set(&mut config.outliers.radius, flags.radius);
        set(&mut config.outliers.k_min, flags.k_min);
    };
    match command {
        Command::Clean { outliers: o, .. } => outliers(config, o),
        Command::Ground { outliers: o, initial_cell, min_cell, dist_thresh, angle_thresh, .. } => {
            outliers(config, o);
            set(&mut config.filter.initial_cell, *initial_cell);
            set(&mut config.filter.min_cell, *min_cell);
            set(&mut config.filter.dist_thresh, *dist_thresh);
            set(&mut config.filter.angle_thresh, *angle_thresh);
        }
        Command::Dem { cell, .. } => set(&mut config.dem.cell, *cell),
        Command::Intensity { resolution, .. } => set(&mut config.raster.resolution, *resolution),
        Command::Tiles { window, stride, .. } => {
            set(&mut config.raster.window, *window);
            set(&mut config.raster.stride, *stride);
        }
        Command::Glyph { target_size, .. } => set(&mut config.glyph.target_size, *target_size),
        Command::PoseSim { angle_deg, distance_m, pixel_sigma, outlier_fraction, no_polish, .. } => {
            set(&mut config.pose_sim.angle_deg, *angle_deg);
            set(&mut config.pose_sim.distance_m, *distance_m);
            set(&mut config.scene.pixel_sigma, *pixel_sigma);
            set(&mut config.scene.outlier_fraction, *outlier_fraction);
            if *no_polish {
                config.refine.gauss_newton.enabled = false;
            }
        }
    }
}
