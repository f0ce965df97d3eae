//! Command-line front end: `render`, `eval` and `bench`.
//!
//! Exit codes: 0 success, 1 user error (bad flags, unreadable or invalid
//! inputs), 2 internal error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eventsim::{simulate, Mode, SimConfig, SimOutput};
use crate::evio::{self, BenchRow, FloatImage, ReportRow};
use crate::metrics::{compare_streams, DEFAULT_TAU};
use crate::scene::{load_scene, Scene};
use crate::tracer::DEFAULT_EPSILON;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const EVENTS_FILE: &str = "events.csv";
pub const COUNTS_DIR: &str = "counts";
pub const MEANS_DIR: &str = "mu";

#[derive(Debug, Parser)]
#[command(name = "evrender", version, about = "Physically based event-camera rendering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an event stream from a scene.
    Render(RenderArgs),
    /// Compare two event files.
    Eval(EvalArgs),
    /// Measure adaptive speedup over the baseline at several resolutions.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Scene description (JSON).
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Maximum samples per pixel and frame.
    #[arg(long, default_value_t = 4096)]
    pub spp: u32,
    /// Number of frames; defaults to the scene's value.
    #[arg(long)]
    pub frames: Option<u32>,
    /// Image width; defaults to the scene's value.
    #[arg(long)]
    pub width: Option<u32>,
    /// Image height; defaults to the scene's value.
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Contrast threshold; defaults to the scene's value.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Luminance floor applied before the logarithm.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long = "init-batch", default_value_t = 256)]
    pub init_batch: u32,
    #[arg(long, default_value_t = 64)]
    pub batch: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "EVRENDER_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value = "one_tailed", value_parser = parse_mode)]
    pub mode: Mode,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long, conflicts_with = "scene")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Reference event file (usually the baseline).
    #[arg(long)]
    pub a: PathBuf,
    /// Event file under test.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long)]
    pub frames: u32,
    /// F1 match radius in pixel/frame units.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Report path (CSV); a text table is written next to it.
    #[arg(long, default_value = "report.csv")]
    pub out: PathBuf,
    /// Label for the compared stream in the report.
    #[arg(long, default_value = "b")]
    pub label: String,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Square resolutions to test, e.g. `50,100,200`.
    #[arg(long, value_delimiter = ',', default_values_t = vec![50u32, 100, 200])]
    pub sizes: Vec<u32>,
    /// Modes to compare against the baseline.
    #[arg(long, value_delimiter = ',', default_values = ["one_tailed"], value_parser = parse_mode)]
    pub modes: Vec<Mode>,
    /// Output CSV; a text table is written next to it.
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

impl SimArgs {
    pub fn config(&self, mode: Mode) -> SimConfig {
        SimConfig {
            mode,
            max_spp: self.spp,
            initial_batch: self.init_batch,
            batch: self.batch,
            alpha: self.alpha,
            theta: self.theta,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }

    fn scene_path(&self) -> Result<&Path> {
        self.scene
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--scene is required".into()))
    }

    /// Loads the scene and applies resolution / frame overrides.
    pub fn load(&self) -> Result<Scene> {
        let mut scene = load_scene(self.scene_path()?)?;
        if let Some(f) = self.frames {
            scene = scene.with_frames(f)?;
        }
        let (w, h) = (
            self.width.unwrap_or(scene.width()),
            self.height.unwrap_or(scene.height()),
        );
        scene.with_resolution(w, h)
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestOutputs {
    pub events: PathBuf,
    pub counts_dir: PathBuf,
    pub mu_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTimings {
    pub load_s: f64,
    pub simulate_s: f64,
    pub write_s: f64,
}

/// Everything needed to reproduce a `render` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub scene_path: PathBuf,
    pub scene_sha256: String,
    pub width: u32,
    pub height: u32,
    pub frames: u32,
    pub threshold: f64,
    pub seed: u64,
    pub config: SimConfig,
    pub threads: usize,
    pub outputs: ManifestOutputs,
    pub timings: ManifestTimings,
    pub total_paths: u64,
    pub clamped_samples: u64,
    pub events: usize,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::validation(format!("{}: bad manifest: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn frame_file(dir: &Path, prefix: &str, frame: u32) -> PathBuf {
    dir.join(format!("{prefix}_{frame:04}.pfm"))
}

/// Writes the event file and per-frame sample-count and mean images.
pub fn write_outputs(out: &Path, output: &SimOutput) -> Result<ManifestOutputs> {
    let counts_dir = out.join(COUNTS_DIR);
    let mu_dir = out.join(MEANS_DIR);
    create_dir(&counts_dir)?;
    create_dir(&mu_dir)?;
    let events = out.join(EVENTS_FILE);
    evio::write_events(&events, &output.events)?;
    for r in &output.reports {
        let counts: Vec<f32> = r.sample_counts.iter().map(|&c| c as f32).collect();
        evio::write_pfm(
            frame_file(&counts_dir, "count", r.frame),
            &FloatImage::new(r.width, r.height, counts)?,
        )?;
        evio::write_pfm(
            frame_file(&mu_dir, "mu", r.frame),
            &FloatImage::from_f64(r.width, r.height, &r.mean_log)?,
        )?;
    }
    Ok(ManifestOutputs { events, counts_dir, mu_dir })
}

#[derive(Debug, Clone)]
pub struct RenderSummary {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

pub fn cmd_render(args: &RenderArgs) -> Result<RenderSummary> {
    let t0 = Instant::now();
    let (scene, config, scene_path, threads, scene_bytes) = match &args.manifest {
        Some(mpath) => {
            let m = RunManifest::load(mpath)?;
            let bytes = fs::read(&m.scene_path).map_err(|e| Error::io(&m.scene_path, e))?;
            if sha256_hex(&bytes) != m.scene_sha256 {
                return Err(Error::validation(format!(
                    "{} changed since the manifest was written (hash mismatch)",
                    m.scene_path.display()
                )));
            }
            let scene = load_scene(&m.scene_path)?
                .with_frames(m.frames)?
                .with_resolution(m.width, m.height)?;
            (scene, m.config, m.scene_path, args.sim.threads, bytes)
        }
        None => {
            let path = args.sim.scene_path()?.to_path_buf();
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let scene = args.sim.load()?;
            let config = args.sim.config(args.mode);
            (scene, config, path, args.sim.threads, bytes)
        }
    };
    config.validate()?;
    let load_s = t0.elapsed().as_secs_f64();

    let output = with_threads(threads, || simulate(&scene, &config))??;
    let simulate_s = output.wall_time.as_secs_f64();

    let t1 = Instant::now();
    create_dir(&args.out)?;
    let outputs = write_outputs(&args.out, &output)?;
    let write_s = t1.elapsed().as_secs_f64();

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scene_path: fs::canonicalize(&scene_path).unwrap_or(scene_path),
        scene_sha256: sha256_hex(&scene_bytes),
        width: scene.width(),
        height: scene.height(),
        frames: scene.frames,
        threshold: config.threshold(&scene),
        seed: config.seed,
        threads,
        outputs,
        timings: ManifestTimings { load_s, simulate_s, write_s },
        total_paths: output.total_samples(),
        clamped_samples: output.diagnostics().clamped,
        events: output.events.len(),
        config,
    };
    let manifest_path = args.out.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    evio::write_atomic(&manifest_path, json.as_bytes())?;
    Ok(RenderSummary { manifest, manifest_path })
}

/// Simulation wall time recorded in the manifest next to an event file, if any.
fn sibling_time(events: &Path) -> Option<f64> {
    let dir = events.parent()?;
    let m = RunManifest::load(&dir.join(MANIFEST_FILE)).ok()?;
    Some(m.timings.simulate_s)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<ReportRow> {
    let a = evio::read_events(&args.a)?;
    let b = evio::read_events(&args.b)?;
    let cmp = compare_streams(&a, &b, args.width, args.height, args.frames, args.tau)?;
    let row = ReportRow {
        mode: args.label.clone(),
        rmse: cmp.rmse,
        psnr: cmp.psnr,
        f1: cmp.f1,
        pscd: cmp.pscd,
        time_s: sibling_time(&args.b).unwrap_or(f64::NAN),
        baseline_time_s: sibling_time(&args.a).unwrap_or(f64::NAN),
    };
    evio::write_report(&args.out, std::slice::from_ref(&row))?;
    Ok(row)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.sizes.is_empty() {
        return Err(Error::InvalidArgument("--sizes needs at least one resolution".into()));
    }
    let base_scene = args.sim.load()?;
    let mut rows = Vec::new();
    for &size in &args.sizes {
        let scene = base_scene.with_resolution(size, size)?;
        let base_cfg = args.sim.config(Mode::Baseline);
        let base = with_threads(args.sim.threads, || simulate(&scene, &base_cfg))??;
        for &mode in &args.modes {
            let run = if mode == Mode::Baseline {
                base.clone()
            } else {
                let cfg = args.sim.config(mode);
                with_threads(args.sim.threads, || simulate(&scene, &cfg))??
            };
            rows.push(BenchRow {
                width: size,
                height: size,
                mode: mode.to_string(),
                baseline_time_s: base.wall_time.as_secs_f64(),
                time_s: run.wall_time.as_secs_f64(),
                baseline_paths: base.total_samples(),
                paths: run.total_samples(),
            });
        }
    }
    evio::write_bench(&args.out, &rows)?;
    Ok(rows)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_user_error() {
        1
    } else {
        2
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Render(a) => cmd_render(a).map(|s| {
            let m = &s.manifest;
            println!(
                "{} mode: {} events, {} paths traced, {:.3} s simulate, {} clamped samples",
                m.config.mode, m.events, m.total_paths, m.timings.simulate_s, m.clamped_samples
            );
            println!("wrote {}", s.manifest_path.display());
        }),
        Command::Eval(a) => cmd_eval(a).map(|row| {
            print!("{}", evio::format_report_table(std::slice::from_ref(&row)));
            println!("wrote {}", a.out.display());
        }),
        Command::Bench(a) => cmd_bench(a).map(|rows| {
            print!("{}", evio::format_bench_table(&rows));
            println!("wrote {}", a.out.display());
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
