//! Runs every termination mode on one scene and compares each against the
//! full-budget baseline.
//!
//! cargo run --release --example ablation -- scenes/moving_emitter.json 100 60 2048

use std::env;

use evrender::eventsim::{simulate, Mode, SimConfig};
use evrender::evio::{format_report_table, ReportRow};
use evrender::metrics::{compare_streams, DEFAULT_TAU};
use evrender::scene::load_scene;

fn main() -> evrender::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let path = args.first().map(String::as_str).unwrap_or("scenes/moving_emitter.json");
    let size: u32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let frames: u32 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let spp: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1024);

    let scene = load_scene(path)?.with_resolution(size, size)?.with_frames(frames)?;
    let base_cfg = SimConfig { mode: Mode::Baseline, max_spp: spp, seed: 7, ..Default::default() };

    let baseline = simulate(&scene, &base_cfg)?;
    println!(
        "baseline: {} events, {} paths, {:.2} s",
        baseline.events.len(),
        baseline.total_samples(),
        baseline.wall_time.as_secs_f64()
    );

    let mut rows = Vec::new();
    for mode in [Mode::OneTailed, Mode::TwoTailed, Mode::MeanOnly] {
        let run = simulate(&scene, &base_cfg.with_mode(mode))?;
        let cmp = compare_streams(&baseline.events, &run.events, size, size, frames, DEFAULT_TAU)?;
        println!(
            "{mode}: {} events, path ratio {:.4}",
            run.events.len(),
            run.total_samples() as f64 / baseline.total_samples() as f64
        );
        rows.push(ReportRow {
            mode: mode.to_string(),
            rmse: cmp.rmse,
            psnr: cmp.psnr,
            f1: cmp.f1,
            pscd: cmp.pscd,
            time_s: run.wall_time.as_secs_f64(),
            baseline_time_s: baseline.wall_time.as_secs_f64(),
        });
    }
    print!("{}", format_report_table(&rows));
    Ok(())
}
