//! Renders an event stream with adaptive sampling and writes it next to the
//! per-frame sample-count maps.
//!
//! cargo run --release --example render_events -- scenes/moving_emitter.json out/

use std::env;
use std::path::PathBuf;

use evrender::eventsim::{simulate_with, Mode, SimConfig};
use evrender::evio::{write_events, write_pfm, FloatImage};
use evrender::scene::load_scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = env::args().skip(1).collect();
    let path = args.first().map(String::as_str).unwrap_or("scenes/moving_emitter.json");
    let out = PathBuf::from(args.get(1).map(String::as_str).unwrap_or("render_out"));
    std::fs::create_dir_all(&out)?;

    let scene = load_scene(path)?.with_resolution(48, 48)?.with_frames(16)?;
    let cfg = SimConfig { mode: Mode::OneTailed, max_spp: 1024, seed: 1, ..Default::default() };

    let run = simulate_with(&scene, &cfg, |r| {
        let counts: Vec<f64> = r.sample_counts.iter().map(|&c| c as f64).collect();
        let img = FloatImage::from_f64(r.width, r.height, &counts).expect("finite counts");
        write_pfm(out.join(format!("count_{:04}.pfm", r.frame)), &img).expect("writable output");
        println!("frame {:>3}: {:>5} events, {:>9} paths", r.frame, r.events, r.total_samples());
    })?;
    write_events(out.join("events.csv"), &run.events)?;
    println!("{} events in {:.2} s -> {}", run.events.len(), run.wall_time.as_secs_f64(), out.display());
    Ok(())
}
