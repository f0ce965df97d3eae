//! Speedup of one_tailed over baseline as the resolution grows. On a scene
//! with few events the ratio should barely move.
//!
//! cargo run --release --example speedup_vs_size -- scenes/low_event.json 25,50,100

use std::env;

use evrender::eventsim::{simulate, Mode, SimConfig};
use evrender::evio::format_speedup;
use evrender::scene::load_scene;

fn main() -> evrender::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let path = args.first().map(String::as_str).unwrap_or("scenes/low_event.json");
    let sizes: Vec<u32> = args
        .get(1)
        .map(String::as_str)
        .unwrap_or("25,50,100")
        .split(',')
        .map(|s| s.trim().parse().expect("size"))
        .collect();
    let base = load_scene(path)?.with_frames(12)?;
    let cfg = SimConfig { mode: Mode::Baseline, max_spp: 1024, seed: 11, ..Default::default() };

    println!("{:>6} {:>10} {:>10} {:>10} {:>9}", "size", "base s", "ours s", "paths", "speedup");
    for size in sizes {
        let scene = base.with_resolution(size, size)?;
        let b = simulate(&scene, &cfg)?;
        let o = simulate(&scene, &cfg.with_mode(Mode::OneTailed))?;
        let (tb, to) = (b.wall_time.as_secs_f64(), o.wall_time.as_secs_f64());
        println!(
            "{size:>6} {tb:>10.3} {to:>10.3} {:>10.4} {:>9}",
            o.total_samples() as f64 / b.total_samples() as f64,
            format_speedup(tb / to)
        );
    }
    Ok(())
}
