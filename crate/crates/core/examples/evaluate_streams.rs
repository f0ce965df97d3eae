//! Scores one event file against another. With no arguments it renders a
//! small baseline and one_tailed pair first.
//!
//! cargo run --release --example evaluate_streams -- ref.csv test.csv 100 100 60

use std::env;

use evrender::eventsim::{simulate, Mode, SimConfig};
use evrender::evio::read_events;
use evrender::metrics::{compare_streams, DEFAULT_TAU};
use evrender::scene::load_scene;

fn main() -> evrender::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let (reference, test, w, h, n) = if args.len() >= 5 {
        let dim = |i: usize| args[i].parse::<u32>().expect("dimension");
        (read_events(&args[0])?, read_events(&args[1])?, dim(2), dim(3), dim(4))
    } else {
        let scene = load_scene("scenes/moving_emitter.json")?.with_resolution(32, 32)?.with_frames(12)?;
        let cfg = SimConfig { mode: Mode::Baseline, max_spp: 1024, seed: 5, ..Default::default() };
        let base = simulate(&scene, &cfg)?;
        let ours = simulate(&scene, &cfg.with_mode(Mode::OneTailed))?;
        (base.events, ours.events, 32, 32, 12)
    };

    let c = compare_streams(&reference, &test, w, h, n, DEFAULT_TAU)?;
    println!("reference {} events, test {} events", reference.len(), test.len());
    println!("rmse {:.6}  psnr {:.3} dB  f1 {:.5}  pscd {:.3e}", c.rmse, c.psnr, c.f1, c.pscd);
    Ok(())
}
