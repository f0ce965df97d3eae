//! Follows one pixel through time: mean log-luminance and its standard error
//! for baseline and one_tailed, plus how many samples each frame used.
//!
//! cargo run --release --example pixel_trace -- 20 14
//!
//! Without coordinates the pixel with the most baseline events is used.

use std::collections::HashMap;
use std::env;

use evrender::eventsim::{simulate, Mode, SimConfig};
use evrender::scene::load_scene;

fn main() -> evrender::Result<()> {
    let args: Vec<String> = env::args().skip(1).collect();
    let scene = load_scene("scenes/moving_emitter.json")?.with_resolution(40, 40)?.with_frames(30)?;
    let cfg = SimConfig { mode: Mode::Baseline, max_spp: 2048, seed: 3, ..Default::default() };
    let base = simulate(&scene, &cfg)?;
    let (x, y) = match (args.first(), args.get(1)) {
        (Some(x), Some(y)) => (x.parse().expect("x"), y.parse().expect("y")),
        _ => {
            let mut hits = HashMap::new();
            for e in base.events.iter() {
                *hits.entry((e.x, e.y)).or_insert(0u32) += 1;
            }
            hits.into_iter().max_by_key(|&((x, y), n)| (n, std::cmp::Reverse((y, x)))).map_or((20, 14), |(q, _)| q)
        }
    };
    println!("pixel ({x}, {y})");
    let ours = simulate(&scene, &cfg.with_mode(Mode::OneTailed))?;

    println!("frame   base ln L    ±se    ours ln L    ±se   spp  event");
    for (b, o) in base.reports.iter().zip(&ours.reports) {
        let i = b.index(x, y);
        let se = |r: &evrender::eventsim::FrameReport| (r.variance_log[i] / r.sample_counts[i] as f64).sqrt();
        let fired = ours.events.at_pixel(x, y).find(|e| e.s == o.frame).map_or("", |e| {
            if e.polarity.sign() > 0 { "+" } else { "-" }
        });
        println!(
            "{:>5} {:>11.4} {:>7.4} {:>11.4} {:>7.4} {:>5} {:>5}",
            b.frame, b.mean_log[i], se(b), o.mean_log[i], se(o), o.sample_counts[i], fired
        );
    }
    Ok(())
}
