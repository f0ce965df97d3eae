//! White furnace check: a white diffuser under a uniform sky must look exactly
//! as bright as the sky.
//!
//! cargo run --release --example furnace -- 4096

use std::env;

use evrender::logstat::LogLumStats;
use evrender::scene::load_scene;
use evrender::tracer::trace_paths;

fn main() -> evrender::Result<()> {
    let n: u64 = env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4096);
    let scene = load_scene("scenes/furnace.json")?;
    let expected = scene.environment_radiance().luma();
    let (w, h) = (scene.width(), scene.height());

    for (x, y) in [(w / 2, h / 2), (w / 4, h / 3), (0, 0)] {
        let (samples, _) = trace_paths(&scene, (x, y), 1, n, 0, 9)?;
        let l: Vec<f64> = samples.iter().map(|s| s.luminance).collect();
        let st = LogLumStats::from_values(&l);
        let z = (st.mean - expected) / st.std_error().max(f64::MIN_POSITIVE);
        println!("pixel ({x:>3},{y:>3}): mean {:.5} expected {expected:.5} ({z:+.2} se)", st.mean);
    }
    Ok(())
}
