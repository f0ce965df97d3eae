//! Event-camera simulation by Monte Carlo path tracing with per-pixel
//! adaptive sample counts.
//!
//! A pixel's brightness at each frame is estimated from log-luminance path
//! samples. Instead of spending the full sample budget everywhere, each pixel
//! keeps sampling only until a one-sided Student's t-test is confident that
//! its brightness gap to the last event stays below the contrast threshold.
//!
//! ```no_run
//! use evrender::{eventsim::{simulate, Mode, SimConfig}, scene::load_scene};
//!
//! let scene = load_scene("scenes/moving_emitter.json").unwrap();
//! let cfg = SimConfig { mode: Mode::OneTailed, max_spp: 1024, ..Default::default() };
//! let out = simulate(&scene, &cfg).unwrap();
//! println!("{} events from {} paths", out.events.len(), out.total_samples());
//! ```

pub mod cli;
pub mod error;
pub mod eventsim;
pub mod evio;
pub mod logstat;
pub mod math;
pub mod metrics;
pub mod rng;
pub mod scene;
pub mod tracer;

pub use error::{Error, Result};
