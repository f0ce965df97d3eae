use std::path::Path;

use evrender::eventsim::{simulate, simulate_with, Mode, SimConfig, SimOutput};
use evrender::logstat::LogLumStats;
use evrender::scene::{load_scene, Scene};
use evrender::tracer::{log_samples, trace_paths, DEFAULT_EPSILON};

const SPP: u32 = 512;

fn small(name: &str, size: u32, frames: u32) -> Scene {
    load_scene(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name))
        .and_then(|s| s.with_resolution(size, size))
        .and_then(|s| s.with_frames(frames))
        .unwrap()
}

fn run(scene: &Scene, mode: Mode) -> SimOutput {
    simulate(scene, &SimConfig { mode, max_spp: SPP, seed: 3, ..Default::default() }).unwrap()
}

#[test]
fn sample_counts_follow_the_batch_schedule() {
    let scene = small("moving_emitter.json", 16, 8);
    for mode in [Mode::OneTailed, Mode::TwoTailed, Mode::MeanOnly] {
        let out = run(&scene, mode);
        assert!(out.reports[0].sample_counts.iter().all(|&n| n == SPP));
        for r in &out.reports[1..] {
            for &n in &r.sample_counts {
                assert!((256..=SPP).contains(&n));
                assert!((n - 256) % 64 == 0 || n == SPP, "{mode}: {n}");
            }
        }
    }
    let base = run(&scene, Mode::Baseline);
    assert!(base.reports.iter().all(|r| r.sample_counts.iter().all(|&n| n == SPP)));
}

#[test]
fn odd_budgets_truncate_the_last_batch() {
    let scene = small("moving_emitter.json", 8, 4);
    let cfg = SimConfig { mode: Mode::Baseline, max_spp: 300, ..Default::default() };
    let out = simulate(&scene, &SimConfig { mode: Mode::TwoTailed, ..cfg.clone() }).unwrap();
    assert!(out.reports.iter().flat_map(|r| &r.sample_counts).all(|&n| n <= 300));
    let base = simulate(&scene, &cfg).unwrap();
    assert_eq!(base.total_samples(), 8 * 8 * 4 * 300);
}

#[test]
fn adaptive_statistics_use_a_prefix_of_the_baseline_samples() {
    let scene = small("moving_emitter.json", 12, 6);
    let cfg = SimConfig { mode: Mode::OneTailed, max_spp: SPP, seed: 3, ..Default::default() };
    let out = simulate(&scene, &cfg).unwrap();
    let base = run(&scene, Mode::Baseline);
    // frame 1 is identical to the baseline
    assert_eq!(out.reports[0].mean_log, base.reports[0].mean_log);
    let r = &out.reports[4];
    for (x, y) in [(0, 0), (5, 7), (11, 11)] {
        let i = r.index(x, y);
        let n = r.sample_counts[i] as u64;
        let (samples, _) = trace_paths(&scene, (x, y), r.frame, n, 0, cfg.seed).unwrap();
        let direct = LogLumStats::from_values(&log_samples(&samples, DEFAULT_EPSILON));
        assert_eq!(direct.mean, r.mean_log[i]);
    }
}

#[test]
fn at_most_one_event_per_pixel_and_frame() {
    let scene = small("moving_emitter.json", 20, 10);
    for mode in Mode::ALL {
        let out = run(&scene, mode);
        let ev = out.events.events();
        assert!(ev.windows(2).all(|w| (w[0].s, w[0].y, w[0].x) < (w[1].s, w[1].y, w[1].x)));
        assert!(ev.iter().all(|e| e.s >= 2 && e.s <= 10));
        let per_frame: usize = out.reports.iter().map(|r| r.events).sum();
        assert_eq!(per_frame, ev.len());
    }
}

#[test]
fn events_flip_the_reference_and_nothing_else_does() {
    // replay each pixel's reference from the reports and check every event against it
    let scene = small("moving_emitter.json", 20, 12);
    let out = run(&scene, Mode::OneTailed);
    let threshold = scene.threshold;
    let n = out.reports[0].mean_log.len();
    let mut reference = out.reports[0].mean_log.clone();
    let w = scene.width();
    for r in &out.reports[1..] {
        for i in 0..n {
            let gap = r.mean_log[i] - reference[i];
            let (x, y) = (i as u32 % w, i as u32 / w);
            let emitted = out.events.at_pixel(x, y).find(|e| e.s == r.frame);
            match emitted {
                Some(e) => {
                    assert!(gap.abs() > threshold);
                    assert_eq!(e.polarity.sign() as f64, gap.signum());
                    reference[i] = r.mean_log[i];
                }
                None => assert!(gap.abs() <= threshold),
            }
        }
    }
    assert!(!out.events.is_empty(), "the moving emitter must produce events");
}

#[test]
fn adaptive_modes_never_trace_more_than_baseline() {
    let scene = small("moving_emitter.json", 16, 8);
    let base = run(&scene, Mode::Baseline).total_samples();
    for mode in [Mode::OneTailed, Mode::TwoTailed, Mode::MeanOnly] {
        assert!(run(&scene, mode).total_samples() < base);
    }
}

#[test]
fn frame_callback_sees_every_frame() {
    let scene = small("static.json", 6, 5);
    let mut seen = Vec::new();
    let cfg = SimConfig { mode: Mode::OneTailed, max_spp: 256, ..Default::default() };
    simulate_with(&scene, &cfg, |r| seen.push(r.frame)).unwrap();
    assert_eq!(seen, vec![1, 2, 3, 4, 5]);
}

#[test]
fn invalid_configs_are_rejected() {
    let scene = small("static.json", 4, 3);
    let bad = [
        SimConfig { initial_batch: 512, max_spp: 256, ..Default::default() },
        SimConfig { batch: 0, ..Default::default() },
        SimConfig { alpha: 1.0, ..Default::default() },
        SimConfig { epsilon: 0.0, ..Default::default() },
        SimConfig { theta: Some(-1.0), ..Default::default() },
    ];
    for cfg in bad {
        assert!(simulate(&scene, &cfg).is_err(), "{cfg:?}");
    }
}
