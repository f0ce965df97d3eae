//! Per-pixel adaptive event detection over the frames of an animated scene.
//!
//! Frame 1 is rendered with the full sample budget everywhere and becomes
//! each pixel's reference. For every later frame a pixel traces an initial
//! batch, then alternates between a termination check and increment batches
//! until the check says stop or the budget is spent. The finished estimate is
//! compared against the reference; a gap above the threshold emits an event
//! and replaces the reference.
//!
//! Sample `i` of a pixel in a frame always uses the same random key, so every
//! adaptive run sees a prefix of exactly the samples a baseline run uses.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logstat::{one_tailed_test, student_t_cdf, t_statistic, Decision, LogLumStats};
use crate::scene::Scene;
use crate::tracer::{log_luminance, TraceDiagnostics, Tracer, DEFAULT_EPSILON};

/// How a pixel decides to stop sampling early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Full budget everywhere.
    Baseline,
    /// Stop once the gap is significantly below threshold.
    OneTailed,
    /// Stop once the gap is significantly below or above threshold.
    TwoTailed,
    /// Stop as soon as the sample-mean gap is within threshold.
    MeanOnly,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Baseline, Mode::OneTailed, Mode::TwoTailed, Mode::MeanOnly];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::OneTailed => "one_tailed",
            Mode::TwoTailed => "two_tailed",
            Mode::MeanOnly => "mean_only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown mode '{s}' (expected baseline, one_tailed, two_tailed or mean_only)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: Mode,
    /// Sample budget per pixel and frame.
    pub max_spp: u32,
    pub initial_batch: u32,
    pub batch: u32,
    /// Significance level of the termination test.
    pub alpha: f64,
    /// Overrides the scene's contrast threshold when set.
    pub theta: Option<f64>,
    /// Luminance floor before taking logarithms.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: Mode::OneTailed,
            max_spp: 4096,
            initial_batch: 256,
            batch: 64,
            alpha: 0.05,
            theta: None,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn with_mode(&self, mode: Mode) -> SimConfig {
        SimConfig { mode, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_batch < 2 {
            return Err(Error::validation("initial batch must be >= 2"));
        }
        if self.initial_batch > self.max_spp {
            return Err(Error::validation(format!(
                "initial batch {} exceeds the sample budget {}",
                self.initial_batch, self.max_spp
            )));
        }
        if self.batch < 1 {
            return Err(Error::validation("increment batch must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::validation("epsilon must be positive"));
        }
        if let Some(t) = self.theta {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::validation(format!("threshold must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn threshold(&self, scene: &Scene) -> f64 {
        self.theta.unwrap_or(scene.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Negative => -1,
            Polarity::Positive => 1,
        }
    }

    pub fn from_sign(v: i64) -> Option<Polarity> {
        match v {
            -1 => Some(Polarity::Negative),
            1 => Some(Polarity::Positive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u32,
    pub y: u32,
    /// 1-based frame index.
    pub s: u32,
    pub polarity: Polarity,
}

impl Event {
    fn order_key(&self) -> (u32, u32, u32) {
        (self.s, self.y, self.x)
    }
}

/// Events ordered by `(s, y, x)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(mut events: Vec<Event>) -> Self {
        events.sort_by_key(Event::order_key);
        EventStream { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    /// Events at pixel `(x, y)` in frame order.
    pub fn at_pixel(&self, x: u32, y: u32) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.x == x && e.y == y)
    }
}

impl<'a> IntoIterator for &'a EventStream {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;
    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

/// Per-pixel detector: reference statistics from the last event (or frame 1)
/// plus the statistics of the frame being sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelDetectorState {
    pub x: u32,
    pub y: u32,
    pub reference: LogLumStats,
    pub working: LogLumStats,
}

/// Decides whether a pixel may stop sampling at a checkpoint.
pub fn termination_rule(
    mode: Mode,
    reference: &LogLumStats,
    working: &LogLumStats,
    threshold: f64,
    alpha: f64,
) -> Result<Decision> {
    Ok(match mode {
        Mode::Baseline => Decision::Continue,
        Mode::OneTailed => one_tailed_test(reference, working, threshold, alpha)?.decision,
        Mode::TwoTailed => {
            let t = t_statistic(reference, working, threshold)?;
            let lower = student_t_cdf(t, (working.n - 1) as f64)?;
            if lower < alpha || 1.0 - lower < alpha {
                Decision::Terminate
            } else {
                Decision::Continue
            }
        }
        Mode::MeanOnly => {
            if reference.n < 1 || working.n < 1 {
                return Err(Error::InvalidArgument("mean-only rule needs samples".into()));
            }
            if (working.mean - reference.mean).abs() <= threshold {
                Decision::Terminate
            } else {
                Decision::Continue
            }
        }
    })
}

/// What happened at every pixel of one frame. Arrays are row-major, `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub frame: u32,
    pub width: u32,
    pub height: u32,
    pub sample_counts: Vec<u32>,
    /// Final mean log-luminance per pixel.
    pub mean_log: Vec<f64>,
    /// Unbiased variance of the log-luminance samples per pixel.
    pub variance_log: Vec<f64>,
    pub events: usize,
    pub diagnostics: TraceDiagnostics,
    pub wall_time: Duration,
}

impl FrameReport {
    pub fn total_samples(&self) -> u64 {
        self.sample_counts.iter().map(|&c| c as u64).sum()
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        (y * self.width + x) as usize
    }

    /// Sample counts divided by `max_spp`.
    pub fn sample_ratio(&self, max_spp: u32) -> Vec<f32> {
        self.sample_counts
            .iter()
            .map(|&c| c as f32 / max_spp as f32)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub events: EventStream,
    pub reports: Vec<FrameReport>,
    pub wall_time: Duration,
}

impl SimOutput {
    pub fn total_samples(&self) -> u64 {
        self.reports.iter().map(FrameReport::total_samples).sum()
    }

    pub fn diagnostics(&self) -> TraceDiagnostics {
        let mut d = TraceDiagnostics::default();
        for r in &self.reports {
            d += r.diagnostics;
        }
        d
    }
}

struct PixelResult {
    stats: LogLumStats,
    count: u32,
    diag: TraceDiagnostics,
}

fn trace_into(
    tracer: &Tracer,
    x: u32,
    y: u32,
    n: u32,
    start: u32,
    epsilon: f64,
    stats: &mut LogLumStats,
    diag: &mut TraceDiagnostics,
) {
    for i in start..start + n {
        let l = tracer.luminance(x, y, i as u64).unwrap_or_else(|| {
            diag.clamped += 1;
            0.0
        });
        stats.push(log_luminance(l, epsilon));
    }
    diag.traced += n as u64;
}

fn sample_pixel(
    tracer: &Tracer,
    cfg: &SimConfig,
    threshold: f64,
    x: u32,
    y: u32,
    reference: Option<&LogLumStats>,
) -> Result<PixelResult> {
    let mut stats = LogLumStats::new();
    let mut diag = TraceDiagnostics::default();
    let Some(reference) = reference else {
        trace_into(tracer, x, y, cfg.max_spp, 0, cfg.epsilon, &mut stats, &mut diag);
        return Ok(PixelResult { stats, count: cfg.max_spp, diag });
    };
    trace_into(tracer, x, y, cfg.initial_batch, 0, cfg.epsilon, &mut stats, &mut diag);
    let mut total = cfg.initial_batch;
    while total < cfg.max_spp {
        if termination_rule(cfg.mode, reference, &stats, threshold, cfg.alpha)? == Decision::Terminate {
            break;
        }
        // last batch is truncated so the budget is never exceeded
        let n = cfg.batch.min(cfg.max_spp - total);
        trace_into(tracer, x, y, n, total, cfg.epsilon, &mut stats, &mut diag);
        total += n;
    }
    Ok(PixelResult { stats, count: total, diag })
}

/// Runs the detector over every frame of `scene`.
///
/// Pixels are processed in parallel on the current rayon pool; results do
/// not depend on the pool size.
pub fn simulate(scene: &Scene, cfg: &SimConfig) -> Result<SimOutput> {
    simulate_with(scene, cfg, |_| {})
}

/// [`simulate`] with a callback invoked after each finished frame.
pub fn simulate_with(
    scene: &Scene,
    cfg: &SimConfig,
    mut on_frame: impl FnMut(&FrameReport),
) -> Result<SimOutput> {
    cfg.validate()?;
    scene.validate()?;
    let threshold = cfg.threshold(scene);
    let (w, h) = (scene.width(), scene.height());
    let start = Instant::now();

    let mut states: Vec<PixelDetectorState> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| PixelDetectorState {
            x,
            y,
            reference: LogLumStats::new(),
            working: LogLumStats::new(),
        })
        .collect();

    let mut events = Vec::new();
    let mut reports = Vec::with_capacity(scene.frames as usize);

    for s in 1..=scene.frames {
        let frame_start = Instant::now();
        let geom = scene.frame(s)?;
        let tracer = Tracer::new(&geom, cfg.seed);
        let first = s == 1;

        let results: Vec<(u32, Option<Event>, TraceDiagnostics)> = states
            .par_iter_mut()
            .map(|st| -> Result<_> {
                let r = sample_pixel(
                    &tracer,
                    cfg,
                    threshold,
                    st.x,
                    st.y,
                    (!first).then_some(&st.reference),
                )?;
                st.working = r.stats;
                if first {
                    st.reference = r.stats;
                    return Ok((r.count, None, r.diag));
                }
                let gap = st.working.mean - st.reference.mean;
                let event = (gap.abs() > threshold).then(|| {
                    st.reference = st.working;
                    Event {
                        x: st.x,
                        y: st.y,
                        s,
                        polarity: if gap > 0.0 { Polarity::Positive } else { Polarity::Negative },
                    }
                });
                Ok((r.count, event, r.diag))
            })
            .collect::<Result<_>>()?;

        let mut diagnostics = TraceDiagnostics::default();
        let mut sample_counts = Vec::with_capacity(results.len());
        let mut frame_events = 0;
        for (count, event, diag) in results {
            sample_counts.push(count);
            diagnostics += diag;
            if let Some(e) = event {
                events.push(e);
                frame_events += 1;
            }
        }
        let report = FrameReport {
            frame: s,
            width: w,
            height: h,
            sample_counts,
            mean_log: states.iter().map(|st| st.working.mean).collect(),
            variance_log: states.iter().map(|st| st.working.variance()).collect(),
            events: frame_events,
            diagnostics,
            wall_time: frame_start.elapsed(),
        };
        on_frame(&report);
        reports.push(report);
    }

    Ok(SimOutput {
        events: EventStream::new(events),
        reports,
        wall_time: start.elapsed(),
    })
}

/// Per-frame images of the final mean log-luminance, row-major.
pub fn render_reference_frames(scene: &Scene, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    Ok(simulate(scene, cfg)?
        .reports
        .into_iter()
        .map(|r| r.mean_log)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: f64, var: f64, n: u64) -> LogLumStats {
        LogLumStats { n, mean, m2: var * (n - 1) as f64 }
    }

    #[test]
    fn rule_examples() {
        let a = stats(0.0, 0.02, 256);
        let b = stats(0.1, 0.02, 256);
        assert_eq!(termination_rule(Mode::OneTailed, &a, &b, 0.5, 0.05).unwrap(), Decision::Terminate);

        let a = stats(0.0, 0.01, 256);
        let b = stats(0.3, 0.01, 256);
        assert_eq!(termination_rule(Mode::MeanOnly, &a, &b, 0.5, 0.05).unwrap(), Decision::Terminate);

        let a = stats(0.0, 0.01, 256);
        let b = stats(0.6, 0.01, 256);
        assert_eq!(termination_rule(Mode::TwoTailed, &a, &b, 0.5, 0.05).unwrap(), Decision::Terminate);
        assert_eq!(termination_rule(Mode::OneTailed, &a, &b, 0.5, 0.05).unwrap(), Decision::Continue);
        assert_eq!(termination_rule(Mode::MeanOnly, &a, &b, 0.5, 0.05).unwrap(), Decision::Continue);
        assert_eq!(termination_rule(Mode::Baseline, &a, &b, 0.5, 0.05).unwrap(), Decision::Continue);
    }

    #[test]
    fn mode_parsing() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("one-tailed".parse::<Mode>().unwrap(), Mode::OneTailed);
        assert!("welch".parse::<Mode>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let bad = [
            SimConfig { initial_batch: 5000, ..Default::default() },
            SimConfig { batch: 0, ..Default::default() },
            SimConfig { alpha: 0.0, ..Default::default() },
            SimConfig { alpha: 1.0, ..Default::default() },
            SimConfig { initial_batch: 1, ..Default::default() },
            SimConfig { epsilon: 0.0, ..Default::default() },
            SimConfig { theta: Some(-1.0), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn stream_is_sorted() {
        let e = |x, y, s| Event { x, y, s, polarity: Polarity::Positive };
        let st = EventStream::new(vec![e(1, 0, 3), e(0, 1, 2), e(0, 0, 2), e(2, 0, 2)]);
        let keys: Vec<_> = st.iter().map(|e| (e.s, e.y, e.x)).collect();
        assert_eq!(keys, vec![(2, 0, 0), (2, 0, 2), (2, 1, 0), (3, 0, 1)]);
    }
}
