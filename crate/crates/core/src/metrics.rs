//! Comparison metrics between two event streams: frame-based RMSE / PSNR and
//! polarity-aware F1 and chamfer distance on signed spatiotemporal point clouds.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::eventsim::{EventStream, Polarity};

/// Default F1 match radius in (pixel, pixel, frame) units.
pub const DEFAULT_TAU: f64 = 2.0;

pub const NEGATIVE_VALUE: f64 = 0.0;
pub const NULL_VALUE: f64 = 0.5;
pub const POSITIVE_VALUE: f64 = 1.0;

/// One frame of an event video: 0.0 negative, 0.5 no event, 1.0 positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrame {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl EventFrame {
    pub fn null(width: u32, height: u32) -> Self {
        EventFrame {
            width,
            height,
            values: vec![NULL_VALUE; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[(y * self.width + x) as usize]
    }
}

/// Renders a stream into `frames` event frames (index 0 holds frame `s = 1`).
pub fn events_to_frames(
    stream: &EventStream,
    width: u32,
    height: u32,
    frames: u32,
) -> Result<Vec<EventFrame>> {
    let mut out = vec![EventFrame::null(width, height); frames as usize];
    for e in stream {
        if e.x >= width || e.y >= height || e.s < 1 || e.s > frames {
            return Err(Error::OutOfRange(format!(
                "event at (x={}, y={}, s={}) outside {width}x{height}x{frames}",
                e.x, e.y, e.s
            )));
        }
        let f = &mut out[(e.s - 1) as usize];
        f.values[(e.y * width + e.x) as usize] = match e.polarity {
            Polarity::Positive => POSITIVE_VALUE,
            Polarity::Negative => NEGATIVE_VALUE,
        };
    }
    Ok(out)
}

/// Root-mean-squared error and PSNR (peak 1.0) over all pixels of all frames.
/// Identical inputs give `psnr = +∞`.
pub fn rmse_psnr(a: &[EventFrame], b: &[EventFrame]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frames vs {} frames",
            a.len(),
            b.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (fa, fb) in a.iter().zip(b) {
        if fa.width != fb.width || fa.height != fb.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                fa.width, fa.height, fb.width, fb.height
            )));
        }
        for (va, vb) in fa.values.iter().zip(&fb.values) {
            let d = va - vb;
            sum += d * d;
        }
        count += fa.values.len();
    }
    if count == 0 {
        return Err(Error::DimensionMismatch("no pixels to compare".into()));
    }
    let rmse = (sum / count as f64).sqrt();
    let psnr = if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (1.0 / rmse).log10()
    };
    Ok((rmse, psnr))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedPoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub polarity: Polarity,
}

/// Events as points `(x, y, t)` with polarity, plus the extents used to
/// normalize the axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPointCloud {
    pub points: Vec<SignedPoint>,
    pub width: f64,
    pub height: f64,
    pub frames: f64,
}

impl SignedPointCloud {
    pub fn new(points: Vec<SignedPoint>, width: u32, height: u32, frames: u32) -> Self {
        SignedPointCloud {
            points,
            width: width as f64,
            height: height as f64,
            frames: frames as f64,
        }
    }

    pub fn from_stream(stream: &EventStream, width: u32, height: u32, frames: u32) -> Self {
        let points = stream
            .iter()
            .map(|e| SignedPoint {
                x: e.x as f64,
                y: e.y as f64,
                t: e.s as f64,
                polarity: e.polarity,
            })
            .collect();
        Self::new(points, width, height, frames)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn normalized(&self) -> Vec<([f64; 3], Polarity)> {
        self.points
            .iter()
            .map(|p| ([p.x / self.width, p.y / self.height, p.t / self.frames], p.polarity))
            .collect()
    }

    fn raw(&self) -> Vec<([f64; 3], Polarity)> {
        self.points.iter().map(|p| ([p.x, p.y, p.t], p.polarity)).collect()
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

type Cell = (i64, i64, i64);

/// Uniform hash grid over the points of one polarity.
struct Grid {
    cell: f64,
    buckets: HashMap<Cell, Vec<[f64; 3]>>,
    /// Cell-index bounding box of occupied cells.
    lo: Cell,
    hi: Cell,
}

impl Grid {
    fn build(points: impl Iterator<Item = [f64; 3]>, cell: f64) -> Option<Grid> {
        let mut buckets: HashMap<Cell, Vec<[f64; 3]>> = HashMap::new();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for p in points {
            let c = Self::key(&p, cell);
            lo = (lo.0.min(c.0), lo.1.min(c.1), lo.2.min(c.2));
            hi = (hi.0.max(c.0), hi.1.max(c.1), hi.2.max(c.2));
            buckets.entry(c).or_default().push(p);
        }
        (!buckets.is_empty()).then_some(Grid { cell, buckets, lo, hi })
    }

    #[inline]
    fn key(p: &[f64; 3], cell: f64) -> Cell {
        (
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        )
    }

    /// Calls `f` for every point in cells at Chebyshev ring `r` around `c`.
    fn for_ring(&self, c: Cell, r: i64, mut f: impl FnMut(&[f64; 3])) {
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                        continue;
                    }
                    if let Some(pts) = self.buckets.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        pts.iter().for_each(&mut f);
                    }
                }
            }
        }
    }

    /// Whether any point lies within `radius` (inclusive) of `p`; `cell >= radius`.
    fn any_within(&self, p: &[f64; 3], radius: f64) -> bool {
        let c = Self::key(p, self.cell);
        let r2 = radius * radius;
        let mut found = false;
        self.for_ring(c, 0, |q| found |= dist2(p, q) <= r2);
        if !found {
            self.for_ring(c, 1, |q| found |= dist2(p, q) <= r2);
        }
        found
    }

    /// Squared distance to the nearest point.
    fn nearest2(&self, p: &[f64; 3]) -> f64 {
        let c = Self::key(p, self.cell);
        let max_ring = [
            (c.0 - self.lo.0).abs(),
            (c.0 - self.hi.0).abs(),
            (c.1 - self.lo.1).abs(),
            (c.1 - self.hi.1).abs(),
            (c.2 - self.lo.2).abs(),
            (c.2 - self.hi.2).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        let mut best = f64::INFINITY;
        for r in 0..=max_ring {
            self.for_ring(c, r, |q| best = best.min(dist2(p, q)));
            // every point in ring r + 1 is at least r cells away
            let reach = r as f64 * self.cell;
            if best.is_finite() && best <= reach * reach {
                break;
            }
        }
        best
    }
}

fn split_grids(points: &[([f64; 3], Polarity)], cell: f64) -> [Option<Grid>; 2] {
    let of = |pol: Polarity| {
        Grid::build(
            points.iter().filter(move |(_, p)| *p == pol).map(|(c, _)| *c),
            cell,
        )
    };
    [of(Polarity::Negative), of(Polarity::Positive)]
}

fn grid_for(grids: &[Option<Grid>; 2], pol: Polarity) -> Option<&Grid> {
    match pol {
        Polarity::Negative => grids[0].as_ref(),
        Polarity::Positive => grids[1].as_ref(),
    }
}

/// Polarity-aware F1: a point matches when the other cloud has a point of the
/// same polarity within Euclidean distance `tau` (pixel/frame units).
pub fn polarity_f1(a: &SignedPointCloud, b: &SignedPointCloud, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("match radius must be > 0, got {tau}")));
    }
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let pa = a.raw();
    let pb = b.raw();
    let matched_fraction = |from: &[([f64; 3], Polarity)], to: &[([f64; 3], Polarity)]| {
        let grids = split_grids(to, tau);
        let hits = from
            .iter()
            .filter(|(p, pol)| grid_for(&grids, *pol).is_some_and(|g| g.any_within(p, tau)))
            .count();
        hits as f64 / from.len() as f64
    };
    let precision = matched_fraction(&pa, &pb);
    let recall = matched_fraction(&pb, &pa);
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Distance charged to a point whose polarity is absent from the other cloud:
/// the diagonal of the unit cube.
pub const ABSENT_CLASS_DISTANCE: f64 = 1.732_050_807_568_877_2;

/// Cell edge for chamfer nearest-neighbour grids, in normalized units.
const CHAMFER_CELL: f64 = 1.0 / 32.0;

/// Polarity-aware signed chamfer distance in normalized `(x/w, y/h, t/N)` space.
pub fn signed_chamfer(a: &SignedPointCloud, b: &SignedPointCloud) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return ABSENT_CLASS_DISTANCE,
        _ => {}
    }
    let pa = a.normalized();
    let pb = b.normalized();
    let one_way = |from: &[([f64; 3], Polarity)], to: &[([f64; 3], Polarity)]| {
        let grids = split_grids(to, CHAMFER_CELL);
        let sum: f64 = from
            .iter()
            .map(|(p, pol)| match grid_for(&grids, *pol) {
                Some(g) => g.nearest2(p).sqrt(),
                None => ABSENT_CLASS_DISTANCE,
            })
            .sum();
        sum / from.len() as f64
    };
    0.5 * (one_way(&pa, &pb) + one_way(&pb, &pa))
}

/// Everything `eval` reports for one pair of streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamComparison {
    pub rmse: f64,
    pub psnr: f64,
    pub f1: f64,
    pub pscd: f64,
}

pub fn compare_streams(
    a: &EventStream,
    b: &EventStream,
    width: u32,
    height: u32,
    frames: u32,
    tau: f64,
) -> Result<StreamComparison> {
    let fa = events_to_frames(a, width, height, frames)?;
    let fb = events_to_frames(b, width, height, frames)?;
    let (rmse, psnr) = rmse_psnr(&fa, &fb)?;
    let ca = SignedPointCloud::from_stream(a, width, height, frames);
    let cb = SignedPointCloud::from_stream(b, width, height, frames);
    Ok(StreamComparison {
        rmse,
        psnr,
        f1: polarity_f1(&ca, &cb, tau)?,
        pscd: signed_chamfer(&ca, &cb),
    })
}
