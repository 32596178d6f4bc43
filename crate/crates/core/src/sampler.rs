//! Bounding-box samplers.
//!
//! A sampler turns a dataset's extent into an epoch of query boxes, grouped
//! into batches. Sequences are a pure function of the sampling frame (bounds,
//! scene footprints, resolution) and the config: every call to
//! [`GeoSampler::epoch`] replays the same sequence.
//!
//! Randomness comes from PCG32 (`rand_pcg::Pcg32`, XSH-RR 64/32) seeded with
//! `state = seed` on the fixed stream [`PCG_STREAM`]. A uniform draw in
//! `[0, 1)` is the top 53 bits of `next_u64()` (two consecutive 32-bit
//! outputs, low word first) scaled by 2^-53.

use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;
use rand_pcg::Pcg32;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::dataset::GeoDataset;
use crate::error::{Error, Result};
use crate::geo::{bbox_intersection, BoundingBox, Resolution};

/// PCG stream selector shared by all samplers.
pub const PCG_STREAM: u64 = 0xa02b_dbf7_bb3c_0a7;

/// Relative slack when comparing lengths in CRS units.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PatchUnits {
    /// Pixels at the dataset resolution.
    #[default]
    Pixels,
    /// Units of the dataset CRS (metres for projected CRSs).
    Crs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExtentMode {
    /// Uniform over the dataset hull; boxes may land on empty ground.
    Hull,
    /// Pick a footprint with probability proportional to its area, then a
    /// uniform box inside it.
    #[default]
    SceneFootprints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Random,
    RandomBatch,
    Grid,
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(SamplerKind::Random),
            "random-batch" | "random_batch" | "randombatch" => Ok(SamplerKind::RandomBatch),
            "grid" => Ok(SamplerKind::Grid),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sampler {s:?} (random, random-batch, grid)"
            ))),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Random => "random",
            SamplerKind::RandomBatch => "random-batch",
            SamplerKind::Grid => "grid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// `(width, height)` in `units`.
    pub patch_size: (f64, f64),
    pub units: PatchUnits,
    /// Grid step `(x, y)` in `units`; defaults to the patch size.
    pub stride: Option<(f64, f64)>,
    /// Boxes per epoch for the random samplers.
    pub length: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub roi: Option<BoundingBox>,
    pub extent_mode: ExtentMode,
    /// Place box corners on multiples of the resolution, so boxes fall on
    /// the dataset's pixel grid. The grid sampler does so when patch and
    /// stride are whole pixels, widening each footprint to the grid lines
    /// around it.
    pub snap_to_grid: bool,
}

impl SamplerConfig {
    pub fn new(patch_px: f64, length: usize) -> Self {
        SamplerConfig {
            patch_size: (patch_px, patch_px),
            units: PatchUnits::Pixels,
            stride: None,
            length,
            batch_size: 1,
            seed: 0,
            roi: None,
            extent_mode: ExtentMode::SceneFootprints,
            snap_to_grid: true,
        }
    }

    fn to_crs(&self, v: (f64, f64), res: &Resolution) -> (f64, f64) {
        match self.units {
            PatchUnits::Pixels => (v.0 * res.x, v.1 * res.y),
            PatchUnits::Crs => v,
        }
    }

    fn validate(&self) -> Result<()> {
        let (w, h) = self.patch_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "patch size must be positive, got {w} x {h}"
            )));
        }
        if let Some((sx, sy)) = self.stride {
            if !(sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "stride must be positive, got {sx} x {sy}"
                )));
            }
        }
        if self.length == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "length and batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// What a sampler needs to know about a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingFrame {
    pub bounds: BoundingBox,
    pub footprints: Vec<BoundingBox>,
    pub res: Resolution,
}

impl SamplingFrame {
    pub fn new(bounds: BoundingBox, footprints: Vec<BoundingBox>, res: Resolution) -> Self {
        SamplingFrame {
            bounds,
            footprints,
            res,
        }
    }

    pub fn from_dataset(d: &dyn GeoDataset) -> Self {
        SamplingFrame::new(d.bounds(), d.footprints(), d.res())
    }
}

/// A source of query-box batches. Implement this for custom sampling
/// schemes; the benchmark harness and CLI accept any implementation.
pub trait GeoSampler: Send + Sync {
    /// One epoch of batches, identical on every call.
    fn epoch(&self) -> Box<dyn Iterator<Item = Vec<BoundingBox>> + Send + '_>;

    /// Boxes per epoch.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened epoch.
    fn boxes(&self) -> Vec<BoundingBox> {
        self.epoch().flatten().collect()
    }
}

/// Uniform draws on the documented PCG32 stream.
#[derive(Debug, Clone)]
pub struct SamplerRng(Pcg32);

impl SamplerRng {
    pub fn new(seed: u64) -> Self {
        SamplerRng(Pcg32::new(seed, PCG_STREAM))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.uniform() * n as f64) as u64).min(n.saturating_sub(1))
    }
}

/// Lower edge of a `len`-long interval placed uniformly in `[lo, hi]`.
fn place(rng: &mut SamplerRng, lo: f64, hi: f64, len: f64, snap: Option<f64>) -> f64 {
    if let Some(step) = snap {
        let k0 = (lo / step - EPS).ceil();
        let k1 = ((hi - len) / step + EPS).floor();
        if k1 >= k0 {
            let k = k0 + rng.below((k1 - k0) as u64 + 1) as f64;
            return k * step;
        }
    }
    lo + rng.uniform() * (hi - lo - len).max(0.0)
}

/// Box of exactly `w x h` placed uniformly inside `e`, carrying `e`'s time.
fn box_in(rng: &mut SamplerRng, e: &BoundingBox, w: f64, h: f64, snap: Option<&Resolution>) -> BoundingBox {
    let (x0, x1) = clamp_span(place(rng, e.minx, e.maxx, w, snap.map(|r| r.x)), w, e.minx, e.maxx);
    let (y0, y1) = clamp_span(place(rng, e.miny, e.maxy, h, snap.map(|r| r.y)), h, e.miny, e.maxy);
    BoundingBox::with_time(x0, y0, x1, y1, e.mint, e.maxt).expect("finite box")
}

/// `[lo, lo + len]`, pulled back inside `[min, max]` when rounding pushed an
/// end out.
fn clamp_span(lo: f64, len: f64, min: f64, max: f64) -> (f64, f64) {
    let hi = lo + len;
    if hi > max {
        ((max - len).max(min), max)
    } else if lo < min {
        (min, (min + len).min(max))
    } else {
        (lo, hi)
    }
}

/// The smallest box holding `e` whose edges lie on multiples of `r`.
fn snap_outward(e: &BoundingBox, r: &Resolution) -> Option<BoundingBox> {
    let (x0, x1) = ((e.minx / r.x + EPS).floor() * r.x, (e.maxx / r.x - EPS).ceil() * r.x);
    let (y0, y1) = ((e.miny / r.y + EPS).floor() * r.y, (e.maxy / r.y - EPS).ceil() * r.y);
    BoundingBox::with_time(x0, y0, x1, y1, e.mint, e.maxt).ok()
}

fn fits(e: &BoundingBox, w: f64, h: f64) -> bool {
    let tol = |v: f64| EPS * v.abs().max(1.0);
    w <= e.width() + tol(e.maxx) && h <= e.height() + tol(e.maxy)
}

fn clip_roi(b: &BoundingBox, roi: Option<&BoundingBox>) -> Option<BoundingBox> {
    match roi {
        None => Some(*b),
        Some(r) => bbox_intersection(b, r).ok(),
    }
}

/// Candidate extents with cumulative area weights.
#[derive(Debug, Clone)]
struct WeightedExtents {
    extents: Vec<BoundingBox>,
    cumulative: Vec<f64>,
}

impl WeightedExtents {
    fn new(extents: Vec<BoundingBox>) -> Self {
        let mut acc = 0.0;
        let cumulative = extents
            .iter()
            .map(|e| {
                acc += e.area();
                acc
            })
            .collect();
        WeightedExtents { extents, cumulative }
    }

    fn pick(&self, rng: &mut SamplerRng) -> &BoundingBox {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.uniform() * total;
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.extents.len() - 1);
        &self.extents[i]
    }
}

/// Footprints (clipped to the roi) that can hold a `w x h` box.
fn usable_footprints(frame: &SamplingFrame, roi: Option<&BoundingBox>, w: f64, h: f64) -> Vec<BoundingBox> {
    let mut out = Vec::new();
    for (i, fp) in frame.footprints.iter().enumerate() {
        match clip_roi(fp, roi) {
            Some(e) if fits(&e, w, h) => out.push(e),
            Some(_) => log::warn!("scene {i} is smaller than the patch and is never sampled"),
            None => {}
        }
    }
    out
}

fn chunked(boxes: Vec<BoundingBox>, batch: usize) -> Box<dyn Iterator<Item = Vec<BoundingBox>> + Send> {
    let mut it = boxes.into_iter().peekable();
    Box::new(std::iter::from_fn(move || {
        it.peek()?;
        Some(it.by_ref().take(batch).collect())
    }))
}

/// Independent uniform boxes; batches group consecutive draws.
#[derive(Debug, Clone)]
pub struct RandomSampler {
    cfg: SamplerConfig,
    extents: WeightedExtents,
    size: (f64, f64),
    snap: Option<Resolution>,
}

impl RandomSampler {
    pub fn new(frame: &SamplingFrame, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = cfg.to_crs(cfg.patch_size, &frame.res);
        let too_big = |extent: String| Error::PatchLargerThanExtent {
            patch: format!("{w} x {h}"),
            extent,
        };
        let extents = match cfg.extent_mode {
            ExtentMode::Hull => {
                let e = clip_roi(&frame.bounds, cfg.roi.as_ref()).ok_or_else(|| too_big("empty roi".into()))?;
                if !fits(&e, w, h) {
                    return Err(too_big(e.to_string()));
                }
                vec![e]
            }
            ExtentMode::SceneFootprints => {
                let v = usable_footprints(frame, cfg.roi.as_ref(), w, h);
                if v.is_empty() {
                    return Err(too_big("every scene footprint".into()));
                }
                v
            }
        };
        Ok(RandomSampler {
            snap: cfg.snap_to_grid.then_some(frame.res),
            cfg,
            extents: WeightedExtents::new(extents),
            size: (w, h),
        })
    }
}

impl GeoSampler for RandomSampler {
    fn epoch(&self) -> Box<dyn Iterator<Item = Vec<BoundingBox>> + Send + '_> {
        let mut rng = SamplerRng::new(self.cfg.seed);
        let (w, h) = self.size;
        let boxes = (0..self.cfg.length)
            .map(|_| {
                let e = *self.extents.pick(&mut rng);
                box_in(&mut rng, &e, w, h, self.snap.as_ref())
            })
            .collect();
        chunked(boxes, self.cfg.batch_size)
    }

    fn len(&self) -> usize {
        self.cfg.length
    }
}

/// Every box of a batch comes from one area-weighted scene footprint.
#[derive(Debug, Clone)]
pub struct RandomBatchSampler {
    cfg: SamplerConfig,
    extents: WeightedExtents,
    size: (f64, f64),
    snap: Option<Resolution>,
}

impl RandomBatchSampler {
    pub fn new(frame: &SamplingFrame, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = cfg.to_crs(cfg.patch_size, &frame.res);
        let v = usable_footprints(frame, cfg.roi.as_ref(), w, h);
        if v.is_empty() {
            return Err(Error::PatchLargerThanScene);
        }
        Ok(RandomBatchSampler {
            snap: cfg.snap_to_grid.then_some(frame.res),
            cfg,
            extents: WeightedExtents::new(v),
            size: (w, h),
        })
    }

    pub fn num_batches(&self) -> usize {
        self.cfg.length.div_ceil(self.cfg.batch_size)
    }
}

impl GeoSampler for RandomBatchSampler {
    fn epoch(&self) -> Box<dyn Iterator<Item = Vec<BoundingBox>> + Send + '_> {
        let mut rng = SamplerRng::new(self.cfg.seed);
        let (w, h) = self.size;
        let (bs, len) = (self.cfg.batch_size, self.cfg.length);
        Box::new((0..self.num_batches()).map(move |i| {
            let n = bs.min(len - i * bs);
            let e = *self.extents.pick(&mut rng);
            (0..n).map(|_| box_in(&mut rng, &e, w, h, self.snap.as_ref())).collect()
        }))
    }

    fn len(&self) -> usize {
        self.cfg.length
    }
}

/// Lower offsets of grid positions along one axis of length `extent`:
/// `k * stride` while the patch fits, plus one flush against the far edge
/// when the last regular position leaves a gap. An extent shorter than the
/// patch yields one centred position.
pub fn grid_offsets(extent: f64, patch: f64, stride: f64) -> Vec<f64> {
    let tol = EPS * extent.abs().max(patch).max(1.0);
    if patch > extent + tol {
        return vec![(extent - patch) / 2.0];
    }
    let n = ((extent - patch + tol) / stride).floor() as usize + 1;
    let mut v: Vec<f64> = (0..n).map(|k| k as f64 * stride).collect();
    let last = *v.last().expect("n >= 1");
    if extent - patch - last > tol {
        v.push(extent - patch);
    }
    v
}

/// Row-major grid over each footprint in order, starting at its top-left
/// corner.
#[derive(Debug, Clone)]
pub struct GridSampler {
    boxes: Vec<BoundingBox>,
    batch_size: usize,
}

impl GridSampler {
    pub fn new(frame: &SamplingFrame, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let (w, h) = cfg.to_crs(cfg.patch_size, &frame.res);
        let (sx, sy) = cfg.to_crs(cfg.stride.unwrap_or(cfg.patch_size), &frame.res);
        let whole = |v: f64, r: f64| (v / r - (v / r).round()).abs() < 1e-6;
        let r = frame.res;
        let snap =
            (cfg.snap_to_grid && whole(w, r.x) && whole(h, r.y) && whole(sx, r.x) && whole(sy, r.y)).then_some(r);
        let on_grid = |v: f64, step: Option<f64>| step.map_or(v, |s| (v / s).round() * s);
        let mut boxes = Vec::new();
        for fp in &frame.footprints {
            let Some(e) = clip_roi(fp, cfg.roi.as_ref()) else {
                continue;
            };
            let e = snap.and_then(|r| snap_outward(&e, &r)).unwrap_or(e);
            let ys = grid_offsets(e.height(), h, sy);
            let xs = grid_offsets(e.width(), w, sx);
            for &oy in &ys {
                let y1 = e.maxy - on_grid(oy, snap.map(|r| r.y));
                for &ox in &xs {
                    let x0 = e.minx + on_grid(ox, snap.map(|r| r.x));
                    boxes.push(BoundingBox::with_time(x0, y1 - h, x0 + w, y1, e.mint, e.maxt)?);
                }
            }
        }
        Ok(GridSampler {
            boxes,
            batch_size: cfg.batch_size,
        })
    }
}

impl GeoSampler for GridSampler {
    fn epoch(&self) -> Box<dyn Iterator<Item = Vec<BoundingBox>> + Send + '_> {
        chunked(self.boxes.clone(), self.batch_size)
    }

    fn len(&self) -> usize {
        self.boxes.len()
    }
}

pub fn build_sampler(kind: SamplerKind, frame: &SamplingFrame, cfg: SamplerConfig) -> Result<Box<dyn GeoSampler>> {
    Ok(match kind {
        SamplerKind::Random => Box::new(RandomSampler::new(frame, cfg)?),
        SamplerKind::RandomBatch => Box::new(RandomBatchSampler::new(frame, cfg)?),
        SamplerKind::Grid => Box::new(GridSampler::new(frame, cfg)?),
    })
}

/// SHA-256 over the little-endian bit patterns of every box coordinate
/// (minx, miny, maxx, maxy, mint, maxt), with a batch separator, as hex.
pub fn sequence_hash<'a>(batches: impl IntoIterator<Item = &'a [BoundingBox]>) -> String {
    let mut h = Sha256::new();
    for batch in batches {
        h.update((batch.len() as u64).to_le_bytes());
        for b in batch {
            for v in [b.minx, b.miny, b.maxx, b.maxy, b.mint, b.maxt] {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

/// Hash of one epoch of `s`.
pub fn epoch_hash(s: &dyn GeoSampler) -> String {
    let batches: Vec<Vec<BoundingBox>> = s.epoch().collect();
    sequence_hash(batches.iter().map(Vec::as_slice))
}
