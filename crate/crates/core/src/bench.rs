//! Sampling-throughput benchmark harness.
//!
//! For every (mode, sampler, batch size, seed) cell the harness clears the
//! block cache, runs warm-up epochs, resets the cache counters and times
//! epochs of `epoch_size` patches pulled through [`run_pipeline`]. Rates are
//! measured at the consumer, after batch assembly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cache::{cache_bytes_from_env, BlockCache, CacheStats, DEFAULT_CACHE_BYTES};
use crate::dataset::{DatasetConfig, GeoDataset, LayerConfig, LayerKind, RasterLayerDataset};
use crate::error::{Error, Result};
use crate::geo::{grid_shape, BoundingBox, Resolution};
use crate::loader::run_pipeline;
use crate::proj::{transform_bbox, transform_point, CrsDef, ProjXY};
use crate::sampler::{build_sampler, epoch_hash, SamplerConfig, SamplerKind, SamplingFrame};
use crate::tiff::{synth_raster, Compression, SampleType, SynthSpec, WriterOptions};
use crate::warp::warp_to_file;

/// How inputs reach the query grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Scenes in their native CRS, reprojected per query.
    Warped,
    /// Scenes rewritten once onto the dataset grid; queries are window reads.
    Preprocessed,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Warped => "warped",
            Mode::Preprocessed => "preprocessed",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warped" => Ok(Mode::Warped),
            "preprocessed" => Ok(Mode::Preprocessed),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode {s:?} (warped, preprocessed)"
            ))),
        }
    }
}

/// Synthetic stand-in for a multi-zone imagery collection plus one label
/// raster: `rows x cols` overlapping UTM scenes around `center`, the columns
/// stored in the CRS of `zones[col]`, and an Albers label raster covering all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureSpec {
    pub rows: usize,
    pub cols: usize,
    /// UTM zone (north) per column.
    pub zones: Vec<u32>,
    pub scene_px: usize,
    pub bands: usize,
    pub res: f64,
    /// Scene spacing as a fraction of the scene size (< 1 overlaps).
    pub step: f64,
    /// `(lon, lat)` of the mosaic centre.
    pub center: (f64, f64),
    pub label_epsg: u32,
    pub tile_size: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            rows: 3,
            cols: 4,
            zones: vec![14, 15, 15, 16],
            scene_px: 2048,
            bands: 4,
            res: 30.0,
            step: 0.9,
            center: (-95.5, 40.0),
            label_epsg: 5070,
            tile_size: 512,
        }
    }
}

const FIXTURE_STAMP: &str = ".fixture.json";
const PREP_STAMP: &str = ".prep.json";
/// Tile edge of pre-aligned copies; close to the default patch size so a
/// patch decodes little beyond itself.
pub const PREP_TILE: usize = 256;

impl FixtureSpec {
    fn snap_out(b: &BoundingBox, res: f64) -> Result<BoundingBox> {
        BoundingBox::new(
            (b.minx / res).floor() * res,
            (b.miny / res).floor() * res,
            (b.maxx / res).ceil() * res,
            (b.maxy / res).ceil() * res,
        )
    }

    /// Scene specs, row-major from the north-west.
    pub fn scenes(&self) -> Result<Vec<SynthSpec>> {
        if self.zones.len() != self.cols {
            return Err(Error::Config(format!(
                "{} zones for {} columns",
                self.zones.len(),
                self.cols
            )));
        }
        let label = CrsDef::from_epsg(self.label_epsg)?;
        let wgs = CrsDef::wgs84();
        let c = transform_point(&wgs, &label, ProjXY::new(self.center.0, self.center.1))?;
        let size = self.scene_px as f64 * self.res;
        let mut out = Vec::new();
        for r in 0..self.rows {
            for col in 0..self.cols {
                let dx = (col as f64 - (self.cols as f64 - 1.0) / 2.0) * self.step * size;
                let dy = ((self.rows as f64 - 1.0) / 2.0 - r as f64) * self.step * size;
                let crs = CrsDef::utm(self.zones[col], false)?;
                let p = transform_point(&label, &crs, ProjXY::new(c.x + dx, c.y + dy))?;
                let x0 = ((p.x - size / 2.0) / self.res).round() * self.res;
                let y0 = ((p.y - size / 2.0) / self.res).round() * self.res;
                let mut s = SynthSpec::new(crs, BoundingBox::new(x0, y0, x0 + size, y0 + size)?, self.res);
                s.name = Some(format!("scene_r{r}_c{col}_z{}.tif", self.zones[col]));
                s.bands = self.bands;
                s.tile_size = self.tile_size;
                out.push(s);
            }
        }
        Ok(out)
    }

    /// Label raster spec covering every scene.
    pub fn label(&self, scenes: &[SynthSpec]) -> Result<SynthSpec> {
        let crs = CrsDef::from_epsg(self.label_epsg)?;
        let mut hull: Option<BoundingBox> = None;
        for s in scenes {
            let b = transform_bbox(&s.crs, &crs, &s.bbox()?, 21)?;
            hull = Some(hull.map_or(b, |h| crate::geo::bbox_union(&h, &b)));
        }
        let hull = hull.ok_or_else(|| Error::Config("fixture has no scenes".into()))?;
        let mut s = SynthSpec::new(crs, Self::snap_out(&hull, self.res)?, self.res);
        s.name = Some("labels.tif".into());
        s.sample_type = SampleType::U8;
        s.tile_size = self.tile_size;
        Ok(s)
    }

    /// Write the fixture under `dir` (scenes in `scenes/`, the label raster
    /// in `labels/`, and `dataset.toml`) unless an identical one is there.
    /// Returns the dataset config path.
    pub fn generate(&self, dir: &Path) -> Result<PathBuf> {
        let cfg_path = dir.join("dataset.toml");
        let stamp = serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        if fs::read_to_string(dir.join(FIXTURE_STAMP)).ok().as_deref() == Some(stamp.as_str()) && cfg_path.is_file() {
            return Ok(cfg_path);
        }
        let (sdir, ldir) = (dir.join("scenes"), dir.join("labels"));
        for d in [&sdir, &ldir] {
            if d.exists() {
                fs::remove_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let scenes = self.scenes()?;
        for s in &scenes {
            synth_raster(s, &sdir.join(s.name.as_deref().expect("named")))?;
        }
        let label = self.label(&scenes)?;
        synth_raster(&label, &ldir.join("labels.tif"))?;
        let toml = format!(
            "compose = \"intersection\"\n\n[[layer]]\nroot = \"labels\"\nis_label = true\n\n[[layer]]\nroot = \"scenes\"\nglob = \"scene_*.tif\"\n"
        );
        fs::write(&cfg_path, toml).map_err(|e| Error::io(&cfg_path, e))?;
        fs::write(dir.join(FIXTURE_STAMP), stamp).map_err(|e| Error::io(dir, e))?;
        Ok(cfg_path)
    }
}

/// Whether every scene of `d` already lies on the `crs`/`res` grid with
/// origin at multiples of `res`.
fn on_global_grid(d: &RasterLayerDataset, crs: &CrsDef, res: &Resolution) -> bool {
    d.scenes().iter().all(|s| {
        let m = s.meta();
        let t = &m.transform;
        let aligned = |v: f64, r: f64| ((v / r) - (v / r).round()).abs() < 1e-6;
        m.crs == *crs && m.res().approx_eq(res, 1e-9) && aligned(t.origin_x, res.x) && aligned(t.origin_y, res.y)
    })
}

/// Nodata written where a warped scene has no coverage.
fn prep_nodata(sample_type: SampleType, native: Option<f64>) -> f64 {
    native.unwrap_or(match sample_type {
        SampleType::U8 => 255.0,
        SampleType::U16 => 65535.0,
        SampleType::I16 => -32768.0,
        SampleType::F32 => -3.4e38,
    })
}

/// Rewrite every scene of `d` onto the `crs`/`res` grid (origin at multiples
/// of `res`), one tiled GeoTIFF per scene in `out`.
pub fn preprocess_layer(
    d: &RasterLayerDataset,
    crs: &CrsDef,
    res: &Resolution,
    out: &Path,
    cache: &BlockCache,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for s in d.scenes() {
        let m = s.meta();
        let fp = transform_bbox(&m.crs, crs, &m.bounds(), 21)?;
        let fp = BoundingBox::new(
            (fp.minx / res.x).floor() * res.x,
            (fp.miny / res.y).floor() * res.y,
            (fp.maxx / res.x).ceil() * res.x,
            (fp.maxy / res.y).ceil() * res.y,
        )?;
        let shape = grid_shape(&fp, res);
        let nodata = prep_nodata(m.sample_type, m.nodata);
        let path = out.join(s.path().file_name().expect("scene file name"));
        let opts = WriterOptions {
            tile_size: PREP_TILE,
            compression: Compression::None,
        };
        warp_to_file(s, crs, &fp, shape, d.resampling(), Some(nodata), &path, opts, cache)?;
        written.push(path);
    }
    Ok(written)
}

/// Dataset config whose raster layers are pre-aligned copies under
/// `prep_dir`, built on first use. Layers already on the grid are reused.
pub fn preprocessed_config(cfg: &DatasetConfig, prep_dir: &Path, cache: Arc<BlockCache>) -> Result<DatasetConfig> {
    let warped = cfg.open(cache.clone())?;
    let (crs, res) = (warped.crs().clone(), warped.res());
    let mut out = cfg.clone();
    for (i, layer) in out.layers.iter_mut().enumerate() {
        if layer.kind != LayerKind::Raster {
            continue;
        }
        let mut native = layer.clone();
        native.crs = Some(crs.clone());
        native.res = Some(res.x);
        let d = RasterLayerDataset::open_with_cache(&native, cache.clone())?;
        if on_global_grid(&d, &crs, &res) {
            continue;
        }
        let dir = prep_dir.join(format!("layer{i}"));
        let stamp = format!(
            "{crs} {} {PREP_TILE} {:?}",
            res.x,
            d.scenes()
                .iter()
                .map(|s| (
                    s.path().to_path_buf(),
                    fs::metadata(s.path()).map(|m| m.len()).unwrap_or(0)
                ))
                .collect::<Vec<_>>()
        );
        if fs::read_to_string(dir.join(PREP_STAMP)).ok().as_deref() != Some(stamp.as_str()) {
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
            log::info!("preprocessing layer {i} into {}", dir.display());
            preprocess_layer(&d, &crs, &res, &dir, &cache)?;
            fs::write(dir.join(PREP_STAMP), &stamp).map_err(|e| Error::io(&dir, e))?;
        }
        *layer = LayerConfig {
            root: dir,
            crs: Some(crs.clone()),
            res: Some(res.x),
            ..layer.clone()
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Dataset config; absent means the synthetic fixture in `fixture_dir`.
    pub dataset: Option<PathBuf>,
    pub fixture_dir: PathBuf,
    pub fixture: FixtureSpec,
    /// Where pre-aligned copies go; defaults to `preprocessed/` beside the
    /// dataset config.
    pub prep_dir: Option<PathBuf>,
    pub samplers: Vec<SamplerKind>,
    pub batch_sizes: Vec<usize>,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    pub epoch_size: usize,
    pub patch_px: usize,
    pub stride_px: usize,
    pub workers: usize,
    /// Block cache capacity; `GEOPATCH_CACHE_BYTES` overrides it.
    pub cache_bytes: usize,
    pub warmup_epochs: usize,
    pub timed_epochs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dataset: None,
            fixture_dir: PathBuf::from("geopatch-fixture"),
            fixture: FixtureSpec::default(),
            prep_dir: None,
            samplers: vec![SamplerKind::Random, SamplerKind::RandomBatch, SamplerKind::Grid],
            batch_sizes: vec![1, 4, 16, 64],
            modes: vec![Mode::Warped, Mode::Preprocessed],
            seeds: vec![0, 1, 2],
            epoch_size: 4096,
            patch_px: 224,
            stride_px: 112,
            workers: 6,
            cache_bytes: DEFAULT_CACHE_BYTES,
            warmup_epochs: 1,
            timed_epochs: 1,
        }
    }
}

impl BenchConfig {
    /// Parse TOML; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut c: BenchConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = c.dataset.as_mut() {
            fix(p);
        }
        if let Some(p) = c.prep_dir.as_mut() {
            fix(p);
        }
        fix(&mut c.fixture_dir);
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.samplers.is_empty() || self.batch_sizes.is_empty() || self.modes.is_empty() || self.seeds.is_empty() {
            return bad("samplers, batch_sizes, modes and seeds must be non-empty");
        }
        if self.epoch_size == 0 || self.patch_px == 0 || self.stride_px == 0 || self.timed_epochs == 0 {
            return bad("epoch_size, patch_px, stride_px and timed_epochs must be positive");
        }
        if self.batch_sizes.contains(&0) {
            return bad("batch sizes must be positive");
        }
        Ok(())
    }

    /// Capacity after the environment override.
    pub fn effective_cache_bytes(&self) -> usize {
        cache_bytes_from_env(self.cache_bytes)
    }
}

/// One report line: a (sampler, batch size, mode, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub sampler: String,
    pub batch_size: usize,
    pub mode: String,
    pub seed: u64,
    pub epoch_size: usize,
    /// Patches per second over the timed epochs of this seed.
    pub patches_per_sec: f64,
    /// Slowest and fastest seed of the (sampler, batch size, mode) group.
    pub min_rate: f64,
    pub max_rate: f64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub evictions: u64,
    pub bytes_decoded: u64,
    pub wall_s: f64,
    #[serde(skip)]
    pub sequence_hash: String,
    #[serde(skip)]
    pub patches: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Mean rate over seeds of one group.
    pub fn mean_rate(&self, sampler: SamplerKind, batch_size: usize, mode: Mode) -> Option<f64> {
        let (s, m) = (sampler.to_string(), mode.to_string());
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.sampler == s && r.batch_size == batch_size && r.mode == m)
            .map(|r| r.patches_per_sec)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
        }
        out.flush().map_err(|e| Error::io("report", e))
    }
}

/// Timed result of one cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub patches: usize,
    pub wall_s: f64,
    pub stats: CacheStats,
    pub sequence_hash: String,
}

/// Run one cell on an opened dataset sharing `cache`, sampling boxes from
/// `frame`.
pub fn run_cell(
    ds: &dyn GeoDataset,
    cache: &BlockCache,
    frame: &SamplingFrame,
    kind: SamplerKind,
    batch_size: usize,
    seed: u64,
    cfg: &BenchConfig,
) -> Result<CellResult> {
    let mut scfg = SamplerConfig::new(cfg.patch_px as f64, cfg.epoch_size);
    scfg.stride = Some((cfg.stride_px as f64, cfg.stride_px as f64));
    scfg.batch_size = batch_size;
    scfg.seed = seed;
    let sampler = build_sampler(kind, frame, scfg)?;
    cache.clear();
    cache.reset_counters();
    for _ in 0..cfg.warmup_epochs {
        run_pipeline(ds, &*sampler, cfg.workers, Some(cfg.epoch_size), drop)?;
    }
    cache.reset_counters();
    let t0 = Instant::now();
    let mut patches = 0;
    for _ in 0..cfg.timed_epochs {
        patches += run_pipeline(ds, &*sampler, cfg.workers, Some(cfg.epoch_size), drop)?;
    }
    Ok(CellResult {
        patches,
        wall_s: t0.elapsed().as_secs_f64(),
        stats: cache.stats(),
        sequence_hash: epoch_hash(&*sampler),
    })
}

/// Resolve the dataset config, generating the fixture if needed.
pub fn dataset_config_path(cfg: &BenchConfig) -> Result<PathBuf> {
    match &cfg.dataset {
        Some(p) => Ok(p.clone()),
        None => {
            fs::create_dir_all(&cfg.fixture_dir).map_err(|e| Error::io(&cfg.fixture_dir, e))?;
            cfg.fixture.generate(&cfg.fixture_dir)
        }
    }
}

/// Run every cell. Boxes are drawn from the frame of the dataset as
/// configured, so every mode sees the same box sequence. `on_group` receives the rows of each (mode, sampler,
/// batch size) group as soon as its seeds finish, so callers can flush
/// partial reports.
pub fn run_benchmark(cfg: &BenchConfig, mut on_group: impl FnMut(&[BenchRow]) -> Result<()>) -> Result<BenchReport> {
    cfg.validate()?;
    let ds_path = dataset_config_path(cfg)?;
    let ds_cfg = DatasetConfig::load(&ds_path)?;
    let cache = Arc::new(BlockCache::new(cfg.effective_cache_bytes()));
    let frame = SamplingFrame::from_dataset(&*ds_cfg.open(cache.clone())?);
    let mut report = BenchReport::default();
    for &mode in &cfg.modes {
        let mode_cfg = match mode {
            Mode::Warped => ds_cfg.clone(),
            Mode::Preprocessed => {
                let prep = cfg
                    .prep_dir
                    .clone()
                    .unwrap_or_else(|| ds_path.parent().unwrap_or(Path::new(".")).join("preprocessed"));
                preprocessed_config(&ds_cfg, &prep, cache.clone())?
            }
        };
        let ds = mode_cfg.open(cache.clone())?;
        for &kind in &cfg.samplers {
            for &bs in &cfg.batch_sizes {
                let mut group = Vec::new();
                for &seed in &cfg.seeds {
                    let r = run_cell(&*ds, &cache, &frame, kind, bs, seed, cfg)?;
                    log::info!(
                        "{mode} {kind} batch {bs} seed {seed}: {:.1} patches/s, hit rate {:.3}",
                        r.patches as f64 / r.wall_s,
                        r.stats.hit_rate()
                    );
                    group.push(BenchRow {
                        sampler: kind.to_string(),
                        batch_size: bs,
                        mode: mode.to_string(),
                        seed,
                        epoch_size: cfg.epoch_size,
                        patches_per_sec: r.patches as f64 / r.wall_s,
                        min_rate: 0.0,
                        max_rate: 0.0,
                        cache_hits: r.stats.hits,
                        cache_misses: r.stats.misses,
                        evictions: r.stats.evictions,
                        bytes_decoded: r.stats.bytes_decoded,
                        wall_s: r.wall_s,
                        sequence_hash: r.sequence_hash,
                        patches: r.patches,
                    });
                }
                let lo = group.iter().map(|r| r.patches_per_sec).fold(f64::INFINITY, f64::min);
                let hi = group.iter().map(|r| r.patches_per_sec).fold(0.0, f64::max);
                for r in &mut group {
                    r.min_rate = lo;
                    r.max_rate = hi;
                }
                on_group(&group)?;
                report.rows.extend(group);
            }
        }
    }
    Ok(report)
}
