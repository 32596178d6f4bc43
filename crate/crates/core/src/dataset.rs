//! Queryable geospatial layers and their composition.
//!
//! Every dataset answers `query(bbox)` with a [`Sample`] on its own grid:
//! patches in `crs()` at `res()` covering exactly the query box. Composed
//! datasets ask their constituents for patches on the composed grid via
//! [`GeoDataset::query_in`], so every patch of a sample is pixel-aligned.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::Deserialize;

use crate::cache::{cache_bytes_from_env, BlockCache, DEFAULT_CACHE_BYTES};
use crate::error::{Error, Result};
use crate::geo::{bbox_intersection, bbox_union, BoundingBox, Resolution};
use crate::index::SpatialIndex;
use crate::patch::Patch;
use crate::proj::{transform_bbox, CrsDef};
use crate::tiff::{discover, SampleType, Scene, TimePattern};
use crate::vector::{burn_polygons, parse_polygons, Polygon, PolygonSet};
use crate::warp::{warp_scene, Resampling, WarpOptions};

/// Densification used when moving footprints and query boxes between CRSs.
const DENSIFY: usize = 21;

/// Patches keyed by layer role, all on one grid.
#[derive(Debug, Clone)]
pub struct Sample {
    pub layers: BTreeMap<String, Patch>,
    pub bbox: BoundingBox,
    pub crs: CrsDef,
    pub res: Resolution,
    /// Set when no patch has a single valid pixel.
    pub all_invalid: bool,
}

impl Sample {
    fn new(layers: BTreeMap<String, Patch>, bbox: BoundingBox, crs: CrsDef, res: Resolution) -> Self {
        let all_invalid = layers.values().all(Patch::all_invalid);
        if all_invalid {
            log::warn!("query {bbox} produced no valid pixels");
        }
        Sample {
            layers,
            bbox,
            crs,
            res,
            all_invalid,
        }
    }

    pub fn get(&self, role: &str) -> Option<&Patch> {
        self.layers.get(role)
    }
}

pub trait GeoDataset: Send + Sync {
    /// Extent in `crs()`, including the time range.
    fn bounds(&self) -> BoundingBox;

    fn crs(&self) -> &CrsDef;

    fn res(&self) -> Resolution;

    /// Per-scene extents in `crs()`, in discovery order.
    fn footprints(&self) -> Vec<BoundingBox>;

    /// Layer roles present in every sample.
    fn roles(&self) -> Vec<String>;

    /// Patches covering `b` (given in `crs`) on the grid of `crs` at `res`.
    fn query_in(&self, b: &BoundingBox, crs: &CrsDef, res: &Resolution) -> Result<Sample>;

    fn query(&self, b: &BoundingBox) -> Result<Sample> {
        let bounds = self.bounds();
        if !b.intersects(&bounds) {
            return Err(Error::QueryOutsideBounds(format!("{b} vs {bounds}")));
        }
        self.query_in(b, &self.crs().clone(), &self.res())
    }

    /// `bounds()` expressed in another CRS.
    fn bounds_in(&self, crs: &CrsDef) -> Result<BoundingBox> {
        let b = self.bounds();
        if crs == self.crs() {
            return Ok(b);
        }
        hull_in(&self.footprints(), self.crs(), crs)?.time(b.mint, b.maxt)
    }
}

fn hull_in(boxes: &[BoundingBox], src: &CrsDef, dst: &CrsDef) -> Result<BoundingBox> {
    let mut out: Option<BoundingBox> = None;
    for b in boxes {
        let t = transform_bbox(src, dst, b, DENSIFY)?.time(b.mint, b.maxt)?;
        out = Some(match out {
            Some(o) => bbox_union(&o, &t),
            None => t,
        });
    }
    out.ok_or_else(|| Error::InvalidArgument("dataset has no footprints".into()))
}

/// Move a query box into `to`, keeping its time interval.
fn query_box_in(b: &BoundingBox, from: &CrsDef, to: &CrsDef) -> Result<BoundingBox> {
    if from == to {
        return Ok(*b);
    }
    transform_bbox(from, to, b, DENSIFY)?.time(b.mint, b.maxt)
}

/// Copy valid pixels of `src` into `dst`. With `overwrite` false only pixels
/// still invalid in `dst` are filled.
fn mosaic_into(dst: &mut Patch, src: &Patch, overwrite: bool) {
    debug_assert_eq!(dst.shape, src.shape);
    let n = dst.shape.len();
    let bands = dst.bands.min(src.bands);
    if src.valid.iter().all(|v| *v) && (overwrite || !dst.valid.iter().any(|v| *v)) {
        dst.samples[..bands * n].copy_from_slice(&src.samples[..bands * n]);
        dst.valid.fill(true);
        return;
    }
    let take: Vec<bool> = (0..n).map(|i| src.valid[i] && (overwrite || !dst.valid[i])).collect();
    for b in 0..bands {
        let d = &mut dst.samples[b * n..(b + 1) * n];
        let s = &src.samples[b * n..(b + 1) * n];
        for ((d, s), t) in d.iter_mut().zip(s).zip(&take) {
            *d = if *t { *s } else { *d };
        }
    }
    for (v, t) in dst.valid.iter_mut().zip(&take) {
        *v |= *t;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    #[default]
    Raster,
    Vector,
}

/// Declarative description of one layer.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub root: PathBuf,
    #[serde(default = "default_glob")]
    pub glob: String,
    #[serde(default)]
    pub kind: LayerKind,
    /// Destination CRS; a raster layer defaults to its first scene's.
    pub crs: Option<CrsDef>,
    /// Destination resolution; a raster layer defaults to its first scene's.
    pub res: Option<f64>,
    pub role: Option<String>,
    pub resampling: Option<Resampling>,
    #[serde(default)]
    pub is_label: bool,
    /// Regex with a `date` group applied to file names, and its chrono format.
    pub time_pattern: Option<String>,
    #[serde(default = "default_time_format")]
    pub time_format: String,
    /// Fail on any unreadable file instead of skipping it.
    #[serde(default = "default_true")]
    pub strict: bool,
    /// Feature property holding the burn value (vector layers).
    pub burn_property: Option<String>,
}

fn default_glob() -> String {
    "*.tif".into()
}

fn default_time_format() -> String {
    "%Y%m%d".into()
}

fn default_true() -> bool {
    true
}

impl LayerConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        LayerConfig {
            root: root.into(),
            glob: default_glob(),
            kind: LayerKind::Raster,
            crs: None,
            res: None,
            role: None,
            resampling: None,
            is_label: false,
            time_pattern: None,
            time_format: default_time_format(),
            strict: true,
            burn_property: None,
        }
    }

    fn role(&self) -> String {
        self.role.clone().unwrap_or_else(|| {
            if self.is_label || self.kind == LayerKind::Vector {
                "mask"
            } else {
                "image"
            }
            .into()
        })
    }

    fn resolution(&self) -> Result<Option<Resolution>> {
        self.res.map(Resolution::square).transpose()
    }

    fn files(&self) -> Result<Vec<PathBuf>> {
        if !self.root.is_dir() {
            return Err(Error::NoScenesFound(format!(
                "{} is not a directory",
                self.root.display()
            )));
        }
        let files = discover(&self.root, &self.glob)?;
        if files.is_empty() {
            return Err(Error::NoScenesFound(format!("{}/{}", self.root.display(), self.glob)));
        }
        Ok(files)
    }
}

/// Scenes of one raster layer, mosaicked later-scene-wins.
pub struct RasterLayerDataset {
    scenes: Vec<Arc<Scene>>,
    /// Scene footprints in `crs`, parallel to `scenes`.
    footprints: Vec<BoundingBox>,
    index: SpatialIndex,
    bounds: BoundingBox,
    crs: CrsDef,
    res: Resolution,
    role: String,
    resampling: Resampling,
    bands: usize,
    sample_type: SampleType,
    nodata: Option<f64>,
    cache: Arc<BlockCache>,
    skipped: Vec<(PathBuf, String)>,
}

impl std::fmt::Debug for RasterLayerDataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterLayerDataset")
            .field("scenes", &self.scenes.len())
            .field("crs", &self.crs)
            .field("res", &self.res)
            .field("role", &self.role)
            .finish()
    }
}

impl RasterLayerDataset {
    /// Open with a private cache sized from `GEOPATCH_CACHE_BYTES`.
    pub fn open(cfg: &LayerConfig) -> Result<Self> {
        Self::open_with_cache(
            cfg,
            Arc::new(BlockCache::new(cache_bytes_from_env(DEFAULT_CACHE_BYTES))),
        )
    }

    pub fn open_with_cache(cfg: &LayerConfig, cache: Arc<BlockCache>) -> Result<Self> {
        let time = cfg
            .time_pattern
            .as_deref()
            .map(|p| TimePattern::new(p, &cfg.time_format))
            .transpose()?;
        let mut scenes = Vec::new();
        let mut skipped = Vec::new();
        for path in cfg.files()? {
            match Scene::open_with_time(&path, time.as_ref()) {
                Ok(s) => scenes.push(s),
                Err(e) if !cfg.strict => {
                    log::warn!("skipping {}: {e}", path.display());
                    skipped.push((path, e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
        let Some(first) = scenes.first() else {
            return Err(Error::NoScenesFound(format!(
                "no readable scenes under {}",
                cfg.root.display()
            )));
        };
        let fm = first.meta().clone();
        let crs = cfg.crs.clone().unwrap_or_else(|| fm.crs.clone());
        let res = cfg.resolution()?.unwrap_or_else(|| fm.res());
        for s in &scenes[1..] {
            let m = s.meta();
            if m.bands != fm.bands || m.sample_type != fm.sample_type {
                return Err(Error::Config(format!(
                    "{} has {} {:?} bands, expected {} {:?}",
                    s.path().display(),
                    m.bands,
                    m.sample_type,
                    fm.bands,
                    fm.sample_type
                )));
            }
        }
        let mut footprints = Vec::with_capacity(scenes.len());
        let mut kept = Vec::with_capacity(scenes.len());
        for s in scenes {
            let m = s.meta();
            let (t0, t1) = m.time_range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            let fp = if m.crs == crs {
                Ok(m.bounds())
            } else {
                transform_bbox(&m.crs, &crs, &m.bounds(), DENSIFY)
            };
            match fp.and_then(|b| b.time(t0, t1)) {
                Ok(b) => {
                    footprints.push(b);
                    kept.push(Arc::new(s));
                }
                Err(e) if !cfg.strict => {
                    log::warn!("skipping {}: {e}", s.path().display());
                    skipped.push((s.path().to_path_buf(), e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
        if kept.is_empty() {
            return Err(Error::NoScenesFound(format!(
                "no usable scenes under {}",
                cfg.root.display()
            )));
        }
        let bounds = footprints[1..].iter().fold(footprints[0], |a, b| bbox_union(&a, b));
        let index = SpatialIndex::new(footprints.iter().copied().zip(0..).collect());
        Ok(RasterLayerDataset {
            scenes: kept,
            footprints,
            index,
            bounds,
            crs,
            res,
            role: cfg.role(),
            resampling: cfg
                .resampling
                .unwrap_or_else(|| Resampling::default_for(fm.sample_type, cfg.is_label)),
            bands: fm.bands,
            sample_type: fm.sample_type,
            nodata: fm.nodata,
            cache,
            skipped,
        })
    }

    pub fn scenes(&self) -> &[Arc<Scene>] {
        &self.scenes
    }

    pub fn cache(&self) -> &Arc<BlockCache> {
        &self.cache
    }

    pub fn resampling(&self) -> Resampling {
        self.resampling
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Files passed over in lenient mode, with the reason.
    pub fn skipped(&self) -> &[(PathBuf, String)] {
        &self.skipped
    }

    /// Ids of scenes whose footprints intersect `b` (in the layer CRS).
    pub fn scenes_intersecting(&self, b: &BoundingBox) -> Vec<usize> {
        self.index.query(b)
    }

    fn fill(&self) -> f32 {
        self.nodata.map_or(0.0, |v| v as f32)
    }

    /// Mosaic of every scene touching `b`, on the grid of `crs` at `res`.
    pub fn read(&self, b: &BoundingBox, crs: &CrsDef, res: &Resolution) -> Result<Patch> {
        let fill = self.fill();
        let mut out = Patch::empty(self.bands, *b, crs.clone(), *res, self.sample_type, self.nodata, fill);
        let probe = match query_box_in(b, crs, &self.crs) {
            Ok(p) => p,
            Err(Error::OutOfDomain(_)) => return Ok(out),
            Err(e) => return Err(e),
        };
        let mut opts = WarpOptions::new(self.resampling);
        opts.fill = fill;
        for id in self.index.query(&probe) {
            let p = warp_scene(&self.scenes[id], crs, b, res, &opts, &self.cache)?;
            mosaic_into(&mut out, &p, true);
        }
        Ok(out)
    }
}

impl GeoDataset for RasterLayerDataset {
    fn bounds(&self) -> BoundingBox {
        self.bounds
    }

    fn crs(&self) -> &CrsDef {
        &self.crs
    }

    fn res(&self) -> Resolution {
        self.res
    }

    fn footprints(&self) -> Vec<BoundingBox> {
        self.footprints.clone()
    }

    fn roles(&self) -> Vec<String> {
        vec![self.role.clone()]
    }

    fn query_in(&self, b: &BoundingBox, crs: &CrsDef, res: &Resolution) -> Result<Sample> {
        let p = self.read(b, crs, res)?;
        Ok(Sample::new(
            BTreeMap::from([(self.role.clone(), p)]),
            *b,
            crs.clone(),
            *res,
        ))
    }
}

/// Polygons from one or more GeoJSON files, rasterised on demand.
#[derive(Debug)]
pub struct VectorLayerDataset {
    /// All polygons in `crs`, files in discovery order.
    polygons: PolygonSet,
    footprints: Vec<BoundingBox>,
    bounds: BoundingBox,
    crs: CrsDef,
    res: Resolution,
    role: String,
    /// Reprojections for other destination CRSs, built on first use.
    reprojected: Mutex<Vec<Arc<PolygonSet>>>,
}

impl VectorLayerDataset {
    pub fn open(cfg: &LayerConfig) -> Result<Self> {
        let res = cfg
            .resolution()?
            .ok_or_else(|| Error::Config(format!("vector layer {} needs res", cfg.root.display())))?;
        let mut sets = Vec::new();
        for path in cfg.files()? {
            let parsed = std::fs::read_to_string(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|text| parse_polygons(&text, cfg.burn_property.as_deref(), None));
            match parsed {
                Ok(set) if set.polygons.is_empty() => log::warn!("{} has no polygons", path.display()),
                Ok(set) => sets.push(set),
                Err(e) if !cfg.strict => log::warn!("skipping {}: {e}", path.display()),
                Err(e) => return Err(e),
            }
        }
        let Some(first) = sets.first() else {
            return Err(Error::NoScenesFound(format!(
                "no polygons under {}",
                cfg.root.display()
            )));
        };
        let crs = cfg.crs.clone().unwrap_or_else(|| first.crs.clone());
        let mut polygons: Vec<Polygon> = Vec::new();
        let mut footprints = Vec::new();
        for set in sets {
            let set = if set.crs == crs { set } else { set.reproject(&crs)? };
            footprints.push(set.bounds().expect("non-empty set"));
            polygons.extend(set.polygons);
        }
        Ok(Self::from_parts(
            PolygonSet {
                polygons,
                crs: crs.clone(),
            },
            footprints,
            res,
            cfg.role(),
        ))
    }

    /// A layer over already-parsed polygons, rasterised at `res` in their CRS.
    pub fn from_polygons(polygons: PolygonSet, res: Resolution, role: impl Into<String>) -> Result<Self> {
        let fp = polygons
            .bounds()
            .ok_or_else(|| Error::NoScenesFound("empty polygon set".into()))?;
        Ok(Self::from_parts(polygons, vec![fp], res, role.into()))
    }

    fn from_parts(polygons: PolygonSet, footprints: Vec<BoundingBox>, res: Resolution, role: String) -> Self {
        let bounds = footprints[1..].iter().fold(footprints[0], |a, b| bbox_union(&a, b));
        VectorLayerDataset {
            crs: polygons.crs.clone(),
            polygons,
            footprints,
            bounds,
            res,
            role,
            reprojected: Mutex::new(Vec::new()),
        }
    }

    fn polygons_in(&self, crs: &CrsDef) -> Result<Arc<PolygonSet>> {
        let mut cached = self.reprojected.lock();
        if let Some(p) = cached.iter().find(|p| p.crs == *crs) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.polygons.reproject(crs)?);
        cached.push(p.clone());
        Ok(p)
    }
}

impl GeoDataset for VectorLayerDataset {
    fn bounds(&self) -> BoundingBox {
        self.bounds
    }

    fn crs(&self) -> &CrsDef {
        &self.crs
    }

    fn res(&self) -> Resolution {
        self.res
    }

    fn footprints(&self) -> Vec<BoundingBox> {
        self.footprints.clone()
    }

    fn roles(&self) -> Vec<String> {
        vec![self.role.clone()]
    }

    fn query_in(&self, b: &BoundingBox, crs: &CrsDef, res: &Resolution) -> Result<Sample> {
        let reprojected;
        let set = if *crs == self.crs {
            &self.polygons
        } else {
            reprojected = self.polygons_in(crs)?;
            &*reprojected
        };
        let mut p = Patch::empty(1, *b, crs.clone(), *res, SampleType::U16, None, 0.0);
        p.valid.fill(true);
        let t = p.transform();
        let near: Vec<Polygon> = set
            .polygons
            .iter()
            .filter(|poly| {
                let pb = poly.bounds();
                pb.minx <= b.maxx && pb.maxx >= b.minx && pb.miny <= b.maxy && pb.maxy >= b.miny
            })
            .cloned()
            .collect();
        burn_polygons(&near, &t, p.shape, &mut p.samples);
        Ok(Sample::new(
            BTreeMap::from([(self.role.clone(), p)]),
            *b,
            crs.clone(),
            *res,
        ))
    }
}

/// Target grid for a composition: explicit, or inherited from the first operand.
fn composed_grid(d1: &dyn GeoDataset, crs: Option<CrsDef>, res: Option<Resolution>) -> (CrsDef, Resolution) {
    (crs.unwrap_or_else(|| d1.crs().clone()), res.unwrap_or_else(|| d1.res()))
}

/// Samples from where both layers have data; each sample holds the patches
/// of both, pixel-aligned.
pub struct IntersectionDataset {
    d1: Arc<dyn GeoDataset>,
    d2: Arc<dyn GeoDataset>,
    crs: CrsDef,
    res: Resolution,
    bounds: BoundingBox,
    footprints: Vec<BoundingBox>,
}

/// Intersect two datasets on the grid `crs`/`res`, inherited from `d1` when
/// not given.
pub fn intersect(
    d1: Arc<dyn GeoDataset>,
    d2: Arc<dyn GeoDataset>,
    crs: Option<CrsDef>,
    res: Option<Resolution>,
) -> Result<IntersectionDataset> {
    let (crs, res) = composed_grid(&*d1, crs, res);
    let b1 = d1.bounds_in(&crs)?;
    let b2 = d2.bounds_in(&crs)?;
    if !b1.intersects(&b2) {
        return Err(Error::EmptyIntersection(format!("{b1} and {b2} do not overlap")));
    }
    let bounds = bbox_intersection(&b1, &b2)?;
    let f1 = footprints_in(&*d1, &crs)?;
    let f2 = footprints_in(&*d2, &crs)?;
    let mut footprints = Vec::new();
    for a in &f1 {
        for b in &f2 {
            if a.intersects(b) {
                footprints.push(bbox_intersection(a, b)?);
            }
        }
    }
    Ok(IntersectionDataset {
        d1,
        d2,
        crs,
        res,
        bounds,
        footprints,
    })
}

fn footprints_in(d: &dyn GeoDataset, crs: &CrsDef) -> Result<Vec<BoundingBox>> {
    let fps = d.footprints();
    if d.crs() == crs {
        return Ok(fps);
    }
    fps.iter().map(|b| query_box_in(b, d.crs(), crs)).collect()
}

/// Merge role maps; a role already taken gets a numeric suffix.
fn merge_roles(into: &mut BTreeMap<String, Patch>, from: BTreeMap<String, Patch>) {
    for (role, p) in from {
        let mut key = role.clone();
        let mut k = 2;
        while into.contains_key(&key) {
            key = format!("{role}_{k}");
            k += 1;
        }
        into.insert(key, p);
    }
}

impl GeoDataset for IntersectionDataset {
    fn bounds(&self) -> BoundingBox {
        self.bounds
    }

    fn crs(&self) -> &CrsDef {
        &self.crs
    }

    fn res(&self) -> Resolution {
        self.res
    }

    fn footprints(&self) -> Vec<BoundingBox> {
        self.footprints.clone()
    }

    fn roles(&self) -> Vec<String> {
        let mut m = BTreeMap::new();
        for r in self.d1.roles().into_iter().chain(self.d2.roles()) {
            let mut key = r.clone();
            let mut k = 2;
            while m.contains_key(&key) {
                key = format!("{r}_{k}");
                k += 1;
            }
            m.insert(key, ());
        }
        m.into_keys().collect()
    }

    fn query_in(&self, b: &BoundingBox, crs: &CrsDef, res: &Resolution) -> Result<Sample> {
        let s1 = self.d1.query_in(b, crs, res)?;
        let s2 = self.d2.query_in(b, crs, res)?;
        let mut layers = s1.layers;
        merge_roles(&mut layers, s2.layers);
        Ok(Sample::new(layers, *b, crs.clone(), *res))
    }
}

/// Samples from where either layer has data; patches sharing a role are
/// mosaicked, the first dataset's valid pixels winning.
pub struct UnionDataset {
    d1: Arc<dyn GeoDataset>,
    d2: Arc<dyn GeoDataset>,
    crs: CrsDef,
    res: Resolution,
    bounds: BoundingBox,
    footprints: Vec<BoundingBox>,
}

pub fn union(
    d1: Arc<dyn GeoDataset>,
    d2: Arc<dyn GeoDataset>,
    crs: Option<CrsDef>,
    res: Option<Resolution>,
) -> Result<UnionDataset> {
    let (crs, res) = composed_grid(&*d1, crs, res);
    let bounds = bbox_union(&d1.bounds_in(&crs)?, &d2.bounds_in(&crs)?);
    let mut footprints = footprints_in(&*d1, &crs)?;
    footprints.extend(footprints_in(&*d2, &crs)?);
    Ok(UnionDataset {
        d1,
        d2,
        crs,
        res,
        bounds,
        footprints,
    })
}

impl GeoDataset for UnionDataset {
    fn bounds(&self) -> BoundingBox {
        self.bounds
    }

    fn crs(&self) -> &CrsDef {
        &self.crs
    }

    fn res(&self) -> Resolution {
        self.res
    }

    fn footprints(&self) -> Vec<BoundingBox> {
        self.footprints.clone()
    }

    fn roles(&self) -> Vec<String> {
        let mut r = self.d1.roles();
        r.extend(self.d2.roles());
        r.sort();
        r.dedup();
        r
    }

    fn query_in(&self, b: &BoundingBox, crs: &CrsDef, res: &Resolution) -> Result<Sample> {
        let mut layers = self.d1.query_in(b, crs, res)?.layers;
        for (role, p) in self.d2.query_in(b, crs, res)?.layers {
            match layers.get_mut(&role) {
                Some(dst) => mosaic_into(dst, &p, false),
                None => {
                    layers.insert(role, p);
                }
            }
        }
        Ok(Sample::new(layers, *b, crs.clone(), *res))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compose {
    Intersection,
    Union,
}

/// Dataset config file: one or more layers, optionally composed.
///
/// ```toml
/// compose = "intersection"
/// crs = "EPSG:5070"
/// res = 30.0
///
/// [[layer]]
/// root = "labels"
/// is_label = true
///
/// [[layer]]
/// root = "scenes"
/// glob = "*.tif"
/// ```
///
/// Relative roots are resolved against the config file's directory. Layers
/// are folded left to right.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub compose: Option<Compose>,
    pub crs: Option<CrsDef>,
    pub res: Option<f64>,
    #[serde(rename = "layer")]
    pub layers: Vec<LayerConfig>,
}

impl DatasetConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: DatasetConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for l in &mut cfg.layers {
            if l.root.is_relative() {
                l.root = base.join(&l.root);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Open every layer with one shared cache and compose them.
    pub fn open(&self, cache: Arc<BlockCache>) -> Result<Arc<dyn GeoDataset>> {
        let res = self.res.map(Resolution::square).transpose()?;
        let layers = self
            .layers
            .iter()
            .map(|l| open_layer(l, cache.clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut it = layers.into_iter();
        let mut acc = it
            .next()
            .ok_or_else(|| Error::Config("dataset config has no [[layer]]".into()))?;
        let rest: Vec<_> = it.collect();
        if rest.is_empty() {
            if self.crs.is_some() || res.is_some() {
                return Err(Error::Config(
                    "crs/res at top level need compose; set them on the layer".into(),
                ));
            }
            return Ok(acc);
        }
        let op = self
            .compose
            .ok_or_else(|| Error::Config("several layers need compose = \"intersection\" or \"union\"".into()))?;
        for d in rest {
            acc = match op {
                Compose::Intersection => Arc::new(intersect(acc, d, self.crs.clone(), res)?),
                Compose::Union => Arc::new(union(acc, d, self.crs.clone(), res)?),
            };
        }
        Ok(acc)
    }
}

pub fn open_layer(cfg: &LayerConfig, cache: Arc<BlockCache>) -> Result<Arc<dyn GeoDataset>> {
    Ok(match cfg.kind {
        LayerKind::Raster => Arc::new(RasterLayerDataset::open_with_cache(cfg, cache)?),
        LayerKind::Vector => Arc::new(VectorLayerDataset::open(cfg)?),
    })
}
