//! Polygon layers and their rasterisation to label masks.
//!
//! Input is a GeoJSON subset:
//!
//! ```text
//! document   := FeatureCollection | Feature
//! Feature    := { "type": "Feature", "geometry": geometry | null, "properties": { ... } }
//! geometry   := { "type": "Polygon", "coordinates": [ring, ...] }
//!             | { "type": "MultiPolygon", "coordinates": [[ring, ...], ...] }
//! ring       := [[x, y, ...], ...]   (>= 4 positions, first == last)
//! ```
//!
//! Features with a null geometry are skipped. Any other geometry type is an
//! [`Error::UnsupportedGeometry`]. An optional legacy `"crs"` member of the
//! form `{"type": "name", "properties": {"name": "EPSG:nnnn"}}` is honoured
//! when the caller does not supply a CRS.

use robust::{orient2d, Coord};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{BoundingBox, GeoTransform, GridShape, Resolution};
use crate::patch::Patch;
use crate::proj::{transform_point, CrsDef, ProjXY};
use crate::tiff::SampleType;

pub type Ring = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    /// Exterior ring first, then holes. Every ring is closed.
    pub rings: Vec<Ring>,
    pub burn: u16,
}

impl Polygon {
    pub fn new(rings: Vec<Ring>, burn: u16) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::Parse("polygon without rings".into()));
        }
        for r in &rings {
            if r.len() < 4 {
                return Err(Error::Parse(format!(
                    "ring with {} positions, need at least 4",
                    r.len()
                )));
            }
            if r.first() != r.last() {
                return Err(Error::Parse("ring is not closed".into()));
            }
            if r.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::Parse("non-finite coordinate".into()));
            }
        }
        if let Some((i, j)) = self_intersection(&rings[0]) {
            return Err(Error::Parse(format!(
                "exterior ring self-intersects at segments {i} and {j}"
            )));
        }
        Ok(Polygon { rings, burn })
    }

    pub fn bounds(&self) -> BoundingBox {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in &self.rings[0] {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        BoundingBox::raw(x0, y0, x1, y1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonSet {
    pub polygons: Vec<Polygon>,
    pub crs: CrsDef,
}

impl PolygonSet {
    pub fn empty(crs: CrsDef) -> Self {
        PolygonSet {
            polygons: Vec::new(),
            crs,
        }
    }

    /// Hull of all exterior rings, or `None` for an empty set.
    pub fn bounds(&self) -> Option<BoundingBox> {
        self.polygons
            .iter()
            .map(Polygon::bounds)
            .reduce(|a, b| crate::geo::bbox_union(&a, &b))
    }

    /// Project every vertex into `dst`. Edges stay straight in the
    /// destination CRS.
    pub fn reproject(&self, dst: &CrsDef) -> Result<PolygonSet> {
        if *dst == self.crs {
            return Ok(self.clone());
        }
        let polygons = self
            .polygons
            .iter()
            .map(|p| {
                let rings = p
                    .rings
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|&(x, y)| transform_point(&self.crs, dst, ProjXY::new(x, y)).map(|q| (q.x, q.y)))
                            .collect::<Result<Ring>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Polygon { rings, burn: p.burn })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolygonSet {
            polygons,
            crs: dst.clone(),
        })
    }
}

/// Parse a feature collection. `burn_property` names an integer property
/// holding each feature's label; without it every polygon burns 1.
pub fn parse_polygons(text: &str, burn_property: Option<&str>, crs: Option<CrsDef>) -> Result<PolygonSet> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    let crs = match crs {
        Some(c) => c,
        None => match doc.pointer("/crs/properties/name").and_then(Value::as_str) {
            Some(name) => parse_crs_name(name)?,
            None => CrsDef::wgs84(),
        },
    };
    let features: Vec<&Value> = match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("FeatureCollection without a features array".into()))?
            .iter()
            .collect(),
        Some("Feature") => vec![&doc],
        Some(t) => {
            return Err(Error::Parse(format!(
                "expected FeatureCollection or Feature, found {t:?}"
            )))
        }
        None => return Err(Error::Parse("missing \"type\" member".into())),
    };

    let mut polygons = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let geom = match f.get("geometry") {
            None => return Err(Error::Parse(format!("feature {i} has no geometry member"))),
            Some(Value::Null) => {
                log::warn!("feature {i} has a null geometry, skipped");
                continue;
            }
            Some(g) => g,
        };
        let burn = match burn_property {
            None => 1,
            Some(name) => {
                let v = f
                    .pointer(&format!("/properties/{name}"))
                    .ok_or_else(|| Error::Parse(format!("feature {i} lacks burn property {name:?}")))?;
                v.as_u64().and_then(|n| u16::try_from(n).ok()).ok_or_else(|| {
                    Error::Parse(format!("feature {i}: burn value {v} is not an integer in 0..=65535"))
                })?
            }
        };
        let coords = || {
            geom.get("coordinates")
                .ok_or_else(|| Error::Parse(format!("feature {i} geometry lacks coordinates")))
        };
        match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => polygons.push(Polygon::new(parse_rings(coords()?)?, burn)?),
            Some("MultiPolygon") => {
                let parts = coords()?
                    .as_array()
                    .ok_or_else(|| Error::Parse("MultiPolygon coordinates must be an array".into()))?;
                for p in parts {
                    polygons.push(Polygon::new(parse_rings(p)?, burn)?);
                }
            }
            Some(other) => return Err(Error::UnsupportedGeometry(format!("feature {i}: {other}"))),
            None => return Err(Error::Parse(format!("feature {i} geometry has no type"))),
        }
    }
    Ok(PolygonSet { polygons, crs })
}

fn parse_crs_name(name: &str) -> Result<CrsDef> {
    // accept both "EPSG:nnnn" and the OGC URN form
    let code = name.rsplit(':').next().unwrap_or(name);
    match code {
        "CRS84" => Ok(CrsDef::wgs84()),
        _ => format!("EPSG:{code}").parse(),
    }
}

fn parse_rings(v: &Value) -> Result<Vec<Ring>> {
    let rings = v
        .as_array()
        .ok_or_else(|| Error::Parse("polygon coordinates must be an array".into()))?;
    rings
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| Error::Parse("ring must be an array of positions".into()))?
                .iter()
                .map(|p| match p.as_array().map(|a| a.as_slice()) {
                    Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                        (Some(x), Some(y)) => Ok((x, y)),
                        _ => Err(Error::Parse(format!("non-numeric position {p}"))),
                    },
                    _ => Err(Error::Parse(format!("bad position {p}"))),
                })
                .collect()
        })
        .collect()
}

#[inline]
fn c(p: (f64, f64)) -> Coord<f64> {
    Coord { x: p.0, y: p.1 }
}

#[inline]
fn orient(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    orient2d(c(a), c(b), c(p))
}

fn within_box(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Exact closed-segment intersection test.
fn segments_intersect(a: (f64, f64), b: (f64, f64), p: (f64, f64), q: (f64, f64)) -> bool {
    let d1 = orient(p, q, a);
    let d2 = orient(p, q, b);
    let d3 = orient(a, b, p);
    let d4 = orient(a, b, q);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && within_box(p, q, a))
        || (d2 == 0.0 && within_box(p, q, b))
        || (d3 == 0.0 && within_box(a, b, p))
        || (d4 == 0.0 && within_box(a, b, q))
}

/// Sort-and-sweep over x extents; returns the first offending segment pair.
fn self_intersection(ring: &Ring) -> Option<(usize, usize)> {
    let n = ring.len() - 1;
    let seg = |i: usize| (ring[i], ring[i + 1]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = seg(i);
        let (p, q) = seg(j);
        a.0.min(b.0).total_cmp(&p.0.min(q.0))
    });
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let (a, b) = seg(i);
        let xmin = a.0.min(b.0);
        active.retain(|&j| {
            let (p, q) = seg(j);
            p.0.max(q.0) >= xmin
        });
        for &j in &active {
            let (p, q) = seg(j);
            let adjacent = i.abs_diff(j) == 1 || i.abs_diff(j) == n - 1;
            if adjacent {
                // sharing one vertex is fine; folding back along the same line is not
                let (shared, other_i, other_j) = if b == p {
                    (b, a, q)
                } else if a == q {
                    (a, b, p)
                } else if a == p {
                    (a, b, q)
                } else {
                    (b, a, p)
                };
                if n > 2 && orient(shared, other_i, other_j) == 0.0 && {
                    let di = (other_i.0 - shared.0, other_i.1 - shared.1);
                    let dj = (other_j.0 - shared.0, other_j.1 - shared.1);
                    di.0 * dj.0 + di.1 * dj.1 > 0.0
                } {
                    return Some((i.min(j), i.max(j)));
                }
            } else if segments_intersect(a, b, p, q) {
                return Some((i.min(j), i.max(j)));
            }
        }
        active.push(i);
    }
    None
}

/// Burn `polys` into `out` (row-major over `shape`) on the grid `t`.
///
/// A pixel is burned when its centre lies inside the polygon under the
/// even-odd rule or exactly on any of its edges. Later polygons overwrite
/// earlier ones.
pub fn burn_polygons(polys: &[Polygon], t: &GeoTransform, shape: GridShape, out: &mut [f32]) {
    debug_assert_eq!(out.len(), shape.len());
    debug_assert!(t.dx > 0.0 && t.dy < 0.0);
    let cx = |col: usize| t.pixel_to_world(0.5, col as f64 + 0.5).0;
    let cy = |row: usize| t.pixel_to_world(row as f64 + 0.5, 0.5).1;
    let cols = shape.cols;
    let mut toggles: Vec<usize> = Vec::new();
    let mut boundary: Vec<usize> = Vec::new();

    for poly in polys {
        let pb = poly.bounds();
        // rows whose centre may lie within the polygon's y range, padded by one
        let (r_top, _) = t.world_to_pixel(pb.minx, pb.maxy);
        let (r_bot, _) = t.world_to_pixel(pb.minx, pb.miny);
        let r0 = (r_top.floor() - 1.0).max(0.0) as usize;
        let r1 = ((r_bot.ceil() + 1.0).max(0.0) as usize).min(shape.rows);
        let burn = poly.burn as f32;

        for row in r0..r1 {
            let y = cy(row);
            toggles.clear();
            boundary.clear();
            for ring in &poly.rings {
                for w in ring.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if a.1 == y {
                        mark_exact(a.0, a.0, t, cols, &mut boundary);
                    }
                    if a.1 == y && b.1 == y {
                        mark_exact(a.0.min(b.0), a.0.max(b.0), t, cols, &mut boundary);
                        continue;
                    }
                    if (a.1 > y) == (b.1 > y) {
                        continue;
                    }
                    let (lo, hi) = if a.1 < b.1 { (a, b) } else { (b, a) };
                    let x_est = lo.0 + (y - lo.1) * (hi.0 - lo.0) / (hi.1 - lo.1);
                    let est = ((x_est - t.origin_x) / t.dx - 0.5).ceil();
                    let mut k = est.clamp(0.0, cols as f64) as usize;
                    // k = first column whose centre is not strictly left of the edge
                    while k > 0 && orient(lo, hi, (cx(k - 1), y)) <= 0.0 {
                        k -= 1;
                    }
                    while k < cols && orient(lo, hi, (cx(k), y)) > 0.0 {
                        k += 1;
                    }
                    if k < cols && orient(lo, hi, (cx(k), y)) == 0.0 {
                        boundary.push(k);
                    }
                    toggles.push(k);
                }
            }
            toggles.sort_unstable();
            let line = &mut out[row * cols..(row + 1) * cols];
            for pair in toggles.chunks_exact(2) {
                line[pair[0]..pair[1]].fill(burn);
            }
            for &k in &boundary {
                line[k] = burn;
            }
        }
    }
}

/// Columns whose centre x lies in `[x0, x1]` exactly.
fn mark_exact(x0: f64, x1: f64, t: &GeoTransform, cols: usize, out: &mut Vec<usize>) {
    let lo = (((x0 - t.origin_x) / t.dx - 0.5).floor() - 1.0).max(0.0) as usize;
    let hi = ((((x1 - t.origin_x) / t.dx - 0.5).ceil() + 2.0).max(0.0) as usize).min(cols);
    for k in lo..hi {
        let x = t.pixel_to_world(0.5, k as f64 + 0.5).0;
        if x >= x0 && x <= x1 {
            out.push(k);
        }
    }
}

/// Rasterise onto the grid of `b` at `r`. The result is a single-band u16
/// mask, background 0, every pixel valid. `b` must be in `polys.crs`.
pub fn rasterize(polys: &PolygonSet, b: &BoundingBox, r: &Resolution) -> Patch {
    let mut p = Patch::empty(1, *b, polys.crs.clone(), *r, SampleType::U16, None, 0.0);
    p.valid.fill(true);
    let t = p.transform();
    burn_polygons(&polys.polygons, &t, p.shape, &mut p.samples);
    p
}
