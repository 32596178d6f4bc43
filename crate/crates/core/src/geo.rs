//! Bounding boxes, resolutions, affine geotransforms and grid arithmetic.
//!
//! Spatial intervals are half-open (`[min, max)`) so that abutting boxes
//! share no pixels. Time intervals are closed and default to the unbounded
//! range.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatiotemporal extent in the units of an associated CRS.
///
/// Time bounds are seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub minx: f64,
    pub maxx: f64,
    pub miny: f64,
    pub maxy: f64,
    pub mint: f64,
    pub maxt: f64,
}

impl BoundingBox {
    /// Spatial box in `xmin ymin xmax ymax` order with unbounded time.
    pub fn new(minx: f64, miny: f64, maxx: f64, maxy: f64) -> Result<Self> {
        Self::with_time(minx, miny, maxx, maxy, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn with_time(minx: f64, miny: f64, maxx: f64, maxy: f64, mint: f64, maxt: f64) -> Result<Self> {
        let b = BoundingBox {
            minx,
            maxx,
            miny,
            maxy,
            mint,
            maxt,
        };
        if [minx, maxx, miny, maxy].iter().any(|v| v.is_nan()) || mint.is_nan() || maxt.is_nan() {
            return Err(Error::InvalidArgument(format!("NaN in bounding box {b}")));
        }
        if minx > maxx || miny > maxy || mint > maxt {
            return Err(Error::InvalidArgument(format!("inverted bounding box {b}")));
        }
        Ok(b)
    }

    /// Unchecked constructor for internal use where ordering is already known.
    pub(crate) fn raw(minx: f64, miny: f64, maxx: f64, maxy: f64) -> Self {
        debug_assert!(minx <= maxx && miny <= maxy);
        BoundingBox {
            minx,
            maxx,
            miny,
            maxy,
            mint: f64::NEG_INFINITY,
            maxt: f64::INFINITY,
        }
    }

    pub fn time(mut self, mint: f64, maxt: f64) -> Result<Self> {
        if mint > maxt || mint.is_nan() || maxt.is_nan() {
            return Err(Error::InvalidArgument(format!("inverted time range [{mint}, {maxt}]")));
        }
        self.mint = mint;
        self.maxt = maxt;
        Ok(self)
    }

    pub fn width(&self) -> f64 {
        self.maxx - self.minx
    }

    pub fn height(&self) -> f64 {
        self.maxy - self.miny
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.minx + self.maxx) * 0.5, (self.miny + self.maxy) * 0.5)
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        spatial_overlap(self.minx, self.maxx, other.minx, other.maxx).is_some()
            && spatial_overlap(self.miny, self.maxy, other.miny, other.maxy).is_some()
            && self.mint.max(other.mint) <= self.maxt.min(other.maxt)
    }

    /// True when `other` lies entirely within `self` (all three axes).
    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.minx <= other.minx
            && other.maxx <= self.maxx
            && self.miny <= other.miny
            && other.maxy <= self.maxy
            && self.mint <= other.mint
            && other.maxt <= self.maxt
    }

    /// Half-open point containment.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.minx <= x && x < self.maxx && self.miny <= y && y < self.maxy
    }

    /// Grow by `dx` and `dy` on every side.
    pub fn expand(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox {
            minx: self.minx - dx,
            maxx: self.maxx + dx,
            miny: self.miny - dy,
            maxy: self.maxy + dy,
            ..*self
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox {
            minx: self.minx + dx,
            maxx: self.maxx + dx,
            miny: self.miny + dy,
            maxy: self.maxy + dy,
            ..*self
        }
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.minx, self.miny),
            (self.maxx, self.miny),
            (self.maxx, self.maxy),
            (self.minx, self.maxy),
        ]
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.minx, self.miny, self.maxx, self.maxy)?;
        if self.mint.is_finite() || self.maxt.is_finite() {
            write!(f, " t[{}, {}]", self.mint, self.maxt)?;
        }
        Ok(())
    }
}

// Degenerate (zero-width) inputs are treated as closed so that a point
// still intersects the box containing it.
fn spatial_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> Option<(f64, f64)> {
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if lo < hi || (lo == hi && (a0 == a1 || b0 == b1)) {
        Some((lo, hi))
    } else {
        None
    }
}

/// Componentwise intersection over x, y and time.
pub fn bbox_intersection(a: &BoundingBox, b: &BoundingBox) -> Result<BoundingBox> {
    let empty = || Error::EmptyIntersection(format!("{a} and {b} do not overlap"));
    let (minx, maxx) = spatial_overlap(a.minx, a.maxx, b.minx, b.maxx).ok_or_else(empty)?;
    let (miny, maxy) = spatial_overlap(a.miny, a.maxy, b.miny, b.maxy).ok_or_else(empty)?;
    let mint = a.mint.max(b.mint);
    let maxt = a.maxt.min(b.maxt);
    if mint > maxt {
        return Err(empty());
    }
    Ok(BoundingBox {
        minx,
        maxx,
        miny,
        maxy,
        mint,
        maxt,
    })
}

/// Smallest box containing both inputs.
pub fn bbox_union(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    BoundingBox {
        minx: a.minx.min(b.minx),
        maxx: a.maxx.max(b.maxx),
        miny: a.miny.min(b.miny),
        maxy: a.maxy.max(b.maxy),
        mint: a.mint.min(b.mint),
        maxt: a.maxt.max(b.maxt),
    }
}

/// Pixel size in CRS units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub x: f64,
    pub y: f64,
}

impl Resolution {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got ({x}, {y})"
            )));
        }
        Ok(Resolution { x, y })
    }

    pub fn square(r: f64) -> Result<Self> {
        Self::new(r, r)
    }

    /// Equality within `rel` relative tolerance.
    pub fn approx_eq(&self, other: &Resolution, rel: f64) -> bool {
        ((self.x - other.x).abs() <= rel * self.x.abs().max(other.x.abs()))
            && ((self.y - other.y).abs() <= rel * self.y.abs().max(other.y.abs()))
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.x, self.y)
    }
}

/// Raster height and width in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!("empty grid {rows}x{cols}")));
        }
        Ok(GridShape { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rows x {} cols", self.rows, self.cols)
    }
}

/// Pixel grid covering `b` at resolution `r`, rounding to nearest with ties away from zero.
pub fn grid_shape(b: &BoundingBox, r: &Resolution) -> GridShape {
    let cols = (b.width() / r.x).round().max(1.0) as usize;
    let rows = (b.height() / r.y).round().max(1.0) as usize;
    GridShape { rows, cols }
}

/// North-up affine georeferencing. The origin is the outer corner of pixel
/// (0, 0); `dy` is signed (negative for north-up rasters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub dx: f64,
    pub dy: f64,
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, dx: f64, dy: f64) -> Self {
        GeoTransform {
            origin_x,
            origin_y,
            dx,
            dy,
        }
    }

    /// North-up transform whose origin is the top-left corner of `b`.
    pub fn from_bbox(b: &BoundingBox, r: &Resolution) -> Self {
        GeoTransform::new(b.minx, b.maxy, r.x, -r.y)
    }

    /// Fractional `(row, col)`; the center of pixel `(i, j)` is `(i + 0.5, j + 0.5)`.
    #[inline]
    pub fn world_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        ((y - self.origin_y) / self.dy, (x - self.origin_x) / self.dx)
    }

    #[inline]
    pub fn pixel_to_world(&self, row: f64, col: f64) -> (f64, f64) {
        (self.origin_x + col * self.dx, self.origin_y + row * self.dy)
    }

    pub fn resolution(&self) -> Resolution {
        Resolution {
            x: self.dx.abs(),
            y: self.dy.abs(),
        }
    }

    /// Extent covered by a grid of `shape` pixels.
    pub fn bounds(&self, shape: GridShape) -> BoundingBox {
        let (x0, y0) = self.pixel_to_world(0.0, 0.0);
        let (x1, y1) = self.pixel_to_world(shape.rows as f64, shape.cols as f64);
        BoundingBox::raw(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1))
    }
}
