//! Windowed reads and inverse-mapped resampling onto a destination grid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::BlockCache;
use crate::error::{Error, Result};
use crate::geo::{grid_shape, BoundingBox, GeoTransform, GridShape, Resolution};
use crate::patch::Patch;
use crate::proj::{transform_bbox, transform_point, CrsDef, ProjXY, DEFAULT_DENSIFY};
use crate::tiff::{SampleType, Scene, TiffWriter, WriterOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    Nearest,
    Bilinear,
}

impl Resampling {
    /// Nearest for labels and integer bands, bilinear for float imagery.
    pub fn default_for(sample_type: SampleType, is_label: bool) -> Self {
        if is_label || sample_type.is_integer() {
            Resampling::Nearest
        } else {
            Resampling::Bilinear
        }
    }
}

impl FromStr for Resampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" | "near" => Ok(Resampling::Nearest),
            "bilinear" => Ok(Resampling::Bilinear),
            _ => Err(Error::InvalidArgument(format!("unknown resampling method {s:?}"))),
        }
    }
}

impl fmt::Display for Resampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resampling::Nearest => "nearest",
            Resampling::Bilinear => "bilinear",
        })
    }
}

/// Spacing in destination pixels between exactly projected nodes; pixels in
/// between are interpolated. Zero projects every pixel.
pub const DEFAULT_APPROX_STEP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpOptions {
    pub method: Resampling,
    pub fill: f32,
    pub approx_step: usize,
}

impl WarpOptions {
    pub fn new(method: Resampling) -> Self {
        WarpOptions {
            method,
            fill: 0.0,
            approx_step: DEFAULT_APPROX_STEP,
        }
    }
}

/// Grid-aligned pixel range `[r0, r1) x [c0, c1)` of `b` on `t`, expanded
/// outward. Edges within 1e-6 pixel of a grid line snap to it.
pub fn snap_window(t: &GeoTransform, b: &BoundingBox) -> (i64, i64, i64, i64) {
    const EPS: f64 = 1e-6;
    let (ra, ca) = t.world_to_pixel(b.minx, b.maxy);
    let (rb, cb) = t.world_to_pixel(b.maxx, b.miny);
    let (rlo, rhi) = (ra.min(rb), ra.max(rb));
    let (clo, chi) = (ca.min(cb), ca.max(cb));
    let r0 = (rlo + EPS).floor() as i64;
    let c0 = (clo + EPS).floor() as i64;
    let r1 = ((rhi - EPS).ceil() as i64).max(r0 + 1);
    let c1 = ((chi - EPS).ceil() as i64).max(c0 + 1);
    (r0, r1, c0, c1)
}

/// Read the part of `scene` under `b` (in the scene CRS) at native
/// resolution. The window is snapped outward to the scene grid; pixels
/// outside the scene or equal to nodata in every band are invalid.
pub fn read_window(scene: &Scene, b: &BoundingBox, cache: &BlockCache, fill: f32) -> Result<Patch> {
    let m = scene.meta();
    let (r0, r1, c0, c1) = snap_window(&m.transform, b);
    let (rows, cols) = ((r1 - r0) as usize, (c1 - c0) as usize);
    let (x0, y0) = m.transform.pixel_to_world(r0 as f64, c0 as f64);
    let (x1, y1) = m.transform.pixel_to_world(r1 as f64, c1 as f64);
    let bbox = BoundingBox::raw(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1));
    let res = m.res();
    let mut patch = Patch::empty(m.bands, bbox, m.crs.clone(), res, m.sample_type, m.nodata, fill);
    // guard against rounding in grid_shape of the reconstructed box
    if patch.shape.rows != rows || patch.shape.cols != cols {
        patch.shape = crate::geo::GridShape::new(rows, cols)?;
        patch.samples = vec![fill; m.bands * rows * cols];
        patch.valid = vec![false; rows * cols];
    }

    // overlap with the scene in window coordinates
    let (sr0, sr1) = (r0.max(0), r1.min(m.shape.rows as i64));
    let (sc0, sc1) = (c0.max(0), c1.min(m.shape.cols as i64));
    if sr0 >= sr1 || sc0 >= sc1 {
        return Ok(patch);
    }
    let (bh, bw) = m.block_size();
    let n = rows * cols;
    let mut all_nodata = vec![true; n];
    let br0 = sr0 as usize / bh;
    let br1 = (sr1 as usize - 1) / bh;
    let bc0 = sc0 as usize / bw;
    let bc1 = (sc1 as usize - 1) / bw;
    for band in 0..m.bands {
        for br in br0..=br1 {
            for bc in bc0..=bc1 {
                let blk = scene.block(band, br, bc, cache)?;
                let rr0 = (br * bh).max(sr0 as usize);
                let rr1 = ((br + 1) * bh).min(sr1 as usize);
                let cc0 = (bc * bw).max(sc0 as usize);
                let cc1 = ((bc + 1) * bw).min(sc1 as usize);
                for row in rr0..rr1 {
                    let wr = (row as i64 - r0) as usize;
                    let wc = (cc0 as i64 - c0) as usize;
                    let dst_at = (band * rows + wr) * cols + wc;
                    let dst = &mut patch.samples[dst_at..dst_at + (cc1 - cc0)];
                    blk.data.copy_row((row - br * bh) * bw + (cc0 - bc * bw), dst);
                    let flags = &mut all_nodata[wr * cols + wc..wr * cols + wc + (cc1 - cc0)];
                    match m.nodata {
                        None => flags.fill(false),
                        Some(nd) if nd.is_nan() => flags.iter_mut().zip(dst.iter()).for_each(|(f, v)| *f &= v.is_nan()),
                        Some(nd) => {
                            let nd = nd as f32;
                            flags.iter_mut().zip(dst.iter()).for_each(|(f, v)| *f &= *v == nd);
                        }
                    }
                }
            }
        }
    }
    for row in sr0..sr1 {
        let wr = (row - r0) as usize;
        for col in sc0..sc1 {
            let i = wr * cols + (col - c0) as usize;
            patch.valid[i] = !all_nodata[i];
        }
    }
    patch.apply_fill();
    Ok(patch)
}

/// Source pixel coordinates for every destination pixel centre, or NaN
/// where the point falls outside the projection domain.
fn source_coords(
    src_crs: &CrsDef,
    src_t: &GeoTransform,
    dst_crs: &CrsDef,
    dst_t: &GeoTransform,
    rows: usize,
    cols: usize,
    approx_step: usize,
) -> Vec<(f64, f64)> {
    let exact = |r: f64, c: f64| -> (f64, f64) {
        let (x, y) = dst_t.pixel_to_world(r + 0.5, c + 0.5);
        match transform_point(dst_crs, src_crs, ProjXY::new(x, y)) {
            Ok(p) => src_t.world_to_pixel(p.x, p.y),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let mut out = Vec::with_capacity(rows * cols);
    if dst_crs == src_crs || approx_step == 0 {
        // same CRS is affine, nothing to interpolate
        for r in 0..rows {
            for c in 0..cols {
                out.push(exact(r as f64, c as f64));
            }
        }
        return out;
    }

    let nodes = |n: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..n).step_by(approx_step).collect();
        if *v.last().unwrap() != n - 1 {
            v.push(n - 1);
        }
        v
    };
    let (nr, nc) = (nodes(rows), nodes(cols));
    let mut grid = Vec::with_capacity(nr.len() * nc.len());
    for &r in &nr {
        for &c in &nc {
            grid.push(exact(r as f64, c as f64));
        }
    }
    if grid.iter().any(|p| p.0.is_nan()) {
        for r in 0..rows {
            for c in 0..cols {
                out.push(exact(r as f64, c as f64));
            }
        }
        return out;
    }
    let locate = |nodes: &[usize], i: usize| -> (usize, f64) {
        if nodes.len() == 1 {
            return (0, 0.0);
        }
        let k = (i / approx_step).min(nodes.len() - 2);
        let t = (i - nodes[k]) as f64 / (nodes[k + 1] - nodes[k]) as f64;
        (k, t)
    };
    let w = nc.len();
    let at = |i: usize, j: usize| grid[i * w + j.min(w - 1)];
    for r in 0..rows {
        let (i, tr) = locate(&nr, r);
        let i1 = (i + 1).min(nr.len() - 1);
        for c in 0..cols {
            let (j, tc) = locate(&nc, c);
            let j1 = (j + 1).min(w - 1);
            let (a, b, p, q) = (at(i, j), at(i, j1), at(i1, j), at(i1, j1));
            let top = (a.0 + (b.0 - a.0) * tc, a.1 + (b.1 - a.1) * tc);
            let bot = (p.0 + (q.0 - p.0) * tc, p.1 + (q.1 - p.1) * tc);
            out.push((top.0 + (bot.0 - top.0) * tr, top.1 + (bot.1 - top.1) * tr));
        }
    }
    out
}

/// Resample `src` onto the grid of `dst_bbox` at `dst_res` in `dst_crs`.
///
/// Each destination pixel centre is mapped into `src`; nearest picks the
/// source pixel containing it, bilinear blends the four surrounding valid
/// centres with renormalised weights. Either way a pixel is valid only when
/// the source pixel containing its centre is valid; pixels that map outside
/// the source or the projection domain are invalid.
pub fn resample(
    src: &Patch,
    dst_crs: &CrsDef,
    dst_bbox: &BoundingBox,
    dst_res: &Resolution,
    opts: &WarpOptions,
) -> Patch {
    let mut out = Patch::empty(
        src.bands,
        *dst_bbox,
        dst_crs.clone(),
        *dst_res,
        src.sample_type,
        src.nodata,
        opts.fill,
    );
    let (rows, cols) = (out.shape.rows, out.shape.cols);
    let (sh, sw) = (src.shape.rows as i64, src.shape.cols as i64);
    let src_t = src.transform();
    let dst_t = out.transform();
    let coords = source_coords(&src.crs, &src_t, dst_crs, &dst_t, rows, cols, opts.approx_step);
    let n_out = rows * cols;
    let n_src = src.shape.len();

    for (i, &(rf, cf)) in coords.iter().enumerate() {
        if !(rf.is_finite() && cf.is_finite()) {
            continue;
        }
        match opts.method {
            Resampling::Nearest => {
                let (r, c) = (rf.floor() as i64, cf.floor() as i64);
                if r < 0 || c < 0 || r >= sh || c >= sw {
                    continue;
                }
                let s = (r * sw + c) as usize;
                if !src.valid[s] {
                    continue;
                }
                out.valid[i] = true;
                for b in 0..src.bands {
                    out.samples[b * n_out + i] = src.samples[b * n_src + s];
                }
            }
            Resampling::Bilinear => {
                // coverage follows the pixel containing the centre, as for nearest
                let (r, c) = (rf.floor() as i64, cf.floor() as i64);
                if r < 0 || c < 0 || r >= sh || c >= sw || !src.valid[(r * sw + c) as usize] {
                    continue;
                }
                let (v, u) = (rf - 0.5, cf - 0.5);
                let (r0, c0) = (v.floor() as i64, u.floor() as i64);
                let (fv, fu) = (v - r0 as f64, u - c0 as f64);
                let taps = [
                    (r0, c0, (1.0 - fv) * (1.0 - fu)),
                    (r0, c0 + 1, (1.0 - fv) * fu),
                    (r0 + 1, c0, fv * (1.0 - fu)),
                    (r0 + 1, c0 + 1, fv * fu),
                ];
                let mut wsum = 0.0f64;
                let mut used = [(0usize, 0.0f64); 4];
                let mut k = 0;
                for &(r, c, w) in &taps {
                    if w > 0.0 && r >= 0 && c >= 0 && r < sh && c < sw {
                        let s = (r * sw + c) as usize;
                        if src.valid[s] {
                            used[k] = (s, w);
                            k += 1;
                            wsum += w;
                        }
                    }
                }
                if wsum <= 0.0 {
                    continue;
                }
                out.valid[i] = true;
                for b in 0..src.bands {
                    let base = b * n_src;
                    let acc: f64 = used[..k].iter().map(|&(s, w)| src.samples[base + s] as f64 * w).sum();
                    out.samples[b * n_out + i] = (acc / wsum) as f32;
                }
            }
        }
    }
    out
}

/// Whether `b` at `res` in `crs` lies on the scene's own pixel grid.
fn on_scene_grid(scene: &Scene, crs: &CrsDef, b: &BoundingBox, res: &Resolution) -> bool {
    let m = scene.meta();
    if *crs != m.crs || !res.approx_eq(&m.res(), 1e-9) {
        return false;
    }
    let (r, c) = m.transform.world_to_pixel(b.minx, b.maxy);
    (r - r.round()).abs() < 1e-6 && (c - c.round()).abs() < 1e-6
}

/// Produce the part of `scene` covering `dst_bbox` on the destination grid.
pub fn warp_scene(
    scene: &Scene,
    dst_crs: &CrsDef,
    dst_bbox: &BoundingBox,
    dst_res: &Resolution,
    opts: &WarpOptions,
    cache: &BlockCache,
) -> Result<Patch> {
    let m = scene.meta();
    let shape = grid_shape(dst_bbox, dst_res);
    if on_scene_grid(scene, dst_crs, dst_bbox, dst_res) {
        // same grid: a plain window read, no resampling
        let t = GeoTransform::from_bbox(dst_bbox, dst_res);
        let (x1, y1) = t.pixel_to_world(shape.rows as f64, shape.cols as f64);
        let exact = BoundingBox::raw(dst_bbox.minx, y1, x1, dst_bbox.maxy);
        let mut p = read_window(scene, &exact, cache, opts.fill)?;
        if p.shape == shape {
            p.bbox = *dst_bbox;
            p.res = *dst_res;
            return Ok(p);
        }
    }
    let empty = || {
        Patch::empty(
            m.bands,
            *dst_bbox,
            dst_crs.clone(),
            *dst_res,
            m.sample_type,
            m.nodata,
            opts.fill,
        )
    };
    let src_box = match transform_bbox(dst_crs, &m.crs, dst_bbox, DEFAULT_DENSIFY) {
        Ok(b) => b,
        Err(Error::OutOfDomain(_)) => return Ok(empty()),
        Err(e) => return Err(e),
    };
    let res = m.res();
    let margin = src_box.expand(res.x, res.y);
    if !margin.intersects(&m.bounds()) {
        return Ok(empty());
    }
    let clipped = crate::geo::bbox_intersection(&margin, &m.bounds().time(f64::NEG_INFINITY, f64::INFINITY)?)?;
    let src = read_window(scene, &clipped, cache, opts.fill)?;
    Ok(resample(&src, dst_crs, dst_bbox, dst_res, opts))
}

/// Warp `scene` onto the grid `dst_bbox`/`shape` in `dst_crs` and stream it to
/// a tiled GeoTIFF at `path`, one output tile at a time. Uncovered pixels
/// hold `nodata` (zero when `None`), which is also recorded in the file.
pub fn warp_to_file(
    scene: &Scene,
    dst_crs: &CrsDef,
    dst_bbox: &BoundingBox,
    shape: GridShape,
    method: Resampling,
    nodata: Option<f64>,
    path: &Path,
    opts: WriterOptions,
    cache: &BlockCache,
) -> Result<()> {
    let m = scene.meta();
    let res = Resolution::new(
        dst_bbox.width() / shape.cols as f64,
        dst_bbox.height() / shape.rows as f64,
    )?;
    let t = GeoTransform::from_bbox(dst_bbox, &res);
    let mut wopts = WarpOptions::new(method);
    wopts.fill = nodata.map_or(0.0, |v| v as f32);
    let mut w = TiffWriter::create(path, dst_crs, t, shape, m.bands, m.sample_type, nodata, opts)?;
    let (trows, tcols) = w.tile_grid();
    let ts = w.tile_size() as f64;
    for tr in 0..trows {
        for tc in 0..tcols {
            let (x0, y1) = t.pixel_to_world(tr as f64 * ts, tc as f64 * ts);
            let tb = BoundingBox::new(x0, y1 - ts * res.y, x0 + ts * res.x, y1)?;
            let mut p = warp_scene(scene, dst_crs, &tb, &res, &wopts, cache)?;
            p.apply_fill();
            w.push_tile(&p.samples)?;
        }
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utm() -> CrsDef {
        CrsDef::from_epsg(32619).unwrap()
    }

    fn patch(samples: Vec<f32>, b: (f64, f64, f64, f64), res: f64) -> Patch {
        Patch::from_samples(
            samples,
            1,
            BoundingBox::new(b.0, b.1, b.2, b.3).unwrap(),
            utm(),
            Resolution::square(res).unwrap(),
            SampleType::F32,
        )
        .unwrap()
    }

    #[test]
    fn bilinear_centre_of_two_by_two() {
        let src = patch(vec![0.0, 10.0, 20.0, 30.0], (0.0, 0.0, 2.0, 2.0), 1.0);
        // a single destination pixel whose centre is the source's geometric centre
        let out = resample(
            &src,
            &utm(),
            &BoundingBox::new(0.5, 0.5, 1.5, 1.5).unwrap(),
            &Resolution::square(1.0).unwrap(),
            &WarpOptions::new(Resampling::Bilinear),
        );
        assert_eq!(out.shape.len(), 1);
        assert!(out.valid[0]);
        assert_eq!(out.samples[0], 15.0);
    }

    #[test]
    fn bilinear_renormalises_over_valid_neighbours() {
        let mut src = patch(vec![0.0, 10.0, 20.0, 30.0], (0.0, 0.0, 2.0, 2.0), 1.0);
        src.valid[0] = false;
        let out = resample(
            &src,
            &utm(),
            &BoundingBox::new(0.5, 0.5, 1.5, 1.5).unwrap(),
            &Resolution::square(1.0).unwrap(),
            &WarpOptions::new(Resampling::Bilinear),
        );
        assert_eq!(out.samples[0], 20.0);
        src.valid = vec![false, true, true, false];
        let out = resample(
            &src,
            &utm(),
            &BoundingBox::new(0.5, 0.5, 1.5, 1.5).unwrap(),
            &Resolution::square(1.0).unwrap(),
            &WarpOptions::new(Resampling::Bilinear),
        );
        assert!(!out.valid[0]);
        assert_eq!(out.samples[0], 0.0);
    }

    #[test]
    fn nearest_ties_go_to_greater_index() {
        // destination centre at x = 1.0 sits on the boundary between source columns 0 and 1
        let src = patch(vec![1.0, 2.0], (0.0, 0.0, 2.0, 1.0), 1.0);
        let out = resample(
            &src,
            &utm(),
            &BoundingBox::new(0.5, 0.0, 1.5, 1.0).unwrap(),
            &Resolution::square(1.0).unwrap(),
            &WarpOptions::new(Resampling::Nearest),
        );
        assert_eq!(out.samples, vec![2.0]);
    }

    #[test]
    fn outside_source_is_invalid() {
        let src = patch(vec![5.0; 4], (0.0, 0.0, 2.0, 2.0), 1.0);
        let out = resample(
            &src,
            &utm(),
            &BoundingBox::new(1.0, 0.0, 4.0, 2.0).unwrap(),
            &Resolution::square(1.0).unwrap(),
            &WarpOptions::new(Resampling::Nearest),
        );
        assert_eq!(out.valid, vec![true, false, false, true, false, false]);
    }

    #[test]
    fn snap_expands_outward_and_tolerates_noise() {
        let t = GeoTransform::new(0.0, 100.0, 10.0, -10.0);
        let b = BoundingBox::new(15.0, 41.0, 35.0, 79.0).unwrap();
        assert_eq!(snap_window(&t, &b), (2, 6, 1, 4));
        let b = BoundingBox::new(10.0 + 1e-9, 40.0, 30.0 - 1e-9, 80.0).unwrap();
        assert_eq!(snap_window(&t, &b), (2, 6, 1, 3));
    }

    #[test]
    fn approximate_coords_track_exact_ones() {
        let src_crs = CrsDef::from_epsg(5070).unwrap();
        let src_t = GeoTransform::new(1700000.0, 2100000.0, 30.0, -30.0);
        let dst_t = GeoTransform::new(300000.0, 4600000.0, 30.0, -30.0);
        let approx = source_coords(&src_crs, &src_t, &utm(), &dst_t, 224, 224, 16);
        let exact = source_coords(&src_crs, &src_t, &utm(), &dst_t, 224, 224, 0);
        let worst = approx
            .iter()
            .zip(&exact)
            .map(|(a, e)| (a.0 - e.0).abs().max((a.1 - e.1).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "max interpolation error {worst} px");
    }
}
