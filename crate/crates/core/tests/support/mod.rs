//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod fixtures;

use geopatch::cache::BlockCache;
use geopatch::tiff::{read_block, Scene};
use geopatch::vector::{Polygon, Ring};
use num::{BigRational, Zero};

/// Decode every pixel of one band of a scene through `cache`.
pub fn read_all(scene: &Scene, band: usize, cache: &BlockCache) -> Vec<f32> {
    let m = scene.meta();
    let (bh, bw) = m.block_size();
    let (brows, bcols) = m.block_grid();
    let mut out = vec![0.0; m.shape.len()];
    for br in 0..brows {
        for bc in 0..bcols {
            let blk = read_block(scene, band, br, bc, cache).unwrap();
            for r in 0..bh.min(m.shape.rows - br * bh) {
                for c in 0..bw.min(m.shape.cols - bc * bw) {
                    out[(br * bh + r) * m.shape.cols + bc * bw + c] = blk.get(r, c);
                }
            }
        }
    }
    out
}

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Sign of `(b - a) x (p - a)`. Decided in f64 when the result clears a
/// generous rounding bound, otherwise in exact rational arithmetic.
fn cross_sign(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> std::cmp::Ordering {
    let l = (b.0 - a.0) * (p.1 - a.1);
    let r = (b.1 - a.1) * (p.0 - a.0);
    let bound = 1e-10 * (l.abs() + r.abs());
    if (l - r).abs() > bound {
        return (l - r).partial_cmp(&0.0).unwrap();
    }
    let exact = (q(b.0) - q(a.0)) * (q(p.1) - q(a.1)) - (q(b.1) - q(a.1)) * (q(p.0) - q(a.0));
    if exact.is_zero() {
        std::cmp::Ordering::Equal
    } else if exact > BigRational::zero() {
        std::cmp::Ordering::Greater
    } else {
        std::cmp::Ordering::Less
    }
}

/// Closed even-odd membership: on any edge counts as inside, otherwise a
/// horizontal ray to +x must cross an odd number of edges.
pub fn point_in_polygon_exact(rings: &[Ring], x: f64, y: f64) -> bool {
    use std::cmp::Ordering::*;
    let p = (x, y);
    let mut crossings = 0usize;
    for ring in rings {
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            let in_box = x >= a.0.min(b.0) && x <= a.0.max(b.0) && y >= a.1.min(b.1) && y <= a.1.max(b.1);
            if in_box && cross_sign(a, b, p) == Equal {
                return true;
            }
            if (a.1 > y) != (b.1 > y) {
                // with the edge oriented upward, p lies left of it iff the crossing is to its right
                let (lo, hi) = if a.1 < b.1 { (a, b) } else { (b, a) };
                if cross_sign(lo, hi, p) == Greater {
                    crossings += 1;
                }
            }
        }
    }
    crossings % 2 == 1
}

/// Small deterministic generator so helpers need no RNG dependency.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Random star-shaped polygon around `(cx, cy)`. With `quantum` set, vertices
/// are snapped to multiples of it so edges pass exactly through pixel
/// centres and row lines. Returns `None` when snapping broke simplicity.
pub fn random_star(rng: &mut Lcg, cx: f64, cy: f64, rmax: f64, quantum: Option<f64>, burn: u16) -> Option<Polygon> {
    let n = 3 + (rng.next_f64() * 14.0) as usize;
    let mut angles: Vec<f64> = (0..n).map(|_| rng.range(0.0, std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let mut ring: Ring = angles
        .iter()
        .map(|a| {
            let r = rng.range(0.2 * rmax, rmax);
            let (x, y) = (cx + r * a.cos(), cy + r * a.sin());
            match quantum {
                Some(qm) => ((x / qm).round() * qm, (y / qm).round() * qm),
                None => (x, y),
            }
        })
        .collect();
    ring.dedup();
    if ring.len() < 3 {
        return None;
    }
    ring.push(ring[0]);
    Polygon::new(vec![ring], burn).ok()
}

/// Target extent of the alignment command: `xmin ymin xmax ymax` in EPSG:32619.
pub const A4_TE: [f64; 4] = [186585.0, 4505085.0, 423315.0, 4745415.0];
/// Target size of the alignment command: width, height.
pub const A4_TS: [usize; 2] = [7891, 8011];

/// Extent and size of the target grid at `1/scale` of the full width and
/// height, anchored at the lower-left corner and keeping the 30 m pitch.
pub fn a4_target(scale: usize) -> ([f64; 4], [usize; 2]) {
    let (w, h) = (A4_TS[0] / scale, A4_TS[1] / scale);
    let te = [
        A4_TE[0],
        A4_TE[1],
        A4_TE[0] + 30.0 * w as f64,
        A4_TE[1] + 30.0 * h as f64,
    ];
    (te, [w, h])
}

/// Write a u8 Albers (EPSG:5070) raster at 30 m covering the target extent
/// `te` with a two-pixel margin.
pub fn a4_source(path: &std::path::Path, te: [f64; 4]) {
    use geopatch::geo::BoundingBox;
    use geopatch::proj::{transform_bbox, CrsDef};
    use geopatch::tiff::{synth_raster, SampleType, SynthSpec};
    let utm = CrsDef::from_epsg(32619).unwrap();
    let albers = CrsDef::from_epsg(5070).unwrap();
    let b = transform_bbox(
        &utm,
        &albers,
        &BoundingBox::new(te[0], te[1], te[2], te[3]).unwrap(),
        21,
    )
    .unwrap();
    let snap = |v: f64, up: bool| {
        if up {
            (v / 30.0).ceil() * 30.0 + 60.0
        } else {
            (v / 30.0).floor() * 30.0 - 60.0
        }
    };
    let bounds = BoundingBox::new(
        snap(b.minx, false),
        snap(b.miny, false),
        snap(b.maxx, true),
        snap(b.maxy, true),
    )
    .unwrap();
    let mut spec = SynthSpec::new(albers, bounds, 30.0);
    spec.sample_type = SampleType::U8;
    synth_raster(&spec, path).unwrap();
}

/// Grid positions along one axis: start at 0, step by `stride` while the
/// patch fits, then add a flush position if the extent is not yet covered.
/// A patch larger than the extent gets one position.
pub fn enumerate_positions(extent: i64, patch: i64, stride: i64) -> usize {
    if patch > extent {
        return 1;
    }
    let mut n = 0;
    let mut p = 0;
    let mut last = 0;
    while p + patch <= extent {
        n += 1;
        last = p;
        p += stride;
    }
    if last + patch < extent {
        n += 1;
    }
    n
}

/// Width/height within a few ulps of the requested size.
pub fn exact_size(b: &geopatch::geo::BoundingBox, w: f64, h: f64) -> bool {
    let ulps = |v: f64| 4.0 * f64::EPSILON * v.abs().max(1.0);
    (b.width() - w).abs() <= ulps(b.maxx) && (b.height() - h).abs() <= ulps(b.maxy)
}
