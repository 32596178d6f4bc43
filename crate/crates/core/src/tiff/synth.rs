//! Synthetic rasters whose samples encode a known function of each pixel
//! centre's world coordinate, so alignment can be checked after warping.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::writer::{Compression, TiffWriter, WriterOptions, DEFAULT_TILE_SIZE};
use super::SampleType;
use crate::error::{Error, Result};
use crate::geo::{grid_shape, BoundingBox, GeoTransform, Resolution};
use crate::proj::{transform_point, CrsDef, ProjXY};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoding {
    /// Every sample holds `value`.
    Constant { value: f64 },
    /// `(floor(x / res) + floor(y / res)) mod 65536` (mod 256 for u8) at
    /// the pixel centre in the reference CRS.
    #[default]
    Sum,
    /// Band 0 holds `x - offset[0]`, band 1 `y - offset[1]`, in the
    /// reference CRS; further bands hold their band index.
    Coords { offset: [f64; 2] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Output file name (relative to the output directory) for the CLI.
    #[serde(default)]
    pub name: Option<String>,
    pub crs: CrsDef,
    /// `[xmin, ymin, xmax, ymax]`
    pub bounds: [f64; 4],
    pub res: f64,
    #[serde(default = "one")]
    pub bands: usize,
    #[serde(default = "default_sample_type")]
    pub sample_type: SampleType,
    #[serde(default)]
    pub encoding: Encoding,
    /// CRS in which the encoding is evaluated; defaults to `crs`.
    #[serde(default)]
    pub reference_crs: Option<CrsDef>,
    #[serde(default)]
    pub nodata: Option<f64>,
    #[serde(default = "default_tile")]
    pub tile_size: usize,
    #[serde(default)]
    pub compression: Compression,
}

fn one() -> usize {
    1
}

fn default_sample_type() -> SampleType {
    SampleType::U16
}

fn default_tile() -> usize {
    DEFAULT_TILE_SIZE
}

impl SynthSpec {
    pub fn new(crs: CrsDef, bounds: BoundingBox, res: f64) -> Self {
        SynthSpec {
            name: None,
            crs,
            bounds: [bounds.minx, bounds.miny, bounds.maxx, bounds.maxy],
            res,
            bands: 1,
            sample_type: SampleType::U16,
            encoding: Encoding::Sum,
            reference_crs: None,
            nodata: None,
            tile_size: DEFAULT_TILE_SIZE,
            compression: Compression::None,
        }
    }

    pub fn bbox(&self) -> Result<BoundingBox> {
        BoundingBox::new(self.bounds[0], self.bounds[1], self.bounds[2], self.bounds[3])
    }

    pub fn resolution(&self) -> Result<Resolution> {
        Resolution::square(self.res)
    }

    pub fn transform(&self) -> Result<GeoTransform> {
        Ok(GeoTransform::from_bbox(&self.bbox()?, &self.resolution()?))
    }

    fn validate(&self) -> Result<()> {
        let b = self.bbox()?;
        if b.width() <= 0.0 || b.height() <= 0.0 {
            return Err(Error::InvalidArgument(format!("empty synthetic raster bounds {b}")));
        }
        self.resolution()?;
        if self.bands == 0 {
            return Err(Error::InvalidArgument(
                "synthetic raster needs at least one band".into(),
            ));
        }
        if let Encoding::Coords { .. } = self.encoding {
            if self.bands < 2 || self.sample_type != SampleType::F32 {
                return Err(Error::InvalidArgument("coords encoding needs >= 2 f32 bands".into()));
            }
        }
        Ok(())
    }

    /// Encoded value of `band` for a pixel centre at world `(x, y)` in the
    /// raster's own CRS, or `None` when it cannot be placed in the reference CRS.
    pub fn value_at(&self, band: usize, x: f64, y: f64) -> Option<f64> {
        let (rx, ry) = match &self.reference_crs {
            Some(r) => {
                let p = transform_point(&self.crs, r, ProjXY::new(x, y)).ok()?;
                (p.x, p.y)
            }
            None => (x, y),
        };
        Some(match &self.encoding {
            Encoding::Constant { value } => *value,
            Encoding::Sum => {
                let modulus = if self.sample_type == SampleType::U8 {
                    256.0
                } else {
                    65536.0
                };
                ((rx / self.res).floor() + (ry / self.res).floor()).rem_euclid(modulus)
            }
            Encoding::Coords { offset } => match band {
                0 => rx - offset[0],
                1 => ry - offset[1],
                b => b as f64,
            },
        })
    }
}

/// Generate the raster described by `spec` at `path`.
pub fn synth_raster(spec: &SynthSpec, path: &Path) -> Result<()> {
    spec.validate()?;
    let bbox = spec.bbox()?;
    let res = spec.resolution()?;
    let shape = grid_shape(&bbox, &res);
    let transform = GeoTransform::from_bbox(&bbox, &res);
    let opts = WriterOptions {
        tile_size: spec.tile_size,
        compression: spec.compression,
    };
    let mut w = TiffWriter::create(
        path,
        &spec.crs,
        transform,
        shape,
        spec.bands,
        spec.sample_type,
        spec.nodata,
        opts,
    )?;
    let t = w.tile_size();
    let (trows, tcols) = w.tile_grid();
    let pad = spec.nodata.unwrap_or(0.0) as f32;
    for tr in 0..trows {
        let tiles: Vec<Vec<f32>> = (0..tcols)
            .into_par_iter()
            .map(|tc| {
                let mut tile = vec![pad; spec.bands * t * t];
                for r in 0..t.min(shape.rows - tr * t) {
                    for c in 0..t.min(shape.cols - tc * t) {
                        let (x, y) = transform.pixel_to_world((tr * t + r) as f64 + 0.5, (tc * t + c) as f64 + 0.5);
                        for b in 0..spec.bands {
                            if let Some(v) = spec.value_at(b, x, y) {
                                tile[(b * t + r) * t + c] = spec.sample_type.quantize(v);
                            }
                        }
                    }
                }
                tile
            })
            .collect();
        for tile in tiles {
            w.push_tile(&tile)?;
        }
    }
    w.finish()
}
