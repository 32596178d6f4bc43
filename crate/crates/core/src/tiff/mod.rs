//! GeoTIFF subset: classic TIFF (little or big endian), chunky pixel
//! layout, tiled or stripped, compression none or deflate, samples u8, u16,
//! i16 or f32. Only the first (full-resolution) IFD is read; COG overviews
//! are ignored.
//!
//! Tags understood on read:
//!
//! | tag   | name                | notes                                      |
//! |-------|---------------------|--------------------------------------------|
//! | 256   | ImageWidth          | required                                   |
//! | 257   | ImageLength         | required                                   |
//! | 258   | BitsPerSample       | 8, 16 or 32, equal across samples          |
//! | 259   | Compression         | 1 (none), 8 or 32946 (deflate)             |
//! | 273   | StripOffsets        | stripped layout                            |
//! | 277   | SamplesPerPixel     | band count, default 1                      |
//! | 278   | RowsPerStrip        | default: whole image                       |
//! | 279   | StripByteCounts     | stripped layout                            |
//! | 284   | PlanarConfiguration | must be 1 (chunky)                         |
//! | 317   | Predictor           | must be absent or 1                        |
//! | 322/3 | TileWidth/Length    | multiples of 16                            |
//! | 324/5 | TileOffsets/Counts  | tiled layout                               |
//! | 339   | SampleFormat        | 1 uint, 2 int, 3 float; default 1          |
//! | 33550 | ModelPixelScale     | required                                   |
//! | 33922 | ModelTiepoint       | required                                   |
//! | 34264 | ModelTransformation | rejected unless rotation terms are zero    |
//! | 34735 | GeoKeyDirectory     | keys 1024, 1025, 2048, 3072                |
//! | 42113 | GDAL_NODATA         | ASCII nodata value                         |

mod reader;
mod synth;
mod writer;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BoundingBox, GeoTransform, GridShape, Resolution};
use crate::proj::CrsDef;

pub use reader::{parse_geotiff_header, read_block, Scene, TimePattern};
pub use synth::{synth_raster, Encoding, SynthSpec};
pub use writer::{write_geotiff, write_geotiff_with, Compression, TiffWriter, WriterOptions, DEFAULT_TILE_SIZE};

pub(crate) mod tags {
    pub const IMAGE_WIDTH: u16 = 256;
    pub const IMAGE_LENGTH: u16 = 257;
    pub const BITS_PER_SAMPLE: u16 = 258;
    pub const COMPRESSION: u16 = 259;
    pub const PHOTOMETRIC: u16 = 262;
    pub const STRIP_OFFSETS: u16 = 273;
    pub const SAMPLES_PER_PIXEL: u16 = 277;
    pub const ROWS_PER_STRIP: u16 = 278;
    pub const STRIP_BYTE_COUNTS: u16 = 279;
    pub const PLANAR_CONFIG: u16 = 284;
    pub const PREDICTOR: u16 = 317;
    pub const TILE_WIDTH: u16 = 322;
    pub const TILE_LENGTH: u16 = 323;
    pub const TILE_OFFSETS: u16 = 324;
    pub const TILE_BYTE_COUNTS: u16 = 325;
    pub const SAMPLE_FORMAT: u16 = 339;
    pub const MODEL_PIXEL_SCALE: u16 = 33550;
    pub const MODEL_TIEPOINT: u16 = 33922;
    pub const MODEL_TRANSFORMATION: u16 = 34264;
    pub const GEO_KEY_DIRECTORY: u16 = 34735;
    pub const GDAL_NODATA: u16 = 42113;

    pub const KEY_MODEL_TYPE: u16 = 1024;
    pub const KEY_RASTER_TYPE: u16 = 1025;
    pub const KEY_GEOGRAPHIC_TYPE: u16 = 2048;
    pub const KEY_PROJECTED_CS_TYPE: u16 = 3072;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleType {
    U8,
    U16,
    I16,
    F32,
}

impl SampleType {
    pub fn bytes(self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::U16 | SampleType::I16 => 2,
            SampleType::F32 => 4,
        }
    }

    pub fn is_integer(self) -> bool {
        self != SampleType::F32
    }

    fn bits_and_format(self) -> (u16, u16) {
        match self {
            SampleType::U8 => (8, 1),
            SampleType::U16 => (16, 1),
            SampleType::I16 => (16, 2),
            SampleType::F32 => (32, 3),
        }
    }

    fn from_bits_and_format(bits: u16, format: u16) -> Result<Self> {
        match (bits, format) {
            (8, 1) => Ok(SampleType::U8),
            (16, 1) => Ok(SampleType::U16),
            (16, 2) => Ok(SampleType::I16),
            (32, 3) => Ok(SampleType::F32),
            _ => Err(Error::UnsupportedFormat(format!(
                "sample type with {bits} bits and SampleFormat {format}"
            ))),
        }
    }

    /// Cast a value into this type's range the way the encoder stores it.
    pub fn quantize(self, v: f64) -> f32 {
        match self {
            SampleType::U8 => v.clamp(0.0, u8::MAX as f64).round() as u8 as f32,
            SampleType::U16 => v.clamp(0.0, u16::MAX as f64).round() as u16 as f32,
            SampleType::I16 => v.clamp(i16::MIN as f64, i16::MAX as f64).round() as i16 as f32,
            SampleType::F32 => v as f32,
        }
    }
}

impl fmt::Display for SampleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SampleType::U8 => "u8",
            SampleType::U16 => "u16",
            SampleType::I16 => "i16",
            SampleType::F32 => "f32",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockLayout {
    Tiled { width: usize, height: usize },
    Stripped { rows_per_strip: usize },
}

/// Georeferencing and layout of one raster file.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMetadata {
    pub crs: CrsDef,
    pub transform: GeoTransform,
    pub shape: GridShape,
    pub bands: usize,
    pub sample_type: SampleType,
    pub nodata: Option<f64>,
    pub block_layout: BlockLayout,
    pub time_range: Option<(f64, f64)>,
}

impl SceneMetadata {
    pub fn bounds(&self) -> BoundingBox {
        let mut b = self.transform.bounds(self.shape);
        if let Some((t0, t1)) = self.time_range {
            b.mint = t0;
            b.maxt = t1;
        }
        b
    }

    pub fn res(&self) -> Resolution {
        self.transform.resolution()
    }

    /// Block height and width in pixels.
    pub fn block_size(&self) -> (usize, usize) {
        match self.block_layout {
            BlockLayout::Tiled { width, height } => (height, width),
            BlockLayout::Stripped { rows_per_strip } => (rows_per_strip, self.shape.cols),
        }
    }

    /// Number of block rows and columns.
    pub fn block_grid(&self) -> (usize, usize) {
        let (bh, bw) = self.block_size();
        (self.shape.rows.div_ceil(bh), self.shape.cols.div_ceil(bw))
    }
}

impl fmt::Display for SceneMetadata {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.bounds();
        let (brows, bcols) = self.block_grid();
        let (bh, bw) = self.block_size();
        writeln!(f, "CRS:         {}", self.crs)?;
        writeln!(f, "Bounds:      {} {} {} {}", b.minx, b.miny, b.maxx, b.maxy)?;
        writeln!(
            f,
            "Size:        {} x {} (cols x rows)",
            self.shape.cols, self.shape.rows
        )?;
        writeln!(f, "Resolution:  {} {}", self.transform.dx, self.transform.dy)?;
        writeln!(
            f,
            "Origin:      {} {}",
            self.transform.origin_x, self.transform.origin_y
        )?;
        writeln!(f, "Bands:       {} x {}", self.bands, self.sample_type)?;
        match self.nodata {
            Some(v) => writeln!(f, "NoData:      {v}")?,
            None => writeln!(f, "NoData:      none")?,
        }
        let kind = match self.block_layout {
            BlockLayout::Tiled { .. } => "tiles",
            BlockLayout::Stripped { .. } => "strips",
        };
        write!(f, "Blocks:      {bw} x {bh} {kind}, {bcols} x {brows} grid")?;
        if let Some((t0, t1)) = self.time_range {
            write!(f, "\nTime:        [{t0}, {t1}]")?;
        }
        Ok(())
    }
}

/// Decoded samples of one block for one band.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl BlockData {
    pub fn len(&self) -> usize {
        match self {
            BlockData::U8(v) => v.len(),
            BlockData::U16(v) => v.len(),
            BlockData::I16(v) => v.len(),
            BlockData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f32 {
        match self {
            BlockData::U8(v) => v[i] as f32,
            BlockData::U16(v) => v[i] as f32,
            BlockData::I16(v) => v[i] as f32,
            BlockData::F32(v) => v[i],
        }
    }

    /// Copy `dst.len()` samples starting at `start` into `dst`.
    #[inline]
    pub fn copy_row(&self, start: usize, dst: &mut [f32]) {
        let n = dst.len();
        match self {
            BlockData::U8(v) => dst
                .iter_mut()
                .zip(&v[start..start + n])
                .for_each(|(d, s)| *d = *s as f32),
            BlockData::U16(v) => dst
                .iter_mut()
                .zip(&v[start..start + n])
                .for_each(|(d, s)| *d = *s as f32),
            BlockData::I16(v) => dst
                .iter_mut()
                .zip(&v[start..start + n])
                .for_each(|(d, s)| *d = *s as f32),
            BlockData::F32(v) => dst.copy_from_slice(&v[start..start + n]),
        }
    }

    pub fn sample_type(&self) -> SampleType {
        match self {
            BlockData::U8(_) => SampleType::U8,
            BlockData::U16(_) => SampleType::U16,
            BlockData::I16(_) => SampleType::I16,
            BlockData::F32(_) => SampleType::F32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub band: usize,
    pub block_row: usize,
    pub block_col: usize,
    pub height: usize,
    pub width: usize,
    pub data: BlockData,
}

impl Block {
    pub fn byte_size(&self) -> usize {
        self.data.len() * self.data.sample_type().bytes()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data.get(row * self.width + col)
    }
}

/// List files under `root` matching `pattern`, sorted lexicographically.
pub fn discover(root: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let full = root.join(pattern);
    let full = full.to_string_lossy();
    let mut out = Vec::new();
    for entry in glob::glob(&full).map_err(|e| Error::Config(format!("bad glob {full}: {e}")))? {
        let p = entry.map_err(|e| Error::io(e.path().to_path_buf(), e.into()))?;
        if p.is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
