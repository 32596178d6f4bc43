use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tags::*;
use super::SampleType;
use crate::error::{Error, Result};
use crate::geo::{GeoTransform, GridShape};
use crate::patch::Patch;
use crate::proj::CrsDef;

pub const DEFAULT_TILE_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compression {
    #[default]
    None,
    Deflate,
}

#[derive(Debug, Clone, Copy)]
pub struct WriterOptions {
    pub tile_size: usize,
    pub compression: Compression,
}

impl Default for WriterOptions {
    fn default() -> Self {
        WriterOptions {
            tile_size: DEFAULT_TILE_SIZE,
            compression: Compression::None,
        }
    }
}

/// Streaming tiled GeoTIFF writer. Tiles must be pushed in row-major order;
/// the IFD is written after the image data by [`TiffWriter::finish`].
pub struct TiffWriter {
    out: BufWriter<File>,
    path: PathBuf,
    crs: CrsDef,
    transform: GeoTransform,
    shape: GridShape,
    bands: usize,
    sample_type: SampleType,
    nodata: Option<f64>,
    opts: WriterOptions,
    offsets: Vec<u32>,
    counts: Vec<u32>,
    pos: u64,
    scratch: Vec<u8>,
}

impl TiffWriter {
    #[allow(clippy::too_many_arguments)]
    pub fn create(
        path: &Path,
        crs: &CrsDef,
        transform: GeoTransform,
        shape: GridShape,
        bands: usize,
        sample_type: SampleType,
        nodata: Option<f64>,
        opts: WriterOptions,
    ) -> Result<Self> {
        if crs.epsg().is_none() {
            return Err(Error::UnsupportedFormat(format!(
                "cannot encode custom CRS {crs} as geokeys"
            )));
        }
        if opts.tile_size == 0 || opts.tile_size % 16 != 0 {
            return Err(Error::InvalidArgument(format!(
                "tile size {} is not a multiple of 16",
                opts.tile_size
            )));
        }
        if transform.dy >= 0.0 {
            return Err(Error::UnsupportedFormat("only north-up rasters can be written".into()));
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        // header; the IFD offset is patched in by finish()
        out.write_all(&[b'I', b'I', 42, 0, 0, 0, 0, 0])
            .map_err(|e| Error::io(path, e))?;
        Ok(TiffWriter {
            out,
            path: path.to_path_buf(),
            crs: crs.clone(),
            transform,
            shape,
            bands,
            sample_type,
            nodata,
            opts,
            offsets: Vec::new(),
            counts: Vec::new(),
            pos: 8,
            scratch: Vec::new(),
        })
    }

    /// Tile rows and columns.
    pub fn tile_grid(&self) -> (usize, usize) {
        let t = self.opts.tile_size;
        (self.shape.rows.div_ceil(t), self.shape.cols.div_ceil(t))
    }

    pub fn tile_size(&self) -> usize {
        self.opts.tile_size
    }

    /// Append the next tile. `samples` is band-major, `bands * tile * tile`
    /// values already representable in the file's sample type.
    pub fn push_tile(&mut self, samples: &[f32]) -> Result<()> {
        let t = self.opts.tile_size;
        let (tr, tc) = self.tile_grid();
        if self.offsets.len() >= tr * tc {
            return Err(Error::InvalidArgument("more tiles pushed than the grid holds".into()));
        }
        let n = t * t;
        if samples.len() != n * self.bands {
            return Err(Error::InvalidArgument(format!(
                "tile holds {} samples, expected {}",
                samples.len(),
                n * self.bands
            )));
        }
        let bpp = self.sample_type.bytes();
        self.scratch.clear();
        self.scratch.reserve(n * self.bands * bpp);
        for p in 0..n {
            for b in 0..self.bands {
                let v = samples[b * n + p];
                match self.sample_type {
                    SampleType::U8 => self.scratch.push(v as u8),
                    SampleType::U16 => self.scratch.extend_from_slice(&(v as u16).to_le_bytes()),
                    SampleType::I16 => self.scratch.extend_from_slice(&(v as i16).to_le_bytes()),
                    SampleType::F32 => self.scratch.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
        let bytes: std::borrow::Cow<[u8]> = match self.opts.compression {
            Compression::None => std::borrow::Cow::Borrowed(&self.scratch),
            Compression::Deflate => {
                let mut enc = flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::fast());
                enc.write_all(&self.scratch).map_err(|e| Error::io(&self.path, e))?;
                std::borrow::Cow::Owned(enc.finish().map_err(|e| Error::io(&self.path, e))?)
            }
        };
        if self.pos + bytes.len() as u64 > u32::MAX as u64 {
            return Err(Error::UnsupportedFormat(
                "output exceeds classic TIFF 4 GiB limit".into(),
            ));
        }
        self.offsets.push(self.pos as u32);
        self.counts.push(bytes.len() as u32);
        self.out.write_all(&bytes).map_err(|e| Error::io(&self.path, e))?;
        self.pos += bytes.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        let (tr, tc) = self.tile_grid();
        if self.offsets.len() != tr * tc {
            return Err(Error::InvalidArgument(format!(
                "{} of {} tiles written",
                self.offsets.len(),
                tr * tc
            )));
        }
        if self.pos % 2 == 1 {
            self.out.write_all(&[0]).map_err(|e| Error::io(&self.path, e))?;
            self.pos += 1;
        }
        let ifd_offset = self.pos;

        let code = self.crs.epsg().expect("checked in create") as u16;
        let geographic = self.crs.is_geographic();
        let geokeys: Vec<u16> = vec![
            1,
            1,
            0,
            3, //
            KEY_MODEL_TYPE,
            0,
            1,
            if geographic { 2 } else { 1 },
            KEY_RASTER_TYPE,
            0,
            1,
            1,
            if geographic {
                KEY_GEOGRAPHIC_TYPE
            } else {
                KEY_PROJECTED_CS_TYPE
            },
            0,
            1,
            code,
        ];
        let (bits, format) = self.sample_type.bits_and_format();
        let spp = self.bands;
        let t = self.opts.tile_size as u32;
        let compression: u16 = match self.opts.compression {
            Compression::None => 1,
            Compression::Deflate => 8,
        };
        let tr = &self.transform;

        let mut entries: Vec<(u16, u16, u32, Vec<u8>)> = vec![
            long(IMAGE_WIDTH, &[self.shape.cols as u32]),
            long(IMAGE_LENGTH, &[self.shape.rows as u32]),
            short(BITS_PER_SAMPLE, &vec![bits; spp]),
            short(COMPRESSION, &[compression]),
            short(PHOTOMETRIC, &[1]),
            short(SAMPLES_PER_PIXEL, &[spp as u16]),
            short(PLANAR_CONFIG, &[1]),
            long(TILE_WIDTH, &[t]),
            long(TILE_LENGTH, &[t]),
            long(TILE_OFFSETS, &self.offsets),
            long(TILE_BYTE_COUNTS, &self.counts),
            short(SAMPLE_FORMAT, &vec![format; spp]),
            double(MODEL_PIXEL_SCALE, &[tr.dx, -tr.dy, 0.0]),
            double(MODEL_TIEPOINT, &[0.0, 0.0, 0.0, tr.origin_x, tr.origin_y, 0.0]),
            short(GEO_KEY_DIRECTORY, &geokeys),
        ];
        if let Some(nd) = self.nodata {
            let mut s = format!("{nd}").into_bytes();
            s.push(0);
            entries.push((GDAL_NODATA, 2, s.len() as u32, s));
        }
        entries.sort_by_key(|e| e.0);

        let ifd_len = 2 + 12 * entries.len() as u64 + 4;
        let mut data_pos = ifd_offset + ifd_len;
        let mut ifd = Vec::with_capacity(ifd_len as usize);
        let mut extra = Vec::new();
        ifd.extend_from_slice(&(entries.len() as u16).to_le_bytes());
        for (tag, typ, count, bytes) in &entries {
            ifd.extend_from_slice(&tag.to_le_bytes());
            ifd.extend_from_slice(&typ.to_le_bytes());
            ifd.extend_from_slice(&count.to_le_bytes());
            if bytes.len() <= 4 {
                let mut v = [0u8; 4];
                v[..bytes.len()].copy_from_slice(bytes);
                ifd.extend_from_slice(&v);
            } else {
                ifd.extend_from_slice(&(data_pos as u32).to_le_bytes());
                extra.extend_from_slice(bytes);
                data_pos += bytes.len() as u64;
                if bytes.len() % 2 == 1 {
                    extra.push(0);
                    data_pos += 1;
                }
            }
        }
        ifd.extend_from_slice(&0u32.to_le_bytes());
        if data_pos > u32::MAX as u64 {
            return Err(Error::UnsupportedFormat(
                "output exceeds classic TIFF 4 GiB limit".into(),
            ));
        }
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        self.out.write_all(&ifd).map_err(io)?;
        self.out.write_all(&extra).map_err(io)?;
        self.out.seek(SeekFrom::Start(4)).map_err(io)?;
        self.out.write_all(&(ifd_offset as u32).to_le_bytes()).map_err(io)?;
        self.out.flush().map_err(io)?;
        Ok(())
    }
}

fn short(tag: u16, v: &[u16]) -> (u16, u16, u32, Vec<u8>) {
    (tag, 3, v.len() as u32, v.iter().flat_map(|x| x.to_le_bytes()).collect())
}

fn long(tag: u16, v: &[u32]) -> (u16, u16, u32, Vec<u8>) {
    (tag, 4, v.len() as u32, v.iter().flat_map(|x| x.to_le_bytes()).collect())
}

fn double(tag: u16, v: &[f64]) -> (u16, u16, u32, Vec<u8>) {
    (
        tag,
        12,
        v.len() as u32,
        v.iter().flat_map(|x| x.to_le_bytes()).collect(),
    )
}

/// Write `patch` as an uncompressed GeoTIFF with 512x512 tiles. Invalid
/// cells are written as the patch's nodata value (or its fill value, which
/// then becomes the file's nodata).
pub fn write_geotiff(path: &Path, patch: &Patch) -> Result<()> {
    write_geotiff_with(path, patch, WriterOptions::default())
}

pub fn write_geotiff_with(path: &Path, patch: &Patch, opts: WriterOptions) -> Result<()> {
    let any_invalid = patch.valid.iter().any(|v| !*v);
    let nodata = patch
        .nodata
        .or(if any_invalid { Some(patch.fill as f64) } else { None });
    let masked_value = nodata.map(|v| v as f32).unwrap_or(patch.fill);
    let mut w = TiffWriter::create(
        path,
        &patch.crs,
        patch.transform(),
        patch.shape,
        patch.bands,
        patch.sample_type,
        nodata,
        opts,
    )?;
    let t = w.tile_size();
    let (trows, tcols) = w.tile_grid();
    let (h, wd) = (patch.shape.rows, patch.shape.cols);
    let pad = nodata.unwrap_or(0.0) as f32;
    let mut tile = vec![pad; patch.bands * t * t];
    for tr in 0..trows {
        for tc in 0..tcols {
            tile.fill(pad);
            for b in 0..patch.bands {
                for r in 0..t.min(h - tr * t) {
                    let row = tr * t + r;
                    for c in 0..t.min(wd - tc * t) {
                        let col = tc * t + c;
                        tile[(b * t + r) * t + c] = if patch.is_valid(row, col) {
                            patch.get(b, row, col)
                        } else {
                            masked_value
                        };
                    }
                }
            }
            w.push_tile(&tile)?;
        }
    }
    w.finish()
}
