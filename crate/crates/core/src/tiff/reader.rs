use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime};
use regex::Regex;

use super::tags::*;
use super::{Block, BlockData, BlockLayout, SampleType, SceneMetadata};
use crate::cache::{BlockCache, BlockKey};
use crate::error::{Error, Result};
use crate::geo::{GeoTransform, GridShape};
use crate::proj::CrsDef;

static NEXT_SCENE_ID: AtomicU64 = AtomicU64::new(1);

/// Extracts a scene's acquisition time from its filename.
///
/// The regex must contain a named group `date`; its text is parsed with the
/// chrono `format`. Date-only formats cover the whole UTC day, formats with a
/// time of day yield an instant.
#[derive(Debug, Clone)]
pub struct TimePattern {
    regex: Regex,
    format: String,
}

impl TimePattern {
    pub fn new(pattern: &str, format: &str) -> Result<Self> {
        let regex = Regex::new(pattern).map_err(|e| Error::Config(format!("time pattern {pattern:?}: {e}")))?;
        if regex.capture_names().all(|n| n != Some("date")) {
            return Err(Error::Config(format!(
                "time pattern {pattern:?} lacks a (?P<date>...) group"
            )));
        }
        Ok(TimePattern {
            regex,
            format: format.to_string(),
        })
    }

    pub fn parse(&self, name: &str) -> Option<(f64, f64)> {
        let text = self.regex.captures(name)?.name("date")?.as_str();
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, &self.format) {
            let t = dt.and_utc().timestamp() as f64;
            return Some((t, t));
        }
        let d = NaiveDate::parse_from_str(text, &self.format).ok()?;
        let t0 = d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64;
        Some((t0, t0 + 86399.0))
    }
}

enum TagValue {
    Ints(Vec<u64>),
    Floats(Vec<f64>),
    Ascii(String),
}

impl TagValue {
    fn ints(&self) -> Option<&[u64]> {
        match self {
            TagValue::Ints(v) => Some(v),
            _ => None,
        }
    }

    fn floats(&self) -> Vec<f64> {
        match self {
            TagValue::Ints(v) => v.iter().map(|&x| x as f64).collect(),
            TagValue::Floats(v) => v.clone(),
            TagValue::Ascii(_) => Vec::new(),
        }
    }
}

struct ByteOrder {
    little: bool,
}

impl ByteOrder {
    fn u16(&self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        if self.little {
            u16::from_le_bytes(a)
        } else {
            u16::from_be_bytes(a)
        }
    }

    fn u32(&self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        if self.little {
            u32::from_le_bytes(a)
        } else {
            u32::from_be_bytes(a)
        }
    }

    fn f32(&self, b: &[u8]) -> f32 {
        f32::from_bits(self.u32(b))
    }

    fn f64(&self, b: &[u8]) -> f64 {
        let a: [u8; 8] = b[..8].try_into().expect("8 bytes");
        if self.little {
            f64::from_le_bytes(a)
        } else {
            f64::from_be_bytes(a)
        }
    }
}

/// An opened raster file: parsed metadata plus what is needed to decode blocks.
pub struct Scene {
    id: u64,
    path: PathBuf,
    meta: SceneMetadata,
    order: ByteOrder,
    compression: u16,
    chunk_offsets: Vec<u64>,
    chunk_counts: Vec<u64>,
    file: File,
}

impl std::fmt::Debug for Scene {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scene")
            .field("id", &self.id)
            .field("path", &self.path)
            .finish()
    }
}

/// Parse the first IFD of a GeoTIFF.
pub fn parse_geotiff_header(path: &Path) -> Result<SceneMetadata> {
    Ok(Scene::open(path)?.meta)
}

/// Fetch one block through `cache`.
pub fn read_block(
    scene: &Scene,
    band: usize,
    block_row: usize,
    block_col: usize,
    cache: &BlockCache,
) -> Result<Arc<Block>> {
    scene.block(band, block_row, block_col, cache)
}

fn corrupt(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::CorruptFile(format!("{}: {what}", path.display()))
}

fn unsupported(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::UnsupportedFormat(format!("{}: {what}", path.display()))
}

/// Where one chunk's samples sit: pixel-interleaved, `stored_cols` wide,
/// of which `valid_rows x valid_cols` fall inside the raster.
struct ChunkLayout {
    spp: usize,
    valid_rows: usize,
    valid_cols: usize,
    stored_cols: usize,
    width: usize,
    len: usize,
}

fn gather<T: Copy, const S: usize>(dst: &mut [T], row: &[T], band: usize) {
    for (d, px) in dst.iter_mut().zip(row.chunks_exact(S)) {
        *d = px[band];
    }
}

impl ChunkLayout {
    /// One band as a full `len` block, `fill` outside the raster or when the
    /// chunk is sparse.
    fn band<T: Copy>(&self, vals: Option<&[T]>, band: usize, fill: T) -> Vec<T> {
        let mut out = vec![fill; self.len];
        let Some(vals) = vals else { return out };
        for r in 0..self.valid_rows {
            let row = &vals[r * self.stored_cols * self.spp..][..self.valid_cols * self.spp];
            let dst = &mut out[r * self.width..][..self.valid_cols];
            match self.spp {
                1 => dst.copy_from_slice(row),
                2 => gather::<T, 2>(dst, row, band),
                3 => gather::<T, 3>(dst, row, band),
                4 => gather::<T, 4>(dst, row, band),
                spp => {
                    for (d, v) in dst.iter_mut().zip(row[band..].iter().step_by(spp)) {
                        *d = *v;
                    }
                }
            }
        }
        out
    }
}

impl Scene {
    pub fn open(path: &Path) -> Result<Scene> {
        Self::open_with_time(path, None)
    }

    pub fn open_with_time(path: &Path, time: Option<&TimePattern>) -> Result<Scene> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut head = [0u8; 8];
        file.read_exact(&mut head)
            .map_err(|_| corrupt(path, "file shorter than a TIFF header"))?;
        let order = match &head[..2] {
            b"II" => ByteOrder { little: true },
            b"MM" => ByteOrder { little: false },
            _ => return Err(corrupt(path, "bad TIFF byte-order magic")),
        };
        match order.u16(&head[2..4]) {
            42 => {}
            43 => return Err(unsupported(path, "BigTIFF is not supported")),
            m => return Err(corrupt(path, format!("bad TIFF magic number {m}"))),
        }
        let ifd_offset = order.u32(&head[4..8]) as u64;
        let read_at = |offset: u64, len: usize| -> Result<Vec<u8>> {
            if offset.checked_add(len as u64).is_none_or(|end| end > file_len) {
                return Err(corrupt(
                    path,
                    format!("truncated: {len} bytes at offset {offset} beyond end"),
                ));
            }
            let mut buf = vec![0u8; len];
            file.read_exact_at(&mut buf, offset).map_err(|e| Error::io(path, e))?;
            Ok(buf)
        };

        let count_buf = read_at(ifd_offset, 2)?;
        let n_entries = order.u16(&count_buf) as usize;
        let entries = read_at(ifd_offset + 2, n_entries * 12)?;
        let mut tags: HashMap<u16, TagValue> = HashMap::new();
        for e in entries.chunks_exact(12) {
            let tag = order.u16(&e[0..2]);
            let typ = order.u16(&e[2..4]);
            let count = order.u32(&e[4..8]) as usize;
            let size = match typ {
                1 | 2 | 6 | 7 => 1,
                3 | 8 => 2,
                4 | 9 | 11 => 4,
                5 | 10 | 12 => 8,
                _ => continue, // unknown types are skipped, as TIFF readers must
            };
            let total = size * count;
            let data = if total <= 4 {
                e[8..8 + total].to_vec()
            } else {
                read_at(order.u32(&e[8..12]) as u64, total)?
            };
            let value = match typ {
                2 => TagValue::Ascii(String::from_utf8_lossy(&data).trim_end_matches('\0').trim().to_string()),
                1 | 7 => TagValue::Ints(data.iter().map(|&b| b as u64).collect()),
                6 => TagValue::Ints(data.iter().map(|&b| b as i8 as i64 as u64).collect()),
                3 => TagValue::Ints(data.chunks_exact(2).map(|c| order.u16(c) as u64).collect()),
                8 => TagValue::Floats(data.chunks_exact(2).map(|c| order.u16(c) as i16 as f64).collect()),
                4 => TagValue::Ints(data.chunks_exact(4).map(|c| order.u32(c) as u64).collect()),
                9 => TagValue::Floats(data.chunks_exact(4).map(|c| order.u32(c) as i32 as f64).collect()),
                11 => TagValue::Floats(data.chunks_exact(4).map(|c| order.f32(c) as f64).collect()),
                12 => TagValue::Floats(data.chunks_exact(8).map(|c| order.f64(c)).collect()),
                5 => TagValue::Floats(
                    data.chunks_exact(8)
                        .map(|c| order.u32(&c[0..4]) as f64 / order.u32(&c[4..8]) as f64)
                        .collect(),
                ),
                10 => TagValue::Floats(
                    data.chunks_exact(8)
                        .map(|c| order.u32(&c[0..4]) as i32 as f64 / order.u32(&c[4..8]) as i32 as f64)
                        .collect(),
                ),
                _ => unreachable!(),
            };
            tags.insert(tag, value);
        }

        let int = |tag: u16| -> Option<u64> { tags.get(&tag).and_then(|v| v.ints()).and_then(|v| v.first().copied()) };
        let ints = |tag: u16| -> Option<Vec<u64>> { tags.get(&tag).and_then(|v| v.ints()).map(|v| v.to_vec()) };
        let req = |tag: u16, name: &str| int(tag).ok_or_else(|| corrupt(path, format!("missing {name} tag")));

        let cols = req(IMAGE_WIDTH, "ImageWidth")? as usize;
        let rows = req(IMAGE_LENGTH, "ImageLength")? as usize;
        let shape = GridShape::new(rows, cols).map_err(|_| corrupt(path, "zero image dimension"))?;
        let bands = int(SAMPLES_PER_PIXEL).unwrap_or(1) as usize;
        let bits = ints(BITS_PER_SAMPLE).unwrap_or_else(|| vec![1]);
        if bits.iter().any(|&b| b != bits[0]) {
            return Err(unsupported(path, "mixed BitsPerSample"));
        }
        let format = ints(SAMPLE_FORMAT).map(|v| v[0]).unwrap_or(1);
        let sample_type =
            SampleType::from_bits_and_format(bits[0] as u16, format as u16).map_err(|e| unsupported(path, e))?;
        let compression = int(COMPRESSION).unwrap_or(1) as u16;
        if !matches!(compression, 1 | 8 | 32946) {
            return Err(unsupported(path, format!("compression {compression}")));
        }
        if int(PLANAR_CONFIG).unwrap_or(1) != 1 {
            return Err(unsupported(path, "band-interleaved (planar) layout"));
        }
        if int(PREDICTOR).unwrap_or(1) != 1 {
            return Err(unsupported(path, "predictor"));
        }

        let (block_layout, offsets, counts) = if let Some(tw) = int(TILE_WIDTH) {
            let th = req(TILE_LENGTH, "TileLength")?;
            if tw == 0 || th == 0 || tw % 16 != 0 || th % 16 != 0 {
                return Err(corrupt(path, format!("tile size {tw}x{th} not a multiple of 16")));
            }
            (
                BlockLayout::Tiled {
                    width: tw as usize,
                    height: th as usize,
                },
                ints(TILE_OFFSETS).ok_or_else(|| corrupt(path, "missing TileOffsets"))?,
                ints(TILE_BYTE_COUNTS).ok_or_else(|| corrupt(path, "missing TileByteCounts"))?,
            )
        } else {
            let rps = int(ROWS_PER_STRIP).unwrap_or(rows as u64).clamp(1, rows as u64);
            (
                BlockLayout::Stripped {
                    rows_per_strip: rps as usize,
                },
                ints(STRIP_OFFSETS).ok_or_else(|| corrupt(path, "missing StripOffsets"))?,
                ints(STRIP_BYTE_COUNTS).ok_or_else(|| corrupt(path, "missing StripByteCounts"))?,
            )
        };

        // georeferencing
        if let Some(m) = tags.get(&MODEL_TRANSFORMATION) {
            let m = m.floats();
            if m.len() < 16 || m[1] != 0.0 || m[4] != 0.0 {
                return Err(unsupported(path, "rotated or sheared ModelTransformation"));
            }
        }
        let scale = tags
            .get(&MODEL_PIXEL_SCALE)
            .map(|v| v.floats())
            .or_else(|| {
                tags.get(&MODEL_TRANSFORMATION).map(|m| {
                    let m = m.floats();
                    vec![m[0], -m[5], 0.0]
                })
            })
            .ok_or_else(|| unsupported(path, "missing ModelPixelScale"))?;
        let tie = tags
            .get(&MODEL_TIEPOINT)
            .map(|v| v.floats())
            .or_else(|| {
                tags.get(&MODEL_TRANSFORMATION).map(|m| {
                    let m = m.floats();
                    vec![0.0, 0.0, 0.0, m[3], m[7], 0.0]
                })
            })
            .ok_or_else(|| unsupported(path, "missing ModelTiepoint"))?;
        if scale.len() < 2 || tie.len() < 6 || !(scale[0] > 0.0 && scale[1] > 0.0) {
            return Err(corrupt(path, "malformed pixel scale or tiepoint"));
        }
        let (sx, sy) = (scale[0], scale[1]);
        let mut transform = GeoTransform::new(tie[3] - tie[0] * sx, tie[4] + tie[1] * sy, sx, -sy);

        let keys = ints(GEO_KEY_DIRECTORY).ok_or_else(|| unsupported(path, "missing GeoKeyDirectory"))?;
        if keys.len() < 4 {
            return Err(corrupt(path, "short GeoKeyDirectory"));
        }
        let n_keys = keys[3] as usize;
        let mut geokeys = HashMap::new();
        for k in keys[4..].chunks_exact(4).take(n_keys) {
            // only inline SHORT values are needed here
            if k[1] == 0 {
                geokeys.insert(k[0] as u16, k[3]);
            }
        }
        let crs_code = match geokeys.get(&KEY_MODEL_TYPE) {
            Some(2) => geokeys.get(&KEY_GEOGRAPHIC_TYPE),
            _ => geokeys
                .get(&KEY_PROJECTED_CS_TYPE)
                .or_else(|| geokeys.get(&KEY_GEOGRAPHIC_TYPE)),
        }
        .copied()
        .ok_or_else(|| unsupported(path, "missing ProjectedCSType/GeographicType geokey"))?;
        let crs = CrsDef::from_epsg(crs_code as u32).map_err(|e| unsupported(path, e))?;
        if geokeys.get(&KEY_RASTER_TYPE) == Some(&2) {
            // PixelIsPoint: tiepoint refers to the pixel centre
            transform.origin_x -= 0.5 * sx;
            transform.origin_y += 0.5 * sy;
        }

        let nodata = match tags.get(&GDAL_NODATA) {
            Some(TagValue::Ascii(s)) if !s.is_empty() => Some(
                s.parse::<f64>()
                    .map_err(|_| corrupt(path, format!("bad GDAL_NODATA {s:?}")))?,
            ),
            _ => None,
        };
        let time_range = time.and_then(|t| path.file_name().and_then(|n| t.parse(&n.to_string_lossy())));

        let meta = SceneMetadata {
            crs,
            transform,
            shape,
            bands,
            sample_type,
            nodata,
            block_layout,
            time_range,
        };
        let (brows, bcols) = meta.block_grid();
        if offsets.len() < brows * bcols || counts.len() < brows * bcols {
            return Err(corrupt(
                path,
                format!("{} chunk offsets for a {brows}x{bcols} block grid", offsets.len()),
            ));
        }

        Ok(Scene {
            id: NEXT_SCENE_ID.fetch_add(1, Ordering::Relaxed),
            path: path.to_path_buf(),
            meta,
            order,
            compression,
            chunk_offsets: offsets,
            chunk_counts: counts,
            file,
        })
    }

    /// Process-unique identifier used in cache keys.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn meta(&self) -> &SceneMetadata {
        &self.meta
    }

    /// Fill value for padding and uncovered samples.
    pub fn fill(&self) -> f64 {
        self.meta.nodata.unwrap_or(0.0)
    }

    pub fn block(&self, band: usize, block_row: usize, block_col: usize, cache: &BlockCache) -> Result<Arc<Block>> {
        let (brows, bcols) = self.meta.block_grid();
        if band >= self.meta.bands || block_row >= brows || block_col >= bcols {
            return Err(Error::InvalidArgument(format!(
                "block ({band}, {block_row}, {block_col}) outside {} bands x {brows}x{bcols} grid of {}",
                self.meta.bands,
                self.path.display()
            )));
        }
        let key = BlockKey {
            file: self.id,
            band: band as u32,
            block_row: block_row as u32,
            block_col: block_col as u32,
        };
        cache.get_or_load(key, || {
            // the other bands share this chunk; keep them rather than
            // reading it again
            let mut blocks = self.decode_chunk(block_row, block_col, 0..self.meta.bands)?;
            let this = blocks.swap_remove(band);
            for b in blocks {
                let key = BlockKey {
                    band: b.band as u32,
                    ..key
                };
                cache.insert(key, Arc::new(b));
            }
            Ok(this)
        })
    }

    /// Read and decode one block without caching. Edge blocks are padded to
    /// the full block size with the fill value.
    pub fn decode_block(&self, band: usize, block_row: usize, block_col: usize) -> Result<Block> {
        Ok(self.decode_chunk(block_row, block_col, band..band + 1)?.remove(0))
    }

    /// Decode `bands` of one chunk from a single read, in order.
    fn decode_chunk(&self, block_row: usize, block_col: usize, bands: std::ops::Range<usize>) -> Result<Vec<Block>> {
        let (bh, bw) = self.meta.block_size();
        let (_, bcols) = self.meta.block_grid();
        let idx = block_row * bcols + block_col;
        let (offset, count) = (self.chunk_offsets[idx], self.chunk_counts[idx] as usize);
        let bytes_per = self.meta.sample_type.bytes();
        let spp = self.meta.bands;
        let valid_rows = bh.min(self.meta.shape.rows - block_row * bh);
        let valid_cols = bw.min(self.meta.shape.cols - block_col * bw);
        // tiles are stored full-size, strips only hold the rows they cover
        let (stored_rows, stored_cols) = match self.meta.block_layout {
            BlockLayout::Tiled { .. } => (bh, bw),
            BlockLayout::Stripped { .. } => (valid_rows, bw),
        };
        let expected = stored_rows * stored_cols * spp * bytes_per;

        let raw = if count == 0 && offset == 0 {
            None // sparse block
        } else {
            let mut buf = vec![0u8; count];
            self.file
                .read_exact_at(&mut buf, offset)
                .map_err(|_| corrupt(&self.path, format!("block {idx} truncated ({count} bytes at {offset})")))?;
            let data = if self.compression == 1 {
                buf
            } else {
                let mut out = Vec::with_capacity(expected);
                flate2::read::ZlibDecoder::new(&buf[..])
                    .read_to_end(&mut out)
                    .map_err(|e| corrupt(&self.path, format!("deflate error in block {idx}: {e}")))?;
                out
            };
            if data.len() < expected {
                return Err(corrupt(
                    &self.path,
                    format!("block {idx} holds {} bytes, expected {expected}", data.len()),
                ));
            }
            Some(data)
        };

        let fill = self.fill();
        let little = self.order.little;
        let layout = ChunkLayout {
            spp,
            valid_rows,
            valid_cols,
            stored_cols,
            width: bw,
            len: bh * bw,
        };
        macro_rules! decode {
            ($variant:ident, $t:ty) => {{
                let vals: Option<Vec<$t>> = raw.as_deref().map(|raw| {
                    let words = raw.chunks_exact(std::mem::size_of::<$t>());
                    if little {
                        words
                            .map(|b| <$t>::from_le_bytes(b.try_into().unwrap()))
                            .collect()
                    } else {
                        words
                            .map(|b| <$t>::from_be_bytes(b.try_into().unwrap()))
                            .collect()
                    }
                });
                bands
                    .map(|band| {
                        (
                            band,
                            BlockData::$variant(layout.band(vals.as_deref(), band, fill as $t)),
                        )
                    })
                    .collect::<Vec<_>>()
            }};
        }
        let decoded = match self.meta.sample_type {
            SampleType::U8 => decode!(U8, u8),
            SampleType::U16 => decode!(U16, u16),
            SampleType::I16 => decode!(I16, i16),
            SampleType::F32 => decode!(F32, f32),
        };
        Ok(decoded
            .into_iter()
            .map(|(band, data)| Block {
                band,
                block_row,
                block_col,
                height: bh,
                width: bw,
                data,
            })
            .collect())
    }
}
