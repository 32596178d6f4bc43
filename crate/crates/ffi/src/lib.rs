//! C ABI over the geopatch engine.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `gp_*_open`/`gp_*_new` function and released by the matching `gp_*_free`.
//! Fallible functions return a [`GpStatus`]; on failure the message is kept
//! per thread and can be read with [`gp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use geopatch::cache::{cache_bytes_from_env, BlockCache, DEFAULT_CACHE_BYTES};
use geopatch::dataset::{intersect, union, DatasetConfig, GeoDataset, Sample};
use geopatch::geo::BoundingBox;
use geopatch::sampler::{build_sampler, GeoSampler, SamplerConfig, SamplerKind, SamplingFrame};
use geopatch::Error;

/// Result of a fallible call. Values 1 to 14 mirror the engine's error kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    EmptyIntersection = 1,
    OutOfDomain = 2,
    UnknownCrs = 3,
    UnsupportedFormat = 4,
    CorruptFile = 5,
    Io = 6,
    Parse = 7,
    UnsupportedGeometry = 8,
    NoScenesFound = 9,
    QueryOutsideBounds = 10,
    PatchLargerThanExtent = 11,
    PatchLargerThanScene = 12,
    InvalidArgument = 13,
    Config = 14,
    /// A required pointer argument was null.
    NullPointer = 100,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 101,
    /// The caller's buffer is too small; the required size was reported.
    BufferTooSmall = 102,
    /// The sampler has no more batches in this epoch.
    EndOfEpoch = 103,
    /// The engine panicked; the handle involved should be freed.
    Panic = 199,
}

impl GpStatus {
    fn from_code(code: i32) -> GpStatus {
        use GpStatus::*;
        [
            EmptyIntersection,
            OutOfDomain,
            UnknownCrs,
            UnsupportedFormat,
            CorruptFile,
            Io,
            Parse,
            UnsupportedGeometry,
            NoScenesFound,
            QueryOutsideBounds,
            PatchLargerThanExtent,
            PatchLargerThanScene,
            InvalidArgument,
            Config,
        ]
        .into_iter()
        .find(|s| *s as i32 == code)
        .unwrap_or(Panic)
    }
}

/// Sampler kinds accepted by [`gp_sampler_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpSamplerKind {
    Random = 0,
    RandomBatch = 1,
    Grid = 2,
}

/// An opened (possibly composed) dataset.
pub struct GpDataset {
    inner: Arc<dyn GeoDataset>,
}

/// A sampler with an epoch cursor.
pub struct GpSampler {
    inner: Box<dyn GeoSampler>,
    batches: Vec<Vec<BoundingBox>>,
    next: usize,
}

/// The result of one query: one patch per role.
pub struct GpSample {
    inner: Sample,
    roles: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: GpStatus, msg: impl Into<String>) -> GpStatus {
    set_error(msg.into());
    status
}

fn engine_error(e: Error) -> GpStatus {
    fail(GpStatus::from_code(e.code()), e.to_string())
}

/// Run `f`, mapping engine errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), GpStatus>) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GpStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(GpStatus::Panic, msg)
        }
    }
}

fn check<T>(r: geopatch::Result<T>) -> Result<T, GpStatus> {
    r.map_err(engine_error)
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, GpStatus> {
    if p.is_null() {
        return Err(fail(GpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, GpStatus> {
    p.as_ref()
        .ok_or_else(|| fail(GpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, GpStatus> {
    p.as_mut()
        .ok_or_else(|| fail(GpStatus::NullPointer, format!("{what} is null")))
}

/// Copy `s` with a terminating NUL into `buf` of `len` bytes. `*needed`
/// receives the full size including the NUL.
unsafe fn write_str(s: &[u8], buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), GpStatus> {
    if !needed.is_null() {
        *needed = s.len() + 1;
    }
    if buf.is_null() || len < s.len() + 1 {
        return Err(fail(GpStatus::BufferTooSmall, format!("need {} bytes", s.len() + 1)));
    }
    ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Open the dataset described by the TOML config at `config_path`. Relative
/// layer roots resolve against the config's directory. The block cache size
/// comes from `GEOPATCH_CACHE_BYTES` when set.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_open(config_path: *const c_char, out: *mut *mut GpDataset) -> GpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(config_path, "config_path")?;
        let cfg = check(DatasetConfig::load(Path::new(path)))?;
        let cache = Arc::new(BlockCache::new(cache_bytes_from_env(DEFAULT_CACHE_BYTES)));
        let inner = check(cfg.open(cache))?;
        *out = Box::into_raw(Box::new(GpDataset { inner }));
        Ok(())
    })
}

unsafe fn compose(a: *const GpDataset, b: *const GpDataset, out: *mut *mut GpDataset, is_union: bool) -> GpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let (a, b) = (ref_arg(a, "a")?.inner.clone(), ref_arg(b, "b")?.inner.clone());
        let inner: Arc<dyn GeoDataset> = if is_union {
            Arc::new(check(union(a, b, None, None))?)
        } else {
            Arc::new(check(intersect(a, b, None, None))?)
        };
        *out = Box::into_raw(Box::new(GpDataset { inner }));
        Ok(())
    })
}

/// Intersection of two datasets on the grid of `a`. Both inputs stay owned
/// by the caller.
///
/// # Safety
/// `a` and `b` must be live dataset handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_intersect(
    a: *const GpDataset,
    b: *const GpDataset,
    out: *mut *mut GpDataset,
) -> GpStatus {
    compose(a, b, out, false)
}

/// Union of two datasets on the grid of `a`.
///
/// # Safety
/// As for [`gp_dataset_intersect`].
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_union(
    a: *const GpDataset,
    b: *const GpDataset,
    out: *mut *mut GpDataset,
) -> GpStatus {
    compose(a, b, out, true)
}

/// Bounds as `[minx, miny, maxx, maxy]` in the dataset CRS.
///
/// # Safety
/// `ds` must be a live handle; `bbox` must point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_bounds(ds: *const GpDataset, bbox: *mut f64) -> GpStatus {
    guard(|| {
        let ds = ref_arg(ds, "ds")?;
        if bbox.is_null() {
            return Err(fail(GpStatus::NullPointer, "bbox is null"));
        }
        let b = ds.inner.bounds();
        std::slice::from_raw_parts_mut(bbox, 4).copy_from_slice(&[b.minx, b.miny, b.maxx, b.maxy]);
        Ok(())
    })
}

/// Pixel size of the dataset grid.
///
/// # Safety
/// `ds` must be a live handle; `x` and `y` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_res(ds: *const GpDataset, x: *mut f64, y: *mut f64) -> GpStatus {
    guard(|| {
        let r = ref_arg(ds, "ds")?.inner.res();
        *out_arg(x, "x")? = r.x;
        *out_arg(y, "y")? = r.y;
        Ok(())
    })
}

/// CRS of the dataset as text (e.g. `EPSG:5070`). Writes at most `len`
/// bytes; `needed` (optional) receives the size including the NUL.
///
/// # Safety
/// `ds` must be a live handle; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_crs(
    ds: *const GpDataset,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> GpStatus {
    guard(|| {
        let s = ref_arg(ds, "ds")?.inner.crs().to_string();
        write_str(s.as_bytes(), buf, len, needed)
    })
}

/// Query the patch covering `[minx, miny, maxx, maxy]` in the dataset CRS.
///
/// # Safety
/// `ds` must be a live handle; `bbox` must point to 4 doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_query(ds: *const GpDataset, bbox: *const f64, out: *mut *mut GpSample) -> GpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ds = ref_arg(ds, "ds")?;
        if bbox.is_null() {
            return Err(fail(GpStatus::NullPointer, "bbox is null"));
        }
        let b = std::slice::from_raw_parts(bbox, 4);
        let q = check(BoundingBox::new(b[0], b[1], b[2], b[3]))?;
        let inner = check(ds.inner.query(&q))?;
        let roles = inner
            .layers
            .keys()
            .map(|r| CString::new(r.as_str()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(GpSample { inner, roles }));
        Ok(())
    })
}

/// Release a dataset. Null is ignored.
///
/// # Safety
/// `ds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_free(ds: *mut GpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Create a sampler over `ds`. `patch_px` and `stride_px` are in pixels;
/// `stride_px` = 0 means stride = patch. `length` is the number of boxes per
/// epoch for the random samplers.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_sampler_new(
    ds: *const GpDataset,
    kind: GpSamplerKind,
    patch_px: f64,
    stride_px: f64,
    length: usize,
    batch_size: usize,
    seed: u64,
    out: *mut *mut GpSampler,
) -> GpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ds = ref_arg(ds, "ds")?;
        let mut cfg = SamplerConfig::new(patch_px, length);
        if stride_px > 0.0 {
            cfg.stride = Some((stride_px, stride_px));
        }
        cfg.batch_size = batch_size.max(1);
        cfg.seed = seed;
        let kind = match kind {
            GpSamplerKind::Random => SamplerKind::Random,
            GpSamplerKind::RandomBatch => SamplerKind::RandomBatch,
            GpSamplerKind::Grid => SamplerKind::Grid,
        };
        let inner = check(build_sampler(kind, &SamplingFrame::from_dataset(&*ds.inner), cfg))?;
        let batches = inner.epoch().collect();
        *out = Box::into_raw(Box::new(GpSampler {
            inner,
            batches,
            next: 0,
        }));
        Ok(())
    })
}

/// Number of boxes in one epoch.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_sampler_len(s: *const GpSampler) -> usize {
    s.as_ref().map_or(0, |s| s.inner.len())
}

/// Copy the next batch of boxes into `boxes` as consecutive
/// `[minx, miny, maxx, maxy]` quadruples; `*count` receives the number of
/// boxes. Returns `EndOfEpoch` when the epoch is exhausted and
/// `BufferTooSmall` (with `*count` set) when `capacity` boxes do not suffice.
///
/// # Safety
/// `s` must be a live handle; `boxes` must hold `4 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn gp_sampler_next_batch(
    s: *mut GpSampler,
    boxes: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> GpStatus {
    guard(|| {
        let s = out_arg(s, "sampler")?;
        let count = out_arg(count, "count")?;
        *count = 0;
        let Some(batch) = s.batches.get(s.next) else {
            return Err(GpStatus::EndOfEpoch);
        };
        *count = batch.len();
        if boxes.is_null() || capacity < batch.len() {
            return Err(fail(
                GpStatus::BufferTooSmall,
                format!("batch holds {} boxes", batch.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(boxes, 4 * batch.len());
        for (d, b) in dst.chunks_exact_mut(4).zip(batch) {
            d.copy_from_slice(&[b.minx, b.miny, b.maxx, b.maxy]);
        }
        s.next += 1;
        Ok(())
    })
}

/// Rewind to the start of the epoch (epochs repeat identically).
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_sampler_reset(s: *mut GpSampler) {
    if let Some(s) = s.as_mut() {
        s.next = 0;
    }
}

/// Release a sampler. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_sampler_free(s: *mut GpSampler) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of roles (layers) in a sample.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_role_count(s: *const GpSample) -> usize {
    s.as_ref().map_or(0, |s| s.roles.len())
}

/// Name of role `i` (roles are sorted), valid while the sample lives; null
/// when out of range.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_role_name(s: *const GpSample, i: usize) -> *const c_char {
    s.as_ref()
        .and_then(|s| s.roles.get(i))
        .map_or(ptr::null(), |r| r.as_ptr())
}

unsafe fn patch<'a>(s: *const GpSample, role: *const c_char) -> Result<&'a geopatch::patch::Patch, GpStatus> {
    let s = ref_arg(s, "sample")?;
    let role = str_arg(role, "role")?;
    s.inner
        .get(role)
        .ok_or_else(|| fail(GpStatus::InvalidArgument, format!("sample has no role {role:?}")))
}

/// Shape of the patch for `role`.
///
/// # Safety
/// `s` must be a live handle; `role` NUL-terminated; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_shape(
    s: *const GpSample,
    role: *const c_char,
    bands: *mut usize,
    rows: *mut usize,
    cols: *mut usize,
) -> GpStatus {
    guard(|| {
        let p = patch(s, role)?;
        *out_arg(bands, "bands")? = p.bands;
        *out_arg(rows, "rows")? = p.shape.rows;
        *out_arg(cols, "cols")? = p.shape.cols;
        Ok(())
    })
}

/// Copy the band-major samples (`bands * rows * cols` floats) and,
/// if `valid` is non-null, the `rows * cols` validity flags (0 or 1) of
/// `role`.
///
/// # Safety
/// `s` must be a live handle; `data` must hold `len` floats and `valid`
/// `rows * cols` bytes.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_copy(
    s: *const GpSample,
    role: *const c_char,
    data: *mut f32,
    len: usize,
    valid: *mut u8,
) -> GpStatus {
    guard(|| {
        let p = patch(s, role)?;
        if data.is_null() || len < p.samples.len() {
            return Err(fail(
                GpStatus::BufferTooSmall,
                format!("need {} floats", p.samples.len()),
            ));
        }
        ptr::copy_nonoverlapping(p.samples.as_ptr(), data, p.samples.len());
        if !valid.is_null() {
            let v = std::slice::from_raw_parts_mut(valid, p.valid.len());
            for (d, s) in v.iter_mut().zip(&p.valid) {
                *d = u8::from(*s);
            }
        }
        Ok(())
    })
}

/// Release a sample. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_free(s: *mut GpSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
