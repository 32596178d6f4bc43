use crate::error::{Error, Result};
use crate::geo::{grid_shape, BoundingBox, GeoTransform, GridShape, Resolution};
use crate::proj::CrsDef;
use crate::tiff::SampleType;

/// A georeferenced `C x H x W` block of samples with a per-pixel validity mask.
///
/// Samples are stored band-major as `f32`, converted from `sample_type`.
/// Invalid cells hold `fill`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub bands: usize,
    pub shape: GridShape,
    pub samples: Vec<f32>,
    pub valid: Vec<bool>,
    pub bbox: BoundingBox,
    pub crs: CrsDef,
    pub res: Resolution,
    pub sample_type: SampleType,
    pub nodata: Option<f64>,
    pub fill: f32,
}

impl Patch {
    /// An all-invalid patch covering `bbox` at `res`.
    pub fn empty(
        bands: usize,
        bbox: BoundingBox,
        crs: CrsDef,
        res: Resolution,
        sample_type: SampleType,
        nodata: Option<f64>,
        fill: f32,
    ) -> Self {
        let shape = grid_shape(&bbox, &res);
        Patch {
            bands,
            shape,
            samples: vec![fill; bands * shape.len()],
            valid: vec![false; shape.len()],
            bbox,
            crs,
            res,
            sample_type,
            nodata,
            fill,
        }
    }

    /// Build from band-major samples; every pixel is valid.
    pub fn from_samples(
        samples: Vec<f32>,
        bands: usize,
        bbox: BoundingBox,
        crs: CrsDef,
        res: Resolution,
        sample_type: SampleType,
    ) -> Result<Self> {
        let shape = grid_shape(&bbox, &res);
        if samples.len() != bands * shape.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples do not fill {bands} bands of {shape}",
                samples.len()
            )));
        }
        Ok(Patch {
            bands,
            shape,
            samples,
            valid: vec![true; shape.len()],
            bbox,
            crs,
            res,
            sample_type,
            nodata: None,
            fill: 0.0,
        })
    }

    pub fn transform(&self) -> GeoTransform {
        GeoTransform::from_bbox(&self.bbox, &self.res)
    }

    pub fn height(&self) -> usize {
        self.shape.rows
    }

    pub fn width(&self) -> usize {
        self.shape.cols
    }

    #[inline]
    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.samples[(band * self.shape.rows + row) * self.shape.cols + col]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.shape.cols + col]
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.shape.len();
        &self.samples[band * n..(band + 1) * n]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn all_invalid(&self) -> bool {
        !self.valid.iter().any(|v| *v)
    }

    /// Set invalid cells to the fill value.
    pub fn apply_fill(&mut self) {
        let n = self.shape.len();
        if self.valid.iter().all(|v| *v) {
            return;
        }
        for band in self.samples.chunks_exact_mut(n.max(1)).take(self.bands) {
            for (s, v) in band.iter_mut().zip(&self.valid) {
                *s = if *v { *s } else { self.fill };
            }
        }
    }
}
