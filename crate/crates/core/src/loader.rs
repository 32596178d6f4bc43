//! Batch assembly and the parallel loading pipeline.
//!
//! One producer drains a sampler into a bounded queue; `workers` threads
//! query the dataset for each batch and collate the samples into contiguous
//! `B x C x H x W` arrays; the caller consumes finished batches.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use crossbeam_channel::bounded;

use crate::dataset::{GeoDataset, Sample};
use crate::error::{Error, Result};
use crate::geo::BoundingBox;
use crate::sampler::GeoSampler;

/// Samples of one batch stacked per role, channel-first.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Position of the batch in the sampler's sequence.
    pub index: usize,
    pub bboxes: Vec<BoundingBox>,
    /// Role -> `(data, [B, C, H, W])`.
    pub arrays: BTreeMap<String, (Vec<f32>, [usize; 4])>,
    /// Role -> `B x H x W` validity.
    pub valid: BTreeMap<String, Vec<bool>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.bboxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bboxes.is_empty()
    }

    pub fn shape(&self, role: &str) -> Option<[usize; 4]> {
        self.arrays.get(role).map(|a| a.1)
    }
}

/// Stack samples that share roles and patch shapes.
pub fn collate(index: usize, samples: &[Sample]) -> Result<Batch> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot collate an empty batch".into()))?;
    let b = samples.len();
    let mut arrays = BTreeMap::new();
    let mut valid = BTreeMap::new();
    for (role, p0) in &first.layers {
        let shape = [b, p0.bands, p0.height(), p0.width()];
        let mut data = Vec::with_capacity(shape.iter().product());
        let mut mask = Vec::with_capacity(b * p0.shape.len());
        for s in samples {
            let p = s
                .layers
                .get(role)
                .ok_or_else(|| Error::InvalidArgument(format!("sample lacks role {role:?}")))?;
            if p.bands != p0.bands || p.shape != p0.shape {
                return Err(Error::InvalidArgument(format!(
                    "role {role:?}: patch {}x{} does not match {}x{}",
                    p.bands, p.shape, p0.bands, p0.shape
                )));
            }
            data.extend_from_slice(&p.samples);
            mask.extend_from_slice(&p.valid);
        }
        arrays.insert(role.clone(), (data, shape));
        valid.insert(role.clone(), mask);
    }
    Ok(Batch {
        index,
        bboxes: samples.iter().map(|s| s.bbox).collect(),
        arrays,
        valid,
    })
}

/// Query and collate one batch sequentially.
pub fn load_batch(ds: &dyn GeoDataset, index: usize, boxes: &[BoundingBox]) -> Result<Batch> {
    let samples = boxes.iter().map(|b| ds.query(b)).collect::<Result<Vec<_>>>()?;
    collate(index, &samples)
}

/// Run `sampler` through `ds` with `workers` threads, handing each finished
/// batch to `consume` (in completion order, not sequence order).
///
/// Epochs of the sampler are repeated until `limit` boxes have been issued
/// (the last batch is truncated); `None` runs exactly one epoch. Returns the
/// number of boxes loaded. The first error stops the pipeline.
pub fn run_pipeline(
    ds: &dyn GeoDataset,
    sampler: &dyn GeoSampler,
    workers: usize,
    limit: Option<usize>,
    mut consume: impl FnMut(Batch),
) -> Result<usize> {
    let workers = workers.max(1);
    if limit.is_some() && sampler.is_empty() {
        return Err(Error::InvalidArgument("sampler yields no boxes".into()));
    }
    let (job_tx, job_rx) = bounded::<(usize, Vec<BoundingBox>)>(2 * workers);
    let (out_tx, out_rx) = bounded::<Result<Batch>>(2 * workers);
    let stop = AtomicBool::new(false);
    std::thread::scope(|scope| {
        let stop = &stop;
        scope.spawn(move || {
            let mut issued = 0usize;
            let mut index = 0usize;
            'outer: loop {
                for mut batch in sampler.epoch() {
                    if let Some(l) = limit {
                        if issued >= l {
                            break 'outer;
                        }
                        batch.truncate(l - issued);
                    }
                    issued += batch.len();
                    if stop.load(Ordering::Relaxed) || job_tx.send((index, batch)).is_err() {
                        break 'outer;
                    }
                    index += 1;
                }
                if limit.is_none_or(|l| issued >= l) {
                    break;
                }
            }
        });
        for _ in 0..workers {
            let (rx, tx) = (job_rx.clone(), out_tx.clone());
            scope.spawn(move || {
                for (i, boxes) in rx.iter() {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    if tx.send(load_batch(ds, i, &boxes)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(job_rx);
        drop(out_tx);
        let mut loaded = 0usize;
        let mut first_err = None;
        for r in out_rx.iter() {
            match r {
                Ok(b) if first_err.is_none() => {
                    loaded += b.len();
                    consume(b);
                }
                Ok(_) => {}
                Err(e) => {
                    stop.store(true, Ordering::Relaxed);
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(loaded),
        }
    })
}
