use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use geopatch::bench::{preprocessed_config, run_benchmark, run_cell, BenchConfig, FixtureSpec, Mode};
use geopatch::cache::BlockCache;
use geopatch::dataset::{DatasetConfig, LayerConfig, RasterLayerDataset};
use geopatch::geo::BoundingBox;
use geopatch::proj::CrsDef;
use geopatch::sampler::{build_sampler, SamplerConfig, SamplerKind, SamplingFrame};
use geopatch::tiff::{synth_raster, SynthSpec};

fn small_fixture() -> FixtureSpec {
    FixtureSpec {
        rows: 2,
        cols: 2,
        zones: vec![15, 16],
        scene_px: 256,
        bands: 2,
        tile_size: 64,
        ..FixtureSpec::default()
    }
}

fn small_bench(dir: &Path) -> BenchConfig {
    BenchConfig {
        fixture_dir: dir.join("fixture"),
        fixture: small_fixture(),
        batch_sizes: vec![1, 8],
        seeds: vec![3, 4],
        epoch_size: 24,
        patch_px: 32,
        stride_px: 16,
        workers: 3,
        cache_bytes: 1 << 24,
        ..BenchConfig::default()
    }
}

#[test]
fn report_has_one_row_per_cell_and_consistent_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bench(dir.path());
    let mut groups = 0;
    let report = run_benchmark(&cfg, |rows| {
        groups += 1;
        assert_eq!(rows.len(), cfg.seeds.len());
        Ok(())
    })
    .unwrap();
    let cells = cfg.samplers.len() * cfg.batch_sizes.len() * cfg.modes.len() * cfg.seeds.len();
    assert_eq!(report.rows.len(), cells);
    assert_eq!(groups * cfg.seeds.len(), cells);
    for r in &report.rows {
        assert_eq!(r.patches, cfg.epoch_size);
        assert!((r.patches_per_sec - r.epoch_size as f64 / r.wall_s).abs() <= 1e-9 * r.patches_per_sec);
        assert!(r.min_rate <= r.patches_per_sec && r.patches_per_sec <= r.max_rate);
        assert!(r.cache_hits + r.cache_misses > 0);
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "sampler,batch_size,mode,seed,epoch_size,patches_per_sec,min_rate,max_rate,cache_hits,cache_misses,evictions,bytes_decoded,wall_s"
    );
    assert_eq!(text.lines().count(), cells + 1);
    assert!(report.mean_rate(SamplerKind::Grid, 8, Mode::Preprocessed).is_some());
}

#[test]
fn same_seed_gives_same_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_bench(dir.path());
    cfg.modes = vec![Mode::Warped];
    cfg.batch_sizes = vec![4];
    let a = run_benchmark(&cfg, |_| Ok(())).unwrap();
    let b = run_benchmark(&cfg, |_| Ok(())).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.sequence_hash, y.sequence_hash);
        assert_eq!((&x.sampler, x.seed), (&y.sampler, y.seed));
    }
    let random: Vec<_> = a.rows.iter().filter(|r| r.sampler == "random").collect();
    assert_ne!(random[0].sequence_hash, random[1].sequence_hash);
}

#[test]
fn preprocessed_layers_match_on_the_fly_warping() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_fixture().generate(dir.path()).unwrap();
    let ds_cfg = DatasetConfig::load(&path).unwrap();
    let cache = Arc::new(BlockCache::new(1 << 26));
    let warped = ds_cfg.open(cache.clone()).unwrap();
    let prep_cfg = preprocessed_config(&ds_cfg, &dir.path().join("prep"), cache.clone()).unwrap();
    let prep = prep_cfg.open(cache.clone()).unwrap();
    // pre-aligned scenes are padded out to whole pixels
    let (w, p) = (warped.bounds(), prep.bounds());
    assert!(p.contains(&w));
    for d in [w.minx - p.minx, w.miny - p.miny, p.maxx - w.maxx, p.maxy - w.maxy] {
        assert!(d < 30.0, "{w:?} vs {p:?}");
    }
    assert_eq!(warped.crs(), prep.crs());
    // the label layer is already on the grid and is reused in place
    assert_eq!(prep_cfg.layers[0].root, ds_cfg.layers[0].root);
    assert_ne!(prep_cfg.layers[1].root, ds_cfg.layers[1].root);

    let mut scfg = SamplerConfig::new(40.0, 30);
    scfg.seed = 11;
    let sampler = build_sampler(SamplerKind::Random, &SamplingFrame::from_dataset(&*warped), scfg).unwrap();
    // both paths pick nearest source pixels through interpolated transforms
    // over different destination windows, so a pixel centre lying within the
    // interpolation error of a source pixel edge may land on a neighbour
    let (mut total, mut same_mask, mut same_value, mut both) = (0usize, 0usize, 0usize, 0usize);
    for b in sampler.epoch().flatten() {
        let (x, y) = (warped.query(&b).unwrap(), prep.query(&b).unwrap());
        for (role, p) in &x.layers {
            let q = &y.layers[role];
            assert_eq!((p.bands, p.shape), (q.bands, q.shape));
            for i in 0..p.valid.len() {
                total += 1;
                same_mask += (p.valid[i] == q.valid[i]) as usize;
                if p.valid[i] && q.valid[i] {
                    both += 1;
                    let mut exact = true;
                    for band in 0..p.bands {
                        let k = band * p.shape.len() + i;
                        let m = if role == "mask" { 256.0 } else { 65536.0 };
                        let d = (p.samples[k] - q.samples[k]).rem_euclid(m);
                        assert!(
                            d.min(m - d) <= 2.0,
                            "{role} at {b:?}: {} vs {}",
                            p.samples[k],
                            q.samples[k]
                        );
                        exact &= d == 0.0;
                    }
                    same_value += exact as usize;
                }
            }
        }
    }
    assert!(same_mask as f64 >= 0.99 * total as f64, "{same_mask}/{total}");
    assert!(same_value as f64 >= 0.99 * both as f64, "{same_value}/{both}");

    // a second call reuses the stamped output
    let t0 = std::fs::metadata(prep_cfg.layers[1].root.join(".prep.json"))
        .unwrap()
        .modified()
        .unwrap();
    preprocessed_config(&ds_cfg, &dir.path().join("prep"), cache).unwrap();
    let t1 = std::fs::metadata(prep_cfg.layers[1].root.join(".prep.json"))
        .unwrap()
        .modified()
        .unwrap();
    assert_eq!(t0, t1);
}

/// Blocks a window read of `b` touches on a north-up grid with origin
/// `(ox, oy)`, resolution `res` and square tiles of `tile` pixels.
fn blocks_of(b: &BoundingBox, ox: f64, oy: f64, res: f64, tile: usize, bands: usize) -> Vec<(usize, usize, usize)> {
    let c0 = ((b.minx - ox) / res).round() as usize;
    let c1 = ((b.maxx - ox) / res).round() as usize;
    let r0 = ((oy - b.maxy) / res).round() as usize;
    let r1 = ((oy - b.miny) / res).round() as usize;
    let mut out = Vec::new();
    for band in 0..bands {
        for br in r0 / tile..=(r1 - 1) / tile {
            for bc in c0 / tile..=(c1 - 1) / tile {
                out.push((band, br, bc));
            }
        }
    }
    out
}

#[test]
fn grid_second_epoch_hits_when_cache_holds_the_working_set() {
    let dir = tempfile::tempdir().unwrap();
    let (px, tile, bands, res) = (512usize, 64usize, 3usize, 10.0);
    let mut spec = SynthSpec::new(
        CrsDef::from_epsg(32615).unwrap(),
        BoundingBox::new(
            500_000.0,
            4_000_000.0,
            500_000.0 + px as f64 * res,
            4_000_000.0 + px as f64 * res,
        )
        .unwrap(),
        res,
    );
    spec.bands = bands;
    spec.tile_size = tile;
    synth_raster(&spec, &dir.path().join("a.tif")).unwrap();

    // trace-enumeration oracle: every block touched by every grid box
    let mut scfg = SamplerConfig::new(48.0, 1);
    scfg.stride = Some((40.0, 40.0));
    let probe = Arc::new(BlockCache::new(1 << 30));
    let ds = RasterLayerDataset::open_with_cache(&LayerConfig::new(dir.path()), probe).unwrap();
    let sampler = build_sampler(SamplerKind::Grid, &SamplingFrame::from_dataset(&ds), scfg.clone()).unwrap();
    let boxes: Vec<BoundingBox> = sampler.epoch().flatten().collect();
    let mut accesses = 0u64;
    let mut distinct = BTreeSet::new();
    for b in &boxes {
        let blocks = blocks_of(b, 500_000.0, 4_000_000.0 + px as f64 * res, res, tile, bands);
        accesses += blocks.len() as u64;
        distinct.extend(blocks);
    }
    let block_bytes = tile * tile * 2;

    let cfg = BenchConfig {
        epoch_size: boxes.len(),
        patch_px: 48,
        stride_px: 40,
        workers: 4,
        warmup_epochs: 1,
        ..BenchConfig::default()
    };
    let cache = Arc::new(BlockCache::new(distinct.len() * block_bytes));
    let ds = RasterLayerDataset::open_with_cache(&LayerConfig::new(dir.path()), cache.clone()).unwrap();
    let frame = SamplingFrame::from_dataset(&ds);
    let r = run_cell(&ds, &cache, &frame, SamplerKind::Grid, 8, 0, &cfg).unwrap();
    assert_eq!(r.patches, boxes.len());
    assert_eq!(r.stats.hits + r.stats.misses, accesses);
    assert!(r.stats.hit_rate() > 0.9, "hit rate {}", r.stats.hit_rate());
    assert_eq!(r.stats.misses, 0);
    assert_eq!(r.stats.evictions, 0);

    // a cold epoch misses once per distinct chunk: one read fills every band
    // of a pixel-interleaved tile. Concurrent workers may both miss on a
    // chunk neither has inserted yet
    let chunks: BTreeSet<_> = distinct.iter().map(|&(_, br, bc)| (br, bc)).collect();
    let cold = BenchConfig {
        warmup_epochs: 0,
        workers: 1,
        ..cfg.clone()
    };
    let r = run_cell(&ds, &cache, &frame, SamplerKind::Grid, 8, 0, &cold).unwrap();
    assert_eq!(r.stats.misses, chunks.len() as u64);
    assert_eq!(r.stats.bytes_decoded, (distinct.len() * block_bytes) as u64);
    assert_eq!(r.stats.hits + r.stats.misses, accesses);
    let r = run_cell(
        &ds,
        &cache,
        &frame,
        SamplerKind::Grid,
        8,
        0,
        &BenchConfig {
            warmup_epochs: 0,
            ..cfg
        },
    )
    .unwrap();
    assert!(r.stats.misses >= chunks.len() as u64);
    assert_eq!(r.stats.hits + r.stats.misses, accesses);
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_bench(dir.path());
    cfg.batch_sizes = vec![];
    assert!(run_benchmark(&cfg, |_| Ok(())).is_err());
    let mut cfg = small_bench(dir.path());
    cfg.dataset = Some(dir.path().join("missing.toml"));
    assert!(run_benchmark(&cfg, |_| Ok(())).is_err());
}
