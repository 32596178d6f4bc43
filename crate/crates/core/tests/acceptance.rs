//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (uncaptured) and then asserts. Tests are serialized so that timed
//! runs never share the CPU with each other.

mod support;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use geopatch::bench::{run_benchmark, BenchConfig, BenchReport, FixtureSpec, Mode};
use geopatch::cache::{BlockCache, LruCache, Weighted};
use geopatch::dataset::DatasetConfig;
use geopatch::geo::{bbox_union, BoundingBox, Resolution};
use geopatch::index::SpatialIndex;
use geopatch::loader::run_pipeline;
use geopatch::patch::Patch;
use geopatch::proj::{transform_point, CrsDef, LonLat, ProjXY};
use geopatch::sampler::{
    build_sampler, epoch_hash, GeoSampler, GridSampler, RandomBatchSampler, RandomSampler, SamplerConfig, SamplerKind,
    SamplingFrame,
};
use geopatch::tiff::{
    parse_geotiff_header, synth_raster, write_geotiff_with, Encoding, SampleType, Scene, SynthSpec, WriterOptions,
};
use geopatch::vector::{rasterize, PolygonSet};
use geopatch::warp::{warp_scene, Resampling, WarpOptions};
use support::fixtures::*;
use support::{
    a4_source, a4_target, enumerate_positions, exact_size, point_in_polygon_exact, random_star, read_all, Lcg, A4_TE,
    A4_TS,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(name: &str, ok: bool, detail: String) {
    let line = format!("\n[{}] {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{name}: {detail}");
}

fn work_dir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

fn run_warp(te: [f64; 4], ts: [usize; 2], src: &Path, dst: &Path) -> f64 {
    let mut args: Vec<String> = vec!["warp".into(), "-t_srs".into(), "EPSG:32619".into(), "-te".into()];
    args.extend(te.iter().map(|v| v.to_string()));
    args.push("-ts".into());
    args.extend(ts.iter().map(|v| v.to_string()));
    args.extend([src.display().to_string(), dst.display().to_string()]);
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_geopatch"))
        .args(&args)
        .output()
        .unwrap();
    let secs = t.elapsed().as_secs_f64();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    secs
}

fn grid_matches(path: &Path, te: [f64; 4], ts: [usize; 2]) -> bool {
    let m = parse_geotiff_header(path).unwrap();
    let b = m.bounds();
    m.crs.epsg() == Some(32619)
        && m.crs == CrsDef::from_epsg(32619).unwrap()
        && [b.minx, b.miny, b.maxx, b.maxy] == te
        && [m.shape.cols, m.shape.rows] == ts
}

#[test]
fn warp_command_reproduces_target_grid() {
    let _g = serial();
    let dir = tempfile::tempdir_in(work_dir("warp")).unwrap();
    let src = dir.path().join("cdl.tif");
    a4_source(&src, A4_TE);
    let full = run_warp(A4_TE, A4_TS, &src, &dir.path().join("out.tif"));
    let full_ok = grid_matches(&dir.path().join("out.tif"), A4_TE, A4_TS);

    let (te, ts) = a4_target(4);
    let small_src = dir.path().join("cdl_small.tif");
    a4_source(&small_src, te);
    let small = run_warp(te, ts, &small_src, &dir.path().join("small.tif"));
    let small_ok = grid_matches(&dir.path().join("small.tif"), te, ts);
    verdict(
        "warp command: exact CRS/bounds/shape, full size < 60 s, 1/16 scale < 2 s",
        full_ok && small_ok && full < 60.0 && small < 2.0,
        format!("metadata exact: {full_ok}/{small_ok}; full {full:.2} s; 1/16 scale {small:.2} s"),
    );
}

#[test]
fn cross_crs_layers_stay_aligned() {
    let _g = serial();
    let t0 = Instant::now();
    let dir = tempfile::tempdir_in(work_dir("alignment")).unwrap();
    let fx = FixtureSpec::default();
    let scenes = fx.scenes().unwrap();
    let label = fx.label(&scenes).unwrap();
    let lb = label.bbox().unwrap();
    let offset = [lb.center().0.round(), lb.center().1.round()];
    let coords = |mut s: SynthSpec| {
        s.encoding = Encoding::Coords { offset };
        s.reference_crs = Some(label.crs.clone());
        s.sample_type = SampleType::F32;
        s.bands = 2;
        s
    };
    let (img, lab) = (dir.path().join("image"), dir.path().join("labels"));
    std::fs::create_dir_all(&img).unwrap();
    std::fs::create_dir_all(&lab).unwrap();
    for s in &scenes {
        synth_raster(&coords(s.clone()), &img.join(s.name.as_deref().unwrap())).unwrap();
    }
    synth_raster(&coords(label.clone()), &lab.join("labels.tif")).unwrap();
    let cfg = DatasetConfig::from_toml(
        "compose = \"intersection\"\n[[layer]]\nroot = \"labels\"\nis_label = true\n[[layer]]\nroot = \"image\"\n",
        dir.path(),
    )
    .unwrap();
    let ds = cfg.open(Arc::new(BlockCache::new(256 << 20))).unwrap();
    let res = ds.res();
    let mut scfg = SamplerConfig::new(224.0, 500);
    scfg.seed = 2021;
    let sampler = build_sampler(SamplerKind::Random, &SamplingFrame::from_dataset(&*ds), scfg).unwrap();

    let (mut agree, mut valid, mut truth_err, mut patches) = (0u64, 0u64, 0.0f64, 0usize);
    let tol = 0.5 * res.x;
    run_pipeline(&*ds, &*sampler, 6, None, |batch| {
        let (m, mshape) = &batch.arrays["mask"];
        let (im, ishape) = &batch.arrays["image"];
        assert_eq!(mshape[2..], ishape[2..]);
        let (h, w) = (mshape[2], mshape[3]);
        let n = h * w;
        for (k, b) in batch.bboxes.iter().enumerate() {
            patches += 1;
            let (mv, iv) = (
                &batch.valid["mask"][k * n..(k + 1) * n],
                &batch.valid["image"][k * n..(k + 1) * n],
            );
            for p in 0..n {
                if !(mv[p] && iv[p]) {
                    continue;
                }
                let at = |a: &[f32], band: usize| a[(k * 2 + band) * n + p] as f64;
                let d = (at(m, 0) - at(im, 0)).abs().max((at(m, 1) - at(im, 1)).abs());
                valid += 1;
                agree += (d <= tol) as u64;
                let (r, c) = ((p / w) as f64 + 0.5, (p % w) as f64 + 0.5);
                let (x, y) = (b.minx + c * res.x - offset[0], b.maxy - r * res.y - offset[1]);
                truth_err = truth_err.max((at(m, 0) - x).abs().max((at(m, 1) - y).abs()));
            }
        }
    })
    .unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let frac = agree as f64 / valid.max(1) as f64;
    verdict(
        "alignment: 500 patches of 224 px, >= 99.9% of valid pixels within 0.5 res, < 5 min",
        patches == 500 && valid > 0 && frac >= 0.999 && secs < 300.0,
        format!(
            "{patches} patches, {valid} valid pixels, {:.4}% within {tol} m, label-vs-grid max error {truth_err:.3} m, {secs:.1} s",
            100.0 * frac
        ),
    );
}

fn uniform(rng: &mut Lcg, lo: f64, hi: f64) -> f64 {
    rng.range(lo, hi)
}

#[test]
fn projections_round_trip_and_match_reference() {
    let _g = serial();
    let mut details = Vec::new();
    let mut ok = true;
    let domains: [(u32, (f64, f64), (f64, f64)); 4] = [
        (32619, (-69.0 - 44.0, -69.0 + 44.0), (-84.0, 84.0)),
        (32733, (15.0 - 44.0, 15.0 + 44.0), (-80.0, 84.0)),
        (5070, (-179.0, 179.0), (-89.0, 89.0)),
        (3857, (-180.0, 180.0), (-85.0, 85.0)),
    ];
    for (code, lon, lat) in domains {
        let c = CrsDef::from_epsg(code).unwrap();
        let mut rng = Lcg(code as u64);
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let p = LonLat::new(uniform(&mut rng, lon.0, lon.1), uniform(&mut rng, lat.0, lat.1));
            let q = c.project_inverse(c.project_forward(p).unwrap()).unwrap();
            worst = worst.max((q.lon - p.lon).abs()).max((q.lat - p.lat).abs());
        }
        ok &= worst < 1e-9;
        details.push(format!("EPSG:{code} round trip {worst:.1e} deg"));
    }
    let mut worst_m = 0.0f64;
    let mut points = 0;
    for (code, table) in [
        (32618, UTM18N),
        (32619, UTM19N),
        (32733, UTM33S),
        (5070, ALBERS_5070),
        (3857, WEB_MERCATOR),
    ] {
        ok &= table.len() >= 5;
        let c = CrsDef::from_epsg(code).unwrap();
        for &(lon, lat, x, y) in table {
            let p = c.project_forward(LonLat::new(lon, lat)).unwrap();
            worst_m = worst_m.max((p.x - x).abs()).max((p.y - y).abs());
            points += 1;
        }
    }
    let (utm, aea) = (CrsDef::from_epsg(32619).unwrap(), CrsDef::from_epsg(5070).unwrap());
    for &(e, n, x, y) in UTM19_TO_ALBERS {
        let p = transform_point(&utm, &aea, ProjXY::new(e, n)).unwrap();
        worst_m = worst_m.max((p.x - x).abs()).max((p.y - y).abs());
        points += 1;
    }
    ok &= worst_m <= 0.01;
    details.push(format!("{points} reference points, max error {worst_m:.2e} m"));
    verdict(
        "projection: round trip < 1e-9 deg on 1e4 points, reference points within 0.01 m",
        ok,
        details.join("; "),
    );
}

/// The benchmark run shared by the two throughput checks.
fn desk_benchmark() -> &'static (BenchReport, f64) {
    static REPORT: OnceLock<(BenchReport, f64)> = OnceLock::new();
    REPORT.get_or_init(|| {
        let t0 = Instant::now();
        let dir = work_dir("desk");
        let dataset = FixtureSpec::default().generate(&dir.join("fixture")).unwrap();
        let cfg = BenchConfig {
            dataset: Some(dataset),
            prep_dir: Some(dir.join("preprocessed")),
            batch_sizes: vec![1, 4, 64],
            seeds: vec![0, 1],
            epoch_size: 512,
            ..BenchConfig::default()
        };
        let mut csv = csv::Writer::from_path(dir.join("report.csv")).unwrap();
        let report = run_benchmark(&cfg, |rows| {
            for r in rows {
                csv.serialize(r).unwrap();
            }
            csv.flush().unwrap();
            Ok(())
        })
        .unwrap();
        (report, t0.elapsed().as_secs_f64())
    })
}

fn hit_rate(report: &BenchReport, sampler: &str, mode: Mode) -> f64 {
    let rows: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.sampler == sampler && r.mode == mode.to_string())
        .collect();
    let hits: u64 = rows.iter().map(|r| r.cache_hits).sum();
    let total: u64 = rows.iter().map(|r| r.cache_hits + r.cache_misses).sum();
    hits as f64 / total.max(1) as f64
}

#[test]
fn grid_sampling_outpaces_random_sampling() {
    let _g = serial();
    let (report, secs) = desk_benchmark();
    let rate = |k: SamplerKind, b: usize| report.mean_rate(k, b, Mode::Warped).unwrap();
    let (random64, batch64, grid64) = (
        rate(SamplerKind::Random, 64),
        rate(SamplerKind::RandomBatch, 64),
        rate(SamplerKind::Grid, 64),
    );
    let small: Vec<f64> = [1, 4]
        .iter()
        .map(|&b| rate(SamplerKind::RandomBatch, b) / rate(SamplerKind::Random, b))
        .collect();
    let grid_hits = hit_rate(report, "grid", Mode::Warped);
    let ok = grid64 >= 1.5 * random64
        && batch64 >= random64
        && small.iter().all(|r| (r - 1.0).abs() <= 0.2)
        && grid_hits > 0.9
        && *secs < 900.0;
    verdict(
        "sampler throughput: grid >= 1.5x random at batch 64, random-batch >= random at 64, within 20% at batch <= 4, < 15 min",
        ok,
        format!(
            "batch 64: random {random64:.1}/s, random-batch {batch64:.1}/s, grid {grid64:.1}/s ({:.2}x); random-batch/random at 1, 4: {:.3}, {:.3}; grid hit rate {grid_hits:.3}; {secs:.0} s",
            grid64 / random64,
            small[0],
            small[1]
        ),
    );
}

#[test]
fn preprocessing_speeds_up_every_sampler() {
    let _g = serial();
    let (report, _) = desk_benchmark();
    let batches = [1, 4, 64];
    let ratio = |k: SamplerKind| {
        let sum = |m: Mode| batches.iter().map(|&b| report.mean_rate(k, b, m).unwrap()).sum::<f64>();
        sum(Mode::Preprocessed) / sum(Mode::Warped)
    };
    let ratios: BTreeMap<String, f64> = [SamplerKind::Random, SamplerKind::RandomBatch, SamplerKind::Grid]
        .iter()
        .map(|&k| (k.to_string(), ratio(k)))
        .collect();
    let grid = ratios["grid"];
    let ok = ratios.values().all(|&r| r >= 1.0) && ratios.values().all(|&r| r <= grid);
    verdict(
        "preprocessing: preprocessed >= warped for every sampler, grid gains most",
        ok,
        format!("preprocessed/warped throughput: {ratios:?}"),
    );
}

fn random_frame(rng: &mut Lcg) -> SamplingFrame {
    let n = 1 + (rng.next_f64() * 8.0) as usize;
    let res = [1.0, 10.0, 30.0][(rng.next_f64() * 3.0) as usize];
    let fps: Vec<BoundingBox> = (0..n)
        .map(|_| {
            let (x, y) = (rng.range(-5e5, 5e5), rng.range(3e6, 5e6));
            bb(
                x,
                y,
                x + res * rng.range(300.0, 3000.0),
                y + res * rng.range(300.0, 3000.0),
            )
        })
        .collect();
    let hull = fps[1..].iter().fold(fps[0], |a, b| bbox_union(&a, b));
    SamplingFrame::new(hull, fps, Resolution::square(res).unwrap())
}

#[test]
fn sampler_boxes_counts_and_determinism() {
    let _g = serial();
    let mut rng = Lcg(1729);
    let (mut boxes, mut bad) = (0usize, 0usize);
    while boxes < 100_000 {
        let f = random_frame(&mut rng);
        let mut cfg = SamplerConfig::new(224.0, 1000);
        cfg.seed = boxes as u64;
        cfg.batch_size = 16;
        let (w, h) = (224.0 * f.res.x, 224.0 * f.res.y);
        let r = RandomSampler::new(&f, cfg.clone()).unwrap().boxes();
        let rb = RandomBatchSampler::new(&f, cfg).unwrap().boxes();
        for b in r.iter().chain(&rb) {
            boxes += 1;
            bad += usize::from(!(exact_size(b, w, h) && f.bounds.contains(b)));
        }
    }
    let mut grid_bad = 0;
    for _ in 0..100 {
        let ex = 1 + (rng.next_f64() * 3000.0) as i64;
        let ey = 1 + (rng.next_f64() * 3000.0) as i64;
        let patch = 1 + (rng.next_f64() * 500.0) as i64;
        let stride = 1 + (rng.next_f64() * 500.0) as i64;
        let fp = bb(-2000.0, 1000.0, -2000.0 + ex as f64, 1000.0 + ey as f64);
        let f = SamplingFrame::new(fp, vec![fp], Resolution::square(1.0).unwrap());
        let mut cfg = SamplerConfig::new(patch as f64, 1);
        cfg.stride = Some((stride as f64, stride as f64));
        let n = GridSampler::new(&f, cfg).unwrap().len();
        grid_bad += usize::from(n != enumerate_positions(ex, patch, stride) * enumerate_positions(ey, patch, stride));
    }
    let f = random_frame(&mut Lcg(5));
    let mut hashes_equal = true;
    for kind in [SamplerKind::Random, SamplerKind::RandomBatch, SamplerKind::Grid] {
        let mut cfg = SamplerConfig::new(64.0, 4096);
        cfg.seed = 7;
        cfg.batch_size = 16;
        let a = epoch_hash(&*build_sampler(kind, &f, cfg.clone()).unwrap());
        let b = epoch_hash(&*build_sampler(kind, &f, cfg).unwrap());
        hashes_equal &= a == b;
    }
    verdict(
        "sampler properties: 1e5 boxes exact-size and in bounds, grid counts on 100 triples, seeded hashes repeat",
        bad == 0 && grid_bad == 0 && hashes_equal,
        format!("{boxes} boxes, {bad} bad; {grid_bad}/100 grid count mismatches; hashes repeat: {hashes_equal}"),
    );
}

struct W(usize);

impl Weighted for W {
    fn weight(&self) -> usize {
        self.0
    }
}

#[test]
fn index_cache_and_rasterizer_match_oracles() {
    let _g = serial();
    let mut rng = Lcg(31337);

    // spatial index vs linear scan
    let items: Vec<(BoundingBox, usize)> = (0..500)
        .map(|i| {
            let (x, y) = (rng.range(0.0, 1e4), rng.range(0.0, 1e4));
            (bb(x, y, x + rng.range(0.0, 800.0), y + rng.range(0.0, 800.0)), i)
        })
        .collect();
    let index = SpatialIndex::new(items.clone());
    let mut index_bad = 0;
    for _ in 0..1000 {
        let (x, y) = (rng.range(-500.0, 1e4), rng.range(-500.0, 1e4));
        let q = bb(x, y, x + rng.range(0.0, 1500.0), y + rng.range(0.0, 1500.0));
        let mut scan: Vec<usize> = items
            .iter()
            .filter(|(b, _)| b.intersects(&q))
            .map(|(_, i)| *i)
            .collect();
        scan.sort_unstable();
        index_bad += usize::from(index.query(&q) != scan);
    }

    // LRU vs a recency-list model
    let (mut lru_bad, mut over) = (0usize, 0usize);
    for trace in 0..4u64 {
        let cap = 600 + 300 * trace as usize;
        let cache: LruCache<u32, W> = LruCache::new(cap);
        let weights: Vec<usize> = (0..64).map(|_| 1 + (rng.next_f64() * 100.0) as usize).collect();
        let mut model: Vec<u32> = Vec::new();
        let mut evictions = 0u64;
        for _ in 0..10_000 / 4 {
            let k = (rng.next_f64() * 64.0) as u32;
            cache.get_or_load(k, || Ok(W(weights[k as usize]))).unwrap();
            if let Some(p) = model.iter().position(|&m| m == k) {
                model.remove(p);
            }
            model.push(k);
            while model.iter().map(|&m| weights[m as usize]).sum::<usize>() > cap {
                model.remove(0);
                evictions += 1;
            }
            let s = cache.stats();
            over += usize::from(s.resident_bytes > cap);
            lru_bad += usize::from(cache.lru_order() != model || s.evictions != evictions);
        }
    }

    // rasterizer vs exact point-in-polygon
    let crs = CrsDef::from_epsg(32618).unwrap();
    let (area, res) = (bb(0.0, 0.0, 30.0, 30.0), Resolution::square(1.0).unwrap());
    let mut raster_bad = 0usize;
    let mut polygons = 0;
    while polygons < 200 {
        let Some(p) = random_star(&mut rng, 15.0, 15.0, 13.0, None, 1 + (polygons % 7) as u16) else {
            continue;
        };
        polygons += 1;
        let set = PolygonSet {
            polygons: vec![p.clone()],
            crs: crs.clone(),
        };
        let m: Patch = rasterize(&set, &area, &res);
        let t = m.transform();
        for r in 0..m.height() {
            for c in 0..m.width() {
                let (x, y) = t.pixel_to_world(r as f64 + 0.5, c as f64 + 0.5);
                let expect = if point_in_polygon_exact(&p.rings, x, y) {
                    p.burn as f32
                } else {
                    0.0
                };
                raster_bad += usize::from(m.get(0, r, c) != expect);
            }
        }
    }
    verdict(
        "oracles: R-tree = linear scan on 1e3 queries, LRU = model on 1e4 steps, rasterizer = point-in-polygon on 200 polygons",
        index_bad == 0 && lru_bad == 0 && over == 0 && raster_bad == 0,
        format!("index mismatches {index_bad}; LRU mismatches {lru_bad}, over capacity {over}; rasterizer pixel mismatches {raster_bad}"),
    );
}

fn random_patch(rng: &mut Lcg, st: SampleType) -> Patch {
    let (bands, rows, cols) = (
        1 + (rng.next_f64() * 4.0) as usize,
        1 + (rng.next_f64() * 150.0) as usize,
        1 + (rng.next_f64() * 150.0) as usize,
    );
    let samples = (0..bands * rows * cols)
        .map(|_| {
            let r = (rng.next_f64() * 4294967296.0) as u32;
            match st {
                SampleType::U8 => (r % 256) as f32,
                SampleType::U16 => (r % 65536) as f32,
                SampleType::I16 => (r % 65536) as f32 - 32768.0,
                SampleType::F32 => f32::from_bits(r & 0x7f7f_ffff),
            }
        })
        .collect();
    let (ox, oy) = (rng.range(1e5, 8e5).round(), rng.range(1e6, 5e6).round());
    let bbox = bb(ox, oy, ox + cols as f64 * 10.0, oy + rows as f64 * 10.0);
    Patch::from_samples(
        samples,
        bands,
        bbox,
        CrsDef::from_epsg(32619).unwrap(),
        Resolution::square(10.0).unwrap(),
        st,
    )
    .unwrap()
}

#[test]
fn geotiff_and_identity_warp_round_trips() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Lcg(404);
    let types = [SampleType::U8, SampleType::U16, SampleType::I16, SampleType::F32];
    let mut tiff_bad = 0;
    for i in 0..50 {
        let p = random_patch(&mut rng, types[i % 4]);
        let path = dir.path().join(format!("p{i}.tif"));
        let opts = WriterOptions {
            tile_size: [16, 64, 256][i % 3],
            ..WriterOptions::default()
        };
        write_geotiff_with(&path, &p, opts).unwrap();
        let scene = Scene::open(&path).unwrap();
        let m = scene.meta();
        let cache = BlockCache::new(1 << 26);
        let same = m.crs == p.crs
            && m.transform == p.transform()
            && m.shape == p.shape
            && m.sample_type == p.sample_type
            && (0..p.bands).all(|b| {
                read_all(&scene, b, &cache)
                    .iter()
                    .zip(p.band(b))
                    .all(|(x, y)| x.to_bits() == y.to_bits())
            });
        tiff_bad += usize::from(!same);
    }

    let mut warp_bad = 0;
    for (i, st) in types.iter().enumerate() {
        let mut spec = SynthSpec::new(CrsDef::from_epsg(5070).unwrap(), bb(0.0, 0.0, 9000.0, 6000.0), 30.0);
        spec.bands = 3;
        spec.sample_type = *st;
        spec.tile_size = 64;
        let path = dir.path().join(format!("w{i}.tif"));
        synth_raster(&spec, &path).unwrap();
        let scene = Scene::open(&path).unwrap();
        let cache = BlockCache::new(1 << 26);
        for method in [Resampling::Nearest, Resampling::Bilinear] {
            let out = warp_scene(
                &scene,
                &spec.crs,
                &scene.meta().bounds(),
                &scene.meta().res(),
                &WarpOptions::new(method),
                &cache,
            )
            .unwrap();
            let same = out.shape == scene.meta().shape
                && out.valid.iter().all(|&v| v)
                && (0..3).all(|b| {
                    read_all(&scene, b, &cache)
                        .iter()
                        .zip(out.band(b))
                        .all(|(x, y)| x.to_bits() == y.to_bits())
                });
            warp_bad += usize::from(!same);
        }
    }
    verdict(
        "round trips: GeoTIFF write/parse/read bit-identical on 50 patches, identity warp bit-identical",
        tiff_bad == 0 && warp_bad == 0,
        format!("{tiff_bad}/50 GeoTIFF mismatches; {warp_bad}/8 identity warp mismatches"),
    );
}
