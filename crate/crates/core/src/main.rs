use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use geopatch::bench::{run_benchmark, BenchConfig, FixtureSpec};
use geopatch::cache::{cache_bytes_from_env, BlockCache, DEFAULT_CACHE_BYTES};
use geopatch::dataset::DatasetConfig;
use geopatch::geo::{BoundingBox, GridShape};
use geopatch::proj::CrsDef;
use geopatch::sampler::{build_sampler, epoch_hash, SamplerConfig, SamplerKind, SamplingFrame};
use geopatch::tiff::{parse_geotiff_header, synth_raster, write_geotiff, Scene, SynthSpec, WriterOptions};
use geopatch::warp::{warp_to_file, Resampling};

#[derive(Parser)]
#[command(
    name = "geopatch",
    version,
    about = "Pixel-aligned patch sampling over georeferenced layers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the metadata of a GeoTIFF.
    Info { file: PathBuf },
    /// Generate synthetic rasters from a TOML spec.
    Synth {
        spec: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Reproject a raster onto an explicit target grid.
    Warp(WarpArgs),
    /// Sample patches from a dataset and write them as GeoTIFFs plus a manifest.
    Sample(SampleArgs),
    /// Run the throughput benchmark and write a CSV report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct WarpArgs {
    /// Target CRS, e.g. EPSG:32619.
    #[arg(long = "t_srs", value_name = "SRS")]
    t_srs: CrsDef,
    /// Target extent: xmin ymin xmax ymax.
    #[arg(long = "te", num_args = 4, value_names = ["XMIN", "YMIN", "XMAX", "YMAX"])]
    te: Vec<f64>,
    /// Target size in pixels: width height.
    #[arg(long = "ts", num_args = 2, value_names = ["WIDTH", "HEIGHT"])]
    ts: Vec<usize>,
    /// Resampling method; defaults by sample type.
    #[arg(short = 'r', long = "r")]
    r: Option<Resampling>,
    src: PathBuf,
    dst: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "random")]
    sampler: SamplerKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 224)]
    patch_px: usize,
    #[arg(long, default_value_t = 112)]
    stride_px: usize,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
}

/// gdalwarp-style single-dash long flags become clap long flags.
fn normalize_args(args: Vec<String>) -> Vec<String> {
    if args.get(1).map(String::as_str) != Some("warp") {
        return args;
    }
    args.into_iter()
        .map(|a| match a.as_str() {
            "-t_srs" | "-te" | "-ts" => format!("-{a}"),
            _ => a,
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthFile {
    #[serde(default)]
    raster: Vec<SynthSpec>,
    fixture: Option<FixtureSpec>,
}

fn synth(spec: &Path, out: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let f: SynthFile = toml::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
    if f.raster.is_empty() && f.fixture.is_none() {
        bail!("{}: no [[raster]] or [fixture] entries", spec.display());
    }
    fs::create_dir_all(out)?;
    for (i, r) in f.raster.iter().enumerate() {
        let name = r.name.clone().unwrap_or_else(|| format!("synth_{i:03}.tif"));
        synth_raster(r, &out.join(&name))?;
        println!("{}", out.join(name).display());
    }
    if let Some(fx) = f.fixture {
        println!("{}", fx.generate(out)?.display());
    }
    Ok(())
}

fn warp(a: &WarpArgs) -> anyhow::Result<()> {
    let (w, h) = (a.ts[0], a.ts[1]);
    let bbox = BoundingBox::new(a.te[0], a.te[1], a.te[2], a.te[3])?;
    let shape = GridShape::new(h, w)?;
    let cache = BlockCache::new(cache_bytes_from_env(DEFAULT_CACHE_BYTES));
    let scene = Scene::open(&a.src)?;
    let m = scene.meta();
    let method = a.r.unwrap_or_else(|| Resampling::default_for(m.sample_type, false));
    let opts = WriterOptions {
        tile_size: m.block_size().0.clamp(16, 1024) / 16 * 16,
        ..WriterOptions::default()
    };
    warp_to_file(&scene, &a.t_srs, &bbox, shape, method, m.nodata, &a.dst, opts, &cache)?;
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry {
    index: usize,
    bbox: [f64; 4],
    files: BTreeMap<String, String>,
    sha256: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest {
    sampler: String,
    seed: u64,
    n: usize,
    patch_px: usize,
    crs: String,
    res: [f64; 2],
    sequence_hash: String,
    samples: Vec<ManifestEntry>,
}

fn sample(a: &SampleArgs) -> anyhow::Result<()> {
    let cfg = DatasetConfig::load(&a.dataset)?;
    let cache = Arc::new(BlockCache::new(cache_bytes_from_env(DEFAULT_CACHE_BYTES)));
    let ds = cfg.open(cache)?;
    let mut scfg = SamplerConfig::new(a.patch_px as f64, a.n);
    scfg.stride = Some((a.stride_px as f64, a.stride_px as f64));
    scfg.seed = a.seed;
    scfg.batch_size = a.batch_size;
    let sampler = build_sampler(a.sampler, &SamplingFrame::from_dataset(&*ds), scfg)?;
    let boxes: Vec<BoundingBox> = sampler.epoch().flatten().take(a.n).collect();
    fs::create_dir_all(&a.out)?;
    let mut samples = Vec::with_capacity(boxes.len());
    for (i, b) in boxes.iter().enumerate() {
        let s = ds.query(b)?;
        let (mut files, mut sha256) = (BTreeMap::new(), BTreeMap::new());
        for (role, p) in &s.layers {
            let name = format!("patch_{i:05}_{role}.tif");
            let path = a.out.join(&name);
            write_geotiff(&path, p)?;
            let digest = Sha256::digest(fs::read(&path)?);
            files.insert(role.clone(), name);
            sha256.insert(role.clone(), hex::encode(digest));
        }
        samples.push(ManifestEntry {
            index: i,
            bbox: [b.minx, b.miny, b.maxx, b.maxy],
            files,
            sha256,
        });
    }
    let res = ds.res();
    let manifest = Manifest {
        sampler: a.sampler.to_string(),
        seed: a.seed,
        n: samples.len(),
        patch_px: a.patch_px,
        crs: ds.crs().to_string(),
        res: [res.x, res.y],
        sequence_hash: epoch_hash(&*sampler),
        samples,
    };
    let path = a.out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("{}", path.display());
    Ok(())
}

fn bench(config: &Path, out: &Path) -> anyhow::Result<()> {
    let cfg = BenchConfig::load(config)?;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    let report = run_benchmark(&cfg, |rows| {
        for r in rows {
            w.serialize(r)
                .map_err(|e| geopatch::Error::Config(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| geopatch::Error::io(out, e))
    })?;
    eprintln!("{} rows written to {}", report.rows.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Info { file } => {
            print!("{}", parse_geotiff_header(&file)?);
            Ok(())
        }
        Cmd::Synth { spec, out } => synth(&spec, &out),
        Cmd::Warp(a) => warp(&a),
        Cmd::Sample(a) => sample(&a),
        Cmd::Bench { config, out } => bench(&config, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse_from(normalize_args(std::env::args().collect())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
