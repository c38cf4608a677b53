//! File-level pipeline stages shared by the command-line tool and the
//! end-to-end tests. Each stage reads its inputs, writes its outputs into an
//! output directory, and records both in a run manifest.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::gis::{load_path_network, load_raster, save_raster, FoundClassifier, PathGraph, TerrainStack, NETWORK_FILE};
use crate::gp::{normalize_heatmap, posterior_grid, train, ModelFile};
use crate::metrics::{compare_to_reference, CategoryHistogram};
use crate::sampling::{
    build_pdm, fit_mobility, fit_normal, log_view, parse_histogram_csv, read_samples, sample_all, save_png,
    write_samples, FoundSample, MobilityFit,
};
use crate::simulation::{read_paths, run_monte_carlo, write_paths, StartSource};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const POSTERIOR_FILE: &str = "posterior.asc";
pub const MODEL_FILE: &str = "gp_model.toml";
pub const PATHS_FILE: &str = "paths.jsonl";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const PDM_FILE: &str = "pdm.asc";
pub const PDM_LOG_FILE: &str = "pdm_log.asc";
pub const PDM_PNG: &str = "pdm.png";
pub const PDM_LOG_PNG: &str = "pdm_log.png";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const MOBILITY_FILE: &str = "mobility.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// What a stage read, wrote and how long it took. Written as JSON next to
/// the outputs; its `config` entry can be fed back via `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the config rendered as TOML.
    pub config_sha256: String,
    pub config: Config,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub timings: Vec<StageTiming>,
    /// False when the stage failed after writing some outputs.
    pub complete: bool,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn record(path: &Path) -> Result<FileRecord> {
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

impl RunManifest {
    pub fn new(command: &str, config: &Config) -> Self {
        Self {
            command: command.to_string(),
            seed: config.seed,
            config_sha256: sha256_hex(config.to_toml().as_bytes()),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            complete: false,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        require(path)?;
        self.inputs.push(record(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(record(path)?);
        Ok(())
    }

    pub fn timed<R>(&mut self, stage: &str, f: impl FnOnce() -> Result<R>) -> Result<R> {
        let t = Instant::now();
        let r = f();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        r
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let p = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        require(path)?;
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Checks that every recorded output exists with its recorded checksum.
    pub fn verify(&self) -> Result<()> {
        for f in &self.outputs {
            let actual = sha256_file(&f.path)?;
            if actual != f.sha256 {
                return Err(Error::Config(format!("{} changed since the run (checksum mismatch)", f.path)));
            }
        }
        Ok(())
    }
}

fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))
}

/// Runs `body`, then writes the manifest whether or not it succeeded, so a
/// failed stage still documents the outputs it managed to produce.
fn run_stage(
    command: &str,
    config: &Config,
    out_dir: &Path,
    body: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<RunManifest> {
    prepare_out_dir(out_dir)?;
    let mut m = RunManifest::new(command, config);
    let r = body(&mut m);
    m.complete = r.is_ok();
    if !m.outputs.is_empty() || r.is_ok() {
        m.write(out_dir)?;
    }
    r.map(|_| m)
}

/// Normalize → train → posterior on a sparse place-last-seen heatmap.
pub fn upsample_pls(heatmap: &Path, out_dir: &Path, config: &Config) -> Result<RunManifest> {
    run_stage("upsample-pls", config, out_dir, |m| {
        m.input(heatmap)?;
        let raw = load_raster::<f64>(heatmap)?;
        let data = normalize_heatmap(&raw)?;
        let model = m.timed("train", || train(data, &config.gp.train))?;
        info!(
            "trained GP: length scales ({:.4}, {:.4}), scale {:.4}, noise {:.3e}, mll {:?}",
            model.hyper.length_scale[0],
            model.hyper.length_scale[1],
            model.hyper.output_scale,
            model.hyper.noise,
            model.final_mll
        );
        let post = m.timed("posterior", || posterior_grid(&model, config.gp.out_cell_size))?;
        let post_path = out_dir.join(POSTERIOR_FILE);
        save_raster(&post, &post_path)?;
        m.output(&post_path)?;
        let sha = m.inputs[0].sha256.clone();
        let desc = ModelFile::describe(&model, heatmap.display().to_string(), sha);
        let model_path = out_dir.join(MODEL_FILE);
        fs::write(&model_path, desc.to_toml()?).map_err(|e| Error::io(&model_path, e))?;
        m.output(&model_path)
    })
}

/// Where simulated places last seen come from.
#[derive(Debug, Clone)]
pub enum PlsInput {
    /// Up-sampled surface to draw places last seen from.
    Surface(PathBuf),
    Fixed(Point2<f64>),
}

fn load_terrain(dir: &Path, m: &mut RunManifest) -> Result<(TerrainStack<f64>, PathGraph<f64>)> {
    require(dir)?;
    let terrain = TerrainStack::<f64>::load_dir(dir)?;
    for f in [
        crate::gis::DEM_FILE,
        crate::gis::LAND_COVER_FILE,
        crate::gis::CATCHMENT_FILE,
        crate::gis::WATER_SURFACE_FILE,
        crate::gis::OUTFLOW_FILE,
        NETWORK_FILE,
    ] {
        m.input(&dir.join(f))?;
    }
    let graph = load_path_network(dir.join(NETWORK_FILE))?;
    Ok((terrain, graph))
}

/// Monte Carlo path generation over a terrain directory.
pub fn simulate(terrain_dir: &Path, pls: &PlsInput, out_dir: &Path, config: &Config, workers: usize) -> Result<RunManifest> {
    run_stage("simulate", config, out_dir, |m| {
        let (terrain, graph) = load_terrain(terrain_dir, m)?;
        let source = match pls {
            PlsInput::Surface(p) => {
                m.input(p)?;
                StartSource::Density(load_raster(p)?)
            }
            PlsInput::Fixed(p) => StartSource::Fixed(*p),
        };
        let sim = config.sim_config()?;
        let paths = m.timed("simulate", || run_monte_carlo(&sim, &source, &terrain, &graph, workers))?;
        let out = out_dir.join(PATHS_FILE);
        write_paths(&out, &paths)?;
        m.output(&out)
    })
}

fn write_pdm_outputs(samples: &[FoundSample<f64>], terrain_dir: &Path, out_dir: &Path, config: &Config, m: &mut RunManifest) -> Result<()> {
    let dem_path = terrain_dir.join(crate::gis::DEM_FILE);
    m.input(&dem_path)?;
    let template = load_raster::<f64>(&dem_path)?;
    let cs = config.sampling.pdm_cell_size.unwrap_or(template.cell_size());
    let pdm = m.timed("pdm", || build_pdm(samples, &template, cs))?;
    let log = log_view(&pdm.grid);
    for (grid, asc, png) in [(&pdm.grid, PDM_FILE, PDM_PNG), (&log, PDM_LOG_FILE, PDM_LOG_PNG)] {
        let p = out_dir.join(asc);
        save_raster(grid, &p)?;
        m.output(&p)?;
        let p = out_dir.join(png);
        save_png(grid, &p)?;
        m.output(&p)?;
    }
    Ok(())
}

/// Found-location sampling along stored paths, plus the PDM.
pub fn sample(paths_file: &Path, terrain_dir: &Path, out_dir: &Path, config: &Config, workers: usize) -> Result<RunManifest> {
    run_stage("sample", config, out_dir, |m| {
        m.input(paths_file)?;
        let paths = read_paths::<f64>(paths_file)?;
        if paths.is_empty() {
            return Err(Error::EmptyInput(format!("{} holds no paths", paths_file.display())));
        }
        let s = &config.sampling;
        let samples = m.timed("sample", || sample_all(&paths, &s.mobility, s.samples_per_path, config.seed, workers))?;
        if samples.is_empty() {
            return Err(Error::EmptyInput("no mobility sample fell within its path".into()));
        }
        let out = out_dir.join(SAMPLES_FILE);
        write_samples(&out, &samples)?;
        m.output(&out)?;
        write_pdm_outputs(&samples, terrain_dir, out_dir, config, m)
    })
}

/// Re-bins an existing sample file into a PDM.
pub fn pdm(samples_file: &Path, terrain_dir: &Path, out_dir: &Path, config: &Config) -> Result<RunManifest> {
    run_stage("pdm", config, out_dir, |m| {
        m.input(samples_file)?;
        let samples = read_samples::<f64>(samples_file)?;
        if samples.is_empty() {
            return Err(Error::EmptyInput(format!("{} holds no samples", samples_file.display())));
        }
        write_pdm_outputs(&samples, terrain_dir, out_dir, config, m)
    })
}

/// Classifies found samples and compares the category mix to a reference.
pub fn evaluate(
    samples_file: &Path,
    terrain_dir: &Path,
    reference: Option<&Path>,
    out_dir: &Path,
    config: &Config,
    workers: usize,
) -> Result<RunManifest> {
    run_stage("evaluate", config, out_dir, |m| {
        m.input(samples_file)?;
        let reference = match reference {
            Some(p) => {
                m.input(p)?;
                CategoryHistogram::load(p)?
            }
            None => CategoryHistogram::hiker_reference(),
        };
        let (terrain, graph) = load_terrain(terrain_dir, m)?;
        let samples = read_samples::<f64>(samples_file)?;
        if samples.is_empty() {
            return Err(Error::EmptyInput(format!("{} holds no samples", samples_file.display())));
        }
        let classifier = FoundClassifier::new(&terrain, &graph);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        let cats: Vec<_> = m.timed("classify", || {
            Ok(pool.install(|| samples.par_iter().map(|s| classifier.classify(s.position).ok()).collect()))
        })?;
        let skipped = cats.iter().filter(|c: &&Option<_>| c.is_none()).count();
        if skipped > 0 {
            warn!("{skipped} samples lie outside the terrain and were not classified");
        }
        let found = CategoryHistogram::from_categories(cats.into_iter().flatten());
        if found.total() == 0 {
            return Err(Error::EmptyInput("no sample could be classified".into()));
        }
        let report = compare_to_reference(&found, &reference)?;
        let write = |name: &str, text: String, m: &mut RunManifest| -> Result<()> {
            let p = out_dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            m.output(&p)
        };
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Serde(e.to_string()))? + "\n";
        write(REPORT_JSON, json, m)?;
        write(REPORT_CSV, report.to_csv(), m)?;
        write(REPORT_TXT, report.summary(), m)
    })
}

/// Mobility-time fit and the competing normal fit, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityReport {
    pub lognormal: MobilityFit,
    pub normal_mean: f64,
    pub normal_sd: f64,
    pub normal_skl: f64,
}

/// Fits the log-normal mobility model to a `hours,count` histogram.
pub fn fit_mobility_stage(histogram: &Path, out_dir: &Path, config: &Config) -> Result<(RunManifest, MobilityReport)> {
    let mut report = None;
    let m = run_stage("fit-mobility", config, out_dir, |m| {
        m.input(histogram)?;
        let text = fs::read_to_string(histogram).map_err(|e| Error::io(histogram, e))?;
        let hist = parse_histogram_csv(&text)?;
        if hist.is_empty() {
            return Err(Error::EmptyInput(format!("{} holds no bins", histogram.display())));
        }
        let fit = m.timed("fit", || fit_mobility(&hist, config.sampling.mobility.speed))?;
        let (normal_mean, normal_sd, normal_skl) = fit_normal(&hist)?;
        let r = MobilityReport {
            lognormal: fit,
            normal_mean,
            normal_sd,
            normal_skl,
        };
        let p = out_dir.join(MOBILITY_FILE);
        fs::write(&p, toml::to_string(&r).map_err(|e| Error::Serde(e.to_string()))?).map_err(|e| Error::io(&p, e))?;
        m.output(&p)?;
        report = Some(r);
        Ok(())
    })?;
    Ok((m, report.expect("set on success")))
}
