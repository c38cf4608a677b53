//! Regenerates `fixtures/` from the synthetic island generator and records
//! checksums in `fixtures/SHA256SUMS`.
//!
//! cargo run --release -p lostpath-core --example make_fixtures

use std::fs;
use std::path::{Path, PathBuf};

use lostpath::config::Config;
use lostpath::gis::{save_path_network, save_raster};
use lostpath::metrics::CategoryHistogram;
use lostpath::pipeline::{self, sha256_file, PlsInput, REPORT_JSON};
use lostpath::sampling::DEFAULT_SPEED_KMH;
use lostpath::synth;

fn main() -> lostpath::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let island = root.join("island");
    synth::write_island(&island)?;
    save_raster(&synth::pls_heatmap(), root.join("pls_heatmap.asc"))?;
    save_path_network(&synth::junction_network()?, root.join("junction_network.geojson"))?;
    synth::write_histogram_csv(
        &root.join("mobility_histogram_approx.csv"),
        &synth::approximate_mobility_histogram(DEFAULT_SPEED_KMH),
        "approximate stand-in for published mobility-time bars (synthetic, not digitized)",
    )?;
    let reference = root.join("hiker_reference.csv");
    fs::write(&reference, CategoryHistogram::hiker_reference().to_csv()).expect("writable fixtures dir");

    // golden end-to-end run
    let config = Config::load(root.join("config.toml"))?;
    let work = tempdir();
    let up = work.join("upsample");
    pipeline::upsample_pls(&root.join("pls_heatmap.asc"), &up, &config)?;
    let sim = work.join("simulate");
    pipeline::simulate(&island, &PlsInput::Surface(up.join(pipeline::POSTERIOR_FILE)), &sim, &config, 8)?;
    let smp = work.join("sample");
    pipeline::sample(&sim.join(pipeline::PATHS_FILE), &island, &smp, &config, 8)?;
    let ev = work.join("evaluate");
    pipeline::evaluate(&smp.join(pipeline::SAMPLES_FILE), &island, Some(&reference), &ev, &config, 8)?;
    fs::create_dir_all(root.join("golden")).expect("writable fixtures dir");
    fs::copy(ev.join(REPORT_JSON), root.join("golden").join(REPORT_JSON)).expect("report was written");
    fs::remove_dir_all(&work).ok();

    write_sums(&root)
}


fn tempdir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("lostpath-fixtures-{}", std::process::id()));
    fs::create_dir_all(&d).expect("temp dir");
    d
}

fn collect(dir: &Path, root: &Path, out: &mut Vec<String>) {
    let mut entries: Vec<_> = fs::read_dir(dir).expect("readable").flatten().map(|e| e.path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, root, out);
        } else if p.file_name().is_some_and(|n| n != "SHA256SUMS") {
            out.push(p.strip_prefix(root).expect("under root").display().to_string());
        }
    }
}

fn write_sums(root: &Path) -> lostpath::Result<()> {
    let mut files = Vec::new();
    collect(root, root, &mut files);
    let mut s = String::new();
    for f in files {
        s.push_str(&format!("{}  {f}\n", sha256_file(root.join(&f))?));
    }
    fs::write(root.join("SHA256SUMS"), s).expect("writable fixtures dir");
    Ok(())
}
