//! The shipped example configs parse, validate and (for the cheap ones) run.

use std::fs;
use std::path::{Path, PathBuf};

use mpsbench_cli::config::{RunConfig, SweepConfig};
use mpsbench_cli::manifest::JobStatus;
use mpsbench_cli::runner::{cmd_run, Engine, GROUND_STATE_FILE};

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn every_example_config_is_valid() {
    let mut seen = 0;
    for entry in fs::read_dir(config_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name.starts_with("sweep_") {
            SweepConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        } else {
            RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        seen += 1;
    }
    assert!(seen >= 6);
}

fn ground_energy(dir: &Path) -> f64 {
    let mut r = csv::Reader::from_path(dir.join(GROUND_STATE_FILE)).unwrap();
    let h = r.headers().unwrap().clone();
    let col = h.iter().position(|c| c == "energy").unwrap();
    let row = r.records().next().unwrap().unwrap();
    row[col].parse().unwrap()
}

#[test]
fn two_site_ising_example_matches_closed_form() {
    let cfg = RunConfig::from_json(&fs::read_to_string(config_dir().join("ising_two_site.json")).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (engine, sub) in [(Engine::Mps, "mps"), (Engine::Oracle, "oracle")] {
        let out = dir.path().join(sub);
        let o = cmd_run(&cfg, &out, engine).unwrap();
        assert_eq!(o.status, JobStatus::Ok);
        let e = ground_energy(&out);
        assert!((e + 5f64.sqrt()).abs() < 1e-10, "{sub}: {e}");
        assert!(out.join("manifest.json").is_file());
        assert!(out.join("effective_config.json").is_file());
    }
}
