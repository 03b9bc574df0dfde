//! Parameter sweeps: cartesian grids of run configs executed by a bounded
//! worker pool, joined into one aggregate table.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::manifest::{config_hash, JobRecord, JobStatus, Manifest};
use crate::runner::{relative, run_job, Engine, JobOutcome};

pub const AGGREGATE_FILE: &str = "aggregate.csv";

pub struct SweepReport {
    pub aggregate: PathBuf,
    pub manifest: PathBuf,
    pub failed: Vec<usize>,
}

fn job_dir(out: &Path, id: usize) -> PathBuf {
    out.join("jobs").join(format!("job_{id:04}"))
}

fn value_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Execute every grid point with at most `max_parallel` jobs in flight.
/// Failed jobs stay in the aggregate with an empty summary.
pub fn cmd_sweep(sweep: &SweepConfig, out: &Path, seed: Option<u64>) -> Result<SweepReport> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let started = chrono::Utc::now();
    let grid = sweep.grid();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(sweep.max_parallel).build()?;
    let outcomes: Vec<JobOutcome> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(id, point)| {
                let dir = job_dir(out, id);
                match sweep.job_config(point) {
                    Ok(mut cfg) => {
                        if let Some(s) = seed {
                            cfg.seed = s;
                        }
                        run_job(&cfg, &dir, Engine::Mps).unwrap_or_else(|e| JobOutcome {
                            status: JobStatus::Failed(format!("{e:#}")),
                            result_file: None,
                            summary: Vec::new(),
                            outputs: Vec::new(),
                        })
                    }
                    Err(e) => JobOutcome {
                        status: JobStatus::Failed(e.to_string()),
                        result_file: None,
                        summary: Vec::new(),
                        outputs: Vec::new(),
                    },
                }
            })
            .collect()
    });

    // Summary columns in order of first appearance over the job order.
    let mut summary_cols: Vec<String> = Vec::new();
    for o in &outcomes {
        for (k, _) in &o.summary {
            if !summary_cols.contains(k) {
                summary_cols.push(k.clone());
            }
        }
    }
    let aggregate = out.join(AGGREGATE_FILE);
    let mut w = csv::Writer::from_path(&aggregate)?;
    let mut header: Vec<String> = sweep.axes.iter().map(|a| a.path.clone()).collect();
    header.extend(["job", "status", "result_file"].map(String::from));
    header.extend(summary_cols.iter().cloned());
    w.write_record(&header)?;
    for (id, (point, o)) in grid.iter().zip(&outcomes).enumerate() {
        let mut row: Vec<String> = sweep.axes.iter().zip(point).map(|(a, &i)| value_text(&a.values[i])).collect();
        row.push(id.to_string());
        row.push(match &o.status {
            JobStatus::Ok => "ok".into(),
            JobStatus::Failed(_) => "failed".into(),
        });
        row.push(o.result_file.as_ref().map(|p| relative(p, out)).unwrap_or_default());
        for c in &summary_cols {
            row.push(o.summary.iter().find(|(k, _)| k == c).map(|(_, v)| v.clone()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let manifest_path = out.join("manifest.json");
    let manifest = Manifest {
        config_hash: config_hash(sweep)?,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        jobs: outcomes
            .iter()
            .enumerate()
            .map(|(id, o)| JobRecord {
                id,
                status: o.status.clone(),
                outputs: o.outputs.iter().map(|p| relative(p, out)).collect(),
            })
            .collect(),
    };
    manifest.write(&manifest_path)?;
    let failed = outcomes.iter().enumerate().filter(|(_, o)| o.status != JobStatus::Ok).map(|(i, _)| i).collect();
    Ok(SweepReport { aggregate, manifest: manifest_path, failed })
}
