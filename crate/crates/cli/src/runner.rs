//! Single-job execution: build the model, run the solver or the exact
//! oracle, and write CSV results plus the job manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mpsbench::analysis::{classify_dynamics, ClassifyOptions};
use mpsbench::models::ising::ising2d_terms;
use mpsbench::models::retinal::{population_observables, retinal_initial_state, retinal_terms, retinal_terms_reduced};
use mpsbench::models::spin_boson::{spin_boson_initial_state, spin_boson_terms};
use mpsbench::oracle::{ed_ground, exact_propagate, DenseHamiltonian, DenseObservable};
use mpsbench::{
    dmrg_ground_state, expand_bond, mpo_from_terms, tdvp_evolve, MatrixProductState, Observable, ProductTerm, Scheme,
    SiteBasis, Trajectory, C64,
};

use crate::config::{ModelConfig, RetinalVariant, RunConfig, SolverConfig};
use crate::manifest::{config_hash, JobRecord, JobStatus, Manifest};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const GROUND_STATE_FILE: &str = "ground_state.csv";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Term lists for one Hamiltonian and its named observables.
pub struct Problem {
    pub terms: Vec<ProductTerm>,
    pub bases: Vec<SiteBasis>,
    pub observables: Vec<(String, Vec<ProductTerm>)>,
}

fn local(name: &str, site: usize, op: &str) -> Result<(String, Vec<ProductTerm>)> {
    Ok((name.to_string(), vec![ProductTerm::real(1.0, &[(site, op)])?]))
}

/// Hamiltonian at field `h` (Ising only; ignored otherwise).
pub fn build_problem(model: &ModelConfig, h: f64) -> Result<Problem> {
    Ok(match model {
        ModelConfig::Ising2d(b) => {
            let m = ising2d_terms(&b.params(h))?;
            let n = m.bases.len();
            let mz = (0..n).map(|i| ProductTerm::real(1.0 / n as f64, &[(i, "sz")])).collect::<mpsbench::Result<_>>()?;
            Problem { terms: m.terms, bases: m.bases, observables: vec![("mz".into(), mz)] }
        }
        ModelConfig::Spinboson(b) => {
            let m = spin_boson_terms(&b.params())?;
            Problem { terms: m.terms, bases: m.bases, observables: vec![local("sz", 0, "sz")?] }
        }
        ModelConfig::Retinal(b) => {
            let p = b.params();
            let m = match b.variant {
                RetinalVariant::Full => retinal_terms(&p)?,
                RetinalVariant::Reduced => retinal_terms_reduced(&p)?,
            };
            let observables =
                population_observables().into_iter().map(|(n, s, op)| local(n, s, op)).collect::<Result<_>>()?;
            Problem { terms: m.terms, bases: m.bases, observables }
        }
    })
}

/// Starting state for time evolution: all spins up for Ising, spin up with
/// the bath in vacuum for spin-boson, the Franck-Condon state for retinal.
pub fn initial_state(cfg: &RunConfig, problem: &Problem) -> Result<MatrixProductState> {
    Ok(match &cfg.model {
        ModelConfig::Ising2d(_) => {
            let up = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
            MatrixProductState::product(&problem.bases, &vec![up; problem.bases.len()])?
        }
        ModelConfig::Spinboson(b) => spin_boson_initial_state(&b.params())?,
        ModelConfig::Retinal(b) => retinal_initial_state(&b.params(), cfg.seed)?,
    })
}

fn tdvp_observables(problem: &Problem) -> Result<Vec<Observable>> {
    problem
        .observables
        .iter()
        .map(|(name, terms)| {
            let single = terms.len() == 1 && terms[0].factors.len() == 1 && terms[0].coefficient == C64::new(1.0, 0.0);
            Ok(if single {
                let (site, op) = &terms[0].factors[0];
                Observable::local(name, *site, op)
            } else {
                Observable::Mpo { name: name.clone(), mpo: mpo_from_terms(terms, &problem.bases)? }
            })
        })
        .collect()
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["time".to_string()];
    header.extend(traj.names.iter().cloned());
    header.extend(["norm", "energy", "max_bond"].map(String::from));
    w.write_record(&header)?;
    for k in 0..traj.len() {
        let mut row = vec![num(traj.times[k])];
        row.extend(traj.values.iter().map(|v| num(v[k])));
        row.push(num(traj.norms[k]));
        row.push(num(traj.energies[k]));
        row.push(traj.bond_profile[k].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-job scalars joined into sweep aggregates.
pub type Summary = Vec<(String, String)>;

fn trajectory_summary(traj: &Trajectory) -> Result<Summary> {
    let mut s = Summary::new();
    for (name, v) in traj.names.iter().zip(&traj.values) {
        s.push((format!("final_{name}"), num(*v.last().unwrap_or(&f64::NAN))));
    }
    let norm_drift = traj.norms.iter().map(|n| (n - traj.norms[0]).abs()).fold(0.0, f64::max);
    let e0 = traj.energies[0];
    let energy_drift = traj.energies.iter().map(|e| (e - e0).abs() / e0.abs().max(1e-300)).fold(0.0, f64::max);
    s.push(("norm_drift".into(), num(norm_drift)));
    s.push(("energy_drift".into(), num(energy_drift)));
    s.push(("max_bond".into(), traj.bond_profile.iter().max().unwrap_or(&0).to_string()));
    if let Some(sz) = traj.observable("sz") {
        let label = classify_dynamics(&traj.times, sz, &ClassifyOptions::default())?;
        s.push(("phase".into(), label.value.to_string()));
    }
    Ok(s)
}

struct GroundRow {
    h: Option<f64>,
    abs_mz: Option<f64>,
    energy: f64,
    discarded: f64,
}

fn write_ground(path: &Path, rows: &[GroundRow]) -> Result<Summary> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let ising = rows.iter().all(|r| r.h.is_some());
    if ising {
        w.write_record(["h", "abs_mz", "energy", "discarded_weight"])?;
    } else {
        w.write_record(["energy", "discarded_weight"])?;
    }
    for r in rows {
        let mut row = Vec::new();
        if ising {
            row.push(num(r.h.unwrap()));
            row.push(num(r.abs_mz.unwrap_or(f64::NAN)));
        }
        row.push(num(r.energy));
        row.push(num(r.discarded));
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut s = Summary::new();
    if let [r] = rows {
        s.push(("energy".into(), num(r.energy)));
        if let Some(m) = r.abs_mz {
            s.push(("abs_mz".into(), num(m)));
        }
        s.push(("discarded_weight".into(), num(r.discarded)));
    } else {
        s.push(("n_points".into(), rows.len().to_string()));
    }
    Ok(s)
}

fn field_values(cfg: &RunConfig) -> Vec<Option<f64>> {
    match &cfg.model {
        ModelConfig::Ising2d(b) => b.h.values().into_iter().map(Some).collect(),
        _ => vec![None],
    }
}

/// Outcome of the numerical part of a job.
pub struct Computed {
    pub result_file: PathBuf,
    pub summary: Summary,
}

fn solve(cfg: &RunConfig, out: &Path) -> Result<Computed> {
    match &cfg.solver {
        SolverConfig::Dmrg(d) => {
            let schedule = d.schedule(cfg.seed);
            let mut rows = Vec::new();
            for h in field_values(cfg) {
                let problem = build_problem(&cfg.model, h.unwrap_or(0.0))?;
                let mpo = mpo_from_terms(&problem.terms, &problem.bases)?;
                let init = MatrixProductState::random(&problem.bases, d.init_bond, cfg.seed)?;
                let r = dmrg_ground_state(&mpo, &init, &schedule)?;
                let abs_mz = if h.is_some() {
                    let mz = r.state.local_expectations("sz")?;
                    Some(mz.iter().sum::<f64>().abs() / mz.len() as f64)
                } else {
                    None
                };
                rows.push(GroundRow { h, abs_mz, energy: r.energy, discarded: r.max_discarded_weight });
            }
            let path = out.join(GROUND_STATE_FILE);
            let summary = write_ground(&path, &rows)?;
            Ok(Computed { result_file: path, summary })
        }
        SolverConfig::Tdvp(t) => {
            let problem = build_problem(&cfg.model, field_values(cfg)[0].unwrap_or(0.0))?;
            let mpo = mpo_from_terms(&problem.terms, &problem.bases)?;
            let tc = t.config();
            let mut psi = initial_state(cfg, &problem)?;
            if tc.scheme == Scheme::OneSite {
                psi = expand_bond(&psi, &mpo, tc.max_bond)?;
            }
            let traj = tdvp_evolve(&mpo, &psi, &tc, &tdvp_observables(&problem)?)?;
            let path = out.join(TRAJECTORY_FILE);
            write_trajectory(&path, &traj)?;
            Ok(Computed { result_file: path, summary: trajectory_summary(&traj)? })
        }
    }
}

fn oracle_solve(cfg: &RunConfig, out: &Path) -> Result<Computed> {
    match &cfg.solver {
        SolverConfig::Dmrg(_) => {
            let mut rows = Vec::new();
            for h in field_values(cfg) {
                let problem = build_problem(&cfg.model, h.unwrap_or(0.0))?;
                let g = ed_ground(&problem.terms, &problem.bases)?;
                let abs_mz = match h {
                    Some(_) => {
                        let mz = DenseHamiltonian::new(&problem.observables[0].1, &problem.bases)?;
                        Some(mz.expectation(&g.vector).re.abs())
                    }
                    None => None,
                };
                rows.push(GroundRow { h, abs_mz, energy: g.energy, discarded: 0.0 });
            }
            let path = out.join(GROUND_STATE_FILE);
            let summary = write_ground(&path, &rows)?;
            Ok(Computed { result_file: path, summary })
        }
        SolverConfig::Tdvp(t) => {
            let problem = build_problem(&cfg.model, field_values(cfg)[0].unwrap_or(0.0))?;
            let psi0 = initial_state(cfg, &problem)?;
            let mut v = psi0.to_dense();
            let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            let obs: Vec<DenseObservable> = problem
                .observables
                .iter()
                .map(|(name, terms)| DenseObservable { name: name.clone(), terms: terms.clone() })
                .collect();
            let traj = exact_propagate(&problem.terms, &problem.bases, &v, t.dt, t.n_steps, &obs)?;
            let path = out.join(TRAJECTORY_FILE);
            write_trajectory(&path, &traj)?;
            Ok(Computed { result_file: path, summary: trajectory_summary(&traj)? })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Mps,
    Oracle,
}

/// Everything a sweep needs to know about a finished job.
#[derive(Clone, Debug)]
pub struct JobOutcome {
    pub status: JobStatus,
    pub result_file: Option<PathBuf>,
    pub summary: Summary,
    pub outputs: Vec<PathBuf>,
}

/// Run one job into `out`, always writing the effective config and the
/// manifest. Solver errors mark the job failed instead of aborting.
pub fn run_job(cfg: &RunConfig, out: &Path, engine: Engine) -> Result<JobOutcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let started = chrono::Utc::now();
    let cfg_path = out.join(EFFECTIVE_CONFIG_FILE);
    fs::write(&cfg_path, serde_json::to_string_pretty(cfg)? + "\n")?;
    let computed = match engine {
        Engine::Mps => solve(cfg, out),
        Engine::Oracle => oracle_solve(cfg, out),
    };
    let mut outputs = vec![cfg_path];
    let (status, result_file, summary) = match computed {
        Ok(c) => {
            outputs.push(c.result_file.clone());
            (JobStatus::Ok, Some(c.result_file), c.summary)
        }
        Err(e) => (JobStatus::Failed(format!("{e:#}")), None, Summary::new()),
    };
    let manifest_path = out.join(MANIFEST_FILE);
    outputs.push(manifest_path.clone());
    let manifest = Manifest {
        config_hash: config_hash(cfg)?,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        jobs: vec![JobRecord {
            id: 0,
            status: status.clone(),
            outputs: outputs.iter().map(|p| relative(p, out)).collect(),
        }],
    };
    manifest.write(&manifest_path)?;
    Ok(JobOutcome { status, result_file, summary, outputs })
}

pub fn relative(p: &Path, base: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

/// `run`/`oracle` entry point: returns an error when the job failed.
pub fn cmd_run(cfg: &RunConfig, out: &Path, engine: Engine) -> Result<JobOutcome> {
    let outcome = run_job(cfg, out, engine)?;
    if let JobStatus::Failed(reason) = &outcome.status {
        bail!("job failed: {reason}");
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_ising_csv() {
        let cfg = RunConfig::from_json(
            r#"{"model": {"ising2d": {"nx": 2, "ny": 1, "h": 1.0, "pin": 0}},
                "solver": {"dmrg": {"sweeps": [{"max_bond": 4}, {"max_bond": 4}]}}}"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let o = cmd_run(&cfg, dir.path(), Engine::Mps).unwrap();
        let text = fs::read_to_string(o.result_file.unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("h,abs_mz,energy,discarded_weight"));
        let e: f64 = lines.next().unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert!((e + 5f64.sqrt()).abs() < 1e-12);
        assert!(dir.path().join(MANIFEST_FILE).exists());
        assert!(dir.path().join(EFFECTIVE_CONFIG_FILE).exists());
    }

    #[test]
    fn failed_solver_is_recorded() {
        // Krylov space of one vector cannot propagate anything.
        let cfg = RunConfig::from_json(
            r#"{"model": {"spinboson": {"alpha": 0.1, "s": 0.5, "omega_c": 10, "n_modes": 2, "d_b": 3}},
                "solver": {"tdvp": {"dt": 0.05, "n_steps": 2, "max_bond": 4, "krylov_dim": 2, "krylov_tol": 1e-300}}}"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let o = run_job(&cfg, dir.path(), Engine::Mps).unwrap();
        assert!(matches!(o.status, JobStatus::Failed(_)));
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert!(m["jobs"][0]["status"]["failed"].is_string());
    }
}
