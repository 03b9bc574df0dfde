//! WebAssembly bindings for the browser demo. Every entry point takes plain
//! numbers and returns a JSON string, so the page needs no bundler.

use mpsbench::analysis::{classify_dynamics, magnetization_curve, ClassifyOptions, ExtremumKind};
use mpsbench::models::dvr::exp_dvr;
use mpsbench::models::ising::{ising2d_terms, Boundary, IsingParams};
use mpsbench::models::spin_boson::{spin_boson_initial_state, spin_boson_terms, SpinBosonParams};
use mpsbench::oracle::ed_ground;
use mpsbench::{dmrg_ground_state, mpo_from_terms, tdvp_evolve, DmrgSchedule, MatrixProductState, Observable, TdvpConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

// Limits that keep a single call under a few seconds in a browser tab.
const MAX_LATTICE_SITES: usize = 36;
const MAX_EXACT_SITES: usize = 12;
const MAX_MODES: usize = 16;
const MAX_STEPS: usize = 400;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

pub fn ising_ground_json(nx: usize, ny: usize, h: f64, periodic: bool, max_bond: usize) -> Result<Value, String> {
    check(nx * ny <= MAX_LATTICE_SITES, format!("at most {MAX_LATTICE_SITES} sites in the demo"))?;
    check((2..=64).contains(&max_bond), "max_bond must be in 2..=64")?;
    let bc = if periodic { Boundary::Periodic } else { Boundary::Open };
    let m = ising2d_terms(&IsingParams::new(nx, ny, 1.0, h, bc)).map_err(|e| e.to_string())?;
    let mpo = mpo_from_terms(&m.terms, &m.bases).map_err(|e| e.to_string())?;
    let init = MatrixProductState::random(&m.bases, 4, 1).map_err(|e| e.to_string())?;
    let bonds: Vec<usize> = [max_bond / 4, max_bond / 2, max_bond].into_iter().map(|b| b.max(2)).collect();
    let r = dmrg_ground_state(&mpo, &init, &DmrgSchedule::ramp(&bonds, 2)).map_err(|e| e.to_string())?;
    let row = magnetization_curve(&[(h, &r)]).map_err(|e| e.to_string())?[0];
    let exact = if m.bases.len() <= MAX_EXACT_SITES {
        Some(ed_ground(&m.terms, &m.bases).map_err(|e| e.to_string())?.energy)
    } else {
        None
    };
    Ok(json!({
        "energy": r.energy,
        "abs_mz": row.abs_mz,
        "energy_per_sweep": r.energy_per_sweep,
        "discarded_weight": r.max_discarded_weight,
        "exact_energy": exact,
        "bond_dims": r.state.bond_dims(),
    }))
}

#[allow(clippy::too_many_arguments)]
pub fn spin_boson_json(
    alpha: f64,
    s: f64,
    n_modes: usize,
    d_b: usize,
    dt: f64,
    n_steps: usize,
    max_bond: usize,
) -> Result<Value, String> {
    check(n_modes <= MAX_MODES, format!("at most {MAX_MODES} bath modes in the demo"))?;
    check(n_steps <= MAX_STEPS, format!("at most {MAX_STEPS} steps in the demo"))?;
    let p = SpinBosonParams { delta: 1.0, eps: 0.0, alpha, s, omega_c: 10.0, n_modes, d_b };
    let m = spin_boson_terms(&p).map_err(|e| e.to_string())?;
    let mpo = mpo_from_terms(&m.terms, &m.bases).map_err(|e| e.to_string())?;
    let psi = spin_boson_initial_state(&p).map_err(|e| e.to_string())?;
    let cfg = TdvpConfig { dt, n_steps, max_bond, ..TdvpConfig::default() };
    let tr = tdvp_evolve(&mpo, &psi, &cfg, &[Observable::local("sz", 0, "sz")]).map_err(|e| e.to_string())?;
    let sz = tr.observable("sz").unwrap_or_default().to_vec();
    let label = classify_dynamics(&tr.times, &sz, &ClassifyOptions::default()).map_err(|e| e.to_string())?;
    let extrema: Vec<Value> = label
        .evidence
        .iter()
        .map(|x| json!({"time": x.time, "value": x.value, "peak": x.kind == ExtremumKind::Peak}))
        .collect();
    Ok(json!({
        "times": tr.times,
        "sz": sz,
        "norm": tr.norms,
        "energy": tr.energies,
        "phase": label.value.to_string(),
        "extrema": extrema,
    }))
}

/// Sorted kinetic eigenvalues next to the free-rotor levels `k^2 / 2I`.
pub fn dvr_spectrum_json(n_points: usize, inertia: f64) -> Result<Value, String> {
    check(n_points <= 101, "at most 101 grid points in the demo")?;
    let b = exp_dvr(n_points, inertia).map_err(|e| e.to_string())?;
    let mut got: Vec<f64> = b.kinetic.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    got.sort_by(f64::total_cmp);
    let kmax = (n_points as i64 - 1) / 2;
    let mut want: Vec<f64> = (-kmax..=kmax).map(|k| (k * k) as f64 / (2.0 * inertia)).collect();
    want.sort_by(f64::total_cmp);
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(json!({"eigenvalues": got, "rotor_levels": want, "max_error": err}))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ising_ground(nx: usize, ny: usize, h: f64, periodic: bool, max_bond: usize) -> Result<String, JsError> {
    to_js(ising_ground_json(nx, ny, h, periodic, max_bond))
}

#[wasm_bindgen]
pub fn spin_boson_dynamics(
    alpha: f64,
    s: f64,
    n_modes: usize,
    d_b: usize,
    dt: f64,
    n_steps: usize,
    max_bond: usize,
) -> Result<String, JsError> {
    to_js(spin_boson_json(alpha, s, n_modes, d_b, dt, n_steps, max_bond))
}

#[wasm_bindgen]
pub fn dvr_spectrum(n_points: usize, inertia: f64) -> Result<String, JsError> {
    to_js(dvr_spectrum_json(n_points, inertia))
}
