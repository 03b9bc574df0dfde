//! Run and sweep configuration schemas.
//!
//! Configs are JSON. Every struct rejects unknown keys, so a typo is a hard
//! error instead of a silently ignored setting.

use std::fmt;
use std::path::PathBuf;

use mpsbench::models::ising::{Boundary, IsingParams};
use mpsbench::models::retinal::{EnergyUnits, RetinalParams, BATH_MODES};
use mpsbench::models::spin_boson::SpinBosonParams;
use mpsbench::{DmrgSchedule, Scheme, SweepParams, TdvpConfig};
use serde::{Deserialize, Serialize};

/// A config problem tied to the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl SchemaError {
    fn new(field: &str, reason: impl Into<String>) -> Self {
        Self { field: field.to_string(), reason: reason.into() }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for SchemaError {}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tag: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Ising2d(IsingBlock),
    Spinboson(SpinBosonBlock),
    Retinal(RetinalBlock),
}

/// A single field value or a list scanned in one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValues {
    One(f64),
    Many(Vec<f64>),
}

impl FieldValues {
    pub fn values(&self) -> Vec<f64> {
        match self {
            FieldValues::One(h) => vec![*h],
            FieldValues::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    #[default]
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingBlock {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub j: f64,
    pub h: FieldValues,
    #[serde(default)]
    pub bc: BoundaryName,
    /// Pinning field on chain site 0; absent means `1e-3 * j`, zero disables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin: Option<f64>,
}

impl IsingBlock {
    pub fn params(&self, h: f64) -> IsingParams {
        let bc = match self.bc {
            BoundaryName::Open => Boundary::Open,
            BoundaryName::Periodic => Boundary::Periodic,
        };
        let mut p = IsingParams::new(self.nx, self.ny, self.j, h, bc);
        if let Some(pin) = self.pin {
            p.pin = (pin != 0.0).then_some(pin);
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinBosonBlock {
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default)]
    pub eps: f64,
    pub alpha: f64,
    pub s: f64,
    pub omega_c: f64,
    pub n_modes: usize,
    pub d_b: usize,
}

impl SpinBosonBlock {
    pub fn params(&self) -> SpinBosonParams {
        SpinBosonParams {
            delta: self.delta,
            eps: self.eps,
            alpha: self.alpha,
            s: self.s,
            omega_c: self.omega_c,
            n_modes: self.n_modes,
            d_b: self.d_b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RetinalVariant {
    /// All 23 bath modes.
    #[default]
    Full,
    /// Only the first `n_bath` bath modes.
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnitName {
    #[default]
    Ev,
    Hartree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetinalBlock {
    #[serde(default)]
    pub variant: RetinalVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bath: Option<usize>,
    #[serde(default)]
    pub units: UnitName,
    /// Free-form provenance note, e.g. marking placeholder values.
    #[serde(default)]
    pub label: String,
    pub inertia: f64,
    pub w0: f64,
    pub w1: f64,
    pub e1: f64,
    pub omega_c: f64,
    pub kappa_c: f64,
    pub lambda: f64,
    /// `[omega_j, kappa_j]` pairs.
    pub bath: Vec<[f64; 2]>,
    pub n_theta: usize,
    pub d_modes: usize,
}

impl RetinalBlock {
    pub fn params(&self) -> RetinalParams {
        let p = RetinalParams {
            inertia: self.inertia,
            w0: self.w0,
            w1: self.w1,
            e1: self.e1,
            omega_c: self.omega_c,
            kappa_c: self.kappa_c,
            lambda: self.lambda,
            bath: self.bath.iter().map(|b| (b[0], b[1])).collect(),
            n_theta: self.n_theta,
            d_modes: self.d_modes,
            input_units: match self.units {
                UnitName::Ev => EnergyUnits::Ev,
                UnitName::Hartree => EnergyUnits::Hartree,
            },
        };
        match (self.variant, self.n_bath) {
            (RetinalVariant::Reduced, Some(n)) => p.truncated_bath(n),
            _ => p,
        }
    }

    /// Block carrying the built-in placeholder parameters.
    pub fn placeholder() -> Self {
        let p = RetinalParams::placeholder();
        Self {
            variant: RetinalVariant::Full,
            n_bath: None,
            units: UnitName::Ev,
            label: "placeholder values for smoke tests, not reference data".into(),
            inertia: p.inertia,
            w0: p.w0,
            w1: p.w1,
            e1: p.e1,
            omega_c: p.omega_c,
            kappa_c: p.kappa_c,
            lambda: p.lambda,
            bath: p.bath.iter().map(|&(w, k)| [w, k]).collect(),
            n_theta: p.n_theta,
            d_modes: p.d_modes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SolverConfig {
    Dmrg(DmrgBlock),
    Tdvp(TdvpBlock),
}

fn default_cutoff() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub max_bond: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub noise: f64,
}

fn default_energy_tol() -> f64 {
    1e-8
}
fn default_local_iters() -> usize {
    40
}
fn default_local_tol() -> f64 {
    1e-9
}
fn default_init_bond() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmrgBlock {
    pub sweeps: Vec<SweepBlock>,
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
    #[serde(default = "default_local_iters")]
    pub max_local_iters: usize,
    #[serde(default = "default_local_tol")]
    pub local_tol: f64,
    /// Bond dimension of the seeded random starting state.
    #[serde(default = "default_init_bond")]
    pub init_bond: usize,
}

impl DmrgBlock {
    pub fn schedule(&self, seed: u64) -> DmrgSchedule {
        DmrgSchedule {
            sweeps: self
                .sweeps
                .iter()
                .map(|s| SweepParams { max_bond: s.max_bond, cutoff: s.cutoff, noise: s.noise })
                .collect(),
            energy_tol: self.energy_tol,
            max_local_iters: self.max_local_iters,
            local_tol: self.local_tol,
            noise_seed: seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    OneSite,
    TwoSite,
    #[default]
    Hybrid,
}

fn default_switch() -> usize {
    10
}
fn default_krylov_dim() -> usize {
    32
}
fn default_krylov_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdvpBlock {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default = "default_switch")]
    pub switch_step: usize,
    pub max_bond: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
}

impl TdvpBlock {
    pub fn config(&self) -> TdvpConfig {
        TdvpConfig {
            dt: self.dt,
            n_steps: self.n_steps,
            scheme: match self.scheme {
                SchemeName::OneSite => Scheme::OneSite,
                SchemeName::TwoSite => Scheme::TwoSite,
                SchemeName::Hybrid => Scheme::Hybrid { switch_step: self.switch_step },
            },
            max_bond: self.max_bond,
            cutoff: self.cutoff,
            krylov_dim: self.krylov_dim,
            krylov_tol: self.krylov_tol,
        }
    }
}

fn check(ok: bool, field: &str, reason: &str) -> Result<(), SchemaError> {
    if ok {
        Ok(())
    } else {
        Err(SchemaError::new(field, reason))
    }
}

fn positive(x: f64, field: &str) -> Result<(), SchemaError> {
    check(x.is_finite() && x > 0.0, field, "must be a positive finite number")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| SchemaError::new("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self, SchemaError> {
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| SchemaError::new("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level checks beyond what the types enforce.
    pub fn validate(&self) -> Result<(), SchemaError> {
        match &self.model {
            ModelConfig::Ising2d(b) => {
                check(b.nx >= 1 && b.ny >= 1 && b.nx * b.ny >= 2, "model.ising2d.nx", "lattice needs at least two sites")?;
                if b.bc == BoundaryName::Periodic {
                    check(b.nx >= 2 && b.ny >= 2, "model.ising2d.bc", "periodic lattices need nx, ny >= 2")?;
                }
                positive(b.j, "model.ising2d.j")?;
                let hs = b.h.values();
                check(!hs.is_empty(), "model.ising2d.h", "needs at least one field value")?;
                check(hs.iter().all(|h| h.is_finite()), "model.ising2d.h", "field values must be finite")?;
                if let Some(pin) = b.pin {
                    check(pin.is_finite(), "model.ising2d.pin", "must be finite")?;
                }
                if matches!(self.solver, SolverConfig::Tdvp(_)) {
                    check(hs.len() == 1, "model.ising2d.h", "time evolution takes a single field value")?;
                }
                for &h in &hs {
                    b.params(h).validate().map_err(|e| SchemaError::new("model.ising2d", e.to_string()))?;
                }
            }
            ModelConfig::Spinboson(b) => {
                positive(b.delta, "model.spinboson.delta")?;
                check(b.eps.is_finite(), "model.spinboson.eps", "must be finite")?;
                check(b.alpha.is_finite() && b.alpha >= 0.0, "model.spinboson.alpha", "must be >= 0")?;
                positive(b.s, "model.spinboson.s")?;
                positive(b.omega_c, "model.spinboson.omega_c")?;
                check(b.n_modes >= 1, "model.spinboson.n_modes", "must be >= 1")?;
                check(b.d_b >= 2, "model.spinboson.d_b", "must be >= 2")?;
            }
            ModelConfig::Retinal(b) => {
                check(b.n_theta % 2 == 1 && b.n_theta >= 3, "model.retinal.n_theta", "must be odd and >= 3")?;
                check(b.d_modes >= 2, "model.retinal.d_modes", "must be >= 2")?;
                positive(b.inertia, "model.retinal.inertia")?;
                positive(b.omega_c, "model.retinal.omega_c")?;
                for (k, v) in [("w0", b.w0), ("w1", b.w1), ("e1", b.e1), ("kappa_c", b.kappa_c), ("lambda", b.lambda)] {
                    check(v.is_finite(), &format!("model.retinal.{k}"), "must be finite")?;
                }
                check(
                    b.bath.iter().all(|m| m[0].is_finite() && m[0] > 0.0 && m[1].is_finite()),
                    "model.retinal.bath",
                    "modes need positive finite frequencies and finite couplings",
                )?;
                match b.variant {
                    RetinalVariant::Full => {
                        check(b.n_bath.is_none(), "model.retinal.n_bath", "only allowed with variant `reduced`")?;
                        check(
                            b.bath.len() == BATH_MODES,
                            "model.retinal.bath",
                            &format!("full model needs exactly {BATH_MODES} modes, got {}", b.bath.len()),
                        )?;
                    }
                    RetinalVariant::Reduced => {
                        let n = b.n_bath.unwrap_or(b.bath.len());
                        check(n <= b.bath.len(), "model.retinal.n_bath", "exceeds the number of listed modes")?;
                    }
                }
            }
        }
        match &self.solver {
            SolverConfig::Dmrg(d) => {
                check(!d.sweeps.is_empty(), "solver.dmrg.sweeps", "needs at least one entry")?;
                check(d.sweeps.iter().all(|s| s.max_bond >= 1), "solver.dmrg.sweeps.max_bond", "must be >= 1")?;
                check(
                    d.sweeps.iter().all(|s| s.cutoff >= 0.0 && s.noise >= 0.0),
                    "solver.dmrg.sweeps",
                    "cutoff and noise must be >= 0",
                )?;
                positive(d.energy_tol, "solver.dmrg.energy_tol")?;
                positive(d.local_tol, "solver.dmrg.local_tol")?;
                check(d.max_local_iters >= 1, "solver.dmrg.max_local_iters", "must be >= 1")?;
                check(d.init_bond >= 1, "solver.dmrg.init_bond", "must be >= 1")?;
            }
            SolverConfig::Tdvp(t) => {
                positive(t.dt, "solver.tdvp.dt")?;
                check(t.max_bond >= 1, "solver.tdvp.max_bond", "must be >= 1")?;
                check(t.cutoff >= 0.0, "solver.tdvp.cutoff", "must be >= 0")?;
                check(t.krylov_dim >= 2, "solver.tdvp.krylov_dim", "must be >= 2")?;
                positive(t.krylov_tol, "solver.tdvp.krylov_tol")?;
            }
        }
        Ok(())
    }

    pub fn model_name(&self) -> &'static str {
        match self.model {
            ModelConfig::Ising2d(_) => "ising2d",
            ModelConfig::Spinboson(_) => "spinboson",
            ModelConfig::Retinal(_) => "retinal",
        }
    }
}

fn default_parallel() -> usize {
    32
}

/// One swept parameter: a dotted path into the run config and its values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: serde_json::Value,
    pub axes: Vec<Axis>,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| SchemaError::new("<sweep>", e.to_string()))?;
        check(cfg.max_parallel >= 1, "max_parallel", "must be >= 1")?;
        for a in &cfg.axes {
            check(!a.values.is_empty(), &format!("axes.{}", a.path), "needs at least one value")?;
        }
        // the base must be valid on its own
        RunConfig::from_value(cfg.base.clone())?;
        Ok(cfg)
    }

    pub fn grid_size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis-value index tuples with the first axis varying slowest.
    pub fn grid(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for a in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..a.values.len()).map(move |i| {
                        let mut p = prefix.clone();
                        p.push(i);
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Base config with the overrides of one grid point applied.
    pub fn job_config(&self, point: &[usize]) -> Result<RunConfig, SchemaError> {
        let mut v = self.base.clone();
        for (a, &i) in self.axes.iter().zip(point) {
            set_path(&mut v, &a.path, a.values[i].clone())?;
        }
        RunConfig::from_value(v)
    }
}

/// Set a dotted path; the parent object must exist.
pub fn set_path(root: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<(), SchemaError> {
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().ok_or_else(|| SchemaError::new(path, "empty path"))?;
    let mut cur = root;
    for k in parents {
        cur = cur.get_mut(*k).ok_or_else(|| SchemaError::new(path, format!("no `{k}` block in the base config")))?;
    }
    let obj = cur.as_object_mut().ok_or_else(|| SchemaError::new(path, "parent is not an object"))?;
    obj.insert(last.to_string(), value);
    Ok(())
}
