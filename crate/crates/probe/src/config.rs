//! Experiment configuration: JSON schema, defaults and validation.

use std::path::PathBuf;

use bjj_probe::dynamics::{uniform_grid, Drive, ModelParams, Solver};
use bjj_probe::estimation::{QfiSettings, PARAM_KAPPA, PARAM_R};
use bjj_probe::hilbert::{
    atomic_fock, build_space, cavity_fock, coherent_state, product_state, CompositeSpace, DensityMatrix,
};
use bjj_probe::probe_mapping::{check_estimator_params, random_initial_state};
use bjj_probe::C64;
use serde::{Deserialize, Serialize};

use crate::ProbeError;

/// One experiment. Unknown keys are rejected at every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub params: ModelParams,
    pub space: SpaceSpec,
    pub initial: InitialSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub numerics: Numerics,
    pub task: Task,
    /// Departures from the figure captions, kept with the config.
    #[serde(default)]
    pub deviations: Vec<String>,
    /// Output directory. The `--out` flag takes precedence. Left out of the
    /// resolved config because it does not affect any payload.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub n_atoms: i64,
    pub cav_cutoff: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub atoms: AtomSpec,
    pub cavity: CavitySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomSpec {
    /// `|n1, N − n1⟩`.
    Fock { n1: usize },
    /// Uniform random amplitudes drawn from `(seed, stream)`.
    Random { stream: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CavitySpec {
    Vacuum,
    Fock { n: usize },
    /// Truncated and renormalised coherent state.
    Coherent { re: f64, im: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeSpec {
    Uniform { start: f64, stop: f64, points: usize },
    List(Vec<f64>),
}

impl TimeSpec {
    pub fn grid(&self) -> Vec<f64> {
        match self {
            TimeSpec::Uniform { start, stop, points } => uniform_grid(*start, *stop, *points),
            TimeSpec::List(v) => v.clone(),
        }
    }
}

/// Uniform scan `start..=stop` with `points` values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl ScanSpec {
    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.start, self.stop, self.points)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    #[default]
    Master,
    /// Quantum-jump ensemble of `n_traj` trajectories.
    Jumps { n_traj: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "Solver::exponential")]
    pub solver: Solver,
    #[serde(default)]
    pub qfi: QfiSettings,
    #[serde(default)]
    pub method: Method,
    /// With jumps, also integrate the master equation and report the trace
    /// distance at every grid time.
    #[serde(default)]
    pub compare_master: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            solver: Solver::exponential(),
            qfi: QfiSettings::default(),
            method: Method::Master,
            compare_master: false,
        }
    }
}

/// Window `[start, stop]` and search range for the estimator delay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSpec {
    pub start: f64,
    pub max: f64,
}

/// Square phase-space grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

/// Measurements whose classical Fisher information is reported next to
/// the QFI: photon counting, binned homodyne and the SLD eigenbasis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmSpec {
    /// Inner bin edges of the quadrature histogram.
    pub quadrature_edges: Vec<f64>,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    /// Standard observables along the time grid.
    Evolve {
        #[serde(default = "drive_off")]
        drive: Drive,
    },
    /// Wigner function of the reduced cavity state at every grid time.
    Wigner {
        #[serde(default = "drive_off")]
        drive: Drive,
        #[serde(default)]
        grid: Option<GridSpec>,
        /// Undo the pump-frame rotation before reducing.
        #[serde(default)]
        lab_frame: bool,
    },
    /// Exact vs cavity-estimated atomic moments under the driven dynamics.
    Track { xi_window: [f64; 2], lag: LagSpec },
    /// ξ for `n_states` random atomic states in equal seed batches.
    XiScan {
        n_states: usize,
        batches: usize,
        xi_window: [f64; 2],
    },
    /// Single-parameter QFI of each named parameter at every grid time.
    QfiSingle {
        parameters: Vec<String>,
        #[serde(default)]
        povm: Option<PovmSpec>,
    },
    /// Joint `(R, κ)` QFI matrix over a grid of both.
    QfiMulti { r_tun: ScanSpec, kappa: ScanSpec },
    /// `Λ` figures along a scan of `R` or `κ`.
    LambdaScan { scanned: String, grid: ScanSpec },
}

fn drive_off() -> Drive {
    Drive::Off
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Evolve { .. } => "evolve",
            Task::Wigner { .. } => "wigner",
            Task::Track { .. } => "track",
            Task::XiScan { .. } => "xi-scan",
            Task::QfiSingle { .. } => "qfi-single",
            Task::QfiMulti { .. } => "qfi-multi",
            Task::LambdaScan { .. } => "lambda-scan",
        }
    }
}

fn schema(msg: impl Into<String>) -> ProbeError {
    ProbeError::Schema(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ProbeError> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn composite_space(&self) -> Result<CompositeSpace, ProbeError> {
        build_space(self.space.n_atoms, self.space.cav_cutoff).map_err(|e| schema(format!("space: {e}")))
    }

    pub fn times(&self) -> Vec<f64> {
        self.time.grid()
    }

    /// Atomic amplitudes of the initial state.
    pub fn initial_atoms(&self) -> Result<Vec<C64>, ProbeError> {
        let n = self.composite_space()?.n_atoms();
        match &self.initial.atoms {
            AtomSpec::Fock { n1 } => atomic_fock(n, *n1).map_err(|e| schema(format!("initial.atoms: {e}"))),
            AtomSpec::Random { stream } => Ok(random_initial_state(n, self.seed, *stream)),
        }
    }

    pub fn initial_cavity(&self) -> Result<Vec<C64>, ProbeError> {
        let cut = self.composite_space()?.cav_cutoff();
        match &self.initial.cavity {
            CavitySpec::Vacuum => Ok(cavity_fock(cut, 0).expect("vacuum exists")),
            CavitySpec::Fock { n } => cavity_fock(cut, *n).map_err(|e| schema(format!("initial.cavity: {e}"))),
            CavitySpec::Coherent { re, im } => Ok(coherent_state(cut, C64::new(*re, *im)).0),
        }
    }

    pub fn initial_vector(&self) -> Result<Vec<C64>, ProbeError> {
        let space = self.composite_space()?;
        product_state(space, &self.initial_atoms()?, &self.initial_cavity()?).map_err(|e| schema(format!("initial: {e}")))
    }

    pub fn initial_state(&self) -> Result<DensityMatrix, ProbeError> {
        let space = self.composite_space()?;
        DensityMatrix::from_pure(space, &self.initial_vector()?).map_err(|e| schema(format!("initial: {e}")))
    }

    /// Schema-level checks that need more than the JSON shape. Nothing here
    /// integrates any dynamics.
    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.name.trim().is_empty() {
            return Err(schema("name: must not be empty"));
        }
        self.params.validate().map_err(|e| schema(format!("params: {e}")))?;
        let space = self.composite_space()?;
        self.initial_state()?;
        if let CavitySpec::Coherent { re, im } = self.initial.cavity {
            if !(re.is_finite() && im.is_finite()) {
                return Err(schema("initial.cavity.coherent: amplitude must be finite"));
            }
        }
        check_times(&self.times())?;
        let qfi = &self.numerics.qfi;
        if !(qfi.eps.is_finite() && qfi.eps >= 0.0) {
            return Err(schema("numerics.qfi.eps: must be finite and >= 0"));
        }
        if let Some(h) = qfi.step {
            if !(h.is_finite() && h > 0.0) {
                return Err(schema("numerics.qfi.step: must be finite and > 0"));
            }
        }
        let tol = &self.numerics.solver.tolerances;
        if !(tol.atol > 0.0 && tol.rtol > 0.0 && tol.h_min > 0.0) {
            return Err(schema("numerics.solver.tolerances: atol, rtol and h_min must be > 0"));
        }
        match self.numerics.method {
            Method::Jumps { n_traj } if n_traj == 0 => {
                return Err(schema("numerics.method.jumps.n_traj: must be >= 1"));
            }
            Method::Jumps { .. } if !matches!(self.task, Task::Evolve { .. }) => {
                return Err(schema("numerics.method: jumps are only available for the evolve task"));
            }
            _ => {}
        }
        let times = self.times();
        let (first, last) = (times[0], times[times.len() - 1]);
        match &self.task {
            Task::Evolve { .. } => {}
            Task::Wigner { grid, .. } => {
                if let Some(g) = grid {
                    if !(g.half_width.is_finite() && g.half_width > 0.0) || g.points < 2 {
                        return Err(schema("task.grid: need half_width > 0 and points >= 2"));
                    }
                }
            }
            Task::Track { xi_window, lag } => {
                check_window("task.xi_window", *xi_window, first, last)?;
                if !(lag.max > 0.0 && lag.start >= first && lag.start < last) {
                    return Err(schema("task.lag: need max > 0 and start inside the time grid"));
                }
                check_estimator(&self.params)?;
                if !matches!(self.time, TimeSpec::Uniform { .. }) {
                    return Err(schema("task: track needs a uniform time grid"));
                }
            }
            Task::XiScan {
                n_states,
                batches,
                xi_window,
            } => {
                if *n_states == 0 || *batches == 0 || n_states % batches != 0 {
                    return Err(schema("task: n_states must be a positive multiple of batches"));
                }
                check_window("task.xi_window", *xi_window, first, last)?;
                check_estimator(&self.params)?;
            }
            Task::QfiSingle { parameters, povm } => {
                if parameters.is_empty() {
                    return Err(schema("task.parameters: must not be empty"));
                }
                for p in parameters {
                    self.params.get(p).map_err(|e| schema(format!("task.parameters: {e}")))?;
                }
                if let Some(p) = povm {
                    if p.quadrature_edges.is_empty() || p.quadrature_edges.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(schema("task.povm.quadrature_edges: need increasing edges"));
                    }
                }
                check_qfi_times(&times)?;
            }
            Task::QfiMulti { r_tun, kappa } => {
                check_scan("task.r_tun", r_tun)?;
                check_scan("task.kappa", kappa)?;
                check_qfi_times(&times)?;
                check_beta(&self.params)?;
            }
            Task::LambdaScan { scanned, grid } => {
                if scanned != PARAM_R && scanned != PARAM_KAPPA {
                    return Err(schema(format!(
                        "task.scanned: must be `{PARAM_R}` or `{PARAM_KAPPA}`, got `{scanned}`"
                    )));
                }
                check_scan("task.grid", grid)?;
                check_qfi_times(&times)?;
                check_beta(&self.params)?;
            }
        }
        if space.total_dim() > 4096 {
            return Err(schema(format!("space: dimension {} exceeds 4096", space.total_dim())));
        }
        Ok(())
    }
}

fn check_times(t: &[f64]) -> Result<(), ProbeError> {
    if t.is_empty() {
        return Err(schema("time: grid must not be empty"));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(schema("time: values must be finite"));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(schema("time: values must be strictly increasing"));
    }
    Ok(())
}

fn check_qfi_times(t: &[f64]) -> Result<(), ProbeError> {
    if t[0] < 0.0 {
        return Err(schema("time: Fisher-information times must be >= 0"));
    }
    Ok(())
}

fn check_window(name: &str, w: [f64; 2], first: f64, last: f64) -> Result<(), ProbeError> {
    if !(w[0] < w[1] && w[0] >= first && w[1] <= last) {
        return Err(schema(format!("{name}: need start < stop inside the time grid [{first}, {last}]")));
    }
    Ok(())
}

fn check_scan(name: &str, s: &ScanSpec) -> Result<(), ProbeError> {
    if s.points == 0 || !s.start.is_finite() || !s.stop.is_finite() || (s.points > 1 && s.stop <= s.start) {
        return Err(schema(format!("{name}: need points >= 1 and start < stop")));
    }
    Ok(())
}

fn check_estimator(p: &ModelParams) -> Result<(), ProbeError> {
    check_estimator_params(p).map_err(|e| schema(format!("params: {e}")))
}

fn check_beta(p: &ModelParams) -> Result<(), ProbeError> {
    if p.beta == 0.0 {
        return Err(schema("params.beta: Lambda figures are in units of beta and need beta != 0"));
    }
    Ok(())
}
