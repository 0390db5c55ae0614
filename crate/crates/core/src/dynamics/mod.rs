//! Hamiltonians, the Lindblad generator and time evolution.
//!
//! Two generators are supported:
//!
//! * [`Drive::Off`]: cavity frame, no pump,
//!   `dρ/dt = -i[H_A + β n̂₁ â†â, ρ] + γ(1+N_c) D[â]ρ + γ N_c D[â†]ρ`.
//! * [`Drive::On`]: pump frame,
//!   `dρ/dt = -i[H_A + H_I + Δ_C â†â + η(e^{iφ}â† + e^{-iφ}â), ρ] + (same dissipators)`.
//!
//! with `D[L]ρ = LρL† - ½{L†L, ρ}`.

pub mod jump;
pub mod ode;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// inherent float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    cavity_annihilation, number_op_well1, onsite_interaction_op, photon_number_op, tunneling_op,
    CompositeSpace, DensityMatrix, Operator, Physicality, PhysicalityTolerances,
};
use crate::linalg::{c, CMatrix, SparseMatrix, C64};

pub use jump::{quantum_jump_evolve, JumpEnsemble};
pub use ode::{IntegratorStats, Tolerances};

/// Time stepper used by [`evolve_master`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Adaptive Dormand–Prince 5(4) with the configured tolerances.
    #[default]
    Adaptive,
    /// Taylor series of the exact propagator; ignores the tolerances and is
    /// accurate to rounding. Preferred for long runs of nearly pure states.
    Exponential,
}

/// Physical rates, all in units of one reference rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Single-atom well energy `E₀` (figure captions call it `ω_a`).
    #[serde(alias = "omega_a")]
    pub e0: f64,
    /// On-site interaction `κ`.
    pub kappa: f64,
    /// Tunnelling rate `R`.
    pub r_tun: f64,
    /// Dispersive coupling `β`.
    pub beta: f64,
    /// Cavity decay rate `γ`.
    pub gamma: f64,
    /// Pump strength `η`.
    pub eta: f64,
    /// Pump–cavity detuning `Δ_C = ω_C − ω_p`.
    pub delta_c: f64,
    /// Cavity frequency, only used for frame bookkeeping.
    pub omega_c: f64,
    /// Pump frequency; enters the lab-frame phase of the reduced cavity state.
    pub omega_p: f64,
    /// Thermal photon number `N_c`.
    #[serde(default)]
    pub n_thermal: f64,
    /// Phase `φ` of the pump term `η(e^{iφ}â† + e^{-iφ}â)`.
    #[serde(default)]
    pub pump_phase: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            e0: 0.0,
            kappa: 0.0,
            r_tun: 0.0,
            beta: 0.0,
            gamma: 0.0,
            eta: 0.0,
            delta_c: 0.0,
            omega_c: 0.0,
            omega_p: 0.0,
            n_thermal: 0.0,
            pump_phase: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 11] = [
            ("e0", self.e0),
            ("kappa", self.kappa),
            ("r_tun", self.r_tun),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("delta_c", self.delta_c),
            ("omega_c", self.omega_c),
            ("omega_p", self.omega_p),
            ("n_thermal", self.n_thermal),
            ("pump_phase", self.pump_phase),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.gamma < 0.0 {
            return Err(Error::param(
                "gamma",
                format!("must be >= 0, got {}", self.gamma),
            ));
        }
        if self.n_thermal < 0.0 {
            return Err(Error::param(
                "n_thermal",
                format!("must be >= 0, got {}", self.n_thermal),
            ));
        }
        Ok(())
    }

    /// Named scalar access, used by parameter scans and finite differences.
    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "e0" | "omega_a" => self.e0,
            "kappa" => self.kappa,
            "r_tun" | "R" => self.r_tun,
            "beta" => self.beta,
            "gamma" => self.gamma,
            "eta" => self.eta,
            "delta_c" => self.delta_c,
            "omega_c" => self.omega_c,
            "omega_p" => self.omega_p,
            "n_thermal" => self.n_thermal,
            "pump_phase" => self.pump_phase,
            _ => {
                return Err(Error::param(
                    "parameter",
                    format!("unknown parameter `{name}`"),
                ))
            }
        })
    }

    pub fn with(&self, name: &str, value: f64) -> Result<Self> {
        let mut p = *self;
        match name {
            "e0" | "omega_a" => p.e0 = value,
            "kappa" => p.kappa = value,
            "r_tun" | "R" => p.r_tun = value,
            "beta" => p.beta = value,
            "gamma" => p.gamma = value,
            "eta" => p.eta = value,
            "delta_c" => p.delta_c = value,
            "omega_c" => p.omega_c = value,
            "omega_p" => p.omega_p = value,
            "n_thermal" => p.n_thermal = value,
            "pump_phase" => p.pump_phase = value,
            _ => {
                return Err(Error::param(
                    "parameter",
                    format!("unknown parameter `{name}`"),
                ))
            }
        }
        Ok(p)
    }
}

/// Which master equation to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    /// Cavity frame without pump.
    Off,
    /// Pump frame with the coherent drive.
    On,
}

/// `H_A = E₀N·1 + κ(ĉ₁†²ĉ₁² + ĉ₂†²ĉ₂²) + R(ĉ₁†ĉ₂ + ĉ₂†ĉ₁)`.
pub fn hamiltonian_atomic(space: CompositeSpace, params: &ModelParams) -> Operator {
    let n = space.n_atoms() as f64;
    let mut h = Operator::identity(space).scale(params.e0 * n);
    if params.kappa != 0.0 {
        h = h
            .add(&onsite_interaction_op(space).scale(params.kappa))
            .expect("same space");
    }
    if params.r_tun != 0.0 {
        h = h
            .add(&tunneling_op(space).scale(params.r_tun))
            .expect("same space");
    }
    h
}

/// `H_I = β n̂₁ â†â`.
pub fn hamiltonian_interaction(space: CompositeSpace, params: &ModelParams) -> Operator {
    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| {
            let (n1, na) = space.labels(i);
            params.beta * (n1 * na) as f64
        })
        .collect();
    Operator::new(space, CMatrix::from_real_diagonal(&diag))
        .expect("diagonal has total_dim entries")
}

/// Full coherent part of the generator for the chosen drive.
pub fn hamiltonian(space: CompositeSpace, params: &ModelParams, drive: Drive) -> Operator {
    let mut h = hamiltonian_atomic(space, params)
        .add(&hamiltonian_interaction(space, params))
        .expect("same space");
    if drive == Drive::On {
        if params.delta_c != 0.0 {
            h = h
                .add(&photon_number_op(space).scale(params.delta_c))
                .expect("same space");
        }
        if params.eta != 0.0 {
            let a = cavity_annihilation(space);
            let phase = C64::from_polar(1.0, params.pump_phase);
            let pump = &a.dagger().matrix().scale(phase * params.eta)
                + &a.matrix().scale(phase.conj() * params.eta);
            h = h
                .add(&Operator::new(space, pump).expect("same space"))
                .expect("same space");
        }
    }
    h
}

/// Sparse Lindblad generator in the form
/// `dρ/dt = Kρ + ρK† + Σ_j L_j ρ L_j†`, with `K = -i H_eff`,
/// `H_eff = H − (i/2) Σ_j L_j†L_j`.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    space: CompositeSpace,
    h: Operator,
    h_eff: SparseMatrix,
    k: SparseMatrix,
    jumps: Vec<SparseMatrix>,
}

impl LindbladGenerator {
    pub fn new(space: CompositeSpace, params: &ModelParams, drive: Drive) -> Result<Self> {
        params.validate()?;
        let h = hamiltonian(space, params, drive);
        let a = cavity_annihilation(space);
        let mut jumps_dense = Vec::new();
        let down = params.gamma * (1.0 + params.n_thermal);
        let up = params.gamma * params.n_thermal;
        if down > 0.0 {
            jumps_dense.push(a.matrix().scale_real(down.sqrt()));
        }
        if up > 0.0 {
            jumps_dense.push(a.dagger().matrix().scale_real(up.sqrt()));
        }
        let mut h_eff = h.matrix().clone();
        for l in &jumps_dense {
            let ll = l.dagger().matmul(l);
            h_eff = &h_eff - &ll.scale(c(0.0, 0.5));
        }
        let k = h_eff.scale(c(0.0, -1.0));
        Ok(Self {
            space,
            h,
            h_eff: SparseMatrix::from_dense(&h_eff),
            k: SparseMatrix::from_dense(&k),
            jumps: jumps_dense.iter().map(SparseMatrix::from_dense).collect(),
        })
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    /// Non-Hermitian effective Hamiltonian used between quantum jumps.
    pub fn effective_hamiltonian(&self) -> &SparseMatrix {
        &self.h_eff
    }

    pub fn jump_operators(&self) -> &[SparseMatrix] {
        &self.jumps
    }

    pub fn workspace(&self) -> RhsWorkspace {
        let n = self.space.total_dim();
        RhsWorkspace {
            m: vec![C64::zero(); n * n],
            scratch: vec![C64::zero(); n * n],
        }
    }

    /// `out = L(ρ)` for a row-major Hermitian `rho`. The output is exactly
    /// Hermitian: only the upper triangle is computed and mirrored.
    pub fn apply_into(&self, rho: &[C64], out: &mut [C64], ws: &mut RhsWorkspace) {
        let n = self.space.total_dim();
        self.k.mul_dense_into(rho, &mut ws.m);
        out.iter_mut().for_each(|z| *z = C64::zero());
        for l in &self.jumps {
            l.add_sandwich_into(rho, &mut ws.scratch, out);
        }
        for i in 0..n {
            let d = ws.m[i * n + i];
            let s = out[i * n + i];
            out[i * n + i] = C64::new(2.0 * d.re + s.re, 0.0);
            for j in (i + 1)..n {
                let v = ws.m[i * n + j]
                    + ws.m[j * n + i].conj()
                    + (out[i * n + j] + out[j * n + i].conj()) * 0.5;
                out[i * n + j] = v;
                out[j * n + i] = v.conj();
            }
        }
    }

    /// Upper bound on the operator norm of the generator acting on
    /// Frobenius-normed matrices: the spectral spread of `H` for the
    /// commutator plus twice the top of `Σ L†L` for the dissipator.
    pub fn norm_bound(&self) -> Result<f64> {
        let spread = {
            let ev = self.h.matrix().hermitian_eigen()?.values;
            ev.first().copied().unwrap_or(0.0) - ev.last().copied().unwrap_or(0.0)
        };
        let n = self.space.total_dim();
        let mut sum = CMatrix::zeros(n);
        for l in &self.jumps {
            let d = l.to_dense();
            sum = &sum + &d.dagger().matmul(&d);
        }
        let top = if self.jumps.is_empty() {
            0.0
        } else {
            sum.hermitian_eigen()?
                .values
                .first()
                .copied()
                .unwrap_or(0.0)
        };
        Ok(spread.abs() + 2.0 * top.max(0.0))
    }

    /// Dense convenience wrapper.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<CMatrix> {
        if rho.space() != self.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: rho.space().total_dim(),
            });
        }
        let n = self.space.total_dim();
        let mut out = vec![C64::zero(); n * n];
        let mut ws = self.workspace();
        self.apply_into(rho.matrix().as_slice(), &mut out, &mut ws);
        CMatrix::from_vec(n, out)
    }
}

pub struct RhsWorkspace {
    m: Vec<C64>,
    scratch: Vec<C64>,
}

/// `dρ/dt` for the chosen master equation.
pub fn lindblad_rhs(rho: &DensityMatrix, params: &ModelParams, drive: Drive) -> Result<CMatrix> {
    LindbladGenerator::new(rho.space(), params, drive)?.apply(rho)
}

/// `Tr[ρ Ô]`.
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.space() != op.space() {
        return Err(Error::DimensionMismatch {
            expected: rho.space().total_dim(),
            found: op.space().total_dim(),
        });
    }
    Ok(rho.matrix().trace_product(op.matrix()))
}

/// Sparse observable for cheap repeated expectation values.
#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    op: SparseMatrix,
}

impl Observable {
    pub fn new(name: impl Into<String>, op: &Operator) -> Self {
        Self {
            name: name.into(),
            op: SparseMatrix::from_dense(op.matrix()),
        }
    }

    /// `Tr[ρ O] = Σ_ij O_ij ρ_ji`
    pub fn eval(&self, rho: &[C64]) -> C64 {
        let n = self.op.dim();
        let mut acc = C64::zero();
        for i in 0..n {
            for (j, v) in self.op.row(i) {
                acc += v * rho[j * n + i];
            }
        }
        acc
    }
}

/// `n1`, `n1_sq`, `photons` and `a` observables.
pub fn standard_observables(space: CompositeSpace) -> Vec<Observable> {
    let n1 = number_op_well1(space);
    let n1sq = n1.mul(&n1).expect("same space");
    vec![
        Observable::new("n1", &n1),
        Observable::new("n1_sq", &n1sq),
        Observable::new("photons", &photon_number_op(space)),
        Observable::new("a", &cavity_annihilation(space)),
    ]
}

/// Worst invariant errors seen over a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub all_positive: bool,
    /// Largest population found in the two highest cavity Fock levels.
    pub max_top_cavity_population: f64,
    /// `max_top_cavity_population` exceeded the truncation monitor threshold.
    pub truncation_flag: bool,
}

impl Default for InvariantSummary {
    fn default() -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            all_positive: true,
            max_top_cavity_population: 0.0,
            truncation_flag: false,
        }
    }
}

/// Threshold on the population of the two highest Fock levels.
pub const TRUNCATION_MONITOR: f64 = 1e-6;

impl InvariantSummary {
    pub fn record(&mut self, p: &Physicality, top_pop: f64) {
        self.max_trace_error = self.max_trace_error.max(p.trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(p.hermiticity_error);
        self.all_positive &= p.positive;
        self.max_top_cavity_population = self.max_top_cavity_population.max(top_pop);
        self.truncation_flag |= top_pop > TRUNCATION_MONITOR;
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Option<Vec<DensityMatrix>>,
    /// Named complex time series, one value per time.
    pub observables: BTreeMap<String, Vec<C64>>,
    pub stats: IntegratorStats,
    pub invariants: InvariantSummary,
}

impl Trajectory {
    pub fn observable(&self, name: &str) -> Option<&[C64]> {
        self.observables.get(name).map(|v| v.as_slice())
    }

    /// Real part of a named series.
    pub fn real_series(&self, name: &str) -> Option<Vec<f64>> {
        self.observable(name)
            .map(|v| v.iter().map(|z| z.re).collect())
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub tolerances: Tolerances,
    pub integrator: Integrator,
    pub store_states: bool,
    pub observables: Vec<Observable>,
    pub invariant_tolerances: PhysicalityTolerances,
    /// Abort with an error when an output state violates the tolerances.
    pub abort_on_violation: bool,
}

impl EvolveOptions {
    pub fn new(space: CompositeSpace) -> Self {
        Self {
            tolerances: Tolerances::default(),
            integrator: Integrator::Adaptive,
            store_states: false,
            observables: standard_observables(space),
            invariant_tolerances: PhysicalityTolerances::evolved(),
            abort_on_violation: true,
        }
    }

    pub fn with_states(mut self) -> Self {
        self.store_states = true;
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tolerances = tol;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Empty("t_grid"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("t_grid", "times must be finite"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("t_grid", "times must be strictly increasing"));
    }
    Ok(())
}

/// Integrate the master equation from `rho0` (at `t_grid[0]`) and record the
/// requested observables, plus states when asked, at every grid time.
pub fn evolve_master(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    params: &ModelParams,
    drive: Drive,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    check_grid(t_grid)?;
    let gen = LindbladGenerator::new(rho0.space(), params, drive)?;
    evolve_with_generator(&gen, rho0, t_grid, opts)
}

pub fn evolve_with_generator(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    check_grid(t_grid)?;
    let space = gen.space();
    if rho0.space() != space {
        return Err(Error::DimensionMismatch {
            expected: space.total_dim(),
            found: rho0.space().total_dim(),
        });
    }
    let n = space.total_dim();
    let mut ws = gen.workspace();
    let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| gen.apply_into(y, dy, &mut ws);

    let mut observables: BTreeMap<String, Vec<C64>> = opts
        .observables
        .iter()
        .map(|o| (o.name.clone(), Vec::with_capacity(t_grid.len())))
        .collect();
    let mut states = if opts.store_states {
        Some(Vec::with_capacity(t_grid.len()))
    } else {
        None
    };
    let mut invariants = InvariantSummary::default();
    let tol = opts.invariant_tolerances;

    let on_output = |_: usize, t: f64, y: &[C64]| -> Result<()> {
        for o in &opts.observables {
            observables
                .get_mut(&o.name)
                .expect("key inserted above")
                .push(o.eval(y));
        }
        let rho = DensityMatrix::new_unchecked(space, CMatrix::from_vec(n, y.to_vec())?)?;
        let p = rho.physicality(&tol);
        invariants.record(&p, rho.cavity_top_population(2.min(space.cav_dim())));
        if opts.abort_on_violation && !p.within(&tol) {
            return Err(Error::InvariantViolation {
                t,
                what: format!("{p:?}"),
            });
        }
        if let Some(s) = states.as_mut() {
            s.push(rho);
        }
        Ok(())
    };
    let y0 = rho0.matrix().as_slice();
    let stats = match opts.integrator {
        Integrator::Adaptive => {
            ode::integrate(&mut rhs, t_grid[0], y0, t_grid, opts.tolerances, on_output)?
        }
        Integrator::Exponential => {
            let rate = gen.norm_bound()?;
            ode::integrate_taylor(&mut rhs, t_grid[0], y0, t_grid, rate, on_output)?
        }
    };
    Ok(Trajectory {
        times: t_grid.to_vec(),
        states,
        observables,
        stats,
        invariants,
    })
}

/// Integrator choice plus the tolerances used by the adaptive stepper.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Solver {
    pub fn exponential() -> Self {
        Self {
            integrator: Integrator::Exponential,
            tolerances: Tolerances::default(),
        }
    }

    pub fn adaptive(tolerances: Tolerances) -> Self {
        Self {
            integrator: Integrator::Adaptive,
            tolerances,
        }
    }

    pub fn options(&self, space: CompositeSpace) -> EvolveOptions {
        EvolveOptions::new(space)
            .with_tolerances(self.tolerances)
            .with_integrator(self.integrator)
    }
}

/// Uniform grid `start, start+dt, …` with `n` points.
pub fn uniform_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let dt = (stop - start) / (n - 1) as f64;
    (0..n).map(|k| start + dt * k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{atomic_fock, cavity_fock, coherent_state, product_state};
    use approx::assert_abs_diff_eq;

    fn rand_state(space: CompositeSpace, seed: u64) -> DensityMatrix {
        // a deterministic mixed state: Σ w_k |v_k><v_k| with pseudo-random vectors
        let d = space.total_dim();
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let mut m = CMatrix::zeros(d);
        for w in [0.6, 0.3, 0.1] {
            let v: Vec<C64> = (0..d).map(|_| c(next(), next())).collect();
            let nrm = crate::linalg::vec_norm(&v);
            let v: Vec<C64> = v.iter().map(|z| z / nrm).collect();
            m += &CMatrix::outer(&v, &v).scale_real(w);
        }
        DensityMatrix::new(space, m).unwrap()
    }

    fn generic_params() -> ModelParams {
        ModelParams {
            e0: 0.3,
            kappa: 0.7,
            r_tun: 1.1,
            beta: 0.4,
            gamma: 0.9,
            eta: 0.25,
            delta_c: 0.2,
            n_thermal: 0.15,
            ..Default::default()
        }
    }

    #[test]
    fn atomic_hamiltonian_two_atoms() {
        let space = CompositeSpace::new(2, 0);
        let p = ModelParams {
            kappa: 0.8,
            r_tun: 0.3,
            ..Default::default()
        };
        let h = hamiltonian_atomic(space, &p);
        let r2 = 2f64.sqrt();
        // index = n1; basis |0,2>, |1,1>, |2,0>
        let expected = [
            [2.0 * 0.8, r2 * 0.3, 0.0],
            [r2 * 0.3, 0.0, r2 * 0.3],
            [0.0, r2 * 0.3, 2.0 * 0.8],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(h.matrix()[(i, j)].re, expected[i][j], epsilon = 1e-15);
                assert_eq!(h.matrix()[(i, j)].im, 0.0);
            }
        }
        let e = h.matrix().hermitian_eigen().unwrap();
        // eigenvalues of the 3x3 oracle: 2κ and κ ± sqrt(κ² + 4R²)
        let k: f64 = 0.8;
        let r = 0.3;
        let mut oracle = [
            2.0 * k,
            k + (k * k + 4.0 * r * r).sqrt(),
            k - (k * k + 4.0 * r * r).sqrt(),
        ];
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in e.values.iter().zip(oracle) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn atomic_hamiltonian_limits() {
        let space = CompositeSpace::new(3, 1);
        let p = ModelParams {
            e0: 0.5,
            ..Default::default()
        };
        let h = hamiltonian_atomic(space, &p);
        assert_eq!(h, Operator::identity(space).scale(1.5));
        let one = CompositeSpace::new(1, 0);
        let p = ModelParams {
            r_tun: 0.7,
            ..Default::default()
        };
        let e = hamiltonian_atomic(one, &p)
            .matrix()
            .hermitian_eigen()
            .unwrap();
        assert_abs_diff_eq!(e.values[0], 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], -0.7, epsilon = 1e-14);
    }

    #[test]
    fn interaction_hamiltonian() {
        let space = CompositeSpace::new(3, 4);
        let zero = hamiltonian_interaction(space, &ModelParams::default());
        assert_eq!(zero.matrix().max_abs(), 0.0);
        let p = ModelParams {
            beta: 0.5,
            ..Default::default()
        };
        let h = hamiltonian_interaction(space, &p);
        let i = space.index(2, 3);
        assert_eq!(h.matrix()[(i, i)].re, 3.0);
        assert_eq!(
            h.commutator(&number_op_well1(space))
                .unwrap()
                .matrix()
                .max_abs(),
            0.0
        );
        assert_eq!(
            h.commutator(&photon_number_op(space))
                .unwrap()
                .matrix()
                .max_abs(),
            0.0
        );
    }

    #[test]
    fn rhs_zero_without_rates() {
        let space = CompositeSpace::new(2, 3);
        let rho = rand_state(space, 1);
        for drive in [Drive::Off, Drive::On] {
            let d = lindblad_rhs(&rho, &ModelParams::default(), drive).unwrap();
            assert!(d.max_abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_matches_dense_lindblad_form() {
        let space = CompositeSpace::new(2, 3);
        let rho = rand_state(space, 7);
        let p = generic_params();
        for drive in [Drive::Off, Drive::On] {
            let got = lindblad_rhs(&rho, &p, drive).unwrap();
            // dense reference: -i[H,ρ] + Σ (LρL† − ½{L†L,ρ})
            let h = hamiltonian(space, &p, drive);
            let r = rho.matrix();
            let mut expect = h.matrix().commutator(r).scale(c(0.0, -1.0));
            let a = cavity_annihilation(space);
            let ops = [
                a.matrix()
                    .scale_real((p.gamma * (1.0 + p.n_thermal)).sqrt()),
                a.dagger()
                    .matrix()
                    .scale_real((p.gamma * p.n_thermal).sqrt()),
            ];
            for l in &ops {
                let ld = l.dagger();
                let ll = ld.matmul(l);
                expect += &l.matmul(r).matmul(&ld);
                expect = &expect - &(&ll.matmul(r) + &r.matmul(&ll)).scale_real(0.5);
            }
            assert!((&got - &expect).max_abs() < 1e-13);
            assert!(got.trace().norm() < 1e-13);
            assert_eq!(got.hermiticity_error(), 0.0);
        }
    }

    #[test]
    fn damped_cavity_field_decays_at_half_gamma() {
        let space = CompositeSpace::cavity(25);
        let (psi, _) = coherent_state(25, c(1.5, 0.0));
        let rho = DensityMatrix::from_pure(space, &psi).unwrap();
        let p = ModelParams {
            gamma: 0.8,
            ..Default::default()
        };
        let d = lindblad_rhs(&rho, &p, Drive::Off).unwrap();
        let a = cavity_annihilation(space);
        let da = d.trace_product(a.matrix());
        let a_mean = expectation(&rho, &a).unwrap();
        assert!((da + a_mean * (p.gamma / 2.0)).norm() < 1e-9);
    }

    #[test]
    fn evolve_identity_without_rates() {
        let space = CompositeSpace::new(2, 2);
        let rho = rand_state(space, 3);
        let opts = EvolveOptions::new(space).with_states();
        let tr = evolve_master(
            &rho,
            &[0.0, 1.0, 2.0],
            &ModelParams::default(),
            Drive::Off,
            &opts,
        )
        .unwrap();
        for s in tr.states.unwrap() {
            assert!((s.matrix() - rho.matrix()).max_abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_and_adaptive_integrators_agree() {
        let space = CompositeSpace::new(3, 4);
        let psi = product_state(
            space,
            &atomic_fock(3, 2).unwrap(),
            &coherent_state(4, c(0.6, 0.3)).0,
        )
        .unwrap();
        let rho = DensityMatrix::from_pure(space, &psi).unwrap();
        let p = ModelParams {
            r_tun: 2.0,
            beta: 0.7,
            gamma: 1.3,
            eta: 0.9,
            n_thermal: 0.1,
            ..Default::default()
        };
        let grid = uniform_grid(0.0, 3.0, 7);
        let exp = Solver::exponential().options(space).with_states();
        let ada = Solver::adaptive(Tolerances::new(1e-13, 1e-12))
            .options(space)
            .with_states();
        let a = evolve_master(&rho, &grid, &p, Drive::On, &exp).unwrap();
        let b = evolve_master(&rho, &grid, &p, Drive::On, &ada).unwrap();
        for (x, y) in a.states.unwrap().iter().zip(b.states.unwrap().iter()) {
            assert!((x.matrix() - y.matrix()).max_abs() < 1e-10);
        }
        assert!(a.invariants.all_positive);
    }

    #[test]
    fn norm_bound_dominates_generator() {
        let space = CompositeSpace::new(2, 3);
        let p = ModelParams {
            r_tun: 1.5,
            beta: 0.4,
            gamma: 2.0,
            eta: 0.5,
            ..Default::default()
        };
        let gen = LindbladGenerator::new(space, &p, Drive::On).unwrap();
        let bound = gen.norm_bound().unwrap();
        for seed in 0..5 {
            let rho = rand_state(space, seed);
            let out = gen.apply(&rho).unwrap();
            assert!(out.frobenius_norm() <= bound * rho.matrix().frobenius_norm() + 1e-12);
        }
    }

    #[test]
    fn evolve_rejects_bad_grid() {
        let space = CompositeSpace::new(1, 1);
        let psi = product_state(
            space,
            &atomic_fock(1, 1).unwrap(),
            &cavity_fock(1, 0).unwrap(),
        )
        .unwrap();
        let rho = DensityMatrix::from_pure(space, &psi).unwrap();
        let opts = EvolveOptions::new(space);
        assert!(evolve_master(
            &rho,
            &[0.0, 1.0, 0.5],
            &ModelParams::default(),
            Drive::Off,
            &opts
        )
        .is_err());
        assert!(evolve_master(&rho, &[], &ModelParams::default(), Drive::Off, &opts).is_err());
    }

    #[test]
    fn expectation_identities() {
        let space = CompositeSpace::new(2, 2);
        let rho = rand_state(space, 11);
        let one = expectation(&rho, &Operator::identity(space)).unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 1e-12);
        let a = cavity_annihilation(space);
        let ea = expectation(&rho, &a).unwrap();
        let ead = expectation(&rho, &a.dagger()).unwrap();
        assert!((ea.conj() - ead).norm() < 1e-14);
        let psi = product_state(
            space,
            &atomic_fock(2, 2).unwrap(),
            &cavity_fock(2, 0).unwrap(),
        )
        .unwrap();
        let f = DensityMatrix::from_pure(space, &psi).unwrap();
        assert_eq!(expectation(&f, &number_op_well1(space)).unwrap().re, 2.0);
        let n1 = number_op_well1(space);
        assert!(expectation(&rho, &n1).unwrap().im.abs() < 1e-10);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = ModelParams {
            gamma: -1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = ModelParams {
            kappa: f64::NAN,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
