//! Quantum parameter estimation: symmetric logarithmic derivatives, quantum
//! and classical Fisher information, Cramér–Rao bounds and the logarithmic
//! figures of merit `Λ`.
//!
//! States come from a [`StateFamily`], which maps a parameter value to the
//! states at a set of times. Derivatives are central finite differences with
//! a mandatory step-halving check, since the driven model is only reachable
//! by re-integration.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
// inherent float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_master, Drive, ModelParams, Solver};
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::linalg::{c, inner, CMatrix, C64};
use crate::phase_space::lab_frame_cavity;

/// Default rank threshold on eigenvalues.
pub const DEFAULT_EPS: f64 = 1e-10;
/// Relative change allowed between the derivatives at `h` and `h/2`.
pub const HALVING_TOL: f64 = 1e-4;
/// Absolute Frobenius change below which a derivative counts as settled.
pub const HALVING_FLOOR: f64 = 1e-9;
/// Largest admissible `h·|⟨ψ_m|∂ρ|ψ_n⟩| / |ρ_n − ρ_m|`: beyond it the step
/// rotates eigenvectors non-perturbatively and the split is withheld.
pub const DEGENERACY_RATIO: f64 = 1e-2;
/// Eigensolver noise floor added to the numerator of the ratio above.
const EIGEN_NOISE: f64 = 1e-15;
/// Relative agreement required between the split and `Tr[ρL²]`.
pub const SPLIT_TOL: f64 = 1e-3;
const MAX_HALVINGS: usize = 4;

/// Names used by the `Λ` figures.
pub const PARAM_R: &str = "r_tun";
pub const PARAM_KAPPA: &str = "kappa";

/// Eigenpairs of a density matrix with eigenvalues above `eps`, plus an
/// orthonormal basis of the discarded subspace.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Retained eigenvalues, descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    /// Eigenvalues at or below `eps`, treated as zero.
    pub kernel_values: Vec<f64>,
    pub kernel: Vec<Vec<C64>>,
    pub eps: f64,
    /// Sum of the magnitudes of the discarded eigenvalues.
    pub truncated_weight: f64,
}

impl SpectralDecomposition {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values.len() + self.kernel_values.len()
    }

    /// Projector onto the retained eigenspace.
    pub fn support_projector(&self) -> CMatrix {
        let n = self.dim();
        let mut p = CMatrix::zeros(n);
        for v in &self.vectors {
            p += &CMatrix::outer(v, v);
        }
        p
    }

    /// Smallest gap between a retained eigenvalue and any other eigenvalue.
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for w in self.values.windows(2) {
            gap = gap.min(w[0] - w[1]);
        }
        if let (Some(&last), Some(&top)) = (self.values.last(), self.kernel_values.first()) {
            gap = gap.min(last - top);
        }
        gap
    }

    /// Eigenbasis as columns of a unitary: retained vectors first.
    fn basis(&self) -> CMatrix {
        let n = self.dim();
        let cols: Vec<&Vec<C64>> = self.vectors.iter().chain(self.kernel.iter()).collect();
        CMatrix::from_fn(n, |i, j| cols[j][i])
    }
}

pub fn spectral_decompose(rho: &CMatrix, eps: f64) -> Result<SpectralDecomposition> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", "must be positive and finite"));
    }
    let eig = rho.hermitian_eigen()?;
    let mut d = SpectralDecomposition {
        values: Vec::new(),
        vectors: Vec::new(),
        kernel_values: Vec::new(),
        kernel: Vec::new(),
        eps,
        truncated_weight: 0.0,
    };
    for (v, vec) in eig.values.into_iter().zip(eig.vectors) {
        if v > eps {
            d.values.push(v);
            d.vectors.push(vec);
        } else {
            d.truncated_weight += v.abs();
            d.kernel_values.push(v);
            d.kernel.push(vec);
        }
    }
    Ok(d)
}

/// `[ρ(μ+h) − ρ(μ−h)] / 2h`, made exactly Hermitian.
pub fn central_difference(plus: &CMatrix, minus: &CMatrix, h: f64) -> CMatrix {
    let mut d = (plus - minus).scale_real(0.5 / h);
    d.hermitize();
    d
}

/// Central-difference derivative of a one-parameter generator.
pub fn state_derivative<F>(mut generator: F, mu: f64, h: f64) -> Result<CMatrix>
where
    F: FnMut(f64) -> Result<CMatrix>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", "step must be positive and finite"));
    }
    let plus = generator(mu + h)?;
    let minus = generator(mu - h)?;
    Ok(central_difference(&plus, &minus, h))
}

/// Symmetric logarithmic derivative on the support of the decomposition:
/// `L = 2 Σ ⟨ψ_m|∂ρ|ψ_n⟩/(ρ_n+ρ_m) |ψ_m⟩⟨ψ_n|` over pairs with at least one
/// retained member. Discarded eigenvalues count as zero.
pub fn sld(decomp: &SpectralDecomposition, drho: &CMatrix) -> Result<CMatrix> {
    if decomp.rank() == 0 {
        return Err(Error::Empty("spectral decomposition"));
    }
    let n = decomp.dim();
    if drho.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: drho.dim(),
        });
    }
    let u = decomp.basis();
    let ud = u.dagger();
    let dp = ud.matmul(drho).matmul(&u);
    let r = decomp.rank();
    let lam = |k: usize| if k < r { decomp.values[k] } else { 0.0 };
    let lp = CMatrix::from_fn(n, |m, k| {
        let s = lam(m) + lam(k);
        if s > decomp.eps && (m < r || k < r) {
            dp[(m, k)] * (2.0 / s)
        } else {
            C64::zero()
        }
    });
    let mut l = u.matmul(&lp).matmul(&ud);
    l.hermitize();
    Ok(l)
}

/// `Re Tr[ρ (A B + B A)/2]`.
pub fn symmetrized_expectation(rho: &CMatrix, a: &CMatrix, b: &CMatrix) -> f64 {
    rho.matmul(a).trace_product(b).re
}

/// Classical and quantum parts of the QFI from eigenvalue and eigenvector
/// derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiSplit {
    pub classical: Option<f64>,
    pub quantum: Option<f64>,
    pub status: SplitStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitStatus {
    /// Split computed and matching `Tr[ρL²]` to the stated relative error.
    Consistent { relative: f64 },
    /// Eigenvalues too close for the finite-difference step to resolve.
    Degenerate { min_gap: f64, ratio: f64 },
    /// Eigenvectors at `μ±h` could not be matched to the central ones.
    PairingFault { overlap: f64 },
    /// Split computed but disagreeing with `Tr[ρL²]`.
    Inconsistent { relative: f64 },
    NotRequested,
}

impl QfiSplit {
    fn unavailable(status: SplitStatus) -> Self {
        Self {
            classical: None,
            quantum: None,
            status,
        }
    }

    pub fn total(&self) -> Option<f64> {
        Some(self.classical? + self.quantum?)
    }
}

/// Eigenvectors of `other` matched to the retained vectors of `center`, with
/// phases chosen so that each overlap is real and positive.
fn aligned_eigenpairs(center: &SpectralDecomposition, other: &CMatrix) -> Result<core::result::Result<(Vec<f64>, Vec<Vec<C64>>), f64>> {
    let eig = other.hermitian_eigen()?;
    let mut used = vec![false; eig.values.len()];
    let mut values = Vec::with_capacity(center.rank());
    let mut vectors = Vec::with_capacity(center.rank());
    for psi in &center.vectors {
        let mut best = (0usize, -1.0f64);
        for (k, phi) in eig.vectors.iter().enumerate() {
            if used[k] {
                continue;
            }
            let o = inner(psi, phi).norm();
            if o > best.1 {
                best = (k, o);
            }
        }
        if best.1 < 0.5 {
            return Ok(Err(best.1));
        }
        used[best.0] = true;
        let ov = inner(psi, &eig.vectors[best.0]);
        let phase = ov.conj() / ov.norm();
        values.push(eig.values[best.0]);
        vectors.push(eig.vectors[best.0].iter().map(|z| z * phase).collect());
    }
    Ok(Ok((values, vectors)))
}

/// Worst `h·|⟨ψ_m|∂ρ|ψ_n⟩| / |ρ_n − ρ_m|` over retained `n` and any `m ≠ n`,
/// with the gap realising it.
fn degeneracy_ratio(decomp: &SpectralDecomposition, drho: &CMatrix, h: f64) -> (f64, f64) {
    let u = decomp.basis();
    let dp = u.dagger().matmul(drho).matmul(&u);
    let all: Vec<f64> = decomp.values.iter().chain(&decomp.kernel_values).copied().collect();
    let mut worst = (0.0f64, f64::INFINITY);
    for n in 0..decomp.rank() {
        for (m, &lm) in all.iter().enumerate() {
            if m == n {
                continue;
            }
            let gap = (decomp.values[n] - lm).abs();
            let ratio = (h * dp[(m, n)].norm() + EIGEN_NOISE) / gap;
            if ratio > worst.0 {
                worst = (ratio, gap);
            }
        }
    }
    worst
}

/// Classical/quantum decomposition of the QFI from the states at `μ±h`:
/// `H_C = Σ (∂ρ_n)²/ρ_n` and
/// `H_Q = 2 Σ_{n≠m} (ρ_n−ρ_m)²/(ρ_n+ρ_m) |⟨ψ_m|∂ψ_n⟩|² + 4 Σ_n ρ_n ‖Q ∂ψ_n‖²`,
/// where `Q` projects onto the discarded subspace.
pub fn qfi_split(
    decomp: &SpectralDecomposition,
    drho: &CMatrix,
    plus: &CMatrix,
    minus: &CMatrix,
    h: f64,
    canonical: f64,
) -> Result<QfiSplit> {
    let (ratio, min_gap) = degeneracy_ratio(decomp, drho, h);
    if ratio > DEGENERACY_RATIO {
        return Ok(QfiSplit::unavailable(SplitStatus::Degenerate { min_gap, ratio }));
    }
    let (vp, ep) = match aligned_eigenpairs(decomp, plus)? {
        Ok(x) => x,
        Err(o) => return Ok(QfiSplit::unavailable(SplitStatus::PairingFault { overlap: o })),
    };
    let (vm, em) = match aligned_eigenpairs(decomp, minus)? {
        Ok(x) => x,
        Err(o) => return Ok(QfiSplit::unavailable(SplitStatus::PairingFault { overlap: o })),
    };
    let r = decomp.rank();
    let inv2h = 1.0 / (2.0 * h);
    let dlam: Vec<f64> = (0..r).map(|k| (vp[k] - vm[k]) * inv2h).collect();
    let dpsi: Vec<Vec<C64>> = (0..r)
        .map(|k| ep[k].iter().zip(&em[k]).map(|(a, b)| (a - b) * inv2h).collect())
        .collect();
    let classical: f64 = (0..r).map(|k| dlam[k] * dlam[k] / decomp.values[k]).sum();
    let mut quantum = 0.0;
    for n in 0..r {
        let ln = decomp.values[n];
        for m in 0..r {
            if m == n {
                continue;
            }
            let lm = decomp.values[m];
            let sigma = (ln - lm) * (ln - lm) / (ln + lm);
            quantum += 2.0 * sigma * inner(&decomp.vectors[m], &dpsi[n]).norm_sqr();
        }
        let outside: f64 = decomp.kernel.iter().map(|k| inner(k, &dpsi[n]).norm_sqr()).sum();
        quantum += 4.0 * ln * outside;
    }
    let total = classical + quantum;
    let relative = if canonical.abs() > 1e-300 {
        (total - canonical).abs() / canonical.abs()
    } else {
        total.abs()
    };
    let status = if relative <= SPLIT_TOL {
        SplitStatus::Consistent { relative }
    } else {
        SplitStatus::Inconsistent { relative }
    };
    Ok(QfiSplit {
        classical: Some(classical),
        quantum: Some(quantum),
        status,
    })
}

/// A parametrised family of states, evaluated at a list of times.
pub trait StateFamily: Sized {
    fn parameter(&self, name: &str) -> Result<f64>;
    fn with_parameter(&self, name: &str, value: f64) -> Result<Self>;
    /// One Hermitian, unit-trace matrix per requested time.
    fn states(&self, times: &[f64]) -> Result<Vec<CMatrix>>;
    /// Scale entering the default step `1e-4·max(|μ|, scale)`.
    fn step_scale(&self) -> f64 {
        1.0
    }
    fn solver(&self) -> Option<Solver> {
        None
    }
    fn joint_state(&self) -> bool {
        false
    }
}

/// The driven cavity coupled to the junction, started from `rho0` at `t=0`.
/// States are the reduced lab-frame cavity states, or the joint states when
/// `joint` is set. The lab-frame rotation is parameter independent, so the
/// joint states skip it without changing any Fisher information.
#[derive(Clone, Debug)]
pub struct DrivenCavityModel {
    pub params: ModelParams,
    pub rho0: DensityMatrix,
    pub solver: Solver,
    pub joint: bool,
}

impl DrivenCavityModel {
    pub fn new(params: ModelParams, rho0: DensityMatrix) -> Self {
        Self {
            params,
            rho0,
            solver: Solver::exponential(),
            joint: false,
        }
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn joint(mut self, joint: bool) -> Self {
        self.joint = joint;
        self
    }
}

impl StateFamily for DrivenCavityModel {
    fn parameter(&self, name: &str) -> Result<f64> {
        self.params.get(name)
    }

    fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        Ok(Self {
            params: self.params.with(name, value)?,
            ..self.clone()
        })
    }

    fn states(&self, times: &[f64]) -> Result<Vec<CMatrix>> {
        if times.is_empty() {
            return Err(Error::Empty("times"));
        }
        if times[0] < 0.0 {
            return Err(Error::param("times", "must be non-negative"));
        }
        let prepend = times[0] > 0.0;
        let mut grid = Vec::with_capacity(times.len() + 1);
        if prepend {
            grid.push(0.0);
        }
        grid.extend_from_slice(times);
        let opts = self.solver.options(self.rho0.space()).with_states();
        let tr = evolve_master(&self.rho0, &grid, &self.params, Drive::On, &opts)?;
        let states = tr.states.expect("states requested");
        Ok(states
            .into_iter()
            .skip(usize::from(prepend))
            .zip(times)
            .map(|(s, &t)| {
                if self.joint {
                    s.into_matrix()
                } else {
                    lab_frame_cavity(&s, self.params.omega_p, t).into_matrix()
                }
            })
            .collect())
    }

    fn step_scale(&self) -> f64 {
        if self.params.beta != 0.0 {
            self.params.beta.abs()
        } else {
            1.0
        }
    }

    fn solver(&self) -> Option<Solver> {
        Some(self.solver)
    }

    fn joint_state(&self) -> bool {
        self.joint
    }
}

/// Family defined by a function of the parameter vector and time.
#[derive(Clone)]
pub struct ClosureFamily<F> {
    names: Vec<String>,
    values: Vec<f64>,
    f: F,
}

impl<F> ClosureFamily<F>
where
    F: Fn(&[f64], f64) -> Result<CMatrix> + Clone,
{
    pub fn new(names: &[&str], values: &[f64], f: F) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            values: values.to_vec(),
            f,
        })
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::param("parameter", format!("unknown parameter `{name}`")))
    }
}

impl<F> StateFamily for ClosureFamily<F>
where
    F: Fn(&[f64], f64) -> Result<CMatrix> + Clone,
{
    fn parameter(&self, name: &str) -> Result<f64> {
        Ok(self.values[self.position(name)?])
    }

    fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let k = self.position(name)?;
        let mut out = self.clone();
        out.values[k] = value;
        Ok(out)
    }

    fn states(&self, times: &[f64]) -> Result<Vec<CMatrix>> {
        times.iter().map(|&t| (self.f)(&self.values, t)).collect()
    }
}

/// Numerical settings for the Fisher-information pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfiSettings {
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Finite-difference step; `None` picks `1e-4·max(|μ|, scale)`.
    #[serde(default)]
    pub step: Option<f64>,
    /// Also compute the classical/quantum split.
    #[serde(default = "default_true")]
    pub split: bool,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn default_true() -> bool {
    true
}

impl Default for QfiSettings {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            step: None,
            split: true,
        }
    }
}

impl QfiSettings {
    pub fn step_for(&self, mu: f64, scale: f64) -> f64 {
        self.step.unwrap_or(1e-4 * mu.abs().max(scale))
    }
}

/// Derivative of the family states along one parameter, validated against
/// the derivative at half the step.
#[derive(Clone, Debug)]
pub struct ValidatedDerivative {
    pub derivative: CMatrix,
    pub plus: CMatrix,
    pub minus: CMatrix,
    /// Step of the reported derivative.
    pub step: f64,
    /// `‖D(2h) − D(h)‖_F / ‖D(h)‖_F`.
    pub residual: f64,
}

fn frob(m: &CMatrix) -> f64 {
    m.frobenius_norm()
}

/// Central differences at `h` and `h/2` for every time; the step is halved
/// until all times agree to `HALVING_TOL` (or `HALVING_FLOOR` absolute).
pub fn validated_derivatives<S: StateFamily>(family: &S, name: &str, times: &[f64], h: f64) -> Result<Vec<ValidatedDerivative>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("h", "step must be positive and finite"));
    }
    let mu = family.parameter(name)?;
    let eval = |v: f64| family.with_parameter(name, v)?.states(times);
    let mut step = h;
    let mut plus = eval(mu + step)?;
    let mut minus = eval(mu - step)?;
    for _ in 0..MAX_HALVINGS {
        let half = 0.5 * step;
        let plus_h = eval(mu + half)?;
        let minus_h = eval(mu - half)?;
        let mut out = Vec::with_capacity(times.len());
        let mut settled = true;
        for k in 0..times.len() {
            let coarse = central_difference(&plus[k], &minus[k], step);
            let fine = central_difference(&plus_h[k], &minus_h[k], half);
            let change = frob(&(&coarse - &fine));
            let scale = frob(&fine);
            let residual = if scale > 0.0 { change / scale } else { 0.0 };
            if change > HALVING_FLOOR && residual >= HALVING_TOL {
                settled = false;
                break;
            }
            out.push(ValidatedDerivative {
                derivative: fine,
                plus: plus_h[k].clone(),
                minus: minus_h[k].clone(),
                step: half,
                residual,
            });
        }
        if settled {
            return Ok(out);
        }
        step = half;
        plus = plus_h;
        minus = minus_h;
    }
    Err(Error::Numerical(format!(
        "finite-difference derivative along `{name}` did not settle under step halving"
    )))
}

/// Provenance of the numbers in a [`QfiReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdProvenance {
    pub steps: Vec<f64>,
    pub halving_residuals: Vec<f64>,
    pub eps: f64,
    pub truncated_weight: f64,
    pub solver: Option<Solver>,
    pub joint_state: bool,
}

/// Fisher information of one or several parameters at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub parameters: Vec<String>,
    pub values: Vec<f64>,
    pub time: f64,
    /// `H_np = Re Tr[ρ (L_n L_p + L_p L_n)/2]`; `1×1` in single-parameter mode.
    pub qfi: Vec<Vec<f64>>,
    pub splits: Vec<QfiSplit>,
    /// `H⁻¹`, absent when the matrix is singular.
    pub inverse: Option<Vec<Vec<f64>>>,
    pub inverse_trace: Option<f64>,
    pub provenance: FdProvenance,
}

impl QfiReport {
    pub fn diagonal(&self, k: usize) -> f64 {
        self.qfi[k][k]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p == name)
    }

    /// Single-parameter bound for parameter `k`, or the matrix bound.
    pub fn cramer_rao(&self, m: u64) -> Result<f64> {
        if self.parameters.len() == 1 {
            cramer_rao(self.qfi[0][0], m)
        } else {
            cramer_rao_matrix(&self.qfi, m)
        }
    }
}

/// Reports for every time, for the named parameters taken jointly. Also the
/// SLDs, in the same order as `names`, for callers building POVMs.
pub struct QfiAnalysis {
    pub reports: Vec<QfiReport>,
    pub slds: Vec<Vec<CMatrix>>,
    pub derivatives: Vec<Vec<ValidatedDerivative>>,
    pub states: Vec<CMatrix>,
}

pub fn analyze<S: StateFamily>(family: &S, names: &[&str], times: &[f64], settings: &QfiSettings) -> Result<QfiAnalysis> {
    if names.is_empty() {
        return Err(Error::Empty("parameter names"));
    }
    let center = family.states(times)?;
    let mut derivatives = Vec::with_capacity(names.len());
    let mut values = Vec::with_capacity(names.len());
    for name in names {
        let mu = family.parameter(name)?;
        let h = settings.step_for(mu, family.step_scale());
        values.push(mu);
        derivatives.push(validated_derivatives(family, name, times, h)?);
    }
    let p = names.len();
    let mut reports = Vec::with_capacity(times.len());
    let mut slds: Vec<Vec<CMatrix>> = vec![Vec::with_capacity(times.len()); p];
    for (k, &t) in times.iter().enumerate() {
        let rho = &center[k];
        let decomp = spectral_decompose(rho, settings.eps)?;
        let ls: Vec<CMatrix> = derivatives
            .iter()
            .map(|d| sld(&decomp, &d[k].derivative))
            .collect::<Result<_>>()?;
        let mut qfi = vec![vec![0.0; p]; p];
        for a in 0..p {
            for b in a..p {
                let v = symmetrized_expectation(rho, &ls[a], &ls[b]);
                qfi[a][b] = v;
                qfi[b][a] = v;
            }
        }
        check_psd(&qfi)?;
        let splits = (0..p)
            .map(|a| {
                if settings.split {
                    let d = &derivatives[a][k];
                    qfi_split(&decomp, &d.derivative, &d.plus, &d.minus, d.step, qfi[a][a])
                } else {
                    Ok(QfiSplit::unavailable(SplitStatus::NotRequested))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let inverse = symmetric_inverse(&qfi).ok();
        if let Some(inv) = &inverse {
            for a in 0..p {
                // matrix Cauchy–Schwarz: (H⁻¹)_aa ≥ 1/H_aa
                if inv[a][a] * qfi[a][a] < 1.0 - 1e-8 {
                    return Err(Error::Numerical(format!(
                        "inverse QFI violates (H⁻¹)_aa·H_aa ≥ 1 at t = {t}: {}",
                        inv[a][a] * qfi[a][a]
                    )));
                }
            }
        }
        let inverse_trace = inverse.as_ref().map(|m| (0..p).map(|a| m[a][a]).sum());
        reports.push(QfiReport {
            parameters: names.iter().map(|s| s.to_string()).collect(),
            values: values.clone(),
            time: t,
            qfi,
            splits,
            inverse,
            inverse_trace,
            provenance: FdProvenance {
                steps: derivatives.iter().map(|d| d[k].step).collect(),
                halving_residuals: derivatives.iter().map(|d| d[k].residual).collect(),
                eps: settings.eps,
                truncated_weight: decomp.truncated_weight,
                solver: family.solver(),
                joint_state: family.joint_state(),
            },
        });
        for (a, l) in ls.into_iter().enumerate() {
            slds[a].push(l);
        }
    }
    Ok(QfiAnalysis {
        reports,
        slds,
        derivatives,
        states: center,
    })
}

/// Single-parameter QFI at time `t`.
pub fn qfi_single<S: StateFamily>(family: &S, name: &str, t: f64, settings: &QfiSettings) -> Result<QfiReport> {
    Ok(analyze(family, &[name], &[t], settings)?.reports.remove(0))
}

/// QFI matrix for the named parameters at time `t`.
pub fn qfi_matrix<S: StateFamily>(family: &S, names: &[&str], t: f64, settings: &QfiSettings) -> Result<QfiReport> {
    Ok(analyze(family, names, &[t], settings)?.reports.remove(0))
}

fn to_dmatrix(h: &[Vec<f64>]) -> DMatrix<f64> {
    let n = h.len();
    DMatrix::from_fn(n, n, |i, j| h[i][j])
}

fn check_psd(h: &[Vec<f64>]) -> Result<()> {
    let ev = to_dmatrix(h).symmetric_eigen().eigenvalues;
    let top = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let low = ev.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if low < -1e-8 * top.max(1.0) {
        return Err(Error::Numerical(format!("QFI matrix not positive semidefinite (eigenvalue {low})")));
    }
    Ok(())
}

/// Inverse of a symmetric positive semidefinite matrix; singular (relative
/// smallest eigenvalue below `1e-12`) matrices are reported as unbounded.
pub fn symmetric_inverse(h: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = h.len();
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    if h.iter().any(|r| r.len() != n) {
        return Err(Error::param("matrix", "must be square"));
    }
    let eig = to_dmatrix(h).symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if top == 0.0 || eig.eigenvalues.iter().any(|&v| v <= 1e-12 * top) {
        return Err(Error::Unbounded);
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    Ok((0..n).map(|i| (0..n).map(|j| 0.5 * (inv[(i, j)] + inv[(j, i)])).collect()).collect())
}

/// `Var(μ) ≥ 1/(M·H)`.
pub fn cramer_rao(qfi: f64, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("m", "need at least one measurement"));
    }
    if !qfi.is_finite() || qfi < 0.0 {
        return Err(Error::param("qfi", "must be finite and non-negative"));
    }
    if qfi == 0.0 {
        return Err(Error::Unbounded);
    }
    Ok(1.0 / (m as f64 * qfi))
}

/// `Σ Var(μ_n) ≥ Tr[H⁻¹]/M`.
pub fn cramer_rao_matrix(h: &[Vec<f64>], m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("m", "need at least one measurement"));
    }
    check_psd(h)?;
    let inv = symmetric_inverse(h)?;
    Ok((0..h.len()).map(|a| inv[a][a]).sum::<f64>() / m as f64)
}

/// A measurement given by positive operators summing to the identity.
#[derive(Clone, Debug)]
pub struct Povm {
    pub label: String,
    elements: Vec<CMatrix>,
}

impl Povm {
    /// Checks positivity to `-1e-10` and completeness to `1e-8`.
    pub fn new(label: impl Into<String>, elements: Vec<CMatrix>) -> Result<Self> {
        let first = elements.first().ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let n = first.dim();
        let mut sum = CMatrix::zeros(n);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != n {
                return Err(Error::InvalidPovm(format!("element {k} has dimension {}", e.dim())));
            }
            if e.hermiticity_error() > 1e-10 {
                return Err(Error::InvalidPovm(format!("element {k} is not Hermitian")));
            }
            let low = e.min_eigenvalue()?;
            if low < -1e-10 {
                return Err(Error::InvalidPovm(format!("element {k} has eigenvalue {low}")));
            }
            sum += e;
        }
        let dev = (&sum - &CMatrix::identity(n)).frobenius_norm();
        if dev > 1e-8 {
            return Err(Error::InvalidPovm(format!("elements sum to identity only within {dev}")));
        }
        Ok(Self {
            label: label.into(),
            elements,
        })
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn trivial(dim: usize) -> Self {
        Self {
            label: "identity".into(),
            elements: vec![CMatrix::identity(dim)],
        }
    }

    /// Projectors onto Fock states.
    pub fn photon_number(dim: usize) -> Self {
        let elements = (0..dim)
            .map(|k| {
                let mut e = CMatrix::zeros(dim);
                e[(k, k)] = c(1.0, 0.0);
                e
            })
            .collect();
        Self {
            label: "photon_number".into(),
            elements,
        }
    }

    /// Projectors onto the eigenvectors of a Hermitian operator.
    pub fn eigenbasis(label: impl Into<String>, op: &CMatrix) -> Result<Self> {
        let eig = op.hermitian_eigen()?;
        let elements = eig.vectors.iter().map(|v| CMatrix::outer(v, v)).collect();
        Self::new(label, elements)
    }

    /// Bins of the rotated quadrature `X_θ = (a e^{-iθ} + a† e^{iθ})/√2`
    /// between the given increasing edges, with open outer bins. The last bin
    /// is the complement of the others, so completeness is exact.
    pub fn quadrature_bins(dim: usize, edges: &[f64], theta: f64) -> Result<Self> {
        if edges.is_empty() || edges.windows(2).any(|w| w[1] <= w[0]) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("edges", "need finite, strictly increasing edges"));
        }
        let reach = (2.0 * dim as f64 + 1.0).sqrt() + 12.0;
        let lower = (-reach).min(edges[0] - 1.0);
        let mut bounds = vec![lower];
        bounds.extend_from_slice(edges);
        let mut elements: Vec<CMatrix> = bounds.windows(2).map(|w| hermite_overlap(dim, w[0], w[1])).collect();
        let mut rest = CMatrix::identity(dim);
        for e in &elements {
            rest = &rest - e;
        }
        rest.hermitize();
        elements.push(rest);
        // rotate: ⟨n|Π_θ|m⟩ = e^{-i(n−m)θ} ⟨n|Π|m⟩
        if theta != 0.0 {
            for e in elements.iter_mut() {
                for n in 0..dim {
                    for m in 0..dim {
                        e[(n, m)] *= C64::from_polar(1.0, -((n as f64) - (m as f64)) * theta);
                    }
                }
            }
        }
        Self::new("quadrature_bins", elements)
    }
}

/// Normalised Hermite functions `φ_0..φ_{dim-1}` at `x`.
fn hermite_functions(dim: usize, x: f64, out: &mut [f64]) {
    out[0] = core::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if dim > 1 {
        out[1] = core::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..dim.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// `∫_a^b φ_n(x) φ_m(x) dx` by composite Simpson.
fn hermite_overlap(dim: usize, a: f64, b: f64) -> CMatrix {
    let panels = (((b - a) / 2e-3).ceil() as usize).max(2);
    let panels = panels + panels % 2;
    let dx = (b - a) / panels as f64;
    let mut acc = vec![0.0; dim * dim];
    let mut phi = vec![0.0; dim];
    for k in 0..=panels {
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        hermite_functions(dim, a + k as f64 * dx, &mut phi);
        for n in 0..dim {
            let wn = w * phi[n];
            for m in 0..dim {
                acc[n * dim + m] += wn * phi[m];
            }
        }
    }
    CMatrix::from_fn(dim, |n, m| c(acc[n * dim + m] * dx / 3.0, 0.0))
}

/// Classical Fisher information of a POVM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFisher {
    pub fisher: f64,
    /// Total probability of outcomes skipped for `p < 1e-12`.
    pub leakage: f64,
    pub skipped: usize,
}

/// `F = Σ_j (∂p_j)²/p_j` with `p_j = Tr[ρΠ_j]` and `∂p_j = Tr[∂ρ Π_j]`.
pub fn classical_fisher(rho: &CMatrix, drho: &CMatrix, povm: &Povm) -> Result<ClassicalFisher> {
    if rho.dim() != povm.dim() || drho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            found: rho.dim(),
        });
    }
    let mut out = ClassicalFisher {
        fisher: 0.0,
        leakage: 0.0,
        skipped: 0,
    };
    for e in povm.elements() {
        let p = rho.trace_product(e).re;
        if p < 1e-12 {
            out.leakage += p.max(0.0);
            out.skipped += 1;
            continue;
        }
        let dp = drho.trace_product(e).re;
        out.fisher += dp * dp / p;
    }
    Ok(out)
}

/// `Λ(μ) = ln[H(μ)⁻¹/β²]`.
pub fn lambda_single(qfi: f64, beta: f64) -> Result<f64> {
    if !(qfi > 0.0) || !qfi.is_finite() {
        return Err(Error::param("qfi", "must be positive and finite"));
    }
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::param("beta", "must be non-zero and finite"));
    }
    Ok((1.0 / (qfi * beta * beta)).ln())
}

/// Figures of merit for the pair `(R, κ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaFigures {
    pub lambda_r: f64,
    pub lambda_kappa: f64,
    /// `ln[((H⁻¹)_RR + (H⁻¹)_κκ)/(2β²)]`; absent for a singular matrix.
    pub lambda_mp: Option<f64>,
    /// `ln[(1/H_RR + 1/H_κκ)/(2β²)]`.
    pub lambda_mp_reciprocal: f64,
    /// `ln[(1/H(R) + 1/H(κ))/β²]`.
    pub lambda_se: f64,
}

/// `qfi_r`, `qfi_kappa` are the single-parameter values; `matrix` is the
/// joint QFI matrix ordered `(R, κ)`.
pub fn lambda_figures(qfi_r: f64, qfi_kappa: f64, matrix: &[Vec<f64>], beta: f64) -> Result<LambdaFigures> {
    if matrix.len() != 2 || matrix.iter().any(|r| r.len() != 2) {
        return Err(Error::param("matrix", "need a 2×2 matrix"));
    }
    let lambda_r = lambda_single(qfi_r, beta)?;
    let lambda_kappa = lambda_single(qfi_kappa, beta)?;
    let b2 = beta * beta;
    let lambda_se = ((1.0 / qfi_r + 1.0 / qfi_kappa) / b2).ln();
    if !(matrix[0][0] > 0.0 && matrix[1][1] > 0.0) {
        return Err(Error::param("matrix", "diagonal must be positive"));
    }
    let lambda_mp_reciprocal = ((1.0 / matrix[0][0] + 1.0 / matrix[1][1]) / (2.0 * b2)).ln();
    let lambda_mp = match symmetric_inverse(matrix) {
        Ok(inv) => Some(((inv[0][0] + inv[1][1]) / (2.0 * b2)).ln()),
        Err(Error::Unbounded) => None,
        Err(e) => return Err(e),
    };
    Ok(LambdaFigures {
        lambda_r,
        lambda_kappa,
        lambda_mp,
        lambda_mp_reciprocal,
        lambda_se,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub mu: f64,
    pub time: f64,
    pub qfi: Vec<Vec<f64>>,
    pub figures: LambdaFigures,
}

/// Scan averages at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaAverage {
    pub time: f64,
    pub lambda_r: f64,
    pub lambda_kappa: f64,
    pub lambda_se: f64,
    /// Absent when any scan point has a singular QFI matrix.
    pub lambda_mp: Option<f64>,
    pub lambda_mp_reciprocal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaTable {
    pub scanned: String,
    pub rows: Vec<LambdaRow>,
    pub averages: Vec<LambdaAverage>,
}

/// `Λ` figures over a grid of the scanned parameter and a list of times.
/// The QFI matrix is taken jointly in `(R, κ)`; its diagonal doubles as the
/// single-parameter values.
pub fn lambda_scan<S: StateFamily>(family: &S, scanned: &str, grid: &[f64], times: &[f64], settings: &QfiSettings) -> Result<LambdaTable> {
    if grid.is_empty() {
        return Err(Error::Empty("scan grid"));
    }
    let mut rows = Vec::with_capacity(grid.len() * times.len());
    for &mu in grid {
        rows.extend(lambda_rows(family, scanned, mu, times, settings)?);
    }
    Ok(LambdaTable::assemble(scanned, rows, times))
}

/// Rows of [`lambda_scan`] for one value of the scanned parameter.
pub fn lambda_rows<S: StateFamily>(family: &S, scanned: &str, mu: f64, times: &[f64], settings: &QfiSettings) -> Result<Vec<LambdaRow>> {
    let fam = family.with_parameter(scanned, mu)?;
    let beta = fam.parameter("beta")?;
    let no_split = QfiSettings { split: false, ..*settings };
    let a = analyze(&fam, &[PARAM_R, PARAM_KAPPA], times, &no_split)?;
    a.reports
        .into_iter()
        .map(|rep| {
            let figures = lambda_figures(rep.qfi[0][0], rep.qfi[1][1], &rep.qfi, beta)?;
            Ok(LambdaRow {
                mu,
                time: rep.time,
                qfi: rep.qfi,
                figures,
            })
        })
        .collect()
}

impl LambdaTable {
    /// Table with per-time averages over `rows`, kept in the given order.
    pub fn assemble(scanned: &str, rows: Vec<LambdaRow>, times: &[f64]) -> Self {
        let averages = times
            .iter()
            .map(|&t| {
                let sel: Vec<&LambdaRow> = rows.iter().filter(|r| r.time == t).collect();
                let n = sel.len() as f64;
                let mean = |f: &dyn Fn(&LambdaRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
                let mp: Option<Vec<f64>> = sel.iter().map(|r| r.figures.lambda_mp).collect();
                LambdaAverage {
                    time: t,
                    lambda_r: mean(&|r| r.figures.lambda_r),
                    lambda_kappa: mean(&|r| r.figures.lambda_kappa),
                    lambda_se: mean(&|r| r.figures.lambda_se),
                    lambda_mp: mp.map(|v| v.iter().sum::<f64>() / n),
                    lambda_mp_reciprocal: mean(&|r| r.figures.lambda_mp_reciprocal),
                }
            })
            .collect();
        Self {
            scanned: scanned.to_string(),
            rows,
            averages,
        }
    }
}
