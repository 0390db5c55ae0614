//! Monte-Carlo wavefunction unraveling of the master equation.
//!
//! Between jumps a trajectory follows `dψ/dt = -i H_eff ψ` without
//! renormalisation. A uniform threshold `r` is drawn; when `‖ψ‖²` falls to
//! `r` the crossing time is located by bisection, a jump operator is chosen
//! with probability `∝ ‖L_j ψ‖²`, the state is renormalised and a fresh
//! threshold is drawn.
//!
//! Trajectory `k` uses ChaCha8 stream `k` of the run seed, so any subset of
//! trajectories can be computed in any order with identical results.
//! The jump-free first segment is shared by all trajectories and computed
//! once; a trajectory replays it up to its own threshold crossing, which is
//! bit-identical to integrating it afresh.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// inherent float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::ode::{step_factor, Dopri5, IntegratorStats, Tolerances};
use super::{
    check_grid, standard_observables, Drive, InvariantSummary, LindbladGenerator, ModelParams,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::hilbert::{CompositeSpace, DensityMatrix, PhysicalityTolerances};
use crate::linalg::{vec_norm, CMatrix, SparseMatrix, C64};

/// Uniform draw in `(0, 1)`.
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn trajectory_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

struct SchrodingerRhs<'a> {
    k: &'a SparseMatrix,
}

impl SchrodingerRhs<'_> {
    fn eval(&self, psi: &[C64], out: &mut [C64]) {
        // out = -i H_eff ψ
        self.k.matvec_into(psi, out);
        for z in out.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
    }
}

#[derive(Clone)]
struct RecordedStep {
    t: f64,
    h: f64,
    psi: Vec<C64>,
    norm2_end: f64,
}

/// Jump-free evolution from `psi0`, recorded step by step.
struct ReferencePath {
    steps: Vec<RecordedStep>,
    /// `(grid index, step count completed when it was recorded, state)`
    outputs: Vec<(usize, usize, Vec<C64>)>,
    /// Step size proposed after each accepted step.
    next_h: Vec<f64>,
}

/// Outcome of integrating until either the grid end or a threshold crossing.
enum SegmentEnd {
    Finished,
    Crossed {
        step_t: f64,
        step_h: f64,
        psi_start: Vec<C64>,
        next_h: f64,
    },
}

/// Shared, immutable data for an ensemble of trajectories.
pub struct JumpEnsemble<'g> {
    gen: &'g LindbladGenerator,
    k_eff: SparseMatrix,
    psi0: Vec<C64>,
    grid: Vec<f64>,
    tol: Tolerances,
    seed: u64,
    reference: ReferencePath,
    h_init: f64,
}

impl<'g> JumpEnsemble<'g> {
    pub fn new(
        gen: &'g LindbladGenerator,
        psi0: &[C64],
        t_grid: &[f64],
        tol: Tolerances,
        seed: u64,
    ) -> Result<Self> {
        check_grid(t_grid)?;
        let n = gen.space().total_dim();
        if psi0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: psi0.len(),
            });
        }
        let norm = vec_norm(psi0);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::param(
                "psi0",
                format!("not normalised (|psi| = {norm})"),
            ));
        }
        let k_eff = {
            let d = gen.effective_hamiltonian().to_dense();
            SparseMatrix::from_dense(&d)
        };
        let mut ens = Self {
            gen,
            k_eff,
            psi0: psi0.to_vec(),
            grid: t_grid.to_vec(),
            tol,
            seed,
            reference: ReferencePath {
                steps: Vec::new(),
                outputs: Vec::new(),
                next_h: Vec::new(),
            },
            h_init: 0.0,
        };
        ens.h_init = {
            let rhs = SchrodingerRhs { k: &ens.k_eff };
            let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| rhs.eval(y, dy);
            Dopri5::new(n, tol).initial_step(&mut f, t_grid[0], psi0)
        };
        ens.reference = ens.record_reference()?;
        Ok(ens)
    }

    pub fn space(&self) -> CompositeSpace {
        self.gen.space()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Runs from `(t, psi)` with threshold `r`, pushing normalised states at
    /// grid points `>= next_out`. `record` collects accepted steps.
    #[allow(clippy::too_many_arguments)]
    fn run_segment(
        &self,
        mut t: f64,
        psi: &mut Vec<C64>,
        mut h: f64,
        r: f64,
        next_out: &mut usize,
        outputs: &mut Vec<Vec<C64>>,
        mut record: Option<&mut ReferencePath>,
        stats: &mut IntegratorStats,
    ) -> Result<SegmentEnd> {
        let n = psi.len();
        let rhs = SchrodingerRhs { k: &self.k_eff };
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| rhs.eval(y, dy);
        let mut stepper = Dopri5::new(n, self.tol);
        let mut ynew = vec![C64::zero(); n];
        // outputs that coincide with the segment start
        while *next_out < self.grid.len() && self.grid[*next_out] <= t {
            let nrm = vec_norm(psi);
            outputs.push(psi.iter().map(|z| z / nrm).collect());
            if let Some(rec) = record.as_deref_mut() {
                rec.outputs.push((*next_out, rec.steps.len(), psi.clone()));
            }
            *next_out += 1;
        }
        while *next_out < self.grid.len() {
            let t_out = self.grid[*next_out];
            let remaining = t_out - t;
            let (h_try, last) = if h >= remaining {
                (remaining, true)
            } else {
                (h, false)
            };
            let err = stepper.trial_step(&mut f, t, psi, h_try, &mut ynew);
            if !(err <= 1.0 && err.is_finite()) {
                stepper.reject();
                h = h_try
                    * if err.is_finite() {
                        step_factor(err).min(1.0)
                    } else {
                        0.2
                    };
                if h < self.tol.h_min {
                    return Err(Error::StepUnderflow { t });
                }
                continue;
            }
            stepper.accept();
            let mut next = h_try * step_factor(err);
            if let Some(hmax) = self.tol.h_max {
                next = next.min(hmax);
            }
            let next_h = if last { h.max(next) } else { next };
            let norm2: f64 = ynew.iter().map(|z| z.norm_sqr()).sum();
            if !(norm2.is_finite() && norm2 > 0.0) {
                return Err(Error::NormUnderflow { t });
            }
            if let Some(rec) = record.as_deref_mut() {
                rec.steps.push(RecordedStep {
                    t,
                    h: h_try,
                    psi: psi.clone(),
                    norm2_end: norm2,
                });
                rec.next_h.push(next_h);
            }
            if norm2 < r {
                let start = core::mem::replace(psi, ynew);
                stats.accepted += stepper.stats.accepted;
                stats.rejected += stepper.stats.rejected;
                stats.rhs_evals += stepper.stats.rhs_evals;
                return Ok(SegmentEnd::Crossed {
                    step_t: t,
                    step_h: h_try,
                    psi_start: start,
                    next_h,
                });
            }
            core::mem::swap(psi, &mut ynew);
            t = if last { t_out } else { t + h_try };
            h = next_h;
            if last {
                let nrm = norm2.sqrt();
                outputs.push(psi.iter().map(|z| z / nrm).collect());
                if let Some(rec) = record.as_deref_mut() {
                    rec.outputs.push((*next_out, rec.steps.len(), psi.clone()));
                }
                *next_out += 1;
            }
        }
        stats.accepted += stepper.stats.accepted;
        stats.rejected += stepper.stats.rejected;
        stats.rhs_evals += stepper.stats.rhs_evals;
        Ok(SegmentEnd::Finished)
    }

    fn record_reference(&self) -> Result<ReferencePath> {
        let mut rec = ReferencePath {
            steps: Vec::new(),
            outputs: Vec::new(),
            next_h: Vec::new(),
        };
        let mut psi = self.psi0.clone();
        let mut next_out = 0;
        let mut outs = Vec::new();
        let mut stats = IntegratorStats::default();
        self.run_segment(
            self.grid[0],
            &mut psi,
            self.h_init,
            0.0,
            &mut next_out,
            &mut outs,
            Some(&mut rec),
            &mut stats,
        )?;
        Ok(rec)
    }

    /// Locate `‖ψ(t_a + s)‖² = r` inside a step by bisection on `s`.
    fn locate_crossing(
        &self,
        t_a: f64,
        psi_a: &[C64],
        h: f64,
        r: f64,
        stats: &mut IntegratorStats,
    ) -> (f64, Vec<C64>) {
        let n = psi_a.len();
        let rhs = SchrodingerRhs { k: &self.k_eff };
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| rhs.eval(y, dy);
        let mut stepper = Dopri5::new(n, self.tol);
        let mut y = vec![C64::zero(); n];
        let (mut lo, mut hi) = (0.0f64, h);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            stepper.trial_step(&mut f, t_a, psi_a, mid, &mut y);
            let n2: f64 = y.iter().map(|z| z.norm_sqr()).sum();
            if n2 < r {
                hi = mid;
            } else {
                lo = mid;
            }
            if (hi - lo) <= 1e-13 * (1.0 + t_a.abs()) {
                break;
            }
        }
        // the state at `hi` is just past the crossing
        stepper.trial_step(&mut f, t_a, psi_a, hi, &mut y);
        stats.rhs_evals += stepper.stats.rhs_evals;
        (t_a + hi, y)
    }

    fn apply_jump(&self, psi: &[C64], rng: &mut ChaCha8Rng) -> Result<Vec<C64>> {
        let n = psi.len();
        let jumps = self.gen.jump_operators();
        let mut candidates = Vec::with_capacity(jumps.len());
        let mut total = 0.0;
        for l in jumps {
            let mut out = vec![C64::zero(); n];
            l.matvec_into(psi, &mut out);
            let w: f64 = out.iter().map(|z| z.norm_sqr()).sum();
            total += w;
            candidates.push((w, out));
        }
        if !(total > 0.0) {
            return Err(Error::Numerical(String::from(
                "threshold crossed but all jump rates vanish",
            )));
        }
        let u = uniform(rng) * total;
        let mut acc = 0.0;
        let last = candidates.len() - 1;
        for (idx, (w, out)) in candidates.into_iter().enumerate() {
            acc += w;
            if u < acc || idx == last {
                let nrm = w.sqrt();
                return Ok(out.into_iter().map(|z| z / nrm).collect());
            }
        }
        unreachable!("candidate list is non-empty")
    }

    /// Normalised states of trajectory `k` at every grid time.
    pub fn trajectory(&self, k: u64) -> Result<(Vec<Vec<C64>>, IntegratorStats)> {
        let mut rng = trajectory_rng(self.seed, k);
        let mut stats = IntegratorStats::default();
        let mut outputs: Vec<Vec<C64>> = Vec::with_capacity(self.grid.len());
        let r = uniform(&mut rng);

        // replay the shared jump-free segment
        let crossing = self.reference.steps.iter().position(|s| s.norm2_end < r);
        let (mut t, mut psi, mut h, mut next_out) = match crossing {
            None => {
                for (_, _, s) in &self.reference.outputs {
                    let nrm = vec_norm(s);
                    outputs.push(s.iter().map(|z| z / nrm).collect());
                }
                return Ok((outputs, stats));
            }
            Some(idx) => {
                let mut next_out = 0;
                for (g, done, s) in &self.reference.outputs {
                    if *done > idx {
                        break;
                    }
                    let nrm = vec_norm(s);
                    outputs.push(s.iter().map(|z| z / nrm).collect());
                    next_out = g + 1;
                }
                let st = &self.reference.steps[idx];
                let (tau, psi_tau) = self.locate_crossing(st.t, &st.psi, st.h, r, &mut stats);
                let psi = self.apply_jump(&psi_tau, &mut rng)?;
                (tau, psi, self.reference.next_h[idx], next_out)
            }
        };

        loop {
            let r = uniform(&mut rng);
            match self.run_segment(
                t,
                &mut psi,
                h,
                r,
                &mut next_out,
                &mut outputs,
                None,
                &mut stats,
            )? {
                SegmentEnd::Finished => break,
                SegmentEnd::Crossed {
                    step_t,
                    step_h,
                    psi_start,
                    next_h,
                } => {
                    let (tau, psi_tau) =
                        self.locate_crossing(step_t, &psi_start, step_h, r, &mut stats);
                    psi = self.apply_jump(&psi_tau, &mut rng)?;
                    t = tau;
                    h = next_h;
                }
            }
        }
        Ok((outputs, stats))
    }
}

/// Running sum of `|ψ⟩⟨ψ|` over trajectories, per grid time.
pub struct EnsembleAccumulator {
    dim: usize,
    sums: Vec<Vec<C64>>,
    count: u64,
    pub stats: IntegratorStats,
}

impl EnsembleAccumulator {
    pub fn new(dim: usize, n_times: usize) -> Self {
        Self {
            dim,
            sums: vec![vec![C64::zero(); dim * dim]; n_times],
            count: 0,
            stats: IntegratorStats::default(),
        }
    }

    pub fn add(&mut self, states: &[Vec<C64>], stats: &IntegratorStats) {
        let d = self.dim;
        for (sum, psi) in self.sums.iter_mut().zip(states) {
            for i in 0..d {
                let pi = psi[i];
                if pi.is_zero() {
                    continue;
                }
                let row = &mut sum[i * d..(i + 1) * d];
                for (s, pj) in row.iter_mut().zip(psi.iter()) {
                    *s += pi * pj.conj();
                }
            }
        }
        self.count += 1;
        self.stats.accepted += stats.accepted;
        self.stats.rejected += stats.rejected;
        self.stats.rhs_evals += stats.rhs_evals;
    }

    /// Ensemble averages as a [`Trajectory`] with states and the standard
    /// observables.
    pub fn finish(self, space: CompositeSpace, grid: &[f64]) -> Result<Trajectory> {
        if self.count == 0 {
            return Err(Error::Empty("trajectory ensemble"));
        }
        let inv = 1.0 / self.count as f64;
        let obs = standard_observables(space);
        let mut observables: BTreeMap<String, Vec<C64>> =
            obs.iter().map(|o| (o.name.clone(), Vec::new())).collect();
        let mut invariants = InvariantSummary::default();
        let tol = PhysicalityTolerances::evolved();
        let mut states = Vec::with_capacity(grid.len());
        for sum in self.sums {
            let m = CMatrix::from_vec(self.dim, sum.into_iter().map(|z| z * inv).collect())?;
            let rho = DensityMatrix::new_unchecked(space, m)?;
            for o in &obs {
                observables
                    .get_mut(&o.name)
                    .expect("inserted")
                    .push(o.eval(rho.matrix().as_slice()));
            }
            invariants.record(
                &rho.physicality(&tol),
                rho.cavity_top_population(2.min(space.cav_dim())),
            );
            states.push(rho);
        }
        Ok(Trajectory {
            times: grid.to_vec(),
            states: Some(states),
            observables,
            stats: self.stats,
            invariants,
        })
    }
}

/// Ensemble-averaged quantum-jump evolution, trajectories run sequentially
/// in index order.
pub fn quantum_jump_evolve(
    psi0: &[C64],
    space: CompositeSpace,
    t_grid: &[f64],
    params: &ModelParams,
    drive: Drive,
    n_traj: usize,
    seed: u64,
    tol: Tolerances,
) -> Result<Trajectory> {
    if n_traj == 0 {
        return Err(Error::param("n_traj", "must be >= 1"));
    }
    let gen = LindbladGenerator::new(space, params, drive)?;
    let ens = JumpEnsemble::new(&gen, psi0, t_grid, tol, seed)?;
    let mut acc = EnsembleAccumulator::new(space.total_dim(), t_grid.len());
    for k in 0..n_traj as u64 {
        let (states, stats) = ens.trajectory(k)?;
        acc.add(&states, &stats);
    }
    acc.finish(space, t_grid)
}
