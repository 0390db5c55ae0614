//! Matter-to-light mapping: atomic moments inferred from cavity quadratures.
//!
//! With the cavity adiabatically following the atoms (`γ ≫ βN, κN, R`) and a
//! resonant pump, expanding `⟨a⟩` to second order in `2βn̂₁/γ` gives
//!
//! ```text
//! ⟨P⟩ = −(2√2η/γ)(2β⟨n̂₁⟩/γ)
//! ⟨X⟩ =  (2√2η/γ)(1 − 4β²⟨n̂₁²⟩/γ²)
//! ```
//!
//! which are inverted by [`estimate_n1_mean`] and [`estimate_n1_sq`].
//!
//! The quadratures entering these relations are measured relative to the
//! pump. For the pump term `η(e^{iφ}a† + e^{-iφ}a)` the steady field of an
//! empty cavity is `⟨a⟩ = −i e^{iφ} 2η/γ`; [`pump_referenced`] removes that
//! phase so the empty-cavity field lies on the positive `X` axis.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_master, Drive, ModelParams, Solver, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::{
    cavity_annihilation, cavity_fock, product_state, CompositeSpace, DensityMatrix,
};
use crate::linalg::{vec_norm, C64};

/// Default ξ window, in units of `1/κ`.
pub const DEFAULT_XI_WINDOW: (f64, f64) = (0.07, 0.8);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMeans {
    pub x_mean: f64,
    pub p_mean: f64,
    pub time: f64,
}

impl QuadratureMeans {
    /// `⟨X⟩ = √2 Re⟨a⟩`, `⟨P⟩ = √2 Im⟨a⟩`.
    pub fn from_field(a: C64, time: f64) -> Self {
        let s = 2f64.sqrt();
        Self {
            x_mean: s * a.re,
            p_mean: s * a.im,
            time,
        }
    }
}

/// Quadratures of `Tr[ρ a]` in the frame of the state.
pub fn quadrature_means(rho: &DensityMatrix, time: f64) -> QuadratureMeans {
    let a = rho
        .matrix()
        .trace_product(cavity_annihilation(rho.space()).matrix());
    QuadratureMeans::from_field(a, time)
}

/// Field amplitude referenced to the pump phase, `i e^{-iφ} ⟨a⟩`.
pub fn pump_referenced(a: C64, pump_phase: f64) -> C64 {
    C64::new(0.0, 1.0) * C64::from_polar(1.0, -pump_phase) * a
}

/// Pump-referenced quadratures of a pump-frame state.
pub fn homodyne_means(rho: &DensityMatrix, params: &ModelParams, time: f64) -> QuadratureMeans {
    let a = rho
        .matrix()
        .trace_product(cavity_annihilation(rho.space()).matrix());
    QuadratureMeans::from_field(pump_referenced(a, params.pump_phase), time)
}

pub fn check_estimator_params(params: &ModelParams) -> Result<()> {
    for (name, v) in [
        ("beta", params.beta),
        ("eta", params.eta),
        ("gamma", params.gamma),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(
                name,
                format!("estimators need {name} > 0, got {v}"),
            ));
        }
    }
    if params.delta_c != 0.0 {
        return Err(Error::param(
            "delta_c",
            format!(
                "estimators assume a resonant pump (delta_c = 0), got {}",
                params.delta_c
            ),
        ));
    }
    Ok(())
}

/// `⟨n̂₁⟩ = −γ²⟨P⟩ / (4√2 βη)`.
pub fn estimate_n1_mean(qm: &QuadratureMeans, params: &ModelParams) -> Result<f64> {
    check_estimator_params(params)?;
    let (g, b, e) = (params.gamma, params.beta, params.eta);
    Ok(-g * g * qm.p_mean / (4.0 * 2f64.sqrt() * b * e))
}

/// `⟨n̂₁²⟩ = γ³/(8√2 β²η) · (2√2η/γ − ⟨X⟩)`.
pub fn estimate_n1_sq(qm: &QuadratureMeans, params: &ModelParams) -> Result<f64> {
    check_estimator_params(params)?;
    let (g, b, e) = (params.gamma, params.beta, params.eta);
    let s2 = 2f64.sqrt();
    Ok(g * g * g / (8.0 * s2 * b * b * e) * (2.0 * s2 * e / g - qm.x_mean))
}

/// The forward relations that the estimators invert.
pub fn forward_quadratures(
    n1_mean: f64,
    n1_sq: f64,
    params: &ModelParams,
) -> Result<QuadratureMeans> {
    check_estimator_params(params)?;
    let (g, b, e) = (params.gamma, params.beta, params.eta);
    let amp = 2.0 * 2f64.sqrt() * e / g;
    Ok(QuadratureMeans {
        x_mean: amp * (1.0 - 4.0 * b * b * n1_sq / (g * g)),
        p_mean: -amp * (2.0 * b * n1_mean / g),
        time: 0.0,
    })
}

/// Exact pump-frame steady field for a frozen population `n1` and `Δ_C = 0`:
/// `⟨a⟩ = −i e^{iφ} η / (iβn₁ + γ/2)`.
pub fn steady_state_field(n1: f64, params: &ModelParams) -> C64 {
    let den = C64::new(params.gamma / 2.0, params.beta * n1 + params.delta_c);
    C64::new(0.0, -1.0) * C64::from_polar(params.eta, params.pump_phase) / den
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSeries {
    pub times: Vec<f64>,
    pub n1_exact: Vec<f64>,
    pub n1_est: Vec<f64>,
    pub n1sq_exact: Vec<f64>,
    pub n1sq_est: Vec<f64>,
}

impl EstimateSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Estimates from a driven trajectory recording `n1`, `n1_sq` and `a`.
pub fn series_from_trajectory(tr: &Trajectory, params: &ModelParams) -> Result<EstimateSeries> {
    check_estimator_params(params)?;
    let get = |name: &'static str| tr.observable(name).ok_or(Error::Empty(name));
    let n1 = get("n1")?;
    let n1sq = get("n1_sq")?;
    let a = get("a")?;
    let mut s = EstimateSeries {
        times: tr.times.clone(),
        n1_exact: n1.iter().map(|z| z.re).collect(),
        n1_est: Vec::with_capacity(a.len()),
        n1sq_exact: n1sq.iter().map(|z| z.re).collect(),
        n1sq_est: Vec::with_capacity(a.len()),
    };
    for (t, z) in tr.times.iter().zip(a) {
        let qm = QuadratureMeans::from_field(pump_referenced(*z, params.pump_phase), *t);
        s.n1_est.push(estimate_n1_mean(&qm, params)?);
        s.n1sq_est.push(estimate_n1_sq(&qm, params)?);
    }
    Ok(s)
}

/// Integrate the driven master equation from `rho0` and compare the exact
/// atomic moments with their cavity estimates.
pub fn benchmark_run(
    params: &ModelParams,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    solver: Solver,
) -> Result<(EstimateSeries, Trajectory)> {
    check_estimator_params(params)?;
    let opts = solver.options(rho0.space());
    let tr = evolve_master(rho0, t_grid, params, Drive::On, &opts)?;
    Ok((series_from_trajectory(&tr, params)?, tr))
}

/// Trapezoidal average of `values` over `[t0, t1]`, with linear
/// interpolation at window edges that fall between grid points.
pub fn window_average(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::Empty("series"));
    }
    if !(t0 < t1) {
        return Err(Error::Empty("averaging window (t0 >= t1)"));
    }
    if t0 < times[0] || t1 > times[times.len() - 1] {
        return Err(Error::param(
            "window",
            format!(
                "[{t0}, {t1}] exceeds series range [{}, {}]",
                times[0],
                times[times.len() - 1]
            ),
        ));
    }
    let interp = |t: f64| {
        let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1) - 1;
        let f = (t - times[i]) / (times[i + 1] - times[i]);
        values[i] + f * (values[i + 1] - values[i])
    };
    let mut pts: Vec<(f64, f64)> = vec![(t0, interp(t0))];
    for (t, v) in times.iter().zip(values) {
        if *t > t0 && *t < t1 {
            pts.push((*t, *v));
        }
    }
    pts.push((t1, interp(t1)));
    let area: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    Ok(area / (t1 - t0))
}

/// `(ξ_m, ξ_q)`: time averages of `|estimate − exact|` for `⟨n̂₁⟩` and `⟨n̂₁²⟩`.
pub fn discrepancy_xi(series: &EstimateSeries, t0: f64, t1: f64) -> Result<(f64, f64)> {
    let dm: Vec<f64> = series
        .n1_est
        .iter()
        .zip(&series.n1_exact)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let dq: Vec<f64> = series
        .n1sq_est
        .iter()
        .zip(&series.n1sq_exact)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok((
        window_average(&series.times, &dm, t0, t1)?,
        window_average(&series.times, &dq, t0, t1)?,
    ))
}

/// Haar-random atomic state `Σ c_n |n, N−n⟩` from stream `stream` of `seed`.
pub fn random_initial_state(n_atoms: usize, seed: u64, stream: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    loop {
        let v: Vec<C64> = (0..=n_atoms)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            })
            .collect();
        let n = vec_norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

/// Joint initial state `|atoms⟩ ⊗ |0⟩`.
pub fn with_empty_cavity(space: CompositeSpace, atoms: &[C64]) -> Result<DensityMatrix> {
    let vac = cavity_fock(space.cav_cutoff(), 0)?;
    DensityMatrix::from_pure(space, &product_state(space, atoms, &vac)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiSample {
    pub index: u64,
    pub xi_m: f64,
    pub xi_q: f64,
}

/// Settings shared by all states of a ξ histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct XiSetup {
    pub params: ModelParams,
    pub space: CompositeSpace,
    pub t_grid: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    pub seed: u64,
    pub solver: Solver,
}

impl XiSetup {
    /// ξ for random state `index`.
    pub fn sample(&self, index: u64) -> Result<XiSample> {
        let atoms = random_initial_state(self.space.n_atoms(), self.seed, index);
        self.sample_state(index, &atoms)
    }

    pub fn sample_state(&self, index: u64, atoms: &[C64]) -> Result<XiSample> {
        let rho0 = with_empty_cavity(self.space, atoms)?;
        let (series, _) = benchmark_run(&self.params, &rho0, &self.t_grid, self.solver)?;
        let (xi_m, xi_q) = discrepancy_xi(&series, self.t0, self.t1)?;
        Ok(XiSample { index, xi_m, xi_q })
    }
}

/// ξ pairs for states `first .. first + n_states`, computed in index order.
pub fn xi_histogram(setup: &XiSetup, first: u64, n_states: usize) -> Result<Vec<XiSample>> {
    if n_states == 0 {
        return Err(Error::param("n_states", "must be >= 1"));
    }
    (first..first + n_states as u64)
        .map(|i| setup.sample(i))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeStatus {
    Satisfied,
    Marginal,
    Violated,
}

impl RegimeStatus {
    /// `≥ 10` satisfied, `[3, 10)` marginal, `< 3` violated; an undefined
    /// ratio (zero denominator) counts as satisfied.
    pub fn classify(ratio: Option<f64>) -> Self {
        match ratio {
            None => RegimeStatus::Satisfied,
            Some(r) if r >= 10.0 => RegimeStatus::Satisfied,
            Some(r) if r >= 3.0 => RegimeStatus::Marginal,
            Some(_) => RegimeStatus::Violated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeItem {
    pub condition: String,
    /// `None` when the small side vanishes.
    pub ratio: Option<f64>,
    pub status: RegimeStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub items: Vec<RegimeItem>,
}

impl RegimeReport {
    pub fn worst(&self) -> RegimeStatus {
        let mut w = RegimeStatus::Satisfied;
        for it in &self.items {
            w = match (w, it.status) {
                (_, RegimeStatus::Violated) | (RegimeStatus::Violated, _) => RegimeStatus::Violated,
                (_, RegimeStatus::Marginal) | (RegimeStatus::Marginal, _) => RegimeStatus::Marginal,
                _ => RegimeStatus::Satisfied,
            };
        }
        w
    }
}

fn ratio(big: f64, small: f64) -> Option<f64> {
    if small.abs() == 0.0 {
        None
    } else {
        Some(big.abs() / small.abs())
    }
}

/// Adiabatic-following and weak-back-action conditions:
/// `γ ≫ βN, κN, R` and `β⟨a†a(0)⟩ ≪ κN, R`.
pub fn regime_check(params: &ModelParams, rho0: &DensityMatrix) -> RegimeReport {
    let n = rho0.space().n_atoms() as f64;
    let sp = rho0.space();
    let m = rho0.matrix();
    let photons: f64 = (0..sp.total_dim())
        .map(|i| m[(i, i)].re * sp.labels(i).1 as f64)
        .sum();
    let back = params.beta * photons;
    let mk = |condition: &str, r: Option<f64>| RegimeItem {
        condition: String::from(condition),
        ratio: r,
        status: RegimeStatus::classify(r),
    };
    RegimeReport {
        items: vec![
            mk("gamma >> beta*N", ratio(params.gamma, params.beta * n)),
            mk("gamma >> kappa*N", ratio(params.gamma, params.kappa * n)),
            mk("gamma >> R", ratio(params.gamma, params.r_tun)),
            mk("beta*<n_a(0)> << kappa*N", ratio(params.kappa * n, back)),
            mk("beta*<n_a(0)> << R", ratio(params.r_tun, back)),
        ],
    }
}

/// Lag (in time units) at which the cross-correlation of the mean-removed
/// `exact` and `estimate` series over `t >= t_start` peaks; positive when
/// the estimate trails. The grid must be uniform. The peak is refined by a
/// parabola through the three best lags.
pub fn cross_correlation_lag(
    times: &[f64],
    exact: &[f64],
    estimate: &[f64],
    t_start: f64,
    max_lag: f64,
) -> Result<f64> {
    if times.len() != exact.len() || times.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: exact.len().min(estimate.len()),
        });
    }
    let i0 = times.partition_point(|&t| t < t_start);
    let x = &exact[i0..];
    let y = &estimate[i0..];
    let n = x.len();
    if n < 8 {
        return Err(Error::Empty("cross-correlation window"));
    }
    let dt = (times[times.len() - 1] - times[i0]) / (n - 1) as f64;
    if times[i0..]
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0))
    {
        return Err(Error::param(
            "times",
            "cross-correlation needs a uniform grid",
        ));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let k_max = ((max_lag / dt) as usize).min(n / 2);
    let corr: Vec<f64> = (0..=k_max)
        .map(|k| {
            let m = n - k;
            let mut s = 0.0;
            let mut sx = 0.0;
            let mut sy = 0.0;
            for i in 0..m {
                let a = x[i] - mx;
                let b = y[i + k] - my;
                s += a * b;
                sx += a * a;
                sy += b * b;
            }
            if sx > 0.0 && sy > 0.0 {
                s / (sx * sy).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let (best, _) =
        corr.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let mut lag = best as f64;
    if best > 0 && best < k_max {
        let (a, b, c) = (corr[best - 1], corr[best], corr[best + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            lag += (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    Ok(lag * dt)
}

/// Relative error of the `⟨n̂₁⟩` estimate in the exact steady state of a
/// frozen population `n1` (absolute error when `n1 = 0`).
pub fn relative_steady_bias(n1: f64, params: &ModelParams) -> Result<f64> {
    let a = steady_state_field(n1, params);
    let qm = QuadratureMeans::from_field(pump_referenced(a, params.pump_phase), 0.0);
    let est = estimate_n1_mean(&qm, params)?;
    if n1 == 0.0 {
        return Ok(est.abs());
    }
    Ok((est - n1).abs() / n1)
}
