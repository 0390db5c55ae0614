//! Pipelines behind each task kind, and the result bundle they produce.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bjj_probe::dynamics::{
    evolve_master, jump::EnsembleAccumulator, Drive, InvariantSummary, IntegratorStats, JumpEnsemble,
    LindbladGenerator, Trajectory,
};
use bjj_probe::estimation::{
    analyze, classical_fisher, lambda_figures, lambda_rows, DrivenCavityModel, LambdaFigures, LambdaTable, Povm,
    QfiReport, QfiSettings, SplitStatus, StateFamily, PARAM_KAPPA, PARAM_R,
};
use bjj_probe::hilbert::{annihilation_matrix, DensityMatrix, PhysicalityTolerances};
use bjj_probe::phase_space::{lab_frame_cavity, reduce_to_cavity, ring_radius_diagnostic, wigner, PhaseGrid};
use bjj_probe::probe_mapping::{
    benchmark_run, cross_correlation_lag, discrepancy_xi, regime_check, RegimeReport, RegimeStatus, XiSample,
    XiSetup,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Method, Task};
use crate::output::{csv_bytes, json_bytes, num, opt};
use crate::ProbeError;

/// Trajectories integrated between two ordered accumulation passes.
const JUMP_CHUNK: usize = 64;

/// Files of one run. Payloads depend only on the resolved config; the
/// metadata carries the wall time and thread count.
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub payloads: Vec<(String, Vec<u8>)>,
    pub meta: RunMeta,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    pub task: String,
    pub wall_seconds: f64,
    pub threads: usize,
    pub version: String,
    pub files: Vec<String>,
}

pub const CONFIG_FILE: &str = "config.json";
pub const META_FILE: &str = "meta.json";

impl ResultBundle {
    pub fn payload(&self, name: &str) -> Option<&[u8]> {
        self.payloads.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Parsed JSON payload, for callers that inspect summaries.
    pub fn json(&self, name: &str) -> Option<serde_json::Value> {
        serde_json::from_slice(self.payload(name)?).ok()
    }

    /// Writes the resolved config, every payload and the metadata to `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ProbeError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ProbeError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: &[u8]| -> Result<(), ProbeError> {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(io(&p))?;
            written.push(p);
            Ok(())
        };
        put(CONFIG_FILE, self.config.to_json().as_bytes())?;
        for (name, bytes) in &self.payloads {
            put(name, bytes)?;
        }
        put(META_FILE, &json_bytes(&self.meta))?;
        Ok(written)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub name: String,
    pub task: String,
    pub dimension: usize,
    pub regime: RegimeReport,
    pub regime_status: RegimeStatus,
}

/// Schema check plus the adiabatic-following regime annotations. Regime
/// problems are reported, not raised.
pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationReport, ProbeError> {
    cfg.validate()?;
    let rho0 = cfg.initial_state()?;
    let regime = regime_check(&cfg.params, &rho0);
    Ok(ValidationReport {
        name: cfg.name.clone(),
        task: cfg.task.kind().to_string(),
        dimension: rho0.space().total_dim(),
        regime_status: regime.worst(),
        regime,
    })
}

/// Validates `cfg` and executes its pipeline. Nothing is written here.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultBundle, ProbeError> {
    cfg.validate()?;
    let start = Instant::now();
    let payloads = match &cfg.task {
        Task::Evolve { drive } => run_evolve(cfg, *drive)?,
        Task::Wigner {
            drive,
            grid,
            lab_frame,
        } => run_wigner(cfg, *drive, grid.map(|g| (g.half_width, g.points)), *lab_frame)?,
        Task::Track { xi_window, lag } => run_track(cfg, *xi_window, lag.start, lag.max)?,
        Task::XiScan {
            n_states,
            batches,
            xi_window,
        } => run_xi_scan(cfg, *n_states, *batches, *xi_window)?,
        Task::QfiSingle { parameters, povm } => run_qfi_single(cfg, parameters, povm.as_ref())?,
        Task::QfiMulti { r_tun, kappa } => run_qfi_multi(cfg, &r_tun.grid(), &kappa.grid())?,
        Task::LambdaScan { scanned, grid } => run_lambda_scan(cfg, scanned, &grid.grid())?,
    };
    let meta = RunMeta {
        task: cfg.task.kind().to_string(),
        wall_seconds: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        files: payloads.iter().map(|(n, _)| n.clone()).collect(),
    };
    Ok(ResultBundle {
        config: cfg.clone(),
        payloads,
        meta,
    })
}

type Payloads = Vec<(String, Vec<u8>)>;

fn check_invariants(inv: &InvariantSummary, what: &str) -> Result<(), ProbeError> {
    let tol = PhysicalityTolerances::evolved();
    if !inv.all_positive || inv.max_trace_error > tol.trace || inv.max_hermiticity_error > tol.hermiticity {
        return Err(ProbeError::Numerical {
            module: "dynamics",
            source: bjj_probe::Error::Numerical(format!("{what}: state invariants violated: {inv:?}")),
        });
    }
    Ok(())
}

fn master(cfg: &ExperimentConfig, rho0: &DensityMatrix, times: &[f64], drive: Drive, states: bool) -> Result<Trajectory, ProbeError> {
    let mut opts = cfg.numerics.solver.options(rho0.space());
    if states {
        opts = opts.with_states();
    }
    evolve_master(rho0, times, &cfg.params, drive, &opts).map_err(ProbeError::numerical("dynamics"))
}

/// Ensemble average of `n_traj` jump trajectories. Trajectories run in
/// parallel chunks and are summed in index order, so the result does not
/// depend on the thread count.
fn jump_ensemble(cfg: &ExperimentConfig, drive: Drive, n_traj: usize) -> Result<Trajectory, ProbeError> {
    let space = cfg.composite_space()?;
    let times = cfg.times();
    let psi0 = cfg.initial_vector()?;
    let gen = LindbladGenerator::new(space, &cfg.params, drive).map_err(ProbeError::numerical("dynamics"))?;
    let ens = JumpEnsemble::new(&gen, &psi0, &times, cfg.numerics.solver.tolerances, cfg.seed)
        .map_err(ProbeError::numerical("dynamics"))?;
    let mut acc = EnsembleAccumulator::new(space.total_dim(), times.len());
    let mut first = 0u64;
    while first < n_traj as u64 {
        let last = (first + JUMP_CHUNK as u64).min(n_traj as u64);
        let chunk: Vec<_> = (first..last)
            .into_par_iter()
            .map(|k| ens.trajectory(k))
            .collect::<Result<_, _>>()
            .map_err(ProbeError::numerical("dynamics"))?;
        for (states, stats) in &chunk {
            acc.add(states, stats);
        }
        first = last;
    }
    acc.finish(space, &times).map_err(ProbeError::numerical("dynamics"))
}

#[derive(Serialize)]
struct EvolveSummary {
    method: Method,
    stats: IntegratorStats,
    invariants: InvariantSummary,
    max_trace_distance: Option<f64>,
    master_stats: Option<IntegratorStats>,
}

fn run_evolve(cfg: &ExperimentConfig, drive: Drive) -> Result<Payloads, ProbeError> {
    let rho0 = cfg.initial_state()?;
    let times = cfg.times();
    let compare = cfg.numerics.compare_master && matches!(cfg.numerics.method, Method::Jumps { .. });
    let tr = match cfg.numerics.method {
        Method::Master => master(cfg, &rho0, &times, drive, false)?,
        Method::Jumps { n_traj } => jump_ensemble(cfg, drive, n_traj)?,
    };
    check_invariants(&tr.invariants, "evolution")?;
    let (distances, master_stats) = if compare {
        let reference = master(cfg, &rho0, &times, drive, true)?;
        let a = tr.states.as_ref().expect("ensemble keeps states");
        let b = reference.states.as_ref().expect("states requested");
        let d = a
            .iter()
            .zip(b)
            .map(|(x, y)| x.trace_distance(y))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ProbeError::numerical("hilbert"))?;
        (Some(d), Some(reference.stats))
    } else {
        (None, None)
    };
    let series = |name: &str| tr.observable(name).expect("standard observable").to_vec();
    let (n1, n1sq, photons, a) = (series("n1"), series("n1_sq"), series("photons"), series("a"));
    let mut header = vec!["t", "n1", "n1_sq", "photons", "a_re", "a_im"];
    if distances.is_some() {
        header.push("trace_distance");
    }
    let rows = (0..times.len()).map(|k| {
        let mut r = vec![
            num(times[k]),
            num(n1[k].re),
            num(n1sq[k].re),
            num(photons[k].re),
            num(a[k].re),
            num(a[k].im),
        ];
        if let Some(d) = &distances {
            r.push(num(d[k]));
        }
        r
    });
    let summary = EvolveSummary {
        method: cfg.numerics.method,
        stats: tr.stats,
        invariants: tr.invariants,
        max_trace_distance: distances.as_ref().map(|d| d.iter().cloned().fold(0.0, f64::max)),
        master_stats,
    };
    Ok(vec![
        ("observables.csv".into(), csv_bytes(&header, rows)),
        ("summary.json".into(), json_bytes(&summary)),
    ])
}

#[derive(Serialize)]
struct WignerSnapshot {
    file: String,
    t: f64,
    normalization: f64,
    purity_integral: f64,
    min_value: f64,
    ring_radius: Option<f64>,
    angular_std_at_ring: Option<f64>,
    angular_std_at_reference: f64,
    warning: Option<String>,
}

#[derive(Serialize)]
struct WignerSummary {
    /// `√2·|⟨a⟩(0)|`, the radius of the ring a dephased coherent input forms.
    reference_radius: f64,
    grid_half_width: f64,
    grid_points: usize,
    stats: IntegratorStats,
    invariants: InvariantSummary,
    snapshots: Vec<WignerSnapshot>,
}

fn run_wigner(cfg: &ExperimentConfig, drive: Drive, grid: Option<(f64, usize)>, lab_frame: bool) -> Result<Payloads, ProbeError> {
    let rho0 = cfg.initial_state()?;
    let times = cfg.times();
    let tr = master(cfg, &rho0, &times, drive, true)?;
    check_invariants(&tr.invariants, "evolution")?;
    let states = tr.states.as_ref().expect("states requested");
    let reduce = |s: &DensityMatrix, t: f64| {
        if lab_frame {
            lab_frame_cavity(s, cfg.params.omega_p, t)
        } else {
            reduce_to_cavity(s)
        }
    };
    let rc0 = reduce(&rho0, times[0]);
    let phase_grid = match grid {
        Some((w, n)) => PhaseGrid::symmetric(w, n).map_err(|e| ProbeError::Schema(format!("task.grid: {e}")))?,
        None => PhaseGrid::default_for(&rc0),
    };
    let a0 = rc0.matrix().trace_product(&annihilation_matrix(rc0.space().cav_cutoff()));
    let reference = std::f64::consts::SQRT_2 * a0.norm();
    let maps: Vec<_> = states
        .par_iter()
        .zip(times.par_iter())
        .map(|(s, &t)| wigner(&reduce(s, t), &phase_grid))
        .collect();
    let mut payloads = Vec::new();
    let mut snapshots = Vec::new();
    for (k, (map, &t)) in maps.iter().zip(&times).enumerate() {
        let file = format!("wigner_{k:03}.csv");
        let np = map.grid.p_values.len();
        let rows = map.grid.x_values.iter().enumerate().flat_map(|(ix, &x)| {
            map.grid
                .p_values
                .iter()
                .enumerate()
                .map(move |(ip, &p)| vec![num(x), num(p), num(map.values[ix * np + ip])])
        });
        payloads.push((file.clone(), csv_bytes(&["x", "p", "w"], rows)));
        let ring = ring_radius_diagnostic(map).ok();
        snapshots.push(WignerSnapshot {
            file,
            t,
            normalization: map.normalization,
            purity_integral: map.purity_integral(),
            min_value: map.values.iter().cloned().fold(f64::INFINITY, f64::min),
            ring_radius: ring,
            angular_std_at_ring: ring.map(|r| map.angular_std(r)),
            angular_std_at_reference: map.angular_std(reference),
            warning: map.warning.clone(),
        });
    }
    let summary = WignerSummary {
        reference_radius: reference,
        grid_half_width: *phase_grid.x_values.last().expect("non-empty grid"),
        grid_points: phase_grid.x_values.len(),
        stats: tr.stats,
        invariants: tr.invariants,
        snapshots,
    };
    payloads.push(("summary.json".into(), json_bytes(&summary)));
    Ok(payloads)
}

#[derive(Serialize)]
struct TrackSummary {
    n_atoms: usize,
    xi_window: [f64; 2],
    xi_m: f64,
    xi_q: f64,
    xi_m_over_n: f64,
    xi_q_over_n2: f64,
    lag_window_start: f64,
    lag_n1: f64,
    lag_n1_sq: f64,
    lag_n1_times_gamma: f64,
    regime: RegimeReport,
    regime_status: RegimeStatus,
    stats: IntegratorStats,
    invariants: InvariantSummary,
}

fn run_track(cfg: &ExperimentConfig, window: [f64; 2], lag_start: f64, lag_max: f64) -> Result<Payloads, ProbeError> {
    let rho0 = cfg.initial_state()?;
    let times = cfg.times();
    let (s, tr) = benchmark_run(&cfg.params, &rho0, &times, cfg.numerics.solver).map_err(ProbeError::numerical("probe_mapping"))?;
    check_invariants(&tr.invariants, "evolution")?;
    let pm = ProbeError::numerical;
    let (xi_m, xi_q) = discrepancy_xi(&s, window[0], window[1]).map_err(pm("probe_mapping"))?;
    let lag_n1 = cross_correlation_lag(&s.times, &s.n1_exact, &s.n1_est, lag_start, lag_max).map_err(pm("probe_mapping"))?;
    let lag_n1_sq =
        cross_correlation_lag(&s.times, &s.n1sq_exact, &s.n1sq_est, lag_start, lag_max).map_err(pm("probe_mapping"))?;
    let n = rho0.space().n_atoms();
    let regime = regime_check(&cfg.params, &rho0);
    let rows = (0..s.len()).map(|k| {
        vec![
            num(s.times[k]),
            num(s.n1_exact[k]),
            num(s.n1_est[k]),
            num(s.n1sq_exact[k]),
            num(s.n1sq_est[k]),
        ]
    });
    let nf = n.max(1) as f64;
    let summary = TrackSummary {
        n_atoms: n,
        xi_window: window,
        xi_m,
        xi_q,
        xi_m_over_n: xi_m / nf,
        xi_q_over_n2: xi_q / (nf * nf),
        lag_window_start: lag_start,
        lag_n1,
        lag_n1_sq,
        lag_n1_times_gamma: lag_n1 * cfg.params.gamma,
        regime_status: regime.worst(),
        regime,
        stats: tr.stats,
        invariants: tr.invariants,
    };
    Ok(vec![
        (
            "series.csv".into(),
            csv_bytes(&["t", "n1_exact", "n1_est", "n1sq_exact", "n1sq_est"], rows),
        ),
        ("summary.json".into(), json_bytes(&summary)),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchStats {
    pub mean: f64,
    pub std_error: f64,
    pub max: f64,
}

impl BatchStats {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
            max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Largest batch-mean difference over all pairs, in units of the pair's
/// pooled standard error.
pub fn worst_batch_shift(batches: &[BatchStats]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..batches.len() {
        for j in i + 1..batches.len() {
            let se = (batches[i].std_error.powi(2) + batches[j].std_error.powi(2)).sqrt();
            let d = (batches[i].mean - batches[j].mean).abs();
            let r = if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
        }
    }
    worst
}

#[derive(Serialize)]
struct XiSummary {
    n_atoms: usize,
    n_states: usize,
    xi_window: [f64; 2],
    max_xi_m: f64,
    max_xi_q: f64,
    max_xi_m_over_n: f64,
    max_xi_q_over_n2: f64,
    batches_m: Vec<BatchStats>,
    batches_q: Vec<BatchStats>,
    /// Batch-mean shift over pooled standard error.
    shift_m: f64,
    shift_q: f64,
}

fn run_xi_scan(cfg: &ExperimentConfig, n_states: usize, batches: usize, window: [f64; 2]) -> Result<Payloads, ProbeError> {
    let space = cfg.composite_space()?;
    let setup = XiSetup {
        params: cfg.params,
        space,
        t_grid: cfg.times(),
        t0: window[0],
        t1: window[1],
        seed: cfg.seed,
        solver: cfg.numerics.solver,
    };
    let samples: Vec<XiSample> = (0..n_states as u64)
        .into_par_iter()
        .map(|i| setup.sample(i))
        .collect::<Result<_, _>>()
        .map_err(ProbeError::numerical("probe_mapping"))?;
    let per = n_states / batches;
    let rows = samples
        .iter()
        .map(|s| vec![s.index.to_string(), (s.index as usize / per).to_string(), num(s.xi_m), num(s.xi_q)]);
    let stats = |f: fn(&XiSample) -> f64| -> Vec<BatchStats> {
        samples
            .chunks(per)
            .map(|c| BatchStats::of(&c.iter().map(f).collect::<Vec<_>>()))
            .collect()
    };
    let (bm, bq) = (stats(|s| s.xi_m), stats(|s| s.xi_q));
    let max_m = samples.iter().map(|s| s.xi_m).fold(f64::NEG_INFINITY, f64::max);
    let max_q = samples.iter().map(|s| s.xi_q).fold(f64::NEG_INFINITY, f64::max);
    let nf = space.n_atoms().max(1) as f64;
    let summary = XiSummary {
        n_atoms: space.n_atoms(),
        n_states,
        xi_window: window,
        max_xi_m: max_m,
        max_xi_q: max_q,
        max_xi_m_over_n: max_m / nf,
        max_xi_q_over_n2: max_q / (nf * nf),
        shift_m: worst_batch_shift(&bm),
        shift_q: worst_batch_shift(&bq),
        batches_m: bm,
        batches_q: bq,
    };
    Ok(vec![
        ("xi.csv".into(), csv_bytes(&["index", "batch", "xi_m", "xi_q"], rows)),
        ("summary.json".into(), json_bytes(&summary)),
    ])
}

fn model(cfg: &ExperimentConfig) -> Result<DrivenCavityModel, ProbeError> {
    Ok(DrivenCavityModel::new(cfg.params, cfg.initial_state()?).with_solver(cfg.numerics.solver))
}

#[derive(Serialize)]
struct MeasurementFisher {
    parameter: String,
    t: f64,
    qfi: f64,
    /// Classical Fisher information per measurement label.
    fisher: BTreeMap<String, f64>,
    leakage: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct QfiSingleOutput {
    reports: Vec<QfiReport>,
    measurements: Vec<MeasurementFisher>,
}

fn split_label(s: &SplitStatus) -> &'static str {
    match s {
        SplitStatus::Consistent { .. } => "consistent",
        SplitStatus::Degenerate { .. } => "degenerate",
        SplitStatus::PairingFault { .. } => "pairing_fault",
        SplitStatus::Inconsistent { .. } => "inconsistent",
        SplitStatus::NotRequested => "not_requested",
    }
}

fn run_qfi_single(cfg: &ExperimentConfig, parameters: &[String], povm: Option<&crate::config::PovmSpec>) -> Result<Payloads, ProbeError> {
    let fam = model(cfg)?;
    let times = cfg.times();
    let est = ProbeError::numerical("estimation");
    let analyses: Vec<_> = parameters
        .par_iter()
        .map(|p| analyze(&fam, &[p.as_str()], &times, &cfg.numerics.qfi))
        .collect::<Result<_, _>>()
        .map_err(est)?;
    let mut reports = Vec::new();
    let mut measurements = Vec::new();
    let mut rows = Vec::new();
    for (name, a) in parameters.iter().zip(&analyses) {
        for (k, rep) in a.reports.iter().enumerate() {
            let rho = &a.states[k];
            let mut fisher = BTreeMap::new();
            let mut leakage = BTreeMap::new();
            if let Some(spec) = povm {
                let dim = rho.dim();
                let drho = &a.derivatives[0][k].derivative;
                let povms = [
                    Povm::photon_number(dim),
                    Povm::quadrature_bins(dim, &spec.quadrature_edges, spec.theta).map_err(ProbeError::numerical("estimation"))?,
                    Povm::eigenbasis("sld_eigenbasis", &a.slds[0][k]).map_err(ProbeError::numerical("estimation"))?,
                ];
                for m in &povms {
                    let f = classical_fisher(rho, drho, m).map_err(ProbeError::numerical("estimation"))?;
                    fisher.insert(m.label.clone(), f.fisher);
                    leakage.insert(m.label.clone(), f.leakage);
                }
            }
            let h = rep.qfi[0][0];
            let split = &rep.splits[0];
            let f = |l: &str| opt(fisher.get(l).copied());
            rows.push(vec![
                name.clone(),
                num(rep.values[0]),
                num(rep.time),
                num(h),
                opt(split.classical),
                opt(split.quantum),
                split_label(&split.status).to_string(),
                opt(rep.cramer_rao(1).ok()),
                f("photon_number"),
                f("quadrature_bins"),
                f("sld_eigenbasis"),
            ]);
            measurements.push(MeasurementFisher {
                parameter: name.clone(),
                t: rep.time,
                qfi: h,
                fisher,
                leakage,
            });
            reports.push(rep.clone());
        }
    }
    let header = [
        "parameter",
        "value",
        "t",
        "qfi",
        "classical",
        "quantum",
        "split_status",
        "cramer_rao_m1",
        "f_photon_number",
        "f_quadrature_bins",
        "f_sld_eigenbasis",
    ];
    Ok(vec![
        ("qfi.csv".into(), csv_bytes(&header, rows)),
        (
            "reports.json".into(),
            json_bytes(&QfiSingleOutput { reports, measurements }),
        ),
    ])
}

const LAMBDA_HEADER: [&str; 10] = [
    "t",
    "h_rr",
    "h_rk",
    "h_kk",
    "lambda_r",
    "lambda_kappa",
    "lambda_mp",
    "lambda_mp_reciprocal",
    "lambda_se",
    "se_minus_mp",
];

fn lambda_cells(t: f64, h: &[Vec<f64>], f: &LambdaFigures) -> Vec<String> {
    vec![
        num(t),
        num(h[0][0]),
        num(h[0][1]),
        num(h[1][1]),
        num(f.lambda_r),
        num(f.lambda_kappa),
        opt(f.lambda_mp),
        num(f.lambda_mp_reciprocal),
        num(f.lambda_se),
        opt(f.lambda_mp.map(|mp| f.lambda_se - mp)),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanePoint {
    pub r_tun: f64,
    pub kappa: f64,
    pub time: f64,
    pub qfi: Vec<Vec<f64>>,
    pub figures: LambdaFigures,
}

#[derive(Serialize)]
struct PlaneAverage {
    time: f64,
    lambda_mp: Option<f64>,
    lambda_se: f64,
    /// Share of points where the sequential figure is the lower one.
    fraction_se_below_mp: f64,
}

fn run_qfi_multi(cfg: &ExperimentConfig, r_grid: &[f64], k_grid: &[f64]) -> Result<Payloads, ProbeError> {
    let fam = model(cfg)?;
    let times = cfg.times();
    let settings = QfiSettings {
        split: false,
        ..cfg.numerics.qfi
    };
    let pairs: Vec<(f64, f64)> = r_grid.iter().flat_map(|&r| k_grid.iter().map(move |&k| (r, k))).collect();
    let points: Vec<Vec<PlanePoint>> = pairs
        .par_iter()
        .map(|&(r, k)| -> bjj_probe::Result<Vec<PlanePoint>> {
            let f = fam.with_parameter(PARAM_R, r)?.with_parameter(PARAM_KAPPA, k)?;
            let beta = f.parameter("beta")?;
            let a = analyze(&f, &[PARAM_R, PARAM_KAPPA], &times, &settings)?;
            a.reports
                .into_iter()
                .map(|rep| {
                    let figures = lambda_figures(rep.qfi[0][0], rep.qfi[1][1], &rep.qfi, beta)?;
                    Ok(PlanePoint {
                        r_tun: r,
                        kappa: k,
                        time: rep.time,
                        qfi: rep.qfi,
                        figures,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()
        .map_err(ProbeError::numerical("estimation"))?;
    let points: Vec<PlanePoint> = points.into_iter().flatten().collect();
    let mut header = vec!["r_tun", "kappa"];
    header.extend_from_slice(&LAMBDA_HEADER);
    let rows = points.iter().map(|p| {
        let mut r = vec![num(p.r_tun), num(p.kappa)];
        r.extend(lambda_cells(p.time, &p.qfi, &p.figures));
        r
    });
    let averages: Vec<PlaneAverage> = times
        .iter()
        .map(|&t| {
            let sel: Vec<&PlanePoint> = points.iter().filter(|p| p.time == t).collect();
            let n = sel.len() as f64;
            let mp: Option<Vec<f64>> = sel.iter().map(|p| p.figures.lambda_mp).collect();
            let below = sel
                .iter()
                .filter(|p| p.figures.lambda_mp.is_some_and(|mp| p.figures.lambda_se < mp))
                .count();
            PlaneAverage {
                time: t,
                lambda_mp: mp.map(|v| v.iter().sum::<f64>() / n),
                lambda_se: sel.iter().map(|p| p.figures.lambda_se).sum::<f64>() / n,
                fraction_se_below_mp: below as f64 / n,
            }
        })
        .collect();
    #[derive(Serialize)]
    struct Plane<'a> {
        averages: Vec<PlaneAverage>,
        points: &'a [PlanePoint],
    }
    Ok(vec![
        ("lambda_plane.csv".into(), csv_bytes(&header, rows)),
        (
            "lambda_plane.json".into(),
            json_bytes(&Plane {
                averages,
                points: &points,
            }),
        ),
    ])
}

/// Sign changes of `Λ_se − Λ_mp` along the scan at one time.
fn sign_changes(table: &LambdaTable, t: f64) -> usize {
    let d: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.time == t)
        .filter_map(|r| r.figures.lambda_mp.map(|mp| r.figures.lambda_se - mp))
        .collect();
    d.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count()
}

#[derive(Serialize)]
struct ScanComparison {
    time: f64,
    se_below_mp: Option<bool>,
    sign_changes: usize,
    /// Range of each single-parameter figure across the scan.
    range_lambda_r: f64,
    range_lambda_kappa: f64,
}

fn run_lambda_scan(cfg: &ExperimentConfig, scanned: &str, grid: &[f64]) -> Result<Payloads, ProbeError> {
    let fam = model(cfg)?;
    let times = cfg.times();
    let rows: Vec<_> = grid
        .par_iter()
        .map(|&mu| lambda_rows(&fam, scanned, mu, &times, &cfg.numerics.qfi))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ProbeError::numerical("estimation"))?;
    let table = LambdaTable::assemble(scanned, rows.into_iter().flatten().collect(), &times);
    let mut header = vec!["mu"];
    header.extend_from_slice(&LAMBDA_HEADER);
    let csv_rows = table.rows.iter().map(|r| {
        let mut c = vec![num(r.mu)];
        c.extend(lambda_cells(r.time, &r.qfi, &r.figures));
        c
    });
    let avg_rows = table.averages.iter().map(|a| {
        vec![
            num(a.time),
            num(a.lambda_r),
            num(a.lambda_kappa),
            opt(a.lambda_mp),
            num(a.lambda_mp_reciprocal),
            num(a.lambda_se),
        ]
    });
    let range = |t: f64, f: fn(&LambdaFigures) -> f64| {
        let v: Vec<f64> = table.rows.iter().filter(|r| r.time == t).map(|r| f(&r.figures)).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let comparisons: Vec<ScanComparison> = table
        .averages
        .iter()
        .map(|a| ScanComparison {
            time: a.time,
            se_below_mp: a.lambda_mp.map(|mp| a.lambda_se < mp),
            sign_changes: sign_changes(&table, a.time),
            range_lambda_r: range(a.time, |f| f.lambda_r),
            range_lambda_kappa: range(a.time, |f| f.lambda_kappa),
        })
        .collect();
    #[derive(Serialize)]
    struct ScanOutput<'a> {
        table: &'a LambdaTable,
        comparisons: Vec<ScanComparison>,
    }
    Ok(vec![
        ("lambda.csv".into(), csv_bytes(&header, csv_rows)),
        (
            "averages.csv".into(),
            csv_bytes(
                &["t", "lambda_r", "lambda_kappa", "lambda_mp", "lambda_mp_reciprocal", "lambda_se"],
                avg_rows,
            ),
        ),
        (
            "lambda.json".into(),
            json_bytes(&ScanOutput {
                table: &table,
                comparisons,
            }),
        ),
    ])
}

/// The `Λ` table of a finished lambda-scan bundle.
pub fn lambda_table(bundle: &ResultBundle) -> Option<LambdaTable> {
    let v = bundle.json("lambda.json")?;
    serde_json::from_value(v.get("table")?.clone()).ok()
}
