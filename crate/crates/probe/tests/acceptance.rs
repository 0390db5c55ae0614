//! Acceptance suite: one line per criterion with its pinned tolerance.
//!
//! Runs as a plain binary (`harness = false`). Set `BJJ_ACCEPTANCE_FULL=1`
//! for the 100-state histograms; the default is the 20-state smoke version.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::rc::Rc;

use bjj_probe::dynamics::{evolve_master, Drive, ModelParams, Solver};
use bjj_probe::estimation::{
    analyze, classical_fisher, qfi_single, ClosureFamily, DrivenCavityModel, Povm, QfiSettings, SplitStatus,
    StateFamily, PARAM_KAPPA, PARAM_R,
};
use bjj_probe::hilbert::{
    atomic_fock, cavity_fock, coherent_state, product_state, CompositeSpace, DensityMatrix, PhysicalityTolerances,
};
use bjj_probe::phase_space::WignerKernel;
use bjj_probe::probe_mapping::{estimate_n1_mean, estimate_n1_sq, forward_quadratures, relative_steady_bias};
use bjj_probe::{CMatrix, C64};
use bjj_probe_cli::config::{Method, Task, TimeSpec};
use bjj_probe_cli::presets::{preset, two_atom_params};
use bjj_probe_cli::run::{lambda_table, META_FILE};
use bjj_probe_cli::{run, ExperimentConfig, ResultBundle};
use serde_json::Value;

/// Criteria expected to fail; the reasons are recorded with the project notes.
const KNOWN_FAILURES: &[usize] = &[9];

const N2_PRESETS: &[&str] = &[
    "fig6a", "fig6a_text", "fig6b", "fig6b_text", "fig7a", "fig7b", "fig8a", "fig8b",
];

struct Outcome {
    pass: bool,
    detail: String,
    tolerance: &'static str,
}

type Check = Result<Outcome, String>;

struct Suite {
    full: bool,
    cache: RefCell<BTreeMap<String, Rc<ResultBundle>>>,
}

impl Suite {
    fn config(&self, name: &str) -> Result<ExperimentConfig, String> {
        let mut cfg = preset(name).ok_or_else(|| format!("no preset {name}"))?;
        if let Task::XiScan { n_states, .. } = &mut cfg.task {
            if !self.full {
                *n_states = 20;
            }
        }
        Ok(cfg)
    }

    fn bundle(&self, name: &str) -> Result<Rc<ResultBundle>, String> {
        if let Some(b) = self.cache.borrow().get(name) {
            return Ok(b.clone());
        }
        let cfg = self.config(name)?;
        let b = Rc::new(run(&cfg).map_err(|e| format!("{name}: {e}"))?);
        self.cache.borrow_mut().insert(name.to_string(), b.clone());
        Ok(b)
    }

    fn summary(&self, name: &str, file: &str) -> Result<Value, String> {
        self.bundle(name)?
            .json(file)
            .ok_or_else(|| format!("{name}: no {file}"))
    }
}

fn field(v: &Value, key: &str) -> Result<f64, String> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("missing `{key}`"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// 1

fn physicality(s: &Suite) -> Check {
    let tol = PhysicalityTolerances::evolved();
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut bad = Vec::new();
    for name in ["fig2", "fig3a", "fig3b", "fig3c", "fig3d"] {
        let inv = s.summary(name, "summary.json")?["invariants"].clone();
        let t = field(&inv, "max_trace_error")?;
        let h = field(&inv, "max_hermiticity_error")?;
        let pos = inv["all_positive"].as_bool().unwrap_or(false);
        worst_trace = worst_trace.max(t);
        worst_herm = worst_herm.max(h);
        if !pos || t > tol.trace || h > tol.hermiticity {
            bad.push(name.to_string());
        }
    }
    let mut states = 0usize;
    for &name in N2_PRESETS {
        let cfg = s.config(name)?;
        let rho0 = cfg.initial_state().map_err(|e| e.to_string())?;
        let times = cfg.times();
        let points: Vec<ModelParams> = match &cfg.task {
            Task::LambdaScan { scanned, grid } => grid
                .grid()
                .iter()
                .map(|&mu| cfg.params.with(scanned, mu))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?,
            Task::QfiMulti { r_tun, kappa } => {
                let mut v = Vec::new();
                for &r in &r_tun.grid() {
                    for &k in &kappa.grid() {
                        v.push(two_atom_params(r, k));
                    }
                }
                v
            }
            _ => return Err(format!("{name}: unexpected task")),
        };
        for p in points {
            let fam = DrivenCavityModel::new(p, rho0.clone())
                .with_solver(cfg.numerics.solver)
                .joint(true);
            for m in fam.states(&times).map_err(|e| e.to_string())? {
                let rho = DensityMatrix::new_unchecked(rho0.space(), m).map_err(|e| e.to_string())?;
                let ph = rho.physicality(&tol);
                let e = rho.min_eigenvalue().map_err(|e| e.to_string())?;
                worst_trace = worst_trace.max(ph.trace_error);
                worst_herm = worst_herm.max(ph.hermiticity_error);
                min_eig = min_eig.min(e);
                states += 1;
                if !ph.within(&tol) || e < -tol.min_eigenvalue {
                    bad.push(format!("{name}@{p:?}"));
                }
            }
        }
    }
    Ok(Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "fig2, fig3a-d bundles and {states} two-atom states; worst trace error {worst_trace:.1e}, hermiticity {worst_herm:.1e}, min eigenvalue {min_eig:.1e}{}",
            if bad.is_empty() { String::new() } else { format!("; violations in {bad:?}") }
        ),
        tolerance: "trace 1e-8, hermiticity 1e-9, eigenvalues >= -1e-8",
    })
}

// 2

fn analytic_oracles(_: &Suite) -> Check {
    let err = |e: bjj_probe::Error| e.to_string();
    let exp = Solver::exponential();
    let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();

    let sp = CompositeSpace::new(0, 20);
    let (cav, _) = coherent_state(20, C64::new(1.5, 0.0));
    let psi = product_state(sp, &atomic_fock(0, 0).map_err(err)?, &cav).map_err(err)?;
    let rho = DensityMatrix::from_pure(sp, &psi).map_err(err)?;
    let p = ModelParams {
        gamma: 1.0,
        ..ModelParams::default()
    };
    let tr = evolve_master(&rho, &times, &p, Drive::Off, &exp.options(sp)).map_err(err)?;
    let photons = tr.real_series("photons").ok_or("no photons")?;
    let damped = times
        .iter()
        .zip(&photons)
        .map(|(&t, &n)| rel(n, 2.25 * (-t).exp()))
        .fold(0.0, f64::max);

    let sp = CompositeSpace::new(1, 0);
    let psi = product_state(sp, &atomic_fock(1, 1).map_err(err)?, &cavity_fock(0, 0).map_err(err)?).map_err(err)?;
    let rho = DensityMatrix::from_pure(sp, &psi).map_err(err)?;
    let r = 0.7;
    let p = ModelParams {
        r_tun: r,
        gamma: 1.0,
        ..ModelParams::default()
    };
    let tr = evolve_master(&rho, &times, &p, Drive::Off, &exp.options(sp)).map_err(err)?;
    let n1 = tr.real_series("n1").ok_or("no n1")?;
    let rabi = times
        .iter()
        .zip(&n1)
        .map(|(&t, &n)| (n - (r * t).cos().powi(2)).abs())
        .fold(0.0, f64::max);

    let cav = CompositeSpace::cavity(10);
    let w = |n: usize| -> Result<f64, String> {
        let rho = DensityMatrix::from_pure(cav, &cavity_fock(10, n).map_err(err)?).map_err(err)?;
        Ok(WignerKernel::new(&rho).eval(0.0, 0.0))
    };
    let inv_pi = std::f64::consts::FRAC_1_PI;
    let w_err = (w(0)? - inv_pi).abs().max((w(1)? + inv_pi).abs());

    let cut = 40;
    let (psi, _) = coherent_state(cut, C64::new(1.5, 0.0));
    let fam = ClosureFamily::new(&["theta"], &[0.3], move |v: &[f64], _t: f64| {
        Ok(CMatrix::from_fn(cut + 1, |n, m| {
            psi[n] * psi[m].conj() * C64::from_polar(1.0, -((n as f64) - (m as f64)) * v[0])
        }))
    })
    .map_err(err)?;
    let h = qfi_single(&fam, "theta", 0.0, &QfiSettings::default()).map_err(err)?.qfi[0][0];
    let qfi_err = rel(h, 9.0);

    Ok(Outcome {
        pass: damped <= 1e-6 && rabi <= 1e-6 && w_err <= 1e-6 && qfi_err <= 1e-4,
        detail: format!(
            "damped cavity rel {damped:.1e}, Rabi abs {rabi:.1e}, Wigner origin {w_err:.1e}, phase QFI {h:.6} (rel {qfi_err:.1e})"
        ),
        tolerance: "1e-6 rel, 1e-6, 1e-6, 1e-4 rel",
    })
}

// 3

fn jump_run(cfg: &ExperimentConfig, n_traj: usize, seed: u64) -> Result<f64, String> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    cfg.numerics.method = Method::Jumps { n_traj };
    cfg.numerics.compare_master = true;
    let b = run(&cfg).map_err(|e| e.to_string())?;
    field(&b.json("summary.json").ok_or("no summary")?, "max_trace_distance")
}

fn jump_equivalence(s: &Suite) -> Check {
    let bare = s.config("bare_cavity")?;
    let sizes = [250usize, 1000, 4000];
    let seeds = [1u64, 2, 3];
    let mut td = vec![[0.0; 3]; seeds.len()];
    for (i, &seed) in seeds.iter().enumerate() {
        for (j, &n) in sizes.iter().enumerate() {
            td[i][j] = jump_run(&bare, n, seed)?;
        }
    }
    let mean: Vec<f64> = (0..3).map(|j| td.iter().map(|r| r[j]).sum::<f64>() / 3.0).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = sizes.iter().zip(&mean).map(|(&n, &d)| ((n as f64).ln(), d.ln())).unzip();
    let slope = fit_slope(&xs, &ys);
    let worst_bare = td.iter().map(|r| r[2]).fold(0.0, f64::max);

    let mut f3 = s.config("fig3a")?;
    f3.task = Task::Evolve { drive: Drive::On };
    f3.time = TimeSpec::Uniform {
        start: 0.0,
        stop: 1.0,
        points: 51,
    };
    let td_f3 = jump_run(&f3, 4000, 1)?;

    Ok(Outcome {
        pass: worst_bare <= 0.08 && td_f3 <= 0.08 && (slope + 0.5).abs() <= 0.15,
        detail: format!(
            "bare cavity max TD at 4000 over seeds 1-3 {worst_bare:.4}, seed-mean TD {:.4}/{:.4}/{:.4} at 250/1000/4000, slope {slope:.3}; fig3a max TD {td_f3:.1e}",
            mean[0], mean[1], mean[2]
        ),
        tolerance: "TD <= 0.08, slope -0.5 +- 0.15",
    })
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

// 4

fn estimator_round_trip(s: &Suite) -> Check {
    let err = |e: bjj_probe::Error| e.to_string();
    let p = s.config("fig3a")?.params;
    let eps = f64::EPSILON;
    let sq_scale = p.gamma * p.gamma / (4.0 * p.beta * p.beta);
    let mut worst_m: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    let mut ok = true;
    for n in 0..=30 {
        let v = n as f64;
        let qm = forward_quadratures(v, v * v, &p).map_err(err)?;
        let dm = (estimate_n1_mean(&qm, &p).map_err(err)? - v).abs();
        let dq = (estimate_n1_sq(&qm, &p).map_err(err)? - v * v).abs();
        ok &= dm <= 4.0 * eps * v.max(1.0) && dq <= 4.0 * eps * sq_scale;
        worst_m = worst_m.max(dm / v.max(1.0));
        worst_q = worst_q.max(dq / sq_scale);
    }
    let ratios: Vec<f64> = (0..=8).map(|k| 1e-5 * 10f64.powf(k as f64 * 0.25)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in &ratios {
        let q = ModelParams {
            beta: r * p.gamma,
            ..p
        };
        xs.push(r.ln());
        ys.push(relative_steady_bias(15.0, &q).map_err(err)?.ln());
    }
    let slope = fit_slope(&xs, &ys);
    Ok(Outcome {
        pass: ok && (slope - 2.0).abs() <= 0.1,
        detail: format!(
            "n1 = 0..30: mean error {worst_m:.1e} (rel), square error {worst_q:.1e} (of gamma^2/4beta^2); bias slope {slope:.4} over beta/gamma 1e-5..1e-3"
        ),
        tolerance: "4 eps, slope 2 +- 0.1",
    })
}

// 5

fn tracking(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["fig3a", "fig3c"] {
        let v = s.summary(name, "summary.json")?;
        let xm = field(&v, "xi_m_over_n")?;
        let lag = field(&v, "lag_n1_times_gamma")?;
        pass &= xm < 0.05 && (1.0 / 3.0..=3.0).contains(&lag);
        parts.push(format!("{name} xi_m/N {xm:.4}, lag*gamma {lag:.3}"));
    }
    Ok(Outcome {
        pass,
        detail: parts.join("; "),
        tolerance: "xi_m/N < 0.05, lag*gamma in [1/3, 3]",
    })
}

// 6

fn histograms(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["fig4", "fig5"] {
        let v = s.summary(name, "summary.json")?;
        let m = field(&v, "max_xi_m_over_n")?;
        let q = field(&v, "max_xi_q_over_n2")?;
        let sm = field(&v, "shift_m")?;
        let sq = field(&v, "shift_q")?;
        let n = field(&v, "n_states")?;
        pass &= m < 0.05 && q < 0.05 && sm < 2.0 && sq < 2.0;
        parts.push(format!("{name} ({n} states) max xi_m/N {m:.4}, max xi_q/N^2 {q:.4}, batch shifts {sm:.2}/{sq:.2}"));
    }
    Ok(Outcome {
        pass,
        detail: parts.join("; "),
        tolerance: "< 0.05 N, < 0.05 N^2, shift < 2 SE",
    })
}

// 7

fn qfi_cross_validation(_: &Suite) -> Check {
    let err = |e: bjj_probe::Error| e.to_string();
    let cfg = preset("qfi_two_atoms").ok_or("no preset")?;
    let rho0 = cfg.initial_state().map_err(|e| e.to_string())?;
    let settings = QfiSettings::default();
    let edges: Vec<f64> = (0..7).map(|k| -3.0 + k as f64).collect();
    let (g1, g2, g3) = (0.819_172_513_396_164_4, 0.671_043_606_703_789_2, 0.549_700_477_901_970_2);
    let mut split_worst: f64 = 0.0;
    let mut sld_worst: f64 = 0.0;
    let mut excess: f64 = f64::NEG_INFINITY;
    let mut skipped = 0;
    let mut bad = Vec::new();
    for k in 1..=20 {
        let kf = k as f64;
        let r = 0.05 + 0.95 * (kf * g1).fract();
        let kappa = 0.05 + 0.95 * (kf * g2).fract();
        let t = 1.0 + 9.0 * (kf * g3).fract();
        let fam = DrivenCavityModel::new(two_atom_params(r, kappa), rho0.clone());
        for name in [PARAM_R, PARAM_KAPPA] {
            let a = analyze(&fam, &[name], &[t], &settings).map_err(err)?;
            let h = a.reports[0].qfi[0][0];
            match &a.reports[0].splits[0].status {
                SplitStatus::Consistent { relative } | SplitStatus::Inconsistent { relative } => {
                    split_worst = split_worst.max(*relative);
                    if *relative > 1e-3 {
                        bad.push(format!("split {name} at point {k}"));
                    }
                }
                SplitStatus::Degenerate { .. } | SplitStatus::PairingFault { .. } => skipped += 1,
                SplitStatus::NotRequested => return Err("split not computed".into()),
            }
            let rho = &a.states[0];
            let drho = &a.derivatives[0][0].derivative;
            let dim = rho.dim();
            let f_sld = classical_fisher(rho, drho, &Povm::eigenbasis("sld", &a.slds[0][0]).map_err(err)?)
                .map_err(err)?
                .fisher;
            let d = rel(f_sld, h);
            sld_worst = sld_worst.max(d);
            if d > 1e-3 {
                bad.push(format!("sld povm {name} at point {k}"));
            }
            for povm in [
                Povm::photon_number(dim),
                Povm::quadrature_bins(dim, &edges, 0.0).map_err(err)?,
            ] {
                let f = classical_fisher(rho, drho, &povm).map_err(err)?.fisher;
                let x = (f - h) / h;
                excess = excess.max(x);
                if x > 1e-9 {
                    bad.push(format!("{} exceeds H for {name} at point {k}", povm.label));
                }
            }
        }
    }
    Ok(Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "20 points x 2 parameters: split rel {split_worst:.1e} ({skipped} degenerate skipped), SLD-basis F/H rel {sld_worst:.1e}, max (F-H)/H for photon/8-bin quadrature {excess:.2}{}",
            if bad.is_empty() { String::new() } else { format!("; {bad:?}") }
        ),
        tolerance: "1e-3 rel, 1e-3 rel, F <= H",
    })
}

// 8

struct Fig6 {
    all_lower: bool,
    range: f64,
    drop: f64,
}

fn fig6_stats(s: &Suite, name: &str) -> Result<Fig6, String> {
    let table = lambda_table(&*s.bundle(name)?).ok_or("no lambda table")?;
    let own = |f: &bjj_probe::estimation::LambdaFigures| {
        if table.scanned == PARAM_KAPPA {
            f.lambda_kappa
        } else {
            f.lambda_r
        }
    };
    let at = |t: f64| -> Vec<(f64, f64, f64)> {
        table
            .rows
            .iter()
            .filter(|r| r.time == t)
            .map(|r| (own(&r.figures), r.figures.lambda_r, r.figures.lambda_kappa))
            .collect()
    };
    let (early, late) = (at(1.0), at(10.0));
    if early.is_empty() || early.len() != late.len() {
        return Err(format!("{name}: missing t = 1 or t = 10 rows"));
    }
    let all_lower = early.iter().zip(&late).all(|(a, b)| b.1 < a.1 && b.2 < a.2);
    let own_late: Vec<f64> = late.iter().map(|x| x.0).collect();
    let range = own_late.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - own_late.iter().cloned().fold(f64::INFINITY, f64::min);
    let drop = early.iter().zip(&late).map(|(a, b)| a.0 - b.0).sum::<f64>() / early.len() as f64;
    Ok(Fig6 { all_lower, range, drop })
}

fn fig6(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["fig6a", "fig6b", "fig6a_text", "fig6b_text"] {
        let f = fig6_stats(s, name)?;
        let ok = f.all_lower && f.range < f.drop;
        let gated = !name.ends_with("_text");
        if gated {
            pass &= ok;
        }
        parts.push(format!(
            "{name}{} lower at t=10 everywhere: {}, range {:.2} vs drop {:.2}{}",
            if gated { "" } else { " (informational)" },
            f.all_lower,
            f.range,
            f.drop,
            if ok { "" } else { " MISS" }
        ));
    }
    Ok(Outcome {
        pass,
        detail: parts.join("; "),
        tolerance: "Lambda(10) < Lambda(1) at every mu; range at t=10 < mean drop",
    })
}

// 9

fn fig8(s: &Suite) -> Check {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["fig8a", "fig8b"] {
        let table = lambda_table(&*s.bundle(name)?).ok_or("no lambda table")?;
        let avg = table.averages.iter().find(|a| a.time == 10.0).ok_or("no t=10 average")?;
        let mp = avg.lambda_mp.ok_or("singular QFI matrix on the scan")?;
        pass &= avg.lambda_se < mp;
        parts.push(format!("{name} mean Lambda_se {:.3} vs Lambda_mp {mp:.3}", avg.lambda_se));
    }
    Ok(Outcome {
        pass,
        detail: parts.join("; "),
        tolerance: "strict Lambda_se < Lambda_mp on scan averages",
    })
}

// 10

fn files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        let name = e.file_name().to_string_lossy().into_owned();
        if name != META_FILE {
            out.insert(name, fs::read(e.path()).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn determinism(s: &Suite) -> Check {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .map_err(|e| e.to_string())?;
    let mut differing = Vec::new();
    let mut count = 0;
    for p in bjj_probe_cli::presets::catalog() {
        let first;
        let second;
        if matches!(p.config.task, Task::XiScan { .. }) {
            let mut cfg = p.config.clone();
            if let Task::XiScan { n_states, .. } = &mut cfg.task {
                *n_states = if s.full { 100 } else { 4 };
            }
            first = Rc::new(run(&cfg).map_err(|e| e.to_string())?);
            second = pool.install(|| run(&cfg)).map_err(|e| e.to_string())?;
        } else {
            first = s.bundle(p.name)?;
            let cfg = s.config(p.name)?;
            second = pool.install(|| run(&cfg)).map_err(|e| e.to_string())?;
        }
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        first.write(a.path()).map_err(|e| e.to_string())?;
        second.write(b.path()).map_err(|e| e.to_string())?;
        if files(a.path())? != files(b.path())? {
            differing.push(p.name);
        }
        count += 1;
    }
    Ok(Outcome {
        pass: differing.is_empty(),
        detail: format!(
            "{count} presets rerun on a 3-thread pool{}; {}",
            if s.full { "" } else { ", xi scans on 4 states" },
            if differing.is_empty() {
                "all payload files identical".to_string()
            } else {
                format!("differing: {differing:?}")
            }
        ),
        tolerance: "byte-identical files except meta.json",
    })
}

fn main() -> ExitCode {
    let suite = Suite {
        full: std::env::var("BJJ_ACCEPTANCE_FULL").is_ok_and(|v| v == "1"),
        cache: RefCell::new(BTreeMap::new()),
    };
    let criteria: [(&str, fn(&Suite) -> Check); 10] = [
        ("physicality", physicality),
        ("analytic oracles", analytic_oracles),
        ("jump/master equivalence", jump_equivalence),
        ("estimator round trip", estimator_round_trip),
        ("fig3 tracking", tracking),
        ("fig4/5 histograms", histograms),
        ("QFI cross-validation", qfi_cross_validation),
        ("fig6 time dependence", fig6),
        ("fig8 sequential advantage", fig8),
        ("determinism", determinism),
    ];
    let mut unexpected = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        let known = KNOWN_FAILURES.contains(&id);
        let (pass, line) = match check(&suite) {
            Ok(o) => (o.pass, format!("{}: {} ({})", name, o.detail, o.tolerance)),
            Err(e) => (false, format!("{name}: error: {e}")),
        };
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = match (pass, known) {
            (false, true) => " [known failure]",
            (true, true) => " [listed as known failure but passed]",
            _ => "",
        };
        println!("criterion {id} [{tag}] {line}{note}");
        if !pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
