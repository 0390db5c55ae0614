//! Adaptive Dormand–Prince 5(4) integrator for complex-valued linear systems.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;
// inherent float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeRhs {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]);
}

impl<F: FnMut(f64, &[C64], &mut [C64])> OdeRhs for F {
    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self(t, y, dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    /// Smallest admissible step before the integrator gives up.
    #[serde(default = "default_h_min")]
    pub h_min: f64,
    /// Optional cap on the step size.
    #[serde(default)]
    pub h_max: Option<f64>,
}

fn default_h_min() -> f64 {
    1e-14
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            h_min: default_h_min(),
            h_max: None,
        }
    }
}

impl Tolerances {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Self {
            atol,
            rtol,
            ..Self::default()
        }
    }

    pub fn halved(&self) -> Self {
        Self {
            atol: self.atol * 0.5,
            rtol: self.rtol * 0.5,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Stage storage for one system size. The stepper keeps the FSAL derivative
/// of the last accepted step so consecutive steps cost six evaluations.
pub struct Dopri5 {
    n: usize,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    err: Vec<C64>,
    fsal_valid: bool,
    pub tol: Tolerances,
    pub stats: IntegratorStats,
}

impl Dopri5 {
    pub fn new(n: usize, tol: Tolerances) -> Self {
        Self {
            n,
            k: core::array::from_fn(|_| vec![C64::zero(); n]),
            ytmp: vec![C64::zero(); n],
            err: vec![C64::zero(); n],
            fsal_valid: false,
            tol,
            stats: IntegratorStats::default(),
        }
    }

    /// Forget the cached derivative (call after `y` is modified externally).
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    fn error_norm(&self, y: &[C64], ynew: &[C64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let sc = self.tol.atol + self.tol.rtol * y[i].norm().max(ynew[i].norm());
            let r = self.err[i].norm() / sc;
            acc += r * r;
        }
        (acc / self.n.max(1) as f64).sqrt()
    }

    /// One trial step of size `h` from `(t, y)`; writes the 5th order
    /// solution into `yout` and returns the scaled error norm.
    pub fn trial_step<F: OdeRhs>(
        &mut self,
        f: &mut F,
        t: f64,
        y: &[C64],
        h: f64,
        yout: &mut [C64],
    ) -> f64 {
        let n = self.n;
        if !self.fsal_valid {
            f.eval(t, y, &mut self.k[0]);
            self.stats.rhs_evals += 1;
            self.fsal_valid = true;
        }
        macro_rules! stage {
            ($dst:expr, $tc:expr, [$( ($a:expr, $ki:expr) ),*]) => {{
                for i in 0..n {
                    let mut s = C64::zero();
                    $( s += self.k[$ki][i] * $a; )*
                    self.ytmp[i] = y[i] + s * h;
                }
                f.eval(t + $tc * h, &self.ytmp, &mut self.k[$dst]);
                self.stats.rhs_evals += 1;
            }};
        }
        stage!(1, C2, [(A21, 0)]);
        stage!(2, C3, [(A31, 0), (A32, 1)]);
        stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
        stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
        stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
        for i in 0..n {
            let s = self.k[0][i] * A71
                + self.k[2][i] * A73
                + self.k[3][i] * A74
                + self.k[4][i] * A75
                + self.k[5][i] * A76;
            yout[i] = y[i] + s * h;
        }
        f.eval(t + h, yout, &mut self.k[6]);
        self.stats.rhs_evals += 1;
        for i in 0..n {
            let e = self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7;
            self.err[i] = e * h;
        }
        self.error_norm(y, yout)
    }

    /// Mark the last trial step as accepted: its end derivative becomes the
    /// first stage of the next step.
    pub fn accept(&mut self) {
        self.k.swap(0, 6);
        self.fsal_valid = true;
        self.stats.accepted += 1;
    }

    pub fn reject(&mut self) {
        // k[0] is still the derivative at the step start
        self.stats.rejected += 1;
    }

    /// Initial step heuristic (Hairer, Nørsett & Wanner, II.4).
    pub fn initial_step<F: OdeRhs>(&mut self, f: &mut F, t: f64, y: &[C64]) -> f64 {
        let n = self.n;
        f.eval(t, y, &mut self.k[0]);
        self.stats.rhs_evals += 1;
        self.fsal_valid = true;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.tol.atol + self.tol.rtol * y[i].norm();
            d0 += (y[i].norm() / sc).powi(2);
            d1 += (self.k[0][i].norm() / sc).powi(2);
        }
        d0 = (d0 / n as f64).sqrt();
        d1 = (d1 / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        for i in 0..n {
            self.ytmp[i] = y[i] + self.k[0][i] * h0;
        }
        f.eval(t + h0, &self.ytmp, &mut self.k[1]);
        self.stats.rhs_evals += 1;
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.tol.atol + self.tol.rtol * y[i].norm();
            d2 += ((self.k[1][i] - self.k[0][i]).norm() / sc).powi(2);
        }
        d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        let mut h = (100.0 * h0).min(h1);
        if let Some(hmax) = self.tol.h_max {
            h = h.min(hmax);
        }
        h
    }
}

/// Step-size update factor from a scaled error norm.
#[inline]
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}

/// Integrate from `(t0, y0)` and call `on_output(t, y)` at every time in
/// `outputs` (which must be non-decreasing and `>= t0`). The step size is
/// clipped so that each output time is hit exactly.
pub fn integrate<F, O>(
    f: &mut F,
    t0: f64,
    y0: &[C64],
    outputs: &[f64],
    tol: Tolerances,
    mut on_output: O,
) -> Result<IntegratorStats>
where
    F: OdeRhs,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y0.len();
    let mut stepper = Dopri5::new(n, tol);
    let mut y = y0.to_vec();
    let mut ynew = vec![C64::zero(); n];
    let mut t = t0;
    let mut h = f64::NAN;
    for (idx, &t_out) in outputs.iter().enumerate() {
        if t_out < t {
            return Err(Error::param(
                "t_grid",
                "output times must be non-decreasing",
            ));
        }
        while t < t_out {
            if h.is_nan() {
                h = stepper.initial_step(f, t, &y);
            }
            let remaining = t_out - t;
            let mut last = false;
            let mut h_try = h;
            if h_try >= remaining {
                h_try = remaining;
                last = true;
            }
            let err = stepper.trial_step(f, t, &y, h_try, &mut ynew);
            if err <= 1.0 && err.is_finite() {
                stepper.accept();
                t = if last { t_out } else { t + h_try };
                core::mem::swap(&mut y, &mut ynew);
                let mut next = h_try * step_factor(err);
                if let Some(hmax) = tol.h_max {
                    next = next.min(hmax);
                }
                // don't let a short final step collapse the step size
                h = if last { h.max(next) } else { next };
            } else {
                stepper.reject();
                h = h_try
                    * if err.is_finite() {
                        step_factor(err).min(1.0)
                    } else {
                        0.2
                    };
                if h < tol.h_min {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
        on_output(idx, t, &y)?;
    }
    Ok(stepper.stats)
}

/// Largest `h·‖f‖` used per Taylor step; terms peak near `3^3/3!` so at most
/// one digit is lost to cancellation.
const TAYLOR_REACH: f64 = 3.0;
const TAYLOR_MAX_TERMS: usize = 80;

/// Propagate a time-independent linear system `dy/dt = A y` with a truncated
/// Taylor series of `exp(hA)`. `rate` must bound the operator norm of `A`.
/// Each step is summed until two consecutive terms fall below rounding, so the
/// result is accurate to a few ulps per step without a tolerance to tune.
pub fn integrate_taylor<F, O>(
    f: &mut F,
    t0: f64,
    y0: &[C64],
    outputs: &[f64],
    rate: f64,
    mut on_output: O,
) -> Result<IntegratorStats>
where
    F: OdeRhs,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::param(
            "rate",
            "norm bound must be finite and non-negative",
        ));
    }
    let n = y0.len();
    let h_max = if rate > 0.0 {
        TAYLOR_REACH / rate
    } else {
        f64::INFINITY
    };
    let mut stats = IntegratorStats::default();
    let mut y = y0.to_vec();
    let mut term = vec![C64::zero(); n];
    let mut next = vec![C64::zero(); n];
    let mut t = t0;
    for (idx, &t_out) in outputs.iter().enumerate() {
        if t_out < t {
            return Err(Error::param(
                "t_grid",
                "output times must be non-decreasing",
            ));
        }
        while t < t_out {
            let remaining = t_out - t;
            let h = h_max.min(remaining);
            term.copy_from_slice(&y);
            let mut small = 0;
            let mut converged = false;
            for k in 1..=TAYLOR_MAX_TERMS {
                f.eval(t, &term, &mut next);
                stats.rhs_evals += 1;
                let s = h / k as f64;
                let mut tmax = 0.0f64;
                let mut ymax = 0.0f64;
                for ((tk, nk), yk) in term.iter_mut().zip(&next).zip(y.iter_mut()) {
                    *tk = nk * s;
                    *yk += *tk;
                    tmax = tmax.max(tk.norm_sqr());
                    ymax = ymax.max(yk.norm_sqr());
                }
                if !tmax.is_finite() {
                    break;
                }
                small = if tmax <= 1e-34 * ymax { small + 1 } else { 0 };
                if small == 2 || tmax == 0.0 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numerical(alloc::format!(
                    "Taylor series did not converge at t = {t}"
                )));
            }
            stats.accepted += 1;
            t = if h == remaining { t_out } else { t + h };
        }
        on_output(idx, t, &y)?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_rotation() {
        // y' = (-0.5 + 3i) y
        let lam = C64::new(-0.5, 3.0);
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = lam * y[0];
        let outs = [0.0, 0.5, 1.0, 2.0, 4.0];
        let mut got = Vec::new();
        integrate(
            &mut f,
            0.0,
            &[C64::new(1.0, 0.0)],
            &outs,
            Tolerances::new(1e-12, 1e-10),
            |_, t, y| {
                got.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        for (t, y) in got {
            let exact = (lam * t).exp();
            assert!((y - exact).norm() < 1e-8, "t={t} y={y} exact={exact}");
        }
    }

    #[test]
    fn fifth_order_convergence_on_fixed_steps() {
        let mut f = |t: f64, _y: &[C64], dy: &mut [C64]| dy[0] = C64::new(t.cos(), 0.0);
        let run = |h: f64, f: &mut dyn FnMut(f64, &[C64], &mut [C64])| {
            let mut st = Dopri5::new(1, Tolerances::default());
            let mut y = vec![C64::zero()];
            let mut out = vec![C64::zero()];
            let mut t = 0.0;
            let mut g = |t: f64, y: &[C64], dy: &mut [C64]| f(t, y, dy);
            while t < 1.0 - 1e-12 {
                st.trial_step(&mut g, t, &y, h, &mut out);
                st.accept();
                y[0] = out[0];
                t += h;
            }
            (y[0].re - 1f64.sin()).abs()
        };
        let e1 = run(0.1, &mut f);
        let e2 = run(0.05, &mut f);
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order}");
    }

    #[test]
    fn taylor_matches_scalar_exponential_to_rounding() {
        let lam = C64::new(-0.5, 30.0);
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = lam * y[0];
        let outs = [0.0, 0.3, 1.0, 2.0];
        let mut got = Vec::new();
        let stats = integrate_taylor(
            &mut f,
            0.0,
            &[C64::new(1.0, 0.0)],
            &outs,
            lam.norm(),
            |_, t, y| {
                got.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert!(stats.accepted >= 20);
        for (t, y) in got {
            let exact = (lam * t).exp();
            assert!((y - exact).norm() < 1e-13, "t={t} y={y} exact={exact}");
        }
    }

    #[test]
    fn taylor_rejects_bad_rate() {
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = y[0];
        let r = integrate_taylor(
            &mut f,
            0.0,
            &[C64::new(1.0, 0.0)],
            &[1.0],
            f64::NAN,
            |_, _, _| Ok(()),
        );
        assert!(r.is_err());
    }
}
