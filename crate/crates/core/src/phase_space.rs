//! Reduced cavity state and its Wigner function.
//!
//! Quadratures follow `X = (a + a†)/√2`, `P = (a − a†)/(i√2)`, so the vacuum
//! has variance 1/2 and a coherent state `|α⟩` sits at `(√2 Re α, √2 Im α)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::linalg::{CMatrix, C64};

/// Normalisation drift beyond which a map carries a warning.
pub const NORMALIZATION_WARNING: f64 = 0.05;

/// Partial trace over the atomic factor.
pub fn reduce_to_cavity(rho: &DensityMatrix) -> DensityMatrix {
    let sp = rho.space();
    let cd = sp.cav_dim();
    let m = rho.matrix();
    let mut out = CMatrix::zeros(cd);
    for n1 in 0..sp.atom_dim() {
        let base = n1 * cd;
        for a in 0..cd {
            for b in 0..cd {
                out[(a, b)] += m[(base + a, base + b)];
            }
        }
    }
    DensityMatrix::new_unchecked(sp.cavity_factor(), out).expect("cavity dimension")
}

/// Multiply `(n, m)` by `exp(-i (n − m) θ)`, i.e. `U ρ U†` with `U = exp(-iθ a†a)`.
pub fn rotate_cavity(rho_c: &DensityMatrix, theta: f64) -> DensityMatrix {
    let d = rho_c.space().cav_dim();
    let m = rho_c.matrix();
    let out = CMatrix::from_fn(d, |n, k| {
        m[(n, k)] * C64::from_polar(1.0, -((n as f64) - (k as f64)) * theta)
    });
    DensityMatrix::new_unchecked(rho_c.space(), out).expect("same dimension")
}

/// Restore the pump-frame phases: element `(n_a, m_a)` gains
/// `exp(-i (n_a − m_a) ω_p t)`.
pub fn to_lab_frame(rho_c: &DensityMatrix, omega_p: f64, t: f64) -> DensityMatrix {
    rotate_cavity(rho_c, omega_p * t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_values: Vec<f64>,
    pub p_values: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let d = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + d * k as f64).collect()
}

impl PhaseGrid {
    pub fn new(x_values: Vec<f64>, p_values: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("x_values", &x_values), ("p_values", &p_values)] {
            if axis.len() < 2 {
                return Err(Error::param(name, "need at least two points"));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::param(name, "must be strictly increasing"));
            }
        }
        Ok(Self { x_values, p_values })
    }

    /// Square grid on `[-half_width, half_width]²` with `n` points per axis.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::param("half_width", "must be positive"));
        }
        let axis = linspace(-half_width, half_width, n);
        Self::new(axis.clone(), axis)
    }

    /// 201×201 grid whose full width is four times the largest phase-space
    /// displacement of `rho_c` (at least `[-4, 4]`).
    pub fn default_for(rho_c: &DensityMatrix) -> Self {
        let r = displacement_scale(rho_c);
        Self::symmetric((2.0 * r).max(4.0), 201).expect("positive width")
    }

    pub fn dx(&self) -> f64 {
        (self.x_values[self.x_values.len() - 1] - self.x_values[0])
            / (self.x_values.len() - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_values[self.p_values.len() - 1] - self.p_values[0])
            / (self.p_values.len() - 1) as f64
    }
}

/// `max(√2|⟨a⟩|, √(2⟨a†a⟩ + 1))`, the larger of the mean displacement and
/// the rms radius.
fn displacement_scale(rho_c: &DensityMatrix) -> f64 {
    let m = rho_c.matrix();
    let d = m.dim();
    let mut a = C64::zero();
    let mut n = 0.0;
    for k in 1..d {
        a += m[(k, k - 1)] * (k as f64).sqrt();
        n += m[(k, k)].re * k as f64;
    }
    (2f64.sqrt() * a.norm()).max((2.0 * n + 1.0).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerMap {
    pub grid: PhaseGrid,
    /// Row-major, `values[ix * p_len + ip]`.
    pub values: Vec<f64>,
    /// Riemann sum `Σ W dx dp`.
    pub normalization: f64,
    pub warning: Option<String>,
}

impl WignerMap {
    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.grid.p_values.len() + ip]
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.grid.dp()
    }

    /// `2π ∫∫ W² dx dp`, which equals the purity.
    pub fn purity_integral(&self) -> f64 {
        2.0 * core::f64::consts::PI
            * self.values.iter().map(|w| w * w).sum::<f64>()
            * self.grid.dx()
            * self.grid.dp()
    }

    /// Bilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: f64, p: f64) -> Option<f64> {
        let xs = &self.grid.x_values;
        let ps = &self.grid.p_values;
        if x < xs[0] || x > xs[xs.len() - 1] || p < ps[0] || p > ps[ps.len() - 1] {
            return None;
        }
        let locate = |axis: &[f64], v: f64| {
            let i = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
            let f = (v - axis[i]) / (axis[i + 1] - axis[i]);
            (i, f)
        };
        let (i, fx) = locate(xs, x);
        let (j, fp) = locate(ps, p);
        let w00 = self.value(i, j);
        let w10 = self.value(i + 1, j);
        let w01 = self.value(i, j + 1);
        let w11 = self.value(i + 1, j + 1);
        Some(
            w00 * (1.0 - fx) * (1.0 - fp)
                + w10 * fx * (1.0 - fp)
                + w01 * (1.0 - fx) * fp
                + w11 * fx * fp,
        )
    }

    /// Values of `W` at `n_angles` equally spaced points on a circle.
    pub fn circle(&self, radius: f64, n_angles: usize) -> Vec<f64> {
        (0..n_angles)
            .filter_map(|k| {
                let th = 2.0 * core::f64::consts::PI * k as f64 / n_angles as f64;
                self.interpolate(radius * th.cos(), radius * th.sin())
            })
            .collect()
    }

    /// Standard deviation of `W` along the circle of the given radius.
    pub fn angular_std(&self, radius: f64) -> f64 {
        let v = self.circle(radius, 360);
        if v.is_empty() {
            return 0.0;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / v.len() as f64).sqrt()
    }
}

/// Closed-form Fock-basis Wigner kernel for one cavity state.
pub struct WignerKernel {
    rho: CMatrix,
}

impl WignerKernel {
    pub fn new(rho_c: &DensityMatrix) -> Self {
        Self {
            rho: rho_c.matrix().clone(),
        }
    }

    /// `W(x, p)` via the generalised-Laguerre expansion
    /// `W = (1/π) e^{-2|α|²} Σ_{m≤n} c_mn ρ_mn (-1)^m (2α)^{n−m} √(m!/n!) L_m^{(n−m)}(4|α|²)`
    /// with `α = (x + ip)/√2` and `c_mn = 1` on the diagonal, 2 (real part) above it.
    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let d = self.rho.dim();
        let alpha = C64::new(x, p) / 2f64.sqrt();
        let b = 4.0 * alpha.norm_sqr();
        let two_a = alpha * 2.0;
        let mut w = 0.0;
        let mut two_a_k = C64::new(1.0, 0.0);
        for k in 0..d {
            // L_m^{(k)}(b) by upward recurrence in m
            let kf = k as f64;
            let mut l_prev = 0.0;
            let mut l = 1.0;
            // ratio √(m!/(m+k)!) starting at m = 0: 1/√(k!)
            let mut fact = 1.0;
            for j in 1..=k {
                fact /= (j as f64).sqrt();
            }
            for m in 0..(d - k) {
                if m > 0 {
                    let mf = (m - 1) as f64;
                    let next = ((2.0 * mf + 1.0 + kf - b) * l - (mf + kf) * l_prev) / (mf + 1.0);
                    l_prev = l;
                    l = next;
                    // √(m!/(m+k)!) = √((m-1)!/(m-1+k)!) · √(m/(m+k))
                    fact *= ((m as f64) / ((m + k) as f64)).sqrt();
                }
                let rho_mn = self.rho[(m, m + k)];
                if rho_mn.is_zero() {
                    continue;
                }
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let term = rho_mn * two_a_k * (sign * fact * l);
                w += if k == 0 { term.re } else { 2.0 * term.re };
            }
            two_a_k *= two_a;
        }
        w * (-0.5 * b).exp() / core::f64::consts::PI
    }
}

/// Wigner function of a cavity state on `grid`.
pub fn wigner(rho_c: &DensityMatrix, grid: &PhaseGrid) -> WignerMap {
    let kernel = WignerKernel::new(rho_c);
    let mut values = Vec::with_capacity(grid.x_values.len() * grid.p_values.len());
    for &x in &grid.x_values {
        for &p in &grid.p_values {
            values.push(kernel.eval(x, p));
        }
    }
    finish_map(grid.clone(), values)
}

/// Wraps precomputed row-major values (e.g. evaluated in parallel).
pub fn finish_map(grid: PhaseGrid, values: Vec<f64>) -> WignerMap {
    let mut map = WignerMap {
        grid,
        values,
        normalization: 0.0,
        warning: None,
    };
    map.normalization = map.integral();
    if (map.normalization - 1.0).abs() > NORMALIZATION_WARNING {
        map.warning = Some(format!(
            "grid too coarse or too small: normalisation {:.4} deviates from 1 by more than {}",
            map.normalization, NORMALIZATION_WARNING
        ));
    }
    map
}

/// Radius of the maximum of the angularly averaged Wigner function.
pub fn ring_radius_diagnostic(wmap: &WignerMap) -> Result<f64> {
    if wmap.values.iter().all(|w| *w == 0.0) {
        return Err(Error::Empty("Wigner map is identically zero"));
    }
    let xs = &wmap.grid.x_values;
    let ps = &wmap.grid.p_values;
    let r_max = xs[xs.len() - 1]
        .abs()
        .min(xs[0].abs())
        .min(ps[ps.len() - 1].abs())
        .min(ps[0].abs());
    let dr = 0.25 * wmap.grid.dx().min(wmap.grid.dp());
    let n_r = (r_max / dr) as usize;
    let profile: Vec<f64> = (0..=n_r)
        .map(|k| {
            let v = wmap.circle(k as f64 * dr, 180);
            v.iter().sum::<f64>() / v.len().max(1) as f64
        })
        .collect();
    let (best, _) = profile
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    // parabolic refinement around an interior maximum
    if best > 0 && best + 1 < profile.len() {
        let (a, b, c) = (profile[best - 1], profile[best], profile[best + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            let shift = 0.5 * (a - c) / den;
            return Ok((best as f64 + shift.clamp(-0.5, 0.5)) * dr);
        }
    }
    Ok(best as f64 * dr)
}

/// Cavity state at `omega_p t` from a joint pump-frame state.
pub fn lab_frame_cavity(rho: &DensityMatrix, omega_p: f64, t: f64) -> DensityMatrix {
    to_lab_frame(&reduce_to_cavity(rho), omega_p, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{atomic_fock, cavity_fock, coherent_state, product_state, CompositeSpace};
    use crate::linalg::c;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn coherent(cut: usize, alpha: C64) -> DensityMatrix {
        let (v, _) = coherent_state(cut, alpha);
        DensityMatrix::from_pure(CompositeSpace::cavity(cut), &v).unwrap()
    }

    fn fock(cut: usize, n: usize) -> DensityMatrix {
        DensityMatrix::from_pure(CompositeSpace::cavity(cut), &cavity_fock(cut, n).unwrap())
            .unwrap()
    }

    #[test]
    fn partial_trace_of_product_state() {
        let space = CompositeSpace::new(2, 6);
        let (cav, _) = coherent_state(6, c(0.7, -0.2));
        let atoms = [c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)];
        let psi = product_state(space, &atoms, &cav).unwrap();
        let rho = DensityMatrix::from_pure(space, &psi).unwrap();
        let red = reduce_to_cavity(&rho);
        let expect = CMatrix::outer(&cav, &cav);
        assert!((red.matrix() - &expect).max_abs() < 1e-14);
        assert!((red.trace() - rho.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_of_correlated_state() {
        let space = CompositeSpace::new(2, 2);
        let mut m = CMatrix::zeros(space.total_dim());
        for (n, p) in [0.5, 0.3, 0.2].iter().enumerate() {
            let i = space.index(n, n);
            m[(i, i)] = c(*p, 0.0);
        }
        let red = reduce_to_cavity(&DensityMatrix::new(space, m).unwrap());
        assert!(red.matrix().is_diagonal());
        assert_abs_diff_eq!(red.matrix()[(1, 1)].re, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn lab_frame_phases() {
        let rho = coherent(8, c(1.0, 0.5));
        assert_eq!(to_lab_frame(&rho, 0.3, 0.0), rho);
        let wrapped = to_lab_frame(&rho, 1.0, 2.0 * PI);
        assert!((wrapped.matrix() - rho.matrix()).max_abs() < 1e-12);
        let diag = fock(4, 2);
        assert_eq!(to_lab_frame(&diag, 0.7, 3.1), diag);
    }

    #[test]
    fn vacuum_and_fock_origin_values() {
        let k = WignerKernel::new(&fock(5, 0));
        assert_abs_diff_eq!(k.eval(0.0, 0.0), 1.0 / PI, epsilon = 1e-12);
        assert_abs_diff_eq!(
            k.eval(0.6, -0.4),
            (-(0.36 + 0.16f64)).exp() / PI,
            epsilon = 1e-12
        );
        let k1 = WignerKernel::new(&fock(5, 1));
        assert_abs_diff_eq!(k1.eval(0.0, 0.0), -1.0 / PI, epsilon = 1e-12);
        // W_1 = (1/π)(2r² − 1) e^{−r²}
        let r2: f64 = 1.3 * 1.3 + 0.2 * 0.2;
        assert_abs_diff_eq!(
            k1.eval(1.3, 0.2),
            (2.0 * r2 - 1.0) * (-r2).exp() / PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn coherent_state_is_displaced_vacuum() {
        let alpha = c(1.5, -0.4);
        let k = WignerKernel::new(&coherent(30, alpha));
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        for (x, p) in [(0.0, 0.0), (x0, p0), (1.0, 1.0), (3.0, -1.5)] {
            let g = (-((x - x0) * (x - x0) + (p - p0) * (p - p0))).exp() / PI;
            assert_abs_diff_eq!(k.eval(x, p), g, epsilon = 1e-9);
        }
    }

    #[test]
    fn parity_oracle_for_mixed_state() {
        // W(0,0) = (1/π) Σ (−1)^n ρ_nn
        let space = CompositeSpace::cavity(4);
        let m = CMatrix::from_real_diagonal(&[0.1, 0.2, 0.3, 0.25, 0.15]);
        let rho = DensityMatrix::new(space, m).unwrap();
        let w = WignerKernel::new(&rho).eval(0.0, 0.0);
        assert_abs_diff_eq!(w, (0.1 - 0.2 + 0.3 - 0.25 + 0.15) / PI, epsilon = 1e-14);
    }

    #[test]
    fn default_grid_normalisation_and_purity() {
        let rho = coherent(20, c(1.5, 0.0));
        let map = wigner(&rho, &PhaseGrid::default_for(&rho));
        assert!(
            (map.normalization - 1.0).abs() < 0.02,
            "{}",
            map.normalization
        );
        assert!(map.warning.is_none());
        assert!((map.purity_integral() - rho.purity()).abs() < 0.02);
        let coarse = wigner(&rho, &PhaseGrid::symmetric(1.0, 5).unwrap());
        assert!(coarse.warning.is_some());
    }

    #[test]
    fn rotation_covariance() {
        let rho = coherent(20, c(1.2, 0.3));
        let grid = PhaseGrid::symmetric(5.0, 201).unwrap();
        let theta = 0.7;
        let rotated = wigner(&rotate_cavity(&rho, theta), &grid);
        let k = WignerKernel::new(&rho);
        // W_rot(x, p) = W(R(θ)(x, p))
        for (x, p) in [(1.0, 0.5), (-0.4, 1.7), (2.0, -1.0)] {
            let (xr, pr) = (
                x * theta.cos() - p * theta.sin(),
                x * theta.sin() + p * theta.cos(),
            );
            let got = rotated.interpolate(x, p).unwrap();
            assert!((got - k.eval(xr, pr)).abs() < 1e-3);
        }
    }

    #[test]
    fn ring_radius() {
        let vac = fock(6, 0);
        let g = PhaseGrid::symmetric(4.0, 161).unwrap();
        assert!(ring_radius_diagnostic(&wigner(&vac, &g)).unwrap() < 0.05);
        let rho = coherent(20, c(1.5, 0.0));
        let g = PhaseGrid::symmetric(5.0, 201).unwrap();
        let r = ring_radius_diagnostic(&wigner(&rho, &g)).unwrap();
        // angular averaging shifts the peak of an off-centre Gaussian
        // slightly inward of √2·1.5
        assert!((r - 2f64.sqrt() * 1.5).abs() < 0.15, "{r}");
        // uniformly dephased coherent state: a rotationally symmetric ring
        let mut m = CMatrix::zeros(21);
        for k in 0..64 {
            let a = C64::from_polar(1.5, 2.0 * PI * k as f64 / 64.0);
            let (v, _) = coherent_state(20, a);
            m += &CMatrix::outer(&v, &v).scale_real(1.0 / 64.0);
        }
        let ring = DensityMatrix::new(CompositeSpace::cavity(20), m).unwrap();
        let map = wigner(&ring, &g);
        let r = ring_radius_diagnostic(&map).unwrap();
        assert!(
            (r - 2f64.sqrt() * 1.5).abs() < 0.15 * 2f64.sqrt() * 1.5,
            "{r}"
        );
        let v = map.circle(r, 360);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(var < 1e-3);
        let zero = WignerMap {
            grid: g.clone(),
            values: vec![0.0; 201 * 201],
            normalization: 0.0,
            warning: None,
        };
        assert!(ring_radius_diagnostic(&zero).is_err());
    }

    #[test]
    fn joint_state_reduction_keeps_cavity_part() {
        let space = CompositeSpace::new(1, 3);
        let psi = product_state(
            space,
            &atomic_fock(1, 0).unwrap(),
            &cavity_fock(3, 2).unwrap(),
        )
        .unwrap();
        let rho = DensityMatrix::from_pure(space, &psi).unwrap();
        let red = lab_frame_cavity(&rho, 0.5, 1.0);
        assert_abs_diff_eq!(red.matrix()[(2, 2)].re, 1.0, epsilon = 1e-15);
    }
}
