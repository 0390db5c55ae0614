//! Composite Hilbert space of the fixed-N two-mode atomic sector and a
//! truncated cavity Fock space, plus the operators that act on it.
//!
//! Basis ordering is atomic-major: `index = n1 * cav_dim + n_a`, where `n1`
//! counts atoms in the well coupled to the cavity (well 2 then holds
//! `N - n1`), and `n_a` is the cavity photon number.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, vec_norm, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompositeSpace {
    n_atoms: usize,
    cav_cutoff: usize,
}

impl CompositeSpace {
    pub fn new(n_atoms: usize, cav_cutoff: usize) -> Self {
        Self {
            n_atoms,
            cav_cutoff,
        }
    }

    /// A cavity-only space (empty junction).
    pub fn cavity(cav_cutoff: usize) -> Self {
        Self::new(0, cav_cutoff)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn cav_cutoff(&self) -> usize {
        self.cav_cutoff
    }

    pub fn atom_dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn cav_dim(&self) -> usize {
        self.cav_cutoff + 1
    }

    pub fn total_dim(&self) -> usize {
        self.atom_dim() * self.cav_dim()
    }

    #[inline]
    pub fn index(&self, n1: usize, n_a: usize) -> usize {
        debug_assert!(n1 <= self.n_atoms && n_a <= self.cav_cutoff);
        n1 * self.cav_dim() + n_a
    }

    /// Inverse of [`index`](Self::index): `(n1, n_a)`.
    #[inline]
    pub fn labels(&self, index: usize) -> (usize, usize) {
        (index / self.cav_dim(), index % self.cav_dim())
    }

    /// The cavity factor on its own.
    pub fn cavity_factor(&self) -> Self {
        Self::cavity(self.cav_cutoff)
    }
}

/// Validating constructor for externally supplied (possibly signed) sizes.
pub fn build_space(n_atoms: i64, cav_cutoff: i64) -> Result<CompositeSpace> {
    if n_atoms < 0 {
        return Err(Error::param(
            "n_atoms",
            format!("must be >= 0, got {n_atoms}"),
        ));
    }
    if cav_cutoff < 0 {
        return Err(Error::param(
            "cav_cutoff",
            format!("must be >= 0, got {cav_cutoff}"),
        ));
    }
    Ok(CompositeSpace::new(n_atoms as usize, cav_cutoff as usize))
}

/// A dense operator on a [`CompositeSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: CompositeSpace,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(space: CompositeSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.dim() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: matrix.dim(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn zero(space: CompositeSpace) -> Self {
        Self {
            space,
            matrix: CMatrix::zeros(space.total_dim()),
        }
    }

    pub fn identity(space: CompositeSpace) -> Self {
        Self {
            space,
            matrix: CMatrix::identity(space.total_dim()),
        }
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.dagger(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.scale_real(s),
        }
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        self.check_same(rhs)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix + &rhs.matrix,
        })
    }

    pub fn mul(&self, rhs: &Operator) -> Result<Self> {
        self.check_same(rhs)?;
        Ok(Self {
            space: self.space,
            matrix: self.matrix.matmul(&rhs.matrix),
        })
    }

    pub fn commutator(&self, rhs: &Operator) -> Result<Self> {
        self.check_same(rhs)?;
        Ok(Self {
            space: self.space,
            matrix: self.matrix.commutator(&rhs.matrix),
        })
    }

    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if psi.len() != self.space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: psi.len(),
            });
        }
        Ok(self.matrix.matvec(psi))
    }

    fn check_same(&self, rhs: &Operator) -> Result<()> {
        if self.space != rhs.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: rhs.space.total_dim(),
            });
        }
        Ok(())
    }
}

/// Tolerances used when certifying a density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for PhysicalityTolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-10,
            trace: 1e-8,
            min_eigenvalue: 1e-8,
        }
    }
}

impl PhysicalityTolerances {
    /// Looser hermiticity bound applied to integrator output.
    pub fn evolved() -> Self {
        Self {
            hermiticity: 1e-9,
            ..Self::default()
        }
    }
}

/// Measured invariant errors of a state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Physicality {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    /// Certified by a shifted Cholesky factorisation: `λ_min ≥ -tol`.
    pub positive: bool,
}

impl Physicality {
    pub fn within(&self, tol: &PhysicalityTolerances) -> bool {
        self.trace_error <= tol.trace && self.hermiticity_error <= tol.hermiticity && self.positive
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: CompositeSpace,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity with default tolerances.
    pub fn new(space: CompositeSpace, matrix: CMatrix) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        let tol = PhysicalityTolerances::default();
        let p = rho.physicality(&tol);
        if !p.within(&tol) {
            return Err(Error::InvariantViolation {
                t: 0.0,
                what: format!("{p:?}"),
            });
        }
        Ok(rho)
    }

    /// Checks only the dimension.
    pub fn new_unchecked(space: CompositeSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.dim() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: matrix.dim(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn from_pure(space: CompositeSpace, psi: &[C64]) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: psi.len(),
            });
        }
        let norm = vec_norm(psi);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::param(
                "psi",
                format!("state is not normalised (|psi| = {norm})"),
            ));
        }
        Ok(Self {
            space,
            matrix: CMatrix::outer(psi, psi),
        })
    }

    pub fn maximally_mixed(space: CompositeSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            matrix: CMatrix::identity(d).scale_real(1.0 / d as f64),
        }
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    pub fn physicality(&self, tol: &PhysicalityTolerances) -> Physicality {
        let tr = self.matrix.trace();
        Physicality {
            trace_error: (tr - c(1.0, 0.0)).norm(),
            hermiticity_error: self.matrix.hermiticity_error(),
            positive: self.matrix.is_psd_with_shift(tol.min_eigenvalue),
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        self.matrix.min_eigenvalue()
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: other.space.total_dim(),
            });
        }
        Ok(0.5 * (&self.matrix - &other.matrix).trace_norm_hermitian()?)
    }

    /// Probability of the top `levels` cavity Fock levels.
    pub fn cavity_top_population(&self, levels: usize) -> f64 {
        let sp = self.space;
        let lo = sp.cav_dim().saturating_sub(levels);
        let mut p = 0.0;
        for i in 0..sp.total_dim() {
            if sp.labels(i).1 >= lo {
                p += self.matrix[(i, i)].re;
            }
        }
        p
    }
}

/// `n̂₁ = ĉ₁†ĉ₁`, diagonal with eigenvalue `n1`.
pub fn number_op_well1(space: CompositeSpace) -> Operator {
    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| space.labels(i).0 as f64)
        .collect();
    Operator {
        space,
        matrix: CMatrix::from_real_diagonal(&diag),
    }
}

/// Atomic-factor hop `ĉ₁†ĉ₂ + ĉ₂†ĉ₁` on the fixed-N sector.
pub fn tunneling_matrix(n_atoms: usize) -> CMatrix {
    let dim = n_atoms + 1;
    let mut m = CMatrix::zeros(dim);
    for n1 in 0..n_atoms {
        // <n1+1, N-n1-1| c1† c2 |n1, N-n1> = sqrt((n1+1)(N-n1))
        let amp = (((n1 + 1) * (n_atoms - n1)) as f64).sqrt();
        m[(n1 + 1, n1)] = c(amp, 0.0);
        m[(n1, n1 + 1)] = c(amp, 0.0);
    }
    m
}

/// Atomic-factor on-site term `ĉ₁†²ĉ₁² + ĉ₂†²ĉ₂²`.
pub fn onsite_matrix(n_atoms: usize) -> CMatrix {
    let diag: Vec<f64> = (0..=n_atoms)
        .map(|n1| {
            let n2 = n_atoms - n1;
            (n1 * n1.saturating_sub(1) + n2 * n2.saturating_sub(1)) as f64
        })
        .collect();
    CMatrix::from_real_diagonal(&diag)
}

/// Truncated cavity annihilation operator on the cavity factor alone.
pub fn annihilation_matrix(cav_cutoff: usize) -> CMatrix {
    let dim = cav_cutoff + 1;
    let mut m = CMatrix::zeros(dim);
    for n in 1..dim {
        m[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    m
}

/// Dimensionless tunnelling operator; `R` is multiplied in by the Hamiltonian.
pub fn tunneling_op(space: CompositeSpace) -> Operator {
    embed(&tunneling_matrix(space.n_atoms()), Factor::Atomic, space)
        .expect("atomic factor dimension is consistent by construction")
}

pub fn onsite_interaction_op(space: CompositeSpace) -> Operator {
    embed(&onsite_matrix(space.n_atoms()), Factor::Atomic, space)
        .expect("atomic factor dimension is consistent by construction")
}

/// `â ⊗`-lifted: identity on the atoms.
pub fn cavity_annihilation(space: CompositeSpace) -> Operator {
    embed(
        &annihilation_matrix(space.cav_cutoff()),
        Factor::Cavity,
        space,
    )
    .expect("cavity factor dimension is consistent by construction")
}

/// `â†â` on the composite space.
pub fn photon_number_op(space: CompositeSpace) -> Operator {
    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| space.labels(i).1 as f64)
        .collect();
    Operator {
        space,
        matrix: CMatrix::from_real_diagonal(&diag),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    Atomic,
    Cavity,
}

/// Lift a single-factor operator to the composite space:
/// `op ⊗ 1` for [`Factor::Atomic`], `1 ⊗ op` for [`Factor::Cavity`].
pub fn embed(op: &CMatrix, factor: Factor, space: CompositeSpace) -> Result<Operator> {
    let expected = match factor {
        Factor::Atomic => space.atom_dim(),
        Factor::Cavity => space.cav_dim(),
    };
    if op.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: op.dim(),
        });
    }
    let matrix = match factor {
        Factor::Atomic => op.kron(&CMatrix::identity(space.cav_dim())),
        Factor::Cavity => CMatrix::identity(space.atom_dim()).kron(op),
    };
    Ok(Operator { space, matrix })
}

/// `|n1, N-n1>` on the atomic factor.
pub fn atomic_fock(n_atoms: usize, n1: usize) -> Result<Vec<C64>> {
    if n1 > n_atoms {
        return Err(Error::param("n1", format!("{n1} exceeds N = {n_atoms}")));
    }
    let mut v = vec![c(0.0, 0.0); n_atoms + 1];
    v[n1] = c(1.0, 0.0);
    Ok(v)
}

/// Cavity Fock state `|n>`.
pub fn cavity_fock(cav_cutoff: usize, n: usize) -> Result<Vec<C64>> {
    if n > cav_cutoff {
        return Err(Error::param(
            "n_a",
            format!("{n} exceeds cutoff {cav_cutoff}"),
        ));
    }
    let mut v = vec![c(0.0, 0.0); cav_cutoff + 1];
    v[n] = c(1.0, 0.0);
    Ok(v)
}

/// Truncated coherent state together with the probability weight that fell
/// above the cutoff. The returned vector is renormalised.
pub fn coherent_state(cav_cutoff: usize, alpha: C64) -> (Vec<C64>, f64) {
    let mut v = Vec::with_capacity(cav_cutoff + 1);
    let mut term = c((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    v.push(term);
    for n in 1..=cav_cutoff {
        term = term * alpha / (n as f64).sqrt();
        v.push(term);
    }
    let kept: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let norm = kept.sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    (v, (1.0 - kept).max(0.0))
}

/// Product vector `atoms ⊗ cavity` in the atomic-major ordering.
pub fn product_state(space: CompositeSpace, atoms: &[C64], cavity: &[C64]) -> Result<Vec<C64>> {
    if atoms.len() != space.atom_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.atom_dim(),
            found: atoms.len(),
        });
    }
    if cavity.len() != space.cav_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.cav_dim(),
            found: cavity.len(),
        });
    }
    let mut v = Vec::with_capacity(space.total_dim());
    for a in atoms {
        for b in cavity {
            v.push(a * b);
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dimensions() {
        let s = build_space(2, 3).unwrap();
        assert_eq!(s.total_dim(), 12);
        assert_eq!(build_space(30, 0).unwrap().atom_dim(), 31);
        let bare = build_space(0, 5).unwrap();
        assert_eq!(bare.atom_dim(), 1);
        assert_eq!(bare.total_dim(), 6);
        assert!(build_space(-1, 3).is_err());
        assert!(build_space(2, -3).is_err());
    }

    #[test]
    fn index_bijection() {
        let s = CompositeSpace::new(4, 3);
        let mut seen = vec![false; s.total_dim()];
        for n1 in 0..=4 {
            for na in 0..=3 {
                let i = s.index(n1, na);
                assert_eq!(s.labels(i), (n1, na));
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn number_operator_eigenvalues() {
        let s = CompositeSpace::new(2, 2);
        let n1 = number_op_well1(s);
        let m = n1.matrix();
        for i in 0..s.total_dim() {
            assert_eq!(m[(i, i)].re, s.labels(i).0 as f64);
        }
        let psi =
            product_state(s, &atomic_fock(2, 2).unwrap(), &cavity_fock(2, 1).unwrap()).unwrap();
        let out = n1.apply(&psi).unwrap();
        for (o, p) in out.iter().zip(&psi) {
            assert_eq!(*o, p * 2.0);
        }
        let tiny = CompositeSpace::new(1, 0);
        assert_eq!(number_op_well1(tiny).matrix().trace().re, 1.0);
    }

    #[test]
    fn tunneling_matrix_elements() {
        let t = tunneling_matrix(2);
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(t[(1, 0)].re, r2, epsilon = 1e-15);
        assert_abs_diff_eq!(t[(2, 1)].re, r2, epsilon = 1e-15);
        assert_eq!(t[(2, 0)].re, 0.0);
        assert_eq!(
            tunneling_op(CompositeSpace::new(0, 3)).matrix().max_abs(),
            0.0
        );
        let op = tunneling_op(CompositeSpace::new(7, 2));
        assert!(op.matrix().hermiticity_error() <= 1e-14);
        // N = 1 is Pauli-x on {|0,1>, |1,0>}
        let sx = tunneling_matrix(1);
        assert_eq!(
            sx,
            CMatrix::from_vec(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap()
        );
    }

    #[test]
    fn onsite_eigenvalues() {
        let m2 = onsite_matrix(2);
        assert_eq!(m2[(1, 1)].re, 0.0);
        assert_eq!(m2[(2, 2)].re, 2.0);
        assert_eq!(m2[(0, 0)].re, 2.0);
        assert_eq!(onsite_matrix(30)[(15, 15)].re, 420.0);
        let op = onsite_interaction_op(CompositeSpace::new(3, 1));
        assert_eq!(op.matrix().hermiticity_error(), 0.0);
    }

    #[test]
    fn annihilation_and_truncated_commutator() {
        let s = CompositeSpace::new(1, 4);
        let a = cavity_annihilation(s);
        let vac =
            product_state(s, &atomic_fock(1, 0).unwrap(), &cavity_fock(4, 0).unwrap()).unwrap();
        assert!(vec_norm(&a.apply(&vac).unwrap()) == 0.0);
        let num = a.dagger().mul(&a).unwrap();
        let i3 = s.index(1, 3);
        assert_abs_diff_eq!(num.matrix()[(i3, i3)].re, 3.0, epsilon = 1e-14);
        let comm = a.commutator(&a.dagger()).unwrap();
        for i in 0..s.total_dim() {
            let (_, na) = s.labels(i);
            let expected = if na == 4 { -4.0 } else { 1.0 };
            assert_abs_diff_eq!(comm.matrix()[(i, i)].re, expected, epsilon = 1e-13);
        }
        let mut off = comm.matrix().clone();
        for i in 0..s.total_dim() {
            off[(i, i)] = c(0.0, 0.0);
        }
        assert!(off.max_abs() < 1e-14);
    }

    #[test]
    fn embed_properties() {
        let s = CompositeSpace::new(3, 2);
        let n1 = number_op_well1(s);
        let n = photon_number_op(s);
        let prod = n1.mul(&n).unwrap();
        assert!(prod.matrix().is_diagonal());
        for i in 0..s.total_dim() {
            let (a, b) = s.labels(i);
            assert_eq!(prod.matrix()[(i, i)].re, (a * b) as f64);
        }
        assert_eq!(
            embed(&CMatrix::identity(4), Factor::Atomic, s).unwrap(),
            Operator::identity(s)
        );
        let t = tunneling_op(s);
        let a = cavity_annihilation(s);
        assert_eq!(t.commutator(&a).unwrap().matrix().max_abs(), 0.0);
        assert!(embed(&CMatrix::identity(5), Factor::Cavity, s).is_err());
    }

    #[test]
    fn embed_preserves_largest_singular_value() {
        let s = CompositeSpace::new(4, 3);
        let a = annihilation_matrix(3);
        let lifted = embed(&a, Factor::Cavity, s).unwrap();
        let sv_small = a.dagger().matmul(&a).hermitian_eigen().unwrap().values[0].sqrt();
        let l = lifted.matrix();
        let sv_big = l.dagger().matmul(l).hermitian_eigen().unwrap().values[0].sqrt();
        assert_abs_diff_eq!(sv_small, sv_big, epsilon = 1e-12);
    }

    #[test]
    fn coherent_state_is_normalised() {
        let (v, lost) = coherent_state(15, c(1.5, 0.0));
        assert_abs_diff_eq!(vec_norm(&v), 1.0, epsilon = 1e-14);
        assert!(lost < 1e-8);
    }
}
