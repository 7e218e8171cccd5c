//! Dense complex operators on the quantum-dot (⊗ cavity) Hilbert space.
//!
//! Basis ordering is QD-major: `index = qd_level * cavity_levels + fock_n`,
//! with `qd_level = 0` for |G⟩ and `1` for |X⟩. A space without a cavity has
//! `cavity_levels = 0` and dimension 2.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// QD two-level system, optionally tensored with one truncated cavity mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    cavity_levels: usize,
}

impl HilbertSpace {
    pub const QD_LEVELS: usize = 2;

    pub fn qd_only() -> Self {
        Self { cavity_levels: 0 }
    }

    /// QD ⊗ Fock states |0⟩..|n_max⟩.
    pub fn with_cavity(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Config(format!("cavity truncation n_max = {n_max} cannot hold one photon")));
        }
        Ok(Self { cavity_levels: n_max + 1 })
    }

    pub fn has_cavity(&self) -> bool {
        self.cavity_levels > 0
    }

    pub fn cavity_levels(&self) -> usize {
        self.cavity_levels
    }

    /// Number of Fock states per QD level (1 when there is no cavity).
    fn fock_states(&self) -> usize {
        self.cavity_levels.max(1)
    }

    pub fn dim(&self) -> usize {
        Self::QD_LEVELS * self.fock_states()
    }

    pub fn index(&self, qd_level: usize, fock_n: usize) -> usize {
        debug_assert!(qd_level < 2 && fock_n < self.fock_states());
        qd_level * self.fock_states() + fock_n
    }

    /// Projector |qd, n⟩⟨qd, n| as a density matrix.
    pub fn basis_state(&self, qd_level: usize, fock_n: usize) -> DensityMatrix {
        let k = self.index(qd_level, fock_n);
        let mut op = Operator::zeros(self.dim());
        op[(k, k)] = ONE;
        DensityMatrix { space: *self, op }
    }

    pub fn ground(&self) -> DensityMatrix {
        self.basis_state(0, 0)
    }

    pub fn excited(&self) -> DensityMatrix {
        self.basis_state(1, 0)
    }
}

/// Square dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4e}{:+.4e}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.data[k * dim + k] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "rows must form a square matrix");
        Self { dim, data: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self.data[k * self.dim + k]).sum()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * z).collect() }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&v| v * x).collect() }
    }

    /// `self += z * other`
    pub fn axpy(&mut self, z: C64, other: &Operator) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += z * b;
        }
    }

    /// `out = self * rhs`, without allocating.
    pub fn mul_into(&self, rhs: &Operator, out: &mut Operator) {
        let n = self.dim;
        debug_assert_eq!(n, rhs.dim);
        debug_assert_eq!(n, out.dim);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let dst = &mut out.data[i * n..(i + 1) * n];
            dst.fill(ZERO);
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let src = &rhs.data[k * n..(k + 1) * n];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
    }

    pub fn matmul(&self, rhs: &Operator) -> Operator {
        let mut out = Operator::zeros(self.dim);
        self.mul_into(rhs, &mut out);
        out
    }

    /// `self · rhs†`
    pub fn mul_adjoint(&self, rhs: &Operator) -> Operator {
        let n = self.dim;
        debug_assert_eq!(n, rhs.dim);
        Operator::from_fn(n, |i, j| {
            let a = &self.data[i * n..(i + 1) * n];
            let b = &rhs.data[j * n..(j + 1) * n];
            a.iter().zip(b).map(|(&x, &y)| x * y.conj()).sum()
        })
    }

    /// `self† · rhs`
    pub fn adjoint_mul(&self, rhs: &Operator) -> Operator {
        let n = self.dim;
        debug_assert_eq!(n, rhs.dim);
        let mut out = Operator::zeros(n);
        for k in 0..n {
            for i in 0..n {
                let a = self.data[k * n + i].conj();
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// `u · self · u†`
    pub fn conjugate_by(&self, u: &Operator) -> Operator {
        u.matmul(self).mul_adjoint(u)
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        &self.matmul(other) + &other.matmul(self)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Operator) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint_mul(self).distance(&Operator::identity(self.dim)) <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj()));
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Operator) -> Operator {
        let (na, nb) = (self.dim, other.dim);
        Operator::from_fn(na * nb, |i, j| self.data[(i / nb) * na + j / nb] * other.data[(i % nb) * nb + j % nb])
    }

    fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: other.dim });
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Operator> for Operator {
    fn sub_assign(&mut self, rhs: &Operator) {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Density operator tagged with its Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    op: Operator,
}

/// Deviations of a density matrix from a physical state.
#[derive(Clone, Copy, Debug)]
pub struct StateHealth {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-6;
    pub const HERMITIAN_TOL: f64 = 1e-8;
    /// Weak-coupling generators are not completely positive; eigenvalues down
    /// to this floor are tolerated.
    pub const POSITIVITY_FLOOR: f64 = -1e-4;

    pub fn new(space: HilbertSpace, op: Operator) -> Result<Self> {
        if op.dim() != space.dim() {
            return Err(Error::DimensionMismatch { left: space.dim(), right: op.dim() });
        }
        Ok(Self { space, op })
    }

    /// Maximally mixed state I/dim.
    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let n = space.dim();
        Self { space, op: Operator::identity(n).scale_real(1.0 / n as f64) }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn trace(&self) -> C64 {
        self.op.trace()
    }

    pub fn health(&self) -> StateHealth {
        StateHealth {
            trace_error: (self.op.trace() - ONE).norm(),
            hermiticity_error: self.op.hermiticity_error(),
            min_eigenvalue: self.op.hermitian_eigenvalues()[0],
        }
    }

    /// Checks trace, Hermiticity and the positivity floor; tolerated small
    /// negative eigenvalues are logged.
    pub fn validate(&self, t: f64) -> Result<()> {
        self.validate_with_floor(t, Self::POSITIVITY_FLOOR)
    }

    /// As [`validate`](Self::validate) with a custom eigenvalue floor.
    pub fn validate_with_floor(&self, t: f64, floor: f64) -> Result<()> {
        let h = self.health();
        if h.trace_error > Self::TRACE_TOL {
            return Err(Error::Physics { t, what: format!("trace deviates by {:.3e}", h.trace_error) });
        }
        if h.hermiticity_error > Self::HERMITIAN_TOL {
            return Err(Error::Physics { t, what: format!("state not Hermitian (error {:.3e})", h.hermiticity_error) });
        }
        if h.min_eigenvalue < floor {
            return Err(Error::Physics { t, what: format!("negative eigenvalue {:.3e}", h.min_eigenvalue) });
        }
        if h.min_eigenvalue < -1e-10 {
            log::debug!("t = {t:.4} ps: tolerated negative eigenvalue {:.3e}", h.min_eigenvalue);
        }
        Ok(())
    }
}

/// QD lowering/raising operators and the exciton projector, each tensored
/// with the cavity identity when the space has a cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct QdOperators {
    pub sigma: Operator,
    pub sigma_dag: Operator,
    /// σ†σ = |X⟩⟨X|
    pub x: Operator,
}

pub fn build_qd_operators(space: HilbertSpace) -> QdOperators {
    let sigma2 = Operator::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]);
    let sigma = sigma2.kron(&Operator::identity(space.fock_states()));
    let sigma_dag = sigma.adjoint();
    let x = sigma_dag.matmul(&sigma);
    QdOperators { sigma, sigma_dag, x }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CavityOperators {
    pub a: Operator,
    pub a_dag: Operator,
}

/// Truncated Fock ladder `a|n⟩ = √n|n−1⟩`, tensored with the QD identity.
///
/// Truncation makes `[a, a†]` equal the identity except on the top Fock
/// level, where it evaluates to `−n_max`.
pub fn build_cavity_operators(space: HilbertSpace) -> Result<CavityOperators> {
    if !space.has_cavity() {
        return Err(Error::Config("cavity operators requested on a space without a cavity".into()));
    }
    let levels = space.cavity_levels();
    let a_fock = Operator::from_fn(levels, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { ZERO });
    let a = Operator::identity(HilbertSpace::QD_LEVELS).kron(&a_fock);
    let a_dag = a.adjoint();
    Ok(CavityOperators { a, a_dag })
}

/// `L_A[ρ] = AρA† − ½{A†A, ρ}` for an arbitrary (not necessarily Hermitian) ρ.
pub fn lindblad(a: &Operator, rho: &Operator) -> Result<Operator> {
    a.check_dim(rho)?;
    let ada = a.adjoint_mul(a);
    Ok(lindblad_with(a, &ada, rho))
}

/// Lindblad term with a precomputed `A†A`.
pub(crate) fn lindblad_with(a: &Operator, ada: &Operator, rho: &Operator) -> Operator {
    let mut out = a.matmul(rho).mul_adjoint(a);
    let mut anti = ada.matmul(rho);
    anti += &rho.matmul(ada);
    out.axpy(C64::new(-0.5, 0.0), &anti);
    out
}

/// `Tr[Aρ]`.
pub fn expval(a: &Operator, rho: &Operator) -> Result<C64> {
    a.check_dim(rho)?;
    Ok(trace_product(a, rho))
}

/// `Tr[AB]` without forming the product.
pub(crate) fn trace_product(a: &Operator, b: &Operator) -> C64 {
    let n = a.dim;
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a.data[i * n + k] * b.data[k * n + i];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dimensions() {
        assert_eq!(HilbertSpace::qd_only().dim(), 2);
        assert_eq!(HilbertSpace::with_cavity(2).unwrap().dim(), 6);
        assert!(HilbertSpace::with_cavity(0).is_err());
    }

    #[test]
    fn projector_action() {
        let space = HilbertSpace::qd_only();
        let ops = build_qd_operators(space);
        let xx = space.excited().into_op();
        let gg = space.ground().into_op();
        assert_eq!(ops.x.matmul(&xx), xx);
        assert_eq!(ops.x.matmul(&gg).max_abs(), 0.0);
        assert_eq!(ops.sigma.matmul(&ops.sigma).max_abs(), 0.0);
    }

    #[test]
    fn projector_trace_with_cavity() {
        let ops = build_qd_operators(HilbertSpace::with_cavity(2).unwrap());
        assert_eq!(ops.x.trace(), c(3.0, 0.0));
    }

    #[test]
    fn fock_lowering() {
        let space = HilbertSpace::with_cavity(2).unwrap();
        let cav = build_cavity_operators(space).unwrap();
        let g1 = space.index(0, 1);
        let g0 = space.index(0, 0);
        assert_eq!(cav.a[(g0, g1)], ONE);
        let n = cav.a_dag.matmul(&cav.a);
        for qd in 0..2 {
            for k in 0..3 {
                let idx = space.index(qd, k);
                assert!((n[(idx, idx)] - c(k as f64, 0.0)).norm() < 1e-15);
            }
        }
        assert!(n.hermiticity_error() == 0.0);
    }

    #[test]
    fn truncated_commutator() {
        let space = HilbertSpace::with_cavity(2).unwrap();
        let cav = build_cavity_operators(space).unwrap();
        let comm = cav.a.commutator(&cav.a_dag);
        for qd in 0..2 {
            for k in 0..3 {
                let idx = space.index(qd, k);
                let expected = if k < 2 { 1.0 } else { -2.0 };
                assert!((comm[(idx, idx)] - c(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cavity_operators_need_cavity() {
        assert!(build_cavity_operators(HilbertSpace::qd_only()).is_err());
    }

    #[test]
    fn spontaneous_decay_generator() {
        let space = HilbertSpace::qd_only();
        let ops = build_qd_operators(space);
        let out = lindblad(&ops.sigma, space.excited().op()).unwrap();
        let expected = space.ground().op() - space.excited().op();
        assert!(out.distance(&expected) < 1e-15);
    }

    #[test]
    fn dephasing_kills_only_coherences() {
        let space = HilbertSpace::qd_only();
        let ops = build_qd_operators(space);
        let rho = Operator::from_rows(&[&[c(0.3, 0.0), ZERO], &[ZERO, c(0.7, 0.0)]]);
        assert!(lindblad(&ops.x, &rho).unwrap().max_abs() < 1e-16);
        let coh = Operator::from_rows(&[&[c(0.5, 0.0), c(0.5, 0.0)], &[c(0.5, 0.0), c(0.5, 0.0)]]);
        let out = lindblad(&ops.x, &coh).unwrap();
        assert!((out[(0, 1)] - c(-0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cavity_leakage_generator() {
        let space = HilbertSpace::with_cavity(2).unwrap();
        let cav = build_cavity_operators(space).unwrap();
        let out = lindblad(&cav.a, space.basis_state(0, 1).op()).unwrap();
        let expected = space.basis_state(0, 0).op() - space.basis_state(0, 1).op();
        assert!(out.distance(&expected) < 1e-15);
    }

    #[test]
    fn lindblad_rejects_mismatch() {
        let a = Operator::identity(2);
        let rho = Operator::identity(6);
        assert!(matches!(lindblad(&a, &rho), Err(Error::DimensionMismatch { .. })));
        assert!(expval(&a, &rho).is_err());
    }

    #[test]
    fn expectation_values() {
        let space = HilbertSpace::qd_only();
        let ops = build_qd_operators(space);
        assert_eq!(expval(&ops.x, space.excited().op()).unwrap(), ONE);
        assert_eq!(expval(&ops.x, space.ground().op()).unwrap(), ZERO);

        let cspace = HilbertSpace::with_cavity(2).unwrap();
        let cav = build_cavity_operators(cspace).unwrap();
        let n = cav.a_dag.matmul(&cav.a);
        let mixed = DensityMatrix::maximally_mixed(cspace);
        assert!((expval(&n, mixed.op()).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn deterministic_construction() {
        let space = HilbertSpace::with_cavity(3).unwrap();
        assert_eq!(build_qd_operators(space), build_qd_operators(space));
        assert_eq!(build_cavity_operators(space).unwrap(), build_cavity_operators(space).unwrap());
    }

    #[test]
    fn health_of_basis_state() {
        let rho = HilbertSpace::with_cavity(2).unwrap().excited();
        let h = rho.health();
        assert!(h.trace_error < 1e-15 && h.hermiticity_error == 0.0);
        assert!(h.min_eigenvalue.abs() < 1e-14);
        assert!(rho.validate(0.0).is_ok());
        let bad = DensityMatrix::new(rho.space(), rho.op().scale_real(-1.0)).unwrap();
        assert!(bad.validate(1.5).is_err());
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = Operator> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
            .prop_map(move |v| Operator::from_fn(n, |i, j| c(v[i * n + j].0, v[i * n + j].1)))
    }

    fn arb_density(n: usize) -> impl Strategy<Value = Operator> {
        arb_matrix(n).prop_map(|m| {
            let p = m.adjoint_mul(&m);
            let tr = p.trace().re;
            p.scale_real(1.0 / tr)
        })
    }

    proptest! {
        #[test]
        fn kron_mixed_product(a in arb_matrix(2), b in arb_matrix(3)) {
            let lhs = a.kron(&Operator::identity(3)).matmul(&Operator::identity(2).kron(&b));
            prop_assert!(lhs.distance(&a.kron(&b)) < 1e-14);
        }

        #[test]
        fn dissipators_traceless_and_hermitian(a in arb_matrix(6), rho in arb_density(6)) {
            let out = lindblad(&a, &rho).unwrap();
            prop_assert!(out.trace().norm() < 1e-12);
            prop_assert!(out.hermiticity_error() < 1e-12);
        }
    }
}
