use num_complex::Complex64 as C64;

use super::{Backend, ModelSpec};
use crate::bath::{self, KernelTable};
use crate::drive::drive_amplitude;
use crate::error::Result;
use crate::qcore::{build_cavity_operators, build_qd_operators, Operator, QdOperators};

/// Exciton energy offset (rad/ps) in the rotating frame used by each
/// backend, given the polaron shift `d`.
///
/// The weak-coupling kernel itself generates the −D polaron shift; the
/// frame rotates at the shifted exciton frequency, which leaves `+D` on
/// |X⟩⟨X| so the two cancel for a bare exciton. The polaron backend already
/// lives in the shifted frame.
pub fn frame_offset(backend: Backend, d: f64) -> f64 {
    match backend {
        Backend::WeakCoupling => d,
        Backend::Unitary | Backend::Polaron => 0.0,
    }
}

/// Time-independent part of H plus the operators multiplying the drive.
#[derive(Clone, Debug)]
pub struct HamiltonianParts {
    /// Offset and cavity coupling, rad/ps.
    pub static_part: Operator,
    /// σ†/2 times the drive renormalisation (B for the polaron frame, else 1).
    half_raising: Operator,
    qd: QdOperators,
    drive_factor: f64,
    model: ModelSpec,
}

impl HamiltonianParts {
    /// `d` and `b` are the polaron shift and renormalisation of the bath.
    pub fn new(model: &ModelSpec, d: f64, b: f64) -> Result<Self> {
        model.validate()?;
        let space = model.space();
        let qd = build_qd_operators(space);
        let offset = if model.has_phonons() { frame_offset(model.backend, d) } else { 0.0 };
        let mut static_part = qd.x.scale_real(offset);
        if let Some(cav) = &model.cavity {
            let ops = build_cavity_operators(space)?;
            let coupling = &ops.a_dag.matmul(&qd.sigma) + &ops.a.matmul(&qd.sigma_dag);
            static_part.axpy(C64::new(cav.g, 0.0), &coupling);
        }
        let drive_factor = if model.backend == Backend::Polaron && model.has_phonons() { b } else { 1.0 };
        let half_raising = qd.sigma_dag.scale_real(0.5 * drive_factor);
        Ok(Self { static_part, half_raising, qd, drive_factor, model: *model })
    }

    pub fn from_table(model: &ModelSpec, table: &KernelTable) -> Result<Self> {
        Self::new(model, table.polaron_shift, table.renorm_b)
    }

    /// Drive amplitude Ω̃(t) as seen by the dynamics: zero beyond the drive
    /// cutoff.
    pub fn drive(&self, t: f64) -> C64 {
        if t.abs() > self.model.drive_cutoff() {
            C64::new(0.0, 0.0)
        } else {
            drive_amplitude(&self.model.pulse, t)
        }
    }

    pub fn drive_factor(&self) -> f64 {
        self.drive_factor
    }

    pub fn qd(&self) -> &QdOperators {
        &self.qd
    }

    /// H(t)/ħ.
    pub fn at(&self, t: f64) -> Operator {
        let amp = self.drive(t);
        let mut h = self.static_part.clone();
        if amp != C64::new(0.0, 0.0) {
            let term = self.half_raising.scale(amp);
            h += &term;
            h += &term.adjoint();
        }
        h
    }

    /// The drive quadratures A_x(t), A_y(t) (divided by ħ) of the polaron
    /// dissipator.
    pub fn polaron_couplings(&self, t: f64) -> (Operator, Operator) {
        let amp = self.drive(t);
        let up = self.half_raising.scale(amp);
        let down = up.adjoint();
        let a_x = &up + &down;
        let a_y = (&up - &down).scale(C64::new(0.0, 1.0));
        (a_x, a_y)
    }
}

/// H(t)/ħ for a model, in rad/ps. Phonon parameters (D, B) are evaluated
/// from the bath on each call; solvers use [`HamiltonianParts`] instead.
pub fn hamiltonian_at(model: &ModelSpec, t: f64) -> Result<Operator> {
    let (d, b) =
        if model.has_phonons() { (bath::polaron_shift(&model.bath), bath::renorm_b(&model.bath)?) } else { (0.0, 1.0) };
    Ok(HamiltonianParts::new(model, d, b)?.at(t))
}

/// (A_x(t), A_y(t)) for a model, evaluated like [`hamiltonian_at`].
pub fn polaron_couplings(model: &ModelSpec, t: f64) -> Result<(Operator, Operator)> {
    let b = if model.has_phonons() { bath::renorm_b(&model.bath)? } else { 1.0 };
    Ok(HamiltonianParts::new(model, 0.0, b)?.polaron_couplings(t))
}
