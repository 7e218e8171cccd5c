//! Time-dependent Hamiltonians and master-equation solvers.
//!
//! Three backends share one RK4 integrator:
//!
//! * `Unitary`: no phonons; the Hamiltonian in the frame rotating at the
//!   emitter frequency (plus cavity Lindblad terms when a cavity is present).
//! * `WeakCoupling`: second-order phonon memory kernel
//!   `K(t)ρ = ∫ds C(s)[X̂(t−s,t)ρ, X] + h.c.`
//! * `Polaron`: polaron-frame master equation with drive renormalised by B
//!   and two drive-activated dissipation channels.
//!
//! The memory kernels are evaluated through a cache of system propagators
//! `U(τ) = U(τ, t_start)` on the half-step grid. Since
//! `U(t−s, t) = U(t−s)·U(t)†`, the s-integral collapses to
//! `Λ(t) = U(t)·[Σ_k w_k C(s_k) U(t−s_k)† X U(t−s_k)]·U(t)†`, which is
//! independent of ρ and tabulated once per run.

mod hamiltonian;
mod memory;
mod solver;

pub use hamiltonian::{hamiltonian_at, polaron_couplings, HamiltonianParts};
pub use memory::{propagator, KernelMemory, PropagatorCache};
pub use solver::{
    apply_superoperator, evolve, evolve_with_kernel, read_px_final, CavityObservables, MasterEquation, Record,
    Trajectory,
};

use std::f64::consts::PI;

use crate::bath::BathSpec;
use crate::drive::PulseSpec;
use crate::error::{Error, Result};
use crate::qcore::{DensityMatrix, HilbertSpace};
use crate::sps::CavitySpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Unitary,
    WeakCoupling,
    Polaron,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Unitary => "unitary",
            Backend::WeakCoupling => "weak_coupling",
            Backend::Polaron => "polaron",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unitary" => Some(Backend::Unitary),
            "weak_coupling" => Some(Backend::WeakCoupling),
            "polaron" => Some(Backend::Polaron),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitialState {
    Ground,
    /// |X⟩ at t_start with the drive off; used for the upper bounds.
    Excited,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub pulse: PulseSpec,
    pub bath: BathSpec,
    pub cavity: Option<CavitySpec>,
    pub backend: Backend,
    pub initial_state: InitialState,
}

impl ModelSpec {
    /// Bulk quantum dot (no cavity) starting in |G⟩.
    pub fn bulk(pulse: PulseSpec, bath: BathSpec, backend: Backend) -> Self {
        Self { pulse, bath, cavity: None, backend, initial_state: InitialState::Ground }
    }

    pub fn with_cavity(self, cavity: CavitySpec) -> Self {
        Self { cavity: Some(cavity), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.bath.validate()?;
        if let Some(c) = &self.cavity {
            c.validate()?;
        }
        if self.initial_state == InitialState::Excited && !self.pulse.is_off() {
            return Err(Error::Config("excited-state initialisation requires both pulse areas to be zero".into()));
        }
        if self.backend == Backend::Polaron && self.cavity.is_some() {
            return Err(Error::Config("the polaron backend supports the bulk quantum dot only".into()));
        }
        Ok(())
    }

    pub fn space(&self) -> HilbertSpace {
        match &self.cavity {
            None => HilbertSpace::qd_only(),
            Some(c) => HilbertSpace::with_cavity(c.n_max).expect("validated cavity"),
        }
    }

    /// Whether phonon terms enter the dynamics at all.
    pub fn has_phonons(&self) -> bool {
        self.backend != Backend::Unitary && !self.bath.is_phonon_free()
    }

    /// Time beyond which the drive is dropped (its envelope is below 2.4e−16
    /// of the peak there).
    pub fn drive_cutoff(&self) -> f64 {
        DRIVE_CUTOFF_WIDTHS * self.pulse.t_p
    }
}

/// Half-width of the drive support, in units of t_p.
pub const DRIVE_CUTOFF_WIDTHS: f64 = 6.0;

/// How the run decides where to stop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EndTime {
    Fixed(f64),
    /// Stop at the first record point after 3t_p where ⟨σ†σ⟩ + ⟨a†a⟩ drops
    /// below `threshold`; fail if that has not happened by `max`.
    Emission {
        threshold: f64,
        max: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// RK4 step (ps).
    pub dt: f64,
    pub t_start: f64,
    pub end: EndTime,
    /// Kernel truncation (ps).
    pub s_max: f64,
    /// Kernel grid spacing (ps); a multiple of dt/2.
    pub ds: f64,
    /// Store the full state every `record_stride` steps.
    pub record_stride: usize,
    /// Smallest eigenvalue tolerated in recorded states.
    pub positivity_floor: f64,
}

pub const DEFAULT_S_MAX: f64 = 8.0;
pub const DEFAULT_DS: f64 = 0.01;
pub const MAX_DT: f64 = 0.005;
/// Default spacing of recorded states, which is also the two-time grid step.
pub const DEFAULT_RECORD_INTERVAL: f64 = 0.5;
pub const EMISSION_THRESHOLD: f64 = 1e-4;
pub const EMISSION_MAX_TIME: f64 = 4000.0;

/// Steps per period of the fastest drive frequency.
const STEPS_PER_PERIOD: f64 = 40.0;
/// RK4 steps per Rabi period at the pulse peak.
const STEPS_PER_RABI_PERIOD: f64 = 160.0;

impl SolverConfig {
    /// Default discretisation for a model: at least 40 steps per detuning
    /// period, 160 per peak Rabi period, and kernel nodes that resolve the
    /// combined drive frequency 40 times per period.
    pub fn for_model(model: &ModelSpec) -> Self {
        let p = &model.pulse;
        let mut dt_max = MAX_DT;
        if p.delta > 0.0 {
            dt_max = dt_max.min(2.0 * PI / p.delta / STEPS_PER_PERIOD);
        }
        let rabi = p.peak_rabi();
        if rabi > 0.0 {
            dt_max = dt_max.min(2.0 * PI / rabi / STEPS_PER_RABI_PERIOD);
        }
        // dt divides DEFAULT_DS so the kernel grid sits on the step grid.
        let dt = DEFAULT_DS / (DEFAULT_DS / dt_max).ceil();
        let fast = rabi + p.delta;
        let ds_max = if fast > 0.0 { DEFAULT_DS.min(2.0 * PI / fast / STEPS_PER_PERIOD) } else { DEFAULT_DS };
        // ds is a multiple of dt/2 that divides s_max.
        let h = 0.5 * dt;
        let total = (DEFAULT_S_MAX / h).round() as usize;
        let mut j = ((ds_max / h + 1e-9).floor() as usize).max(1);
        while !total.is_multiple_of(j) {
            j -= 1;
        }
        let ds = j as f64 * h;
        let end = if model.cavity.is_some() {
            EndTime::Emission { threshold: EMISSION_THRESHOLD, max: EMISSION_MAX_TIME }
        } else {
            EndTime::Fixed(3.0 * p.t_p)
        };
        Self {
            dt,
            t_start: -3.0 * p.t_p,
            end,
            s_max: DEFAULT_S_MAX,
            ds,
            record_stride: ((DEFAULT_RECORD_INTERVAL / dt).round() as usize).max(1),
            positivity_floor: DensityMatrix::POSITIVITY_FLOOR,
        }
    }

    /// Same discretisation with every step halved (kernel grid unchanged).
    pub fn halved(&self) -> Self {
        Self { dt: self.dt / 2.0, record_stride: self.record_stride * 2, ..*self }
    }

    pub fn half_step(&self) -> f64 {
        0.5 * self.dt
    }

    /// Kernel nodes per half step.
    pub fn kernel_ratio(&self) -> usize {
        (self.ds / self.half_step()).round() as usize
    }

    pub fn record_interval(&self) -> f64 {
        self.dt * self.record_stride as f64
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if model.pulse.delta > 0.0 && self.dt > (2.0 * PI / model.pulse.delta) / STEPS_PER_PERIOD * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "dt = {} resolves the detuning period with fewer than 40 steps",
                self.dt
            )));
        }
        if self.t_start > -3.0 * model.pulse.t_p * (1.0 - 1e-12) {
            return Err(Error::Config(format!("t_start = {} must not exceed -3 t_p", self.t_start)));
        }
        match self.end {
            EndTime::Fixed(t) if t <= self.t_start => {
                return Err(Error::Config(format!("t_end = {t} precedes t_start = {}", self.t_start)));
            }
            EndTime::Emission { threshold, max } if threshold <= 0.0 || max <= self.t_start => {
                return Err(Error::Config("invalid emission-window settings".into()));
            }
            _ => {}
        }
        if !(self.positivity_floor <= 0.0) {
            return Err(Error::Config(format!("positivity_floor = {} must not be positive", self.positivity_floor)));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        if model.has_phonons() {
            let ratio = self.ds / self.half_step();
            if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
                return Err(Error::Config(format!(
                    "kernel spacing ds = {} is not a multiple of dt/2 = {}",
                    self.ds,
                    self.half_step()
                )));
            }
            let n = self.s_max / self.ds;
            if (n - n.round()).abs() > 1e-6 {
                return Err(Error::Config(format!("s_max = {} is not a multiple of ds = {}", self.s_max, self.ds)));
            }
        }
        Ok(())
    }
}
