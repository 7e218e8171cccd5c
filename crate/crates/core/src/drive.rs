//! Gaussian pulse envelopes and the dichromatic drive.
//!
//! Times in ps, angular frequencies in rad/ps. Pulses are centred at t = 0.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Two Gaussian pulses of equal width, detuned by `+delta` (blue) and
/// `-delta` (red) from the emitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec {
    /// Blue pulse area (rad).
    pub theta_b: f64,
    /// Red pulse area (rad).
    pub theta_r: f64,
    /// Temporal width (ps).
    pub t_p: f64,
    /// Detuning magnitude (rad/ps).
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Color {
    Blue,
    Red,
}

impl PulseSpec {
    pub fn new(theta_b: f64, theta_r: f64, t_p: f64, delta: f64) -> Result<Self> {
        let spec = Self { theta_b, theta_r, t_p, delta };
        spec.validate()?;
        Ok(spec)
    }

    /// Pulse switched off entirely (used for excited-state initialisation).
    pub fn off(t_p: f64) -> Self {
        Self { theta_b: 0.0, theta_r: 0.0, t_p, delta: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta_b, self.theta_r, self.t_p, self.delta].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config(format!("non-finite pulse parameter in {self:?}")));
        }
        if self.t_p <= 0.0 {
            return Err(Error::Config(format!("pulse width t_p = {} must be positive", self.t_p)));
        }
        if self.theta_b < 0.0 || self.theta_r < 0.0 {
            return Err(Error::Config("pulse areas must be non-negative".into()));
        }
        if self.delta < 0.0 {
            return Err(Error::Config("detuning magnitude must be non-negative".into()));
        }
        Ok(())
    }

    /// η = t_p·δ
    pub fn eta(&self) -> f64 {
        self.t_p * self.delta
    }

    pub fn is_off(&self) -> bool {
        self.theta_b == 0.0 && self.theta_r == 0.0
    }

    pub fn area(&self, which: Color) -> f64 {
        match which {
            Color::Blue => self.theta_b,
            Color::Red => self.theta_r,
        }
    }

    /// Areas exchanged.
    pub fn swapped(&self) -> Self {
        Self { theta_b: self.theta_r, theta_r: self.theta_b, ..*self }
    }

    /// Sum of both envelope peaks: an upper bound on |Ω̃(t)|.
    pub fn peak_rabi(&self) -> f64 {
        (self.theta_b + self.theta_r) / (self.t_p * PI.sqrt())
    }
}

fn gaussian(theta: f64, t_p: f64, t: f64) -> f64 {
    let x = t / t_p;
    theta / (t_p * PI.sqrt()) * (-x * x).exp()
}

/// Ω_j(t) = Θ_j/(t_p√π)·exp(−(t/t_p)²)
pub fn envelope(spec: &PulseSpec, which: Color, t: f64) -> f64 {
    gaussian(spec.area(which), spec.t_p, t)
}

/// Ω̃(t) = Ω_b(t)e^{−iδt} + Ω_r(t)e^{+iδt}: the coefficient of (1/2)σ† in the
/// rotating-frame Hamiltonian.
pub fn drive_amplitude(spec: &PulseSpec, t: f64) -> C64 {
    let shape = gaussian(1.0, spec.t_p, t);
    if shape == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let phase = C64::from_polar(1.0, -spec.delta * t);
    (spec.theta_b * phase + spec.theta_r * phase.conj()) * shape
}

/// Spectral component of a Gaussian pulse of area `theta` at the emitter
/// frequency: ∫Ω(t)cos(δt)dt = Θ·exp(−η²/4).
pub fn spectral_component_xi(theta: f64, eta: f64) -> f64 {
    theta * (-eta * eta / 4.0).exp()
}
