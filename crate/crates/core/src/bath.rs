//! Super-Ohmic acoustic-phonon bath: spectral density, polaron shift,
//! drive renormalisation and the tabulated memory kernels.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

/// k_B/ħ in rad·ps⁻¹·K⁻¹.
pub const KB_OVER_HBAR: f64 = 1.380649e-23 / 1.054571817e-34 * 1e-12;

/// Upper frequency limit of all bath integrals, in units of ω_c.
const CUTOFF_MULTIPLE: f64 = 8.0;

/// Below this fraction of ω_c, ω·coth(ħω/2k_BT) uses its series expansion.
const SMALL_OMEGA: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathSpec {
    /// Coupling strength (ps²).
    pub alpha: f64,
    /// Cutoff frequency (rad/ps).
    pub omega_c: f64,
    /// Temperature (K).
    pub temperature: f64,
}

impl BathSpec {
    /// GaAs quantum dot at 4 K.
    pub fn gaas() -> Self {
        Self { alpha: 0.03, omega_c: 2.2, temperature: 4.0 }
    }

    pub fn phonon_free() -> Self {
        Self { alpha: 0.0, ..Self::gaas() }
    }

    pub fn new(alpha: f64, omega_c: f64, temperature: f64) -> Result<Self> {
        let spec = Self { alpha, omega_c, temperature };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("phonon coupling alpha = {} must be >= 0", self.alpha)));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::Config(format!("phonon cutoff omega_c = {} must be > 0", self.omega_c)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature {} K must be >= 0", self.temperature)));
        }
        Ok(())
    }

    pub fn is_phonon_free(&self) -> bool {
        self.alpha == 0.0
    }

    /// ν_T = k_B·T/ħ (rad/ps).
    pub fn thermal_frequency(&self) -> f64 {
        KB_OVER_HBAR * self.temperature
    }

    /// ω·coth(ħω/2k_BT), finite at ω = 0.
    fn omega_coth(&self, omega: f64) -> f64 {
        let nu = self.thermal_frequency();
        if nu == 0.0 {
            return omega;
        }
        if omega < SMALL_OMEGA * self.omega_c {
            return 2.0 * nu + omega * omega / (6.0 * nu);
        }
        omega / (omega / (2.0 * nu)).tanh()
    }

    fn upper_limit(&self) -> f64 {
        CUTOFF_MULTIPLE * self.omega_c
    }

    /// Integrand of ∫dω J(ω)/ω^p [coth(·)cos(ωs) − i sin(ωs)] with the
    /// ω-powers of J folded in analytically.
    fn kernel_integrand(&self, omega: f64, s: f64, inverse_power: i32) -> C64 {
        let gauss = (-(omega / self.omega_c).powi(2)).exp();
        // J(ω)/ω^p = α ω^{3−p} e^{..}; one power of ω is absorbed into ω·coth.
        let prefactor = self.alpha * omega.powi(2 - inverse_power) * gauss;
        let (sin, cos) = (omega * s).sin_cos();
        prefactor * C64::new(self.omega_coth(omega) * cos, -omega * sin)
    }

    fn bath_integral(&self, s: f64, inverse_power: i32) -> Result<C64> {
        if self.is_phonon_free() {
            return Ok(C64::new(0.0, 0.0));
        }
        quad::integrate(|w| self.kernel_integrand(w, s, inverse_power), 0.0, self.upper_limit(), QuadOptions::default())
    }
}

/// J_ph(ω) = α ω³ exp(−ω²/ω_c²)
pub fn spectral_density(spec: &BathSpec, omega: f64) -> f64 {
    spec.alpha * omega.powi(3) * (-(omega / spec.omega_c).powi(2)).exp()
}

/// D = ∫J(ω)/ω dω = (√π/4)·α·ω_c³
pub fn polaron_shift(spec: &BathSpec) -> f64 {
    PI.sqrt() / 4.0 * spec.alpha * spec.omega_c.powi(3)
}

/// The same shift by direct quadrature of J(ω)/ω.
pub fn polaron_shift_quadrature(spec: &BathSpec) -> Result<f64> {
    quad::integrate_real(
        |w| spectral_density(spec, w) / w.max(f64::MIN_POSITIVE),
        0.0,
        spec.upper_limit(),
        QuadOptions { abs_tol: 1e-13, ..QuadOptions::default() },
    )
}

/// C(s) = ∫J(ω)[coth(ħω/2k_BT)cos(ωs) − i sin(ωs)]dω  (ps⁻²)
pub fn correlation_c(spec: &BathSpec, s: f64) -> Result<C64> {
    spec.bath_integral(s, 0)
}

/// φ(s) = ∫J(ω)/ω²[coth(ħω/2k_BT)cos(ωs) − i sin(ωs)]dω  (dimensionless)
pub fn correlation_phi(spec: &BathSpec, s: f64) -> Result<C64> {
    spec.bath_integral(s, 2)
}

/// B = exp(−φ(0)/2)
pub fn renorm_b(spec: &BathSpec) -> Result<f64> {
    Ok((-0.5 * correlation_phi(spec, 0.0)?.re).exp())
}

/// Bath kernels tabulated on a uniform delay grid `s_k = k·ds`.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub spec: BathSpec,
    pub ds: f64,
    pub s_grid: Vec<f64>,
    pub c_values: Vec<C64>,
    pub phi_values: Vec<C64>,
    pub polaron_shift: f64,
    pub renorm_b: f64,
}

/// Largest admissible |C(s_max)|/|C(0)|.
pub const TRUNCATION_RATIO: f64 = 1e-4;

pub fn build_kernel_table(spec: &BathSpec, ds: f64, s_max: f64) -> Result<KernelTable> {
    spec.validate()?;
    if !(ds > 0.0 && s_max > 0.0) {
        return Err(Error::Config(format!("kernel grid needs ds > 0 and s_max > 0 (got {ds}, {s_max})")));
    }
    let n = (s_max / ds).round() as usize;
    if ((n as f64) * ds - s_max).abs() > 1e-9 * s_max {
        return Err(Error::Config(format!("s_max = {s_max} is not a multiple of ds = {ds}")));
    }
    let s_grid: Vec<f64> = (0..=n).map(|k| k as f64 * ds).collect();
    let c_values = s_grid.iter().map(|&s| correlation_c(spec, s)).collect::<Result<Vec<_>>>()?;
    let phi_values = s_grid.iter().map(|&s| correlation_phi(spec, s)).collect::<Result<Vec<_>>>()?;
    if !spec.is_phonon_free() {
        let ratio = c_values[n].norm() / c_values[0].norm();
        if ratio > TRUNCATION_RATIO {
            return Err(Error::Config(format!(
                "kernel not decayed at s_max = {s_max} ps: |C(s_max)|/|C(0)| = {ratio:.2e}"
            )));
        }
    }
    let renorm_b = (-0.5 * phi_values[0].re).exp();
    Ok(KernelTable { spec: *spec, ds, s_grid, c_values, phi_values, polaron_shift: polaron_shift(spec), renorm_b })
}

impl KernelTable {
    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    pub fn s_max(&self) -> f64 {
        *self.s_grid.last().unwrap_or(&0.0)
    }

    /// Linear interpolation of C at arbitrary delay; zero beyond s_max.
    pub fn c_at(&self, s: f64) -> C64 {
        interpolate(&self.c_values, self.ds, s)
    }

    pub fn phi_at(&self, s: f64) -> C64 {
        interpolate(&self.phi_values, self.ds, s)
    }

    /// Polaron-frame correlations C_xx = B²(cosh φ − 1), C_yy = B² sinh φ.
    pub fn polaron_kernels(&self) -> (Vec<C64>, Vec<C64>) {
        let b2 = self.renorm_b * self.renorm_b;
        let xx = self.phi_values.iter().map(|p| (p.cosh() - 1.0) * b2).collect();
        let yy = self.phi_values.iter().map(|p| p.sinh() * b2).collect();
        (xx, yy)
    }

    /// Re ∫₀^{s_max} C(s) e^{iωs} ds by the trapezoid rule: the phonon
    /// emission (ω > 0) and absorption (ω < 0) rate at frequency |ω|.
    pub fn one_sided_spectrum(&self, omega: f64) -> f64 {
        let n = self.len();
        let mut acc = C64::new(0.0, 0.0);
        for (k, (&s, &c)) in self.s_grid.iter().zip(&self.c_values).enumerate() {
            let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
            acc += c * C64::from_polar(w, omega * s);
        }
        (acc * self.ds).re
    }

    /// Columns: s, Re C, Im C, Re φ, Im φ.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# phonon kernels: alpha = {} ps^2, omega_c = {} rad/ps, T = {} K",
            self.spec.alpha, self.spec.omega_c, self.spec.temperature
        )?;
        writeln!(w, "# D = {} rad/ps, B = {}", self.polaron_shift, self.renorm_b)?;
        writeln!(w, "# s [ps], C [ps^-2], phi [1]")?;
        writeln!(w, "s,re_c,im_c,re_phi,im_phi")?;
        for k in 0..self.len() {
            let (c, p) = (self.c_values[k], self.phi_values[k]);
            writeln!(w, "{},{},{},{},{}", self.s_grid[k], c.re, c.im, p.re, p.im)?;
        }
        Ok(())
    }
}

fn interpolate(values: &[C64], ds: f64, s: f64) -> C64 {
    if s < 0.0 {
        return values[0];
    }
    let x = s / ds;
    let k = x.floor() as usize;
    if k + 1 >= values.len() {
        return if k + 1 == values.len() && (x - k as f64) == 0.0 { values[k] } else { C64::new(0.0, 0.0) };
    }
    let f = x - k as f64;
    values[k] * (1.0 - f) + values[k + 1] * f
}
