//! Single-photon-source figures of merit: photons collected from the cavity,
//! background loss, two-time field correlations by the quantum regression
//! theorem, and the indistinguishability of successive photons.
//!
//! Two-time quantities live on a triangle: outer times t_i are the recorded
//! states of the emission run, delays s_j = j·Δ run up to the end of the
//! window, with Δ the record spacing.

use std::io::{self, Write};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bath::{BathSpec, KernelTable};
use crate::drive::PulseSpec;
use crate::dynamics::{
    apply_superoperator, Backend, EndTime, InitialState, MasterEquation, ModelSpec, SolverConfig, Trajectory,
};
use crate::error::{Error, Result};
use crate::qcore::{build_cavity_operators, trace_product, Operator};

/// Cavity and loss parameters, rates in rad/ps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavitySpec {
    pub g: f64,
    pub kappa: f64,
    pub gamma_b: f64,
    pub gamma_d: f64,
    pub gamma_coll: f64,
    pub n_max: usize,
}

impl CavitySpec {
    /// Default micropillar parameters with full collection.
    pub fn micropillar() -> Self {
        Self { g: 0.041, kappa: 0.46, gamma_b: 0.45e-3, gamma_d: 0.13e-3, gamma_coll: 1.0, n_max: 2 }
    }

    /// Resonant excitation needs cross-polarised filtering, which halves collection.
    pub fn micropillar_resonant() -> Self {
        Self { gamma_coll: 0.5, ..Self::micropillar() }
    }

    /// No background decay, no pure dephasing.
    pub fn lossless(self) -> Self {
        Self { gamma_b: 0.0, gamma_d: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("kappa", self.kappa), ("gamma_b", self.gamma_b), ("gamma_d", self.gamma_d)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("cavity {name} = {v} must be a non-negative rate")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma_coll) {
            return Err(Error::Config(format!("gamma_coll = {} must lie in [0, 1]", self.gamma_coll)));
        }
        if self.n_max < 2 {
            return Err(Error::Config(format!("n_max = {} must be at least 2", self.n_max)));
        }
        Ok(())
    }
}

/// Span (ps) over which the final decay rate is estimated for tail corrections.
const TAIL_FIT_SPAN: f64 = 10.0;

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Decay rate of the total excitation over the last stretch of the run,
/// or `None` when it is not decaying.
fn final_decay_rate(traj: &Trajectory) -> Option<f64> {
    let cav = traj.cavity.as_ref()?;
    let n = traj.times.len();
    let lag = ((TAIL_FIT_SPAN / traj.dt).round() as usize).min(n - 1);
    if lag == 0 {
        return None;
    }
    let total = |k: usize| traj.p_x[k] + cav.n_photon[k];
    let (early, late) = (total(n - 1 - lag), total(n - 1));
    if late <= 0.0 || early <= late {
        return None;
    }
    Some((early / late).ln() / (lag as f64 * traj.dt))
}

/// ∫ f dt over the run plus f(t_end)/rate for the exponential tail.
fn integral_with_tail(values: &[f64], traj: &Trajectory) -> f64 {
    let body = trapezoid(values, traj.dt);
    let tail = match (final_decay_rate(traj), values.last()) {
        (Some(rate), Some(&v)) => v.max(0.0) / rate,
        _ => 0.0,
    };
    body + tail
}

fn cavity_of(traj: &Trajectory) -> Result<&crate::dynamics::CavityObservables> {
    traj.cavity.as_ref().ok_or_else(|| Error::Domain("trajectory has no cavity observables".into()))
}

/// Photons leaving through the cavity per pulse, before collection losses:
/// κ∫⟨a†a⟩dt.
pub fn cavity_emission(traj: &Trajectory, cavity: &CavitySpec) -> Result<f64> {
    let cav = cavity_of(traj)?;
    Ok(cavity.kappa * integral_with_tail(&cav.n_photon, traj))
}

/// N = γ_coll·κ∫⟨a†a⟩dt.
pub fn collected_photons(traj: &Trajectory, cavity: &CavitySpec) -> Result<f64> {
    Ok(cavity.gamma_coll * cavity_emission(traj, cavity)?)
}

/// N_b = Γ_b∫⟨σ†σ⟩dt.
pub fn background_loss(traj: &Trajectory, cavity: &CavitySpec) -> Result<f64> {
    cavity_of(traj)?;
    Ok(cavity.gamma_b * integral_with_tail(&traj.p_x, traj))
}

/// Two-time correlations on the triangle t_i + s_j ≤ t_end. Row i holds
/// delays j = 0..len−i.
#[derive(Clone, Debug)]
pub struct CorrelationGrid {
    pub t_grid: Vec<f64>,
    pub spacing: f64,
    /// ⟨a†(t)a(t+s)⟩.
    pub g1: Vec<Vec<C64>>,
    /// ⟨a†(t)a†(t+s)a(t+s)a(t)⟩.
    pub g2: Vec<Vec<f64>>,
    /// ⟨a†a⟩(t)·⟨a†a⟩(t+s).
    pub g2_pop: Vec<Vec<f64>>,
    /// ⟨a⟩(t).
    pub mean_a: Vec<C64>,
    /// ⟨a†a⟩(t).
    pub n_photon: Vec<f64>,
}

impl CorrelationGrid {
    pub fn s_grid(&self) -> Vec<f64> {
        (0..self.t_grid.len()).map(|j| j as f64 * self.spacing).collect()
    }

    /// Columns t, s, Re g1, Im g1, g2, G2_pop.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# t, s in ps; g1 = <a^dag(t) a(t+s)>; g2 = <a^dag(t) a^dag(t+s) a(t+s) a(t)>")?;
        writeln!(w, "# g2_pop = <a^dag a>(t) <a^dag a>(t+s)")?;
        writeln!(w, "t,s,re_g1,im_g1,g2,g2_pop")?;
        for (i, t) in self.t_grid.iter().enumerate() {
            for j in 0..self.g1[i].len() {
                let g1 = self.g1[i][j];
                writeln!(
                    w,
                    "{t:.6},{:.6},{:.12e},{:.12e},{:.12e},{:.12e}",
                    j as f64 * self.spacing,
                    g1.re,
                    g1.im,
                    self.g2[i][j],
                    self.g2_pop[i][j]
                )?;
            }
        }
        Ok(())
    }
}

/// Φ^k by repeated squaring.
fn superoperator_power(s: &Operator, mut k: usize) -> Operator {
    let mut result = Operator::identity(s.dim());
    let mut base = s.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = base.matmul(&result);
        }
        k >>= 1;
        if k > 0 {
            base = base.matmul(&base);
        }
    }
    result
}

/// The map from step `first` to step `first + steps`, built by stepping each
/// basis matrix.
fn interval_superoperator(eq: &MasterEquation, first: usize, steps: usize) -> Operator {
    let dim = eq.space().dim();
    let n = dim * dim;
    let mut phi = Operator::zeros(n);
    for col in 0..n {
        let mut rho = Operator::zeros(dim);
        rho.as_mut_slice()[col] = C64::new(1.0, 0.0);
        for k in 0..steps {
            rho = eq.step(first + k, &rho);
        }
        for (row, v) in rho.as_slice().iter().enumerate() {
            phi[(row, col)] = *v;
        }
    }
    phi
}

/// Two-time correlations from a cavity trajectory produced by `eq`, on the
/// grid of its recorded states. The seeds ρ(t)a† and aρ(t)a† are propagated
/// with the full generator (same Hamiltonian, phonon kernel and Lindblad
/// terms as the single-time run).
pub fn qrt_correlations(eq: &MasterEquation, traj: &Trajectory) -> Result<CorrelationGrid> {
    let ops = build_cavity_operators(eq.space())?;
    let number = ops.a_dag.matmul(&ops.a);
    let stride = traj.record_stride;
    let records: Vec<_> = traj.records.iter().filter(|r| r.step % stride == 0).collect();
    if records.len() < 2 {
        return Err(Error::Domain("need at least two recorded states for two-time correlations".into()));
    }
    let intervals = records.len() - 1;
    let first_static = eq.first_static_step();
    let static_phi = if intervals * stride > first_static {
        Some(superoperator_power(&eq.step_superoperator(first_static), stride))
    } else {
        None
    };
    let phis: Vec<Option<Operator>> = (0..intervals)
        .into_par_iter()
        .map(|k| if k * stride >= first_static { None } else { Some(interval_superoperator(eq, k * stride, stride)) })
        .collect();
    let phi = |k: usize| phis[k].as_ref().or(static_phi.as_ref()).expect("static map exists");

    let rows: Vec<(Vec<C64>, Vec<f64>)> = (0..records.len())
        .into_par_iter()
        .map(|i| {
            let rho = records[i].state.op();
            let mut first = rho.mul_adjoint(&ops.a);
            let mut second = ops.a.matmul(&first);
            let len = records.len() - i;
            let mut g1 = Vec::with_capacity(len);
            let mut g2 = Vec::with_capacity(len);
            for j in 0..len {
                g1.push(trace_product(&ops.a, &first));
                g2.push(trace_product(&number, &second).re);
                if j + 1 < len {
                    let p = phi(i + j);
                    first = apply_superoperator(p, &first);
                    second = apply_superoperator(p, &second);
                }
            }
            (g1, g2)
        })
        .collect();

    let n_photon: Vec<f64> = records.iter().map(|r| trace_product(&number, r.state.op()).re).collect();
    let mean_a: Vec<C64> = records.iter().map(|r| trace_product(&ops.a, r.state.op())).collect();
    let g2_pop = (0..records.len()).map(|i| (i..records.len()).map(|k| n_photon[i] * n_photon[k]).collect()).collect();
    let (g1, g2) = rows.into_iter().unzip();
    Ok(CorrelationGrid {
        t_grid: records.iter().map(|r| r.t).collect(),
        spacing: traj.dt * stride as f64,
        g1,
        g2,
        g2_pop,
        mean_a,
        n_photon,
    })
}

/// ∬ f(i, j) over the triangle by trapezoid in s and then in t.
fn triangle_integral(grid: &CorrelationGrid, f: impl Fn(usize, usize) -> f64) -> f64 {
    let h = grid.spacing;
    let rows: Vec<f64> = (0..grid.t_grid.len())
        .map(|i| {
            let vals: Vec<f64> = (0..grid.g1[i].len()).map(|j| f(i, j)).collect();
            trapezoid(&vals, h)
        })
        .collect();
    trapezoid(&rows, h)
}

/// Parts of the indistinguishability ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Indistinguishability {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// I = 1 − ∬(G2_pop + g2 − |g1|²) / ∬(2G2_pop − |⟨a(t+s)⟩⟨a†(t)⟩|²).
pub fn indistinguishability(grid: &CorrelationGrid) -> Result<Indistinguishability> {
    let numerator = triangle_integral(grid, |i, j| grid.g2_pop[i][j] + grid.g2[i][j] - grid.g1[i][j].norm_sqr());
    let denominator = triangle_integral(grid, |i, j| {
        2.0 * grid.g2_pop[i][j] - (grid.mean_a[i + j] * grid.mean_a[i].conj()).norm_sqr()
    });
    if !(denominator.abs() > 1e-14) {
        return Err(Error::Domain(format!(
            "indistinguishability undefined: denominator {denominator:e} (no emission)"
        )));
    }
    Ok(Indistinguishability { value: 1.0 - numerator / denominator, numerator, denominator })
}

/// Phonon backend used for a bath: weak coupling unless the bath is empty.
fn backend_for(bath: &BathSpec) -> Backend {
    if bath.is_phonon_free() {
        Backend::Unitary
    } else {
        Backend::WeakCoupling
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperBounds {
    /// Fraction of the initial excitation leaving through the cavity.
    pub beta: f64,
    pub indistinguishability: f64,
    pub background: f64,
}

/// β and I for an emitter initialised in |X⟩ with no drive.
pub fn upper_bounds(cavity: &CavitySpec, bath: &BathSpec, table: Option<&KernelTable>) -> Result<UpperBounds> {
    let model = ModelSpec {
        pulse: PulseSpec::off(1.0),
        bath: *bath,
        cavity: Some(*cavity),
        backend: backend_for(bath),
        initial_state: InitialState::Excited,
    };
    let config = SolverConfig::for_model(&model);
    upper_bounds_with(&model, &config, table)
}

/// As [`upper_bounds`] for an explicit model and discretisation.
pub fn upper_bounds_with(model: &ModelSpec, config: &SolverConfig, table: Option<&KernelTable>) -> Result<UpperBounds> {
    let cavity = model.cavity.ok_or_else(|| Error::Config("upper bounds need a cavity".into()))?;
    if model.initial_state != InitialState::Excited {
        return Err(Error::Config("upper bounds need the excited initial state".into()));
    }
    let eq = MasterEquation::new(model, config, table)?;
    let traj = eq.evolve()?;
    let corr = qrt_correlations(&eq, &traj)?;
    Ok(UpperBounds {
        beta: cavity_emission(&traj, &cavity)?,
        indistinguishability: indistinguishability(&corr)?.value,
        background: background_loss(&traj, &cavity)?,
    })
}

/// Figures of merit of one cavity run.
#[derive(Clone, Debug)]
pub struct FomReport {
    pub collected: f64,
    pub background: f64,
    pub indistinguishability: f64,
    /// P_X at 3t_p of the same pulse without the cavity.
    pub p_x_final: f64,
    /// κ∫⟨a†a⟩ + N_b + (1 − P_X) − 1.
    pub budget_residual: f64,
    pub t_end: f64,
    pub model: ModelSpec,
    pub config: SolverConfig,
}

impl FomReport {
    pub fn entries(&self) -> Vec<(String, String)> {
        let p = &self.model.pulse;
        let b = &self.model.bath;
        let mut out: Vec<(String, String)> = vec![
            ("N".into(), format!("{:.6}", self.collected)),
            ("N_b".into(), format!("{:.6}", self.background)),
            ("I".into(), format!("{:.6}", self.indistinguishability)),
            ("P_X_final".into(), format!("{:.6}", self.p_x_final)),
            ("budget_residual".into(), format!("{:.3e}", self.budget_residual)),
            ("t_end_ps".into(), format!("{:.3}", self.t_end)),
            ("backend".into(), self.model.backend.name().into()),
            ("theta_b_pi".into(), format!("{}", p.theta_b / std::f64::consts::PI)),
            ("theta_r_pi".into(), format!("{}", p.theta_r / std::f64::consts::PI)),
            ("t_p_ps".into(), format!("{}", p.t_p)),
            ("delta_rad_per_ps".into(), format!("{}", p.delta)),
            ("alpha_ps2".into(), format!("{}", b.alpha)),
            ("omega_c_rad_per_ps".into(), format!("{}", b.omega_c)),
            ("temperature_k".into(), format!("{}", b.temperature)),
            ("dt_ps".into(), format!("{}", self.config.dt)),
            ("ds_ps".into(), format!("{}", self.config.ds)),
            ("s_max_ps".into(), format!("{}", self.config.s_max)),
        ];
        if let Some(c) = &self.model.cavity {
            out.extend([
                ("g".to_string(), format!("{}", c.g)),
                ("kappa".to_string(), format!("{}", c.kappa)),
                ("gamma_b".to_string(), format!("{}", c.gamma_b)),
                ("gamma_d".to_string(), format!("{}", c.gamma_d)),
                ("gamma_coll".to_string(), format!("{}", c.gamma_coll)),
                ("n_max".to_string(), format!("{}", c.n_max)),
            ]);
        }
        out
    }

    /// `key = value` lines.
    pub fn write_record<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (k, v) in self.entries() {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Full source pipeline for a pulse: cavity run, correlations and a bulk run
/// for P_X. `config` discretises the cavity run; the bulk run reuses its dt
/// and kernel grid.
pub fn figures_of_merit(model: &ModelSpec, config: &SolverConfig, table: Option<&KernelTable>) -> Result<FomReport> {
    let cavity = model.cavity.ok_or_else(|| Error::Config("figures of merit need a cavity".into()))?;
    let eq = MasterEquation::new(model, config, table)?;
    let traj = eq.evolve()?;
    let corr = qrt_correlations(&eq, &traj)?;
    let ind = indistinguishability(&corr)?;
    let background = background_loss(&traj, &cavity)?;
    let emitted = cavity_emission(&traj, &cavity)?;

    let bulk = ModelSpec { cavity: None, ..*model };
    let bulk_config = SolverConfig { end: EndTime::Fixed(3.0 * model.pulse.t_p), ..*config };
    let bulk_traj = MasterEquation::new(&bulk, &bulk_config, table)?.evolve()?;
    let p_x_final = crate::dynamics::read_px_final(&bulk_traj, model.pulse.t_p)?;
    Ok(FomReport {
        collected: cavity.gamma_coll * emitted,
        background,
        indistinguishability: ind.value,
        p_x_final,
        budget_residual: emitted + background + (1.0 - p_x_final) - 1.0,
        t_end: traj.t_end(),
        model: *model,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_relative_eq;

    use super::*;
    use crate::dynamics::{evolve, CavityObservables};

    /// A cavity that empties in tens of ps rather than hundreds.
    fn fast() -> CavitySpec {
        CavitySpec { g: 0.1, kappa: 1.0, gamma_b: 0.0, gamma_d: 0.0, gamma_coll: 1.0, n_max: 2 }
    }

    fn excited(cavity: CavitySpec, bath: BathSpec) -> ModelSpec {
        ModelSpec {
            pulse: PulseSpec::off(1.0),
            bath,
            cavity: Some(cavity),
            backend: backend_for(&bath),
            initial_state: InitialState::Excited,
        }
    }

    fn driven(cavity: CavitySpec, bath: BathSpec, backend: Backend) -> ModelSpec {
        ModelSpec::bulk(PulseSpec::new(PI, 0.0, 1.0, 0.0).unwrap(), bath, backend).with_cavity(cavity)
    }

    fn correlations(model: &ModelSpec, config: &SolverConfig) -> (Trajectory, CorrelationGrid) {
        let eq = MasterEquation::new(model, config, None).unwrap();
        let traj = eq.evolve().unwrap();
        let grid = qrt_correlations(&eq, &traj).unwrap();
        (traj, grid)
    }

    #[test]
    fn cavity_validation() {
        assert!(CavitySpec::micropillar().validate().is_ok());
        assert_eq!(CavitySpec::micropillar_resonant().gamma_coll, 0.5);
        assert!(CavitySpec { kappa: -1.0, ..fast() }.validate().is_err());
        assert!(CavitySpec { gamma_b: f64::NAN, ..fast() }.validate().is_err());
        assert!(CavitySpec { gamma_coll: 1.2, ..fast() }.validate().is_err());
        assert!(CavitySpec { n_max: 1, ..fast() }.validate().is_err());
    }

    #[test]
    fn superoperator_power_matches_repeated_product() {
        let s = Operator::from_fn(3, |i, j| C64::new(0.1 * (i + 2 * j) as f64, 0.05 * i as f64 - 0.02 * j as f64));
        let mut direct = Operator::identity(3);
        for k in 0..=11 {
            assert!(superoperator_power(&s, k).distance(&direct) < 1e-12 * direct.max_abs().max(1.0));
            direct = s.matmul(&direct);
        }
    }

    #[test]
    fn exponential_tail_is_added() {
        // P_X = e^{-γt} sampled on [0, 20]; the tail beyond 20 is e^{-20γ}/γ.
        let (gamma, dt) = (0.2, 0.01);
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * dt).collect();
        let p_x: Vec<f64> = times.iter().map(|t| (-gamma * t).exp()).collect();
        let traj = Trajectory {
            t_start: 0.0,
            dt,
            record_stride: 50,
            cavity: Some(CavityObservables {
                n_photon: vec![0.0; times.len()],
                field: vec![C64::new(0.0, 0.0); times.len()],
            }),
            times,
            p_x,
            records: Vec::new(),
        };
        let cavity = CavitySpec { gamma_b: 1.0, ..fast() };
        assert_relative_eq!(background_loss(&traj, &cavity).unwrap(), 1.0 / gamma, max_relative = 1e-4);
        let bare = Trajectory { cavity: None, ..traj };
        assert!(matches!(background_loss(&bare, &cavity), Err(Error::Domain(_))));
        assert!(matches!(collected_photons(&bare, &cavity), Err(Error::Domain(_))));
    }

    #[test]
    fn lossless_emitter_is_ideal() {
        let ub = upper_bounds(&fast(), &BathSpec::phonon_free(), None).unwrap();
        assert!((ub.beta - 1.0).abs() < 1e-3, "{ub:?}");
        assert!((ub.indistinguishability - 1.0).abs() < 1e-3, "{ub:?}");
        assert_eq!(ub.background, 0.0);
    }

    #[test]
    fn excitation_budget_closes_without_phonons() {
        let cavity = CavitySpec { gamma_b: 0.02, gamma_d: 0.01, ..fast() };
        let model = excited(cavity, BathSpec::phonon_free());
        let traj = evolve(&model, &SolverConfig::for_model(&model)).unwrap();
        let out = cavity_emission(&traj, &cavity).unwrap() + background_loss(&traj, &cavity).unwrap();
        assert!((out - 1.0).abs() < 1e-3, "{out}");
    }

    #[test]
    fn purcell_decay_rate() {
        let cavity = CavitySpec { gamma_b: 0.0, gamma_d: 0.0, ..CavitySpec::micropillar() };
        let model = excited(cavity, BathSpec::phonon_free());
        let config = SolverConfig { end: EndTime::Fixed(150.0), ..SolverConfig::for_model(&model) };
        let traj = evolve(&model, &config).unwrap();
        let at = |t: f64| traj.p_x[((t - traj.t_start) / traj.dt).round() as usize];
        let rate = (at(50.0) / at(150.0)).ln() / 100.0;
        let purcell = 4.0 * cavity.g * cavity.g / cavity.kappa;
        assert!((rate / purcell - 1.0).abs() < 0.15, "{rate} vs {purcell}");
    }

    #[test]
    fn zero_delay_identities() {
        let model = driven(fast(), BathSpec::gaas(), Backend::WeakCoupling);
        let (_, grid) = correlations(&model, &SolverConfig::for_model(&model));
        let ops = build_cavity_operators(model.space()).unwrap();
        let a2 = ops.a.matmul(&ops.a);
        let eq = MasterEquation::new(&model, &SolverConfig::for_model(&model), None).unwrap();
        let traj = eq.evolve().unwrap();
        let records: Vec<_> = traj.records.iter().filter(|r| r.step % traj.record_stride == 0).collect();
        for (i, r) in records.iter().enumerate() {
            assert!((grid.g1[i][0] - C64::new(grid.n_photon[i], 0.0)).norm() < 1e-8);
            let pairs = trace_product(&a2.adjoint().matmul(&a2), r.state.op()).re;
            assert!((grid.g2[i][0] - pairs).abs() < 1e-8);
            assert!((grid.g2_pop[i][0] - grid.n_photon[i].powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_photons_are_antibunched() {
        let model = driven(fast(), BathSpec::phonon_free(), Backend::Unitary);
        let (_, grid) = correlations(&model, &SolverConfig::for_model(&model));
        let ratio = triangle_integral(&grid, |i, j| grid.g2[i][j]) / triangle_integral(&grid, |i, j| grid.g2_pop[i][j]);
        assert!(ratio < 0.05, "{ratio}");
    }

    #[test]
    fn undriven_ground_state_emits_nothing() {
        let model = ModelSpec::bulk(PulseSpec::off(1.0), BathSpec::phonon_free(), Backend::Unitary).with_cavity(fast());
        let (traj, grid) = correlations(&model, &SolverConfig::for_model(&model));
        assert!(grid.g1.iter().flatten().all(|v| v.norm() == 0.0));
        assert!(grid.g2.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(collected_photons(&traj, &fast()).unwrap(), 0.0);
        assert!(matches!(indistinguishability(&grid), Err(Error::Domain(_))));
    }

    #[test]
    fn collection_efficiency_scales_photons_only() {
        let full = driven(fast(), BathSpec::gaas(), Backend::WeakCoupling);
        let half = driven(CavitySpec { gamma_coll: 0.5, ..fast() }, BathSpec::gaas(), Backend::WeakCoupling);
        let a = figures_of_merit(&full, &SolverConfig::for_model(&full), None).unwrap();
        let b = figures_of_merit(&half, &SolverConfig::for_model(&half), None).unwrap();
        assert_relative_eq!(b.collected, 0.5 * a.collected, max_relative = 1e-12);
        assert_eq!(a.indistinguishability, b.indistinguishability);
        assert_eq!(a.budget_residual, b.budget_residual);
        assert!(a.budget_residual.abs() < 0.01, "{}", a.budget_residual);
    }

    #[test]
    fn background_decay_costs_photons() {
        let mut last = f64::INFINITY;
        for gamma_b in [0.0, 0.01, 0.05] {
            let cavity = CavitySpec { gamma_b, ..fast() };
            let model = excited(cavity, BathSpec::phonon_free());
            let traj = evolve(&model, &SolverConfig::for_model(&model)).unwrap();
            let n = collected_photons(&traj, &cavity).unwrap();
            assert!(n < last);
            if gamma_b == 0.0 {
                assert_eq!(background_loss(&traj, &cavity).unwrap(), 0.0);
            }
            last = n;
        }
    }

    #[test]
    fn photon_number_truncation_converges() {
        let two = driven(CavitySpec::micropillar(), BathSpec::phonon_free(), Backend::Unitary);
        let three =
            driven(CavitySpec { n_max: 3, ..CavitySpec::micropillar() }, BathSpec::phonon_free(), Backend::Unitary);
        let a = figures_of_merit(&two, &SolverConfig::for_model(&two), None).unwrap();
        let b = figures_of_merit(&three, &SolverConfig::for_model(&three), None).unwrap();
        assert!((a.collected - b.collected).abs() < 1e-4);
        assert!((a.indistinguishability - b.indistinguishability).abs() < 1e-4);
    }

    #[test]
    fn delay_grid_refinement() {
        let model = excited(fast(), BathSpec::gaas());
        let coarse = SolverConfig::for_model(&model);
        let fine = SolverConfig { record_stride: coarse.record_stride / 2, ..coarse };
        let a = upper_bounds_with(&model, &coarse, None).unwrap();
        let b = upper_bounds_with(&model, &fine, None).unwrap();
        assert!((a.indistinguishability - b.indistinguishability).abs() < 2e-3, "{a:?} {b:?}");
        assert!(a.indistinguishability < 0.99);
    }

    #[test]
    fn pipelines_check_their_inputs() {
        let bulk =
            ModelSpec::bulk(PulseSpec::new(PI, 0.0, 1.0, 0.0).unwrap(), BathSpec::phonon_free(), Backend::Unitary);
        let cfg = SolverConfig::for_model(&bulk);
        assert!(matches!(figures_of_merit(&bulk, &cfg, None), Err(Error::Config(_))));
        let with = bulk.with_cavity(fast());
        assert!(matches!(upper_bounds_with(&with, &cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn report_record_lists_results_and_parameters() {
        let model = driven(fast(), BathSpec::phonon_free(), Backend::Unitary);
        let report = figures_of_merit(&model, &SolverConfig::for_model(&model), None).unwrap();
        let mut out = Vec::new();
        report.write_record(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        for key in ["N = ", "N_b = ", "I = ", "P_X_final = ", "budget_residual = ", "kappa = ", "dt_ps = "] {
            assert!(text.lines().any(|l| l.starts_with(key)), "{key}");
        }
        assert!((report.p_x_final - 1.0).abs() < 1e-6);
    }
}
