//! Figures of merit versus pulse width at fixed η = t_p·δ = 6.

use std::f64::consts::PI;
use std::io::{self, Write};

use dichro_core::bath::BathSpec;
use dichro_core::drive::PulseSpec;
use dichro_core::dynamics::InitialState;
use dichro_core::dynamics::{Backend, ModelSpec};
use dichro_core::sps::{figures_of_merit, upper_bounds_with, CavitySpec};

use crate::config::{Observable, Settings};
use crate::error::Result;
use crate::sweep::{refine_max, run_sweep_with, Axis, Evaluator, Peak, SweepSpec};

/// t_p·δ for the scan.
pub const SCAN_ETA: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// Weak-coupling phonons, areas optimised for the bulk P_X.
    Dichromatic,
    /// No phonons, areas optimised without phonons.
    DichromaticPhononFree,
    /// Single resonant π pulse with half collection.
    Resonant,
    /// Excited-state initialisation (no drive).
    UpperBound,
}

impl RowKind {
    pub fn name(&self) -> &'static str {
        match self {
            RowKind::Dichromatic => "dichromatic",
            RowKind::DichromaticPhononFree => "dichromatic_phonon_free",
            RowKind::Resonant => "resonant",
            RowKind::UpperBound => "upper_bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub kind: RowKind,
    pub t_p: f64,
    pub delta: f64,
    pub theta_b: f64,
    pub theta_r: f64,
    pub p_x: f64,
    pub n: f64,
    pub n_b: f64,
    pub i: f64,
    pub error: Option<String>,
}

impl ScanRow {
    fn failed(kind: RowKind, t_p: f64, delta: f64, error: String) -> Self {
        let nan = f64::NAN;
        Self { kind, t_p, delta, theta_b: nan, theta_r: nan, p_x: nan, n: nan, n_b: nan, i: nan, error: Some(error) }
    }
}

/// The sweet spots used by the scan lie on the red-dominant side Θ_b < Θ_r;
/// the blue-dominant side hosts a broad phonon-assisted plateau at long
/// pulses that would otherwise win the search.
pub fn red_dominant(theta_b: f64, theta_r: f64) -> bool {
    theta_b < theta_r
}

/// Optimises (Θ_b, Θ_r) ∈ [0, 8π]², Θ_b < Θ_r, for the bulk P_X: coarse grid,
/// then simplex refinement.
pub fn optimize_areas(model: &ModelSpec, settings: &Settings, coarse_points: usize, workers: usize) -> Result<Peak> {
    let axis = Axis::new(0.0, 8.0 * PI, coarse_points)?;
    let spec = SweepSpec {
        theta_b: axis,
        theta_r: axis,
        model: ModelSpec { cavity: None, ..*model },
        cavity: settings.cavity_spec(),
        observable: Observable::PX,
        solver: settings.solver.clone(),
    };
    let evaluator = Evaluator::for_sweep(&spec)?;
    let grid = run_sweep_with(&spec, workers, &evaluator, red_dominant)?;
    let coarse = grid.max_location.ok_or_else(|| crate::error::SweepError::Config("empty area grid".into()))?;
    Ok(refine_max(&grid, &evaluator, red_dominant).filter(|p| p.value >= coarse.value).unwrap_or(coarse))
}

fn fom_row(kind: RowKind, model: &ModelSpec, settings: &Settings) -> ScanRow {
    let p = model.pulse;
    let run = || -> Result<ScanRow> {
        let config = settings.solver_for(model);
        let r = figures_of_merit(model, &config, None)?;
        Ok(ScanRow {
            kind,
            t_p: p.t_p,
            delta: p.delta,
            theta_b: p.theta_b,
            theta_r: p.theta_r,
            p_x: r.p_x_final,
            n: r.collected,
            n_b: r.background,
            i: r.indistinguishability,
            error: None,
        })
    };
    run().unwrap_or_else(|e| {
        log::warn!("{} row at t_p = {} failed: {e}", kind.name(), p.t_p);
        ScanRow::failed(kind, p.t_p, p.delta, e.to_string())
    })
}

/// One block of rows per pulse width plus the upper-bound row.
pub fn run_width_scan(t_p_list: &[f64], settings: &Settings, workers: usize) -> Result<Vec<ScanRow>> {
    let bath = settings.bath()?;
    let cavity = settings.cavity_spec();
    let mut rows = Vec::new();
    for &t_p in t_p_list {
        let delta = SCAN_ETA / t_p;
        let pulse = PulseSpec::new(PI, PI, t_p, delta)?;
        for (kind, backend, bath) in [
            (RowKind::Dichromatic, Backend::WeakCoupling, bath),
            (RowKind::DichromaticPhononFree, Backend::Unitary, BathSpec::phonon_free()),
        ] {
            let bulk = ModelSpec::bulk(pulse, bath, backend);
            match optimize_areas(&bulk, settings, settings.scan.coarse_points, workers) {
                Ok(peak) => {
                    log::info!(
                        "t_p = {t_p}: {} optimum {:.3}π, {:.3}π",
                        kind.name(),
                        peak.theta_b / PI,
                        peak.theta_r / PI
                    );
                    let pulse = PulseSpec { theta_b: peak.theta_b, theta_r: peak.theta_r, ..pulse };
                    let model = ModelSpec { pulse, ..bulk }.with_cavity(cavity);
                    rows.push(fom_row(kind, &model, settings));
                }
                Err(e) => rows.push(ScanRow::failed(kind, t_p, delta, e.to_string())),
            }
        }
        let resonant = ModelSpec::bulk(PulseSpec::new(PI, 0.0, t_p, 0.0)?, bath, Backend::WeakCoupling)
            .with_cavity(CavitySpec { gamma_coll: 0.5, ..cavity });
        rows.push(fom_row(RowKind::Resonant, &resonant, settings));
    }
    let excited = ModelSpec {
        pulse: PulseSpec::off(1.0),
        bath,
        cavity: Some(cavity),
        backend: if bath.is_phonon_free() { Backend::Unitary } else { Backend::WeakCoupling },
        initial_state: InitialState::Excited,
    };
    let row = match upper_bounds_with(&excited, &settings.solver_for(&excited), None) {
        Ok(ub) => ScanRow {
            kind: RowKind::UpperBound,
            t_p: f64::NAN,
            delta: f64::NAN,
            theta_b: 0.0,
            theta_r: 0.0,
            p_x: 1.0,
            n: ub.beta,
            n_b: ub.background,
            i: ub.indistinguishability,
            error: None,
        },
        Err(e) => ScanRow::failed(RowKind::UpperBound, f64::NAN, f64::NAN, e.to_string()),
    };
    rows.push(row);
    Ok(rows)
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut w: W) -> io::Result<()> {
    writeln!(w, "# t_p in ps, delta in rad/ps, areas in units of pi; N photons per pulse")?;
    writeln!(w, "kind,t_p,delta,theta_b_pi,theta_r_pi,p_x,n,n_b,i,error")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.4},{:.4},{:.6},{:.6},{:.6},{:.6},{}",
            r.kind.name(),
            r.t_p,
            r.delta,
            r.theta_b / PI,
            r.theta_r / PI,
            r.p_x,
            r.n,
            r.n_b,
            r.i,
            r.error.as_deref().unwrap_or("").replace(',', ";")
        )?;
    }
    Ok(())
}
