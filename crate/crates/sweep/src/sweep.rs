//! (Θ_b, Θ_r) grid sweeps and refinement of their maxima.

use std::f64::consts::PI;

use rayon::prelude::*;

use dichro_core::bath::{build_kernel_table, KernelTable};
use dichro_core::drive::PulseSpec;
use dichro_core::dynamics::{read_px_final, MasterEquation, ModelSpec, SolverConfig};
use dichro_core::sps::{figures_of_merit, CavitySpec};

use crate::config::{Observable, Settings, SolverSection};
use crate::error::{Result, SweepError};
use crate::optimize::NelderMead;

/// Evenly spaced pulse areas (radians), endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 2 || !(max > min) || min < 0.0 {
            return Err(SweepError::Config(format!("bad sweep axis [{min}, {max}] with {points} points")));
        }
        Ok(Self { min, max, points })
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.min..=self.max).contains(&x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub theta_b: Axis,
    pub theta_r: Axis,
    /// Bulk model; its pulse areas are replaced cell by cell.
    pub model: ModelSpec,
    /// Cavity used when the observable is N or I.
    pub cavity: CavitySpec,
    pub observable: Observable,
    pub solver: SolverSection,
}

impl SweepSpec {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let s = &settings.sweep;
        let model = ModelSpec { cavity: None, ..settings.model_spec()? };
        let (nb, nr) = s.points(model.backend);
        Ok(Self {
            theta_b: Axis::new(s.theta_b_min_pi * PI, s.theta_b_max_pi * PI, nb)?,
            theta_r: Axis::new(s.theta_r_min_pi * PI, s.theta_r_max_pi * PI, nr)?,
            model,
            cavity: settings.cavity_spec(),
            observable: s.observable,
            solver: settings.solver.clone(),
        })
    }
}

/// Evaluates one observable at arbitrary pulse areas with a discretisation
/// and kernel table shared by all points.
#[derive(Clone, Debug)]
pub struct Evaluator {
    model: ModelSpec,
    config: SolverConfig,
    observable: Observable,
    table: Option<KernelTable>,
}

impl Evaluator {
    /// The discretisation is the default for the most strongly driven point
    /// `(max_b, max_r)`, so every point inside the box is resolved.
    pub fn new(spec: &SweepSpec, max_b: f64, max_r: f64) -> Result<Self> {
        let mut model = with_areas(&spec.model, max_b, max_r)?;
        if spec.observable != Observable::PX {
            model.cavity = Some(spec.cavity);
        }
        model.validate()?;
        let config = spec.solver.config_for(&model);
        config.validate(&model)?;
        let table =
            if model.has_phonons() { Some(build_kernel_table(&model.bath, config.ds, config.s_max)?) } else { None };
        Ok(Self { model, config, observable: spec.observable, table })
    }

    pub fn for_sweep(spec: &SweepSpec) -> Result<Self> {
        Self::new(spec, spec.theta_b.max, spec.theta_r.max)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn evaluate(&self, theta_b: f64, theta_r: f64) -> dichro_core::Result<f64> {
        let model = ModelSpec { pulse: PulseSpec { theta_b, theta_r, ..self.model.pulse }, ..self.model };
        match self.observable {
            Observable::PX => {
                let traj = MasterEquation::new(&model, &self.config, self.table.as_ref())?.evolve()?;
                read_px_final(&traj, model.pulse.t_p)
            }
            Observable::N => Ok(figures_of_merit(&model, &self.config, self.table.as_ref())?.collected),
            Observable::I => Ok(figures_of_merit(&model, &self.config, self.table.as_ref())?.indistinguishability),
        }
    }
}

fn with_areas(model: &ModelSpec, theta_b: f64, theta_r: f64) -> Result<ModelSpec> {
    let p = &model.pulse;
    Ok(ModelSpec { pulse: PulseSpec::new(theta_b, theta_r, p.t_p, p.delta)?, ..*model })
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub theta_b: f64,
    pub theta_r: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// values[r][b]: row per Θ_r, column per Θ_b. Failed cells hold NaN.
    pub values: Vec<Vec<f64>>,
    pub status: Vec<Vec<CellStatus>>,
    /// Grid argmax over successful cells.
    pub max_location: Option<Peak>,
    pub max_index: Option<(usize, usize)>,
    /// Echo of the configuration and tool version.
    pub provenance: String,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.status.iter().flatten().filter(|s| **s != CellStatus::Ok).count()
    }
}

/// Tolerance on the physical range of every observable, which is [0, 1].
const RANGE_TOL: f64 = 1e-3;

/// Evaluates every grid cell on a pool of `workers` threads. The result does
/// not depend on the worker count.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    run_sweep_with(spec, workers, &Evaluator::for_sweep(spec)?, |_, _| true)
}

/// Sweep over the cells accepted by `mask(theta_b, theta_r)`; others are NaN
/// and excluded from the maximum.
pub fn run_sweep_with(
    spec: &SweepSpec,
    workers: usize,
    evaluator: &Evaluator,
    mask: impl Fn(f64, f64) -> bool + Sync,
) -> Result<SweepResult> {
    if workers == 0 {
        return Err(SweepError::Config("workers must be at least 1".into()));
    }
    let (nb, nr) = (spec.theta_b.points, spec.theta_r.points);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Config(format!("cannot start {workers} workers: {e}")))?;
    let cells: Vec<Option<std::result::Result<f64, String>>> = pool.install(|| {
        (0..nb * nr)
            .into_par_iter()
            .map(|k| {
                let (tb, tr) = (spec.theta_b.value(k % nb), spec.theta_r.value(k / nb));
                if !mask(tb, tr) {
                    return None;
                }
                Some(match evaluator.evaluate(tb, tr) {
                    Ok(v) if (-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) => Ok(v),
                    Ok(v) => Err(format!("value {v} outside [0, 1]")),
                    Err(e) => Err(e.to_string()),
                })
            })
            .collect()
    });

    let mut values = vec![vec![f64::NAN; nb]; nr];
    let mut status = vec![vec![CellStatus::Ok; nb]; nr];
    let mut failed = Vec::new();
    let mut evaluated = 0;
    for (k, cell) in cells.into_iter().enumerate() {
        let (b, r) = (k % nb, k / nb);
        match cell {
            None => {}
            Some(Ok(v)) => {
                values[r][b] = v;
                evaluated += 1;
            }
            Some(Err(msg)) => {
                log::warn!("cell ({b}, {r}) failed: {msg}");
                status[r][b] = CellStatus::Failed(msg.clone());
                failed.push(msg);
                evaluated += 1;
            }
        }
    }
    if failed.len() * 20 > evaluated {
        return Err(SweepError::TooManyFailures { failed: failed.len(), total: evaluated, first: failed[0].clone() });
    }

    let mut best: Option<(usize, usize)> = None;
    for r in 0..nr {
        for b in 0..nb {
            let v = values[r][b];
            if v.is_nan() {
                continue;
            }
            let power = |b: usize, r: usize| spec.theta_b.value(b).powi(2) + spec.theta_r.value(r).powi(2);
            best = match best {
                Some((bb, br)) if values[br][bb] > v || (values[br][bb] == v && power(bb, br) <= power(b, r)) => {
                    Some((bb, br))
                }
                _ => Some((b, r)),
            };
        }
    }
    let max_location =
        best.map(|(b, r)| Peak { theta_b: spec.theta_b.value(b), theta_r: spec.theta_r.value(r), value: values[r][b] });
    Ok(SweepResult { spec: spec.clone(), values, status, max_location, max_index: best, provenance: String::new() })
}

/// Refinement tolerance on the simplex diameter (radians).
pub const REFINE_TOLERANCE: f64 = 0.01 * PI;

/// Polishes the grid maximum by Nelder–Mead inside the sweep box (and
/// `mask`). Returns `None` with a warning when the maximum sits on the grid
/// boundary.
pub fn refine_max(result: &SweepResult, evaluator: &Evaluator, mask: impl Fn(f64, f64) -> bool) -> Option<Peak> {
    let (b, r) = result.max_index?;
    let spec = &result.spec;
    if b == 0 || r == 0 || b + 1 == spec.theta_b.points || r + 1 == spec.theta_r.points {
        log::warn!("grid maximum lies on the sweep boundary; refinement skipped");
        return None;
    }
    let start = result.max_location?;
    Some(refine_from(evaluator, spec, [start.theta_b, start.theta_r], spec.theta_b.spacing(), mask))
}

/// Nelder–Mead from `start` with initial edge `step`.
pub fn refine_from(
    evaluator: &Evaluator,
    spec: &SweepSpec,
    start: [f64; 2],
    step: f64,
    mask: impl Fn(f64, f64) -> bool,
) -> Peak {
    let objective = |x: &[f64; 2]| {
        if !spec.theta_b.contains(x[0]) || !spec.theta_r.contains(x[1]) || !mask(x[0], x[1]) {
            return f64::NEG_INFINITY;
        }
        evaluator.evaluate(x[0], x[1]).unwrap_or(f64::NEG_INFINITY)
    };
    let opt = NelderMead::with_tolerance(REFINE_TOLERANCE).maximize(objective, start, step);
    if !opt.converged {
        log::warn!("simplex refinement stopped after {} evaluations", opt.evaluations);
    }
    Peak { theta_b: opt.point[0], theta_r: opt.point[1], value: opt.value }
}
