use std::io::{self, Write};

use num_complex::Complex64 as C64;

use super::hamiltonian::HamiltonianParts;
use super::memory::KernelMemory;
use super::{EndTime, InitialState, ModelSpec, SolverConfig};
use crate::bath::{build_kernel_table, KernelTable};
use crate::error::{Error, Result};
use crate::qcore::{build_cavity_operators, lindblad_with, trace_product, DensityMatrix, HilbertSpace, Operator, I};

/// A Lindblad channel `rate·(LρL† − ½{L†L, ρ})`.
#[derive(Clone, Debug)]
struct Dissipator {
    rate: f64,
    op: Operator,
    op_dag_op: Operator,
}

/// The generator of one model on one time grid, with all phonon memory
/// precomputed. Immutable once built, so it can be shared across threads.
#[derive(Clone, Debug)]
pub struct MasterEquation {
    model: ModelSpec,
    config: SolverConfig,
    space: HilbertSpace,
    parts: HamiltonianParts,
    dissipators: Vec<Dissipator>,
    memory: Option<KernelMemory>,
    /// Half-step index from which the generator no longer changes.
    m_static: usize,
    /// Number of RK4 steps for a fixed end time.
    fixed_steps: Option<usize>,
    /// One RK4 step of the static generator as a superoperator, when needed.
    static_step: Option<Operator>,
}

impl MasterEquation {
    /// Builds the generator. Phonon backends need a kernel table for the
    /// model's bath whose spacing divides `config.ds`; one is computed when
    /// `table` is `None`.
    pub fn new(model: &ModelSpec, config: &SolverConfig, table: Option<&KernelTable>) -> Result<Self> {
        model.validate()?;
        config.validate(model)?;
        let space = model.space();
        let owned;
        let table = if model.has_phonons() {
            match table {
                Some(t) => {
                    if t.spec != model.bath {
                        return Err(Error::Config("kernel table was built for a different bath".into()));
                    }
                    Some(t)
                }
                None => {
                    owned = build_kernel_table(&model.bath, config.ds, config.s_max)?;
                    Some(&owned)
                }
            }
        } else {
            None
        };
        let parts = match table {
            Some(t) => HamiltonianParts::from_table(model, t)?,
            None => HamiltonianParts::new(model, 0.0, 1.0)?,
        };

        let mut dissipators = Vec::new();
        if let Some(cav) = &model.cavity {
            let ops = build_cavity_operators(space)?;
            let qd = parts.qd();
            for (rate, op) in [(cav.kappa, ops.a), (cav.gamma_b, qd.sigma.clone()), (cav.gamma_d, qd.x.clone())] {
                if rate > 0.0 {
                    let op_dag_op = op.adjoint_mul(&op);
                    dissipators.push(Dissipator { rate, op, op_dag_op });
                }
            }
        }

        let h = config.half_step();
        let t_static = if model.pulse.is_off() {
            config.t_start
        } else {
            let memory = if model.has_phonons() { config.s_max } else { 0.0 };
            model.drive_cutoff() + memory
        };
        let m_static = ((t_static - config.t_start) / h - 1e-9).ceil().max(0.0) as usize;
        let fixed_steps = match config.end {
            EndTime::Fixed(t_end) => Some(((t_end - config.t_start) / config.dt).round() as usize),
            EndTime::Emission { .. } => None,
        };
        let m_needed = match fixed_steps {
            Some(n) => (2 * n).min(m_static + 2),
            None => m_static + 2,
        };
        let memory = match table {
            Some(t) => Some(KernelMemory::build(model, config, &parts, t, m_needed)?),
            None => None,
        };

        let mut me = Self {
            model: *model,
            config: *config,
            space,
            parts,
            dissipators,
            memory,
            m_static,
            fixed_steps,
            static_step: None,
        };
        let reaches_static = match fixed_steps {
            Some(n) => 2 * n > m_static + 2,
            None => true,
        };
        if reaches_static {
            me.static_step = Some(me.rk4_superoperator(m_static, true));
        }
        Ok(me)
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn parts(&self) -> &HamiltonianParts {
        &self.parts
    }

    pub fn time_of_step(&self, n: usize) -> f64 {
        self.config.t_start + n as f64 * self.config.dt
    }

    /// The first step index at which the generator is time independent.
    pub fn first_static_step(&self) -> usize {
        self.m_static.div_ceil(2)
    }

    /// Phonon dissipator K(t)[ρ] at half-step index m.
    fn phonon_term(&self, m: usize, rho: &Operator, out: &mut Operator) {
        let Some(memory) = &self.memory else { return };
        for (lambda, a) in memory.channels_at(m) {
            let lr = lambda.matmul(rho);
            let rl = rho.mul_adjoint(lambda);
            *out += &lr.matmul(a);
            *out -= &a.matmul(&lr);
            *out += &a.matmul(&rl);
            *out -= &rl.matmul(a);
        }
    }

    fn apply_at(&self, m: usize, frozen: bool, rho: &Operator) -> Operator {
        let t = self.config.t_start + m as f64 * self.config.half_step();
        let h = if frozen { self.parts.static_part.clone() } else { self.parts.at(t) };
        let mut out = h.commutator(rho).scale(-I);
        self.phonon_term(m, rho, &mut out);
        for d in &self.dissipators {
            out.axpy(C64::new(d.rate, 0.0), &lindblad_with(&d.op, &d.op_dag_op, rho));
        }
        out
    }

    /// dρ/dt at time `t`, which must lie on the half-step grid.
    pub fn apply(&self, t: f64, rho: &Operator) -> Result<Operator> {
        let m = self.half_index(t)?;
        Ok(self.apply_at(m, m >= self.m_static, rho))
    }

    /// Phonon dissipator alone at a grid time.
    pub fn phonon_dissipator(&self, t: f64, rho: &Operator) -> Result<Operator> {
        let m = self.half_index(t)?;
        let mut out = Operator::zeros(rho.dim());
        self.phonon_term(m, rho, &mut out);
        Ok(out)
    }

    fn half_index(&self, t: f64) -> Result<usize> {
        let h = self.config.half_step();
        let x = (t - self.config.t_start) / h;
        let m = x.round();
        let end = match self.fixed_steps {
            Some(n) => self.time_of_step(n),
            None => f64::INFINITY,
        };
        if (x - m).abs() > 1e-6 || m < 0.0 || t > end + 0.5 * h {
            return Err(Error::CacheMiss { t, start: self.config.t_start, end });
        }
        if let Some(memory) = &self.memory {
            let m = m as usize;
            if m > memory.m_max() && m < self.m_static {
                return Err(Error::CacheMiss { t, start: self.config.t_start, end });
            }
        }
        Ok(m as usize)
    }

    fn rk4_from(&self, m: usize, frozen: bool, rho: &Operator) -> Operator {
        let dt = self.config.dt;
        let k1 = self.apply_at(m, frozen, rho);
        let mut tmp = rho.clone();
        tmp.axpy(C64::new(0.5 * dt, 0.0), &k1);
        let k2 = self.apply_at(m + 1, frozen, &tmp);
        let mut tmp = rho.clone();
        tmp.axpy(C64::new(0.5 * dt, 0.0), &k2);
        let k3 = self.apply_at(m + 1, frozen, &tmp);
        let mut tmp = rho.clone();
        tmp.axpy(C64::new(dt, 0.0), &k3);
        let k4 = self.apply_at(m + 2, frozen, &tmp);
        let mut out = rho.clone();
        out.axpy(C64::new(dt / 6.0, 0.0), &k1);
        out.axpy(C64::new(dt / 3.0, 0.0), &k2);
        out.axpy(C64::new(dt / 3.0, 0.0), &k3);
        out.axpy(C64::new(dt / 6.0, 0.0), &k4);
        out
    }

    fn rk4_superoperator(&self, m: usize, frozen: bool) -> Operator {
        let dim = self.space.dim();
        let n = dim * dim;
        let mut s = Operator::zeros(n);
        for col in 0..n {
            let mut basis = Operator::zeros(dim);
            basis.as_mut_slice()[col] = C64::new(1.0, 0.0);
            let out = self.rk4_from(m, frozen, &basis);
            for (row, v) in out.as_slice().iter().enumerate() {
                s[(row, col)] = *v;
            }
        }
        s
    }

    /// Advances ρ by one RK4 step from step index n.
    pub fn step(&self, n: usize, rho: &Operator) -> Operator {
        let m = 2 * n;
        match &self.static_step {
            Some(s) if m >= self.m_static => apply_superoperator(s, rho),
            _ => self.rk4_from(m, false, rho),
        }
    }

    /// The linear map of one RK4 step from step index n on vectorised
    /// (row-major) density matrices.
    pub fn step_superoperator(&self, n: usize) -> Operator {
        let m = 2 * n;
        match &self.static_step {
            Some(s) if m >= self.m_static => s.clone(),
            _ => self.rk4_superoperator(m, false),
        }
    }

    pub fn initial_state(&self) -> DensityMatrix {
        match self.model.initial_state {
            InitialState::Ground => self.space.ground(),
            InitialState::Excited => self.space.excited(),
        }
    }

    /// Integrates from t_start with the configured end rule.
    pub fn evolve(&self) -> Result<Trajectory> {
        let qd = self.parts.qd();
        let cavity_ops = if self.space.has_cavity() { Some(build_cavity_operators(self.space)?) } else { None };
        let number = cavity_ops.as_ref().map(|c| c.a_dag.matmul(&c.a));
        let stride = self.config.record_stride;
        let mut traj = Trajectory {
            t_start: self.config.t_start,
            dt: self.config.dt,
            record_stride: stride,
            times: Vec::new(),
            p_x: Vec::new(),
            cavity: cavity_ops.as_ref().map(|_| CavityObservables::default()),
            records: Vec::new(),
        };
        let mut rho = self.initial_state().into_op();
        let mut n = 0usize;
        loop {
            let t = self.time_of_step(n);
            let tr = rho.trace();
            if (tr.re - 1.0).abs() > DensityMatrix::TRACE_TOL || tr.im.abs() > DensityMatrix::TRACE_TOL {
                return Err(Error::Physics { t, what: format!("trace drifted to {tr}") });
            }
            let p_x = trace_product(&qd.x, &rho).re;
            if !(-1e-4..=1.0 + 1e-4).contains(&p_x) {
                return Err(Error::Physics { t, what: format!("P_X = {p_x} out of range") });
            }
            traj.times.push(t);
            traj.p_x.push(p_x);
            let mut photons = 0.0;
            if let (Some(obs), Some(ops), Some(num)) = (traj.cavity.as_mut(), &cavity_ops, &number) {
                photons = trace_product(num, &rho).re;
                obs.n_photon.push(photons);
                obs.field.push(trace_product(&ops.a, &rho));
            }
            let last = match (self.config.end, self.fixed_steps) {
                (_, Some(total)) => n >= total,
                (EndTime::Emission { threshold, .. }, None) => {
                    n.is_multiple_of(stride) && t >= 3.0 * self.model.pulse.t_p && p_x + photons < threshold
                }
                _ => unreachable!("fixed end always has a step count"),
            };
            if n.is_multiple_of(stride) || last {
                let state = DensityMatrix::new(self.space, rho.clone())?;
                state.validate_with_floor(t, self.config.positivity_floor)?;
                traj.records.push(Record { step: n, t, state });
            }
            if last {
                break;
            }
            if let EndTime::Emission { max, .. } = self.config.end {
                if t > max {
                    return Err(Error::Physics {
                        t,
                        what: format!("excitation still above threshold at the {max} ps limit"),
                    });
                }
            }
            rho = self.step(n, &rho);
            n += 1;
        }
        Ok(traj)
    }
}

/// S·vec(ρ) for a superoperator S acting on row-major vectorised matrices.
pub fn apply_superoperator(s: &Operator, rho: &Operator) -> Operator {
    let dim = rho.dim();
    let n = s.dim();
    debug_assert_eq!(n, dim * dim);
    let v = rho.as_slice();
    let mut out = Operator::zeros(dim);
    let data = s.as_slice();
    for (row, o) in out.as_mut_slice().iter_mut().enumerate() {
        let r = &data[row * n..(row + 1) * n];
        *o = r.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

/// Builds the generator for `model` (computing its kernel table if needed)
/// and integrates.
pub fn evolve(model: &ModelSpec, config: &SolverConfig) -> Result<Trajectory> {
    MasterEquation::new(model, config, None)?.evolve()
}

/// As [`evolve`] with a shared, precomputed kernel table.
pub fn evolve_with_kernel(model: &ModelSpec, config: &SolverConfig, table: &KernelTable) -> Result<Trajectory> {
    MasterEquation::new(model, config, Some(table))?.evolve()
}

#[derive(Clone, Debug, Default)]
pub struct CavityObservables {
    /// ⟨a†a⟩ at every step.
    pub n_photon: Vec<f64>,
    /// ⟨a⟩ at every step.
    pub field: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct Record {
    pub step: usize,
    pub t: f64,
    pub state: DensityMatrix,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub t_start: f64,
    pub dt: f64,
    pub record_stride: usize,
    /// Step times, ps.
    pub times: Vec<f64>,
    /// ⟨σ†σ⟩ at every step.
    pub p_x: Vec<f64>,
    pub cavity: Option<CavityObservables>,
    /// States every `record_stride` steps, plus the final state.
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one point")
    }

    pub fn final_state(&self) -> &DensityMatrix {
        &self.records.last().expect("final state is always recorded").state
    }

    /// Columns t, P_X and, with a cavity, n_photon, Re/Im ⟨a⟩.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# t in ps; P_X = <sigma^dag sigma>; n_photon = <a^dag a>; a = <a>")?;
        match &self.cavity {
            None => {
                writeln!(w, "t,p_x")?;
                for (t, p) in self.times.iter().zip(&self.p_x) {
                    writeln!(w, "{t:.6},{p:.12e}")?;
                }
            }
            Some(c) => {
                writeln!(w, "t,p_x,n_photon,re_a,im_a")?;
                for (i, (t, p)) in self.times.iter().zip(&self.p_x).enumerate() {
                    let a = c.field[i];
                    writeln!(w, "{t:.6},{p:.12e},{:.12e},{:.12e},{:.12e}", c.n_photon[i], a.re, a.im)?;
                }
            }
        }
        Ok(())
    }
}

/// P_X at the step nearest 3t_p.
pub fn read_px_final(traj: &Trajectory, t_p: f64) -> Result<f64> {
    let target = 3.0 * t_p;
    if traj.t_end() < target - 0.5 * traj.dt {
        return Err(Error::Domain(format!("trajectory ends at {} ps, before 3 t_p = {target} ps", traj.t_end())));
    }
    let n = ((target - traj.t_start) / traj.dt).round().max(0.0) as usize;
    Ok(traj.p_x[n.min(traj.p_x.len() - 1)])
}
