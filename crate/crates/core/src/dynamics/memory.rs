use num_complex::Complex64 as C64;

use super::hamiltonian::HamiltonianParts;
use super::{Backend, ModelSpec, SolverConfig};
use crate::bath::{build_kernel_table, KernelTable};
use crate::error::{Error, Result};
use crate::qcore::{Operator, I};

/// One RK4 step of U' = −iH(t)U.
fn rk4_propagator_step(parts: &HamiltonianParts, t: f64, h: f64, u: &Operator) -> Operator {
    let minus_i = -I;
    let rhs = |tau: f64, v: &Operator| parts.at(tau).matmul(v).scale(minus_i);
    let k1 = rhs(t, u);
    let mut tmp = u.clone();
    tmp.axpy(C64::new(0.5 * h, 0.0), &k1);
    let k2 = rhs(t + 0.5 * h, &tmp);
    let mut tmp = u.clone();
    tmp.axpy(C64::new(0.5 * h, 0.0), &k2);
    let k3 = rhs(t + 0.5 * h, &tmp);
    let mut tmp = u.clone();
    tmp.axpy(C64::new(h, 0.0), &k3);
    let k4 = rhs(t + h, &tmp);
    let mut out = u.clone();
    out.axpy(C64::new(h / 6.0, 0.0), &k1);
    out.axpy(C64::new(h / 3.0, 0.0), &k2);
    out.axpy(C64::new(h / 3.0, 0.0), &k3);
    out.axpy(C64::new(h / 6.0, 0.0), &k4);
    out
}

/// System propagators U(τ_m, t_start) on the grid τ_m = t_start + m·h for
/// m ∈ [−n_back, n_forward]. Negative indices are obtained by evolving
/// backwards from t_start with the same Hamiltonian.
#[derive(Clone, Debug)]
pub struct PropagatorCache {
    t_start: f64,
    h: f64,
    n_back: usize,
    u: Vec<Operator>,
}

impl PropagatorCache {
    pub fn build(parts: &HamiltonianParts, t_start: f64, h: f64, n_back: usize, n_forward: usize) -> Self {
        let dim = parts.static_part.dim();
        let mut back = Vec::with_capacity(n_back);
        let mut u = Operator::identity(dim);
        for m in 0..n_back {
            let t = t_start - m as f64 * h;
            u = rk4_propagator_step(parts, t, -h, &u);
            back.push(u.clone());
        }
        back.reverse();
        let mut all = back;
        let mut u = Operator::identity(dim);
        all.push(u.clone());
        for m in 0..n_forward {
            let t = t_start + m as f64 * h;
            u = rk4_propagator_step(parts, t, h, &u);
            all.push(u.clone());
        }
        Self { t_start, h, n_back, u: all }
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn first_index(&self) -> isize {
        -(self.n_back as isize)
    }

    pub fn last_index(&self) -> isize {
        (self.u.len() - self.n_back) as isize - 1
    }

    pub fn time(&self, m: isize) -> f64 {
        self.t_start + m as f64 * self.h
    }

    /// U(τ_m, t_start).
    pub fn at(&self, m: isize) -> Option<&Operator> {
        let k = m + self.n_back as isize;
        if k < 0 {
            return None;
        }
        self.u.get(k as usize)
    }

    fn start(&self) -> f64 {
        self.time(self.first_index())
    }

    fn end(&self) -> f64 {
        self.time(self.last_index())
    }

    /// U(t, t_start) at an arbitrary time inside the cache, finishing the
    /// last partial step with RK4.
    pub fn at_time(&self, parts: &HamiltonianParts, t: f64) -> Result<Operator> {
        let miss = || Error::CacheMiss { t, start: self.start(), end: self.end() };
        if t < self.start() - 1e-12 || t > self.end() + 1e-12 {
            return Err(miss());
        }
        let x = (t - self.t_start) / self.h;
        let m = x.round();
        if (x - m).abs() < 1e-9 {
            return self.at(m as isize).cloned().ok_or_else(miss);
        }
        let m = x.floor() as isize;
        let base = self.at(m).ok_or_else(miss)?;
        let tau = self.time(m);
        Ok(rk4_propagator_step(parts, tau, t - tau, base))
    }

    /// U(t_to, t_from) = U(t_to)·U(t_from)†.
    pub fn between(&self, parts: &HamiltonianParts, t_from: f64, t_to: f64) -> Result<Operator> {
        let u_to = self.at_time(parts, t_to)?;
        if t_to == t_from {
            return Ok(Operator::identity(u_to.dim()));
        }
        let u_from = self.at_time(parts, t_from)?;
        Ok(u_to.mul_adjoint(&u_from))
    }
}

/// Operators sampled per half-step index, or one operator for all times.
#[derive(Clone, Debug)]
enum Sampled {
    Constant(Operator),
    PerIndex(Vec<Operator>),
}

impl Sampled {
    fn at(&self, m: usize) -> &Operator {
        match self {
            Sampled::Constant(op) => op,
            Sampled::PerIndex(v) => &v[m.min(v.len() - 1)],
        }
    }
}

/// One dissipation channel `[Λ(t)ρ, A(t)] + h.c.`
#[derive(Clone, Debug)]
struct Channel {
    lambda: Vec<Operator>,
    coupling: Sampled,
}

/// Tabulated memory operators Λ_i(τ_m) for m ∈ [0, m_max] and the matching
/// system couplings A_i(τ_m). Beyond m_max the last entry is reused; callers
/// only go there once the generator is time independent.
#[derive(Clone, Debug)]
pub struct KernelMemory {
    channels: Vec<Channel>,
    m_max: usize,
    t_start: f64,
    h: f64,
}

impl KernelMemory {
    /// Tabulates Λ for the phonon backend of `model`. The table's spacing must
    /// divide `config.ds`.
    pub fn build(
        model: &ModelSpec,
        config: &SolverConfig,
        parts: &HamiltonianParts,
        table: &KernelTable,
        m_max: usize,
    ) -> Result<Self> {
        let h = config.half_step();
        let sub = config.ds / table.ds;
        if (sub - sub.round()).abs() > 1e-6 || sub.round() < 1.0 {
            return Err(Error::Config(format!("kernel table spacing {} does not divide ds = {}", table.ds, config.ds)));
        }
        let sub = sub.round() as usize;
        let n_nodes = (config.s_max / config.ds).round() as usize;
        if n_nodes * sub >= table.len() + sub || n_nodes * sub > table.len() - 1 {
            return Err(Error::Config(format!(
                "kernel table ends at {} ps, shorter than s_max = {}",
                table.s_max(),
                config.s_max
            )));
        }
        let ratio = config.kernel_ratio();
        let n_back = n_nodes * ratio;
        let cache = PropagatorCache::build(parts, config.t_start, h, n_back, m_max);

        let trapezoid = |k: usize| if k == 0 || k == n_nodes { 0.5 * config.ds } else { config.ds };
        let channels = match model.backend {
            Backend::WeakCoupling => {
                let weights: Vec<C64> = (0..=n_nodes).map(|k| table.c_values[k * sub] * trapezoid(k)).collect();
                let x = parts.qd().x.clone();
                let lambda = tabulate(&cache, &weights, ratio, m_max, |_| x.clone());
                vec![Channel { lambda, coupling: Sampled::Constant(x) }]
            }
            Backend::Polaron => {
                let (xx, yy) = table.polaron_kernels();
                let wx: Vec<C64> = (0..=n_nodes).map(|k| xx[k * sub] * trapezoid(k)).collect();
                let wy: Vec<C64> = (0..=n_nodes).map(|k| yy[k * sub] * trapezoid(k)).collect();
                let ax = |m: isize| parts.polaron_couplings(cache.time(m)).0;
                let ay = |m: isize| parts.polaron_couplings(cache.time(m)).1;
                let lx = tabulate(&cache, &wx, ratio, m_max, ax);
                let ly = tabulate(&cache, &wy, ratio, m_max, ay);
                let cx = (0..=m_max as isize).map(ax).collect();
                let cy = (0..=m_max as isize).map(ay).collect();
                vec![
                    Channel { lambda: lx, coupling: Sampled::PerIndex(cx) },
                    Channel { lambda: ly, coupling: Sampled::PerIndex(cy) },
                ]
            }
            Backend::Unitary => Vec::new(),
        };
        Ok(Self { channels, m_max, t_start: config.t_start, h })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// (Λ_i, A_i) at half-step index m.
    pub fn channels_at(&self, m: usize) -> impl Iterator<Item = (&Operator, &Operator)> {
        let m = m.min(self.m_max);
        self.channels.iter().map(move |c| (&c.lambda[m], c.coupling.at(m)))
    }

    /// Grid index of a time, if it lies on the tabulated grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = (t - self.t_start) / self.h;
        let m = x.round();
        let end = self.t_start + self.m_max as f64 * self.h;
        if (x - m).abs() > 1e-6 || m < 0.0 || m as usize > self.m_max {
            return Err(Error::CacheMiss { t, start: self.t_start, end });
        }
        Ok(m as usize)
    }
}

/// Λ_m = U_m·[Σ_k w_k U_{m−k·r}† A(τ_{m−k·r}) U_{m−k·r}]·U_m† for m ∈ [0, m_max].
fn tabulate(
    cache: &PropagatorCache,
    weights: &[C64],
    ratio: usize,
    m_max: usize,
    coupling: impl Fn(isize) -> Operator,
) -> Vec<Operator> {
    let first = cache.first_index();
    let heisenberg: Vec<Operator> = (first..=m_max as isize)
        .map(|m| {
            let u = cache.at(m).expect("index inside cache");
            u.adjoint_mul(&coupling(m)).matmul(u)
        })
        .collect();
    let offset = (-first) as usize;
    let dim = heisenberg[0].dim();
    (0..=m_max)
        .map(|m| {
            let mut acc = Operator::zeros(dim);
            for (k, &w) in weights.iter().enumerate() {
                let y = &heisenberg[m + offset - k * ratio];
                acc.axpy(w, y);
            }
            acc.conjugate_by(cache.at(m as isize).expect("index inside cache"))
        })
        .collect()
}

/// U(t_to, t_from) of the model's system Hamiltonian. `t_from`, `t_to` must
/// be inside the config's window.
pub fn propagator(model: &ModelSpec, config: &SolverConfig, t_from: f64, t_to: f64) -> Result<Operator> {
    config.validate(model)?;
    let end = match config.end {
        super::EndTime::Fixed(t) => t,
        super::EndTime::Emission { .. } => t_from.max(t_to),
    };
    for t in [t_from, t_to] {
        if t < config.t_start - 1e-12 || t > end + 1e-12 {
            return Err(Error::CacheMiss { t, start: config.t_start, end });
        }
    }
    let table;
    let parts = if model.has_phonons() {
        table = build_kernel_table(&model.bath, config.ds, config.s_max)?;
        HamiltonianParts::from_table(model, &table)?
    } else {
        HamiltonianParts::new(model, 0.0, 1.0)?
    };
    let h = config.half_step();
    let n = ((end - config.t_start) / h).ceil() as usize;
    let cache = PropagatorCache::build(&parts, config.t_start, h, 0, n);
    cache.between(&parts, t_from, t_to)
}
