//! Derivative-free maximisation by the Nelder–Mead simplex method.

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop when the largest vertex distance falls below this.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl NelderMead {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { reflection: 1.0, expansion: 2.0, contraction: 0.5, shrink: 0.5, tolerance, max_evaluations: 400 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum<const N: usize> {
    pub point: [f64; N],
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
struct Vertex<const N: usize> {
    x: [f64; N],
    f: f64,
}

fn power<const N: usize>(x: &[f64; N]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Higher value wins; equal values prefer the point closer to the origin.
fn better<const N: usize>(a: &Vertex<N>, b: &Vertex<N>) -> bool {
    a.f > b.f || (a.f == b.f && power(&a.x) < power(&b.x))
}

fn lerp<const N: usize>(from: &[f64; N], to: &[f64; N], t: f64) -> [f64; N] {
    let mut out = [0.0; N];
    for k in 0..N {
        out[k] = from[k] + t * (to[k] - from[k]);
    }
    out
}

fn diameter<const N: usize>(simplex: &[Vertex<N>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let dist = a.x.iter().zip(&b.x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

impl NelderMead {
    /// Maximises `f` from an axis-aligned simplex of edge `step` at `start`.
    /// Points where `f` is undefined should return `f64::NEG_INFINITY`.
    pub fn maximize<const N: usize>(
        &self,
        mut f: impl FnMut(&[f64; N]) -> f64,
        start: [f64; N],
        step: f64,
    ) -> Optimum<N> {
        let evaluations = std::cell::Cell::new(0usize);
        let mut eval = |x: [f64; N]| {
            evaluations.set(evaluations.get() + 1);
            let v = f(&x);
            Vertex { x, f: if v.is_nan() { f64::NEG_INFINITY } else { v } }
        };
        let mut simplex = vec![eval(start)];
        for k in 0..N {
            let mut x = start;
            x[k] += step;
            simplex.push(eval(x));
        }
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| {
                if better(a, b) {
                    std::cmp::Ordering::Less
                } else if better(b, a) {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            });
            if diameter(&simplex) < self.tolerance {
                converged = true;
                break;
            }
            if evaluations.get() >= self.max_evaluations {
                break;
            }
            let worst = simplex[N];
            let mut centroid = [0.0; N];
            for v in &simplex[..N] {
                for k in 0..N {
                    centroid[k] += v.x[k] / N as f64;
                }
            }
            let reflected = eval(lerp(&centroid, &worst.x, -self.reflection));
            if better(&reflected, &simplex[0]) {
                let expanded = eval(lerp(&centroid, &reflected.x, self.expansion));
                simplex[N] = if better(&expanded, &reflected) { expanded } else { reflected };
                continue;
            }
            if better(&reflected, &simplex[N - 1]) {
                simplex[N] = reflected;
                continue;
            }
            let contracted = if better(&reflected, &worst) {
                let c = eval(lerp(&centroid, &reflected.x, self.contraction));
                (!better(&reflected, &c)).then_some(c)
            } else {
                let c = eval(lerp(&centroid, &worst.x, self.contraction));
                better(&c, &worst).then_some(c)
            };
            match contracted {
                Some(c) => simplex[N] = c,
                None => {
                    let best = simplex[0].x;
                    for v in simplex.iter_mut().skip(1) {
                        *v = eval(lerp(&best, &v.x, self.shrink));
                    }
                }
            }
        }
        let best = simplex[0];
        Optimum { point: best.x, value: best.f, evaluations: evaluations.get(), converged }
    }
}
