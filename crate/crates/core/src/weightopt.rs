//! Per-forest tree-weight optimization.
//!
//! For one forest with pair statistics `(P, Q, z, pi)`, margin `tau` and
//! regularization `lambda`, the weights minimize over the unit simplex
//!
//! ```text
//! J(w) = <pi, w^2> + sum_{z_ij = 1} max(0, tau - <Q_ij, w>)^2 + lambda ||w||^2
//! ```
//!
//! The first term pulls same-class class vectors together (squared Euclidean
//! distance expands to `<P_ij, w^2>` summed over same-class pairs), the second
//! pushes different-class vectors at least `tau` apart in Manhattan distance.
//! `J` is convex and continuously differentiable:
//!
//! ```text
//! dJ/dw_t = 2 w_t (lambda + pi_t) - 2 sum_{z_ij = 1} max(0, S_ij) Q_ij[t],
//! S_ij = tau - <Q_ij, w>
//! ```
//!
//! [`frank_wolfe`] is the production solver: the linear subproblem over the
//! simplex is solved by the vertex with the smallest gradient entry, and the
//! step is `2 / (s + 2)`. [`reference_solve`] is an independent spectral
//! projected-gradient solver used to verify it.

use crate::error::{Error, Result};
use crate::forest::WeightVector;
use crate::pairstats::{dot, PairStats};

/// Largest forest [`reference_solve`] accepts.
pub const REFERENCE_MAX_TREES: usize = 64;

/// Iterations between exact re-normalizations of the Frank-Wolfe iterate.
const RENORMALIZE_EVERY: usize = 100;

#[derive(Debug, Clone)]
pub struct ObjectiveParams<'a> {
    stats: &'a PairStats,
    different: Vec<usize>,
    tau: f64,
    lambda: f64,
}

impl<'a> ObjectiveParams<'a> {
    pub fn new(stats: &'a PairStats, tau: f64, lambda: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be positive and finite, got {tau}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be non-negative and finite, got {lambda}"
            )));
        }
        let different = (0..stats.num_pairs()).filter(|&k| stats.pairs()[k].different).collect();
        Ok(Self {
            stats,
            different,
            tau,
            lambda,
        })
    }

    pub fn num_trees(&self) -> usize {
        self.stats.num_trees()
    }

    pub fn stats(&self) -> &PairStats {
        self.stats
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.num_trees() {
            return Err(Error::DimensionMismatch {
                expected: self.num_trees(),
                actual: w.len(),
            });
        }
        Ok(())
    }

    fn quadratic(&self, w: &[f64]) -> f64 {
        self.stats
            .pi()
            .iter()
            .zip(w)
            .map(|(&pi, &wt)| (pi + self.lambda) * wt * wt)
            .sum()
    }

    fn value_unchecked(&self, w: &[f64]) -> f64 {
        let hinge: f64 = self
            .different
            .iter()
            .map(|&k| {
                let s = self.tau - dot(self.stats.q_row(k), w);
                if s > 0.0 {
                    s * s
                } else {
                    0.0
                }
            })
            .sum();
        self.quadratic(w) + hinge
    }

    /// Gradient given precomputed margins `<Q_ij, w>` for the
    /// different-class pairs (in `self.different` order).
    fn gradient_from_margins(&self, w: &[f64], margins: &[f64], grad: &mut [f64]) {
        for ((g, &pi), &wt) in grad.iter_mut().zip(self.stats.pi()).zip(w) {
            *g = 2.0 * wt * (self.lambda + pi);
        }
        for (&k, &m) in self.different.iter().zip(margins) {
            let s = self.tau - m;
            if s > 0.0 {
                let scale = 2.0 * s;
                for (g, &q) in grad.iter_mut().zip(self.stats.q_row(k)) {
                    *g -= scale * q;
                }
            }
        }
    }

    fn margins(&self, w: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.different.iter().map(|&k| dot(self.stats.q_row(k), w)));
    }

    fn value_from_margins(&self, w: &[f64], margins: &[f64]) -> f64 {
        let hinge: f64 = margins
            .iter()
            .map(|&m| {
                let s = self.tau - m;
                if s > 0.0 {
                    s * s
                } else {
                    0.0
                }
            })
            .sum();
        self.quadratic(w) + hinge
    }
}

/// `J(w)`.
pub fn objective(params: &ObjectiveParams<'_>, w: &[f64]) -> Result<f64> {
    params.check(w)?;
    Ok(params.value_unchecked(w))
}

/// `grad J(w)`.
pub fn gradient(params: &ObjectiveParams<'_>, w: &[f64]) -> Result<Vec<f64>> {
    params.check(w)?;
    let mut margins = Vec::new();
    params.margins(w, &mut margins);
    let mut grad = vec![0.0; w.len()];
    params.gradient_from_margins(w, &margins, &mut grad);
    Ok(grad)
}

/// Index of the smallest gradient entry; ties go to the lowest index.
pub fn argmin_vertex(grad: &[f64]) -> Result<usize> {
    if grad.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
    }
    let mut best = 0;
    for (t, &g) in grad.iter().enumerate() {
        if g.is_nan() {
            return Err(Error::NanGradient);
        }
        if g < grad[best] {
            best = t;
        }
    }
    Ok(best)
}

/// Linear minimization oracle over the simplex: the one-hot vertex at the
/// smallest gradient entry.
pub fn lmo_vertex(grad: &[f64]) -> Result<WeightVector> {
    let t = argmin_vertex(grad)?;
    Ok(WeightVector::one_hot(grad.len(), t))
}

/// Frank-Wolfe duality gap `<w - g, grad>` at `w`, where `g` is the LMO vertex.
pub fn duality_gap(w: &[f64], grad: &[f64]) -> Result<f64> {
    let t = argmin_vertex(grad)?;
    Ok(dot(w, grad) - grad[t])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwResult {
    /// Final iterate `w_S`.
    pub weights: WeightVector,
    /// Duality gap at `w_S`; an upper bound on `J(w_S) - min J`.
    pub gap: f64,
    /// `J(w_S)`.
    pub objective: f64,
}

/// Frank-Wolfe with step `2 / (s + 2)` for `iterations` steps from `w0`
/// (uniform when `None`).
pub fn frank_wolfe(params: &ObjectiveParams<'_>, iterations: usize, w0: Option<&WeightVector>) -> Result<FwResult> {
    frank_wolfe_observed(params, iterations, w0, |_, _| {})
}

/// [`frank_wolfe`] calling `observe(s, w_s)` for every iterate, `w_0` included.
pub fn frank_wolfe_observed(
    params: &ObjectiveParams<'_>,
    iterations: usize,
    w0: Option<&WeightVector>,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<FwResult> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("Frank-Wolfe needs at least one iteration".into()));
    }
    let t = params.num_trees();
    let mut w = match w0 {
        Some(w0) => {
            params.check(w0.as_slice())?;
            w0.as_slice().to_vec()
        }
        None => WeightVector::uniform(t).into_inner(),
    };
    let mut margins = Vec::with_capacity(params.different.len());
    params.margins(&w, &mut margins);
    let mut grad = vec![0.0; t];
    observe(0, &w);

    for s in 0..iterations {
        params.gradient_from_margins(&w, &margins, &mut grad);
        let vertex = argmin_vertex(&grad)?;
        let gamma = 2.0 / (s as f64 + 2.0);
        let keep = 1.0 - gamma;
        w.iter_mut().for_each(|v| *v *= keep);
        w[vertex] += gamma;
        for (m, &k) in margins.iter_mut().zip(&params.different) {
            *m = keep * *m + gamma * params.stats.q_row(k)[vertex];
        }
        if (s + 1) % RENORMALIZE_EVERY == 0 {
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= sum);
            params.margins(&w, &mut margins);
        }
        observe(s + 1, &w);
    }

    params.margins(&w, &mut margins);
    params.gradient_from_margins(&w, &margins, &mut grad);
    let gap = duality_gap(&w, &grad)?;
    let objective = params.value_from_margins(&w, &margins);
    Ok(FwResult {
        weights: WeightVector::from_simplex(w),
        gap,
        objective,
    })
}

/// Euclidean projection onto the unit simplex (sort-based, exact).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

const REFERENCE_MAX_ITERATIONS: usize = 200_000;

/// High-precision solve by spectral projected gradient (Barzilai-Borwein
/// steps, nonmonotone Armijo backtracking along the projected direction).
/// Stops once the Frank-Wolfe duality gap is at most `tol`.
pub fn reference_solve(params: &ObjectiveParams<'_>, tol: f64) -> Result<WeightVector> {
    let t = params.num_trees();
    if t > REFERENCE_MAX_TREES {
        return Err(Error::InvalidConfig(format!(
            "reference solver supports at most {REFERENCE_MAX_TREES} trees, got {t}"
        )));
    }
    const MEMORY: usize = 10;
    const ARMIJO: f64 = 1e-4;

    let mut w = WeightVector::uniform(t).into_inner();
    let mut grad = gradient(params, &w)?;
    let mut value = params.value_unchecked(&w);
    let mut history = [value; MEMORY];
    let mut step = 1.0;
    let mut gap = duality_gap(&w, &grad)?;

    for it in 0..REFERENCE_MAX_ITERATIONS {
        if gap <= tol {
            return Ok(WeightVector::from_simplex(renormalized(w)));
        }
        let trial: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        let dir: Vec<f64> = project_simplex(&trial).iter().zip(&w).map(|(p, x)| p - x).collect();
        let slope = dot(&grad, &dir);
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut alpha = 1.0;
        let mut next;
        let mut next_value;
        loop {
            next = w.iter().zip(&dir).map(|(x, d)| x + alpha * d).collect::<Vec<_>>();
            next_value = params.value_unchecked(&next);
            if next_value <= reference + ARMIJO * alpha * slope || alpha < 1e-20 {
                break;
            }
            alpha *= 0.5;
        }

        let next_grad = gradient(params, &next)?;
        let s: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-12, 1e12) } else { 1e12 };

        w = next;
        grad = next_grad;
        value = next_value;
        history[it % MEMORY] = value;
        gap = duality_gap(&w, &grad)?;
    }
    Err(Error::NonConvergence {
        iterations: REFERENCE_MAX_ITERATIONS,
        gap,
    })
}

fn renormalized(mut w: Vec<f64>) -> Vec<f64> {
    w.iter_mut().for_each(|v| *v = v.max(0.0));
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}
