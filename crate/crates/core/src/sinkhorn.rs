//! Entropy-regularized transport by alternating diagonal scaling.
//!
//! The log-domain mode iterates on potentials `f = eps * ln u`, `g = eps * ln v`
//! and can anneal `eps` geometrically from the cost scale down to the target,
//! warm-starting each stage. The linear mode is the plain scaling recursion
//! `v = q / K^T u`, `u = p / K v` on the kernel `K = exp(-c / eps)`.

use serde::{Deserialize, Serialize};

use crate::cost::CostMatrix;
use crate::error::{invalid, Result, TlpError};
use crate::exact::check_weights;
use crate::measure::{marginals, TransportPlan};

/// Plan entries at or below this mass are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Epsilon {
    Absolute(f64),
    /// Multiple of the largest cost entry.
    Relative(f64),
}

impl Epsilon {
    pub fn resolve(self, cost: &CostMatrix) -> f64 {
        match self {
            Epsilon::Absolute(e) => e,
            Epsilon::Relative(r) => r * cost.max().max(f64::MIN_POSITIVE),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    pub epsilon: Epsilon,
    pub max_iters: usize,
    /// Relative change of the regularized objective that counts as converged.
    pub stop_ratio: f64,
    pub log_domain: bool,
    /// Anneal epsilon from the cost scale down to the target (log domain only).
    pub eps_scaling: bool,
    /// Largest admissible marginal residual for convergence; `None` disables the check.
    pub marginal_tol: Option<f64>,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            epsilon: Epsilon::Relative(1e-2),
            max_iters: 10_000,
            stop_ratio: 1e-4,
            log_domain: true,
            eps_scaling: true,
            marginal_tol: Some(1e-6),
        }
    }
}

impl SinkhornParams {
    pub fn validate(&self) -> Result<()> {
        let eps_ok = match self.epsilon {
            Epsilon::Absolute(e) | Epsilon::Relative(e) => e.is_finite() && e > 0.0,
        };
        if !eps_ok {
            return invalid("epsilon must be positive");
        }
        if !(self.stop_ratio.is_finite() && self.stop_ratio > 0.0) {
            return invalid("stop_ratio must be positive");
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        if let Some(t) = self.marginal_tol {
            if !(t.is_finite() && t > 0.0) {
                return invalid("marginal_tol must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornOutput {
    pub plan: TransportPlan,
    /// `sum_ij c_ij pi_ij` without the entropy term.
    pub objective: f64,
    /// `sum_ij c_ij pi_ij - eps * H(pi)` of the returned plan.
    pub regularized: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest deviation of the plan marginals from the weights.
    pub marginal_residual: f64,
    /// Regularized objective after each iteration at the target epsilon.
    pub objective_history: Vec<f64>,
    /// Dual objective after each iteration at the target epsilon.
    pub dual_history: Vec<f64>,
}

/// `sum c pi - eps H(pi)` with `H(pi) = -sum pi ln pi`.
pub fn sinkhorn_objective(plan: &TransportPlan, cost: &CostMatrix, epsilon: f64) -> f64 {
    plan.entries()
        .iter()
        .map(|e| {
            let neg_entropy = if e.mass > 0.0 {
                e.mass * e.mass.ln()
            } else {
                0.0
            };
            cost.get(e.source, e.target) * e.mass + epsilon * neg_entropy
        })
        .sum()
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|t| (t - m).exp()).sum::<f64>().ln()
}

struct LogState<'a> {
    c: &'a CostMatrix,
    ln_p: Vec<f64>,
    ln_q: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

struct Sweep {
    primal: f64,
    dual: f64,
    residual: f64,
}

impl LogState<'_> {
    /// One `v` then `u` update, followed by objective and residual evaluation.
    fn sweep(&mut self, eps: f64, p: &[f64], q: &[f64]) -> Sweep {
        let (n, m) = (self.c.rows(), self.c.cols());
        let inv = 1.0 / eps;
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| (self.f[i] - self.c.get(i, j)) * inv));
            self.g[j] = eps * (self.ln_q[j] - lse);
        }
        for i in 0..n {
            let row = self.c.row(i);
            let g = &self.g;
            let lse = log_sum_exp((0..m).map(|j| (g[j] - row[j]) * inv));
            self.f[i] = eps * (self.ln_p[i] - lse);
        }
        let mut col = vec![0.0; m];
        let mut row_err: f64 = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            let row = self.c.row(i);
            let mut r = 0.0;
            for j in 0..m {
                let pij = ((self.f[i] + self.g[j] - row[j]) * inv).exp();
                r += pij;
                col[j] += pij;
            }
            total += r;
            row_err = row_err.max((r - p[i]).abs());
        }
        let col_err = col
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let fp: f64 = self.f.iter().zip(p).map(|(a, b)| a * b).sum();
        let gq: f64 = self.g.iter().zip(q).map(|(a, b)| a * b).sum();
        let gb: f64 = self.g.iter().zip(&col).map(|(a, b)| a * b).sum();
        // With ln pi = (f + g - c) / eps the regularized primal collapses to
        // sum f * rowsum + sum g * colsum; rows are exact after the u update.
        Sweep {
            primal: fp + gb,
            dual: fp + gq - eps * total + eps,
            residual: row_err.max(col_err),
        }
    }

    fn plan(&self, eps: f64) -> Vec<f64> {
        let (n, m) = (self.c.rows(), self.c.cols());
        let mut dense = Vec::with_capacity(n * m);
        for i in 0..n {
            let row = self.c.row(i);
            for j in 0..m {
                dense.push(((self.f[i] + self.g[j] - row[j]) / eps).exp());
            }
        }
        dense
    }
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    (cur - prev).abs() / prev.abs().max(f64::MIN_POSITIVE)
}

fn finish(
    cost: &CostMatrix,
    p: &[f64],
    q: &[f64],
    dense: Vec<f64>,
    eps: f64,
    iterations: usize,
    converged: bool,
    objective_history: Vec<f64>,
    dual_history: Vec<f64>,
) -> Result<SinkhornOutput> {
    if dense.iter().any(|x| !x.is_finite()) {
        return Err(TlpError::NumericUnderflow(
            "Sinkhorn scalings left the finite range; use the log-domain mode or a larger epsilon"
                .into(),
        ));
    }
    let plan = TransportPlan::from_dense(cost.rows(), cost.cols(), &dense, PRUNE_THRESHOLD)?;
    let objective = plan.cost(|i, j| cost.get(i, j));
    let regularized = sinkhorn_objective(&plan, cost, eps);
    let (a, b) = marginals(&plan);
    let marginal_residual = a
        .iter()
        .zip(p)
        .chain(b.iter().zip(q))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(SinkhornOutput {
        plan,
        objective,
        regularized,
        epsilon: eps,
        iterations,
        converged,
        marginal_residual,
        objective_history,
        dual_history,
    })
}

fn solve_log(
    cost: &CostMatrix,
    p: &[f64],
    q: &[f64],
    params: &SinkhornParams,
    eps: f64,
) -> Result<SinkhornOutput> {
    let mut st = LogState {
        c: cost,
        ln_p: p.iter().map(|w| w.ln()).collect(),
        ln_q: q.iter().map(|w| w.ln()).collect(),
        f: vec![0.0; cost.rows()],
        g: vec![0.0; cost.cols()],
    };
    let mut iterations = 0usize;
    let scale = cost.max();
    if params.eps_scaling && scale > eps {
        let mut stage = scale;
        while stage > eps * 2.0 && iterations < params.max_iters {
            let mut prev = None;
            loop {
                let s = st.sweep(stage, p, q);
                iterations += 1;
                let small = prev.is_some_and(|pv| relative_change(pv, s.primal) < 1e-3);
                if (small && s.residual < 1e-3) || iterations >= params.max_iters {
                    break;
                }
                prev = Some(s.primal);
            }
            stage *= 0.5;
        }
    }
    let mut history = Vec::new();
    let mut duals = Vec::new();
    let mut converged = false;
    while iterations < params.max_iters {
        let s = st.sweep(eps, p, q);
        iterations += 1;
        let small = history
            .last()
            .is_some_and(|&prev| relative_change(prev, s.primal) < params.stop_ratio);
        history.push(s.primal);
        duals.push(s.dual);
        if small && params.marginal_tol.is_none_or(|t| s.residual < t) {
            converged = true;
            break;
        }
    }
    finish(
        cost,
        p,
        q,
        st.plan(eps),
        eps,
        iterations,
        converged,
        history,
        duals,
    )
}

fn solve_linear(
    cost: &CostMatrix,
    p: &[f64],
    q: &[f64],
    params: &SinkhornParams,
    eps: f64,
) -> Result<SinkhornOutput> {
    let (n, m) = (cost.rows(), cost.cols());
    let kernel: Vec<f64> = cost.data().iter().map(|c| (-c / eps).exp()).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;
    let underflow = |what: &str, k: usize| {
        TlpError::NumericUnderflow(format!(
            "kernel {what} {k} vanished at epsilon {eps:.3e}; use the log-domain mode"
        ))
    };
    while iterations < params.max_iters {
        for j in 0..m {
            let s: f64 = (0..n).map(|i| kernel[i * m + j] * u[i]).sum();
            if s <= 0.0 || !s.is_finite() {
                return Err(underflow("column", j));
            }
            v[j] = q[j] / s;
        }
        let mut residual: f64 = 0.0;
        let mut col = vec![0.0; m];
        let mut primal = 0.0;
        for i in 0..n {
            let s: f64 = (0..m).map(|j| kernel[i * m + j] * v[j]).sum();
            if s <= 0.0 || !s.is_finite() {
                return Err(underflow("row", i));
            }
            u[i] = p[i] / s;
            for j in 0..m {
                let pij = u[i] * kernel[i * m + j] * v[j];
                col[j] += pij;
                if pij > 0.0 {
                    primal += cost.get(i, j) * pij + eps * pij * pij.ln();
                }
            }
        }
        for (a, b) in col.iter().zip(q) {
            residual = residual.max((a - b).abs());
        }
        iterations += 1;
        let small = history
            .last()
            .is_some_and(|&prev| relative_change(prev, primal) < params.stop_ratio);
        history.push(primal);
        if small && params.marginal_tol.is_none_or(|t| residual < t) {
            converged = true;
            break;
        }
    }
    let mut dense = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            dense.push(u[i] * kernel[i * m + j] * v[j]);
        }
    }
    finish(
        cost,
        p,
        q,
        dense,
        eps,
        iterations,
        converged,
        history,
        Vec::new(),
    )
}

/// Entropic transport between weights `p` and `q` under `cost`.
///
/// Returns the last iterate with `converged = false` when `max_iters` runs out.
pub fn sinkhorn_solve(
    cost: &CostMatrix,
    p: &[f64],
    q: &[f64],
    params: &SinkhornParams,
) -> Result<SinkhornOutput> {
    params.validate()?;
    if p.len() != cost.rows() || q.len() != cost.cols() {
        return invalid("marginal lengths do not match the cost matrix");
    }
    check_weights(p, q)?;
    if p.iter().chain(q).any(|w| *w <= 0.0) {
        return invalid("Sinkhorn needs strictly positive weights");
    }
    let eps = params.epsilon.resolve(cost);
    let out = if params.log_domain {
        solve_log(cost, p, q, params, eps)?
    } else {
        solve_linear(cost, p, q, params, eps)?
    };
    if !out.converged {
        log::warn!(
            "Sinkhorn stopped after {} iterations without converging (residual {:.3e})",
            out.iterations,
            out.marginal_residual
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::solve_assignment;
    use crate::measure::PlanEntry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn single_point() {
        let c = CostMatrix::new(1, 1, vec![0.7]).unwrap();
        for log_domain in [true, false] {
            let params = SinkhornParams {
                log_domain,
                ..Default::default()
            };
            let out = sinkhorn_solve(&c, &[1.0], &[1.0], &params).unwrap();
            assert!((out.objective - 0.7).abs() < 1e-12);
            assert_eq!(out.plan.entries().len(), 1);
        }
    }

    #[test]
    fn objective_of_point_mass_and_uniform_plan() {
        let c = CostMatrix::new(1, 1, vec![2.0]).unwrap();
        let plan = TransportPlan::new(
            1,
            1,
            vec![PlanEntry {
                source: 0,
                target: 0,
                mass: 1.0,
            }],
        )
        .unwrap();
        assert_eq!(sinkhorn_objective(&plan, &c, 0.3), 2.0);

        let z = CostMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let plan = TransportPlan::from_dense(2, 2, &[0.25; 4], 0.0).unwrap();
        assert!((sinkhorn_objective(&plan, &z, 1.0) + 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = CostMatrix::new(4, 3, (0..12).map(|_| rng.random()).collect()).unwrap();
        let m: Vec<f64> = (0..12).map(|_| rng.random_range(0.01..1.0)).collect();
        let plan = TransportPlan::from_dense(4, 3, &m, 0.0).unwrap();
        let eps = 0.37;
        let mut direct = 0.0;
        for k in 0..12 {
            direct += c.data()[k] * m[k] + eps * m[k] * m[k].ln();
        }
        assert!((sinkhorn_objective(&plan, &c, eps) - direct).abs() < 1e-12);
    }

    #[test]
    fn close_to_unique_permutation_optimum() {
        let mut c = vec![1.0; 16];
        for (i, j) in [(0, 2), (1, 0), (2, 3), (3, 1)] {
            c[i * 4 + j] = 0.0;
        }
        let c = CostMatrix::new(4, 4, c).unwrap();
        let exact = solve_assignment(&c).unwrap().objective;
        let params = SinkhornParams {
            epsilon: Epsilon::Relative(1e-3),
            ..Default::default()
        };
        let out = sinkhorn_solve(&c, &uniform(4), &uniform(4), &params).unwrap();
        assert!((out.objective - exact).abs() <= 0.01 * exact.max(1e-2));
    }

    #[test]
    fn marginal_residual_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let c = CostMatrix::new(16, 16, (0..256).map(|_| rng.random()).collect()).unwrap();
        let params = SinkhornParams {
            max_iters: 100_000,
            ..Default::default()
        };
        let out = sinkhorn_solve(&c, &uniform(16), &uniform(16), &params).unwrap();
        assert!(out.converged);
        assert!(out.marginal_residual < 1e-6, "{}", out.marginal_residual);
    }

    #[test]
    fn log_and_linear_modes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c = CostMatrix::new(6, 5, (0..30).map(|_| rng.random()).collect()).unwrap();
        let p = uniform(6);
        let q = uniform(5);
        let base = SinkhornParams {
            epsilon: Epsilon::Absolute(0.1),
            stop_ratio: 1e-14,
            marginal_tol: Some(1e-13),
            max_iters: 5000,
            eps_scaling: false,
            ..Default::default()
        };
        let a = sinkhorn_solve(&c, &p, &q, &base).unwrap();
        let b = sinkhorn_solve(
            &c,
            &p,
            &q,
            &SinkhornParams {
                log_domain: false,
                ..base
            },
        )
        .unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-8 * a.objective);
    }

    #[test]
    fn linear_mode_reports_underflow() {
        let c = CostMatrix::new(2, 2, vec![0.0, 1000.0, 1000.0, 0.0]).unwrap();
        let params = SinkhornParams {
            epsilon: Epsilon::Absolute(1.0),
            log_domain: false,
            ..Default::default()
        };
        let c2 = CostMatrix::new(2, 2, vec![1000.0; 4]).unwrap();
        assert!(sinkhorn_solve(&c, &uniform(2), &uniform(2), &params).is_ok());
        assert!(matches!(
            sinkhorn_solve(&c2, &uniform(2), &uniform(2), &params),
            Err(TlpError::NumericUnderflow(_))
        ));
    }

    #[test]
    fn dual_objective_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let c = CostMatrix::new(8, 8, (0..64).map(|_| rng.random()).collect()).unwrap();
        let params = SinkhornParams {
            epsilon: Epsilon::Relative(1e-2),
            ..Default::default()
        };
        let out = sinkhorn_solve(&c, &uniform(8), &uniform(8), &params).unwrap();
        for w in out.dual_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_params() {
        let c = CostMatrix::new(1, 1, vec![0.0]).unwrap();
        let params = SinkhornParams {
            epsilon: Epsilon::Absolute(0.0),
            ..Default::default()
        };
        assert!(sinkhorn_solve(&c, &[1.0], &[1.0], &params).is_err());
        let params = SinkhornParams {
            max_iters: 0,
            ..Default::default()
        };
        assert!(sinkhorn_solve(&c, &[1.0], &[1.0], &params).is_err());
    }
}
