//! Distances between signals and pairwise distance matrices.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{
    build_cost, check_compatible, derivative_signal, lp_distance, pth_power_dist, CostParams,
    Lambda,
};
use crate::error::{invalid, Result, TlpError};
use crate::exact::{solve_assignment, solve_lp};
use crate::measure::{
    value_histogram, DiscreteMeasure, HistogramGrid, PlanEntry, Points, Signal, TransportPlan,
};
use crate::multiscale::{multiscale_ground, multiscale_solve, MultiscaleParams};
use crate::sinkhorn::{sinkhorn_solve, SinkhornParams};

/// Largest support handled by the exact solvers under automatic selection.
pub const AUTO_EXACT_LIMIT: usize = 2048;

pub const DEFAULT_HISTOGRAM_BINS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tlp,
    Ot,
    Lp,
    /// L^p between finite-difference derivatives.
    Dlp,
    /// TL^p between finite-difference derivatives.
    Dtlp,
    /// `alpha * L^p + (1 - alpha) * DL^p`.
    Wlp,
    /// `alpha * TL^p + (1 - alpha) * DTL^p`.
    Wtlp,
    /// OT between the value histograms.
    PushforwardOt,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Tlp,
        Method::Ot,
        Method::Lp,
        Method::Dlp,
        Method::Dtlp,
        Method::Wlp,
        Method::Wtlp,
        Method::PushforwardOt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tlp => "tlp",
            Method::Ot => "ot",
            Method::Lp => "lp",
            Method::Dlp => "dlp",
            Method::Dtlp => "dtlp",
            Method::Wlp => "wlp",
            Method::Wtlp => "wtlp",
            Method::PushforwardOt => "pushforward_ot",
        }
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Method::Wlp | Method::Wtlp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = TlpError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| TlpError::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Exact,
    Sinkhorn,
    Multiscale,
    /// Exact up to [`AUTO_EXACT_LIMIT`] points, then multiscale on grids and
    /// Sinkhorn elsewhere.
    Auto,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Exact => "exact",
            SolverChoice::Sinkhorn => "sinkhorn",
            SolverChoice::Multiscale => "multiscale",
            SolverChoice::Auto => "auto",
        }
    }

    fn resolve(self, n: usize, m: usize, gridded: bool) -> SolverChoice {
        match self {
            SolverChoice::Auto if n.max(m) <= AUTO_EXACT_LIMIT => SolverChoice::Exact,
            SolverChoice::Auto if gridded => SolverChoice::Multiscale,
            SolverChoice::Auto => SolverChoice::Sinkhorn,
            other => other,
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverChoice {
    type Err = TlpError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(SolverChoice::Exact),
            "sinkhorn" => Ok(SolverChoice::Sinkhorn),
            "multiscale" => Ok(SolverChoice::Multiscale),
            "auto" => Ok(SolverChoice::Auto),
            _ => invalid(format!("unknown solver '{s}'")),
        }
    }
}

/// Solver selection with the tuning of each iterative solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub choice: SolverChoice,
    pub sinkhorn: SinkhornParams,
    pub multiscale: MultiscaleParams,
}

impl SolverSettings {
    pub fn new(choice: SolverChoice) -> Self {
        SolverSettings {
            choice,
            sinkhorn: SinkhornParams::default(),
            multiscale: MultiscaleParams::default(),
        }
    }

    pub fn exact() -> Self {
        Self::new(SolverChoice::Exact)
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self::new(SolverChoice::Auto)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub method: Method,
    pub params: CostParams,
    pub solver: SolverSettings,
    /// Blend weight of the weighted methods.
    pub alpha: Option<f64>,
    pub histogram_bins: usize,
}

impl DistanceSpec {
    pub fn new(method: Method, params: CostParams) -> Self {
        DistanceSpec {
            method,
            params,
            solver: SolverSettings::default(),
            alpha: None,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
        }
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        CostParams::new(self.params.p, self.params.lambda)?;
        match (self.method.is_weighted(), self.alpha) {
            (true, None) => return invalid(format!("method {} needs alpha", self.method)),
            (false, Some(_)) => return invalid(format!("method {} takes no alpha", self.method)),
            (true, Some(a)) if !(0.0..=1.0).contains(&a) => {
                return invalid(format!("alpha must lie in [0, 1], got {a}"))
            }
            _ => {}
        }
        if self.histogram_bins == 0 {
            return invalid("histogram_bins must be positive");
        }
        self.solver.sinkhorn.validate()
    }
}

/// An optimal (or approximately optimal) coupling and its cost.
#[derive(Clone, Debug)]
pub struct Transport {
    pub plan: TransportPlan,
    /// `sum c_ij pi_ij` in p-th-power units.
    pub cost: f64,
    pub solver: SolverChoice,
    pub converged: bool,
}

impl Transport {
    pub fn distance(&self, p: f64) -> f64 {
        self.cost.max(0.0).powf(1.0 / p)
    }
}

/// Indices with positive weight and the renormalized weights on them.
fn positive_part(w: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let idx: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let total: f64 = idx.iter().map(|&i| w[i]).sum();
    let sub = idx.iter().map(|&i| w[i] / total).collect();
    (idx, sub)
}

fn lift_entries(entries: &[PlanEntry], rows: &[usize], cols: &[usize]) -> Vec<PlanEntry> {
    entries
        .iter()
        .map(|e| PlanEntry {
            source: rows[e.source],
            target: cols[e.target],
            mass: e.mass,
        })
        .collect()
}

/// Sinkhorn on the positive-weight supports, mapped back to full indices.
fn sinkhorn_transport(
    cost_fn: impl Fn(usize, usize) -> f64,
    p: &[f64],
    q: &[f64],
    params: &SinkhornParams,
) -> Result<Transport> {
    let (rows, pw) = positive_part(p);
    let (cols, qw) = positive_part(q);
    let c =
        crate::cost::CostMatrix::from_fn(rows.len(), cols.len(), |a, b| cost_fn(rows[a], cols[b]))?;
    let out = sinkhorn_solve(&c, &pw, &qw, params)?;
    let plan = TransportPlan::new(
        p.len(),
        q.len(),
        lift_entries(out.plan.entries(), &rows, &cols),
    )?;
    Ok(Transport {
        plan,
        cost: out.objective,
        solver: SolverChoice::Sinkhorn,
        converged: out.converged,
    })
}

/// Optimal TL^p coupling under a finite lambda.
pub fn tlp_transport(
    f: &Signal,
    g: &Signal,
    params: &CostParams,
    solver: &SolverSettings,
) -> Result<Transport> {
    check_compatible(f, g)?;
    let lambda = params.finite_lambda()?;
    let gridded = f.grid().is_some() && g.grid().is_some();
    let choice = solver.choice.resolve(f.len(), g.len(), gridded);
    let (p, q) = (f.measure().weights(), g.measure().weights());
    match choice {
        SolverChoice::Exact => {
            let c = build_cost(f, g, params)?;
            let sol = if f.len() == g.len() && f.measure().is_uniform() && g.measure().is_uniform()
            {
                solve_assignment(&c)?
            } else {
                solve_lp(&c, p, q)?
            };
            Ok(Transport {
                plan: sol.plan,
                cost: sol.objective,
                solver: choice,
                converged: true,
            })
        }
        SolverChoice::Multiscale => {
            let sol = multiscale_solve(f, g, params, &solver.multiscale)?;
            Ok(Transport {
                plan: sol.solution.plan,
                cost: sol.solution.objective,
                solver: choice,
                converged: true,
            })
        }
        SolverChoice::Sinkhorn => {
            let inv = 1.0 / lambda;
            let (xs, ys) = (f.measure().points(), g.measure().points());
            let cost = |i: usize, j: usize| {
                crate::cost::tlp_entry(
                    xs.point(i),
                    f.value(i),
                    ys.point(j),
                    g.value(j),
                    params.p,
                    inv,
                )
            };
            sinkhorn_transport(cost, p, q, &solver.sinkhorn)
        }
        SolverChoice::Auto => unreachable!("auto is resolved above"),
    }
}

/// `d_TL^p` with the limits `lambda = 0` (L^p) and `lambda = inf` (histogram OT).
pub fn tlp_distance(
    f: &Signal,
    g: &Signal,
    params: &CostParams,
    solver: &SolverSettings,
) -> Result<f64> {
    match params.lambda {
        Lambda::Zero => lp_distance(f, g, params.p),
        Lambda::Infinity => pushforward_ot_distance(f, g, params.p, DEFAULT_HISTOGRAM_BINS),
        Lambda::Finite(_) => Ok(tlp_transport(f, g, params, solver)?.distance(params.p)),
    }
}

/// Optimal coupling of two measures on the line under `|x - y|^p`, by
/// monotone rearrangement of the sorted supports.
pub fn ot_1d(xs: &[f64], a: &[f64], ys: &[f64], b: &[f64], p: f64) -> Result<(TransportPlan, f64)> {
    if xs.len() != a.len() || ys.len() != b.len() || xs.is_empty() || ys.is_empty() {
        return invalid("support and weight lengths differ");
    }
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        idx
    };
    let (oi, oj) = (order(xs), order(ys));
    let mut entries = Vec::with_capacity(xs.len() + ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[oi[0]], b[oj[0]]);
    let mut cost = 0.0;
    loop {
        let m = ra.min(rb);
        if m > 0.0 {
            let (s, t) = (oi[i], oj[j]);
            entries.push(PlanEntry {
                source: s,
                target: t,
                mass: m,
            });
            cost += m * crate::cost::pow_abs(xs[s] - ys[t], p);
        }
        ra -= m;
        rb -= m;
        let advance_i = ra <= rb && i + 1 < xs.len();
        let advance_j = rb <= ra && j + 1 < ys.len();
        if !advance_i && !advance_j {
            break;
        }
        if advance_i {
            i += 1;
            ra = a[oi[i]];
        }
        if advance_j {
            j += 1;
            rb = b[oj[j]];
        }
    }
    Ok((TransportPlan::new(xs.len(), ys.len(), entries)?, cost))
}

/// Exact OT between two discrete measures under `|x - y|_p^p`.
pub fn measure_ot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
) -> Result<(TransportPlan, f64)> {
    if mu.dim() != nu.dim() {
        return invalid("measures live in different dimensions");
    }
    if mu.dim() == 1 {
        return ot_1d(
            mu.points().coords(),
            mu.weights(),
            nu.points().coords(),
            nu.weights(),
            p,
        );
    }
    let (rows, pw) = positive_part(mu.weights());
    let (cols, qw) = positive_part(nu.weights());
    let c = crate::cost::CostMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        pth_power_dist(mu.points().point(rows[a]), nu.points().point(cols[b]), p)
    })?;
    let sol = solve_lp(&c, &pw, &qw)?;
    let plan = TransportPlan::new(
        mu.len(),
        nu.len(),
        lift_entries(sol.plan.entries(), &rows, &cols),
    )?;
    Ok((plan, sol.objective))
}

/// Signal values times measure weights, checked to be a valid mass vector.
fn mass_of(f: &Signal, name: &str) -> Result<(Vec<f64>, f64)> {
    if f.channels() != 1 {
        return invalid(format!(
            "OT needs scalar signals; {name} has {} channels",
            f.channels()
        ));
    }
    if f.values().iter().any(|&v| v < 0.0) {
        return invalid(format!(
            "OT needs non-negative signals; {name} has negative values (apply ot_normalize first)"
        ));
    }
    let mass: Vec<f64> = f
        .measure()
        .weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v)
        .collect();
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return invalid(format!("{name} carries no mass (apply ot_normalize first)"));
    }
    Ok((mass.iter().map(|m| m / total).collect(), total))
}

/// OT between signals read as densities: point `x_i` carries mass `w_i f(x_i)`.
pub fn ot_transport(f: &Signal, g: &Signal, p: f64, solver: &SolverSettings) -> Result<Transport> {
    if f.dim() != g.dim() {
        return invalid("signals live on domains of different dimension");
    }
    let (a, ma) = mass_of(f, "f")?;
    let (b, mb) = mass_of(g, "g")?;
    if (ma - mb).abs() > 1e-6 * ma.max(mb).max(1.0) {
        return invalid(format!(
            "signals carry different mass ({ma} vs {mb}); apply ot_normalize first"
        ));
    }
    let gridded = f.grid().is_some() && g.grid().is_some();
    let choice = solver.choice.resolve(f.len(), g.len(), gridded);
    let (xs, ys) = (f.measure().points(), g.measure().points());
    let t = match choice {
        SolverChoice::Exact => {
            let mu = DiscreteMeasure::new(xs.clone(), a)?;
            let nu = DiscreteMeasure::new(ys.clone(), b)?;
            let (plan, cost) = measure_ot(&mu, &nu, p)?;
            Transport {
                plan,
                cost,
                solver: choice,
                converged: true,
            }
        }
        SolverChoice::Multiscale => {
            let as_signal = |s: &Signal, w: Vec<f64>| -> Result<Signal> {
                let m = DiscreteMeasure::new(s.measure().points().clone(), w)?;
                Signal::new(m, 1, vec![0.0; s.len()])?.with_grid(s.grid().unwrap().to_vec())
            };
            let sol =
                multiscale_ground(&as_signal(f, a)?, &as_signal(g, b)?, p, &solver.multiscale)?;
            Transport {
                plan: sol.solution.plan,
                cost: sol.solution.objective,
                solver: choice,
                converged: true,
            }
        }
        SolverChoice::Sinkhorn => sinkhorn_transport(
            |i, j| pth_power_dist(xs.point(i), ys.point(j), p),
            &a,
            &b,
            &solver.sinkhorn,
        )?,
        SolverChoice::Auto => unreachable!("auto is resolved above"),
    };
    Ok(Transport {
        cost: t.cost * ma,
        ..t
    })
}

pub fn ot_distance(f: &Signal, g: &Signal, p: f64, solver: &SolverSettings) -> Result<f64> {
    Ok(ot_transport(f, g, p, solver)?.distance(p))
}

/// OT between the binned value distributions `f#mu` and `g#nu`.
pub fn pushforward_ot_distance(f: &Signal, g: &Signal, p: f64, bins: usize) -> Result<f64> {
    if f.channels() != g.channels() {
        return invalid("signals have different channel counts");
    }
    let grid = HistogramGrid::covering(bins, &[f, g])?;
    let hf = value_histogram(f, &grid)?;
    let hg = value_histogram(g, &grid)?;
    let (_, cost) = measure_ot(&hf, &hg, p)?;
    Ok(cost.max(0.0).powf(1.0 / p))
}

fn base_distance(f: &Signal, g: &Signal, spec: &DistanceSpec, transport: bool) -> Result<f64> {
    if transport {
        tlp_distance(f, g, &spec.params, &spec.solver)
    } else {
        lp_distance(f, g, spec.params.p)
    }
}

/// Derivative-based and blended distances on 1-D signals.
pub fn combined_distance(f: &Signal, g: &Signal, spec: &DistanceSpec) -> Result<f64> {
    spec.validate()?;
    let transport = matches!(spec.method, Method::Dtlp | Method::Wtlp);
    match spec.method {
        Method::Dlp | Method::Dtlp => base_distance(
            &derivative_signal(f)?,
            &derivative_signal(g)?,
            spec,
            transport,
        ),
        Method::Wlp | Method::Wtlp => {
            let alpha = spec.alpha.expect("validated");
            let base = base_distance(f, g, spec, transport)?;
            let deriv = base_distance(
                &derivative_signal(f)?,
                &derivative_signal(g)?,
                spec,
                transport,
            )?;
            Ok(alpha * base + (1.0 - alpha) * deriv)
        }
        other => invalid(format!("{other} is not a derivative-based method")),
    }
}

/// Any supported distance selected by `spec.method`.
pub fn distance(f: &Signal, g: &Signal, spec: &DistanceSpec) -> Result<f64> {
    spec.validate()?;
    match spec.method {
        Method::Tlp => tlp_distance(f, g, &spec.params, &spec.solver),
        Method::Ot => ot_distance(f, g, spec.params.p, &spec.solver),
        Method::Lp => lp_distance(f, g, spec.params.p),
        Method::PushforwardOt => pushforward_ot_distance(f, g, spec.params.p, spec.histogram_bins),
        _ => combined_distance(f, g, spec),
    }
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
    spec: Option<DistanceSpec>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>, spec: Option<DistanceSpec>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return invalid(format!("{} entries for {n} labels", values.len()));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return invalid(format!("diagonal entry {i} is not zero"));
            }
            for j in 0..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !(a.is_finite() && a >= 0.0) {
                    return invalid(format!("entry ({i},{j}) is not a non-negative number"));
                }
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return invalid(format!("entries ({i},{j}) and ({j},{i}) differ"));
                }
            }
        }
        Ok(DistanceMatrix {
            labels,
            values,
            spec,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> Option<&DistanceSpec> {
        self.spec.as_ref()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    /// Principal submatrix on the given items, in the given order.
    pub fn select(&self, items: &[usize]) -> Result<DistanceMatrix> {
        if let Some(&bad) = items.iter().find(|&&i| i >= self.len()) {
            return invalid(format!("item {bad} out of range for {} items", self.len()));
        }
        let labels = items.iter().map(|&i| self.labels[i].clone()).collect();
        let values = items
            .iter()
            .flat_map(|&i| items.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        DistanceMatrix::new(labels, values, self.spec)
    }

    /// Largest `d(i,k) - d(i,j) - d(j,k)` over all triples.
    pub fn max_triangle_violation(&self) -> f64 {
        let n = self.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max(self.get(i, k) - self.get(i, j) - self.get(j, k));
                }
            }
        }
        worst
    }
}

/// All pairwise distances; pairs run in parallel on the current rayon pool.
pub fn pairwise_matrix(
    dataset: &[Signal],
    labels: &[String],
    spec: &DistanceSpec,
) -> Result<DistanceMatrix> {
    spec.validate()?;
    let n = dataset.len();
    if labels.len() != n {
        return invalid(format!("{} labels for {n} signals", labels.len()));
    }
    if n == 0 {
        return invalid("empty dataset");
    }
    for s in dataset {
        if s.dim() != dataset[0].dim() || s.channels() != dataset[0].channels() {
            return invalid("dataset mixes domain or channel dimensions");
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let results: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| distance(&dataset[i], &dataset[j], spec))
        .collect();
    let mut values = vec![0.0; n * n];
    for (&(i, j), r) in pairs.iter().zip(results) {
        let d = r.map_err(|e| {
            TlpError::InvalidArgument(format!("pair ({}, {}) failed: {e}", labels[i], labels[j]))
        })?;
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    DistanceMatrix::new(labels.to_vec(), values, Some(*spec))
}

/// Runs `pairwise_matrix` on a dedicated pool of `workers` threads.
pub fn pairwise_matrix_with_workers(
    dataset: &[Signal],
    labels: &[String],
    spec: &DistanceSpec,
    workers: usize,
) -> Result<DistanceMatrix> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| TlpError::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| pairwise_matrix(dataset, labels, spec))
}

/// Point mass `1` at `x` in one dimension, as a signal of value `v`.
pub fn point_signal(x: f64, v: f64) -> Result<Signal> {
    Signal::new(
        DiscreteMeasure::uniform(Points::new(1, vec![x])?)?,
        1,
        vec![v],
    )
}

/// Default lambda from the ratio of the domain scale to the value scale,
/// `lambda = (1 / mean max|f|)^p` on domains normalized to `[0,1]^d`.
pub fn lambda_heuristic(dataset: &[Signal], p: f64) -> Result<f64> {
    if dataset.is_empty() {
        return invalid("empty dataset");
    }
    let amp: f64 = dataset
        .iter()
        .map(|s| s.values().iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .sum::<f64>()
        / dataset.len() as f64;
    if amp <= 0.0 {
        return Err(TlpError::DegenerateInput(
            "all signals are identically zero".into(),
        ));
    }
    Ok((1.0 / amp).powf(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::ground_cost;
    use crate::exact::brute_force_min;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact() -> SolverSettings {
        SolverSettings::exact()
    }

    fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Signal {
        Signal::from_samples((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identical_signals_are_at_distance_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let f = random_signal(&mut rng, 12);
        let params = CostParams::finite(2.0, 1.0).unwrap();
        assert_eq!(tlp_distance(&f, &f, &params, &exact()).unwrap(), 0.0);
    }

    #[test]
    fn shift_map_bound_for_adjacent_indicators() {
        // chi_[0,1] vs chi_[1,2] on [0,2], normalized to [0,1]: the shift x -> x + 1/2
        // costs (1/lambda) * (1/2)^p in normalized units.
        let n = 40;
        let f: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect();
        let g: Vec<f64> = (0..n).map(|i| if i >= n / 2 { 1.0 } else { 0.0 }).collect();
        let (f, g) = (
            Signal::from_samples(f).unwrap(),
            Signal::from_samples(g).unwrap(),
        );
        for lambda in [0.5, 1.0, 4.0] {
            let params = CostParams::finite(1.0, lambda).unwrap();
            let d = tlp_distance(&f, &g, &params, &exact()).unwrap();
            assert!(d <= 0.5 / lambda + 1e-12, "lambda {lambda}: {d}");
        }
    }

    #[test]
    fn matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let f = random_signal(&mut rng, 6);
            let g = random_signal(&mut rng, 6);
            let params = CostParams::finite(2.0, 0.3).unwrap();
            let d = tlp_distance(&f, &g, &params, &exact()).unwrap();
            let b = brute_force_min(&build_cost(&f, &g, &params).unwrap())
                .unwrap()
                .sqrt();
            assert!((d - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ot_two_point_masses() {
        let l = 0.3;
        let f = point_signal(0.0, 1.0).unwrap();
        let g = point_signal(l, 1.0).unwrap();
        assert!((ot_distance(&f, &g, 2.0, &exact()).unwrap() - l).abs() < 1e-15);
        assert_eq!(ot_distance(&f, &f, 2.0, &exact()).unwrap(), 0.0);
    }

    #[test]
    fn ot_rejects_unnormalized_input() {
        let f = Signal::from_samples(vec![1.0, -1.0, 2.0]).unwrap();
        let g = Signal::from_samples(vec![1.0, 1.0, 1.0]).unwrap();
        let err = ot_distance(&f, &g, 2.0, &exact()).unwrap_err().to_string();
        assert!(err.contains("ot_normalize"));
        let h = Signal::from_samples(vec![2.0, 2.0, 2.0]).unwrap();
        assert!(ot_distance(&g, &h, 2.0, &exact())
            .unwrap_err()
            .to_string()
            .contains("ot_normalize"));
    }

    #[test]
    fn ot_1d_matches_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for p in [1.0, 2.0, 3.0] {
            let n = 9;
            let m = 7;
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let ys: Vec<f64> = (0..m).map(|_| rng.random()).collect();
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
            };
            let a = norm((0..n).map(|_| rng.random_range(0.1..1.0)).collect());
            let b = norm((0..m).map(|_| rng.random_range(0.1..1.0)).collect());
            let (plan, cost) = ot_1d(&xs, &a, &ys, &b, p).unwrap();
            let c = ground_cost(
                &Points::new(1, xs.clone()).unwrap(),
                &Points::new(1, ys.clone()).unwrap(),
                p,
            )
            .unwrap();
            let lp = solve_lp(&c, &a, &b).unwrap().objective;
            assert!(
                (cost - lp).abs() <= 1e-12 * lp.max(1.0),
                "p={p}: {cost} vs {lp}"
            );
            assert!(plan.marginal_error(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn pushforward_cases() {
        let zero = Signal::from_samples(vec![0.0; 8]).unwrap();
        let one = Signal::from_samples(vec![1.0; 8]).unwrap();
        assert!((pushforward_ot_distance(&zero, &one, 2.0, 64).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pushforward_ot_distance(&one, &one, 2.0, 64).unwrap(), 0.0);
    }

    #[test]
    fn large_lambda_decreases_toward_histogram_ot() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let n = 32;
        let levels = |rng: &mut ChaCha8Rng| -> Signal {
            let mut v: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..64) as f64 / 63.0)
                .collect();
            v[0] = 0.0;
            v[n - 1] = 1.0;
            Signal::from_samples(v).unwrap()
        };
        for _ in 0..5 {
            let (f, g) = (levels(&mut rng), levels(&mut rng));
            let limit = pushforward_ot_distance(&f, &g, 2.0, 64).unwrap();
            let mut prev = f64::INFINITY;
            for lambda in [10.0, 100.0, 1000.0] {
                let d = tlp_distance(&f, &g, &CostParams::finite(2.0, lambda).unwrap(), &exact())
                    .unwrap();
                assert!(d <= prev + 1e-12 && d >= limit - 1e-12);
                prev = d;
            }
            assert!(prev - limit < 0.05 * limit.max(1e-3));
        }
    }

    #[test]
    fn lambda_limits_route_to_lp_and_histogram_ot() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let f = random_signal(&mut rng, 10);
        let g = random_signal(&mut rng, 10);
        let zero = CostParams::new(2.0, Lambda::Zero).unwrap();
        let inf = CostParams::new(2.0, Lambda::Infinity).unwrap();
        assert_eq!(
            tlp_distance(&f, &g, &zero, &exact()).unwrap(),
            lp_distance(&f, &g, 2.0).unwrap()
        );
        assert_eq!(
            tlp_distance(&f, &g, &inf, &exact()).unwrap(),
            pushforward_ot_distance(&f, &g, 2.0, DEFAULT_HISTOGRAM_BINS).unwrap()
        );
    }

    #[test]
    fn blends_degenerate_at_alpha_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let f = random_signal(&mut rng, 16);
        let g = random_signal(&mut rng, 16);
        let params = CostParams::finite(2.0, 0.5).unwrap();
        for (weighted, base, deriv) in [
            (Method::Wlp, Method::Lp, Method::Dlp),
            (Method::Wtlp, Method::Tlp, Method::Dtlp),
        ] {
            let spec = |m: Method| DistanceSpec::new(m, params).with_solver(exact());
            let b = distance(&f, &g, &spec(base)).unwrap();
            let d = distance(&f, &g, &spec(deriv)).unwrap();
            assert_eq!(
                distance(&f, &g, &spec(weighted).with_alpha(1.0)).unwrap(),
                b
            );
            assert_eq!(
                distance(&f, &g, &spec(weighted).with_alpha(0.0)).unwrap(),
                d
            );
            let half = distance(&f, &g, &spec(weighted).with_alpha(0.5)).unwrap();
            assert!((half - 0.5 * (b + d)).abs() < 1e-12);
            assert!(distance(&f, &g, &spec(weighted).with_alpha(1.5)).is_err());
        }
        let d = distance(&f, &g, &DistanceSpec::new(Method::Dlp, params)).unwrap();
        let direct = lp_distance(
            &derivative_signal(&f).unwrap(),
            &derivative_signal(&g).unwrap(),
            2.0,
        )
        .unwrap();
        assert_eq!(d, direct);
    }

    #[test]
    fn pairwise_matrix_cases() {
        let params = CostParams::finite(2.0, 1.0).unwrap();
        let spec = DistanceSpec::new(Method::Tlp, params).with_solver(exact());
        let f = Signal::from_samples(vec![0.0, 1.0, 0.5]).unwrap();
        let one = pairwise_matrix(std::slice::from_ref(&f), &["a".into()], &spec).unwrap();
        assert_eq!(one.values(), &[0.0]);
        let same = pairwise_matrix(
            &[f.clone(), f.clone(), f.clone()],
            &["a".into(), "b".into(), "c".into()],
            &spec,
        )
        .unwrap();
        assert!(same.values().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let data: Vec<Signal> = (0..6).map(|_| random_signal(&mut rng, 10)).collect();
        let labels: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
        let m = pairwise_matrix(&data, &labels, &spec).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let (a, b) = (i.min(j), i.max(j));
                let d = if i == j {
                    0.0
                } else {
                    tlp_distance(&data[a], &data[b], &params, &exact()).unwrap()
                };
                assert_eq!(m.get(i, j), d);
            }
        }
        let threaded = pairwise_matrix_with_workers(&data, &labels, &spec, 3).unwrap();
        assert_eq!(threaded.values(), m.values());
        assert!(m.max_triangle_violation() <= 1e-7);

        let sub = m.select(&[4, 1]).unwrap();
        assert_eq!(sub.labels(), &["s4".to_string(), "s1".to_string()]);
        assert_eq!(sub.get(0, 1), m.get(4, 1));
        assert!(m.select(&[6]).is_err());
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let spec =
            DistanceSpec::new(Method::Wtlp, CostParams::finite(2.0, 0.1).unwrap()).with_alpha(0.25);
        let text = serde_json::to_string(&spec).unwrap();
        let back: DistanceSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(
            "pushforward-ot".parse::<Method>().unwrap(),
            Method::PushforwardOt
        );
        assert!("dtw".parse::<Method>().is_err());
    }
}
