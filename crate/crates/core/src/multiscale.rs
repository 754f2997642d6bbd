//! Coarse-to-fine linear programming on regular grids.
//!
//! Each level halves the grid spacing. The transport problem at a level is
//! restricted to the children of the pairs supporting the previous plan,
//! together with their axis-adjacent neighbours on either side. The
//! restricted solution is then re-solved around its own support and priced
//! against the full product using the dual potentials.

use serde::{Deserialize, Serialize};

use crate::cost::{check_compatible, pth_power_dist, tlp_entry, CostMatrix, CostParams};
use crate::error::{invalid, Result, TlpError};
use crate::exact::{solve_lp, ExactSolution};
use crate::measure::{DiscreteMeasure, Points, Signal, TransportPlan};
use crate::network_simplex::TransportProblem;

const PRICE_PER_ROW: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleParams {
    /// Number of levels; `None` picks the count whose coarsest grid has at
    /// most `max_coarse_cells` cells.
    pub levels: Option<usize>,
    pub max_coarse_cells: usize,
    /// Also solve the unrestricted problem and report agreement.
    pub verify_full: bool,
    /// Re-solves per level on the active set widened around the latest
    /// support, stopping early once the objective stalls.
    pub max_local_rounds: usize,
    /// Pricing rounds per level; `0` keeps the restricted solution as is.
    pub max_price_rounds: usize,
}

impl Default for MultiscaleParams {
    fn default() -> Self {
        MultiscaleParams {
            levels: None,
            max_coarse_cells: 64,
            verify_full: false,
            max_local_rounds: 8,
            max_price_rounds: 16,
        }
    }
}

/// Sorted, duplicate-free set of `(source, target)` index pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActiveSet {
    pairs: Vec<(u32, u32)>,
}

impl ActiveSet {
    pub fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        ActiveSet { pairs }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i as u32, j as u32)).is_ok()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub source_shape: Vec<usize>,
    pub target_shape: Vec<usize>,
    /// Grid spacing along the first source axis.
    pub h: f64,
    pub active_set_size: usize,
    /// Objective of the first restricted solve on the projected active set.
    pub initial_objective: f64,
    pub objective: f64,
    /// Whether the feasibility rescue ring was added.
    pub expanded: bool,
    pub local_rounds: usize,
    /// Column-generation rounds on pairs with negative reduced cost.
    pub price_rounds: usize,
    /// No pair of the full product has negative reduced cost.
    pub certified: bool,
}

#[derive(Clone, Debug)]
pub struct MultiscaleSolution {
    pub solution: ExactSolution,
    pub levels: Vec<LevelReport>,
    pub active_set: ActiveSet,
    /// Objective of the unrestricted problem when verification was requested.
    pub full_objective: Option<f64>,
}

impl MultiscaleSolution {
    /// Final active-set size over the number of all pairs.
    pub fn active_fraction(&self) -> f64 {
        let p = &self.solution.plan;
        self.active_set.len() as f64 / (p.source_size() * p.target_size()) as f64
    }

    pub fn agrees_with_full(&self, rel_tol: f64) -> Option<bool> {
        self.full_objective.map(|full| {
            (self.solution.objective - full).abs() <= rel_tol * full.abs().max(f64::MIN_POSITIVE)
        })
    }
}

fn grid_of(signal: &Signal) -> Result<&[usize]> {
    signal.grid().ok_or_else(|| {
        TlpError::InvalidArgument("multiscale transport needs signals on a regular grid".into())
    })
}

fn unravel(mut idx: usize, shape: &[usize], out: &mut [usize]) {
    for (a, &s) in shape.iter().enumerate() {
        out[a] = idx % s;
        idx /= s;
    }
}

fn ravel(multi: &[usize], shape: &[usize]) -> usize {
    let mut idx = 0;
    for a in (0..shape.len()).rev() {
        idx = idx * shape[a] + multi[a];
    }
    idx
}

/// Aggregates blocks of `factor^d` cells: weights add up, values are
/// mass-weighted averages.
pub fn coarsen_by(signal: &Signal, factor: usize) -> Result<Signal> {
    let shape = grid_of(signal)?.to_vec();
    if factor == 0 || shape.iter().any(|&s| s % factor != 0) {
        return invalid(format!(
            "grid {shape:?} is not divisible into blocks of {factor}"
        ));
    }
    if factor == 1 {
        return Ok(signal.clone());
    }
    let coarse: Vec<usize> = shape.iter().map(|s| s / factor).collect();
    let nc: usize = coarse.iter().product();
    let m = signal.channels();
    let d = shape.len();
    let mut weight = vec![0.0; nc];
    let mut wsum = vec![0.0; nc * m];
    let mut plain = vec![0.0; nc * m];
    let mut count = vec![0usize; nc];
    let mut multi = vec![0usize; d];
    let w = signal.measure().weights();
    for i in 0..signal.len() {
        unravel(i, &shape, &mut multi);
        multi.iter_mut().for_each(|k| *k /= factor);
        let c = ravel(&multi, &coarse);
        weight[c] += w[i];
        count[c] += 1;
        for (k, v) in signal.value(i).iter().enumerate() {
            wsum[c * m + k] += w[i] * v;
            plain[c * m + k] += v;
        }
    }
    let mut values = vec![0.0; nc * m];
    for c in 0..nc {
        for k in 0..m {
            values[c * m + k] = if weight[c] > 0.0 {
                wsum[c * m + k] / weight[c]
            } else {
                plain[c * m + k] / count[c] as f64
            };
        }
    }
    let total: f64 = weight.iter().sum();
    weight.iter_mut().for_each(|x| *x /= total);
    let grid = crate::measure::grid_measure(&coarse)?;
    let measure = DiscreteMeasure::new(Points::new(d, grid.points().coords().to_vec())?, weight)?;
    Signal::new(measure, m, values)?.with_grid(coarse)
}

/// Coarsens to cells of spacing `h` (`1/h` cells per axis).
pub fn coarsen(signal: &Signal, h: f64) -> Result<Signal> {
    let shape = grid_of(signal)?;
    if !(h > 0.0 && h <= 1.0) {
        return invalid(format!("spacing {h} must lie in (0, 1]"));
    }
    let cells = (1.0 / h).round() as usize;
    if ((1.0 / h) - cells as f64).abs() > 1e-9 || shape.iter().any(|&s| s % cells != 0) {
        return invalid(format!("spacing {h} does not tile the grid {shape:?}"));
    }
    let factor = shape[0] / cells;
    if shape.iter().any(|&s| s / factor != cells) {
        return invalid("spacing must tile every axis identically");
    }
    coarsen_by(signal, factor)
}

fn neighbours(idx: usize, shape: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let mut multi = vec![0usize; shape.len()];
    unravel(idx, shape, &mut multi);
    for a in 0..shape.len() {
        if multi[a] > 0 {
            multi[a] -= 1;
            out.push(ravel(&multi, shape));
            multi[a] += 1;
        }
        if multi[a] + 1 < shape[a] {
            multi[a] += 1;
            out.push(ravel(&multi, shape));
            multi[a] -= 1;
        }
    }
}

fn children(idx: usize, coarse: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let d = coarse.len();
    let fine: Vec<usize> = coarse.iter().map(|s| 2 * s).collect();
    let mut base = vec![0usize; d];
    unravel(idx, coarse, &mut base);
    let mut multi = vec![0usize; d];
    for bits in 0..(1usize << d) {
        for a in 0..d {
            multi[a] = 2 * base[a] + ((bits >> a) & 1);
        }
        out.push(ravel(&multi, &fine));
    }
}

/// Fine-level pairs implied by a coarse plan.
///
/// The coarse support is widened by single-side axis moves, then every
/// coarse pair is replaced by the product of its children.
pub fn refine_active_set(
    plan: &TransportPlan,
    coarse_source: &[usize],
    coarse_target: &[usize],
) -> Result<ActiveSet> {
    let ns: usize = coarse_source.iter().product();
    let nt: usize = coarse_target.iter().product();
    if plan.source_size() != ns || plan.target_size() != nt {
        return invalid("plan does not match the coarse grid shapes");
    }
    let mut coarse_pairs = Vec::with_capacity(plan.entries().len() * 9);
    let mut nb = Vec::new();
    for e in plan.entries() {
        coarse_pairs.push((e.source as u32, e.target as u32));
        neighbours(e.source, coarse_source, &mut nb);
        coarse_pairs.extend(nb.iter().map(|&i| (i as u32, e.target as u32)));
        neighbours(e.target, coarse_target, &mut nb);
        coarse_pairs.extend(nb.iter().map(|&j| (e.source as u32, j as u32)));
    }
    let coarse = ActiveSet::from_pairs(coarse_pairs);
    let (mut ci, mut cj) = (Vec::new(), Vec::new());
    let block = 1usize << (coarse_source.len() + coarse_target.len());
    let mut fine = Vec::with_capacity(coarse.len() * block);
    for &(i, j) in coarse.pairs() {
        children(i as usize, coarse_source, &mut ci);
        children(j as usize, coarse_target, &mut cj);
        for &a in &ci {
            for &b in &cj {
                fine.push((a as u32, b as u32));
            }
        }
    }
    Ok(ActiveSet::from_pairs(fine))
}

/// Adds one ring of single-side axis moves around every pair.
fn expand(set: &ActiveSet, source: &[usize], target: &[usize]) -> ActiveSet {
    let mut pairs = set.pairs().to_vec();
    let mut nb = Vec::new();
    for &(i, j) in set.pairs() {
        neighbours(i as usize, source, &mut nb);
        pairs.extend(nb.iter().map(|&a| (a as u32, j)));
        neighbours(j as usize, target, &mut nb);
        pairs.extend(nb.iter().map(|&b| (i, b as u32)));
    }
    ActiveSet::from_pairs(pairs)
}

struct Restricted {
    solution: ExactSolution,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn solve_restricted(
    f: &Signal,
    g: &Signal,
    set: &ActiveSet,
    cost: &dyn Fn(&Signal, usize, &Signal, usize) -> f64,
) -> Result<Restricted> {
    let (sources, targets): (Vec<u32>, Vec<u32>) = set.pairs().iter().copied().unzip();
    let costs = set
        .pairs()
        .iter()
        .map(|&(i, j)| cost(f, i as usize, g, j as usize))
        .collect();
    let sol = TransportProblem {
        supply: f.measure().weights(),
        demand: g.measure().weights(),
        sources,
        targets,
        costs,
    }
    .solve()?;
    Ok(Restricted {
        solution: ExactSolution {
            plan: TransportPlan::new(f.len(), g.len(), sol.entries)?,
            objective: sol.objective,
        },
        u: sol.source_potentials,
        v: sol.target_potentials,
    })
}

/// Pairs outside the active set whose reduced cost `c_ij - u_i - v_j` is
/// negative, at most `per_row` of the most negative per source.
fn violated_pairs(
    f: &Signal,
    g: &Signal,
    active: &ActiveSet,
    duals: &Restricted,
    cost: &dyn Fn(&Signal, usize, &Signal, usize) -> f64,
    per_row: usize,
) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut row = Vec::new();
    for i in 0..f.len() {
        row.clear();
        let ui = duals.u[i];
        for (j, &vj) in duals.v.iter().enumerate() {
            let c = cost(f, i, g, j);
            let r = c - ui - vj;
            if r < -1e-10 * (1.0 + c.abs()) && !active.contains(i, j) {
                row.push((r, j));
            }
        }
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.extend(row.iter().take(per_row).map(|&(_, j)| (i as u32, j as u32)));
    }
    out
}

fn union(a: &ActiveSet, extra: &[(u32, u32)]) -> ActiveSet {
    ActiveSet::from_pairs(a.pairs().iter().chain(extra).copied().collect())
}

fn default_levels(fs: &[usize], gs: &[usize], max_cells: usize) -> usize {
    let mut levels = 1;
    loop {
        let cells = |s: &[usize]| s.iter().map(|x| x >> (levels - 1)).product::<usize>();
        if cells(fs).max(cells(gs)) <= max_cells {
            return levels;
        }
        let next = 1usize << levels;
        if fs.iter().chain(gs).any(|&s| s % next != 0) {
            return levels;
        }
        levels += 1;
    }
}

/// Coarse-to-fine transport under an arbitrary pair cost.
pub fn multiscale_transport(
    f: &Signal,
    g: &Signal,
    cost: &dyn Fn(&Signal, usize, &Signal, usize) -> f64,
    params: &MultiscaleParams,
) -> Result<MultiscaleSolution> {
    let (fs, gs) = (grid_of(f)?.to_vec(), grid_of(g)?.to_vec());
    if fs.len() != gs.len() {
        return invalid("grids have different dimensions");
    }
    let levels = match params.levels {
        Some(0) => return invalid("at least one level is required"),
        Some(n) => n,
        None => default_levels(&fs, &gs, params.max_coarse_cells.max(1)),
    };
    let top = 1usize << (levels - 1);
    if fs.iter().chain(&gs).any(|&s| s % top != 0) {
        return invalid(format!(
            "{levels} levels need grid extents divisible by {top}, got {fs:?} and {gs:?}"
        ));
    }
    let mut pyramid = Vec::with_capacity(levels);
    for r in 0..levels {
        let factor = 1usize << (levels - 1 - r);
        pyramid.push((coarsen_by(f, factor)?, coarsen_by(g, factor)?));
    }

    let mut reports = Vec::with_capacity(levels);
    let (f0, g0) = &pyramid[0];
    let dense = CostMatrix::from_fn(f0.len(), g0.len(), |i, j| cost(f0, i, g0, j))?;
    let mut current = solve_lp(&dense, f0.measure().weights(), g0.measure().weights())?;
    let mut active = ActiveSet::from_pairs(
        (0..f0.len() as u32)
            .flat_map(|i| (0..g0.len() as u32).map(move |j| (i, j)))
            .collect(),
    );
    reports.push(LevelReport {
        level: 0,
        source_shape: f0.grid().unwrap().to_vec(),
        target_shape: g0.grid().unwrap().to_vec(),
        h: 1.0 / f0.grid().unwrap()[0] as f64,
        active_set_size: active.len(),
        initial_objective: current.objective,
        objective: current.objective,
        expanded: false,
        local_rounds: 0,
        price_rounds: 0,
        certified: true,
    });

    for r in 1..levels {
        let (prev_f, prev_g) = &pyramid[r - 1];
        let (fl, gl) = &pyramid[r];
        let (ps, pt) = (prev_f.grid().unwrap(), prev_g.grid().unwrap());
        let (ls, lt) = (fl.grid().unwrap(), gl.grid().unwrap());
        active = refine_active_set(&current.plan, ps, pt)?;
        let mut expanded = false;
        let mut step = match solve_restricted(fl, gl, &active, cost) {
            Ok(sol) => sol,
            Err(TlpError::Infeasible(_)) => {
                log::info!("level {r}: restricted problem infeasible, widening the active set");
                expanded = true;
                active = expand(&active, ls, lt);
                solve_restricted(fl, gl, &active, cost)?
            }
            Err(e) => return Err(e),
        };
        let initial_objective = step.solution.objective;
        let mut rounds = 0;
        while rounds < params.max_local_rounds {
            let support: Vec<(u32, u32)> = step
                .solution
                .plan
                .entries()
                .iter()
                .map(|e| (e.source as u32, e.target as u32))
                .collect();
            let ring = expand(&ActiveSet::from_pairs(support), ls, lt);
            let before = active.len();
            active = union(&active, ring.pairs());
            if active.len() == before {
                break;
            }
            let next = solve_restricted(fl, gl, &active, cost)?;
            rounds += 1;
            let gain = step.solution.objective - next.solution.objective;
            step = next;
            if gain <= 1e-12 * step.solution.objective.abs() {
                break;
            }
        }
        let mut price_rounds = 0;
        let mut certified = false;
        while price_rounds < params.max_price_rounds {
            let add = violated_pairs(fl, gl, &active, &step, cost, PRICE_PER_ROW);
            if add.is_empty() {
                certified = true;
                break;
            }
            active = union(&active, &add);
            step = solve_restricted(fl, gl, &active, cost)?;
            price_rounds += 1;
        }
        current = step.solution;
        reports.push(LevelReport {
            level: r,
            source_shape: ls.to_vec(),
            target_shape: lt.to_vec(),
            h: 1.0 / ls[0] as f64,
            active_set_size: active.len(),
            initial_objective,
            objective: current.objective,
            expanded,
            local_rounds: rounds,
            price_rounds,
            certified,
        });
    }

    let full_objective = if params.verify_full {
        let dense = CostMatrix::from_fn(f.len(), g.len(), |i, j| cost(f, i, g, j))?;
        let full = solve_lp(&dense, f.measure().weights(), g.measure().weights())?.objective;
        let rel = (current.objective - full).abs() / full.abs().max(f64::MIN_POSITIVE);
        if rel > 1e-6 {
            log::warn!(
                "multiscale objective {} differs from the full optimum {full} (relative {rel:.2e})",
                current.objective
            );
        }
        Some(full)
    } else {
        None
    };
    Ok(MultiscaleSolution {
        solution: current,
        levels: reports,
        active_set: active,
        full_objective,
    })
}

/// Coarse-to-fine TL^p transport between two gridded signals.
pub fn multiscale_solve(
    f: &Signal,
    g: &Signal,
    params: &CostParams,
    ms: &MultiscaleParams,
) -> Result<MultiscaleSolution> {
    check_compatible(f, g)?;
    let inv = 1.0 / params.finite_lambda()?;
    let p = params.p;
    let cost = move |a: &Signal, i: usize, b: &Signal, j: usize| {
        tlp_entry(
            a.measure().points().point(i),
            a.value(i),
            b.measure().points().point(j),
            b.value(j),
            p,
            inv,
        )
    };
    multiscale_transport(f, g, &cost, ms)
}

/// Coarse-to-fine transport between the measures of two gridded signals
/// under the ground cost `|x - y|_p^p`; signal values are ignored.
pub fn multiscale_ground(
    f: &Signal,
    g: &Signal,
    p: f64,
    ms: &MultiscaleParams,
) -> Result<MultiscaleSolution> {
    let cost = move |a: &Signal, i: usize, b: &Signal, j: usize| {
        pth_power_dist(
            a.measure().points().point(i),
            b.measure().points().point(j),
            p,
        )
    };
    multiscale_transport(f, g, &cost, ms)
}
