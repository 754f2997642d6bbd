//! Primal network simplex for uncapacitated transportation problems.
//!
//! Sources `0..n` ship to sinks `0..m` along an explicit arc list. The
//! spanning tree is rooted at an artificial node joined to every other node by
//! an artificial arc; a leftover flow on those arcs at optimality means the
//! arc set cannot carry the prescribed marginals.

use crate::error::{invalid, Result, TlpError};
use crate::measure::PlanEntry;

const NONE: u32 = u32::MAX;
const UP: i8 = 1;
const DOWN: i8 = -1;
const TREE: u8 = 0;
const LOWER: u8 = 1;

/// Arc-list transportation instance.
pub struct TransportProblem<'a> {
    pub supply: &'a [f64],
    pub demand: &'a [f64],
    pub sources: Vec<u32>,
    pub targets: Vec<u32>,
    pub costs: Vec<f64>,
}

pub struct FlowSolution {
    pub entries: Vec<PlanEntry>,
    pub objective: f64,
    pub pivots: usize,
    /// Dual potentials with `c_ij - u_i - v_j >= 0` on every listed arc.
    pub source_potentials: Vec<f64>,
    pub target_potentials: Vec<f64>,
}

impl<'a> TransportProblem<'a> {
    /// Complete bipartite arc set from a dense row-major cost buffer.
    pub fn dense(supply: &'a [f64], demand: &'a [f64], costs: &[f64]) -> Result<Self> {
        let (n, m) = (supply.len(), demand.len());
        if costs.len() != n * m {
            return invalid("cost buffer does not match the marginals");
        }
        let mut sources = Vec::with_capacity(n * m);
        let mut targets = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                sources.push(i as u32);
                targets.push(j as u32);
            }
        }
        Ok(TransportProblem {
            supply,
            demand,
            sources,
            targets,
            costs: costs.to_vec(),
        })
    }

    pub fn solve(&self) -> Result<FlowSolution> {
        Simplex::new(self)?.run(self)
    }
}

struct Simplex {
    node_num: usize,
    arc_num: usize,
    src: Vec<u32>,
    dst: Vec<u32>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<u8>,
    pi: Vec<f64>,
    parent: Vec<u32>,
    pred: Vec<u32>,
    dir: Vec<i8>,
    depth: Vec<u32>,
    first_child: Vec<u32>,
    next_sib: Vec<u32>,
    prev_sib: Vec<u32>,
    tol: f64,
    block: usize,
    next_arc: usize,
}

impl Simplex {
    fn new(prob: &TransportProblem) -> Result<Self> {
        let (n, m) = (prob.supply.len(), prob.demand.len());
        if n == 0 || m == 0 {
            return invalid("transport problem needs sources and sinks");
        }
        let arc_num = prob.costs.len();
        if prob.sources.len() != arc_num || prob.targets.len() != arc_num {
            return invalid("arc arrays have different lengths");
        }
        for w in prob.supply.iter().chain(prob.demand) {
            if !w.is_finite() || *w < 0.0 {
                return invalid("marginal weights must be finite and non-negative");
            }
        }
        let total_s: f64 = prob.supply.iter().sum();
        let total_d: f64 = prob.demand.iter().sum();
        if (total_s - total_d).abs() > 1e-9 * total_s.max(total_d).max(1.0) {
            return invalid(format!(
                "marginals carry different mass: {total_s} vs {total_d}"
            ));
        }
        let node_num = n + m;
        let mut max_cost: f64 = 0.0;
        for (k, &c) in prob.costs.iter().enumerate() {
            if !c.is_finite() {
                return invalid("arc costs must be finite");
            }
            if prob.sources[k] as usize >= n || prob.targets[k] as usize >= m {
                return invalid("arc endpoint out of range");
            }
            max_cost = max_cost.max(c.abs());
        }
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let all = arc_num + node_num;
        let root = node_num as u32;

        let mut src = Vec::with_capacity(all);
        let mut dst = Vec::with_capacity(all);
        src.extend_from_slice(&prob.sources);
        dst.extend(prob.targets.iter().map(|&t| t + n as u32));
        let mut cost = Vec::with_capacity(all);
        cost.extend_from_slice(&prob.costs);
        let mut flow = vec![0.0; all];
        let mut state = vec![LOWER; all];
        let mut pi = vec![0.0; node_num + 1];
        let mut parent = vec![root; node_num + 1];
        let mut pred = vec![NONE; node_num + 1];
        let mut dir = vec![UP; node_num + 1];
        let mut depth = vec![1u32; node_num + 1];
        let mut first_child = vec![NONE; node_num + 1];
        let mut next_sib = vec![NONE; node_num + 1];
        let mut prev_sib = vec![NONE; node_num + 1];
        parent[node_num] = NONE;
        depth[node_num] = 0;

        for u in 0..node_num {
            let e = arc_num + u;
            state[e] = TREE;
            pred[u] = e as u32;
            if u < n {
                src.push(u as u32);
                dst.push(root);
                cost.push(0.0);
                flow[e] = prob.supply[u];
                dir[u] = UP;
            } else {
                src.push(root);
                dst.push(u as u32);
                cost.push(art_cost);
                flow[e] = prob.demand[u - n];
                dir[u] = DOWN;
                pi[u] = art_cost;
            }
            next_sib[u] = if u + 1 < node_num {
                (u + 1) as u32
            } else {
                NONE
            };
            prev_sib[u] = if u > 0 { (u - 1) as u32 } else { NONE };
        }
        first_child[node_num] = 0;

        let block = ((arc_num as f64).sqrt().ceil() as usize)
            .max(10)
            .min(arc_num.max(1));
        Ok(Simplex {
            node_num,
            arc_num,
            src,
            dst,
            cost,
            flow,
            state,
            pi,
            parent,
            pred,
            dir,
            depth,
            first_child,
            next_sib,
            prev_sib,
            tol: 1e-14 * art_cost,
            block,
            next_arc: 0,
        })
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.src[e] as usize] - self.pi[self.dst[e] as usize]
    }

    /// Block search over the real arcs for a sufficiently negative reduced cost.
    fn find_entering(&mut self) -> Option<usize> {
        let mut min = -self.tol;
        let mut best = None;
        let mut cnt = self.block;
        let m = self.arc_num;
        for k in 0..m {
            let e = (self.next_arc + k) % m;
            if self.state[e] == LOWER {
                let c = self.reduced(e);
                if c < min {
                    min = c;
                    best = Some(e);
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if best.is_some() {
                    self.next_arc = (e + 1) % m;
                    return best;
                }
                cnt = self.block;
            }
        }
        best
    }

    fn find_join(&self, mut u: u32, mut v: u32) -> u32 {
        while u != v {
            let (du, dv) = (self.depth[u as usize], self.depth[v as usize]);
            if du >= dv {
                u = self.parent[u as usize];
            }
            if dv >= du {
                v = self.parent[v as usize];
            }
        }
        u
    }

    fn detach(&mut self, u: u32) {
        let (p, prev, next) = (
            self.parent[u as usize],
            self.prev_sib[u as usize],
            self.next_sib[u as usize],
        );
        if prev != NONE {
            self.next_sib[prev as usize] = next;
        } else {
            self.first_child[p as usize] = next;
        }
        if next != NONE {
            self.prev_sib[next as usize] = prev;
        }
    }

    fn attach(&mut self, u: u32, p: u32) {
        let head = self.first_child[p as usize];
        self.next_sib[u as usize] = head;
        self.prev_sib[u as usize] = NONE;
        if head != NONE {
            self.prev_sib[head as usize] = u;
        }
        self.first_child[p as usize] = u;
        self.parent[u as usize] = p;
    }

    fn pivot(&mut self, in_arc: usize, path: &mut Vec<u32>) -> Result<()> {
        let first = self.src[in_arc];
        let second = self.dst[in_arc];
        let join = self.find_join(first, second);

        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut side = 0;
        let mut u = first;
        while u != join {
            if self.dir[u as usize] == UP {
                let d = self.flow[self.pred[u as usize] as usize];
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                }
            }
            u = self.parent[u as usize];
        }
        u = second;
        while u != join {
            if self.dir[u as usize] == DOWN {
                let d = self.flow[self.pred[u as usize] as usize];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                }
            }
            u = self.parent[u as usize];
        }
        if side == 0 {
            return Err(TlpError::Infeasible(
                "transport problem is unbounded".into(),
            ));
        }

        if delta > 0.0 {
            self.flow[in_arc] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u as usize] as usize;
                self.flow[e] -= self.dir[u as usize] as f64 * delta;
                u = self.parent[u as usize];
            }
            u = second;
            while u != join {
                let e = self.pred[u as usize] as usize;
                self.flow[e] += self.dir[u as usize] as f64 * delta;
                u = self.parent[u as usize];
            }
        }
        let out_arc = self.pred[u_out as usize] as usize;
        self.flow[out_arc] = 0.0;
        self.state[in_arc] = TREE;
        self.state[out_arc] = LOWER;

        let (u_in, v_in) = if side == 1 {
            (first, second)
        } else {
            (second, first)
        };

        // Re-hang the path u_in .. u_out below v_in.
        path.clear();
        let mut w = u_in;
        path.push(w);
        while w != u_out {
            w = self.parent[w as usize];
            path.push(w);
        }
        for &w in path.iter() {
            self.detach(w);
        }
        for i in (0..path.len() - 1).rev() {
            let (child, upper) = (path[i], path[i + 1]);
            self.pred[upper as usize] = self.pred[child as usize];
            self.dir[upper as usize] = -self.dir[child as usize];
            self.attach(upper, child);
        }
        self.attach(u_in, v_in);
        self.pred[u_in as usize] = in_arc as u32;
        let c = self.cost[in_arc];
        let new_pi = if u_in == self.src[in_arc] {
            self.dir[u_in as usize] = UP;
            self.pi[v_in as usize] - c
        } else {
            self.dir[u_in as usize] = DOWN;
            self.pi[v_in as usize] + c
        };
        let sigma = new_pi - self.pi[u_in as usize];

        // Preorder walk of the moved subtree.
        let mut w = u_in;
        loop {
            let p = self.parent[w as usize] as usize;
            self.depth[w as usize] = self.depth[p] + 1;
            self.pi[w as usize] += sigma;
            let fc = self.first_child[w as usize];
            if fc != NONE {
                w = fc;
                continue;
            }
            loop {
                if w == u_in {
                    return Ok(());
                }
                let ns = self.next_sib[w as usize];
                if ns != NONE {
                    w = ns;
                    break;
                }
                w = self.parent[w as usize];
            }
        }
    }

    fn run(mut self, prob: &TransportProblem) -> Result<FlowSolution> {
        let mut pivots = 0usize;
        let mut path = Vec::new();
        while let Some(e) = self.find_entering() {
            self.pivot(e, &mut path)?;
            pivots += 1;
        }
        let total: f64 = prob.supply.iter().sum();
        let residual: f64 = (self.arc_num..self.arc_num + self.node_num)
            .map(|e| self.flow[e])
            .sum();
        if residual > 1e-9 * total.max(1.0) {
            return Err(TlpError::Infeasible(format!(
                "arc set cannot carry the marginals (unrouted mass {residual:.3e})"
            )));
        }
        let mut entries = Vec::with_capacity(self.node_num);
        let mut objective = 0.0;
        for e in 0..self.arc_num {
            let f = self.flow[e];
            if f > 0.0 {
                entries.push(PlanEntry {
                    source: self.src[e] as usize,
                    target: prob.targets[e] as usize,
                    mass: f,
                });
                objective += f * self.cost[e];
            }
        }
        let n = prob.supply.len();
        Ok(FlowSolution {
            entries,
            objective,
            pivots,
            source_potentials: self.pi[..n].iter().map(|p| -p).collect(),
            target_potentials: self.pi[n..self.node_num].to_vec(),
        })
    }
}
