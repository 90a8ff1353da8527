//! Best-first branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::simplex::{solve_standard, LpLimits, LpStatus};
use super::{check_feasibility, SolveOptions, SolveResult, SolveStats, SolveStatus, SolverFailure};
use crate::model::standard::canonicalize_with_bounds;
use crate::model::{Assignment, ModelIR};

struct Node {
    bounds: Vec<(f64, f64)>,
    /// LP value in standard (minimization) sense.
    bound: f64,
    assignment: Assignment,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound (then oldest node) must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Relaxation {
    Solved { bound: f64, assignment: Assignment },
    Infeasible,
    Unbounded,
    Failed(SolverFailure),
}

struct Search<'m> {
    model: &'m ModelIR,
    limits: LpLimits,
    stats: SolveStats,
    seq: usize,
}

impl Search<'_> {
    fn relax(&mut self, bounds: &[(f64, f64)]) -> Relaxation {
        let sf = canonicalize_with_bounds(self.model, bounds);
        let remaining = LpLimits {
            pivot_limit: self.limits.pivot_limit.saturating_sub(self.stats.pivots),
            deadline: self.limits.deadline,
        };
        let (status, pivots) = solve_standard(&sf, &remaining);
        self.stats.pivots += pivots;
        self.stats.nodes += 1;
        match status {
            LpStatus::Optimal { y, value } => Relaxation::Solved {
                bound: value,
                assignment: sf.recover(&y),
            },
            LpStatus::Infeasible => Relaxation::Infeasible,
            LpStatus::Unbounded => Relaxation::Unbounded,
            LpStatus::Failed(f) => Relaxation::Failed(f),
        }
    }

    fn node(&mut self, bounds: Vec<(f64, f64)>, bound: f64, assignment: Assignment) -> Node {
        self.seq += 1;
        Node {
            bounds,
            bound,
            assignment,
            seq: self.seq,
        }
    }
}

/// Most fractional integer variable; ties go to the lexicographically smallest name.
fn branching_variable(model: &ModelIR, assignment: &Assignment, tol: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, var) in model.variables.iter().enumerate() {
        if !var.is_integer() {
            continue;
        }
        let value = assignment[&var.name];
        let frac = (value - value.round()).abs();
        if frac <= tol {
            continue;
        }
        let better = match best {
            None => true,
            Some((bi, _, bf)) => frac > bf || (frac == bf && var.name < model.variables[bi].name),
        };
        if better {
            best = Some((i, value, frac));
        }
    }
    best.map(|(i, v, _)| (i, v))
}

fn finish(model: &ModelIR, mut assignment: Assignment, opts: &SolveOptions, stats: SolveStats) -> SolveResult {
    for var in model.integer_variables() {
        if let Some(v) = assignment.get_mut(&var.name) {
            *v = v.round();
        }
    }
    let objective = model
        .objective_value(&assignment)
        .expect("solver assignment covers every variable");
    match check_feasibility(model, &assignment, opts.feasibility_eps) {
        Ok(v) if v.is_empty() => SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(objective),
            assignment: Some(assignment),
            stats,
        },
        _ => SolveResult::without_solution(SolveStatus::Error(SolverFailure::Numerical), stats),
    }
}

/// Solves a mixed-integer model exactly by branch-and-bound on the most
/// fractional variable, exploring nodes best-bound first.
pub fn solve_milp(model: &ModelIR, opts: &SolveOptions) -> SolveResult {
    let start = Instant::now();
    let mut search = Search {
        model,
        limits: LpLimits {
            pivot_limit: opts.pivot_limit,
            deadline: opts.deadline(start),
        },
        stats: SolveStats::default(),
        seq: 0,
    };
    let done = |search: Search<'_>, status: SolveStatus| {
        let mut stats = search.stats;
        stats.wall_time = start.elapsed();
        SolveResult::without_solution(status, stats)
    };

    let mut root_bounds = Vec::with_capacity(model.variables.len());
    for var in &model.variables {
        let (mut lo, mut hi) = (var.lower, var.upper);
        if var.is_integer() {
            lo = (lo - opts.integrality_tol).ceil();
            hi = (hi + opts.integrality_tol).floor();
        }
        if lo > hi {
            return done(search, SolveStatus::Infeasible);
        }
        root_bounds.push((lo, hi));
    }

    let root = match search.relax(&root_bounds) {
        Relaxation::Solved { bound, assignment } => search.node(root_bounds, bound, assignment),
        Relaxation::Infeasible => return done(search, SolveStatus::Infeasible),
        Relaxation::Unbounded => return done(search, SolveStatus::Unbounded),
        Relaxation::Failed(f) => return done(search, SolveStatus::Error(f)),
    };

    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut incumbent: Option<(f64, Assignment)> = None;
    let prune = |bound: f64, incumbent: &Option<(f64, Assignment)>| match incumbent {
        Some((best, _)) => bound >= best - 1e-9 * best.abs().max(1.0),
        None => false,
    };

    while let Some(node) = heap.pop() {
        if prune(node.bound, &incumbent) {
            break;
        }
        let Some((index, value)) = branching_variable(model, &node.assignment, opts.integrality_tol) else {
            incumbent = Some((node.bound, node.assignment));
            continue;
        };
        let down = {
            let mut b = node.bounds.clone();
            b[index].1 = value.floor();
            b
        };
        let up = {
            let mut b = node.bounds;
            b[index].0 = value.ceil();
            b
        };
        for child in [down, up] {
            if child[index].0 > child[index].1 {
                continue;
            }
            if search.stats.nodes >= opts.node_limit {
                return done(search, SolveStatus::Error(SolverFailure::NodeLimit));
            }
            match search.relax(&child) {
                Relaxation::Solved { bound, assignment } => {
                    if !prune(bound, &incumbent) {
                        let n = search.node(child, bound, assignment);
                        heap.push(n);
                    }
                }
                Relaxation::Infeasible => {}
                Relaxation::Unbounded => return done(search, SolveStatus::Unbounded),
                Relaxation::Failed(f) => return done(search, SolveStatus::Error(f)),
            }
        }
    }

    match incumbent {
        Some((_, assignment)) => {
            let mut stats = search.stats;
            stats.wall_time = start.elapsed();
            finish(model, assignment, opts, stats)
        }
        None => done(search, SolveStatus::Infeasible),
    }
}
