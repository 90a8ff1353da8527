//! Dense two-phase tableau simplex over equality standard form.
//!
//! Entering column: most negative reduced cost for the first
//! [`BLAND_AFTER`] pivots, then Bland's smallest-index rule. Leaving row:
//! minimum ratio, ties broken by the smallest basic column index.

use std::time::Instant;

use super::SolverFailure;
use crate::model::StandardForm;

/// Pivot count after which the entering rule switches to Bland's rule.
pub const BLAND_AFTER: usize = 1_000;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpStatus {
    Optimal { y: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
    Failed(SolverFailure),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LpLimits {
    pub pivot_limit: usize,
    pub deadline: Option<Instant>,
}

struct Tableau {
    /// m rows of `n_total + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced costs; last entry holds minus the current objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    n_real: usize,
    pivots: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cost.len() - 1
    }

    fn pivot(&mut self, r: usize, s: usize) {
        let w = self.width();
        let p = self.rows[r][s];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rows[r][s] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[s];
            if f != 0.0 {
                for j in 0..=w {
                    row[j] -= f * pivot_row[j];
                }
                row[s] = 0.0;
            }
        }
        let f = self.cost[s];
        if f != 0.0 {
            for j in 0..=w {
                self.cost[j] -= f * pivot_row[j];
            }
            self.cost[s] = 0.0;
        }
        self.basis[r] = s;
        self.pivots += 1;
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let w = self.width();
        self.cost = costs.to_vec();
        self.cost.resize(w + 1, 0.0);
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = self.cost[bv];
            if cb != 0.0 {
                for j in 0..=w {
                    self.cost[j] -= cb * self.rows[i][j];
                }
            }
        }
    }

    fn entering(&self, allowed: usize) -> Option<usize> {
        let candidates = (0..allowed).filter(|&j| self.cost[j] < -COST_TOL);
        if self.pivots >= BLAND_AFTER {
            candidates.min()
        } else {
            // first index wins among equal reduced costs
            candidates.fold(None, |best: Option<usize>, j| match best {
                Some(b) if self.cost[b] <= self.cost[j] => Some(b),
                _ => Some(j),
            })
        }
    }

    fn leaving(&self, s: usize) -> Option<usize> {
        let w = self.width();
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if row[s] > PIVOT_TOL {
                let ratio = row[w] / row[s];
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    /// Runs simplex iterations until optimal; `allowed` bounds the entering columns.
    fn optimize(&mut self, allowed: usize, limits: &LpLimits) -> Result<bool, SolverFailure> {
        loop {
            let Some(s) = self.entering(allowed) else {
                return Ok(true);
            };
            let Some(r) = self.leaving(s) else {
                return Ok(false);
            };
            if self.pivots >= limits.pivot_limit {
                return Err(SolverFailure::PivotLimit);
            }
            if limits.deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(SolverFailure::TimeLimit);
            }
            self.pivot(r, s);
        }
    }
}

/// Solves `min c·y s.t. A y = b, y >= 0` (with `b >= 0`). Returns the status
/// and the number of pivots performed.
pub(crate) fn solve_standard(sf: &StandardForm, limits: &LpLimits) -> (LpStatus, usize) {
    let m = sf.num_rows();
    let n = sf.num_cols();
    if m == 0 {
        // only y >= 0: optimum at 0 unless some cost is negative
        if sf.c.iter().any(|&c| c < -COST_TOL) {
            return (LpStatus::Unbounded, 0);
        }
        return (
            LpStatus::Optimal {
                y: vec![0.0; n],
                value: sf.obj_offset,
            },
            0,
        );
    }

    let width = n + m;
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = Vec::with_capacity(width + 1);
            row.extend_from_slice(&sf.a[i]);
            row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            row.push(sf.b[i]);
            row
        })
        .collect();
    let mut t = Tableau {
        rows,
        cost: vec![0.0; width + 1],
        basis: (n..n + m).collect(),
        n_real: n,
        pivots: 0,
    };

    // Phase 1: minimize the sum of artificials.
    let mut phase_one = vec![0.0; width];
    phase_one[n..].iter_mut().for_each(|v| *v = 1.0);
    t.set_costs(&phase_one);
    if let Err(f) = t.optimize(width, limits) {
        return (LpStatus::Failed(f), t.pivots);
    }
    let infeasibility = -t.cost[width];
    let scale = sf.b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    if infeasibility > PHASE_ONE_TOL * scale {
        return (LpStatus::Infeasible, t.pivots);
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= t.n_real {
            match (0..t.n_real).find(|&j| t.rows[i][j].abs() > PIVOT_TOL) {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }

    // Phase 2 over the real columns only.
    t.set_costs(&sf.c);
    match t.optimize(n, limits) {
        Err(f) => (LpStatus::Failed(f), t.pivots),
        Ok(false) => (LpStatus::Unbounded, t.pivots),
        Ok(true) => {
            let mut y = vec![0.0; n];
            for (row, &bv) in t.rows.iter().zip(&t.basis) {
                if bv < n {
                    y[bv] = row[width].max(0.0);
                }
            }
            let value = sf.c.iter().zip(&y).map(|(c, v)| c * v).sum::<f64>() + sf.obj_offset;
            (LpStatus::Optimal { y, value }, t.pivots)
        }
    }
}
