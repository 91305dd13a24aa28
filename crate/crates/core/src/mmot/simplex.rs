//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Maximizes `c·x` subject to equality and `≤` rows with nonnegative right-hand
//! sides and `x ≥ 0`. Deterministic: the pivot sequence depends only on the input.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowKind {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
pub(crate) struct Row<T> {
    pub coefs: Vec<(usize, T)>,
    pub kind: RowKind,
    pub rhs: T,
}

#[derive(Debug, Clone)]
pub(crate) struct LinearProgram<T> {
    pub n_vars: usize,
    pub objective: Vec<T>,
    pub rows: Vec<Row<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SimplexStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome<T> {
    pub status: SimplexStatus,
    pub x: Vec<T>,
    /// One multiplier per input row (zero for rows found redundant).
    pub duals: Vec<T>,
    pub pivots: usize,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    /// Reduced profits `c_j − c_B B⁻¹ A_j`; the last entry holds minus the objective value.
    obj: Vec<T>,
    basis: Vec<usize>,
    /// Input row index for every tableau row (rows can be dropped as redundant).
    origin: Vec<usize>,
    n_cols: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, q: usize) {
        let width = self.n_cols + 1;
        let p = self.rows[r][q];
        {
            let row = &mut self.rows[r];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = T::one();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[q];
            if f != T::zero() {
                for j in 0..width {
                    let v = pivot_row[j];
                    if v != T::zero() {
                        row[j] -= f * v;
                    }
                }
                row[q] = T::zero();
            }
        }
        let f = self.obj[q];
        if f != T::zero() {
            for j in 0..width {
                let v = pivot_row[j];
                if v != T::zero() {
                    self.obj[j] -= f * v;
                }
            }
            self.obj[q] = T::zero();
        }
        self.basis[r] = q;
    }

    fn set_objective(&mut self, costs: &[T]) {
        let width = self.n_cols + 1;
        let mut obj = vec![T::zero(); width];
        obj[..self.n_cols].copy_from_slice(&costs[..self.n_cols]);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = costs[self.basis[i]];
            if cb != T::zero() {
                for j in 0..width {
                    obj[j] -= cb * row[j];
                }
            }
        }
        self.obj = obj;
    }

    /// Runs Bland's rule until optimal or the pivot budget is spent.
    fn run(&mut self, allowed: &[bool], tol: T, budget: &mut usize, pivots: &mut usize) -> bool {
        loop {
            let entering = (0..self.n_cols).find(|&j| allowed[j] && self.obj[j] > tol);
            let Some(q) = entering else {
                return true;
            };
            let rhs = self.n_cols;
            let mut best: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[q];
                if a > tol {
                    let ratio = row[rhs].max(T::zero()) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br || (ratio == br && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                // unbounded direction; cannot occur on bounded transport polytopes
                return true;
            };
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            *pivots += 1;
            self.pivot(r, q);
        }
    }
}

pub(crate) fn solve<T: Scalar>(
    lp: &LinearProgram<T>,
    max_pivots: usize,
    pivot_tol: T,
) -> SimplexOutcome<T> {
    let n = lp.n_vars;
    let m = lp.rows.len();
    let n_slack = lp.rows.iter().filter(|r| r.kind == RowKind::Le).count();
    let n_art = lp.rows.iter().filter(|r| r.kind == RowKind::Eq).count();
    let n_cols = n + n_slack + n_art;
    let width = n_cols + 1;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut aux_col = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, n + n_slack);
    for row in &lp.rows {
        let mut dense = vec![T::zero(); width];
        for &(j, c) in &row.coefs {
            dense[j] += c;
        }
        dense[n_cols] = row.rhs;
        let col = match row.kind {
            RowKind::Le => {
                next_slack += 1;
                next_slack - 1
            }
            RowKind::Eq => {
                next_art += 1;
                next_art - 1
            }
        };
        dense[col] = T::one();
        rows.push(dense);
        basis.push(col);
        aux_col.push(col);
    }
    let mut tab = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        origin: (0..m).collect(),
        n_cols,
    };
    let is_art = |j: usize| j >= n + n_slack;
    let mut budget = max_pivots;
    let mut pivots = 0usize;

    // phase 1: maximize −Σ artificials
    if n_art > 0 {
        let costs: Vec<T> = (0..n_cols)
            .map(|j| if is_art(j) { -T::one() } else { T::zero() })
            .collect();
        tab.set_objective(&costs);
        let allowed = vec![true; n_cols];
        if !tab.run(&allowed, pivot_tol, &mut budget, &mut pivots) {
            return SimplexOutcome {
                status: SimplexStatus::IterationLimit,
                x: Vec::new(),
                duals: vec![T::zero(); m],
                pivots,
            };
        }
        let scale = lp
            .rows
            .iter()
            .map(|r| r.rhs.abs())
            .fold(T::one(), |a, b| a.max(b));
        if -tab.obj[n_cols] < -T::tol(1e-9) * scale {
            return SimplexOutcome {
                status: SimplexStatus::Infeasible,
                x: Vec::new(),
                duals: vec![T::zero(); m],
                pivots,
            };
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut i = 0;
        while i < tab.rows.len() {
            if is_art(tab.basis[i]) {
                let q = (0..n + n_slack).find(|&j| tab.rows[i][j].abs() > pivot_tol);
                match q {
                    Some(q) => {
                        tab.pivot(i, q);
                        pivots += 1;
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        tab.origin.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    // phase 2
    let mut costs = vec![T::zero(); n_cols];
    costs[..n].copy_from_slice(&lp.objective);
    tab.set_objective(&costs);
    let allowed: Vec<bool> = (0..n_cols).map(|j| !is_art(j)).collect();
    let finished = tab.run(&allowed, pivot_tol, &mut budget, &mut pivots);

    let mut x = vec![T::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rows[i][n_cols].max(T::zero());
        }
    }
    // y_i = −(reduced profit of row i's unit column); valid while the row survives
    let mut duals = vec![T::zero(); m];
    let kept: Vec<bool> = {
        let mut k = vec![false; m];
        for &o in &tab.origin {
            k[o] = true;
        }
        k
    };
    for i in 0..m {
        if kept[i] {
            duals[i] = -tab.obj[aux_col[i]];
        }
    }
    SimplexOutcome {
        status: if finished {
            SimplexStatus::Optimal
        } else {
            SimplexStatus::IterationLimit
        },
        x,
        duals,
        pivots,
    }
}
