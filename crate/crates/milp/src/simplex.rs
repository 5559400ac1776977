//! Dense two-phase tableau simplex.
//!
//! Variables are shifted to their lower bounds; finite upper bounds become
//! rows. Pivoting uses the most negative reduced cost and falls back to
//! Bland's rule after a run of degenerate pivots, which rules out cycling.

use crate::model::{MilpModel, Sense};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Degenerate pivots in a row before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Meaningful for [`LpStatus::Optimal`] only.
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            x: vec![f64::NAN; n],
            iterations,
        }
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row is the objective
    /// (reduced costs, minimization), the last column the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.a[pr * w + pc];
        for c in 0..w {
            self.a[pr * w + c] /= p;
        }
        let pivot_row: Vec<f64> = self.a[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.a[r * w + pc];
            if f != 0.0 {
                let row = &mut self.a[r * w..(r + 1) * w];
                for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pv;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Minimizes the objective row over columns `< allowed`. Returns the
    /// final status and pivot count.
    fn optimize(&mut self, allowed: usize, max_iter: usize, iterations: &mut usize) -> LpStatus {
        let mut degenerate = 0usize;
        loop {
            if *iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let obj = self.rows;
            let mut enter = None;
            let mut best = -PIVOT_TOL;
            for c in 0..allowed {
                let rc = self.at(obj, c);
                if rc < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(pc) = enter else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let t = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            t < ratio - 1e-12 || (t <= ratio + 1e-12 && self.basis[r] < self.basis[l])
                        }
                    };
                    if better {
                        ratio = t.min(ratio);
                        leave = Some(r);
                    }
                }
            }
            let Some(pr) = leave else {
                return LpStatus::Unbounded;
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc);
            *iterations += 1;
        }
    }
}

/// Solves the continuous relaxation of `model` (binaries on their bounds).
pub fn solve_lp(model: &MilpModel) -> LpSolution {
    solve_lp_with_limit(model, 50_000)
}

pub fn solve_lp_with_limit(model: &MilpModel, max_iter: usize) -> LpSolution {
    let n = model.variables.len();
    for v in &model.variables {
        if v.lower > v.upper + FEAS_TOL {
            return LpSolution::failed(LpStatus::Infeasible, n, 0);
        }
    }

    // Free variables are split into positive and negative parts; all others
    // are shifted by a finite bound (mirrored when only the upper bound is
    // finite).
    enum Map {
        Shift(f64),
        Mirror(f64),
        Split(usize),
    }
    let mut maps = Vec::with_capacity(n);
    let mut cols = n;
    for v in &model.variables {
        if v.lower.is_finite() {
            maps.push(Map::Shift(v.lower));
        } else if v.upper.is_finite() {
            maps.push(Map::Mirror(v.upper));
        } else {
            maps.push(Map::Split(cols));
            cols += 1;
        }
    }

    // Rows in terms of the structural columns.
    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    let push_row = |coefs: &[(usize, f64)], sense: Sense, rhs: f64, rows: &mut Vec<_>| {
        let mut out = Vec::with_capacity(coefs.len() + 1);
        let mut r = rhs;
        for &(v, a) in coefs {
            match maps[v] {
                Map::Shift(l) => {
                    out.push((v, a));
                    r -= a * l;
                }
                Map::Mirror(u) => {
                    out.push((v, -a));
                    r -= a * u;
                }
                Map::Split(neg) => {
                    out.push((v, a));
                    out.push((neg, -a));
                }
            }
        }
        rows.push((out, sense, r));
    };
    for c in &model.constraints {
        push_row(&c.coefs, c.sense, c.rhs, &mut rows);
    }
    for (v, var) in model.variables.iter().enumerate() {
        if var.lower.is_finite() && var.upper.is_finite() {
            push_row(&[(v, 1.0)], Sense::Le, var.upper, &mut rows);
        }
    }

    // Normalize to non-negative right-hand sides.
    for row in &mut rows {
        if row.2 < 0.0 {
            for t in &mut row.0 {
                t.1 = -t.1;
            }
            row.1 = match row.1 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            row.2 = -row.2;
        }
    }

    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let slack0 = cols;
    let art0 = cols + slack_count;
    let total = art0 + art_count;
    let w = total + 1;
    let mut t = Tableau {
        rows: m,
        cols: total,
        a: vec![0.0; (m + 1) * w],
        basis: vec![0; m],
    };
    let (mut s, mut art) = (slack0, art0);
    for (r, (coefs, sense, rhs)) in rows.iter().enumerate() {
        for &(c, a) in coefs {
            t.a[r * w + c] += a;
        }
        t.a[r * w + total] = *rhs;
        match sense {
            Sense::Le => {
                t.a[r * w + s] = 1.0;
                t.basis[r] = s;
                s += 1;
            }
            Sense::Ge => {
                t.a[r * w + s] = -1.0;
                s += 1;
                t.a[r * w + art] = 1.0;
                t.basis[r] = art;
                art += 1;
            }
            Sense::Eq => {
                t.a[r * w + art] = 1.0;
                t.basis[r] = art;
                art += 1;
            }
        }
    }

    let mut iterations = 0;
    // Phase 1: minimize the sum of artificials.
    if art_count > 0 {
        for r in 0..m {
            if t.basis[r] >= art0 {
                for c in 0..w {
                    t.a[m * w + c] -= t.a[r * w + c];
                }
            }
        }
        for c in art0..total {
            t.a[m * w + c] = 0.0;
        }
        match t.optimize(art0, max_iter, &mut iterations) {
            LpStatus::Optimal => {}
            LpStatus::IterationLimit => return LpSolution::failed(LpStatus::IterationLimit, n, iterations),
            _ => return LpSolution::failed(LpStatus::Infeasible, n, iterations),
        }
        let infeasibility = -t.at(m, total);
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return LpSolution::failed(LpStatus::Infeasible, n, iterations);
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= art0 {
                if let Some(c) = (0..art0).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    t.pivot(r, c);
                }
            }
        }
    }

    // Phase 2: minimize −objective over non-artificial columns. Artificials
    // stuck in the basis sit on redundant rows at zero.
    for c in 0..w {
        t.a[m * w + c] = 0.0;
    }
    for &(v, a) in &model.objective {
        match maps[v] {
            Map::Shift(_) => t.a[m * w + v] -= a,
            Map::Mirror(_) => t.a[m * w + v] += a,
            Map::Split(neg) => {
                t.a[m * w + v] -= a;
                t.a[m * w + neg] += a;
            }
        }
    }
    for r in 0..m {
        let b = t.basis[r];
        let f = t.a[m * w + b];
        if f != 0.0 {
            for c in 0..w {
                t.a[m * w + c] -= f * t.a[r * w + c];
            }
        }
    }
    for r in 0..m {
        if t.basis[r] >= art0 {
            // keep the redundant row's artificial out of any pivot
            for c in art0..total {
                t.a[r * w + c] = if c == t.basis[r] { 1.0 } else { 0.0 };
            }
        }
    }
    match t.optimize(art0, max_iter, &mut iterations) {
        LpStatus::Optimal => {}
        status => return LpSolution::failed(status, n, iterations),
    }

    let mut y = vec![0.0; total];
    for r in 0..m {
        y[t.basis[r]] = t.rhs(r);
    }
    let x: Vec<f64> = (0..n)
        .map(|v| match maps[v] {
            Map::Shift(l) => l + y[v],
            Map::Mirror(u) => u - y[v],
            Map::Split(neg) => y[v] - y[neg],
        })
        .collect();
    LpSolution {
        status: LpStatus::Optimal,
        objective: model.objective_value(&x),
        x,
        iterations,
    }
}
