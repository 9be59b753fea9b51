//! Dense two-phase primal simplex for small linear programs
//!
//! Solves `min cᵀx  s.t.  A x <= b, x >= 0` with `b` of any sign. Pricing is
//! Dantzig's largest-coefficient rule; after a run of degenerate pivots the
//! solver switches to Bland's smallest-index rule, which cannot cycle, and
//! returns to Dantzig pricing on the next non-degenerate step.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::linalg::inverse;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-8;
const DEGENERATE_RUN: usize = 20;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex pivot limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Array1<f64>,
    pub objective: f64,
    pub pivots: usize,
}

/// `min cᵀx` subject to `A x <= b`, `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: Array1<f64>,
    pub a: Array2<f64>,
    pub b: Array1<f64>,
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Array2<f64>,
    /// Reduced-cost row, length `cols + 1` (last entry is `-objective`).
    cost: Array1<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.t.ncols();
        let piv = self.t[[row, col]];
        for j in 0..width {
            self.t[[row, j]] /= piv;
        }
        let pivot_row = self.t.row(row).to_owned();
        for r in 0..self.t.nrows() {
            if r == row {
                continue;
            }
            let f = self.t[[r, col]];
            if f != 0.0 {
                for j in 0..width {
                    self.t[[r, j]] -= f * pivot_row[j];
                }
                self.t[[r, col]] = 0.0;
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for j in 0..width {
                self.cost[j] -= f * pivot_row[j];
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs simplex iterations over the columns allowed by `eligible`.
    fn optimise(&mut self, eligible: &dyn Fn(usize) -> bool) -> Result<(), LpError> {
        let cols = self.cols();
        let rhs = cols;
        let mut degenerate = 0usize;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit);
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering = None;
            let mut best = -COST_TOL;
            for j in 0..cols {
                if !eligible(j) {
                    continue;
                }
                let rc = self.cost[j];
                if rc < -COST_TOL {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        entering = Some(j);
                    }
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            // ratio test, ties to the smallest basic index
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.nrows() {
                let a = self.t[[r, col]];
                if a > PIVOT_TOL {
                    let ratio = self.t[[r, rhs]].max(0.0) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if (!tie && ratio < lratio) || (tie && self.basis[r] < self.basis[lr]) {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
        }
    }
}

impl LinearProgram {
    pub fn new(c: Array1<f64>, a: Array2<f64>, b: Array1<f64>) -> Self {
        assert_eq!(a.nrows(), b.len(), "row count mismatch");
        assert_eq!(a.ncols(), c.len(), "column count mismatch");
        Self { c, a, b }
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let (m, n) = self.a.dim();
        let negative: Vec<usize> = (0..m).filter(|&i| self.b[i] < 0.0).collect();
        let n_art = negative.len();
        let cols = n + m + n_art;
        let mut t = Array2::<f64>::zeros((m, cols + 1));
        let mut basis = vec![0usize; m];
        let mut art_of_row = vec![None; m];
        for (k, &i) in negative.iter().enumerate() {
            art_of_row[i] = Some(n + m + k);
        }
        for i in 0..m {
            let sign = if self.b[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                t[[i, j]] = sign * self.a[[i, j]];
            }
            t[[i, n + i]] = sign;
            t[[i, cols]] = sign * self.b[i];
            match art_of_row[i] {
                Some(col) => {
                    t[[i, col]] = 1.0;
                    basis[i] = col;
                }
                None => basis[i] = n + i,
            }
        }

        let mut tab = Tableau {
            t,
            cost: Array1::zeros(cols + 1),
            basis,
            pivots: 0,
        };

        if n_art > 0 {
            // phase one: minimise the sum of artificials
            for &i in &negative {
                for j in 0..=cols {
                    tab.cost[j] -= tab.t[[i, j]];
                }
            }
            for col in n + m..cols {
                tab.cost[col] = 0.0;
            }
            tab.optimise(&|_| true)?;
            if -tab.cost[cols] > PHASE_ONE_TOL * (1.0 + self.b.iter().map(|v| v.abs()).sum::<f64>()) {
                return Err(LpError::Infeasible);
            }
            // drive remaining artificials out of the basis
            for r in 0..m {
                if tab.basis[r] >= n + m {
                    let replacement = (0..n + m)
                        .filter(|&j| !tab.basis.contains(&j))
                        .max_by(|&a, &b| tab.t[[r, a]].abs().total_cmp(&tab.t[[r, b]].abs()));
                    if let Some(j) = replacement {
                        if tab.t[[r, j]].abs() > PIVOT_TOL {
                            tab.pivot(r, j);
                        }
                    }
                }
            }
        }

        // phase two
        tab.cost.fill(0.0);
        for j in 0..n {
            tab.cost[j] = self.c[j];
        }
        for r in 0..m {
            let bc = tab.basis[r];
            let f = if bc < n { self.c[bc] } else { 0.0 };
            if f != 0.0 {
                for j in 0..=cols {
                    tab.cost[j] -= f * tab.t[[r, j]];
                }
            }
        }
        let limit = n + m;
        tab.optimise(&|j| j < limit)?;

        let x = self.recover_primal(&tab, n, m);
        let objective = self.c.dot(&x);
        Ok(LpSolution {
            x,
            objective,
            pivots: tab.pivots,
        })
    }

    /// Re-solves the final basis against the original data, which removes the
    /// rounding accumulated over the pivots.
    fn recover_primal(&self, tab: &Tableau, n: usize, m: usize) -> Array1<f64> {
        let cols = tab.cols();
        let mut fallback = Array1::zeros(n);
        for r in 0..m {
            let bc = tab.basis[r];
            if bc < n {
                fallback[bc] = tab.t[[r, cols]].max(0.0);
            }
        }
        // basis columns expressed in the original (unsigned) system A x + s = b
        let mut basis_mat = Array2::<f64>::zeros((m, m));
        for (k, &bc) in tab.basis.iter().enumerate() {
            if bc < n {
                basis_mat.column_mut(k).assign(&self.a.column(bc));
            } else if bc < n + m {
                basis_mat[[bc - n, k]] = 1.0;
            } else {
                return fallback;
            }
        }
        let Some(inv) = inverse(basis_mat.view()) else {
            return fallback;
        };
        let xb = inv.dot(&self.b);
        let mut x = Array1::zeros(n);
        for (k, &bc) in tab.basis.iter().enumerate() {
            if bc < n {
                x[bc] = xb[k].max(0.0);
            }
        }
        // keep the refined point only if it is at least as feasible
        let viol = |v: &Array1<f64>| -> f64 {
            (self.a.dot(v) - &self.b)
                .iter()
                .fold(0.0f64, |acc, r| acc.max(*r))
        };
        if viol(&x) <= viol(&fallback).max(1e-12) {
            x
        } else {
            fallback
        }
    }
}

/// `min |m|₁  s.t.  |(A m - target)_i| <= bound_i` for every row `i`, through
/// the split `m = u - v` with `u, v >= 0`.
pub fn l1_min_box(
    a: ArrayView2<f64>,
    target: ArrayView1<f64>,
    bound: ArrayView1<f64>,
) -> Result<Array1<f64>, LpError> {
    let (rows, k) = a.dim();
    let mut lp_a = Array2::<f64>::zeros((2 * rows, 2 * k));
    let mut lp_b = Array1::<f64>::zeros(2 * rows);
    for i in 0..rows {
        for j in 0..k {
            let v = a[[i, j]];
            lp_a[[i, j]] = v;
            lp_a[[i, k + j]] = -v;
            lp_a[[rows + i, j]] = -v;
            lp_a[[rows + i, k + j]] = v;
        }
        lp_b[i] = bound[i] + target[i];
        lp_b[rows + i] = bound[i] - target[i];
    }
    let lp = LinearProgram::new(Array1::ones(2 * k), lp_a, lp_b);
    let sol = lp.solve()?;
    Ok(Array1::from_iter(
        (0..k).map(|j| sol.x[j] - sol.x[k + j]),
    ))
}

/// `min |m|₁  s.t.  A m <= b` over free `m`, through the split `m = u - v`.
pub fn l1_min_ineq(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>, LpError> {
    let (rows, k) = a.dim();
    let mut lp_a = Array2::<f64>::zeros((rows, 2 * k));
    for i in 0..rows {
        for j in 0..k {
            lp_a[[i, j]] = a[[i, j]];
            lp_a[[i, k + j]] = -a[[i, j]];
        }
    }
    let lp = LinearProgram::new(Array1::ones(2 * k), lp_a, b.to_owned());
    let sol = lp.solve()?;
    Ok(Array1::from_iter((0..k).map(|j| sol.x[j] - sol.x[k + j])))
}
