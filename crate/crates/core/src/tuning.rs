//! Selection of the VAR order and penalty by rolling cross validation or
//! eBIC, and of the precision tuning parameter by a Burg-divergence CV.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, max_abs};
use crate::panel::{AcvSequence, TimeSeriesPanel};
use crate::precision::{aclime, clime};
use crate::spectral::{factor_adjust, FactorArgs};
use crate::threshold_select::{select_threshold, DEFAULT_GRID_SIZE};
use crate::var_estimation::{
    build_yule_walker, estimate_var, estimate_var_path, innovation_covariance, support_size, threshold_matrix,
    FistaOptions, VarFit, VarMethod, YuleWalkerSystem,
};

pub const DEFAULT_PATH_LENGTH: usize = 10;
pub const DEFAULT_FOLDS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuningMethod {
    Cv,
    Ebic,
}

/// One fold as 0-based half-open time ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: (usize, usize),
    pub test: (usize, usize),
}

/// Splits `0..n` into `folds` consecutive blocks, each halved into a training
/// and a test part.
pub fn make_folds(n: usize, folds: usize) -> Result<Vec<Fold>> {
    if folds == 0 {
        return Err(Error::Input("number of folds must be positive".into()));
    }
    let width = n.div_ceil(folds);
    let bound = |l: usize| (l * width).min(n);
    let mut out = Vec::with_capacity(folds);
    for l in 1..=folds {
        let (start, end) = (bound(l - 1), bound(l));
        let mid = (start + end).div_ceil(2);
        if mid - start < 2 || end - mid < 2 {
            return Err(Error::dim(format!(
                "fold {l} of {folds} is too short for n = {n}"
            )));
        }
        out.push(Fold {
            train: (start, mid),
            test: (mid, end),
        });
    }
    Ok(out)
}

/// Geometric grid from `top` down to `top / 100`, `len` points.
fn geometric_desc(top: f64, len: usize) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::Input("grid length must be positive".into()));
    }
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::Selection(format!("degenerate grid anchor {top}")));
    }
    if len == 1 {
        return Ok(vec![top]);
    }
    let step = (100f64).ln() / (len - 1) as f64;
    Ok((0..len).map(|i| top * (-step * i as f64).exp()).collect())
}

/// Descending λ grid anchored at the smallest penalty giving the zero
/// solution (`2|g|_∞` for the Lasso, `|g|_∞` for the Dantzig selector).
pub fn lambda_grid(small_g: ArrayView2<f64>, method: VarMethod, len: usize) -> Result<Vec<f64>> {
    let g = max_abs(small_g);
    let top = match method {
        VarMethod::Lasso => 2.0 * g,
        VarMethod::Ds => g,
    };
    geometric_desc(top, len)
}

/// Descending η grid anchored at `|Γ|_∞`.
pub fn eta_grid(gamma: ArrayView2<f64>, len: usize) -> Result<Vec<f64>> {
    geometric_desc(max_abs(gamma), len)
}

/// Result of the joint (λ, order) search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarTuning {
    pub method: TuningMethod,
    pub grid_lambda: Vec<f64>,
    pub orders: Vec<usize>,
    /// `score_surface[i][j]` belongs to `(grid_lambda[i], orders[j])`.
    pub score_surface: Vec<Vec<f64>>,
    pub lambda_hat: f64,
    pub d_hat: usize,
    pub n_folds: usize,
    pub alpha: f64,
    pub folds: Vec<Fold>,
}

impl VarTuning {
    /// Writes `lambda, order, score` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda,order,score")?;
        for (i, lam) in self.grid_lambda.iter().enumerate() {
            for (j, b) in self.orders.iter().enumerate() {
                writeln!(out, "{lam},{b},{}", self.score_surface[i][j])?;
            }
        }
        Ok(())
    }
}

/// Minimiser of a (λ, order) surface: ties go to the smaller order, then the
/// larger λ. Non-finite scores never win.
fn argmin_surface(grid: &[f64], orders: &[usize], surface: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, row) in surface.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            best = match best {
                None => Some((i, j)),
                Some((bi, bj)) => {
                    let bv = surface[bi][bj];
                    let better = v < bv
                        || (v == bv
                            && (orders[j] < orders[bj]
                                || (orders[j] == orders[bj] && grid[i] > grid[bi])));
                    if better {
                        Some((i, j))
                    } else {
                        Some((bi, bj))
                    }
                }
            };
        }
    }
    best
}

fn check_orders(orders: &[usize]) -> Result<usize> {
    if orders.is_empty() || orders.contains(&0) {
        return Err(Error::Input("candidate VAR orders must be positive and non-empty".into()));
    }
    Ok(*orders.iter().max().unwrap())
}

/// `tr(Γ(0) − βᵀg − gᵀβ + βᵀGβ)`.
pub fn prediction_loss(gamma0: ArrayView2<f64>, sys: &YuleWalkerSystem, beta: ArrayView2<f64>) -> f64 {
    let cross: f64 = beta.iter().zip(sys.small_g.iter()).map(|(b, g)| b * g).sum();
    let gb = sys.big_g.dot(&beta);
    let quad: f64 = beta.iter().zip(gb.iter()).map(|(b, g)| b * g).sum();
    gamma0.diag().sum() - 2.0 * cross + quad
}

fn segment_acv(panel: &TimeSeriesPanel, range: (usize, usize), args: &FactorArgs, lags: usize) -> Result<AcvSequence> {
    let seg = panel.time_segment(range.0, range.1)?;
    Ok(factor_adjust(&seg, args, lags)?.acv_xi)
}

/// Rolling cross validation over `grid_lambda x orders`.
pub fn cv_var(
    panel: &TimeSeriesPanel,
    args: &FactorArgs,
    method: VarMethod,
    grid_lambda: &[f64],
    orders: &[usize],
    folds: usize,
    opts: FistaOptions,
) -> Result<VarTuning> {
    let max_order = check_orders(orders)?;
    if grid_lambda.is_empty() {
        return Err(Error::Input("empty penalty grid".into()));
    }
    let fold_bounds = make_folds(panel.n(), folds)?;
    let mut surface = vec![vec![0.0; orders.len()]; grid_lambda.len()];
    for fold in &fold_bounds {
        let train = segment_acv(panel, fold.train, args, max_order)?;
        let test = segment_acv(panel, fold.test, args, max_order)?;
        for (j, &b) in orders.iter().enumerate() {
            let sys_tr = build_yule_walker(&train, b)?;
            let sys_te = build_yule_walker(&test, b)?;
            let path = estimate_var_path(&sys_tr, method, grid_lambda, opts);
            for (i, fit) in path.into_iter().enumerate() {
                surface[i][j] += match fit {
                    Ok(fit) => prediction_loss(test.lag(0).view(), &sys_te, fit.beta.view()),
                    Err(Error::Solver(_)) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
            }
        }
    }
    let (i, j) = argmin_surface(grid_lambda, orders, &surface)
        .ok_or_else(|| Error::Selection("no finite cross-validation score; widen the grid".into()))?;
    Ok(VarTuning {
        method: TuningMethod::Cv,
        grid_lambda: grid_lambda.to_vec(),
        orders: orders.to_vec(),
        score_surface: surface,
        lambda_hat: grid_lambda[i],
        d_hat: orders[j],
        n_folds: folds,
        alpha: 0.0,
        folds: fold_bounds,
    })
}

/// `log C(total, s)` through log-gamma.
pub fn log_binomial(total: usize, s: usize) -> f64 {
    assert!(s <= total, "s = {s} exceeds {total}");
    ln_gamma(total as f64 + 1.0) - ln_gamma(s as f64 + 1.0) - ln_gamma((total - s) as f64 + 1.0)
}

/// `(n/2) log L + s log n + 2α log C(bp², s)`; a non-positive loss scores `+∞`.
pub fn ebic_score(loss: f64, s: usize, n: usize, b: usize, p: usize, alpha: f64) -> f64 {
    if !(loss > 0.0) {
        return f64::INFINITY;
    }
    let nf = n as f64;
    0.5 * nf * loss.ln() + s as f64 * nf.ln() + 2.0 * alpha * log_binomial(b * p * p, s)
}

/// Thresholds a coefficient matrix at its adaptive threshold (unchanged when
/// it is already zero).
pub fn adaptive_threshold(beta: ArrayView2<f64>, n_total: usize) -> Result<(Array2<f64>, Option<f64>)> {
    if beta.iter().all(|v| *v == 0.0) {
        return Ok((beta.to_owned(), None));
    }
    let sel = select_threshold(beta, n_total, DEFAULT_GRID_SIZE)?;
    Ok((threshold_matrix(beta, sel.t_ada), Some(sel.t_ada)))
}

/// eBIC over `grid_lambda x orders` on the full-sample idiosyncratic
/// autocovariances.
pub fn ebic_var(
    acv_xi: &AcvSequence,
    n: usize,
    method: VarMethod,
    grid_lambda: &[f64],
    orders: &[usize],
    alpha: f64,
    opts: FistaOptions,
) -> Result<VarTuning> {
    check_orders(orders)?;
    if grid_lambda.is_empty() {
        return Err(Error::Input("empty penalty grid".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Input(format!("eBIC constant must lie in [0, 1], got {alpha}")));
    }
    let p = acv_xi.dim();
    let mut surface = vec![vec![f64::INFINITY; orders.len()]; grid_lambda.len()];
    for (j, &b) in orders.iter().enumerate() {
        let sys = build_yule_walker(acv_xi, b)?;
        let path = estimate_var_path(&sys, method, grid_lambda, opts);
        for (i, fit) in path.into_iter().enumerate() {
            let fit = match fit {
                Ok(fit) => fit,
                Err(Error::Solver(_)) => continue,
                Err(e) => return Err(e),
            };
            let (beta, _) = adaptive_threshold(fit.beta.view(), p * p * b)?;
            let loss = prediction_loss(acv_xi.lag(0).view(), &sys, beta.view());
            surface[i][j] = ebic_score(loss, support_size(beta.view()), n, b, p, alpha);
        }
    }
    let (i, j) = argmin_surface(grid_lambda, orders, &surface)
        .ok_or_else(|| Error::Selection("no finite eBIC score; widen the grid".into()))?;
    Ok(VarTuning {
        method: TuningMethod::Ebic,
        grid_lambda: grid_lambda.to_vec(),
        orders: orders.to_vec(),
        score_surface: surface,
        lambda_hat: grid_lambda[i],
        d_hat: orders[j],
        n_folds: 0,
        alpha,
        folds: Vec::new(),
    })
}

/// Result of the η search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaTuning {
    pub grid_eta: Vec<f64>,
    pub scores: Vec<f64>,
    pub eta_hat: f64,
    pub n_folds: usize,
    pub folds: Vec<Fold>,
}

impl EtaTuning {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "eta,score")?;
        for (e, s) in self.grid_eta.iter().zip(&self.scores) {
            writeln!(out, "{e},{s}")?;
        }
        Ok(())
    }
}

/// `tr(ΔΓ) − log|ΔΓ| − p`; `+∞` when the determinant is not positive.
pub fn burg_divergence(delta: ArrayView2<f64>, gamma: ArrayView2<f64>) -> f64 {
    let prod = delta.dot(&gamma);
    let (logdet, sign) = log_abs_det(prod.view());
    if !(sign > 0.0) || !logdet.is_finite() {
        return f64::INFINITY;
    }
    prod.diag().sum() - logdet - prod.nrows() as f64
}

/// VAR settings used to form the innovation covariance on each segment.
#[derive(Debug, Clone, Copy)]
pub struct SegmentVar {
    pub method: VarMethod,
    pub lambda: f64,
    pub order: usize,
    pub opts: FistaOptions,
}

fn segment_innovation(acv: &AcvSequence, var: &SegmentVar) -> Result<Array2<f64>> {
    let sys = build_yule_walker(acv, var.order)?;
    let fit: VarFit = estimate_var(&sys, var.method, var.lambda, var.opts)?;
    innovation_covariance(acv, &fit)
}

/// Burg-divergence cross validation of the precision tuning parameter.
pub fn cv_delta(
    panel: &TimeSeriesPanel,
    args: &FactorArgs,
    var: &SegmentVar,
    grid_eta: &[f64],
    adaptive: bool,
    folds: usize,
) -> Result<EtaTuning> {
    if grid_eta.is_empty() {
        return Err(Error::Input("empty eta grid".into()));
    }
    let fold_bounds = make_folds(panel.n(), folds)?;
    let mut scores = vec![0.0; grid_eta.len()];
    for fold in &fold_bounds {
        let train = segment_acv(panel, fold.train, args, var.order)?;
        let test = segment_acv(panel, fold.test, args, var.order)?;
        let gamma_tr = segment_innovation(&train, var)?;
        let gamma_te = segment_innovation(&test, var)?;
        let n_tr = fold.train.1 - fold.train.0;
        for (i, &eta) in grid_eta.iter().enumerate() {
            let delta = if adaptive {
                aclime(gamma_tr.view(), eta, n_tr)
            } else {
                clime(gamma_tr.view(), eta)
            };
            scores[i] += match delta {
                Ok(d) => burg_divergence(d.view(), gamma_te.view()),
                Err(Error::Solver(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
        }
    }
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|b| *s < scores[b]) {
            best = Some(i);
        }
    }
    let i = best.ok_or_else(|| {
        Error::Selection("every eta candidate gave a non-positive determinant; widen the grid".into())
    })?;
    Ok(EtaTuning {
        grid_eta: grid_eta.to_vec(),
        eta_hat: grid_eta[i],
        scores,
        n_folds: folds,
        folds: fold_bounds,
    })
}
