//! Sparse VAR estimation from factor-adjusted autocovariances.
//!
//! The stacked coefficient matrix `β = [A₁, …, A_d]ᵀ` (`pd x p`) solves the
//! Yule-Walker system `G β = g`. Two regularised estimators are provided:
//! an ℓ1-penalised quadratic fit solved by FISTA, and a Dantzig-type
//! constrained ℓ1 minimisation solved column by column with the simplex.

use ndarray::{s, Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::lp::{l1_min_box, LpError};
use crate::panel::AcvSequence;

/// `G(b)` and `g(b)` assembled from an autocovariance sequence.
#[derive(Debug, Clone)]
pub struct YuleWalkerSystem {
    pub order_b: usize,
    /// `pb x pb`, block `(i, j)` is `Γ(i - j)`.
    pub big_g: Array2<f64>,
    /// `pb x p`, block `i` is `Γ(i + 1)`.
    pub small_g: Array2<f64>,
}

impl YuleWalkerSystem {
    pub fn p(&self) -> usize {
        self.small_g.ncols()
    }
}

pub fn build_yule_walker(acv_xi: &AcvSequence, order_b: usize) -> Result<YuleWalkerSystem> {
    if order_b == 0 {
        return Err(Error::dim("VAR order must be positive"));
    }
    if acv_xi.max_lag() < order_b {
        return Err(Error::dim(format!(
            "order {order_b} needs lags up to {order_b}, only {} available",
            acv_xi.max_lag()
        )));
    }
    let p = acv_xi.dim();
    let pb = p * order_b;
    let mut big_g = Array2::zeros((pb, pb));
    let mut small_g = Array2::zeros((pb, p));
    for i in 0..order_b {
        for j in 0..order_b {
            let block = acv_xi.at(i as isize - j as isize);
            big_g
                .slice_mut(s![i * p..(i + 1) * p, j * p..(j + 1) * p])
                .assign(&block);
        }
        small_g
            .slice_mut(s![i * p..(i + 1) * p, ..])
            .assign(acv_xi.lag(i + 1));
    }
    Ok(YuleWalkerSystem {
        order_b,
        big_g,
        small_g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarMethod {
    Lasso,
    Ds,
}

impl std::fmt::Display for VarMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarMethod::Lasso => write!(f, "lasso"),
            VarMethod::Ds => write!(f, "ds"),
        }
    }
}

/// A fitted sparse VAR.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarFit {
    pub order_d: usize,
    /// `pd x p`, rows `(l-1)p..lp` hold `A_lᵀ`.
    pub beta: Array2<f64>,
    pub method: VarMethod,
    pub lambda: f64,
    /// Innovation covariance, when estimated.
    pub gamma_hat: Option<Array2<f64>>,
    pub threshold_applied: Option<f64>,
    #[serde(default)]
    pub objective_trace: Vec<f64>,
    /// Whether `G` had to be projected onto the PSD cone before FISTA.
    #[serde(default)]
    pub psd_clipped: bool,
}

impl VarFit {
    pub fn p(&self) -> usize {
        self.beta.ncols()
    }

    /// Transition matrix `A_l`, `1 <= l <= d`.
    pub fn a_matrix(&self, l: usize) -> Array2<f64> {
        assert!(l >= 1 && l <= self.order_d, "lag {l} outside 1..={}", self.order_d);
        let p = self.p();
        self.beta.slice(s![(l - 1) * p..l * p, ..]).t().to_owned()
    }

    pub fn a_matrices(&self) -> Vec<Array2<f64>> {
        (1..=self.order_d).map(|l| self.a_matrix(l)).collect()
    }

    /// Copy with coefficients thresholded at `t`.
    pub fn thresholded(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.beta = threshold_matrix(self.beta.view(), t);
        out.threshold_applied = Some(t);
        out
    }
}

/// FISTA settings.
#[derive(Debug, Clone, Copy)]
pub struct FistaOptions {
    pub max_iter: usize,
    /// Stop once the relative objective change drops below this.
    pub tol: f64,
}

impl Default for FistaOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-4,
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `tr(MᵀGM − 2Mᵀg) + λ|M|₁`.
pub fn lasso_objective(sys: &YuleWalkerSystem, m: ArrayView2<f64>, lambda: f64) -> f64 {
    quadratic_part(sys.big_g.view(), sys.small_g.view(), m) + lambda * m.iter().map(|v| v.abs()).sum::<f64>()
}

fn quadratic_part(big_g: ArrayView2<f64>, small_g: ArrayView2<f64>, m: ArrayView2<f64>) -> f64 {
    let gm = big_g.dot(&m);
    Zip::from(&gm)
        .and(m)
        .and(small_g)
        .fold(0.0, |acc, &gm, &m, &g| acc + m * gm - 2.0 * m * g)
}

/// Largest KKT violation of `M` for the Lasso problem: `|2(GM − g)| <= λ` on
/// zero entries and `2(GM − g) + λ sign(M) = 0` elsewhere.
pub fn lasso_kkt_residual(sys: &YuleWalkerSystem, m: ArrayView2<f64>, lambda: f64) -> f64 {
    let grad = (sys.big_g.dot(&m) - &sys.small_g) * 2.0;
    Zip::from(&grad).and(m).fold(0.0f64, |acc, &gr, &mv| {
        let v = if mv == 0.0 {
            (gr.abs() - lambda).max(0.0)
        } else {
            (gr + lambda * mv.signum()).abs()
        };
        acc.max(v)
    })
}

/// Eigenvalue-clips `G` to the PSD cone if needed; returns the matrix used,
/// its largest eigenvalue, and whether clipping happened.
fn psd_part(big_g: &Array2<f64>) -> (Array2<f64>, f64, bool) {
    let eig = symmetric_eigen(big_g.view());
    let top = eig.values[0].max(0.0);
    let min = eig.values[eig.values.len() - 1];
    if min >= 0.0 {
        return (big_g.clone(), top, false);
    }
    let clipped_vals = eig.values.mapv(|v| v.max(0.0));
    let scaled = &eig.vectors * &clipped_vals;
    let mut g = scaled.dot(&eig.vectors.t());
    // exact symmetry
    let gt = g.t().to_owned();
    g = (&g + &gt) * 0.5;
    (g, top, true)
}

/// `G` made PSD for FISTA, with its top eigenvalue; reusable across penalties.
#[derive(Debug, Clone)]
pub struct PreparedGram {
    big_g: Array2<f64>,
    top: f64,
    clipped: bool,
}

impl PreparedGram {
    pub fn new(sys: &YuleWalkerSystem) -> Self {
        let (big_g, top, clipped) = psd_part(&sys.big_g);
        Self { big_g, top, clipped }
    }
}

/// ℓ1-penalised Yule-Walker fit by FISTA, started from the zero matrix.
pub fn lasso_fista(sys: &YuleWalkerSystem, lambda: f64, opts: FistaOptions) -> Result<VarFit> {
    lasso_fista_prepared(sys, &PreparedGram::new(sys), lambda, opts)
}

pub fn lasso_fista_prepared(
    sys: &YuleWalkerSystem,
    prep: &PreparedGram,
    lambda: f64,
    opts: FistaOptions,
) -> Result<VarFit> {
    if !(lambda > 0.0) {
        return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
    }
    let big_g = &prep.big_g;
    let (top, clipped) = (prep.top, prep.clipped);
    let (pb, p) = sys.small_g.dim();
    let mut x = Array2::<f64>::zeros((pb, p));
    let mut trace = Vec::new();
    if top <= 0.0 {
        // G = 0: the objective is λ|M|₁, minimised at zero
        trace.push(0.0);
        return Ok(fit_from(sys, x, VarMethod::Lasso, lambda, trace, clipped));
    }
    let lip = 2.0 * top;
    let step = 1.0 / lip;
    let shrink = lambda * step;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut prev = lasso_objective_with(big_g, sys, x.view(), lambda);
    for _ in 0..opts.max_iter {
        let grad = (big_g.dot(&y) - &sys.small_g) * 2.0;
        let x_new = Zip::from(&y)
            .and(&grad)
            .map_collect(|&yv, &gv| soft_threshold(yv - step * gv, shrink));
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_new;
        let fixed = x_new == x;
        y = &x_new + &((&x_new - &x) * momentum);
        x = x_new;
        t = t_new;
        let obj = lasso_objective_with(big_g, sys, x.view(), lambda);
        if !obj.is_finite() {
            return Err(Error::Numerical("FISTA objective is not finite".into()));
        }
        trace.push(obj);
        let done = fixed || (obj - prev).abs() < opts.tol * prev.abs();
        prev = obj;
        if done {
            break;
        }
    }
    Ok(fit_from(sys, x, VarMethod::Lasso, lambda, trace, clipped))
}

fn lasso_objective_with(
    big_g: &Array2<f64>,
    sys: &YuleWalkerSystem,
    m: ArrayView2<f64>,
    lambda: f64,
) -> f64 {
    quadratic_part(big_g.view(), sys.small_g.view(), m) + lambda * m.iter().map(|v| v.abs()).sum::<f64>()
}

fn fit_from(
    sys: &YuleWalkerSystem,
    beta: Array2<f64>,
    method: VarMethod,
    lambda: f64,
    objective_trace: Vec<f64>,
    psd_clipped: bool,
) -> VarFit {
    VarFit {
        order_d: sys.order_b,
        beta,
        method,
        lambda,
        gamma_hat: None,
        threshold_applied: None,
        objective_trace,
        psd_clipped,
    }
}

/// Dantzig-type estimator: each column solves
/// `min |m|₁ s.t. |G m − g_j|_∞ <= λ`.
pub fn dantzig_lp(sys: &YuleWalkerSystem, lambda: f64) -> Result<VarFit> {
    if !(lambda > 0.0) {
        return Err(Error::Input(format!("lambda must be positive, got {lambda}")));
    }
    let (pb, p) = sys.small_g.dim();
    let bound = ndarray::Array1::from_elem(pb, lambda);
    let mut beta = Array2::zeros((pb, p));
    for j in 0..p {
        let col = l1_min_box(sys.big_g.view(), sys.small_g.column(j), bound.view())
            .map_err(|e| lp_error(e, &format!("Dantzig column {}", j + 1)))?;
        beta.column_mut(j).assign(&col);
    }
    Ok(fit_from(sys, beta, VarMethod::Ds, lambda, Vec::new(), false))
}

pub(crate) fn lp_error(e: LpError, context: &str) -> Error {
    Error::Solver(format!("{context}: {e}"))
}

/// Estimates β with the chosen method.
pub fn estimate_var(
    sys: &YuleWalkerSystem,
    method: VarMethod,
    lambda: f64,
    opts: FistaOptions,
) -> Result<VarFit> {
    match method {
        VarMethod::Lasso => lasso_fista(sys, lambda, opts),
        VarMethod::Ds => dantzig_lp(sys, lambda),
    }
}

/// Estimates β for every penalty in `grid`, sharing the preparation of `G`.
pub fn estimate_var_path(
    sys: &YuleWalkerSystem,
    method: VarMethod,
    grid: &[f64],
    opts: FistaOptions,
) -> Vec<Result<VarFit>> {
    match method {
        VarMethod::Lasso => {
            let prep = PreparedGram::new(sys);
            grid.iter()
                .map(|&lam| lasso_fista_prepared(sys, &prep, lam, opts))
                .collect()
        }
        VarMethod::Ds => grid.iter().map(|&lam| dantzig_lp(sys, lam)).collect(),
    }
}

/// Keeps entries with `|b| > t` and zeroes the rest.
pub fn threshold_matrix(b: ArrayView2<f64>, t: f64) -> Array2<f64> {
    b.mapv(|v| if v.abs() > t { v } else { 0.0 })
}

/// Number of non-zero entries.
pub fn support_size(b: ArrayView2<f64>) -> usize {
    b.iter().filter(|v| **v != 0.0).count()
}

/// `Γ̂ = Γ̂_ξ(0) − β̂ᵀ ĝ(d)`, symmetrised.
pub fn innovation_covariance(acv_xi: &AcvSequence, fit: &VarFit) -> Result<Array2<f64>> {
    let sys = build_yule_walker(acv_xi, fit.order_d)?;
    if sys.small_g.dim() != fit.beta.dim() {
        return Err(Error::dim("coefficient matrix does not match the autocovariances"));
    }
    let raw = acv_xi.lag(0) - &fit.beta.t().dot(&sys.small_g);
    Ok((&raw + &raw.t()) * 0.5)
}
