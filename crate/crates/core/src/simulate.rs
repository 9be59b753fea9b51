//! Synthetic panels for the sparse VAR, the dynamic and the static factor
//! designs, plus support-recovery and estimation-error metrics.

use nalgebra::{DMatrix, Schur};
use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, inverse, spectral_norm};

pub const DEFAULT_BURN_IN: usize = 100;
pub const DEFAULT_COEFF: f64 = 0.275;
/// Graphs whose VAR has a companion spectral radius at or above this are
/// redrawn.
pub const STABILITY_LIMIT: f64 = 0.99;
pub const MAX_GRAPH_DRAWS: usize = 100;

/// Seeded generator used by every simulation routine.
pub type SimRng = ChaCha8Rng;

pub fn sim_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnovationCov {
    /// `Γ = I`.
    Identity,
    /// Banded precision with bands `(1, 0.6, 0.3)`.
    Banded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub var_order_d: usize,
    /// Edge probability; `1/p` when unset.
    pub link_prob: Option<f64>,
    pub coeff_value: f64,
    pub innovation_cov: InnovationCov,
    pub heavy_tails: bool,
    pub seed: u64,
    pub burn_in: usize,
}

impl SimSpec {
    pub fn new(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            q: 2,
            var_order_d: 1,
            link_prob: None,
            coeff_value: DEFAULT_COEFF,
            innovation_cov: InnovationCov::Identity,
            heavy_tails: false,
            seed: 111,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    fn validate(&self) -> Result<f64> {
        if self.n == 0 || self.p == 0 || self.var_order_d == 0 {
            return Err(Error::Input("n, p and the VAR order must be positive".into()));
        }
        let prob = self.link_prob.unwrap_or(1.0 / self.p as f64);
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(Error::Input(format!("link probability must lie in (0, 1], got {prob}")));
        }
        if !self.coeff_value.is_finite() {
            return Err(Error::Input("coefficient value must be finite".into()));
        }
        Ok(prob)
    }
}

/// Unit-variance innovation draw: standard normal or `√(3/5)·t₅`.
pub fn draw_innovation<R: Rng + ?Sized>(rng: &mut R, heavy: bool) -> f64 {
    if heavy {
        let t5 = StudentT::new(5.0).expect("valid degrees of freedom");
        (0.6f64).sqrt() * t5.sample(rng)
    } else {
        StandardNormal.sample(rng)
    }
}

/// Banded precision `δ_ii = 1`, `δ_{i,i±1} = 0.6`, `δ_{i,i±2} = 0.3`.
pub fn banded_precision(p: usize) -> Array2<f64> {
    Array2::from_shape_fn((p, p), |(i, j)| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.6,
        2 => 0.3,
        _ => 0.0,
    })
}

/// Lower Cholesky factor, `None` unless positive definite.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let p = a.nrows();
    let m = DMatrix::from_fn(p, p, |i, j| a[[i, j]]);
    let l = m.cholesky()?.l();
    Some(Array2::from_shape_fn((p, p), |(i, j)| l[(i, j)]))
}

/// Spectral radius of the VAR companion matrix.
pub fn companion_spectral_radius(a_mats: &[Array2<f64>]) -> f64 {
    let d = a_mats.len();
    if d == 0 {
        return 0.0;
    }
    let p = a_mats[0].nrows();
    let k = p * d;
    let mut c = DMatrix::<f64>::zeros(k, k);
    for (l, a) in a_mats.iter().enumerate() {
        for i in 0..p {
            for j in 0..p {
                c[(i, l * p + j)] = a[[i, j]];
            }
        }
    }
    for i in p..k {
        c[(i, i - p)] = 1.0;
    }
    match Schur::try_new(c.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm())),
        None => gelfand_radius(c),
    }
}

/// `‖C^(2^j)‖^(1/2^j)` by repeated squaring with rescaling, used when the
/// Schur iteration does not converge.
fn gelfand_radius(mut c: DMatrix<f64>) -> f64 {
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..40 {
        let norm = c.norm();
        if norm == 0.0 {
            return 0.0;
        }
        c /= norm;
        log_scale += norm.ln() / power;
        c = &c * &c;
        power *= 2.0;
    }
    (log_scale + c.norm().ln() / power).exp()
}

/// Output of [`sim_var`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimVar {
    /// `p x n`.
    pub data: Array2<f64>,
    /// `A_1..A_d`; only `A_d` is non-zero.
    pub a_mats: Vec<Array2<f64>>,
    /// Innovation precision `Δ = Γ⁻¹`.
    pub delta: Array2<f64>,
    pub gamma: Array2<f64>,
    /// Innovations actually used (after burn-in), `p x n`.
    pub innovations: Array2<f64>,
}

/// Draws the edge set of a directed Erdős-Rényi graph (diagonal included)
/// and returns `A_d`.
fn draw_transition<R: Rng + ?Sized>(rng: &mut R, p: usize, prob: f64, coeff: f64) -> Array2<f64> {
    let unif = Uniform::new(0.0, 1.0).expect("valid range");
    Array2::from_shape_simple_fn((p, p), || if unif.sample(rng) < prob { coeff } else { 0.0 })
}

/// Sparse VAR(d) panel with burn-in discarded.
pub fn sim_var<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<SimVar> {
    let prob = spec.validate()?;
    let (p, d) = (spec.p, spec.var_order_d);
    let mut a_d = None;
    for _ in 0..MAX_GRAPH_DRAWS {
        let cand = draw_transition(rng, p, prob, spec.coeff_value);
        let mut mats = vec![Array2::zeros((p, p)); d];
        mats[d - 1] = cand.clone();
        if companion_spectral_radius(&mats) < STABILITY_LIMIT {
            a_d = Some(cand);
            break;
        }
    }
    let a_d = a_d.ok_or_else(|| {
        Error::Input(format!("no stable VAR drawn in {MAX_GRAPH_DRAWS} attempts"))
    })?;
    let mut a_mats = vec![Array2::zeros((p, p)); d];
    a_mats[d - 1] = a_d;

    let (delta, gamma, root) = match spec.innovation_cov {
        InnovationCov::Identity => (Array2::eye(p), Array2::eye(p), None),
        InnovationCov::Banded => {
            let delta = banded_precision(p);
            let gamma = inverse(delta.view())
                .ok_or_else(|| Error::Input("banded precision is singular".into()))?;
            let root = cholesky(&gamma)
                .ok_or_else(|| Error::Input(format!("banded precision is not positive definite at p = {p}")))?;
            (delta, gamma, Some(root))
        }
    };

    let total = spec.n + spec.burn_in;
    let mut eps = Array2::from_shape_simple_fn((p, total), || draw_innovation(rng, spec.heavy_tails));
    if let Some(root) = &root {
        eps = root.dot(&eps);
    }
    let data = replay_var(&a_mats, eps.view());
    Ok(SimVar {
        data: data.slice(ndarray::s![.., spec.burn_in..]).to_owned(),
        a_mats,
        delta,
        gamma,
        innovations: eps.slice(ndarray::s![.., spec.burn_in..]).to_owned(),
    })
}

/// Runs `x_t = Σ_ℓ A_ℓ x_{t−ℓ} + ε_t` from zero initial values.
pub fn replay_var(a_mats: &[Array2<f64>], eps: ArrayView2<f64>) -> Array2<f64> {
    let (p, total) = eps.dim();
    let mut x = Array2::<f64>::zeros((p, total));
    for t in 0..total {
        let mut xt = eps.column(t).to_owned();
        for (l, a) in a_mats.iter().enumerate() {
            let lag = l + 1;
            if t >= lag && a.iter().any(|v| *v != 0.0) {
                xt += &a.dot(&x.column(t - lag));
            }
        }
        x.column_mut(t).assign(&xt);
    }
    x
}

/// Common component built from filtered factor shocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimCommon {
    /// `p x n`.
    pub data: Array2<f64>,
    /// Shocks after burn-in, `q x n`.
    pub shocks: Array2<f64>,
    /// Loadings: `p x q` for the dynamic design, `p x 2q` for the static one.
    pub loadings: Array2<f64>,
    /// AR coefficients `p x q` (dynamic design only).
    pub ar_coeffs: Option<Array2<f64>>,
}

/// `χ_it = Σ_j a_ij (1 − α_ij L)⁻¹ u_jt` with `a ~ U[−1,1]`, `α ~ U[−0.8,0.8]`.
pub fn sim_unrestricted<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<SimCommon> {
    spec.validate()?;
    if spec.q == 0 {
        return Err(Error::Input("the dynamic design needs q >= 1".into()));
    }
    let (p, q) = (spec.p, spec.q);
    let total = spec.n + spec.burn_in;
    let shocks = Array2::from_shape_simple_fn((q, total), || draw_innovation(rng, spec.heavy_tails));
    let load = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let ar = Uniform::new_inclusive(-0.8, 0.8).expect("valid range");
    let loadings = Array2::from_shape_simple_fn((p, q), || load.sample(rng));
    let ar_coeffs = Array2::from_shape_simple_fn((p, q), || ar.sample(rng));
    let data = filter_common(&loadings, &ar_coeffs, shocks.view());
    Ok(SimCommon {
        data: data.slice(ndarray::s![.., spec.burn_in..]).to_owned(),
        shocks: shocks.slice(ndarray::s![.., spec.burn_in..]).to_owned(),
        loadings,
        ar_coeffs: Some(ar_coeffs),
    })
}

/// Sums of AR(1) filters of the shocks, started from zero.
pub fn filter_common(loadings: &Array2<f64>, ar_coeffs: &Array2<f64>, shocks: ArrayView2<f64>) -> Array2<f64> {
    let (p, q) = loadings.dim();
    let total = shocks.ncols();
    let mut out = Array2::zeros((p, total));
    for i in 0..p {
        for j in 0..q {
            let (a, alpha) = (loadings[[i, j]], ar_coeffs[[i, j]]);
            let mut y = 0.0;
            for t in 0..total {
                y = alpha * y + shocks[[j, t]];
                out[[i, t]] += a * y;
            }
        }
    }
    out
}

/// Static design `χ_t = Λ (u_tᵀ, u_{t−1}ᵀ)ᵀ` with standard normal loadings.
pub fn sim_restricted<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<SimCommon> {
    spec.validate()?;
    if spec.q == 0 {
        return Err(Error::Input("the static design needs q >= 1".into()));
    }
    let (p, q, n) = (spec.p, spec.q, spec.n);
    let shocks = Array2::from_shape_simple_fn((q, n + 1), || draw_innovation(rng, spec.heavy_tails));
    let loadings = Array2::from_shape_simple_fn((p, 2 * q), || StandardNormal.sample(rng));
    let mut factors = Array2::zeros((2 * q, n));
    for t in 0..n {
        for j in 0..q {
            factors[[j, t]] = shocks[[j, t + 1]];
            factors[[q + j, t]] = shocks[[j, t]];
        }
    }
    Ok(SimCommon {
        data: loadings.dot(&factors),
        shocks: shocks.slice(ndarray::s![.., 1..]).to_owned(),
        loadings,
        ar_coeffs: None,
    })
}

/// Which entries enter the support metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexSet {
    All,
    OffDiagonal,
}

impl IndexSet {
    fn contains(self, i: usize, j: usize) -> bool {
        match self {
            IndexSet::All => true,
            IndexSet::OffDiagonal => i != j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub l_f: f64,
    pub l_2: f64,
}

fn check_shapes(est: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<()> {
    if est.dim() != truth.dim() {
        return Err(Error::Metric(format!(
            "estimate is {:?}, truth is {:?}",
            est.dim(),
            truth.dim()
        )));
    }
    Ok(())
}

/// Positive and negative counts of the truth over `set`.
fn class_sizes(truth: ArrayView2<f64>, set: IndexSet) -> Result<(usize, usize)> {
    let mut pos = 0;
    let mut neg = 0;
    for ((i, j), v) in truth.indexed_iter() {
        if set.contains(i, j) {
            if *v != 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("truth needs both zero and non-zero entries".into()));
    }
    Ok((pos, neg))
}

/// `(TPR, FPR)` of the non-zero pattern of `est`.
pub fn support_rates(est: ArrayView2<f64>, truth: ArrayView2<f64>, set: IndexSet) -> Result<(f64, f64)> {
    check_shapes(est, truth)?;
    let (pos, neg) = class_sizes(truth, set)?;
    let mut tp = 0;
    let mut fp = 0;
    for ((i, j), e) in est.indexed_iter() {
        if set.contains(i, j) && *e != 0.0 {
            if truth[[i, j]] != 0.0 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    Ok((tp as f64 / pos as f64, fp as f64 / neg as f64))
}

/// `(‖E − T‖_F / ‖T‖_F, ‖E − T‖ / ‖T‖)`.
pub fn relative_errors(est: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<(f64, f64)> {
    check_shapes(est, truth)?;
    let diff = &est - &truth;
    let tf = frobenius_norm(truth);
    if tf == 0.0 {
        return Err(Error::Metric("truth is the zero matrix".into()));
    }
    Ok((frobenius_norm(diff.view()) / tf, spectral_norm(diff.view()) / spectral_norm(truth)))
}

pub fn metrics(est: ArrayView2<f64>, truth: ArrayView2<f64>, set: IndexSet) -> Result<EvalMetrics> {
    let (tpr, fpr) = support_rates(est, truth, set)?;
    let (l_f, l_2) = relative_errors(est, truth)?;
    Ok(EvalMetrics { tpr, fpr, l_f, l_2 })
}

/// ROC points `(FPR, TPR)` obtained by thresholding `|est|` at each of its
/// distinct non-zero magnitudes, starting from `(0, 0)`.
pub fn roc_curve(est: ArrayView2<f64>, truth: ArrayView2<f64>, set: IndexSet) -> Result<Vec<(f64, f64)>> {
    check_shapes(est, truth)?;
    let (pos, neg) = class_sizes(truth, set)?;
    let mut scored: Vec<(f64, bool)> = est
        .indexed_iter()
        .filter(|((i, j), e)| set.contains(*i, *j) && **e != 0.0)
        .map(|((i, j), e)| (e.abs(), truth[[i, j]] != 0.0))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < scored.len() {
        let level = scored[k].0;
        while k < scored.len() && scored[k].0 == level {
            if scored[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        curve.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(curve)
}

/// TPR read off the ROC curve at `target` FPR by linear interpolation; when
/// the curve ends before `target` its last TPR is used.
pub fn tpr_at_fpr(est: ArrayView2<f64>, truth: ArrayView2<f64>, set: IndexSet, target: f64) -> Result<f64> {
    let curve = roc_curve(est, truth, set)?;
    for w in curve.windows(2) {
        let ((f0, t0), (f1, t1)) = (w[0], w[1]);
        if f1 >= target {
            if f1 == f0 {
                return Ok(t1);
            }
            return Ok(t0 + (t1 - t0) * (target - f0) / (f1 - f0));
        }
    }
    Ok(curve.last().map(|c| c.1).unwrap_or(0.0))
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Convenience: the row means of a `p x n` matrix.
pub fn row_means(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(ndarray::Axis(1)).unwrap_or_else(|| Array1::zeros(x.nrows()))
}
