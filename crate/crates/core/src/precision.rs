//! Innovation precision by constrained ℓ1 minimisation, the long-run
//! precision, and partial correlations derived from either.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{l1_min_box, l1_min_ineq};
use crate::var_estimation::{lp_error, VarFit};

/// Stand-in for the strict positivity constraint on the pivot coordinate in
/// the first adaptive step.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionFit {
    #[serde(rename = "Delta")]
    pub delta: Array2<f64>,
    #[serde(rename = "Omega")]
    pub omega: Array2<f64>,
    pub eta: f64,
    pub adaptive: bool,
    pub pc: Array2<f64>,
    pub lrpc: Array2<f64>,
    #[serde(rename = "A1")]
    pub a1: Array2<f64>,
}

fn check_square(m: ArrayView2<f64>, what: &str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c || r == 0 {
        return Err(Error::dim(format!("{what} must be a non-empty square matrix, got {r}x{c}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what} has non-finite entries")));
    }
    Ok(r)
}

/// Columnwise CLIME solution before symmetrisation.
pub fn clime_columns(gamma: ArrayView2<f64>, eta: f64) -> Result<Array2<f64>> {
    let p = check_square(gamma, "covariance")?;
    if !(eta > 0.0) {
        return Err(Error::Input(format!("eta must be positive, got {eta}")));
    }
    let bound = Array1::from_elem(p, eta);
    let mut out = Array2::zeros((p, p));
    for j in 0..p {
        let mut e = Array1::zeros(p);
        e[j] = 1.0;
        let col = l1_min_box(gamma, e.view(), bound.view())
            .map_err(|err| lp_error(err, &format!("precision column {}", j + 1)))?;
        out.column_mut(j).assign(&col);
    }
    Ok(out)
}

/// Symmetric CLIME estimate of `Γ⁻¹`.
pub fn clime(gamma: ArrayView2<f64>, eta: f64) -> Result<Array2<f64>> {
    Ok(symmetrise_min_modulus(clime_columns(gamma, eta)?.view()))
}

/// Keeps, for each pair, the entry of smaller modulus. On ties the upper
/// triangle entry `M_ij` (`i < j`) is used for both positions.
pub fn symmetrise_min_modulus(m: ArrayView2<f64>) -> Array2<f64> {
    let p = m.nrows();
    let mut out = m.to_owned();
    for i in 0..p {
        for j in i + 1..p {
            let v = if m[[i, j]].abs() <= m[[j, i]].abs() {
                m[[i, j]]
            } else {
                m[[j, i]]
            };
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Intermediate quantities of the adaptive estimator.
#[derive(Debug, Clone)]
pub struct AclimeSteps {
    pub eta1: f64,
    /// Diagonal of the first-step solution, before truncation.
    pub first_step_diag: Array1<f64>,
    /// Truncated diagonal used to scale the second-step bounds.
    pub truncated_diag: Array1<f64>,
    /// Second-step columns before symmetrisation.
    pub second_step: Array2<f64>,
    pub delta: Array2<f64>,
}

/// Adaptive CLIME with second-step tuning `eta2` and sample size `n`.
pub fn aclime(gamma: ArrayView2<f64>, eta2: f64, n: usize) -> Result<Array2<f64>> {
    Ok(aclime_steps(gamma, eta2, n)?.delta)
}

pub fn aclime_steps(gamma: ArrayView2<f64>, eta2: f64, n: usize) -> Result<AclimeSteps> {
    let p = check_square(gamma, "covariance")?;
    if n < 2 || p < 2 {
        return Err(Error::dim(format!("adaptive estimator needs n >= 2 and p >= 2, got n={n}, p={p}")));
    }
    if !(eta2 > 0.0) {
        return Err(Error::Input(format!("eta must be positive, got {eta2}")));
    }
    let diag: Vec<f64> = (0..p).map(|i| gamma[[i, i]]).collect();
    if let Some(i) = diag.iter().position(|g| !(*g > 0.0)) {
        return Err(Error::Input(format!(
            "covariance diagonal entry {} is not positive",
            i + 1
        )));
    }
    let nf = n as f64;
    let log_p = (p as f64).ln();
    let mut gamma_star = gamma.to_owned();
    for i in 0..p {
        gamma_star[[i, i]] += 1.0 / nf;
    }
    let eta1 = 2.0 * (log_p / nf).sqrt();

    // step 1: |(Γ* m − e_j)_i| <= η1 max(γ_ii, γ_jj) m_j, m_j > 0
    let mut first_step_diag = Array1::zeros(p);
    for j in 0..p {
        let mut a = Array2::zeros((2 * p + 1, p));
        let mut b = Array1::zeros(2 * p + 1);
        for i in 0..p {
            let q = eta1 * diag[i].max(diag[j]);
            for k in 0..p {
                a[[i, k]] = gamma_star[[i, k]];
                a[[p + i, k]] = -gamma_star[[i, k]];
            }
            a[[i, j]] -= q;
            a[[p + i, j]] -= q;
            let e = if i == j { 1.0 } else { 0.0 };
            b[i] = e;
            b[p + i] = -e;
        }
        a[[2 * p, j]] = -1.0;
        b[2 * p] = -POSITIVITY_FLOOR;
        let col = l1_min_ineq(a.view(), b.view())
            .map_err(|err| lp_error(err, &format!("adaptive first step, column {}", j + 1)))?;
        first_step_diag[j] = col[j];
    }
    let cap = (nf / log_p).sqrt();
    let floor = (log_p / nf).sqrt();
    let truncated_diag = Array1::from_iter(
        (0..p).map(|i| if diag[i].abs() <= cap { first_step_diag[i] } else { floor }),
    );

    // step 2: |(Γ* m − e_j)_i| <= η2 sqrt(γ_ii δ_jj)
    let mut second_step = Array2::zeros((p, p));
    for j in 0..p {
        let bound = Array1::from_iter((0..p).map(|i| eta2 * (diag[i] * truncated_diag[j]).sqrt()));
        let mut e = Array1::zeros(p);
        e[j] = 1.0;
        let col = l1_min_box(gamma_star.view(), e.view(), bound.view())
            .map_err(|err| lp_error(err, &format!("adaptive second step, column {}", j + 1)))?;
        second_step.column_mut(j).assign(&col);
    }
    let delta = symmetrise_min_modulus(second_step.view());
    Ok(AclimeSteps {
        eta1,
        first_step_diag,
        truncated_diag,
        second_step,
        delta,
    })
}

/// `A(1) = I − Σ_ℓ A_ℓ`.
pub fn transfer_at_one(fit: &VarFit) -> Array2<f64> {
    let p = fit.p();
    let mut a1 = Array2::eye(p);
    for a in fit.a_matrices() {
        a1 -= &a;
    }
    a1
}

/// `Ω = 2π A(1)ᵀ Δ A(1)`.
pub fn longrun_omega(a1: ArrayView2<f64>, delta: ArrayView2<f64>) -> Array2<f64> {
    a1.t().dot(&delta).dot(&a1) * (2.0 * PI)
}

/// Assembles the precision fit from a VAR fit and an estimate of `Δ`.
pub fn longrun_precision(fit: &VarFit, delta: Array2<f64>, eta: f64, adaptive: bool) -> Result<PrecisionFit> {
    let p = check_square(delta.view(), "precision")?;
    if p != fit.p() {
        return Err(Error::dim("precision and VAR dimensions differ"));
    }
    let a1 = transfer_at_one(fit);
    let omega = longrun_omega(a1.view(), delta.view());
    let pc = partial_correlations(delta.view())?;
    let lrpc = partial_correlations(omega.view())?;
    Ok(PrecisionFit {
        delta,
        omega,
        eta,
        adaptive,
        pc,
        lrpc,
        a1,
    })
}

/// `−M_ij / sqrt(M_ii M_jj)` off the diagonal, ones on it.
pub fn partial_correlations(m: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = check_square(m, "precision")?;
    if let Some(i) = (0..p).find(|&i| !(m[[i, i]] > 0.0)) {
        return Err(Error::Input(format!(
            "precision diagonal entry {} is not positive ({})",
            i + 1,
            m[[i, i]]
        )));
    }
    let scale: Vec<f64> = (0..p).map(|i| m[[i, i]].sqrt()).collect();
    Ok(Array2::from_shape_fn((p, p), |(i, j)| {
        if i == j {
            1.0
        } else {
            -m[[i, j]] / (scale[i] * scale[j])
        }
    }))
}
