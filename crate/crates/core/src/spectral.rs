//! Bartlett-kernel spectral estimation, dynamic PCA, and factor adjustment of
//! the autocovariances.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, symmetric_eigen};
use crate::panel::{sample_acv, AcvSequence, ProcessLabel, TimeSeriesPanel};

/// Largest imaginary residue tolerated when inverting a spectrum back to real
/// autocovariances, relative to the scale of the result.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-6;

/// Factor model flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Dynamic factors loaded through an infinite lag filter.
    Unrestricted,
    /// Static factor representation.
    Restricted,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Unrestricted => write!(f, "unrestricted"),
            ModelKind::Restricted => write!(f, "restricted"),
        }
    }
}

/// `⌊4 (n / ln n)^{1/3}⌋`, clamped to `[1, n - 1]`.
pub fn default_bandwidth(n: usize) -> Result<usize> {
    if n <= 2 {
        return Err(Error::dim(format!("bandwidth rule needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let m = (4.0 * (nf / nf.ln()).cbrt()).floor() as usize;
    Ok(m.clamp(1, n - 1))
}

/// Bartlett lag window `K(u) = 1 - |u|` on `[-1, 1]`.
pub fn bartlett_weight(lag: usize, m: usize) -> f64 {
    (1.0 - lag as f64 / m as f64).max(0.0)
}

/// Spectral density matrices at the Fourier frequencies `2πk/(2m+1)`,
/// `k = -m..=m`, with per-frequency eigenpairs.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub bandwidth_m: usize,
    /// Indexed by `k + m`.
    pub frequencies: Vec<f64>,
    pub matrices: Vec<Array2<Complex64>>,
    pub eigenvalues: Vec<Array1<f64>>,
    pub eigenvectors: Vec<Array2<Complex64>>,
}

impl SpectralEstimate {
    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Index into the per-frequency vectors for frequency number `k`.
    pub fn index(&self, k: isize) -> usize {
        (k + self.bandwidth_m as isize) as usize
    }

    /// `(2m+1)⁻¹ Σ_k μ_j(ω_k)` for each `j`.
    pub fn averaged_eigenvalues(&self) -> Array1<f64> {
        average_rows(&self.eigenvalues)
    }
}

fn average_rows(rows: &[Array1<f64>]) -> Array1<f64> {
    let mut acc = Array1::zeros(rows[0].len());
    for r in rows {
        acc += r;
    }
    acc / rows.len() as f64
}

fn fourier_frequencies(m: usize) -> Vec<f64> {
    let denom = (2 * m + 1) as f64;
    (-(m as isize)..=m as isize)
        .map(|k| 2.0 * PI * k as f64 / denom)
        .collect()
}

/// `Σ(ω) = (2π)⁻¹ Σ_{|l| <= m} K(l/m) Γ(l) e^{-ilω}`.
fn spectral_matrix(acv: &AcvSequence, m: usize, omega: f64) -> Array2<Complex64> {
    let p = acv.dim();
    let mut re = acv.lag(0).clone();
    let mut im = Array2::<f64>::zeros((p, p));
    for l in 1..m {
        let w = bartlett_weight(l, m);
        let (sin, cos) = (l as f64 * omega).sin_cos();
        let g = acv.lag(l);
        // Γ(l) e^{-ilω} + Γ(l)ᵀ e^{ilω}
        Zip::indexed(&mut re).for_each(|(i, j), r| *r += w * cos * (g[[i, j]] + g[[j, i]]));
        Zip::indexed(&mut im).for_each(|(i, j), v| *v -= w * sin * (g[[i, j]] - g[[j, i]]));
    }
    let scale = 1.0 / (2.0 * PI);
    Zip::from(&re)
        .and(&im)
        .map_collect(|&r, &i| Complex64::new(r * scale, i * scale))
}

fn check_bandwidth(acv: &AcvSequence, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::dim("bandwidth must be positive"));
    }
    if acv.max_lag() < m {
        return Err(Error::dim(format!(
            "bandwidth {m} exceeds the {} available lags",
            acv.max_lag()
        )));
    }
    Ok(())
}

/// Bartlett-kernel spectral estimate with eigendecomposition at every
/// frequency. Negative frequencies are filled in by conjugation.
pub fn bartlett_spectral_density(acv_x: &AcvSequence, m: usize) -> Result<SpectralEstimate> {
    check_bandwidth(acv_x, m)?;
    let frequencies = fourier_frequencies(m);
    let total = 2 * m + 1;
    let mut matrices = vec![Array2::zeros((0, 0)); total];
    let mut eigenvalues = vec![Array1::zeros(0); total];
    let mut eigenvectors = vec![Array2::zeros((0, 0)); total];
    for k in 0..=m {
        let mat = spectral_matrix(acv_x, m, frequencies[m + k]);
        let eig = hermitian_eigen(mat.view());
        if k > 0 {
            matrices[m - k] = mat.mapv(|z| z.conj());
            eigenvalues[m - k] = eig.values.clone();
            eigenvectors[m - k] = eig.vectors.mapv(|z| z.conj());
        }
        matrices[m + k] = mat;
        eigenvalues[m + k] = eig.values;
        eigenvectors[m + k] = eig.vectors;
    }
    Ok(SpectralEstimate {
        bandwidth_m: m,
        frequencies,
        matrices,
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues of the Bartlett spectral estimate at every frequency
/// (`k = -m..=m`), without eigenvectors.
pub fn spectral_eigenvalues(acv_x: &AcvSequence, m: usize) -> Result<Vec<Array1<f64>>> {
    check_bandwidth(acv_x, m)?;
    let frequencies = fourier_frequencies(m);
    let half: Vec<Array1<f64>> = (0..=m)
        .map(|k| hermitian_eigenvalues(spectral_matrix(acv_x, m, frequencies[m + k]).view()))
        .collect();
    Ok((0..2 * m + 1)
        .map(|idx| half[idx.abs_diff(m)].clone())
        .collect())
}

/// Frequency-averaged spectral eigenvalues `(2m+1)⁻¹ Σ_k μ_j(ω_k)`.
pub fn averaged_spectral_eigenvalues(acv_x: &AcvSequence, m: usize) -> Result<Array1<f64>> {
    Ok(average_rows(&spectral_eigenvalues(acv_x, m)?))
}

/// Rank-`q` reconstruction `Σ_{j<=q} μ_j e_j e_j*` at every frequency.
pub fn dynamic_pca_common(spec_x: &SpectralEstimate, q: usize) -> Result<SpectralEstimate> {
    let p = spec_x.dim();
    if q > p {
        return Err(Error::dim(format!("q = {q} exceeds p = {p}")));
    }
    let mut matrices = Vec::with_capacity(spec_x.matrices.len());
    let mut eigenvalues = Vec::with_capacity(spec_x.matrices.len());
    for (vals, vecs) in spec_x.eigenvalues.iter().zip(&spec_x.eigenvectors) {
        let mut chi = Array2::<Complex64>::zeros((p, p));
        for j in 0..q {
            let mu = vals[j];
            let e = vecs.column(j);
            Zip::indexed(&mut chi).for_each(|(a, b), c| *c += e[a] * e[b].conj() * mu);
        }
        let mut kept = Array1::zeros(p);
        kept.slice_mut(ndarray::s![..q]).assign(&vals.slice(ndarray::s![..q]));
        matrices.push(chi);
        eigenvalues.push(kept);
    }
    Ok(SpectralEstimate {
        bandwidth_m: spec_x.bandwidth_m,
        frequencies: spec_x.frequencies.clone(),
        matrices,
        eigenvalues,
        eigenvectors: spec_x.eigenvectors.clone(),
    })
}

/// `Γ(l) = 2π/(2m+1) Σ_k Σ(ω_k) e^{ilω_k}` for `l = 0..=m`.
pub fn inverse_ft_acv(spec: &SpectralEstimate) -> Result<AcvSequence> {
    let m = spec.bandwidth_m;
    let p = spec.dim();
    let scale = 2.0 * PI / (2 * m + 1) as f64;
    let mut out = Vec::with_capacity(m + 1);
    let mut max_im = 0.0f64;
    let mut max_re = 0.0f64;
    for l in 0..=m {
        let mut re = Array2::<f64>::zeros((p, p));
        let mut im = Array2::<f64>::zeros((p, p));
        for (mat, &omega) in spec.matrices.iter().zip(&spec.frequencies) {
            let (sin, cos) = (l as f64 * omega).sin_cos();
            Zip::from(&mut re).and(&mut im).and(mat).for_each(|r, i, z| {
                *r += z.re * cos - z.im * sin;
                *i += z.re * sin + z.im * cos;
            });
        }
        re *= scale;
        im *= scale;
        max_im = im.iter().fold(max_im, |a, v| a.max(v.abs()));
        max_re = re.iter().fold(max_re, |a, v| a.max(v.abs()));
        out.push(re);
    }
    if max_im > IMAGINARY_RESIDUE_TOL * max_re.max(1.0) {
        return Err(Error::Numerical(format!(
            "inverse transform left imaginary residue {max_im:.3e}"
        )));
    }
    AcvSequence::new(ProcessLabel::Chi, out)
}

/// Autocovariances of the observed, common and idiosyncratic processes after
/// factor adjustment.
#[derive(Debug, Clone)]
pub struct FactorAdjustment {
    pub q_or_r: usize,
    pub model_kind: ModelKind,
    pub acv_x: AcvSequence,
    pub acv_chi: AcvSequence,
    pub acv_xi: AcvSequence,
    /// Kernel bandwidth (unrestricted only).
    pub bandwidth_m: Option<usize>,
    /// Leading eigenvectors of `Γ_x(0)` (restricted only), `p x r`.
    pub static_eigvecs: Option<Array2<f64>>,
    pub static_eigvals: Option<Array1<f64>>,
}

fn difference(acv_x: &AcvSequence, acv_chi: &AcvSequence) -> Result<AcvSequence> {
    let mats = acv_x
        .matrices()
        .iter()
        .zip(acv_chi.matrices())
        .map(|(x, c)| x - c)
        .collect();
    AcvSequence::new(ProcessLabel::Xi, mats)
}

/// Frequency-domain factor adjustment with `q` dynamic factors and bandwidth
/// `m`; autocovariances stored for lags `0..=m`.
pub fn factor_adjust_unrestricted(
    panel: &TimeSeriesPanel,
    q: usize,
    m: usize,
) -> Result<FactorAdjustment> {
    factor_adjust_unrestricted_lags(panel, q, m, m)
}

/// As [`factor_adjust_unrestricted`] but storing lags `0..=max(m, max_lag)`.
/// The common-component autocovariance is zero beyond the bandwidth.
pub fn factor_adjust_unrestricted_lags(
    panel: &TimeSeriesPanel,
    q: usize,
    m: usize,
    max_lag: usize,
) -> Result<FactorAdjustment> {
    let p = panel.p();
    if q > p {
        return Err(Error::dim(format!("q = {q} exceeds p = {p}")));
    }
    let lags = max_lag.max(m);
    if lags >= panel.n() {
        return Err(Error::dim(format!(
            "need lags up to {lags} but n = {}",
            panel.n()
        )));
    }
    let acv_x = sample_acv(panel, lags)?;
    let mut chi_mats = if q == 0 {
        vec![Array2::zeros((p, p)); m + 1]
    } else {
        let spec = bartlett_spectral_density(&acv_x, m)?;
        let common = dynamic_pca_common(&spec, q)?;
        inverse_ft_acv(&common)?.matrices().to_vec()
    };
    chi_mats.resize(lags + 1, Array2::zeros((p, p)));
    let acv_chi = AcvSequence::new(ProcessLabel::Chi, chi_mats)?;
    let acv_xi = difference(&acv_x, &acv_chi)?;
    Ok(FactorAdjustment {
        q_or_r: q,
        model_kind: ModelKind::Unrestricted,
        acv_x,
        acv_chi,
        acv_xi,
        bandwidth_m: Some(m),
        static_eigvecs: None,
        static_eigvals: None,
    })
}

/// Time-domain factor adjustment under the static representation:
/// `Γ_χ(l) = E Eᵀ Γ_x(l) E Eᵀ` with `E` the leading `r` eigenvectors of `Γ_x(0)`.
pub fn factor_adjust_restricted(
    panel: &TimeSeriesPanel,
    r: usize,
    max_lag: usize,
) -> Result<FactorAdjustment> {
    let p = panel.p();
    if r > p {
        return Err(Error::dim(format!("r = {r} exceeds p = {p}")));
    }
    let acv_x = sample_acv(panel, max_lag)?;
    let eig = symmetric_eigen(acv_x.lag(0).view());
    let e = eig.vectors.slice(ndarray::s![.., ..r]).to_owned();
    let proj = e.dot(&e.t());
    let chi_mats = acv_x
        .matrices()
        .iter()
        .map(|g| proj.dot(g).dot(&proj))
        .collect();
    let acv_chi = AcvSequence::new(ProcessLabel::Chi, chi_mats)?;
    let acv_xi = difference(&acv_x, &acv_chi)?;
    Ok(FactorAdjustment {
        q_or_r: r,
        model_kind: ModelKind::Restricted,
        acv_x,
        acv_chi,
        acv_xi,
        bandwidth_m: None,
        static_eigvals: Some(eig.values.slice(ndarray::s![..r]).to_owned()),
        static_eigvecs: Some(e),
    })
}

/// Factor model settings shared by full-sample fits and fold segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorArgs {
    pub kind: ModelKind,
    pub q_or_r: usize,
    /// Kernel bandwidth; the default rule for the segment length when unset.
    pub bandwidth: Option<usize>,
}

/// Factor adjustment of `panel` under `args`, storing idiosyncratic lags up
/// to at least `max_lag`.
pub fn factor_adjust(panel: &TimeSeriesPanel, args: &FactorArgs, max_lag: usize) -> Result<FactorAdjustment> {
    match args.kind {
        ModelKind::Unrestricted => {
            let m = match args.bandwidth {
                Some(m) => m,
                None => default_bandwidth(panel.n())?,
            };
            factor_adjust_unrestricted_lags(panel, args.q_or_r, m, max_lag)
        }
        ModelKind::Restricted => factor_adjust_restricted(panel, args.q_or_r, max_lag),
    }
}
