//! Factor number selection: information criteria with stability tuning of
//! the penalty constant over nested sub-panels, and the eigenvalue ratio.

use std::io::Write;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::panel::{sample_acv, TimeSeriesPanel};
use crate::spectral::{averaged_spectral_eigenvalues, default_bandwidth, ModelKind};

/// Number of nested sub-panels used for stability tuning.
pub const SUBSAMPLES: usize = 10;
pub const DEFAULT_C_MAX: f64 = 3.0;
pub const DEFAULT_C_GRID: usize = 200;
pub const DEFAULT_IC_VARIANT: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Ic,
    Er,
}

/// Eigenvalue summary of one (sub-)panel and the sizes its criterion uses.
#[derive(Debug, Clone)]
pub struct EigenSummary {
    /// Descending; frequency-averaged spectral eigenvalues (unrestricted) or
    /// eigenvalues of the lag-zero covariance (restricted).
    pub values: Array1<f64>,
    pub n: usize,
    pub p: usize,
    /// Kernel bandwidth, unused by the restricted criteria.
    pub m: usize,
}

/// Default maximum factor number `min(50, ⌊√min(n−1, p)⌋)`.
pub fn default_q_max(n: usize, p: usize) -> usize {
    let k = (n.saturating_sub(1)).min(p) as f64;
    (k.sqrt().floor() as usize).min(50)
}

fn penalty(variant: u8, kind: ModelKind, n: usize, p: usize, m: usize) -> f64 {
    let (nf, pf) = (n as f64, p as f64);
    match kind {
        ModelKind::Unrestricted => {
            let mf = m as f64;
            let base = pf.min(mf * mf).min((nf / mf).sqrt());
            match variant {
                1 | 4 => (1.0 / (mf * mf) + (mf / nf).sqrt() + 1.0 / pf) * base.ln(),
                2 | 5 => base.powf(-0.5),
                _ => base.ln() / base,
            }
        }
        ModelKind::Restricted => match variant {
            1 | 2 | 4 | 5 => (nf + pf) / (nf * pf) * (nf * pf / (nf + pf)).ln(),
            _ => {
                let k = nf.min(pf);
                k.ln() / k
            }
        },
    }
}

fn check_variant(variant: u8) -> Result<()> {
    if (1..=6).contains(&variant) {
        Ok(())
    } else {
        Err(Error::Input(format!("information criterion variant must be 1..=6, got {variant}")))
    }
}

/// `IC(b, c)` for one criterion variant.
pub fn ic_value(summary: &EigenSummary, b: usize, c: f64, variant: u8, kind: ModelKind) -> Result<f64> {
    check_variant(variant)?;
    let p = summary.values.len();
    if b > p {
        return Err(Error::dim(format!("b = {b} exceeds p = {p}")));
    }
    let tail = summary.values.iter().skip(b).sum::<f64>() / summary.p as f64;
    let fit = if variant >= 4 {
        tail.max(f64::MIN_POSITIVE).ln()
    } else {
        tail
    };
    Ok(fit + b as f64 * c * penalty(variant, kind, summary.n, summary.p, summary.m))
}

/// `argmin_{0<=b<=q_max} IC(b, c)`, ties to the smaller `b`.
pub fn ic_argmin(summary: &EigenSummary, q_max: usize, c: f64, variant: u8, kind: ModelKind) -> Result<usize> {
    let mut best = (0, ic_value(summary, 0, c, variant, kind)?);
    for b in 1..=q_max {
        let v = ic_value(summary, b, c, variant, kind)?;
        if v < best.1 {
            best = (b, v);
        }
    }
    Ok(best.0)
}

/// Computes the eigenvalue summary of a panel for the given model.
pub fn eigen_summary(panel: &TimeSeriesPanel, kind: ModelKind) -> Result<EigenSummary> {
    let (p, n) = (panel.p(), panel.n());
    match kind {
        ModelKind::Unrestricted => {
            let m = default_bandwidth(n)?;
            let acv = sample_acv(panel, m)?;
            Ok(EigenSummary {
                values: averaged_spectral_eigenvalues(&acv, m)?,
                n,
                p,
                m,
            })
        }
        ModelKind::Restricted => {
            let acv = sample_acv(panel, 0)?;
            Ok(EigenSummary {
                values: symmetric_eigenvalues(acv.lag(0).view()),
                n,
                p,
                m: 0,
            })
        }
    }
}

/// Sizes `(n_l, p_l)`, `l = 1..=L`, of the nested sub-panels.
pub fn subsample_sizes(n: usize, p: usize) -> Vec<(usize, usize)> {
    let big_l = SUBSAMPLES;
    (1..=big_l)
        .map(|l| {
            let n_l = n.saturating_sub((big_l - l) * (n / 20));
            let p_l = ((3 * p) as f64 / 4.0 + (l * p) as f64 / 40.0).floor() as usize;
            (n_l, p_l.min(p))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FactorNumberSelection {
    pub method: SelectionMethod,
    pub model_kind: ModelKind,
    pub ic_variant: Option<u8>,
    pub q_hat: usize,
    pub q_max: usize,
    pub c_grid: Vec<f64>,
    /// Full-panel selections `q̂(n, p, c)`.
    pub q_by_c: Vec<usize>,
    /// Sub-panel selections, indexed `[c][l]`.
    pub q_sub_by_c: Vec<Vec<usize>>,
    pub s_of_c: Vec<f64>,
    pub c_hat: Option<f64>,
    /// `ER(b)`, `b = 1..=q_max`.
    pub er_curve: Vec<f64>,
    /// Set when the second stability interval did not exist.
    pub warning: Option<String>,
}

impl FactorNumberSelection {
    /// Writes `c, q_hat, S` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "c,q_hat,S")?;
        for ((c, q), s) in self.c_grid.iter().zip(&self.q_by_c).zip(&self.s_of_c) {
            writeln!(out, "{c},{q},{s}")?;
        }
        Ok(())
    }
}

/// Eigen summaries for the full panel and the nested sub-panels, shared by
/// every criterion variant.
#[derive(Debug, Clone)]
pub struct FactorNumberSelector {
    pub model_kind: ModelKind,
    pub q_max: usize,
    /// Last entry is the full panel.
    pub summaries: Vec<EigenSummary>,
}

impl FactorNumberSelector {
    pub fn new(panel: &TimeSeriesPanel, kind: ModelKind, q_max: Option<usize>) -> Result<Self> {
        let (p, n) = (panel.p(), panel.n());
        let q_max = q_max.unwrap_or_else(|| default_q_max(n, p));
        if q_max >= p {
            return Err(Error::dim(format!("maximum factor number {q_max} must be below p = {p}")));
        }
        let mut summaries = Vec::with_capacity(SUBSAMPLES);
        for (n_l, p_l) in subsample_sizes(n, p) {
            if n_l < 3 || p_l < 1 || p_l < q_max {
                return Err(Error::dim(format!(
                    "sub-panel {p_l}x{n_l} too small for factor number selection"
                )));
            }
            summaries.push(eigen_summary(&panel.leading_block(p_l, n_l)?, kind)?);
        }
        Ok(Self {
            model_kind: kind,
            q_max,
            summaries,
        })
    }

    fn full(&self) -> &EigenSummary {
        self.summaries.last().expect("at least one summary")
    }

    /// Information-criterion selection with the penalty constant tuned on
    /// `grid_size` equally spaced points of `(0, c_max]`.
    pub fn select_ic(&self, variant: u8, c_max: f64, grid_size: usize) -> Result<FactorNumberSelection> {
        check_variant(variant)?;
        if !(c_max > 0.0) || grid_size == 0 {
            return Err(Error::Input("penalty grid must be non-empty with c_max > 0".into()));
        }
        let c_grid: Vec<f64> = (1..=grid_size)
            .map(|i| c_max * i as f64 / grid_size as f64)
            .collect();
        let mut q_sub_by_c = Vec::with_capacity(grid_size);
        let mut s_of_c = Vec::with_capacity(grid_size);
        for &c in &c_grid {
            let qs = self
                .summaries
                .iter()
                .map(|s| ic_argmin(s, self.q_max, c, variant, self.model_kind))
                .collect::<Result<Vec<_>>>()?;
            s_of_c.push(sample_variance(&qs));
            q_sub_by_c.push(qs);
        }
        let q_by_c: Vec<usize> = q_sub_by_c.iter().map(|qs| *qs.last().unwrap()).collect();
        let (idx, warning) = stable_index(&s_of_c);
        Ok(FactorNumberSelection {
            method: SelectionMethod::Ic,
            model_kind: self.model_kind,
            ic_variant: Some(variant),
            q_hat: q_by_c[idx],
            q_max: self.q_max,
            c_hat: Some(c_grid[idx]),
            c_grid,
            q_by_c,
            q_sub_by_c,
            s_of_c,
            er_curve: Vec::new(),
            warning,
        })
    }

    /// Eigenvalue-ratio selection on the full panel.
    pub fn select_er(&self) -> Result<FactorNumberSelection> {
        let er_curve = eigen_ratios(&self.full().values, self.q_max)?;
        Ok(FactorNumberSelection {
            method: SelectionMethod::Er,
            model_kind: self.model_kind,
            ic_variant: None,
            q_hat: er_argmax(&er_curve),
            q_max: self.q_max,
            c_grid: Vec::new(),
            q_by_c: Vec::new(),
            q_sub_by_c: Vec::new(),
            s_of_c: Vec::new(),
            c_hat: None,
            er_curve,
            warning: None,
        })
    }
}

fn sample_variance(qs: &[usize]) -> f64 {
    let k = qs.len() as f64;
    if qs.len() < 2 {
        return 0.0;
    }
    let mean = qs.iter().sum::<usize>() as f64 / k;
    qs.iter().map(|&q| (q as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0)
}

/// Index of the first point of the second zero-variance run; falls back to
/// the last zero-variance point, then to the smallest variance.
fn stable_index(s_of_c: &[f64]) -> (usize, Option<String>) {
    let mut runs = Vec::new();
    let mut in_run = false;
    for (i, &s) in s_of_c.iter().enumerate() {
        if s == 0.0 && !in_run {
            runs.push(i);
        }
        in_run = s == 0.0;
    }
    if runs.len() >= 2 {
        return (runs[1], None);
    }
    if let Some(last) = s_of_c.iter().rposition(|&s| s == 0.0) {
        return (
            last,
            Some("no second stability interval; used the last zero-variance constant".into()),
        );
    }
    let mut best = 0;
    for (i, &s) in s_of_c.iter().enumerate() {
        if s < s_of_c[best] {
            best = i;
        }
    }
    (
        best,
        Some("no stability interval; used the constant with the smallest variance".into()),
    )
}

/// `ER(b) = Σμ_b / Σμ_{b+1}`, `b = 1..=q_max`. Frequency sums and averages
/// give the same ratios.
pub fn eigen_ratios(values: &Array1<f64>, q_max: usize) -> Result<Vec<f64>> {
    if q_max == 0 || q_max >= values.len() {
        return Err(Error::dim(format!(
            "eigenvalue ratio needs 1 <= q_max < p, got q_max = {q_max}, p = {}",
            values.len()
        )));
    }
    Ok((1..=q_max)
        .map(|b| values[b - 1] / values[b].max(f64::MIN_POSITIVE))
        .collect())
}

/// 1-based position of the largest ratio, first index on ties.
pub fn er_argmax(ratios: &[f64]) -> usize {
    let mut best = 0;
    for (i, r) in ratios.iter().enumerate() {
        if *r > ratios[best] {
            best = i;
        }
    }
    best + 1
}

/// Information-criterion selection with default grid settings.
pub fn select_q_ic(
    panel: &TimeSeriesPanel,
    kind: ModelKind,
    variant: u8,
    q_max: Option<usize>,
) -> Result<FactorNumberSelection> {
    FactorNumberSelector::new(panel, kind, q_max)?.select_ic(variant, DEFAULT_C_MAX, DEFAULT_C_GRID)
}

/// Eigenvalue-ratio selection.
pub fn select_q_er(panel: &TimeSeriesPanel, kind: ModelKind, q_max: Option<usize>) -> Result<FactorNumberSelection> {
    let (p, n) = (panel.p(), panel.n());
    let q_max = q_max.unwrap_or_else(|| default_q_max(n, p));
    if q_max >= p {
        return Err(Error::dim(format!("maximum factor number {q_max} must be below p = {p}")));
    }
    let summary = eigen_summary(panel, kind)?;
    let er_curve = eigen_ratios(&summary.values, q_max)?;
    Ok(FactorNumberSelection {
        method: SelectionMethod::Er,
        model_kind: kind,
        ic_variant: None,
        q_hat: er_argmax(&er_curve),
        q_max,
        c_grid: Vec::new(),
        q_by_c: Vec::new(),
        q_sub_by_c: Vec::new(),
        s_of_c: Vec::new(),
        c_hat: None,
        er_curve,
        warning: None,
    })
}
