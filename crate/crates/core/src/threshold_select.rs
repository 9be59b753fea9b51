//! Data-driven threshold from a single change point in the edge ratio.
//!
//! As the threshold grows from zero the support first collapses quickly
//! (small spurious entries disappear) and then slowly (true entries). The
//! selected threshold sits where the slope of the edge-to-non-edge ratio
//! changes most, located by a CUSUM statistic over its difference quotients.

use std::io::Write;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 100;

#[derive(Debug, Clone)]
pub struct ThresholdSelection {
    /// `t_1 = 0 < t_2 < … < t_M = |B|_∞`.
    pub candidates: Vec<f64>,
    /// `Ratio_k`, `k = 1..M`.
    pub ratio: Vec<f64>,
    /// `Diff_k`, `k = 2..M`.
    pub diff: Vec<f64>,
    /// `CUSUM_k`, `k = 2..M-1`.
    pub cusum: Vec<f64>,
    /// 1-based index into `candidates`.
    pub k_star: usize,
    pub t_ada: f64,
    pub n_total: usize,
}

impl ThresholdSelection {
    /// Writes `k, t, ratio, cusum` rows; `cusum` is empty at both ends.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,threshold,ratio,cusum")?;
        let m = self.candidates.len();
        for k in 1..=m {
            let cusum = if k >= 2 && k < m {
                format!("{}", self.cusum[k - 2])
            } else {
                String::new()
            };
            writeln!(
                out,
                "{k},{},{},{cusum}",
                self.candidates[k - 1],
                self.ratio[k - 1]
            )?;
        }
        Ok(())
    }
}

fn sorted_magnitudes(b: ArrayView2<f64>) -> Vec<f64> {
    let mut mags: Vec<f64> = b.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    mags.sort_by(f64::total_cmp);
    mags
}

fn grid_from_magnitudes(mags: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < 4 {
        return Err(Error::dim(format!("threshold grid needs at least 4 points, got {m}")));
    }
    let (Some(&lo), Some(&hi)) = (mags.first(), mags.last()) else {
        return Err(Error::Selection("cannot threshold an all-zero matrix".into()));
    };
    if !hi.is_finite() {
        return Err(Error::Data("matrix to threshold has non-finite entries".into()));
    }
    // a single distinct magnitude would collapse the geometric range
    let lo = if lo < hi { lo } else { hi / m as f64 };
    let ratio = (hi / lo).ln() / (m - 2) as f64;
    let mut grid = Vec::with_capacity(m);
    grid.push(0.0);
    for k in 0..m - 1 {
        grid.push(if k == m - 2 { hi } else { lo * (ratio * k as f64).exp() });
    }
    Ok(grid)
}

/// `t_1 = 0` followed by `M − 1` geometrically spaced values from the
/// smallest non-zero `|b_ij|` to `|B|_∞`.
pub fn candidate_grid(b: ArrayView2<f64>, m: usize) -> Result<Vec<f64>> {
    grid_from_magnitudes(&sorted_magnitudes(b), m)
}

/// Selects the threshold for `B`; `n_total` is the number of entries that
/// could be edges (`p²d` for VAR coefficients, `p(p−1)` for off-diagonals).
pub fn select_threshold(b: ArrayView2<f64>, n_total: usize, m: usize) -> Result<ThresholdSelection> {
    let mags = sorted_magnitudes(b);
    let candidates = grid_from_magnitudes(&mags, m)?;
    if mags.len() > n_total {
        return Err(Error::dim(format!(
            "{} non-zero entries exceed the edge count {n_total}",
            mags.len()
        )));
    }
    let support = |t: f64| mags.len() - mags.partition_point(|v| *v <= t);
    let ratio: Vec<f64> = candidates
        .iter()
        .map(|&t| {
            let s = support(t);
            s as f64 / (n_total - s).max(1) as f64
        })
        .collect();
    let diff: Vec<f64> = (1..m)
        .map(|k| (ratio[k] - ratio[k - 1]) / (candidates[k] - candidates[k - 1]))
        .collect();
    // prefix[j] = Diff_2 + … + Diff_{j+1}
    let mut prefix = vec![0.0; m];
    for (j, d) in diff.iter().enumerate() {
        prefix[j + 1] = prefix[j] + d;
    }
    let total = prefix[m - 1];
    let mf = m as f64;
    let cusum: Vec<f64> = (2..m)
        .map(|k| {
            let kf = k as f64;
            let left = prefix[k - 1] / kf;
            let right = (total - prefix[k - 1]) / (mf - kf);
            (kf * (mf - kf) / mf).sqrt() * (left - right).abs()
        })
        .collect();
    let mut best = 0;
    for (i, c) in cusum.iter().enumerate() {
        if *c > cusum[best] {
            best = i;
        }
    }
    let k_star = best + 2;
    Ok(ThresholdSelection {
        t_ada: candidates[k_star - 1],
        candidates,
        ratio,
        diff,
        cusum,
        k_star,
        n_total,
    })
}
