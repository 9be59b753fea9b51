//! Panel ingestion, centering, and sample autocovariances.

use std::io::Read;
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `p x n` panel: rows are variables, columns are time points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPanel {
    values: Array2<f64>,
    mean_x: Array1<f64>,
    centered: bool,
    names: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    /// Builds a panel from a `p x n` matrix, optionally subtracting row means.
    pub fn new(values: Array2<f64>, center: bool) -> Result<Self> {
        let (p, n) = values.dim();
        if p == 0 {
            return Err(Error::dim("panel needs at least one variable"));
        }
        if n < 2 {
            return Err(Error::dim(format!("panel needs n >= 2 time points, got {n}")));
        }
        if let Some(((i, t), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value for variable {} at time {}",
                i + 1,
                t + 1
            )));
        }
        let mut values = values;
        let mean_x = if center {
            let mean = values.mean_axis(Axis(1)).expect("n >= 2");
            for (mut row, m) in values.rows_mut().into_iter().zip(mean.iter()) {
                row.mapv_inplace(|v| v - m);
            }
            mean
        } else {
            Array1::zeros(p)
        };
        Ok(Self {
            values,
            mean_x,
            centered: center,
            names: None,
        })
    }

    /// Centers a `p x n` matrix with externally supplied row means.
    pub fn centered_with(values: Array2<f64>, mean_x: Array1<f64>) -> Result<Self> {
        if mean_x.len() != values.nrows() {
            return Err(Error::dim(format!(
                "{} means for {} variables",
                mean_x.len(),
                values.nrows()
            )));
        }
        let mut panel = Self::new(values, false)?;
        for (mut row, m) in panel.values.rows_mut().into_iter().zip(mean_x.iter()) {
            row.mapv_inplace(|v| v - m);
        }
        panel.mean_x = mean_x;
        panel.centered = true;
        Ok(panel)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::dim(format!(
                "{} names for {} variables",
                names.len(),
                self.p()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mean_x(&self) -> &Array1<f64> {
        &self.mean_x
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Variable labels, falling back to `1..=p`.
    pub fn labels(&self) -> Vec<String> {
        match &self.names {
            Some(n) => n.clone(),
            None => (1..=self.p()).map(|i| i.to_string()).collect(),
        }
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    /// Sub-panel of the first `p_sub` variables and first `n_sub` time points.
    /// Values are taken as stored; no re-centering.
    pub fn leading_block(&self, p_sub: usize, n_sub: usize) -> Result<Self> {
        if p_sub == 0 || p_sub > self.p() || n_sub < 2 || n_sub > self.n() {
            return Err(Error::dim(format!(
                "sub-panel {p_sub}x{n_sub} outside {}x{}",
                self.p(),
                self.n()
            )));
        }
        Ok(Self {
            values: self.values.slice(s![..p_sub, ..n_sub]).to_owned(),
            mean_x: self.mean_x.slice(s![..p_sub]).to_owned(),
            centered: self.centered,
            names: self.names.as_ref().map(|n| n[..p_sub].to_vec()),
        })
    }

    /// Time segment `[start, end)` (0-based), values as stored.
    pub fn time_segment(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.n() || end < start + 2 {
            return Err(Error::dim(format!(
                "time segment [{start}, {end}) invalid for n = {}",
                self.n()
            )));
        }
        Ok(Self {
            values: self.values.slice(s![.., start..end]).to_owned(),
            mean_x: self.mean_x.clone(),
            centered: self.centered,
            names: self.names.clone(),
        })
    }
}

/// Which process an autocovariance sequence describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessLabel {
    X,
    Chi,
    Xi,
}

/// Autocovariance matrices for lags `0..=max_lag`. Negative lags are implied
/// by transposition: `Γ(-l) = Γ(l)ᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcvSequence {
    pub process_label: ProcessLabel,
    matrices: Vec<Array2<f64>>,
}

impl AcvSequence {
    pub fn new(process_label: ProcessLabel, matrices: Vec<Array2<f64>>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::dim("autocovariance sequence needs lag 0"));
        };
        let p = first.nrows();
        for (l, m) in matrices.iter().enumerate() {
            if m.dim() != (p, p) {
                return Err(Error::dim(format!("lag {l} matrix is not {p}x{p}")));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite autocovariance at lag {l}")));
            }
        }
        Ok(Self {
            process_label,
            matrices,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Stored matrix for a non-negative lag.
    pub fn lag(&self, l: usize) -> &Array2<f64> {
        &self.matrices[l]
    }

    /// Γ(l) for any `|l| <= max_lag`, transposing for negative lags.
    pub fn at(&self, l: isize) -> Array2<f64> {
        if l >= 0 {
            self.matrices[l as usize].clone()
        } else {
            self.matrices[(-l) as usize].t().to_owned()
        }
    }

    pub fn matrices(&self) -> &[Array2<f64>] {
        &self.matrices
    }

    /// Keeps lags `0..=max_lag`.
    pub fn truncated(&self, max_lag: usize) -> Result<Self> {
        if max_lag > self.max_lag() {
            return Err(Error::dim(format!(
                "cannot truncate to lag {max_lag}, only {} available",
                self.max_lag()
            )));
        }
        Ok(Self {
            process_label: self.process_label,
            matrices: self.matrices[..=max_lag].to_vec(),
        })
    }
}

/// Reads a CSV panel from disk. Rows are time points unless `transpose` is set.
pub fn load_panel(path: impl AsRef<Path>, transpose: bool, center: bool) -> Result<TimeSeriesPanel> {
    let file = std::fs::File::open(path.as_ref())?;
    read_panel(file, transpose, center)
}

/// Parses a CSV panel. A first row that does not parse as numbers is treated
/// as a header of variable names.
pub fn read_panel<R: Read>(reader: R, transpose: bool, center: bool) -> Result<TimeSeriesPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Format {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        if idx == 0 && parsed.iter().any(|r| r.is_err()) {
            header = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (col, (val, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            let v = val.map_err(|_| Error::Format {
                row: line,
                column: col + 1,
                message: format!("cannot parse {raw:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value {raw:?} at row {line}, column {}",
                    col + 1
                )));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format {
                    row: line,
                    column: row.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::dim("no data rows"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let table = Array2::from_shape_vec((r, c), flat).expect("rectangular by construction");
    // CSV rows are time points by default; internal layout is variables x time
    let values = if transpose { table } else { table.reversed_axes() };
    let values = values.as_standard_layout().to_owned();
    let panel = TimeSeriesPanel::new(values, center)?;
    match header {
        Some(names) if !transpose && names.len() == panel.p() => panel.with_names(names),
        _ => Ok(panel),
    }
}

/// Writes a `rows x cols` matrix as CSV with an optional header.
pub fn write_matrix_csv<W: std::io::Write>(
    writer: W,
    header: Option<&[String]>,
    m: &Array2<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if let Some(h) = header {
        w.write_record(h).map_err(csv_err)?;
    }
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v}")))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Sample autocovariances `Γ(l) = n⁻¹ Σ_{t=l+1}^{n} X_{t-l} X_tᵀ`, divisor `n`
/// at every lag.
pub fn sample_acv(panel: &TimeSeriesPanel, max_lag: usize) -> Result<AcvSequence> {
    let n = panel.n();
    if max_lag >= n {
        return Err(Error::dim(format!("max_lag {max_lag} must be below n = {n}")));
    }
    let x = panel.values();
    let matrices = (0..=max_lag)
        .map(|l| {
            let lead = x.slice(s![.., ..n - l]);
            let lagged = x.slice(s![.., l..]);
            lead.dot(&lagged.t()) / n as f64
        })
        .collect();
    AcvSequence::new(ProcessLabel::X, matrices)
}
