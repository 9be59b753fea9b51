//! End-to-end fitting: factor number, factor adjustment, VAR tuning and
//! estimation, thresholding and the long-run precision; plus the serialized
//! model document and forecasting from it.

use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_number::{FactorNumberSelection, FactorNumberSelector, DEFAULT_C_GRID, DEFAULT_C_MAX, DEFAULT_IC_VARIANT};
use crate::forecast::{forecast_panel, ForecastResult};
use crate::panel::TimeSeriesPanel;
use crate::precision::{aclime, clime, longrun_precision, PrecisionFit};
use crate::spectral::{default_bandwidth, factor_adjust, FactorArgs, ModelKind};
use crate::threshold_select::{select_threshold, ThresholdSelection, DEFAULT_GRID_SIZE};
use crate::tuning::{
    cv_delta, cv_var, ebic_var, eta_grid, lambda_grid, EtaTuning, SegmentVar, TuningMethod, VarTuning,
    DEFAULT_FOLDS, DEFAULT_PATH_LENGTH,
};
use crate::var_estimation::{build_yule_walker, estimate_var, innovation_covariance, FistaOptions, VarFit, VarMethod};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 111;
pub const DEFAULT_EBIC_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorChoice {
    Fixed(usize),
    Ic(u8),
    Er,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdChoice {
    Off,
    Adaptive,
    Value(f64),
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub kind: ModelKind,
    pub factors: FactorChoice,
    pub q_max: Option<usize>,
    pub bandwidth: Option<usize>,
    pub orders: Vec<usize>,
    pub method: VarMethod,
    pub tuning: TuningMethod,
    pub alpha: f64,
    pub folds: usize,
    pub path_length: usize,
    pub threshold: ThresholdChoice,
    pub lrpc: bool,
    pub lrpc_adaptive: bool,
    pub seed: u64,
    pub fista: FistaOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Unrestricted,
            factors: FactorChoice::Ic(DEFAULT_IC_VARIANT),
            q_max: None,
            bandwidth: None,
            orders: vec![1],
            method: VarMethod::Lasso,
            tuning: TuningMethod::Cv,
            alpha: DEFAULT_EBIC_ALPHA,
            folds: DEFAULT_FOLDS,
            path_length: DEFAULT_PATH_LENGTH,
            threshold: ThresholdChoice::Off,
            lrpc: true,
            lrpc_adaptive: false,
            seed: DEFAULT_SEED,
            fista: FistaOptions::default(),
        }
    }
}

/// Row-major nested-array (de)serialization of matrices.
pub mod nested {
    use ndarray::Array2;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(rows).map_err(D::Error::custom)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Array2<f64>, String> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err("ragged matrix rows".into());
        }
        Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect()).map_err(|e| e.to_string())
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<Array2<f64>>, s: S) -> Result<S::Ok, S::Error> {
            match m {
                Some(m) => super::serialize(m, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Array2<f64>>, D::Error> {
            match Option::<Vec<Vec<f64>>>::deserialize(d)? {
                Some(rows) => from_rows(rows).map(Some).map_err(D::Error::custom),
                None => Ok(None),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSection {
    pub order: usize,
    pub method: VarMethod,
    pub lambda: f64,
    #[serde(with = "nested")]
    pub beta: Array2<f64>,
    #[serde(rename = "Gamma_hat", with = "nested::option", default)]
    pub gamma_hat: Option<Array2<f64>>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrpcSection {
    pub eta: f64,
    pub adaptive: bool,
    #[serde(rename = "Delta", with = "nested")]
    pub delta: Array2<f64>,
    #[serde(rename = "Omega", with = "nested")]
    pub omega: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub input: Option<String>,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
    pub version: String,
}

/// Everything needed to report, export and forecast from a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub model_kind: ModelKind,
    pub q_or_r: usize,
    pub bandwidth: Option<usize>,
    pub var: VarSection,
    pub lrpc: Option<LrpcSection>,
    pub mean_x: Vec<f64>,
    /// Static factor number used by the forecaster.
    pub forecast_r: usize,
    pub names: Option<Vec<String>>,
    pub provenance: Provenance,
}

impl ModelDocument {
    pub fn p(&self) -> usize {
        self.mean_x.len()
    }

    pub fn var_fit(&self) -> VarFit {
        VarFit {
            order_d: self.var.order,
            beta: self.var.beta.clone(),
            method: self.var.method,
            lambda: self.var.lambda,
            gamma_hat: self.var.gamma_hat.clone(),
            threshold_applied: self.var.threshold,
            objective_trace: Vec::new(),
            psd_clipped: false,
        }
    }

    pub fn precision(&self) -> Result<Option<PrecisionFit>> {
        match &self.lrpc {
            Some(l) => longrun_precision(&self.var_fit(), l.delta.clone(), l.eta, l.adaptive).map(Some),
            None => Ok(None),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(std::io::Error::other(e)))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s).map_err(|e| Error::Input(format!("model document: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "model schema version {} is not supported (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        let p = doc.p();
        let v = &doc.var;
        if v.order == 0 || v.beta.dim() != (v.order * p, p) {
            return Err(Error::Input("model coefficient matrix does not match p and the order".into()));
        }
        Ok(doc)
    }

    /// Non-zero coefficients and their total count.
    pub fn nonzero(&self) -> (usize, usize) {
        (self.var.beta.iter().filter(|v| **v != 0.0).count(), self.var.beta.len())
    }

    /// Printable summary.
    pub fn report(&self) -> String {
        let (k, total) = self.nonzero();
        let mut s = String::new();
        s.push_str(&format!("Factor-adjusted VAR with {} factor model\n", self.model_kind));
        s.push_str(&format!("Factor number: {}\n", self.q_or_r));
        if let Some(m) = self.bandwidth {
            s.push_str(&format!("Bandwidth: {m}\n"));
        }
        s.push_str(&format!("VAR order: {}\n", self.var.order));
        s.push_str(&format!("VAR estimation method: {}\n", self.var.method));
        s.push_str(&format!("Penalty: {}\n", self.var.lambda));
        if let Some(t) = self.var.threshold {
            s.push_str(&format!("Threshold: {t}\n"));
        }
        s.push_str(&format!("Non-zero entries: {k}/{total}\n"));
        match &self.lrpc {
            Some(l) => s.push_str(&format!(
                "Long-run partial correlations: {} with eta = {}\n",
                if l.adaptive { "ACLIME" } else { "CLIME" },
                l.eta
            )),
            None => s.push_str("Long-run partial correlations: not estimated\n"),
        }
        s
    }
}

/// Intermediate results of [`fit`].
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub document: ModelDocument,
    pub factor_selection: Option<FactorNumberSelection>,
    pub var_tuning: VarTuning,
    pub threshold_selection: Option<ThresholdSelection>,
    pub fit: VarFit,
    pub eta_tuning: Option<EtaTuning>,
    pub precision: Option<PrecisionFit>,
    pub warnings: Vec<String>,
}

fn select_factors(panel: &TimeSeriesPanel, kind: ModelKind, choice: FactorChoice, q_max: Option<usize>) -> Result<FactorNumberSelection> {
    let sel = FactorNumberSelector::new(panel, kind, q_max)?;
    match choice {
        FactorChoice::Ic(v) => sel.select_ic(v, DEFAULT_C_MAX, DEFAULT_C_GRID),
        FactorChoice::Er => sel.select_er(),
        FactorChoice::Fixed(_) => unreachable!("fixed factor number needs no selection"),
    }
}

/// Fits the full model to a centered panel.
pub fn fit(panel: &TimeSeriesPanel, cfg: &FitConfig, input: Option<String>) -> Result<FitOutput> {
    if cfg.orders.is_empty() || cfg.orders.contains(&0) {
        return Err(Error::Input("VAR order candidates must be positive".into()));
    }
    let mut warnings = Vec::new();
    let (q, factor_selection) = match cfg.factors {
        FactorChoice::Fixed(q) => (q, None),
        choice => {
            let s = select_factors(panel, cfg.kind, choice, cfg.q_max)?;
            warnings.extend(s.warning.clone());
            (s.q_hat, Some(s))
        }
    };
    let bandwidth = match cfg.kind {
        ModelKind::Unrestricted => Some(match cfg.bandwidth {
            Some(m) => m,
            None => default_bandwidth(panel.n())?,
        }),
        ModelKind::Restricted => None,
    };
    let args = FactorArgs { kind: cfg.kind, q_or_r: q, bandwidth };
    let max_order = *cfg.orders.iter().max().expect("non-empty");
    let adj = factor_adjust(panel, &args, max_order)?;

    let grid_sys = build_yule_walker(&adj.acv_xi, max_order)?;
    let grid = lambda_grid(grid_sys.small_g.view(), cfg.method, cfg.path_length)?;
    let var_tuning = match cfg.tuning {
        TuningMethod::Cv => cv_var(panel, &args, cfg.method, &grid, &cfg.orders, cfg.folds, cfg.fista)?,
        TuningMethod::Ebic => ebic_var(&adj.acv_xi, panel.n(), cfg.method, &grid, &cfg.orders, cfg.alpha, cfg.fista)?,
    };
    let sys = build_yule_walker(&adj.acv_xi, var_tuning.d_hat)?;
    let mut var_fit = estimate_var(&sys, cfg.method, var_tuning.lambda_hat, cfg.fista)?;
    let mut threshold_selection = None;
    match cfg.threshold {
        ThresholdChoice::Off => {}
        ThresholdChoice::Value(t) => var_fit = var_fit.thresholded(t),
        ThresholdChoice::Adaptive => {
            if var_fit.beta.iter().any(|v| *v != 0.0) {
                let p = var_fit.p();
                let sel = select_threshold(var_fit.beta.view(), p * p * var_fit.order_d, DEFAULT_GRID_SIZE)?;
                var_fit = var_fit.thresholded(sel.t_ada);
                threshold_selection = Some(sel);
            } else {
                warnings.push("all coefficients are zero; no threshold applied".into());
            }
        }
    }
    let gamma = innovation_covariance(&adj.acv_xi, &var_fit)?;
    var_fit.gamma_hat = Some(gamma.clone());

    let (eta_tuning, precision) = if cfg.lrpc {
        let segment = SegmentVar {
            method: cfg.method,
            lambda: var_tuning.lambda_hat,
            order: var_tuning.d_hat,
            opts: cfg.fista,
        };
        let grid_eta = eta_grid(gamma.view(), cfg.path_length)?;
        let tuned = cv_delta(panel, &args, &segment, &grid_eta, cfg.lrpc_adaptive, cfg.folds)?;
        let delta = if cfg.lrpc_adaptive {
            aclime(gamma.view(), tuned.eta_hat, panel.n())?
        } else {
            clime(gamma.view(), tuned.eta_hat)?
        };
        let prec = longrun_precision(&var_fit, delta, tuned.eta_hat, cfg.lrpc_adaptive)?;
        (Some(tuned), Some(prec))
    } else {
        (None, None)
    };

    let forecast_r = match cfg.kind {
        ModelKind::Restricted => q,
        ModelKind::Unrestricted if q == 0 => 0,
        ModelKind::Unrestricted => {
            let s = select_factors(panel, ModelKind::Restricted, FactorChoice::Ic(DEFAULT_IC_VARIANT), cfg.q_max)?;
            s.q_hat
        }
    };

    let document = ModelDocument {
        schema_version: SCHEMA_VERSION,
        model_kind: cfg.kind,
        q_or_r: q,
        bandwidth,
        var: VarSection {
            order: var_fit.order_d,
            method: var_fit.method,
            lambda: var_fit.lambda,
            beta: var_fit.beta.clone(),
            gamma_hat: var_fit.gamma_hat.clone(),
            threshold: var_fit.threshold_applied,
        },
        lrpc: precision.as_ref().map(|p| LrpcSection {
            eta: p.eta,
            adaptive: p.adaptive,
            delta: p.delta.clone(),
            omega: p.omega.clone(),
        }),
        mean_x: panel.mean_x().to_vec(),
        forecast_r,
        names: panel.names().map(<[String]>::to_vec),
        provenance: Provenance {
            seed: cfg.seed,
            input,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    Ok(FitOutput {
        document,
        factor_selection,
        var_tuning,
        threshold_selection,
        fit: var_fit,
        eta_tuning,
        precision,
        warnings,
    })
}

/// Forecasts `horizon` steps past the end of `values` (`p x n`, uncentered),
/// centering with the model's stored means.
pub fn forecast_document(doc: &ModelDocument, values: Array2<f64>, horizon: usize) -> Result<ForecastResult> {
    if values.nrows() != doc.p() {
        return Err(Error::dim(format!(
            "panel has {} variables, model has {}",
            values.nrows(),
            doc.p()
        )));
    }
    let panel = TimeSeriesPanel::centered_with(values, Array1::from(doc.mean_x.clone()))?;
    forecast_panel(&panel, &doc.var_fit(), doc.forecast_r, horizon)
}
