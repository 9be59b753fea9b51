//! Forecasts from a static-factor predictor for the common component and the
//! iterated VAR predictor for the idiosyncratic component.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::panel::{AcvSequence, TimeSeriesPanel};
use crate::spectral::factor_adjust_restricted;
use crate::var_estimation::VarFit;

/// Eigenvalues of `Γ_χ(0)` below this fraction of the largest are dropped.
pub const EIGEN_DROP_RATIO: f64 = 1e-10;

/// Leading eigenpairs of `Γ_χ(0)` used by the static predictor.
#[derive(Debug, Clone)]
pub struct StaticProjector {
    /// `p x r_used`.
    pub vectors: Array2<f64>,
    pub values: Array1<f64>,
    /// Set when eigenvalues had to be dropped.
    pub warning: Option<String>,
}

impl StaticProjector {
    pub fn new(gamma_chi0: ArrayView2<f64>, r: usize) -> Result<Self> {
        let p = gamma_chi0.nrows();
        if r > p {
            return Err(Error::dim(format!("r = {r} exceeds p = {p}")));
        }
        let eig = symmetric_eigen(gamma_chi0);
        let top = eig.values.first().copied().unwrap_or(0.0);
        let kept = (0..r)
            .take_while(|&j| top > 0.0 && eig.values[j] > EIGEN_DROP_RATIO * top)
            .count();
        if r > 0 && kept == 0 {
            return Err(Error::Numerical(
                "common covariance has no positive eigenvalue to invert".into(),
            ));
        }
        let warning = (kept < r).then(|| {
            format!("dropped {} near-zero common eigenvalues; using r = {kept}", r - kept)
        });
        Ok(Self {
            vectors: eig.vectors.slice(s![.., ..kept]).to_owned(),
            values: eig.values.slice(s![..kept]).to_owned(),
            warning,
        })
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// `E Eᵀ X` applied to every column.
    pub fn project(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.vectors.dot(&self.vectors.t().dot(&x))
    }

    /// `Γ_χ(−a) E M⁻¹ Eᵀ x` with `Γ_χ(−a) = Γ_χ(a)ᵀ`.
    pub fn predict(&self, gamma_chi_a: ArrayView2<f64>, x: ArrayView1<f64>) -> Array1<f64> {
        let coords = self.vectors.t().dot(&x) / &self.values;
        gamma_chi_a.t().dot(&self.vectors.dot(&coords))
    }
}

/// In-sample common component (`p x n`) and `h x p` forecasts for
/// `a = 1..=h`.
pub fn common_restricted(
    acv_chi: &AcvSequence,
    r: usize,
    values: ArrayView2<f64>,
    horizon: usize,
) -> Result<(Array2<f64>, Array2<f64>, StaticProjector)> {
    if acv_chi.max_lag() < horizon {
        return Err(Error::dim(format!(
            "common autocovariances stop at lag {}, horizon is {horizon}",
            acv_chi.max_lag()
        )));
    }
    let p = acv_chi.dim();
    if values.nrows() != p || values.ncols() == 0 {
        return Err(Error::dim("panel does not match the common autocovariances"));
    }
    let proj = StaticProjector::new(acv_chi.lag(0).view(), r)?;
    let insample = if proj.rank() == 0 {
        Array2::zeros(values.raw_dim())
    } else {
        proj.project(values)
    };
    let last = values.column(values.ncols() - 1);
    let mut fc = Array2::zeros((horizon, p));
    if proj.rank() > 0 {
        for a in 1..=horizon {
            fc.row_mut(a - 1).assign(&proj.predict(acv_chi.lag(a).view(), last));
        }
    }
    Ok((insample, fc, proj))
}

/// Iterated VAR forecasts `ξ_{n+a|n}`, `a = 1..=h`, as an `h x p` matrix.
pub fn idio_forecast(fit: &VarFit, xi_insample: ArrayView2<f64>, horizon: usize) -> Result<Array2<f64>> {
    if horizon == 0 {
        return Err(Error::Input("forecast horizon must be at least 1".into()));
    }
    let (p, n) = xi_insample.dim();
    if p != fit.p() {
        return Err(Error::dim("idiosyncratic panel and VAR dimensions differ"));
    }
    let d = fit.order_d;
    if n < d {
        return Err(Error::dim(format!("need at least {d} observations, got {n}")));
    }
    let a_mats = fit.a_matrices();
    let mut fc = Array2::<f64>::zeros((horizon, p));
    for a in 1..=horizon {
        let mut next = Array1::<f64>::zeros(p);
        for (l, a_l) in a_mats.iter().enumerate() {
            let lag = l + 1;
            let past = if a > lag {
                fc.row(a - lag - 1).to_owned()
            } else {
                xi_insample.column(n + a - lag - 1).to_owned()
            };
            next += &a_l.dot(&past);
        }
        fc.row_mut(a - 1).assign(&next);
    }
    Ok(fc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon_h: usize,
    /// `h x p`, means included.
    pub forecast_x: Array2<f64>,
    pub common_insample: Array2<f64>,
    pub common_forecast: Array2<f64>,
    pub idio_insample: Array2<f64>,
    pub idio_forecast: Array2<f64>,
    pub r_used: usize,
    pub mean_x: Array1<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Sums the components and adds the means back.
pub fn combine(
    common_insample: Array2<f64>,
    common_forecast: Array2<f64>,
    idio_insample: Array2<f64>,
    idio_forecast: Array2<f64>,
    mean_x: Array1<f64>,
    r_used: usize,
) -> Result<ForecastResult> {
    if common_forecast.dim() != idio_forecast.dim()
        || common_insample.dim() != idio_insample.dim()
        || mean_x.len() != common_forecast.ncols()
    {
        return Err(Error::dim("forecast components have mismatched shapes"));
    }
    let forecast_x = &common_forecast + &idio_forecast + mean_x.view().insert_axis(Axis(0));
    Ok(ForecastResult {
        horizon_h: forecast_x.nrows(),
        forecast_x,
        common_insample,
        common_forecast,
        idio_insample,
        idio_forecast,
        r_used,
        mean_x,
        warnings: Vec::new(),
    })
}

/// Full forecast of a (centered) panel `h` steps ahead with `r` static
/// factors and a fitted VAR for the idiosyncratic part.
pub fn forecast_panel(panel: &TimeSeriesPanel, fit: &VarFit, r: usize, horizon: usize) -> Result<ForecastResult> {
    if horizon == 0 {
        return Err(Error::Input("forecast horizon must be at least 1".into()));
    }
    let adj = factor_adjust_restricted(panel, r, horizon)?;
    let (common_in, common_fc, proj) = common_restricted(&adj.acv_chi, r, panel.values().view(), horizon)?;
    let idio_in = panel.values() - &common_in;
    let idio_fc = idio_forecast(fit, idio_in.view(), horizon)?;
    let mut out = combine(common_in, common_fc, idio_in, idio_fc, panel.mean_x().clone(), proj.rank())?;
    out.warnings.extend(proj.warning);
    Ok(out)
}
