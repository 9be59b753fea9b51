use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde_json::json;

use favnet::factor_number::{FactorNumberSelector, DEFAULT_C_GRID, DEFAULT_C_MAX, DEFAULT_IC_VARIANT};
use favnet::networks::{export, extract_granger, extract_undirected, ExportFormat, NetworkKind};
use favnet::panel::{load_panel, write_matrix_csv, TimeSeriesPanel};
use favnet::pipeline::{fit, forecast_document, FactorChoice, FitConfig, ModelDocument, ThresholdChoice, DEFAULT_SEED};
use favnet::precision::{longrun_omega, transfer_at_one};
use favnet::simulate::{sim_restricted, sim_rng, sim_unrestricted, sim_var, InnovationCov, SimSpec};
use favnet::spectral::ModelKind;
use favnet::tuning::{TuningMethod, DEFAULT_FOLDS, DEFAULT_PATH_LENGTH};
use favnet::var_estimation::{VarFit, VarMethod};
use favnet::Error;

#[derive(Parser)]
#[command(name = "favnet", version, about = "Factor-adjusted VAR networks and forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PanelArgs {
    /// CSV panel, one row per time point (a header row of names is optional).
    input: PathBuf,
    /// Rows of the CSV are variables instead of time points.
    #[arg(long)]
    transpose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the factor-adjusted VAR and its networks.
    Fit(FitArgs),
    /// Simulate a panel with known VAR and precision.
    Simulate(SimArgs),
    /// Select the number of factors.
    Factors(FactorsArgs),
    /// Forecast from a fitted model.
    Forecast(ForecastArgs),
    /// Export a network from a fitted model.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lasso,
    Ds,
}

#[derive(Clone, Copy, ValueEnum)]
enum TuningArg {
    Cv,
    Ebic,
}

#[derive(clap::Args)]
struct FitArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// Use the static (restricted) factor model.
    #[arg(long)]
    restricted: bool,
    /// Fix the factor number instead of selecting it.
    #[arg(long, conflicts_with_all = ["er", "ic_variant"])]
    q: Option<usize>,
    /// Information criterion variant (1-6).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    ic_variant: Option<u8>,
    /// Select the factor number by eigenvalue ratio.
    #[arg(long)]
    er: bool,
    /// Maximum factor number considered.
    #[arg(long)]
    q_max: Option<usize>,
    /// Candidate VAR orders, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    var_order: Vec<usize>,
    #[arg(long, value_enum, default_value = "lasso")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "cv")]
    tuning: TuningArg,
    /// eBIC constant.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_PATH_LENGTH)]
    path_length: usize,
    /// off, adaptive, or a numeric threshold.
    #[arg(long, default_value = "off", value_parser = parse_threshold)]
    threshold: ThresholdChoice,
    /// Skip the long-run partial correlations.
    #[arg(long)]
    no_lrpc: bool,
    /// Use ACLIME instead of CLIME for the innovation precision.
    #[arg(long)]
    lrpc_adaptive: bool,
    /// Kernel bandwidth for the spectral estimate.
    #[arg(long)]
    bandwidth: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Where to write the model document.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

fn parse_threshold(s: &str) -> Result<ThresholdChoice, String> {
    match s {
        "off" => Ok(ThresholdChoice::Off),
        "adaptive" => Ok(ThresholdChoice::Adaptive),
        v => match v.parse::<f64>() {
            Ok(t) if t >= 0.0 && t.is_finite() => Ok(ThresholdChoice::Value(t)),
            _ => Err(format!("expected off, adaptive or a non-negative number, got '{v}'")),
        },
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CommonArg {
    None,
    Unrestricted,
    Restricted,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnovationArg {
    Identity,
    Banded,
}

#[derive(clap::Args)]
struct SimArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Number of factor shocks.
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 1)]
    var_order: usize,
    #[arg(long, value_enum, default_value = "unrestricted")]
    common: CommonArg,
    #[arg(long, value_enum, default_value = "identity")]
    innovation: InnovationArg,
    /// Draw innovations from a scaled t distribution with 5 degrees of freedom.
    #[arg(long)]
    heavy_tails: bool,
    #[arg(long)]
    link_prob: Option<f64>,
    #[arg(long, default_value_t = 0.275)]
    coeff: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Panel CSV (rows are time points).
    #[arg(long, default_value = "panel.csv")]
    out: PathBuf,
    /// JSON with the true transition matrices and precisions.
    #[arg(long, default_value = "truth.json")]
    truth: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorMethodArg {
    Ic,
    Er,
}

#[derive(clap::Args)]
struct FactorsArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, value_enum, default_value = "ic")]
    method: FactorMethodArg,
    #[arg(long)]
    restricted: bool,
    #[arg(long, default_value_t = DEFAULT_IC_VARIANT, value_parser = clap::value_parser!(u8).range(1..=6))]
    ic_variant: u8,
    #[arg(long)]
    q_max: Option<usize>,
    /// Write the stability curve as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ForecastArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long)]
    model: PathBuf,
    /// Forecast from this panel instead of the fitting panel.
    #[arg(long)]
    newdata: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    ahead: usize,
    #[arg(long, default_value = "forecast.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetworkArg {
    Granger,
    Pc,
    Lrpc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    EdgelistCsv,
    MatrixCsv,
    Json,
}

#[derive(clap::Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "type", value_enum)]
    kind: NetworkArg,
    #[arg(long, value_enum, default_value = "dot")]
    format: FormatArg,
    /// Entries with magnitude at or below this are dropped.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::Input(_)) => 2,
            CliError::Core(Error::Format { .. } | Error::Data(_) | Error::Dimension(_) | Error::Io(_)) => 3,
            CliError::Core(Error::Numerical(_) | Error::Solver(_) | Error::Selection(_) | Error::Metric(_)) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Core(Error::Io(e.error)))?;
    Ok(())
}

fn matrix_csv(header: Option<&[String]>, m: &Array2<f64>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, header, m)?;
    Ok(buf)
}

fn read_panel_args(args: &PanelArgs, center: bool) -> CliResult<TimeSeriesPanel> {
    Ok(load_panel(&args.input, args.transpose, center)?)
}

fn load_model(path: &Path) -> CliResult<ModelDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?;
    Ok(ModelDocument::from_json(&text)?)
}

fn cmd_fit(a: FitArgs) -> CliResult {
    let panel = read_panel_args(&a.panel, true)?;
    let factors = match (a.q, a.er) {
        (Some(q), _) => FactorChoice::Fixed(q),
        (None, true) => FactorChoice::Er,
        (None, false) => FactorChoice::Ic(a.ic_variant.unwrap_or(DEFAULT_IC_VARIANT)),
    };
    let cfg = FitConfig {
        kind: if a.restricted { ModelKind::Restricted } else { ModelKind::Unrestricted },
        factors,
        q_max: a.q_max,
        bandwidth: a.bandwidth,
        orders: a.var_order,
        method: match a.method {
            MethodArg::Lasso => VarMethod::Lasso,
            MethodArg::Ds => VarMethod::Ds,
        },
        tuning: match a.tuning {
            TuningArg::Cv => TuningMethod::Cv,
            TuningArg::Ebic => TuningMethod::Ebic,
        },
        alpha: a.alpha,
        folds: a.folds,
        path_length: a.path_length,
        threshold: a.threshold,
        lrpc: !a.no_lrpc,
        lrpc_adaptive: a.lrpc_adaptive,
        seed: a.seed,
        ..FitConfig::default()
    };
    let out = fit(&panel, &cfg, Some(a.panel.input.display().to_string()))?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(&a.out, out.document.to_json()?.as_bytes())?;
    print!("{}", out.document.report());
    Ok(())
}

fn nested(m: &Array2<f64>) -> serde_json::Value {
    json!(m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

fn cmd_simulate(a: SimArgs) -> CliResult {
    let spec = SimSpec {
        n: a.n,
        p: a.p,
        q: a.q,
        var_order_d: a.var_order,
        link_prob: a.link_prob,
        coeff_value: a.coeff,
        innovation_cov: match a.innovation {
            InnovationArg::Identity => InnovationCov::Identity,
            InnovationArg::Banded => InnovationCov::Banded,
        },
        heavy_tails: a.heavy_tails,
        seed: a.seed,
        ..SimSpec::new(a.n, a.p)
    };
    let mut rng = sim_rng(a.seed);
    let var = sim_var(&spec, &mut rng)?;
    let common = match a.common {
        CommonArg::None => None,
        CommonArg::Unrestricted => Some(sim_unrestricted(&spec, &mut rng)?.data),
        CommonArg::Restricted => Some(sim_restricted(&spec, &mut rng)?.data),
    };
    let x = match &common {
        Some(chi) => chi + &var.data,
        None => var.data.clone(),
    };
    let p = a.p;
    let mut beta = Array2::zeros((p * a.var_order, p));
    for (l, al) in var.a_mats.iter().enumerate() {
        beta.slice_mut(ndarray::s![l * p..(l + 1) * p, ..]).assign(&al.t());
    }
    let fit = VarFit {
        order_d: a.var_order,
        beta,
        method: VarMethod::Lasso,
        lambda: 0.0,
        gamma_hat: None,
        threshold_applied: None,
        objective_trace: Vec::new(),
        psd_clipped: false,
    };
    let omega = longrun_omega(transfer_at_one(&fit).view(), var.delta.view());
    let truth = json!({
        "seed": a.seed,
        "n": a.n,
        "p": a.p,
        "var_order": a.var_order,
        "A": var.a_mats.iter().map(nested).collect::<Vec<_>>(),
        "Delta": nested(&var.delta),
        "Gamma": nested(&var.gamma),
        "Omega": nested(&omega),
    });
    let header: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
    write_atomic(&a.out, &matrix_csv(Some(&header), &x.t().to_owned())?)?;
    let text = serde_json::to_string_pretty(&truth).map_err(|e| CliError::Core(Error::Io(e.into())))?;
    write_atomic(&a.truth, text.as_bytes())?;
    println!("Simulated {} x {} panel", a.n, a.p);
    Ok(())
}

fn cmd_factors(a: FactorsArgs) -> CliResult {
    let panel = read_panel_args(&a.panel, true)?;
    let kind = if a.restricted { ModelKind::Restricted } else { ModelKind::Unrestricted };
    let selector = FactorNumberSelector::new(&panel, kind, a.q_max)?;
    let sel = match a.method {
        FactorMethodArg::Ic => selector.select_ic(a.ic_variant, DEFAULT_C_MAX, DEFAULT_C_GRID)?,
        FactorMethodArg::Er => selector.select_er()?,
    };
    if let Some(w) = &sel.warning {
        eprintln!("warning: {w}");
    }
    match a.method {
        FactorMethodArg::Er => {
            println!("b,ER");
            for (b, v) in sel.er_curve.iter().enumerate() {
                println!("{},{v}", b + 1);
            }
        }
        FactorMethodArg::Ic => {
            if let Some(c) = sel.c_hat {
                println!("Selected penalty constant: {c}");
            }
        }
    }
    println!("Factor number: {}", sel.q_hat);
    if let Some(path) = &a.out {
        let mut buf = Vec::new();
        sel.write_csv(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    Ok(())
}

fn cmd_forecast(a: ForecastArgs) -> CliResult {
    let doc = load_model(&a.model)?;
    let source = PanelArgs {
        input: a.newdata.clone().unwrap_or_else(|| a.panel.input.clone()),
        transpose: a.panel.transpose,
    };
    let raw = read_panel_args(&source, false)?;
    let res = forecast_document(&doc, raw.values().clone(), a.ahead)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    let header = doc.names.clone().unwrap_or_else(|| raw.labels());
    write_atomic(&a.out, &matrix_csv(Some(&header), &res.forecast_x)?)?;
    Ok(())
}

fn cmd_export(a: ExportArgs) -> CliResult {
    let doc = load_model(&a.model)?;
    let graph = match a.kind {
        NetworkArg::Granger => extract_granger(&doc.var_fit(), a.threshold),
        NetworkArg::Pc | NetworkArg::Lrpc => {
            let prec = doc
                .precision()?
                .ok_or_else(|| CliError::Usage("model was fitted without partial correlations".into()))?;
            let (m, kind) = match a.kind {
                NetworkArg::Pc => (prec.pc, NetworkKind::Pc),
                _ => (prec.lrpc, NetworkKind::Lrpc),
            };
            extract_undirected(m.view(), a.threshold, kind)?
        }
    };
    let graph = match &doc.names {
        Some(names) => graph.with_names(names)?,
        None => graph,
    };
    let format = match a.format {
        FormatArg::Dot => ExportFormat::Dot,
        FormatArg::EdgelistCsv => ExportFormat::EdgelistCsv,
        FormatArg::MatrixCsv => ExportFormat::MatrixCsv,
        FormatArg::Json => ExportFormat::Json,
    };
    let bytes = export(&graph, format)?;
    match &a.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Factors(a) => cmd_factors(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Export(a) => cmd_export(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

