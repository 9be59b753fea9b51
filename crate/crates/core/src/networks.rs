//! Granger causal, contemporaneous and long-run networks and their export.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::var_estimation::{threshold_matrix, VarFit};

/// Largest tolerated `|M_ij − M_ji|` for undirected inputs.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Granger,
    Pc,
    Lrpc,
}

impl FromStr for NetworkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "granger" => Ok(Self::Granger),
            "pc" => Ok(Self::Pc),
            "lrpc" => Ok(Self::Lrpc),
            _ => Err(Error::Input(format!("unknown network type '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// 1-based node index.
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub kind: NetworkKind,
    pub directed: bool,
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub weight_matrix: Array2<f64>,
}

impl NetworkGraph {
    /// Replaces the default `1..p` labels.
    pub fn with_names(mut self, names: &[String]) -> Result<Self> {
        if names.len() != self.nodes.len() {
            return Err(Error::dim(format!(
                "{} names for {} nodes",
                names.len(),
                self.nodes.len()
            )));
        }
        self.nodes = names.to_vec();
        Ok(self)
    }
}

fn default_nodes(p: usize) -> Vec<String> {
    (1..=p).map(|i| i.to_string()).collect()
}

/// Edge `i′ → i` whenever some thresholded `A_ℓ[i, i′]` is non-zero, weighted
/// by the largest absolute coefficient across lags.
pub fn extract_granger(fit: &VarFit, t: f64) -> NetworkGraph {
    let p = fit.p();
    let beta = threshold_matrix(fit.beta.view(), t);
    let mut w = Array2::<f64>::zeros((p, p));
    for l in 0..fit.order_d {
        // A_ℓ = (rows ℓp..(ℓ+1)p of β)ᵀ
        let block = beta.slice(ndarray::s![l * p..(l + 1) * p, ..]);
        for i in 0..p {
            for j in 0..p {
                w[[i, j]] = w[[i, j]].max(block[[j, i]].abs());
            }
        }
    }
    let mut edges = Vec::new();
    for from in 0..p {
        for to in 0..p {
            if w[[to, from]] != 0.0 {
                edges.push(Edge { from: from + 1, to: to + 1, weight: w[[to, from]] });
            }
        }
    }
    NetworkGraph {
        kind: NetworkKind::Granger,
        directed: true,
        nodes: default_nodes(p),
        edges,
        weight_matrix: w,
    }
}

/// Off-diagonal entries with `|·| > t` become undirected edges `i < i′`.
pub fn extract_undirected(m: ArrayView2<f64>, t: f64, kind: NetworkKind) -> Result<NetworkGraph> {
    if kind == NetworkKind::Granger {
        return Err(Error::Input("granger networks are directed".into()));
    }
    let (p, c) = m.dim();
    if p != c {
        return Err(Error::dim(format!("expected a square matrix, got {p}x{c}")));
    }
    for i in 0..p {
        for j in i + 1..p {
            if (m[[i, j]] - m[[j, i]]).abs() > SYMMETRY_TOL {
                return Err(Error::Input(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let mut w = threshold_matrix(m, t);
    w.diag_mut().fill(0.0);
    let mut edges = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if w[[i, j]] != 0.0 {
                edges.push(Edge { from: i + 1, to: j + 1, weight: w[[i, j]] });
            }
        }
    }
    Ok(NetworkGraph {
        kind,
        directed: false,
        nodes: default_nodes(p),
        edges,
        weight_matrix: w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    EdgelistCsv,
    MatrixCsv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Self::Dot),
            "edgelist_csv" | "edgelist" => Ok(Self::EdgelistCsv),
            "matrix_csv" | "matrix" => Ok(Self::MatrixCsv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Input(format!("unknown export format '{s}'"))),
        }
    }
}

fn quote(label: &str) -> String {
    format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot(g: &NetworkGraph) -> String {
    let (head, arrow) = if g.directed { ("digraph", "->") } else { ("graph", "--") };
    let mut s = format!("{head} fnets {{\n");
    for node in &g.nodes {
        let _ = writeln!(s, "  {};", quote(node));
    }
    for e in &g.edges {
        let _ = writeln!(
            s,
            "  {} {arrow} {} [weight={}];",
            quote(&g.nodes[e.from - 1]),
            quote(&g.nodes[e.to - 1]),
            e.weight
        );
    }
    s.push_str("}\n");
    s
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn to_edgelist_csv(g: &NetworkGraph) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["from", "to", "weight"]).map_err(csv_error)?;
    for e in &g.edges {
        w.write_record([
            g.nodes[e.from - 1].as_str(),
            g.nodes[e.to - 1].as_str(),
            &e.weight.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn to_matrix_csv(g: &NetworkGraph) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&g.nodes).map_err(csv_error)?;
    for row in g.weight_matrix.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn export(g: &NetworkGraph, format: ExportFormat) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Dot => Ok(to_dot(g).into_bytes()),
        ExportFormat::EdgelistCsv => to_edgelist_csv(g),
        ExportFormat::MatrixCsv => to_matrix_csv(g),
        ExportFormat::Json => serde_json::to_vec_pretty(g)
            .map_err(|e| Error::Io(std::io::Error::other(e))),
    }
}
