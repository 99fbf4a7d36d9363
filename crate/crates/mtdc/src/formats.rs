//! Text formats: edge lists, network JSON, sweep CSV and trajectory CSV.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! everything read back is bit-identical to what was written.

use std::fmt::Write as _;
use std::path::Path;

use mtdc_core::network::Edge;
use mtdc_core::{Error, Network, ScalingRecord, StateLabel, Trajectory};
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

/// Whitespace-separated `i j R` lines; `#` starts a comment. The node count
/// is one more than the largest index.
pub fn parse_edge_list(text: &str) -> Result<Network, FormatError> {
    let mut edges = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(k + 1, format!("expected `i j R`, found {} fields", fields.len())));
        }
        let index = |s: &str| s.parse::<usize>().map_err(|e| parse_err(k + 1, format!("node index {s:?}: {e}")));
        let r = fields[2].parse::<f64>().map_err(|e| parse_err(k + 1, format!("resistance {:?}: {e}", fields[2])))?;
        edges.push(Edge::new(index(fields[0])?, index(fields[1])?, r));
    }
    let n = edges.iter().map(|e| e.i.max(e.j) + 1).max().unwrap_or(0);
    Ok(Network::new(n, edges)?)
}

pub fn write_edge_list(net: &Network) -> String {
    let mut out = format!("# {} nodes\n# i j R\n", net.node_count());
    for e in net.edges() {
        writeln!(out, "{} {} {}", e.i, e.j, e.resistance).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkJson {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<Vec<i64>>>,
}

pub fn network_to_json(net: &Network) -> String {
    let doc = NetworkJson {
        n: net.node_count(),
        edges: net.edges().iter().map(|e| (e.i, e.j, e.resistance)).collect(),
        coords: net.coords().map(<[Vec<i64>]>::to_vec),
    };
    serde_json::to_string_pretty(&doc).expect("plain data") + "\n"
}

/// `{"n": .., "edges": [[i, j, R], ..], "coords": [[..], ..]}`; `coords` is
/// optional and needed only for h-fuzz generation.
pub fn parse_network_json(text: &str) -> Result<Network, FormatError> {
    let doc: NetworkJson = serde_json::from_str(text)?;
    let edges = doc.edges.iter().map(|&(i, j, r)| Edge::new(i, j, r)).collect();
    let net = Network::new(doc.n, edges)?;
    Ok(match doc.coords {
        Some(coords) => net.with_coords(coords)?,
        None => net,
    })
}

/// Reads a network file, JSON if the extension is `.json` and an edge list
/// otherwise.
pub fn load_network(path: &Path) -> Result<Network, FormatError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_network_json(&text)
    } else {
        parse_edge_list(&text)
    }
}

/// Header `family,n,h2_slack,h2_droop,h2_dapi,kstar,kirchhoff`.
pub fn sweep_to_csv(records: &[ScalingRecord]) -> Result<String, FormatError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["family", "n", "h2_slack", "h2_droop", "h2_dapi", "kstar", "kirchhoff"])?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Io { path: "<memory>".into(), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Voltages of `nodes` over time, header `t,V_<i>,...`. Every node must be a
/// voltage state of the trajectory (the grounded bus of a slack model is not).
pub fn export_trajectory(traj: &Trajectory, nodes: &[usize]) -> Result<String, Error> {
    let columns = nodes
        .iter()
        .map(|&node| {
            traj.state_labels
                .iter()
                .position(|l| *l == StateLabel::Voltage(node))
                .ok_or(Error::IndexOutOfRange { index: node, len: traj.state_labels.len() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::from("t");
    for node in nodes {
        write!(out, ",V_{node}").unwrap();
    }
    out.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        write!(out, "{t}").unwrap();
        for &c in &columns {
            write!(out, ",{}", x[c]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    /// One row per time, one entry per node.
    pub values: Vec<Vec<f64>>,
}

pub fn parse_trajectory_csv(text: &str) -> Result<TrajectoryTable, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("t") {
        return Err(parse_err(1, "first column must be `t`"));
    }
    let nodes = header
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("V_")
                .and_then(|i| i.parse().ok())
                .ok_or_else(|| parse_err(1, format!("bad column {h:?}")))
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| parse_err(k + 2, format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        times.push(nums[0]);
        values.push(nums[1..].to_vec());
    }
    Ok(TrajectoryTable { nodes, times, values })
}
