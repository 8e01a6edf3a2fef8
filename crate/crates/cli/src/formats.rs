//! Text formats.
//!
//! * Data: CSV, one sample per row, one variable per column. A first line
//!   with any non-numeric cell is taken as a header and skipped.
//! * Graphs: a `# nodes N` line, then one edge per line with 0-based
//!   indices, `i j` undirected (`i < j`) or `i > j` directed.
//! * Separation sets: `i j : k1 k2 ...`, right side empty for marginal
//!   independence.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same value.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pcskel_core::orient::MixedGraph;
use pcskel_core::{AdjacencyMatrix, DataMatrix, SeparationSets};

use crate::error::CliError;

pub fn read_data(path: &Path) -> Result<(DataMatrix, Vec<u8>), CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    let data = parse_data(&bytes).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok((data, bytes))
}

pub fn parse_data(bytes: &[u8]) -> Result<DataMatrix, CliError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(bytes);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if rows == 0 && width.is_none() && parsed.iter().any(Result::is_err) {
            // Header line.
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::Data(format!("row {line}: expected {expected} columns, found {}", record.len())));
        }
        for (col, v) in parsed.into_iter().enumerate() {
            match v {
                Ok(x) if x.is_finite() => values.push(x),
                _ => {
                    return Err(CliError::Data(format!(
                        "row {line}, column {}: not a finite number: {:?}",
                        col + 1,
                        &record[col]
                    )))
                }
            }
        }
        rows += 1;
    }
    let n = width.unwrap_or(0);
    Ok(DataMatrix::new(rows, n, values)?)
}

pub fn format_data(data: &DataMatrix) -> String {
    let mut out = String::with_capacity(data.values().len() * 20);
    for i in 0..data.samples() {
        for (k, v) in data.row(i).iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Undirected edge list with its node count.
pub fn format_skeleton(skeleton: &AdjacencyMatrix) -> String {
    let mut out = format!("# nodes {}\n", skeleton.dim());
    for (i, j) in skeleton.edges() {
        writeln!(out, "{i} {j}").unwrap();
    }
    out
}

pub fn format_directed(n: usize, edges: &[(usize, usize)]) -> String {
    let mut out = format!("# nodes {n}\n");
    for (a, b) in edges {
        writeln!(out, "{a} > {b}").unwrap();
    }
    out
}

pub fn format_cpdag(g: &MixedGraph) -> String {
    let mut out = format!("# nodes {}\n", g.dim());
    let mut lines: Vec<((usize, usize), bool)> = g.undirected().iter().map(|&e| (e, false)).collect();
    lines.extend(g.directed().iter().map(|&e| (e, true)));
    lines.sort_by_key(|&((a, b), _)| (a.min(b), a.max(b)));
    for ((a, b), directed) in lines {
        if directed {
            writeln!(out, "{a} > {b}").unwrap();
        } else {
            writeln!(out, "{a} {b}").unwrap();
        }
    }
    out
}

pub fn format_sepsets(sepsets: &SeparationSets) -> String {
    let mut out = String::new();
    for ((i, j), set) in sepsets.entries() {
        write!(out, "{i} {j} :").unwrap();
        for k in set {
            write!(out, " {k}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// A parsed edge list. `undirected` pairs are stored `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList {
    pub nodes: usize,
    pub undirected: BTreeSet<(usize, usize)>,
    pub directed: BTreeSet<(usize, usize)>,
}

fn parse_index(token: &str, line: usize) -> Result<usize, CliError> {
    token.parse().map_err(|_| CliError::Data(format!("line {line}: bad vertex index {token:?}")))
}

pub fn parse_edge_list(text: &str) -> Result<EdgeList, CliError> {
    let mut list = EdgeList::default();
    let mut declared = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if let Some(rest) = raw.strip_prefix('#') {
            if let Some(n) = rest.trim().strip_prefix("nodes") {
                declared = Some(parse_index(n.trim(), line)?);
            }
            continue;
        }
        if raw.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let (a, b, directed) = match tokens.as_slice() {
            [a, b] => (parse_index(a, line)?, parse_index(b, line)?, false),
            [a, ">", b] => (parse_index(a, line)?, parse_index(b, line)?, true),
            _ => return Err(CliError::Data(format!("line {line}: expected `i j` or `i > j`, got {raw:?}"))),
        };
        if a == b {
            return Err(CliError::Data(format!("line {line}: self loop at {a}")));
        }
        let key = (a.min(b), a.max(b));
        if list.undirected.contains(&key) || list.directed.contains(&(a, b)) || list.directed.contains(&(b, a)) {
            return Err(CliError::Data(format!("line {line}: duplicate edge {a} {b}")));
        }
        if directed {
            list.directed.insert((a, b));
        } else {
            list.undirected.insert(key);
        }
    }
    let max = list.undirected.iter().chain(&list.directed).map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    list.nodes = match declared {
        Some(n) if n < max => {
            return Err(CliError::Data(format!("edge endpoint {} outside the declared {n} nodes", max - 1)))
        }
        Some(n) => n,
        None => max,
    };
    Ok(list)
}

/// A pair `(lo, hi)` and its separating set.
pub type SepsetEntry = ((usize, usize), Vec<usize>);

pub fn parse_sepsets(text: &str) -> Result<Vec<SepsetEntry>, CliError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let (pair, set) =
            raw.split_once(':').ok_or_else(|| CliError::Data(format!("line {line}: expected `i j : k1 k2 ...`")))?;
        let pair: Vec<&str> = pair.split_whitespace().collect();
        let [i, j] = pair.as_slice() else {
            return Err(CliError::Data(format!("line {line}: expected exactly two vertices before ':'")));
        };
        let (i, j) = (parse_index(i, line)?, parse_index(j, line)?);
        let set = set.split_whitespace().map(|t| parse_index(t, line)).collect::<Result<Vec<_>, _>>()?;
        if i == j || set.contains(&i) || set.contains(&j) {
            return Err(CliError::Data(format!("line {line}: separating set overlaps its pair")));
        }
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(CliError::Data(format!("line {line}: duplicate pair {i} {j}")));
        }
        out.push((key, set));
    }
    Ok(out)
}
