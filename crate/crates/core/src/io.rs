//! CSV loaders for graphs and signals, and schema-checked CSV writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| parse_err(path, 0, e.to_string()))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn header_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

/// Reads an undirected graph from a `src,dst[,weight]` edge list with
/// 0-based node ids. Each edge may appear in one or both directions; the
/// node count is the largest id plus one unless `n_nodes` is given.
pub fn load_edge_list(path: &Path, n_nodes: Option<usize>) -> Result<Graph> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let weighted = match cols.as_slice() {
        ["src", "dst"] => false,
        ["src", "dst", "weight"] => true,
        _ => return Err(parse_err(path, 1, format!("expected header src,dst[,weight], got {}", cols.join(",")))),
    };
    let mut edges: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = header_line(&rec);
        let id = |i: usize| -> Result<usize> {
            rec[i]
                .parse::<usize>()
                .map_err(|_| parse_err(path, line, format!("invalid node id {:?}", &rec[i])))
        };
        let (i, j) = (id(0)?, id(1)?);
        let w = if weighted && !rec[2].is_empty() {
            rec[2]
                .parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("invalid weight {:?}", &rec[2])))?
        } else {
            1.0
        };
        if i == j {
            return Err(parse_err(path, line, format!("self-loop on node {i}")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(parse_err(path, line, format!("weight must be positive, got {w}")));
        }
        let key = (i.min(j), i.max(j));
        if let Some(&(prev, prev_line)) = edges.get(&key) {
            if prev != w {
                return Err(parse_err(
                    path,
                    line,
                    format!("edge {}-{} has weight {w} but {prev} on line {prev_line}", key.0, key.1),
                ));
            }
        } else {
            edges.insert(key, (w, line));
        }
    }
    let max_id = edges.keys().map(|&(_, j)| j).max();
    let n = match (n_nodes, max_id) {
        (Some(n), Some(m)) if m >= n => {
            return Err(parse_err(path, 0, format!("node id {m} exceeds node count {n}")));
        }
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => return Err(parse_err(path, 0, "edge list is empty")),
    };
    let triples: Vec<_> = edges.iter().map(|(&(i, j), &(w, _))| (i, j, w)).collect();
    Graph::from_edges(n, &triples)
}

/// Reads `node,value` or `node,sig_0,…` into an `N × S` matrix. Every node
/// `0..N` must appear exactly once.
pub fn load_signals(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let valid = match cols.as_slice() {
        ["node", "value"] => true,
        ["node", rest @ ..] if !rest.is_empty() => rest
            .iter()
            .enumerate()
            .all(|(k, c)| *c == format!("sig_{k}")),
        _ => false,
    };
    if !valid {
        return Err(parse_err(
            path,
            1,
            format!("expected header node,value or node,sig_0,..., got {}", cols.join(",")),
        ));
    }
    let width = cols.len() - 1;
    let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = header_line(&rec);
        let node = rec[0]
            .parse::<usize>()
            .map_err(|_| parse_err(path, line, format!("invalid node id {:?}", &rec[0])))?;
        let values = (1..=width)
            .map(|c| {
                rec[c]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("invalid value {:?}", &rec[c])))
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(node, values).is_some() {
            return Err(parse_err(path, line, format!("node {node} listed twice")));
        }
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_err(path, 0, "signal file is empty"));
    }
    if let Some((&last, _)) = rows.iter().next_back() {
        if last != n - 1 {
            return Err(parse_err(path, 0, format!("node ids must cover 0..{n}, found id {last}")));
        }
    }
    let flat: Vec<f64> = rows.into_values().flatten().collect();
    Ok(Array2::from_shape_vec((n, width), flat).expect("rows have equal width"))
}

/// Writes `node,sig_0,…` (or `node,value` for one column).
pub fn write_signals(path: &Path, signals: &Array2<f64>) -> Result<()> {
    let mut header = vec!["node".to_string()];
    if signals.ncols() == 1 {
        header.push("value".into());
    } else {
        header.extend((0..signals.ncols()).map(|k| format!("sig_{k}")));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for (i, row) in signals.rows().into_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` under `header`, checking that each serialized row has
/// exactly the header's fields in order.
pub fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut buf = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    buf.write_record(header)?;
    let file = path.display().to_string();
    for row in rows {
        let mut one = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
        one.serialize(row)?;
        let bytes = one.into_inner().map_err(|e| Error::Schema {
            file: file.clone(),
            msg: e.to_string(),
        })?;
        let mut rdr = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
        let got: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        if got != header {
            return Err(Error::Schema {
                file,
                msg: format!("row fields {got:?} do not match header {header:?}"),
            });
        }
        buf.serialize(row)?;
    }
    let bytes = buf.into_inner().map_err(|e| Error::Schema {
        file: file.clone(),
        msg: e.to_string(),
    })?;
    File::create(path)?.write_all(&bytes)?;
    Ok(())
}
