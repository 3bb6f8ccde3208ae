//! Text formats for graphs.
//!
//! Two interchangeable formats, both line-oriented with `#` comments:
//!
//! ```text
//! rotgraph <n> <d> [directed]
//! <v> <i> <u> <j>        # n·d lines: slot i of v leads to slot j of u
//! ```
//!
//! ```text
//! edgelist <n> <d>
//! <u> <v>                # n·d/2 lines; slots assigned in line order
//! ```
//!
//! Writers always emit the rotation form, vertex-major, so output is
//! canonical and byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::RotationGraph;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(no, line)| {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        }
        .trim();
        if line.is_empty() {
            None
        } else {
            Some((no + 1, line))
        }
    })
}

fn parse_fields<const K: usize>(lineno: usize, line: &str) -> Result<[usize; K]> {
    let mut out = [0usize; K];
    let mut it = line.split_whitespace();
    for slot in out.iter_mut() {
        let tok = it
            .next()
            .ok_or_else(|| Error::domain(format!("line {lineno}: expected {K} fields")))?;
        *slot = tok
            .parse()
            .map_err(|_| Error::domain(format!("line {lineno}: bad integer {tok:?}")))?;
    }
    if it.next().is_some() {
        return Err(Error::domain(format!("line {lineno}: trailing fields")));
    }
    Ok(out)
}

/// Parse either graph format.
pub fn parse_graph(text: &str) -> Result<RotationGraph> {
    let mut lines = content_lines(text);
    let (hno, header) = lines
        .next()
        .ok_or_else(|| Error::domain("empty graph file".to_string()))?;
    let mut toks = header.split_whitespace();
    let kind = toks.next().unwrap();
    let parse_num = |tok: Option<&str>, what: &str| -> Result<usize> {
        tok.ok_or_else(|| Error::domain(format!("line {hno}: missing {what}")))?
            .parse()
            .map_err(|_| Error::domain(format!("line {hno}: bad {what}")))
    };
    match kind {
        "rotgraph" => {
            let n = parse_num(toks.next(), "vertex count")?;
            let d = parse_num(toks.next(), "degree")?;
            let directed = match toks.next() {
                None => false,
                Some("directed") => true,
                Some(other) => {
                    return Err(Error::domain(format!("line {hno}: unknown flag {other:?}")))
                }
            };
            let mut rot = vec![None; n * d];
            for (no, line) in lines {
                let [v, i, u, j] = parse_fields(no, line)?;
                if v >= n || i >= d || u >= n || j >= d {
                    return Err(Error::domain(format!(
                        "line {no}: entry ({v},{i}) → ({u},{j}) outside {n}×{d}"
                    )));
                }
                if rot[v * d + i].replace((u as u32, j as u32)).is_some() {
                    return Err(Error::domain(format!("line {no}: slot ({v},{i}) given twice")));
                }
            }
            let rot = rot
                .into_iter()
                .enumerate()
                .map(|(idx, e)| {
                    e.ok_or_else(|| {
                        Error::domain(format!("slot ({},{}) missing", idx / d, idx % d))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            RotationGraph::new(n, d, directed, rot)
        }
        "edgelist" => {
            let n = parse_num(toks.next(), "vertex count")?;
            let d = parse_num(toks.next(), "degree")?;
            if n * d % 2 != 0 {
                return Err(Error::domain("edgelist needs even n·d".to_string()));
            }
            let mut next_slot = vec![0usize; n];
            let mut rot = vec![None; n * d];
            let mut take_slot = |v: usize, no: usize| -> Result<usize> {
                let i = next_slot[v];
                if i >= d {
                    return Err(Error::domain(format!(
                        "line {no}: vertex {v} gets more than {d} edge endpoints"
                    )));
                }
                next_slot[v] = i + 1;
                Ok(i)
            };
            for (no, line) in lines {
                let [u, v] = parse_fields(no, line)?;
                if u >= n || v >= n {
                    return Err(Error::domain(format!("line {no}: vertex outside 0..{n}")));
                }
                let iu = take_slot(u, no)?;
                let iv = take_slot(v, no)?;
                rot[u * d + iu] = Some((v as u32, iv as u32));
                rot[v * d + iv] = Some((u as u32, iu as u32));
            }
            let rot = rot
                .into_iter()
                .enumerate()
                .map(|(idx, e)| {
                    e.ok_or_else(|| {
                        Error::domain(format!(
                            "vertex {} has fewer than {d} edge endpoints",
                            idx / d
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            RotationGraph::new(n, d, false, rot)
        }
        other => Err(Error::domain(format!("line {hno}: unknown graph format {other:?}"))),
    }
}

/// Canonical rotation-form serialization.
pub fn write_graph(g: &RotationGraph) -> String {
    let mut out = String::new();
    if g.is_directed() {
        let _ = writeln!(out, "rotgraph {} {} directed", g.n(), g.degree());
    } else {
        let _ = writeln!(out, "rotgraph {} {}", g.n(), g.degree());
    }
    for v in 0..g.n() {
        for i in 0..g.degree() {
            let (u, j) = g.rot(v, i);
            let _ = writeln!(out, "{v} {i} {u} {j}");
        }
    }
    out
}

pub fn read_graph_file(path: &Path) -> Result<RotationGraph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

pub fn write_graph_file(path: &Path, g: &RotationGraph) -> Result<()> {
    Ok(std::fs::write(path, write_graph(g))?)
}
