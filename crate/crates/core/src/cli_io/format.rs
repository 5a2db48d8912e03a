//! Instance and solution text formats.
//!
//! Instance:
//!
//! ```text
//! p kflow <n> <m> <k>
//! e <tail> <head> <cap>          (m lines, edges numbered 1..=m in order)
//! c <commodity> <edge> <cost>    (default 0)
//! d <commodity> <vertex> <demand> (default 0, positive = net inflow)
//! ```
//!
//! Solution:
//!
//! ```text
//! objective <real>
//! throughput <real>              (optional)
//! f <commodity> <edge> <flow>    (default 0)
//! y <index> <value>              (optional dual of the reduced program)
//! ```
//!
//! Indices are 1-based and `#` starts a comment.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::instance::{DirectedGraph, InstanceError, KCommodityInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {record}: {reason}")]
    Validation { record: String, reason: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty records as `(line number, fields)` with comments stripped.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn field<T: FromStr>(fields: &[&str], idx: usize, line: usize, what: &str) -> Result<T, FormatError> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    raw.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {raw:?}")))
}

fn expect_arity(fields: &[&str], n: usize, line: usize) -> Result<(), FormatError> {
    if fields.len() != n {
        return Err(parse_err(
            line,
            format!("record {:?} expects {} fields, found {}", fields[0], n - 1, fields.len() - 1),
        ));
    }
    Ok(())
}

fn index(raw: usize, bound: usize, line: usize, what: &str) -> Result<usize, FormatError> {
    if raw == 0 || raw > bound {
        return Err(parse_err(line, format!("{what} {raw} outside 1..={bound}")));
    }
    Ok(raw - 1)
}

pub fn parse_instance(text: &str) -> Result<KCommodityInstance, FormatError> {
    let mut recs = records(text);
    let (line, header) = recs
        .next()
        .ok_or_else(|| parse_err(1, "missing `p kflow <n> <m> <k>` header"))?;
    if header[0] != "p" || header.get(1) != Some(&"kflow") {
        return Err(parse_err(line, "expected `p kflow <n> <m> <k>` header"));
    }
    expect_arity(&header, 5, line)?;
    let n: usize = field(&header, 2, line, "vertex count")?;
    let m: usize = field(&header, 3, line, "edge count")?;
    let k: usize = field(&header, 4, line, "commodity count")?;

    let mut edges = Vec::with_capacity(m);
    let mut capacity = Vec::with_capacity(m);
    let mut edge_lines = Vec::with_capacity(m);
    let mut costs = vec![vec![0i64; m]; k];
    let mut demands = vec![vec![0i64; n]; k];
    let mut seen_costs = HashSet::new();
    let mut seen_demands = HashSet::new();
    for (line, f) in recs {
        match f[0] {
            "e" => {
                expect_arity(&f, 4, line)?;
                if edges.len() == m {
                    return Err(parse_err(line, format!("more than {m} edges")));
                }
                let t = index(field(&f, 1, line, "tail")?, n, line, "tail")?;
                let h = index(field(&f, 2, line, "head")?, n, line, "head")?;
                edges.push((t, h));
                capacity.push(field::<i64>(&f, 3, line, "capacity")?);
                edge_lines.push(line);
            }
            "c" => {
                expect_arity(&f, 4, line)?;
                let i = index(field(&f, 1, line, "commodity")?, k, line, "commodity")?;
                let e = index(field(&f, 2, line, "edge")?, m, line, "edge")?;
                if !seen_costs.insert((i, e)) {
                    return Err(parse_err(line, "duplicate cost record"));
                }
                costs[i][e] = field(&f, 3, line, "cost")?;
            }
            "d" => {
                expect_arity(&f, 4, line)?;
                let i = index(field(&f, 1, line, "commodity")?, k, line, "commodity")?;
                let v = index(field(&f, 2, line, "vertex")?, n, line, "vertex")?;
                if !seen_demands.insert((i, v)) {
                    return Err(parse_err(line, "duplicate demand record"));
                }
                demands[i][v] = field(&f, 3, line, "demand")?;
            }
            "p" => return Err(parse_err(line, "duplicate header")),
            other => return Err(parse_err(line, format!("unknown record type {other:?}"))),
        }
    }
    if edges.len() != m {
        return Err(parse_err(
            text.lines().count().max(1),
            format!("header declares {m} edges, found {}", edges.len()),
        ));
    }
    let graph = DirectedGraph::new(n, edges).map_err(|e| validation(e, &edge_lines))?;
    KCommodityInstance::new(graph, capacity, costs, demands).map_err(|e| validation(e, &edge_lines))
}

fn validation(err: InstanceError, edge_lines: &[usize]) -> FormatError {
    let edge = |e: usize| format!("edge {} (line {})", e + 1, edge_lines[e]);
    let (record, reason) = match err {
        InstanceError::NonPositiveCapacity { edge: e, capacity } => {
            (edge(e), format!("capacity {capacity} is not positive"))
        }
        InstanceError::SelfLoop { edge: e, .. } => (edge(e), "self loop".to_string()),
        InstanceError::UnbalancedDemand { commodity, sum } => (
            format!("commodity {}", commodity + 1),
            format!("demands sum to {sum}, expected 0"),
        ),
        InstanceError::NoCommodities => ("header".to_string(), "k must be at least 1".to_string()),
        InstanceError::Empty => (
            "header".to_string(),
            "need at least one vertex and one edge".to_string(),
        ),
        other => ("instance".to_string(), other.to_string()),
    };
    FormatError::Validation { record, reason }
}

pub fn write_instance(inst: &KCommodityInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p kflow {} {} {}", inst.n(), inst.m(), inst.k());
    for (e, &(t, h)) in inst.graph().edges().iter().enumerate() {
        let _ = writeln!(out, "e {} {} {}", t + 1, h + 1, inst.capacity()[e]);
    }
    for i in 0..inst.k() {
        for (e, &c) in inst.costs(i).iter().enumerate() {
            if c != 0 {
                let _ = writeln!(out, "c {} {} {}", i + 1, e + 1, c);
            }
        }
        for (v, &d) in inst.demands(i).iter().enumerate() {
            if d != 0 {
                let _ = writeln!(out, "d {} {} {}", i + 1, v + 1, d);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub objective: f64,
    pub throughput: Option<f64>,
    /// `flows[i][e]`.
    pub flows: Vec<Vec<f64>>,
    pub dual: Option<Vec<f64>>,
}

/// Parses a solution for `k` commodities on `m` edges; `dual_dim` bounds `y` indices.
pub fn parse_solution(
    text: &str,
    k: usize,
    m: usize,
    dual_dim: usize,
) -> Result<SolutionFile, FormatError> {
    let mut objective = None;
    let mut throughput = None;
    let mut flows = vec![vec![0.0; m]; k];
    let mut dual: Option<Vec<f64>> = None;
    let mut seen = HashSet::new();
    for (line, f) in records(text) {
        match f[0] {
            "objective" => {
                expect_arity(&f, 2, line)?;
                if objective.replace(field::<f64>(&f, 1, line, "objective")?).is_some() {
                    return Err(parse_err(line, "duplicate objective"));
                }
            }
            "throughput" => {
                expect_arity(&f, 2, line)?;
                if throughput.replace(field::<f64>(&f, 1, line, "throughput")?).is_some() {
                    return Err(parse_err(line, "duplicate throughput"));
                }
            }
            "f" => {
                expect_arity(&f, 4, line)?;
                let i = index(field(&f, 1, line, "commodity")?, k, line, "commodity")?;
                let e = index(field(&f, 2, line, "edge")?, m, line, "edge")?;
                if !seen.insert(('f', i, e)) {
                    return Err(parse_err(line, "duplicate flow record"));
                }
                flows[i][e] = field(&f, 3, line, "flow")?;
            }
            "y" => {
                expect_arity(&f, 3, line)?;
                let j = index(field(&f, 1, line, "dual index")?, dual_dim, line, "dual index")?;
                if !seen.insert(('y', j, 0)) {
                    return Err(parse_err(line, "duplicate dual record"));
                }
                dual.get_or_insert_with(|| vec![0.0; dual_dim])[j] = field(&f, 2, line, "dual value")?;
            }
            other => return Err(parse_err(line, format!("unknown record type {other:?}"))),
        }
    }
    Ok(SolutionFile {
        objective: objective.unwrap_or(0.0),
        throughput,
        flows,
        dual,
    })
}

pub fn write_solution(sol: &SolutionFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "objective {:.16e}", sol.objective);
    if let Some(t) = sol.throughput {
        let _ = writeln!(out, "throughput {t:.16e}");
    }
    for (i, f) in sol.flows.iter().enumerate() {
        for (e, v) in f.iter().enumerate() {
            let _ = writeln!(out, "f {} {} {:.16e}", i + 1, e + 1, v);
        }
    }
    if let Some(y) = &sol.dual {
        for (j, v) in y.iter().enumerate() {
            let _ = writeln!(out, "y {} {:.16e}", j + 1, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "p kflow 2 1 1\ne 1 2 5\nd 1 1 -3\nd 1 2 3\n";

    #[test]
    fn minimal_instance() {
        let inst = parse_instance(MINIMAL).unwrap();
        assert_eq!((inst.n(), inst.m(), inst.k()), (2, 1, 1));
        assert_eq!(inst.capacity(), &[5]);
        assert_eq!(inst.demands(0), &[-3, 3]);
        assert_eq!(inst.costs(0), &[0]);
    }

    #[test]
    fn comments_and_round_trip() {
        let text = "# demo\np kflow 3 2 1  # header\n\ne 1 2 4\ne 2 3 4\nc 1 2 7\nd 1 1 -1\nd 1 3 1\n";
        let inst = parse_instance(text).unwrap();
        let written = write_instance(&inst);
        let again = parse_instance(&written).unwrap();
        assert_eq!(write_instance(&again), written);
        assert_eq!(again.costs(0), &[0, 7]);
    }

    #[test]
    fn missing_header() {
        assert_eq!(
            parse_instance("e 1 2 5\n"),
            Err(FormatError::Parse {
                line: 1,
                message: "expected `p kflow <n> <m> <k>` header".into()
            })
        );
        assert!(matches!(parse_instance(""), Err(FormatError::Parse { line: 1, .. })));
    }

    #[test]
    fn unbalanced_names_commodity() {
        let err = parse_instance("p kflow 2 1 1\ne 1 2 5\nd 1 2 1\n").unwrap_err();
        match err {
            FormatError::Validation { record, .. } => assert_eq!(record, "commodity 1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_capacity_names_edge() {
        let err = parse_instance("p kflow 2 1 1\ne 1 2 0\n").unwrap_err();
        match err {
            FormatError::Validation { record, .. } => assert_eq!(record, "edge 1 (line 2)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_and_arity() {
        assert!(matches!(
            parse_instance("p kflow 2 1 1\ne 1 3 5\n"),
            Err(FormatError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_instance("p kflow 2 1 1\ne 1 2\n"),
            Err(FormatError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_instance("p kflow 2 2 1\ne 1 2 5\n"),
            Err(FormatError::Parse { .. })
        ));
    }

    #[test]
    fn solution_round_trip_is_exact() {
        let sol = SolutionFile {
            objective: 1.0 / 3.0,
            throughput: Some(2.0f64.sqrt()),
            flows: vec![vec![0.1, 1e-300], vec![std::f64::consts::PI, 0.0]],
            dual: Some(vec![-1.5, 2.0 / 7.0]),
        };
        let text = write_solution(&sol);
        assert_eq!(parse_solution(&text, 2, 2, 2).unwrap(), sol);
    }

    #[test]
    fn empty_solution_defaults() {
        let sol = parse_solution("", 1, 2, 3).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.flows, vec![vec![0.0, 0.0]]);
        assert_eq!(sol.dual, None);
    }
}
