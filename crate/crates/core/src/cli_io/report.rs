//! Run reports as flat `key value` lines or JSON.

use serde::Serialize;
use serde_json::Value;

use crate::instance::KCommodityInstance;
use crate::maintenance::CostCounters;
use crate::solver::{SolutionCheck, VerifyReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceDigest {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// `C`.
    pub cost_bound: i64,
    /// `U`.
    pub capacity_bound: i64,
}

impl InstanceDigest {
    pub fn of(inst: &KCommodityInstance) -> Self {
        InstanceDigest {
            n: inst.n(),
            m: inst.m(),
            k: inst.k(),
            cost_bound: inst.cost_bound(),
            capacity_bound: inst.capacity_bound(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub problem: &'static str,
    pub engine: crate::ipm::Engine,
    pub ipm: crate::ipm::Mode,
    pub eps: f64,
    pub step_scale: f64,
    pub max_iterations: usize,
    pub stabilize: bool,
    /// 1-based source/sink pairs in throughput mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationDigest {
    pub reverse: usize,
    pub forward: usize,
    pub total: usize,
    pub rejected: usize,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCounters {
    pub reverse: CostCounters,
    pub forward: CostCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checks {
    /// Certificate of the final augmented iterate.
    pub certificate: VerifyReport,
    /// Recomputation from the emitted flows alone.
    pub solution: SolutionCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub instance: InstanceDigest,
    pub config: ConfigEcho,
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub throughput: Option<f64>,
    pub residuals: Vec<f64>,
    pub total_residual: f64,
    pub gap: f64,
    pub iterations: IterationDigest,
    pub wall_time_s: f64,
    pub counters: PhaseCounters,
    pub checks: Checks,
    pub pass: bool,
}

pub fn render_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// One `dotted.key value` line per scalar; arrays of scalars stay on one line
/// and empty arrays print as `[]`.
pub fn render_text<T: Serialize>(report: &T) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    let mut out = String::new();
    flatten("", &value, &mut out);
    out
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("none".to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.16e}"),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&key(k), child, out);
            }
        }
        Value::Array(items) => {
            let flat: Option<Vec<String>> = items.iter().map(scalar).collect();
            match flat {
                Some(parts) if parts.is_empty() => {
                    out.push_str(prefix);
                    out.push_str(" []\n");
                }
                Some(parts) => {
                    out.push_str(prefix);
                    for p in parts {
                        out.push(' ');
                        out.push_str(&p);
                    }
                    out.push('\n');
                }
                None => {
                    for (i, child) in items.iter().enumerate() {
                        flatten(&key(&(i + 1).to_string()), child, out);
                    }
                }
            }
        }
        other => {
            out.push_str(prefix);
            out.push(' ');
            out.push_str(&scalar(other).unwrap_or_default());
            out.push('\n');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Inner {
        hits: u64,
        ratio: f64,
    }

    #[derive(Serialize)]
    struct Outer {
        name: &'static str,
        inner: Inner,
        values: Vec<f64>,
        pairs: Vec<(usize, usize)>,
        empty: Vec<f64>,
        pass: bool,
    }

    #[test]
    fn text_is_flat_and_dotted() {
        let r = Outer {
            name: "x",
            inner: Inner { hits: 3, ratio: 0.5 },
            values: vec![1.0, 2.0],
            pairs: vec![(1, 2)],
            empty: vec![],
            pass: true,
        };
        let text = render_text(&r);
        assert_eq!(
            text,
            "name x\ninner.hits 3\ninner.ratio 5.0000000000000000e-1\n\
             values 1.0000000000000000e0 2.0000000000000000e0\npairs.1 1 2\nempty []\npass true\n"
        );
        let json: Value = serde_json::from_str(&render_json(&r)).unwrap();
        assert_eq!(json["inner"]["hits"], 3);
    }
}
