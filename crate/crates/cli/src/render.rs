//! Table and JSON renderings of traces, predictions, and analyses.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use qobserver::measurement::OutcomeDistribution;
use qobserver::prediction::Assessment;
use qobserver::scenarios::{Report, Trace};
use qobserver::SystemLayout;

/// JSON Schema of the `run`, `scenario`, and `predict` output.
pub const JSON_SCHEMA: &str = include_str!("../schema/trace.schema.json");

/// `x` rounded to `precision` decimals, with `-0` mapped to `0`.
pub fn round_to(x: f64, precision: u8) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{x:.*}", usize::from(precision)).parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn number(x: f64, precision: u8) -> Value {
    Value::from(round_to(x, precision))
}

/// Fixed-point text of `x` at `precision` decimals.
pub fn fixed(x: f64, precision: u8) -> String {
    format!("{:.*}", usize::from(precision), round_to(x, precision))
}

/// Scientific text for quantities spanning many magnitudes.
pub fn sci(x: f64, precision: u8) -> String {
    format!("{:.*e}", usize::from(precision.min(6)), x)
}

pub fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("values are serializable");
    text.push('\n');
    text
}

fn layout_json(layout: &SystemLayout) -> Value {
    layout
        .subsystems()
        .iter()
        .map(|s| json!({ "name": s.name(), "dim": s.dim() }))
        .collect()
}

fn distribution_json(d: &OutcomeDistribution, precision: u8) -> Value {
    d.entries()
        .iter()
        .map(|(label, p)| json!({ "outcome": label, "p": number(*p, precision) }))
        .collect()
}

fn report_json(r: &Report, precision: u8) -> Value {
    json!({
        "targets": r.targets.iter().map(|(s, b)| json!({ "subsystem": s, "basis": b })).collect::<Vec<_>>(),
        "probabilities": distribution_json(&r.distribution, precision),
    })
}

pub fn trace_json(trace: &Trace, precision: u8) -> Value {
    trace
        .records
        .iter()
        .map(|rec| {
            let state = rec.state.phase_normalized();
            let amplitudes: Vec<Value> = state
                .amplitudes()
                .iter()
                .map(|a| json!([number(a.re, precision), number(a.im, precision)]))
                .collect();
            json!({
                "step": rec.step,
                "kind": rec.kind.as_str(),
                "outcome": rec.outcome,
                "amplitudes": amplitudes,
                "reports": rec.reports.iter().map(|r| report_json(r, precision)).collect::<Vec<_>>(),
            })
        })
        .collect()
}

pub fn prediction_json(agent: &str, a: &Assessment, precision: u8) -> Value {
    let p = &a.prediction;
    json!({
        "agent": agent,
        "record": a.record,
        "rule": p.rule.to_string(),
        "target": { "subsystem": p.subsystem, "basis": p.basis },
        "valid": p.valid,
        "invalid_reason": p.invalid_reason,
        "certain_outcome": p.certain_outcome,
        "predicted": p.distribution.as_ref().map(|d| distribution_json(d, precision)),
        "actual": distribution_json(&a.actual, precision),
        "verdict": a.report.verdict.as_str(),
        "tv_distance": a.report.tv_distance.map(|x| number(x, precision)),
        "certain_probability": a.report.certain_probability.map(|x| number(x, precision)),
    })
}

/// Collapse tallies over repeated runs: `(step index, step text, counts)`.
pub type Tally = (usize, String, Vec<(String, usize)>);

/// The top-level document shared by `run`, `scenario`, and `predict`.
pub fn document(
    layout: &SystemLayout,
    trace: &Trace,
    predictions: Vec<Value>,
    samples: Option<(u64, usize, &[Tally])>,
    precision: u8,
) -> Value {
    let mut doc = Map::new();
    doc.insert("layout".into(), layout_json(layout));
    doc.insert("trace".into(), trace_json(trace, precision));
    doc.insert("predictions".into(), Value::Array(predictions));
    if let Some((seed, shots, tallies)) = samples {
        let steps: Vec<Value> = tallies
            .iter()
            .map(|(index, step, counts)| {
                json!({
                    "index": index,
                    "step": step,
                    "counts": counts.iter().map(|(l, c)| json!({ "outcome": l, "count": c })).collect::<Vec<_>>(),
                    "frequencies": counts
                        .iter()
                        .map(|(l, c)| json!({ "outcome": l, "p": number(*c as f64 / shots as f64, precision) }))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        doc.insert("samples".into(), json!({ "seed": seed, "shots": shots, "steps": steps }));
    }
    Value::Object(doc)
}

fn ket(layout: &SystemLayout, index: usize) -> String {
    let digits: Vec<String> = layout.digits(index).iter().map(|d| d.to_string()).collect();
    format!("|{}>", digits.join(","))
}

fn distribution_table(out: &mut String, indent: &str, d: &OutcomeDistribution, precision: u8) {
    let width = d.labels().map(str::len).max().unwrap_or(0);
    for (label, p) in d.entries() {
        let _ = writeln!(out, "{indent}{label:<width$}  {}", fixed(*p, precision));
    }
}

pub fn trace_table(layout: &SystemLayout, trace: &Trace, precision: u8) -> String {
    let mut out = String::new();
    let dims: Vec<String> = layout.subsystems().iter().map(|s| format!("{}:{}", s.name(), s.dim())).collect();
    let _ = writeln!(out, "layout {}", dims.join(" "));
    for (k, rec) in trace.records.iter().enumerate() {
        let _ = write!(out, "[{k}] {}", rec.step);
        if let Some(o) = &rec.outcome {
            let _ = write!(out, "  -> {o}");
        }
        out.push('\n');
        let state = rec.state.phase_normalized();
        for (i, a) in state.amplitudes().iter().enumerate() {
            let (re, im) = (round_to(a.re, precision), round_to(a.im, precision));
            if re == 0.0 && im == 0.0 {
                continue;
            }
            let _ = writeln!(
                out,
                "    {}  {:>w$}  {:>w$}i",
                ket(layout, i),
                fixed(re, precision),
                fixed(im, precision),
                w = usize::from(precision) + 3
            );
        }
        for r in &rec.reports {
            let names: Vec<&str> = r.targets.iter().map(|(s, _)| s.as_str()).collect();
            let bases: Vec<&str> = r.targets.iter().map(|(_, b)| b.as_str()).collect();
            let _ = writeln!(out, "    report {} in {}", names.join(" "), bases.join(" "));
            distribution_table(&mut out, "      ", &r.distribution, precision);
        }
    }
    out
}

pub fn samples_table(seed: u64, shots: usize, tallies: &[Tally], precision: u8) -> String {
    let mut out = format!("samples seed {seed} shots {shots}\n");
    for (index, step, counts) in tallies {
        let _ = writeln!(out, "  step {index}: {step}");
        for (label, c) in counts {
            let _ = writeln!(out, "    {label}  {c}  {}", fixed(*c as f64 / shots as f64, precision));
        }
    }
    out
}

pub fn prediction_table(agent: &str, a: &Assessment, precision: u8) -> String {
    let p = &a.prediction;
    let mut out = String::new();
    let record = a.record.as_deref().unwrap_or("-");
    let _ = writeln!(
        out,
        "agent {agent} record {record}: rule {} on {} in {}",
        p.rule, p.subsystem, p.basis
    );
    match (&p.distribution, p.valid) {
        (Some(d), true) => {
            match &p.certain_outcome {
                Some(c) => {
                    let _ = writeln!(out, "  predicted: certain {c}");
                }
                None => {
                    let _ = writeln!(out, "  predicted:");
                }
            }
            distribution_table(&mut out, "    ", d, precision);
        }
        _ => {
            let reason = p.invalid_reason.as_deref().unwrap_or("no prediction");
            let _ = writeln!(out, "  predicted: none ({reason})");
        }
    }
    let _ = writeln!(out, "  actual:");
    distribution_table(&mut out, "    ", &a.actual, precision);
    let _ = write!(out, "  verdict: {}", a.report.verdict);
    if let Some(tv) = a.report.tv_distance {
        let _ = write!(out, " (tv distance {})", fixed(tv, precision));
    }
    out.push('\n');
    out
}
