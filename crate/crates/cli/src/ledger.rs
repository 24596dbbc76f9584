//! JSON form of an explorer's posterior record.

use serde_json::{json, Value};

use treegm::evalmetrics::{posterior_expected_metrics, PosteriorSource};
use treegm::explorers::{LedgerKind, PosteriorRecord};
use treegm::{BitPattern, LabeledGraph};

use crate::common::{class_name, edges_json, invalid, matrix_json, parse_class, CliError, CliResult};

fn kind_name(k: LedgerKind) -> &'static str {
    match k {
        LedgerKind::LogScore => "log_score",
        LedgerKind::VisitCount => "visit_count",
    }
}

/// Top graphs, edge probabilities, optional ETPR, run statistics and the full ledger.
pub fn record_json(rec: &PosteriorRecord, truth: Option<&LabeledGraph>) -> CliResult<Value> {
    let top: Vec<Value> = rec
        .top()
        .iter()
        .map(|(g, s)| {
            let visits = rec.ledger.get(&g.bit_pattern()).copied();
            json!({ "edges": edges_json(g), "score": s, "ledger_value": visits })
        })
        .collect();
    let mut entries: Vec<(&BitPattern, f64)> = rec.ledger.iter().map(|(b, &v)| (b, v)).collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    let ledger: Vec<Value> = entries
        .iter()
        .map(|(b, v)| json!({ "graph": b.to_hex(), "value": v, "score": rec.scores.get(*b) }))
        .collect();
    let etpr = match truth {
        Some(t) => {
            let m = posterior_expected_metrics(PosteriorSource::Ledger(rec), t)?;
            m.etpr.ok()
        }
        None => None,
    };
    let s = &rec.stats;
    Ok(json!({
        "p": rec.p,
        "class": class_name(rec.class),
        "kind": kind_name(rec.kind),
        "top": top,
        "mode": rec.mode().map(|g| edges_json(&g)),
        "edge_prob": matrix_json(&rec.edge_probabilities()?),
        "etpr": etpr,
        "distinct_graphs": rec.ledger.len(),
        "stats": {
            "iterations": s.iterations,
            "scored": s.scored,
            "graph_proposals": s.graph_proposals,
            "graph_accepted": s.graph_accepted,
            "cov_proposals": s.cov_proposals,
            "cov_accepted": s.cov_accepted,
            "elapsed_secs": s.elapsed_secs,
        },
        "ledger": ledger,
    }))
}

/// Reads a record back from either a full output document or its `result` block.
pub fn parse_record(doc: &Value) -> CliResult<PosteriorRecord> {
    let r = doc.get("result").unwrap_or(doc);
    let bad = |what: &str| CliError::Invalid(format!("ledger JSON: missing or bad '{what}'"));
    let p = r.get("p").and_then(Value::as_u64).ok_or_else(|| bad("p"))? as usize;
    let class = parse_class(r.get("class").and_then(Value::as_str).ok_or_else(|| bad("class"))?)?;
    let kind = match r.get("kind").and_then(Value::as_str) {
        Some("log_score") => LedgerKind::LogScore,
        Some("visit_count") => LedgerKind::VisitCount,
        _ => return Err(bad("kind")),
    };
    let entries = r.get("ledger").and_then(Value::as_array).ok_or_else(|| bad("ledger"))?;
    let mut rec = PosteriorRecord::new(p, class, kind, 10);
    for e in entries {
        let hex = e.get("graph").and_then(Value::as_str).ok_or_else(|| bad("ledger[].graph"))?;
        let value = e.get("value").and_then(Value::as_f64).ok_or_else(|| bad("ledger[].value"))?;
        let bits = BitPattern::from_hex(p, hex)?;
        if let Some(s) = e.get("score").and_then(Value::as_f64) {
            rec.scores.insert(bits.clone(), s);
        }
        rec.ledger.insert(bits, value);
    }
    if rec.ledger.is_empty() {
        return invalid("ledger JSON has no entries");
    }
    Ok(rec)
}
