//! Canonical `.cptn` documents.
//!
//! The writer is deterministic: fixed key order, nodes sorted by id, each CPT
//! row on its own line, and numbers printed as the shortest decimal that
//! round-trips the `f64`. The reader accepts any key order and whitespace but
//! rejects unknown fields and never renormalizes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{check_column, check_outcomes, ColumnStatus, Cpt, Network, NodeId, NodeSpec};

pub const FORMAT_VERSION: u64 = 1;
pub const FILE_EXTENSION: &str = "cptn";
/// Column-sum tolerance at load; accepts tables printed to six significant figures.
pub const LOAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("syntax error at `{path}` (line {line}, column {column}): {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {reason}")]
    Schema { path: String, reason: String },
    #[error("invariant violation at `{path}`: {reason}")]
    InvariantViolation { path: String, reason: String },
}

impl StoreError {
    pub fn name(&self) -> &'static str {
        match self {
            StoreError::Syntax { .. } => "SyntaxError",
            StoreError::Schema { .. } => "SchemaError",
            StoreError::InvariantViolation { .. } => "InvariantViolation",
        }
    }

    pub fn path(&self) -> &str {
        match self {
            StoreError::Syntax { path, .. }
            | StoreError::Schema { path, .. }
            | StoreError::InvariantViolation { path, .. } => path,
        }
    }
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> StoreError {
    StoreError::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

fn invariant(path: impl Into<String>, reason: impl Into<String>) -> StoreError {
    StoreError::InvariantViolation {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct DocumentIn {
    format_version: u64,
    nodes: Vec<NodeIn>,
    cpts: BTreeMap<String, CptIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeIn {
    id: String,
    name: String,
    outcomes: Vec<String>,
    parents: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct CptIn {
    parent_order: Vec<String>,
    values: Vec<f64>,
    status: Vec<ColumnStatus>,
}

/// Parses a `.cptn` document into a network satisfying every model invariant.
pub fn parse(bytes: &[u8]) -> Result<Network, StoreError> {
    parse_with(bytes, LOAD_TOLERANCE)
}

/// Like [`parse`] but admits columns with any sum, so audits can report them.
/// Entries must still lie in [0, 1].
pub fn parse_for_audit(bytes: &[u8]) -> Result<Network, StoreError> {
    parse_with(bytes, f64::INFINITY)
}

fn parse_with(bytes: &[u8], sum_tol: f64) -> Result<Network, StoreError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: DocumentIn = serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => schema(path, inner.to_string()),
            _ => StoreError::Syntax {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            },
        }
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(schema(
            "formatVersion",
            format!("unsupported version {}", doc.format_version),
        ));
    }

    let mut outcome_counts: BTreeMap<String, usize> = BTreeMap::new();
    for (i, n) in doc.nodes.iter().enumerate() {
        if n.id.is_empty() || n.name.is_empty() {
            return Err(invariant(format!("nodes[{i}]"), "id and name must be non-empty"));
        }
        check_outcomes(&n.outcomes)
            .map_err(|e| invariant(format!("nodes[{i}].outcomes"), e.to_string()))?;
        if outcome_counts.insert(n.id.clone(), n.outcomes.len()).is_some() {
            return Err(invariant(format!("nodes[{i}].id"), format!("duplicate node `{}`", n.id)));
        }
    }
    for (i, n) in doc.nodes.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for (j, p) in n.parents.iter().enumerate() {
            let path = format!("nodes[{i}].parents[{j}]");
            if p == &n.id {
                return Err(invariant(path, "a node cannot be its own parent"));
            }
            if !outcome_counts.contains_key(p.as_str()) {
                return Err(invariant(path, format!("unknown parent `{p}`")));
            }
            if !seen.insert(p.as_str()) {
                return Err(invariant(path, format!("duplicate parent `{p}`")));
            }
        }
    }
    if let Some(id) = find_cycle(&doc.nodes) {
        return Err(invariant("nodes", format!("parent relation has a cycle through `{id}`")));
    }
    if let Some(extra) = doc
        .cpts
        .keys()
        .find(|k| !outcome_counts.contains_key(k.as_str()))
    {
        return Err(schema(format!("cpts.{extra}"), "table for an undeclared node"));
    }

    let mut nodes = BTreeMap::new();
    let mut cpts = BTreeMap::new();
    for n in doc.nodes {
        let base = format!("cpts.{}", n.id);
        let c = doc
            .cpts
            .get(&n.id)
            .ok_or_else(|| schema(base.clone(), "missing table"))?;
        let declared: BTreeSet<&String> = n.parents.iter().collect();
        let ordered: BTreeSet<&String> = c.parent_order.iter().collect();
        if c.parent_order.len() != n.parents.len() || declared != ordered {
            return Err(invariant(
                format!("{base}.parentOrder"),
                "must be a permutation of the node's parents",
            ));
        }
        let m = n.outcomes.len();
        let cards: Vec<usize> = c
            .parent_order
            .iter()
            .map(|p| outcome_counts[p.as_str()])
            .collect();
        let columns: usize = cards.iter().product();
        if c.status.len() != columns {
            return Err(schema(
                format!("{base}.status"),
                format!("expected {columns} entries, got {}", c.status.len()),
            ));
        }
        if c.values.len() != m * columns {
            return Err(schema(
                format!("{base}.values"),
                format!("expected {} entries, got {}", m * columns, c.values.len()),
            ));
        }
        // row-major in the document, column-major in memory
        let mut col_major = vec![0.0; m * columns];
        for (row, chunk) in c.values.chunks_exact(columns).enumerate() {
            for (k, &v) in chunk.iter().enumerate() {
                col_major[k * m + row] = v;
            }
        }
        for (k, col) in col_major.chunks_exact(m).enumerate() {
            check_column(col, sum_tol)
                .map_err(|r| invariant(format!("{base}.values"), format!("column {k}: {r}")))?;
        }
        let cpt = Cpt::from_columns(m, cards, col_major, c.status.clone())
            .map_err(|e| invariant(base.clone(), e.to_string()))?;
        let id = NodeId::new(n.id);
        cpts.insert(id.clone(), cpt);
        nodes.insert(
            id.clone(),
            NodeSpec {
                id,
                name: n.name,
                outcomes: n.outcomes,
                parents: c.parent_order.iter().map(|p| NodeId::new(p.as_str())).collect(),
            },
        );
    }
    Ok(Network::from_parts(nodes, cpts))
}

fn find_cycle(nodes: &[NodeIn]) -> Option<String> {
    let parents: BTreeMap<&str, &[String]> = nodes
        .iter()
        .map(|n| (n.id.as_str(), n.parents.as_slice()))
        .collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        id: &'a str,
        parents: &BTreeMap<&'a str, &'a [String]>,
        mark: &mut BTreeMap<&'a str, u8>,
    ) -> Option<String> {
        match mark.get(id) {
            Some(1) => return Some(id.to_owned()),
            Some(2) => return None,
            _ => {}
        }
        mark.insert(id, 1);
        for p in parents.get(id).copied().unwrap_or_default() {
            if let Some(c) = visit(p, parents, mark) {
                return Some(c);
            }
        }
        mark.insert(id, 2);
        None
    }
    nodes
        .iter()
        .find_map(|n| visit(&n.id, &parents, &mut mark))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite f64")
}

fn json_list<I: IntoIterator<Item = String>>(items: I) -> String {
    let items: Vec<String> = items.into_iter().collect();
    format!("[{}]", items.join(", "))
}

/// Writes the canonical document for `net`.
pub fn serialize(net: &Network) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"formatVersion\": {FORMAT_VERSION},");
    out.push_str("  \"nodes\": [");
    let nodes: Vec<String> = net
        .nodes()
        .map(|n| {
            format!(
                "    {{\"id\": {}, \"name\": {}, \"outcomes\": {}, \"parents\": {}}}",
                json_str(n.id.as_str()),
                json_str(&n.name),
                json_list(n.outcomes.iter().map(|o| json_str(o))),
                json_list(n.parents.iter().map(|p| json_str(p.as_str()))),
            )
        })
        .collect();
    if nodes.is_empty() {
        out.push_str("],\n");
    } else {
        let _ = write!(out, "\n{}\n  ],\n", nodes.join(",\n"));
    }
    out.push_str("  \"cpts\": {");
    let cpts: Vec<String> = net
        .nodes()
        .map(|n| {
            let cpt = net.cpt(n.id.as_str()).expect("every node has a table");
            let columns = cpt.column_count();
            let rows: Vec<String> = (0..cpt.child_cardinality())
                .map(|row| {
                    let vals = (0..columns).map(|k| json_num(cpt.value(row, k).expect("in range")));
                    format!("        {}", vals.collect::<Vec<_>>().join(", "))
                })
                .collect();
            let status = cpt.statuses().iter().map(|s| {
                json_str(match s {
                    ColumnStatus::Default => "default",
                    ColumnStatus::Elicited => "elicited",
                })
            });
            format!(
                "    {}: {{\n      \"parentOrder\": {},\n      \"values\": [\n{}\n      ],\n      \"status\": {}\n    }}",
                json_str(n.id.as_str()),
                json_list(n.parents.iter().map(|p| json_str(p.as_str()))),
                rows.join(",\n"),
                json_list(status),
            )
        })
        .collect();
    if cpts.is_empty() {
        out.push_str("}\n");
    } else {
        let _ = write!(out, "\n{}\n  }}\n", cpts.join(",\n"));
    }
    out.push_str("}\n");
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Distribution, FullAssignment};

    const HEPAR: &str = include_str!("../../../fixtures/hepar.cptn");

    fn small() -> Network {
        let mut net = Network::new();
        net.create_node("B", None).unwrap();
        net.create_node("A", Some(vec!["x".into(), "y".into(), "z".into()]))
            .unwrap();
        net.add_parent("A", "B").unwrap();
        let d = Distribution::try_new(vec![0.1, 0.2, 0.7]).unwrap();
        net.set_columns("A", &[1], &d, ColumnStatus::Elicited).unwrap();
        net
    }

    #[test]
    fn hepar_fixture_loads() {
        let net = parse(HEPAR.as_bytes()).unwrap();
        let d = net
            .get_distribution("Disorder", &FullAssignment::new(vec![0, 0, 0]))
            .unwrap();
        assert_eq!(
            d.as_slice(),
            &[0.015306, 0.193878, 0.0867343, 0.168367, 0.204082, 0.331633]
        );
    }

    #[test]
    fn hepar_fixture_is_canonical() {
        let net = parse(HEPAR.as_bytes()).unwrap();
        assert_eq!(String::from_utf8(serialize(&net)).unwrap(), HEPAR);
    }

    #[test]
    fn numbers_round_trip_bit_exactly() {
        let mut net = Network::new();
        net.create_node("A", None).unwrap();
        let d = Distribution::try_new(vec![0.7722268494771424, 0.22777315052285774]).unwrap();
        net.set_columns("A", &[0], &d, ColumnStatus::Elicited).unwrap();
        let back = parse(&serialize(&net)).unwrap();
        assert_eq!(back.cpt("A").unwrap().column(0).unwrap(), d.as_slice());
    }

    #[test]
    fn shortest_numbers_and_order() {
        let text = String::from_utf8(serialize(&small())).unwrap();
        assert!(text.contains(" 0.1,\n"), "{text}");
        assert!(text.ends_with("}\n"));
        let fv = text.find("formatVersion").unwrap();
        let nodes = text.find("\"nodes\"").unwrap();
        let cpts = text.find("\"cpts\"").unwrap();
        assert!(fv < nodes && nodes < cpts);
        assert!(text.find("\"id\": \"A\"").unwrap() < text.find("\"id\": \"B\"").unwrap());
    }

    #[test]
    fn round_trip_and_op_order_independence() {
        let net = small();
        assert_eq!(parse(&serialize(&net)).unwrap(), net);

        let mut other = Network::new();
        other
            .create_node("A", Some(vec!["x".into(), "y".into(), "z".into()]))
            .unwrap();
        other.create_node("B", None).unwrap();
        other.add_parent("A", "B").unwrap();
        let d = Distribution::try_new(vec![0.1, 0.2, 0.7]).unwrap();
        other.set_columns("A", &[1], &d, ColumnStatus::Elicited).unwrap();
        assert_eq!(serialize(&other), serialize(&net));
    }

    #[test]
    fn empty_network() {
        let net = Network::new();
        let bytes = serialize(&net);
        assert_eq!(parse(&bytes).unwrap(), net);
    }

    #[test]
    fn tolerant_reader() {
        let doc = r#"{"cpts": {"A": {"values": [0.25, 0.75], "status": ["default"], "parentOrder": []}},
            "nodes": [{"parents": [], "outcomes": ["a", "b"], "name": "A", "id": "A"}],
            "formatVersion": 1}"#;
        let net = parse(doc.as_bytes()).unwrap();
        assert_eq!(net.cpt("A").unwrap().column(0).unwrap(), &[0.25, 0.75]);
    }

    #[test]
    fn parent_order_defines_layout() {
        let doc = r#"{"formatVersion": 1,
            "nodes": [
              {"id": "P", "name": "P", "outcomes": ["a", "b"], "parents": []},
              {"id": "Q", "name": "Q", "outcomes": ["a", "b", "c"], "parents": []},
              {"id": "C", "name": "C", "outcomes": ["u", "v"], "parents": ["P", "Q"]}],
            "cpts": {
              "P": {"parentOrder": [], "values": [0.5, 0.5], "status": ["default"]},
              "Q": {"parentOrder": [], "values": [0.2, 0.3, 0.5], "status": ["default"]},
              "C": {"parentOrder": ["Q", "P"],
                    "values": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6,
                               0.9, 0.8, 0.7, 0.6, 0.5, 0.4],
                    "status": ["default", "default", "default", "default", "default", "elicited"]}}}"#;
        let net = parse(doc.as_bytes()).unwrap();
        let spec = net.node("C").unwrap();
        assert_eq!(spec.parents, vec![NodeId::new("Q"), NodeId::new("P")]);
        let cpt = net.cpt("C").unwrap();
        assert_eq!(cpt.parent_cardinalities(), &[3, 2]);
        assert_eq!(cpt.column(1).unwrap(), &[0.2, 0.8]);
        assert_eq!(cpt.status(5).unwrap(), ColumnStatus::Elicited);
    }

    fn err(doc: &str) -> StoreError {
        parse(doc.as_bytes()).unwrap_err()
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = err("{\"formatVersion\": 1,\n \"nodes\": [,]}");
        assert_eq!(e.name(), "SyntaxError");
        match e {
            StoreError::Syntax { line, path, .. } => {
                assert_eq!(line, 2);
                assert!(path.starts_with("nodes"), "{path}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        let e = err(r#"{"formatVersion": 1, "nodes": [], "cpts": {}, "extra": 0}"#);
        assert_eq!(e.name(), "SchemaError");
        let e = err(r#"{"formatVersion": 2, "nodes": [], "cpts": {}}"#);
        assert_eq!(e.path(), "formatVersion");
        let e = err(r#"{"formatVersion": 1, "nodes": [{"id": "A", "name": "A", "outcomes": ["a"], "parents": [], "color": 1}], "cpts": {}}"#);
        assert_eq!(e.name(), "SchemaError");
        assert!(e.path().starts_with("nodes[0]"), "{}", e.path());
        let e = err(r#"{"formatVersion": 1, "nodes": [{"id": "A", "name": "A", "outcomes": ["a"], "parents": []}], "cpts": {}}"#);
        assert_eq!(e.path(), "cpts.A");
        let e = err(r#"{"formatVersion": 1, "nodes": [{"id": "A", "name": "A", "outcomes": ["a", "b"], "parents": []}],
            "cpts": {"A": {"parentOrder": [], "values": [1.0], "status": ["default"]}}}"#);
        assert_eq!(e.path(), "cpts.A.values");
        assert_eq!(e.name(), "SchemaError");
    }

    #[test]
    fn invariant_errors() {
        let cyclic = r#"{"formatVersion": 1,
            "nodes": [
              {"id": "A", "name": "A", "outcomes": ["a", "b"], "parents": ["B"]},
              {"id": "B", "name": "B", "outcomes": ["a", "b"], "parents": ["A"]}],
            "cpts": {
              "A": {"parentOrder": ["B"], "values": [0.5, 0.5, 0.5, 0.5], "status": ["default", "default"]},
              "B": {"parentOrder": ["A"], "values": [0.5, 0.5, 0.5, 0.5], "status": ["default", "default"]}}}"#;
        assert_eq!(err(cyclic).name(), "InvariantViolation");
        let bad_sum = r#"{"formatVersion": 1, "nodes": [{"id": "A", "name": "A", "outcomes": ["a", "b"], "parents": []}],
            "cpts": {"A": {"parentOrder": [], "values": [0.5, 0.4], "status": ["default"]}}}"#;
        let e = err(bad_sum);
        assert_eq!(e.name(), "InvariantViolation");
        assert_eq!(e.path(), "cpts.A.values");
        let within = bad_sum.replace("0.4", "0.5000005");
        assert!(parse(within.as_bytes()).is_ok());
        let audited = parse_for_audit(bad_sum.as_bytes()).unwrap();
        assert!((audited.cpt("A").unwrap().column_sum(0).unwrap() - 0.9).abs() < 1e-12);
        let out_of_range = bad_sum.replace("0.4", "1.5");
        assert_eq!(parse_for_audit(out_of_range.as_bytes()).unwrap_err().name(), "InvariantViolation");
        let dup = r#"{"formatVersion": 1, "nodes": [{"id": "A", "name": "A", "outcomes": ["a", "a"], "parents": []}],
            "cpts": {"A": {"parentOrder": [], "values": [0.5, 0.5], "status": ["default"]}}}"#;
        assert_eq!(err(dup).name(), "InvariantViolation");
        let bad_order = r#"{"formatVersion": 1,
            "nodes": [
              {"id": "A", "name": "A", "outcomes": ["a", "b"], "parents": []},
              {"id": "B", "name": "B", "outcomes": ["a", "b"], "parents": ["A"]}],
            "cpts": {
              "A": {"parentOrder": [], "values": [0.5, 0.5], "status": ["default"]},
              "B": {"parentOrder": ["B"], "values": [0.5, 0.5, 0.5, 0.5], "status": ["default", "default"]}}}"#;
        assert_eq!(err(bad_order).path(), "cpts.B.parentOrder");
    }
}
