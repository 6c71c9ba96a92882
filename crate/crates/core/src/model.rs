//! Network structure and conditional probability table storage.
//!
//! A [`Cpt`] is an `m x C` matrix: rows are child outcomes, columns are
//! combinations of parent outcomes. Columns are numbered in mixed radix with
//! the first parent most significant, so the leftmost header row of a flat
//! table varies slowest and every prefix of parent assignments covers a
//! contiguous run of columns.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on column sums after any committed mutation.
pub const RUNTIME_TOLERANCE: f64 = 1e-9;

/// Outcome names given to a node created without an explicit list.
pub const DEFAULT_OUTCOMES: [&str; 2] = ["State0", "State1"];

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

/// A chance node: ordered outcomes and an ordered parent list.
///
/// The parent order is the current layout order of the node's [`Cpt`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub name: String,
    pub outcomes: Vec<String>,
    pub parents: Vec<NodeId>,
}

impl NodeSpec {
    pub fn outcome_index(&self, name: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == name)
    }

    pub fn parent_position(&self, parent: &str) -> Option<usize> {
        self.parents.iter().position(|p| p.as_str() == parent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnStatus {
    Default,
    Elicited,
}

/// Outcome index per parent, in the node's current parent order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FullAssignment(Vec<usize>);

impl FullAssignment {
    pub fn new(indexes: Vec<usize>) -> Self {
        FullAssignment(indexes)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for FullAssignment {
    fn from(v: Vec<usize>) -> Self {
        FullAssignment(v)
    }
}

/// A discrete distribution over a node's outcomes.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates entries in `[0, 1]` and a sum within [`RUNTIME_TOLERANCE`] of one.
    pub fn try_new(probs: Vec<f64>) -> Result<Self> {
        check_column(&probs, RUNTIME_TOLERANCE).map_err(Error::InvalidDistribution)?;
        Ok(Distribution(probs))
    }

    pub fn uniform(m: usize) -> Self {
        Distribution(vec![1.0 / m as f64; m])
    }

    /// Wraps a column read back from a table; no validation.
    pub(crate) fn from_column(col: &[f64]) -> Self {
        Distribution(col.to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Checks entries and sum of a single column; returns a human-readable reason on failure.
pub(crate) fn check_column(col: &[f64], tol: f64) -> std::result::Result<(), String> {
    if col.is_empty() {
        return Err("distribution is empty".into());
    }
    if let Some((i, p)) = col
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(format!("entry {i} = {p} lies outside [0, 1]"));
    }
    let sum: f64 = col.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("entries sum to {sum}, not 1"));
    }
    Ok(())
}

/// Dense conditional probability table with per-column elicitation status.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    child_cardinality: usize,
    parent_cardinalities: Vec<usize>,
    // column-major: column k occupies values[k*m .. (k+1)*m]
    values: Vec<f64>,
    status: Vec<ColumnStatus>,
}

impl Cpt {
    /// Uniform table with every column marked default.
    pub fn uniform(child_cardinality: usize, parent_cardinalities: Vec<usize>) -> Self {
        let columns: usize = parent_cardinalities.iter().product();
        let p = 1.0 / child_cardinality as f64;
        Cpt {
            child_cardinality,
            parent_cardinalities,
            values: vec![p; columns * child_cardinality],
            status: vec![ColumnStatus::Default; columns],
        }
    }

    /// Builds a table from column-major values. Checks shape and entry range only;
    /// column sums are the caller's concern since the tolerance depends on the source.
    pub fn from_columns(
        child_cardinality: usize,
        parent_cardinalities: Vec<usize>,
        values: Vec<f64>,
        status: Vec<ColumnStatus>,
    ) -> Result<Self> {
        if child_cardinality == 0 {
            return Err(Error::EmptyOutcomes);
        }
        if let Some(&c) = parent_cardinalities.iter().find(|&&c| c == 0) {
            return Err(Error::OutcomeOutOfRange {
                index: 0,
                cardinality: c,
            });
        }
        let columns: usize = parent_cardinalities.iter().product();
        if status.len() != columns {
            return Err(Error::IndexOutOfRange {
                index: status.len(),
                len: columns,
            });
        }
        if values.len() != columns * child_cardinality {
            return Err(Error::InvalidDistribution(format!(
                "expected {} values, got {}",
                columns * child_cardinality,
                values.len()
            )));
        }
        if let Some(p) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} lies outside [0, 1]"
            )));
        }
        Ok(Cpt {
            child_cardinality,
            parent_cardinalities,
            values,
            status,
        })
    }

    pub fn child_cardinality(&self) -> usize {
        self.child_cardinality
    }

    pub fn parent_cardinalities(&self) -> &[usize] {
        &self.parent_cardinalities
    }

    pub fn parent_count(&self) -> usize {
        self.parent_cardinalities.len()
    }

    pub fn column_count(&self) -> usize {
        self.status.len()
    }

    /// Total number of stored probabilities, `m * C`.
    pub fn parameter_count(&self) -> usize {
        self.values.len()
    }

    /// Place value of each parent digit: `stride[i] = prod_{j>i} c_j`.
    pub fn strides(&self) -> Vec<usize> {
        strides(&self.parent_cardinalities)
    }

    pub fn column(&self, k: usize) -> Result<&[f64]> {
        self.check_index(k)?;
        let m = self.child_cardinality;
        Ok(&self.values[k * m..(k + 1) * m])
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.child_cardinality)
    }

    pub fn status(&self, k: usize) -> Result<ColumnStatus> {
        self.check_index(k)?;
        Ok(self.status[k])
    }

    pub fn statuses(&self) -> &[ColumnStatus] {
        &self.status
    }

    /// Value at child outcome `row`, column `k`.
    pub fn value(&self, row: usize, k: usize) -> Result<f64> {
        if row >= self.child_cardinality {
            return Err(Error::OutcomeOutOfRange {
                index: row,
                cardinality: self.child_cardinality,
            });
        }
        Ok(self.column(k)?[row])
    }

    /// Mixed-radix column number of a full parent assignment, first parent most significant.
    pub fn column_index(&self, a: &FullAssignment) -> Result<usize> {
        let cards = &self.parent_cardinalities;
        if a.len() != cards.len() {
            return Err(Error::ArityMismatch {
                expected: cards.len(),
                actual: a.len(),
            });
        }
        a.as_slice()
            .iter()
            .zip(cards)
            .try_fold(0usize, |acc, (&digit, &radix)| {
                if digit >= radix {
                    Err(Error::OutcomeOutOfRange {
                        index: digit,
                        cardinality: radix,
                    })
                } else {
                    Ok(acc * radix + digit)
                }
            })
    }

    pub fn index_to_assignment(&self, k: usize) -> Result<FullAssignment> {
        self.check_index(k)?;
        let mut digits = vec![0; self.parent_cardinalities.len()];
        let mut rest = k;
        for (slot, &radix) in digits.iter_mut().zip(&self.parent_cardinalities).rev() {
            *slot = rest % radix;
            rest /= radix;
        }
        Ok(FullAssignment(digits))
    }

    pub fn column_sum(&self, k: usize) -> Result<f64> {
        Ok(self.column(k)?.iter().sum())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.status.len() {
            Err(Error::IndexOutOfRange {
                index: k,
                len: self.status.len(),
            })
        } else {
            Ok(())
        }
    }

    fn write_column(&mut self, k: usize, col: &[f64], status: ColumnStatus) {
        let m = self.child_cardinality;
        self.values[k * m..(k + 1) * m].copy_from_slice(col);
        self.status[k] = status;
    }

    /// Appends a parent as the least significant digit; each column is replicated
    /// once per new outcome and keeps its status.
    fn append_parent(&self, cardinality: usize) -> Cpt {
        let m = self.child_cardinality;
        let mut values = Vec::with_capacity(self.values.len() * cardinality);
        let mut status = Vec::with_capacity(self.status.len() * cardinality);
        for (col, &st) in self.columns().zip(&self.status) {
            for _ in 0..cardinality {
                values.extend_from_slice(col);
                status.push(st);
            }
        }
        debug_assert_eq!(values.len(), status.len() * m);
        let mut parent_cardinalities = self.parent_cardinalities.clone();
        parent_cardinalities.push(cardinality);
        Cpt {
            child_cardinality: m,
            parent_cardinalities,
            values,
            status,
        }
    }

    /// Returns a table whose parent `i` is old parent `perm[i]`. Columns and their
    /// statuses are moved so every identity-keyed lookup is unchanged.
    pub(crate) fn permute_parents(&self, perm: &[usize]) -> Cpt {
        let m = self.child_cardinality;
        let old_strides = self.strides();
        let new_cards: Vec<usize> = perm.iter().map(|&p| self.parent_cardinalities[p]).collect();
        let mut values = Vec::with_capacity(self.values.len());
        let mut status = Vec::with_capacity(self.status.len());
        let mut digits = vec![0usize; new_cards.len()];
        for _ in 0..self.status.len() {
            let old: usize = digits
                .iter()
                .zip(perm)
                .map(|(&d, &p)| d * old_strides[p])
                .sum();
            values.extend_from_slice(&self.values[old * m..(old + 1) * m]);
            status.push(self.status[old]);
            increment(&mut digits, &new_cards);
        }
        Cpt {
            child_cardinality: m,
            parent_cardinalities: new_cards,
            values,
            status,
        }
    }
}

pub(crate) fn strides(cards: &[usize]) -> Vec<usize> {
    let mut out = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * cards[i + 1];
    }
    out
}

/// Advances a mixed-radix odometer, last digit fastest. Wraps to all zeros.
pub(crate) fn increment(digits: &mut [usize], radices: &[usize]) {
    for (d, &r) in digits.iter_mut().zip(radices).rev() {
        *d += 1;
        if *d < r {
            return;
        }
        *d = 0;
    }
}

/// A Bayesian network: chance nodes and one CPT per node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Network {
    nodes: BTreeMap<NodeId, NodeSpec>,
    cpts: BTreeMap<NodeId, Cpt>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates a parentless node whose id is its name. Without an outcome list the
    /// node gets `State0`/`State1`. The single column is uniform and default.
    pub fn create_node(&mut self, name: &str, outcomes: Option<Vec<String>>) -> Result<&NodeSpec> {
        self.add_node(name, name, outcomes)
    }

    pub fn add_node(
        &mut self,
        id: &str,
        name: &str,
        outcomes: Option<Vec<String>>,
    ) -> Result<&NodeSpec> {
        if id.is_empty() || name.is_empty() {
            return Err(Error::EmptyName);
        }
        if self.nodes.contains_key(id) {
            return Err(Error::DuplicateNode(id.to_owned()));
        }
        let outcomes = match outcomes {
            Some(o) => o,
            None => DEFAULT_OUTCOMES.iter().map(|s| s.to_string()).collect(),
        };
        check_outcomes(&outcomes)?;
        let id = NodeId::new(id);
        let cpt = Cpt::uniform(outcomes.len(), Vec::new());
        self.cpts.insert(id.clone(), cpt);
        let spec = NodeSpec {
            id: id.clone(),
            name: name.to_owned(),
            outcomes,
            parents: Vec::new(),
        };
        Ok(self.nodes.entry(id).or_insert(spec))
    }

    /// Adds `parent` as the last parent of `child`, replicating existing columns.
    pub fn add_parent(&mut self, child: &str, parent: &str) -> Result<&Cpt> {
        let parent_card = self.node(parent)?.outcomes.len();
        let child_spec = self.node(child)?;
        if child_spec.parent_position(parent).is_some() {
            return Err(Error::DuplicateEdge {
                child: child.to_owned(),
                parent: parent.to_owned(),
            });
        }
        if child == parent || self.ancestors(parent).contains(child) {
            return Err(Error::CycleDetected {
                child: child.to_owned(),
                parent: parent.to_owned(),
            });
        }
        let new_cpt = self.cpts[child].append_parent(parent_card);
        let id = child_spec.id.clone();
        self.nodes
            .get_mut(child)
            .expect("checked above")
            .parents
            .push(NodeId::new(parent));
        self.cpts.insert(id.clone(), new_cpt);
        Ok(&self.cpts[&id])
    }

    pub fn node(&self, id: &str) -> Result<&NodeSpec> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    pub fn cpt(&self, id: &str) -> Result<&Cpt> {
        self.cpts
            .get(id)
            .ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get_distribution(&self, node: &str, a: &FullAssignment) -> Result<Distribution> {
        let cpt = self.cpt(node)?;
        let k = cpt.column_index(a)?;
        Ok(Distribution::from_column(cpt.column(k)?))
    }

    /// Overwrites every listed column with `d` and sets its status. All-or-nothing.
    pub fn set_columns(
        &mut self,
        node: &str,
        columns: &[usize],
        d: &Distribution,
        status: ColumnStatus,
    ) -> Result<()> {
        let cpt = self.cpt(node)?;
        if d.len() != cpt.child_cardinality() {
            return Err(Error::InvalidDistribution(format!(
                "expected {} probabilities, got {}",
                cpt.child_cardinality(),
                d.len()
            )));
        }
        check_column(d.as_slice(), RUNTIME_TOLERANCE).map_err(Error::InvalidDistribution)?;
        if let Some(&k) = columns.iter().find(|&&k| k >= cpt.column_count()) {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: cpt.column_count(),
            });
        }
        let cpt = self.cpts.get_mut(node).expect("checked above");
        for &k in columns {
            cpt.write_column(k, d.as_slice(), status);
        }
        Ok(())
    }

    /// All strict ancestors of `id`.
    pub fn ancestors(&self, id: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = vec![id];
        while let Some(cur) = stack.pop() {
            if let Some(spec) = self.nodes.get(cur) {
                for p in &spec.parents {
                    if seen.insert(p.as_str().to_owned()) {
                        stack.push(p.as_str());
                    }
                }
            }
        }
        seen
    }

    pub(crate) fn replace(&mut self, spec: NodeSpec, cpt: Cpt) {
        self.cpts.insert(spec.id.clone(), cpt);
        self.nodes.insert(spec.id.clone(), spec);
    }

    /// Assembles a network from parts without checking invariants; callers validate.
    pub(crate) fn from_parts(
        nodes: BTreeMap<NodeId, NodeSpec>,
        cpts: BTreeMap<NodeId, Cpt>,
    ) -> Network {
        Network { nodes, cpts }
    }
}

pub(crate) fn check_outcomes(outcomes: &[String]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let mut seen = BTreeSet::new();
    for o in outcomes {
        if o.is_empty() {
            return Err(Error::EmptyName);
        }
        if !seen.insert(o.as_str()) {
            return Err(Error::DuplicateOutcome(o.clone()));
        }
    }
    Ok(())
}
