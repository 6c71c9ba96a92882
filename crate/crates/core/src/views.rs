//! View models for navigating a CPT: the conditional probability tree and the
//! shrinkable table, plus prefix contexts, selections and parent reordering.
//!
//! Every context is a prefix of the node's current parent order. Because the
//! first parent is the most significant column digit, a prefix always covers a
//! contiguous range of columns.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{increment, ColumnStatus, Cpt, FullAssignment, Network, NodeId};

/// Text shown in place of a collapsed range.
pub const PLACEHOLDER: &str = "…";

/// Assignment to the first `depth` parents of `node`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrefixContext {
    pub node: NodeId,
    pub outcomes: Vec<usize>,
}

impl PrefixContext {
    pub fn new(node: impl Into<NodeId>, outcomes: Vec<usize>) -> Self {
        PrefixContext {
            node: node.into(),
            outcomes,
        }
    }

    pub fn root(node: impl Into<NodeId>) -> Self {
        Self::new(node, Vec::new())
    }

    pub fn depth(&self) -> usize {
        self.outcomes.len()
    }

    pub fn child(&self, outcome: usize) -> Self {
        let mut outcomes = self.outcomes.clone();
        outcomes.push(outcome);
        PrefixContext {
            node: self.node.clone(),
            outcomes,
        }
    }

    /// True if `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &PrefixContext) -> bool {
        self.node == other.node && other.outcomes.starts_with(&self.outcomes)
    }

    pub fn validate(&self, cpt: &Cpt) -> Result<()> {
        let cards = cpt.parent_cardinalities();
        if self.depth() > cards.len() {
            return Err(Error::InvalidContext(format!(
                "depth {} exceeds parent count {}",
                self.depth(),
                cards.len()
            )));
        }
        for (i, (&o, &c)) in self.outcomes.iter().zip(cards).enumerate() {
            if o >= c {
                return Err(Error::InvalidContext(format!(
                    "outcome {o} of parent {i} out of range for cardinality {c}"
                )));
            }
        }
        Ok(())
    }

    /// The contiguous column range covered by this context.
    pub fn column_range(&self, cpt: &Cpt) -> Result<Range<usize>> {
        self.validate(cpt)?;
        let cards = cpt.parent_cardinalities();
        let d = self.depth();
        let width: usize = cards[d..].iter().product();
        let start = self
            .outcomes
            .iter()
            .zip(cards)
            .fold(0, |acc, (&o, &c)| acc * c + o)
            * width;
        Ok(start..start + width)
    }
}

/// Column indexes of every full assignment extending `c`.
pub fn resolve_context(cpt: &Cpt, c: &PrefixContext) -> Result<BTreeSet<usize>> {
    Ok(c.column_range(cpt)?.collect())
}

/// A non-empty set of contexts on one node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    contexts: Vec<PrefixContext>,
}

impl Selection {
    pub fn new(contexts: Vec<PrefixContext>) -> Result<Self> {
        let first = contexts.first().ok_or(Error::EmptySelection)?;
        if let Some(other) = contexts.iter().find(|c| c.node != first.node) {
            return Err(Error::InvalidContext(format!(
                "selection mixes nodes `{}` and `{}`",
                first.node, other.node
            )));
        }
        Ok(Selection { contexts })
    }

    pub fn single(c: PrefixContext) -> Self {
        Selection { contexts: vec![c] }
    }

    pub fn node(&self) -> &NodeId {
        &self.contexts[0].node
    }

    pub fn contexts(&self) -> &[PrefixContext] {
        &self.contexts
    }
}

pub fn resolve_selection(cpt: &Cpt, s: &Selection) -> Result<BTreeSet<usize>> {
    if s.contexts.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut out = BTreeSet::new();
    for c in &s.contexts {
        out.extend(c.column_range(cpt)?);
    }
    Ok(out)
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "expected {n} positions, got {}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidPermutation(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

/// Reorders the parents of `node` so new position `i` holds old parent `perm[i]`.
/// CPT columns and statuses move with their assignments.
pub fn reorder_parents(net: &mut Network, node: &str, perm: &[usize]) -> Result<()> {
    let spec = net.node(node)?;
    check_permutation(perm, spec.parents.len())?;
    let mut spec = spec.clone();
    let cpt = net.cpt(node)?.permute_parents(perm);
    spec.parents = perm.iter().map(|&p| spec.parents[p].clone()).collect();
    net.replace(spec, cpt);
    Ok(())
}

/// For a table with parent cardinalities `cards`, maps each old column index to
/// its index after `reorder_parents(perm)`.
pub fn reorder_column_map(cards: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm, cards.len())?;
    let new_cards: Vec<usize> = perm.iter().map(|&p| cards[p]).collect();
    let new_strides = crate::model::strides(&new_cards);
    // inverse: old position p sits at new position inv[p]
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    let total: usize = cards.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0; cards.len()];
    for _ in 0..total {
        out.push(
            digits
                .iter()
                .enumerate()
                .map(|(p, &d)| d * new_strides[inv[p]])
                .sum(),
        );
        increment(&mut digits, cards);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CPTREE

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TreeNodeKind {
    /// Parent-variable name level.
    NameNode,
    /// Parent-outcome level with further parents below.
    OutcomeNode,
    /// Last-level outcome (or the root of a parentless node); one per column.
    LeafRow,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CptTreeNode {
    pub kind: TreeNodeKind,
    pub label: String,
    pub context: PrefixContext,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    /// Outcome nodes only: whether the subtree below is open.
    pub expanded: bool,
    /// Set when an ancestor outcome node is collapsed.
    pub hidden: bool,
    pub children: Vec<CptTreeNode>,
}

impl CptTreeNode {
    /// Pre-order list of the whole tree, hidden nodes included.
    pub fn walk(&self) -> Vec<&CptTreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn leaves(&self) -> Vec<&CptTreeNode> {
        self.walk()
            .into_iter()
            .filter(|n| n.kind == TreeNodeKind::LeafRow)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeViewState {
    pub node: NodeId,
    pub expanded: BTreeSet<PrefixContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

impl TreeViewState {
    /// Everything collapsed below the first parent's outcomes.
    pub fn new(node: impl Into<NodeId>) -> Self {
        TreeViewState {
            node: node.into(),
            expanded: BTreeSet::new(),
            selection: None,
        }
    }

    /// Opens every outcome node above parent level `depth`, so `depth` parent
    /// levels are visible. `depth = 1` shows only the first parent.
    pub fn expanded_to(node: impl Into<NodeId>, cpt: &Cpt, depth: usize) -> Self {
        let mut state = Self::new(node);
        let limit = depth.min(cpt.parent_count());
        let mut frontier = vec![PrefixContext::root(state.node.clone())];
        for &card in &cpt.parent_cardinalities()[..limit.saturating_sub(1)] {
            frontier = frontier
                .iter()
                .flat_map(|c| (0..card).map(move |o| c.child(o)))
                .collect();
            state.expanded.extend(frontier.iter().cloned());
        }
        state
    }

    pub fn fully_expanded(node: impl Into<NodeId>, cpt: &Cpt) -> Self {
        Self::expanded_to(node, cpt, usize::MAX)
    }

    pub fn toggle_expand(&mut self, cpt: &Cpt, c: &PrefixContext) -> Result<()> {
        check_toggle(&self.node, cpt, c)?;
        if !self.expanded.remove(c) {
            self.expanded.insert(c.clone());
        }
        Ok(())
    }
}

fn check_toggle(node: &NodeId, cpt: &Cpt, c: &PrefixContext) -> Result<()> {
    if &c.node != node {
        return Err(Error::InvalidContext(format!(
            "context belongs to `{}`, view shows `{node}`",
            c.node
        )));
    }
    if c.depth() == 0 {
        return Err(Error::InvalidContext(
            "the root level is always visible".into(),
        ));
    }
    c.validate(cpt)
}

pub fn build_cptree(net: &Network, node: &str, state: &TreeViewState) -> Result<CptTreeNode> {
    let spec = net.node(node)?;
    let cpt = net.cpt(node)?;
    let root = PrefixContext::root(spec.id.clone());
    if spec.parents.is_empty() {
        return Ok(CptTreeNode {
            kind: TreeNodeKind::LeafRow,
            label: spec.name.clone(),
            context: root,
            column: Some(0),
            expanded: false,
            hidden: false,
            children: Vec::new(),
        });
    }
    let parents = spec
        .parents
        .iter()
        .map(|p| net.node(p.as_str()))
        .collect::<Result<Vec<_>>>()?;

    fn name_node(
        parents: &[&crate::model::NodeSpec],
        cpt: &Cpt,
        state: &TreeViewState,
        ctx: PrefixContext,
        hidden: bool,
    ) -> CptTreeNode {
        let d = ctx.depth();
        let parent = parents[d];
        let last = d + 1 == parents.len();
        let children = (0..parent.outcomes.len())
            .map(|o| {
                let c = ctx.child(o);
                if last {
                    let column = c.column_range(cpt).expect("context built in range").start;
                    CptTreeNode {
                        kind: TreeNodeKind::LeafRow,
                        label: parent.outcomes[o].clone(),
                        context: c,
                        column: Some(column),
                        expanded: false,
                        hidden,
                        children: Vec::new(),
                    }
                } else {
                    let open = state.expanded.contains(&c);
                    let sub = name_node(parents, cpt, state, c.clone(), hidden || !open);
                    CptTreeNode {
                        kind: TreeNodeKind::OutcomeNode,
                        label: parent.outcomes[o].clone(),
                        context: c,
                        column: None,
                        expanded: open,
                        hidden,
                        children: vec![sub],
                    }
                }
            })
            .collect();
        CptTreeNode {
            kind: TreeNodeKind::NameNode,
            label: parent.name.clone(),
            context: ctx,
            column: None,
            expanded: false,
            hidden,
            children,
        }
    }

    Ok(name_node(&parents, cpt, state, root, false))
}

// ---------------------------------------------------------------------------
// Shrinkable CPT

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableViewState {
    pub node: NodeId,
    pub shrunk: BTreeSet<PrefixContext>,
}

impl TableViewState {
    pub fn new(node: impl Into<NodeId>) -> Self {
        TableViewState {
            node: node.into(),
            shrunk: BTreeSet::new(),
        }
    }

    pub fn toggle_shrink(&mut self, cpt: &Cpt, c: &PrefixContext) -> Result<()> {
        check_toggle(&self.node, cpt, c)?;
        if !self.shrunk.remove(c) {
            self.shrunk.insert(c.clone());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HeaderCell {
    pub label: String,
    pub span: usize,
    pub context: PrefixContext,
    pub is_placeholder: bool,
    /// The cell's covered range is collapsed.
    pub shrunk: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HeaderRow {
    pub parent: NodeId,
    pub name: String,
    pub cells: Vec<HeaderCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum GridColumn {
    #[serde(rename_all = "camelCase")]
    Values {
        column_index: usize,
        probs: Vec<f64>,
        status: ColumnStatus,
    },
    #[serde(rename_all = "camelCase")]
    Placeholder {
        context: PrefixContext,
        covered: Range<usize>,
    },
}

impl GridColumn {
    pub fn is_placeholder(&self) -> bool {
        matches!(self, GridColumn::Placeholder { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScptGrid {
    pub node: NodeId,
    pub outcomes: Vec<String>,
    pub header_rows: Vec<HeaderRow>,
    pub value_columns: Vec<GridColumn>,
}

pub fn build_scpt(net: &Network, node: &str, state: &TableViewState) -> Result<ScptGrid> {
    let spec = net.node(node)?;
    let cpt = net.cpt(node)?;
    let parents = spec
        .parents
        .iter()
        .map(|p| net.node(p.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<HeaderRow> = parents
        .iter()
        .map(|p| HeaderRow {
            parent: p.id.clone(),
            name: p.name.clone(),
            cells: Vec::new(),
        })
        .collect();
    let mut columns = Vec::new();

    struct Walk<'a> {
        parents: &'a [&'a crate::model::NodeSpec],
        cpt: &'a Cpt,
        state: &'a TableViewState,
    }

    impl Walk<'_> {
        fn run(
            &self,
            ctx: &PrefixContext,
            rows: &mut [HeaderRow],
            columns: &mut Vec<GridColumn>,
        ) -> usize {
            let d = ctx.depth();
            if d == self.parents.len() {
                let k = ctx.column_range(self.cpt).expect("in range").start;
                columns.push(GridColumn::Values {
                    column_index: k,
                    probs: self.cpt.column(k).expect("in range").to_vec(),
                    status: self.cpt.statuses()[k],
                });
                return 1;
            }
            let mut span = 0;
            for (o, label) in self.parents[d].outcomes.iter().enumerate() {
                let c = ctx.child(o);
                let shrunk = self.state.shrunk.contains(&c);
                let width = if shrunk {
                    for row in rows[d + 1..].iter_mut() {
                        row.cells.push(HeaderCell {
                            label: PLACEHOLDER.into(),
                            span: 1,
                            context: c.clone(),
                            is_placeholder: true,
                            shrunk: false,
                        });
                    }
                    columns.push(GridColumn::Placeholder {
                        covered: c.column_range(self.cpt).expect("in range"),
                        context: c.clone(),
                    });
                    1
                } else {
                    self.run(&c, rows, columns)
                };
                rows[d].cells.push(HeaderCell {
                    label: label.clone(),
                    span: width,
                    context: c,
                    is_placeholder: false,
                    shrunk,
                });
                span += width;
            }
            span
        }
    }

    Walk {
        parents: &parents,
        cpt,
        state,
    }
    .run(&PrefixContext::root(spec.id.clone()), &mut rows, &mut columns);

    Ok(ScptGrid {
        node: spec.id.clone(),
        outcomes: spec.outcomes.clone(),
        header_rows: rows,
        value_columns: columns,
    })
}

/// Builds the brute-force list of full assignments extending `c`, in column order.
pub fn completions(cpt: &Cpt, c: &PrefixContext) -> Result<Vec<FullAssignment>> {
    c.validate(cpt)?;
    let cards = cpt.parent_cardinalities();
    let free = &cards[c.depth()..];
    let total: usize = free.iter().product();
    let mut digits = vec![0; free.len()];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        let mut a = c.outcomes.clone();
        a.extend_from_slice(&digits);
        out.push(FullAssignment::new(a));
        increment(&mut digits, free);
    }
    Ok(out)
}
