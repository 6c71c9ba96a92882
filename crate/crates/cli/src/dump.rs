//! Plain-text renderings of the tree and table views.

use cptwb_core::views::{GridColumn, TreeNodeKind, PLACEHOLDER};
use cptwb_core::{ColumnStatus, CptTreeNode, ScptGrid};

fn status_word(s: ColumnStatus) -> &'static str {
    match s {
        ColumnStatus::Default => "default",
        ColumnStatus::Elicited => "elicited",
    }
}

fn join_probs(probs: &[f64]) -> String {
    probs.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

/// One line per visible tree node, two spaces per level. Collapsed outcome
/// nodes end in the placeholder; leaves show their column and distribution.
pub fn render_tree(root: &CptTreeNode, probs: impl Fn(usize) -> (Vec<f64>, ColumnStatus)) -> String {
    let mut out = String::new();
    walk(root, 0, &probs, &mut out);
    out
}

fn walk(
    node: &CptTreeNode,
    level: usize,
    probs: &impl Fn(usize) -> (Vec<f64>, ColumnStatus),
    out: &mut String,
) {
    if node.hidden {
        return;
    }
    out.push_str(&"  ".repeat(level));
    match node.kind {
        TreeNodeKind::NameNode => out.push_str(&node.label),
        TreeNodeKind::OutcomeNode => {
            out.push_str(&node.label);
            if !node.expanded {
                out.push(' ');
                out.push_str(PLACEHOLDER);
            }
        }
        TreeNodeKind::LeafRow => {
            let k = node.column.expect("leaf rows carry a column");
            let (p, s) = probs(k);
            out.push_str(&format!("{} [{k}] {} {}", node.label, join_probs(&p), status_word(s)));
        }
    }
    out.push('\n');
    for c in &node.children {
        walk(c, level + 1, probs, out);
    }
}

/// Pipe-separated grid; a spanning header cell is written once, followed by
/// empty cells for the rest of its span. Cells are padded so columns line up.
pub fn render_table(grid: &ScptGrid) -> String {
    let width = grid.value_columns.len() + 1;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for hr in &grid.header_rows {
        let mut row = vec![hr.name.clone()];
        for cell in &hr.cells {
            row.push(cell.label.clone());
            row.extend(std::iter::repeat_n(String::new(), cell.span.saturating_sub(1)));
        }
        rows.push(row);
    }
    for (i, name) in grid.outcomes.iter().enumerate() {
        let mut row = vec![name.clone()];
        for col in &grid.value_columns {
            row.push(match col {
                GridColumn::Values { probs, .. } => probs[i].to_string(),
                GridColumn::Placeholder { .. } => PLACEHOLDER.to_owned(),
            });
        }
        rows.push(row);
    }
    let mut status = vec!["[status]".to_owned()];
    for col in &grid.value_columns {
        status.push(match col {
            GridColumn::Values { status, .. } => status_word(*status).to_owned(),
            GridColumn::Placeholder { .. } => PLACEHOLDER.to_owned(),
        });
    }
    rows.push(status);

    let mut widths = vec![0; width];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
    }
    out
}
