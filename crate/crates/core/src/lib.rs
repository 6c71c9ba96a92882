//! Conditional probability table workbench for Bayesian networks.
//!
//! - [`model`]: network structure and CPT storage with mixed-radix column indexing.
//! - [`views`]: the conditional probability tree, the shrinkable table, prefix
//!   contexts, selections and parent reordering.
//! - [`elicit`]: lock-aware editing sessions, pie/bar geometry and validation.
//! - [`store`]: canonical `.cptn` persistence.

pub mod elicit;
pub mod error;
pub mod model;
pub mod store;
pub mod views;

pub use elicit::{
    bar_layout, format_label, pie_layout, validate, BarLayout, EditorState, LabelMode, PieLayout,
    ValidationReport,
};
pub use error::{Error, Result};
pub use model::{ColumnStatus, Cpt, Distribution, FullAssignment, Network, NodeId, NodeSpec};
pub use store::StoreError;
pub use views::{
    build_cptree, build_scpt, reorder_parents, resolve_context, resolve_selection, CptTreeNode,
    PrefixContext, ScptGrid, Selection, TableViewState, TreeViewState,
};
