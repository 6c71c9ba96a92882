//! In-memory registry of networks, per-client view states and editor sessions.
//!
//! Each network sits behind its own `RwLock`: reads share it, mutations take it
//! exclusively, and the version check happens under the write guard so applied
//! mutations form a single total order. When both are needed the network lock
//! is always taken before the editor map.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;

use cptwb_core::elicit::{bar_layout, pie_layout, BarLayout, LabelMode, PieLayout};
use cptwb_core::views::reorder_column_map;
use cptwb_core::{
    store, validate, ColumnStatus, Distribution, EditorState, Network, NodeId, PrefixContext,
    Selection, TableViewState, TreeViewState, ValidationReport,
};

use crate::error::ApiError;

pub type Version = u64;

/// Everything the service holds for one network.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub network_id: String,
    pub version: Version,
    pub network: Network,
    pub tree_states: HashMap<(String, NodeId), TreeViewState>,
    pub table_states: HashMap<(String, NodeId), TableViewState>,
}

#[derive(Debug, Clone)]
struct EditorSlot {
    network_id: String,
    state: EditorState,
}

/// Network-content mutations; each applied one bumps the version by one.
#[derive(Debug, Clone)]
pub enum Mutation {
    Reorder {
        node: String,
        permutation: Vec<usize>,
    },
    SetColumns {
        node: String,
        columns: Vec<usize>,
        distribution: Vec<f64>,
        status: ColumnStatus,
    },
    CommitEditor {
        editor_id: String,
    },
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EditorView {
    pub editor_id: String,
    pub network_id: String,
    pub node: NodeId,
    pub outcomes: Vec<String>,
    pub columns: Vec<usize>,
    pub probs: Vec<f64>,
    pub locked: Vec<bool>,
    pub mixed: bool,
    pub pie: PieLayout,
    pub bar: BarLayout,
}

fn view_of(editor_id: &str, slot: &EditorSlot, mode: LabelMode) -> EditorView {
    let e = &slot.state;
    EditorView {
        editor_id: editor_id.to_owned(),
        network_id: slot.network_id.clone(),
        node: e.node.clone(),
        outcomes: e.outcomes.clone(),
        columns: e.columns.clone(),
        probs: e.probs().to_vec(),
        locked: e.locked().to_vec(),
        mixed: e.mixed,
        pie: pie_layout(e, mode),
        bar: bar_layout(e, mode),
    }
}

#[derive(Default)]
pub struct Registry {
    networks: RwLock<HashMap<String, Arc<RwLock<SessionRecord>>>>,
    editors: Mutex<HashMap<String, EditorSlot>>,
    next_network: AtomicU64,
    next_editor: AtomicU64,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&self, id: &str) -> Result<Arc<RwLock<SessionRecord>>, ApiError> {
        self.networks
            .read()
            .expect("registry lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_network(id))
    }

    /// Registers a parsed document under a fresh id at version 1.
    pub fn load(&self, bytes: &[u8]) -> Result<(String, Version), ApiError> {
        let network = store::parse(bytes)?;
        let id = format!("n{}", self.next_network.fetch_add(1, Ordering::Relaxed) + 1);
        let record = SessionRecord {
            network_id: id.clone(),
            version: 1,
            network,
            tree_states: HashMap::new(),
            table_states: HashMap::new(),
        };
        self.networks
            .write()
            .expect("registry lock poisoned")
            .insert(id.clone(), Arc::new(RwLock::new(record)));
        Ok((id, 1))
    }

    /// Runs `f` against a consistent snapshot of the record.
    pub fn read<T>(
        &self,
        id: &str,
        f: impl FnOnce(&SessionRecord) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let slot = self.slot(id)?;
        let guard = slot.read().expect("network lock poisoned");
        f(&guard)
    }

    pub fn document(&self, id: &str) -> Result<(Vec<u8>, Version), ApiError> {
        self.read(id, |r| Ok((store::serialize(&r.network), r.version)))
    }

    pub fn validation(&self, id: &str, tol: f64) -> Result<ValidationReport, ApiError> {
        self.read(id, |r| Ok(validate(&r.network, tol)))
    }

    pub fn version(&self, id: &str) -> Result<Version, ApiError> {
        self.read(id, |r| Ok(r.version))
    }

    /// Applies a content mutation if `expected` matches the current version.
    /// On any error nothing changes.
    pub fn apply(&self, id: &str, mutation: Mutation, expected: Version) -> Result<Version, ApiError> {
        let slot = self.slot(id)?;
        let mut rec = slot.write().expect("network lock poisoned");
        if rec.version != expected {
            return Err(ApiError::conflict(expected, rec.version));
        }
        match mutation {
            Mutation::Reorder { node, permutation } => {
                let cards = rec.network.cpt(&node)?.parent_cardinalities().to_vec();
                let map = reorder_column_map(&cards, &permutation)?;
                cptwb_core::reorder_parents(&mut rec.network, &node, &permutation)?;
                rec.tree_states.retain(|(_, n), _| n.as_str() != node);
                rec.table_states.retain(|(_, n), _| n.as_str() != node);
                let mut editors = self.editors.lock().expect("editor lock poisoned");
                for slot in editors.values_mut() {
                    if slot.network_id == id && slot.state.node.as_str() == node {
                        let mut cols: Vec<usize> =
                            slot.state.columns.iter().map(|&k| map[k]).collect();
                        cols.sort_unstable();
                        slot.state.columns = cols;
                    }
                }
            }
            Mutation::SetColumns {
                node,
                columns,
                distribution,
                status,
            } => {
                let d = Distribution::try_new(distribution)?;
                rec.network.set_columns(&node, &columns, &d, status)?;
            }
            Mutation::CommitEditor { editor_id } => {
                let state = {
                    let editors = self.editors.lock().expect("editor lock poisoned");
                    let slot = editors
                        .get(&editor_id)
                        .filter(|s| s.network_id == id)
                        .ok_or_else(|| ApiError::unknown_editor(&editor_id))?;
                    slot.state.clone()
                };
                state.commit(&mut rec.network)?;
            }
        }
        rec.version += 1;
        Ok(rec.version)
    }

    pub fn tree(
        &self,
        id: &str,
        client: &str,
        node: &str,
    ) -> Result<cptwb_core::CptTreeNode, ApiError> {
        self.read(id, |r| {
            let cpt = r.network.cpt(node)?;
            let key = (client.to_owned(), NodeId::new(node));
            let default;
            let state = match r.tree_states.get(&key) {
                Some(s) => s,
                None => {
                    default = TreeViewState::fully_expanded(node, cpt);
                    &default
                }
            };
            Ok(cptwb_core::build_cptree(&r.network, node, state)?)
        })
    }

    pub fn toggle_tree(
        &self,
        id: &str,
        client: &str,
        node: &str,
        context: &PrefixContext,
    ) -> Result<cptwb_core::CptTreeNode, ApiError> {
        let slot = self.slot(id)?;
        let mut guard = slot.write().expect("network lock poisoned");
        let rec = &mut *guard;
        let cpt = rec.network.cpt(node)?;
        let key = (client.to_owned(), NodeId::new(node));
        let mut state = rec
            .tree_states
            .get(&key)
            .cloned()
            .unwrap_or_else(|| TreeViewState::fully_expanded(node, cpt));
        state.toggle_expand(cpt, context)?;
        let tree = cptwb_core::build_cptree(&rec.network, node, &state)?;
        rec.tree_states.insert(key, state);
        Ok(tree)
    }

    pub fn table(&self, id: &str, client: &str, node: &str) -> Result<cptwb_core::ScptGrid, ApiError> {
        self.read(id, |r| {
            let key = (client.to_owned(), NodeId::new(node));
            let default;
            let state = match r.table_states.get(&key) {
                Some(s) => s,
                None => {
                    default = TableViewState::new(node);
                    &default
                }
            };
            Ok(cptwb_core::build_scpt(&r.network, node, state)?)
        })
    }

    pub fn toggle_table(
        &self,
        id: &str,
        client: &str,
        node: &str,
        context: &PrefixContext,
    ) -> Result<cptwb_core::ScptGrid, ApiError> {
        let slot = self.slot(id)?;
        let mut guard = slot.write().expect("network lock poisoned");
        let rec = &mut *guard;
        let cpt = rec.network.cpt(node)?;
        let key = (client.to_owned(), NodeId::new(node));
        let mut state = rec
            .table_states
            .get(&key)
            .cloned()
            .unwrap_or_else(|| TableViewState::new(node));
        state.toggle_shrink(cpt, context)?;
        let grid = cptwb_core::build_scpt(&rec.network, node, &state)?;
        rec.table_states.insert(key, state);
        Ok(grid)
    }

    pub fn begin_editor(
        &self,
        id: &str,
        node: &str,
        contexts: Vec<PrefixContext>,
        mode: LabelMode,
    ) -> Result<EditorView, ApiError> {
        let slot = self.slot(id)?;
        let rec = slot.read().expect("network lock poisoned");
        let selection = Selection::new(contexts)?;
        let state = EditorState::begin(&rec.network, node, &selection)?;
        let editor_id = format!("e{}", self.next_editor.fetch_add(1, Ordering::Relaxed) + 1);
        let slot = EditorSlot {
            network_id: id.to_owned(),
            state,
        };
        let view = view_of(&editor_id, &slot, mode);
        self.editors
            .lock()
            .expect("editor lock poisoned")
            .insert(editor_id, slot);
        Ok(view)
    }

    fn with_editor(
        &self,
        editor_id: &str,
        mode: LabelMode,
        f: impl FnOnce(&mut EditorState) -> Result<(), ApiError>,
    ) -> Result<EditorView, ApiError> {
        let mut editors = self.editors.lock().expect("editor lock poisoned");
        let slot = editors
            .get_mut(editor_id)
            .ok_or_else(|| ApiError::unknown_editor(editor_id))?;
        let mut next = slot.state.clone();
        f(&mut next)?;
        slot.state = next;
        Ok(view_of(editor_id, slot, mode))
    }

    pub fn editor(&self, editor_id: &str, mode: LabelMode) -> Result<EditorView, ApiError> {
        self.with_editor(editor_id, mode, |_| Ok(()))
    }

    pub fn editor_network(&self, editor_id: &str) -> Result<String, ApiError> {
        let editors = self.editors.lock().expect("editor lock poisoned");
        editors
            .get(editor_id)
            .map(|s| s.network_id.clone())
            .ok_or_else(|| ApiError::unknown_editor(editor_id))
    }

    pub fn set_probability(
        &self,
        editor_id: &str,
        outcome: usize,
        target: f64,
        mode: LabelMode,
    ) -> Result<EditorView, ApiError> {
        self.with_editor(editor_id, mode, |e| Ok(e.set_probability(outcome, target)?))
    }

    pub fn toggle_lock(
        &self,
        editor_id: &str,
        outcome: usize,
        mode: LabelMode,
    ) -> Result<EditorView, ApiError> {
        self.with_editor(editor_id, mode, |e| Ok(e.toggle_lock(outcome)?))
    }

    /// Commits an editor to its network under the version check.
    pub fn commit_editor(&self, editor_id: &str, expected: Version) -> Result<Version, ApiError> {
        let network_id = self.editor_network(editor_id)?;
        self.apply(
            &network_id,
            Mutation::CommitEditor {
                editor_id: editor_id.to_owned(),
            },
            expected,
        )
    }
}
