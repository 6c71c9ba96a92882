//! Replays `.cpts.jsonl` elicitation scripts against a network.

use serde::Deserialize;

use cptwb_core::views::reorder_column_map;
use cptwb_core::{reorder_parents, EditorState, Network, PrefixContext, Selection};

/// Outcome by position or by name.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OutcomeRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

/// One line of a script.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Step {
    Select(Vec<PrefixContext>),
    Set { outcome: OutcomeRef, target: f64 },
    Lock(OutcomeRef),
    Unlock(OutcomeRef),
    Commit(Empty),
    Reorder { node: String, permutation: Vec<usize> },
}

/// A failure while executing a step: `name` is the engine error variant or a
/// script-level name such as `NoSelection`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepError {
    pub name: String,
    pub detail: String,
}

impl From<cptwb_core::Error> for StepError {
    fn from(e: cptwb_core::Error) -> Self {
        StepError {
            name: e.name().to_owned(),
            detail: e.to_string(),
        }
    }
}

/// Parses a script, one step per non-blank line. Errors carry the 1-based line.
pub fn parse_script(text: &str) -> Result<Vec<(usize, Step)>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|s| (i + 1, s))
                .map_err(|e| (i + 1, e.to_string()))
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct Session {
    editor: Option<EditorState>,
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn editor(&self) -> Option<&EditorState> {
        self.editor.as_ref()
    }

    fn active(&mut self) -> Result<&mut EditorState, StepError> {
        self.editor.as_mut().ok_or_else(|| StepError {
            name: "NoSelection".into(),
            detail: "no selection is active".into(),
        })
    }

    fn resolve(e: &EditorState, o: &OutcomeRef) -> Result<usize, StepError> {
        match o {
            OutcomeRef::Index(k) => Ok(*k),
            OutcomeRef::Name(n) => e.outcomes.iter().position(|x| x == n).ok_or_else(|| StepError {
                name: "UnknownOutcome".into(),
                detail: format!("node `{}` has no outcome `{n}`", e.node),
            }),
        }
    }

    fn ensure_lock(&mut self, o: &OutcomeRef, want: bool) -> Result<(), StepError> {
        let e = self.active()?;
        let k = Self::resolve(e, o)?;
        if k >= e.outcomes.len() {
            return Err(cptwb_core::Error::OutcomeOutOfRange {
                index: k,
                cardinality: e.outcomes.len(),
            }
            .into());
        }
        if e.is_locked(k) != want {
            e.toggle_lock(k)?;
        }
        Ok(())
    }

    pub fn step(&mut self, net: &mut Network, step: &Step) -> Result<(), StepError> {
        match step {
            Step::Select(contexts) => {
                let sel = Selection::new(contexts.clone())?;
                let node = sel.node().clone();
                self.editor = Some(EditorState::begin(net, node.as_str(), &sel)?);
            }
            Step::Set { outcome, target } => {
                let e = self.active()?;
                let k = Self::resolve(e, outcome)?;
                e.set_probability(k, *target)?;
            }
            Step::Lock(o) => self.ensure_lock(o, true)?,
            Step::Unlock(o) => self.ensure_lock(o, false)?,
            Step::Commit(_) => {
                let e = self.active()?;
                e.commit(net)?;
            }
            Step::Reorder { node, permutation } => {
                let cards = net.cpt(node)?.parent_cardinalities().to_vec();
                let map = reorder_column_map(&cards, permutation)?;
                reorder_parents(net, node, permutation)?;
                // the open editor keeps pointing at the same parent assignments
                if let Some(e) = self.editor.as_mut().filter(|e| e.node.as_str() == node) {
                    let mut cols: Vec<usize> = e.columns.iter().map(|&k| map[k]).collect();
                    cols.sort_unstable();
                    e.columns = cols;
                }
            }
        }
        Ok(())
    }
}
