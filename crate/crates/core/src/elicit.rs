//! Probability assessment: lock-aware renormalization, editing sessions over
//! multi-column selections, pie and bar chart geometry, and validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ColumnStatus, Distribution, Network, NodeId};
use crate::views::{resolve_selection, Selection};

/// Unlocked remainder mass at or below which redistribution splits equally.
pub const DEGENERATE_MASS: f64 = 1e-12;
/// Element-wise tolerance when deciding whether selected columns agree.
pub const MIXED_TOLERANCE: f64 = 1e-12;

/// A working distribution over the columns of one selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EditorState {
    pub node: NodeId,
    pub outcomes: Vec<String>,
    pub columns: Vec<usize>,
    probs: Vec<f64>,
    locked: Vec<bool>,
    pub mixed: bool,
}

impl EditorState {
    /// Opens an editor on the union of the selection's columns. The working
    /// distribution is the lowest-index column; `mixed` records disagreement.
    pub fn begin(net: &Network, node: &str, s: &Selection) -> Result<Self> {
        let spec = net.node(node)?;
        let cpt = net.cpt(node)?;
        if s.node().as_str() != node {
            return Err(Error::InvalidContext(format!(
                "selection is on `{}`, editor on `{node}`",
                s.node()
            )));
        }
        let columns: Vec<usize> = resolve_selection(cpt, s)?.into_iter().collect();
        let first = cpt.column(columns[0])?;
        let mixed = columns[1..].iter().any(|&k| {
            cpt.column(k)
                .expect("resolved in range")
                .iter()
                .zip(first)
                .any(|(a, b)| (a - b).abs() > MIXED_TOLERANCE)
        });
        Ok(EditorState {
            node: spec.id.clone(),
            outcomes: spec.outcomes.clone(),
            columns,
            probs: first.to_vec(),
            locked: vec![false; first.len()],
            mixed,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn locked(&self) -> &[bool] {
        &self.locked
    }

    pub fn is_locked(&self, k: usize) -> bool {
        self.locked.get(k).copied().unwrap_or(false)
    }

    fn check_outcome(&self, k: usize) -> Result<()> {
        if k >= self.probs.len() {
            Err(Error::OutcomeOutOfRange {
                index: k,
                cardinality: self.probs.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Total probability of locked outcomes.
    pub fn locked_mass(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.locked)
            .filter(|(_, &l)| l)
            .map(|(p, _)| p)
            .sum()
    }

    pub fn toggle_lock(&mut self, k: usize) -> Result<()> {
        self.check_outcome(k)?;
        self.locked[k] = !self.locked[k];
        Ok(())
    }

    /// Sets outcome `k` to `target` and redistributes the difference over the
    /// other unlocked outcomes in proportion to their current values.
    ///
    /// The target is clamped to `[0, 1 - locked mass]`. If the unlocked others
    /// carry no mass the freed mass is split equally among them; if there are no
    /// unlocked others, `k` absorbs all unlocked mass.
    pub fn set_probability(&mut self, k: usize, target: f64) -> Result<()> {
        self.check_outcome(k)?;
        if self.locked[k] {
            return Err(Error::OutcomeLocked(k));
        }
        if !target.is_finite() {
            return Err(Error::InvalidTarget(target));
        }
        let free = (1.0 - self.locked_mass()).max(0.0);
        let others: Vec<usize> = (0..self.probs.len())
            .filter(|&j| j != k && !self.locked[j])
            .collect();
        let t = if others.is_empty() {
            free
        } else {
            target.clamp(0.0, free)
        };
        if t == self.probs[k] {
            return Ok(());
        }
        let remaining_before: f64 = others.iter().map(|&j| self.probs[j]).sum();
        let remaining_after = (free - t).max(0.0);
        if remaining_before > DEGENERATE_MASS {
            let factor = remaining_after / remaining_before;
            for &j in &others {
                self.probs[j] *= factor;
            }
        } else if !others.is_empty() {
            let share = remaining_after / others.len() as f64;
            for &j in &others {
                self.probs[j] = share;
            }
        }
        self.probs[k] = t;
        Ok(())
    }

    /// Writes the working distribution to every target column, marking them elicited.
    pub fn commit(&self, net: &mut Network) -> Result<()> {
        let d = Distribution::try_new(self.probs.clone())?;
        net.set_columns(self.node.as_str(), &self.columns, &d, ColumnStatus::Elicited)
    }

    /// Replaces the working distribution outright, e.g. for direct numeric entry.
    pub fn set_distribution(&mut self, d: &Distribution) -> Result<()> {
        if d.len() != self.probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "expected {} probabilities, got {}",
                self.probs.len(),
                d.len()
            )));
        }
        self.probs.copy_from_slice(d.as_slice());
        Ok(())
    }

    /// Test hook: overwrite probabilities without any checks.
    #[doc(hidden)]
    pub fn force_probs(&mut self, probs: Vec<f64>) {
        self.locked.resize(probs.len(), false);
        self.probs = probs;
    }
}

// ---------------------------------------------------------------------------
// Labels

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    #[default]
    Text,
    Percentage,
}

pub fn format_label(name: &str, p: f64, mode: LabelMode) -> String {
    match mode {
        LabelMode::Text => name.to_owned(),
        LabelMode::Percentage => format!("{name} {:.1}%", 100.0 * p),
    }
}

// ---------------------------------------------------------------------------
// Pie chart

/// Pie geometry options. Angles are degrees clockwise from 12 o'clock.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PieStyle {
    /// Radial offset of a locked sector, as a fraction of the radius.
    pub locked_offset: f64,
    /// Radius of label anchors, as a fraction of the radius.
    pub label_radius: f64,
    /// Minimum anchor separation, in degrees, for two labels to both show.
    pub label_separation: f64,
}

impl Default for PieStyle {
    fn default() -> Self {
        PieStyle {
            locked_offset: 0.08,
            label_radius: 1.15,
            label_separation: 12.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PieSector {
    pub start_angle: f64,
    pub sweep_angle: f64,
    pub handle_angle: f64,
    pub label_anchor_angle: f64,
    pub label: String,
    pub label_visible: bool,
    pub locked: bool,
    pub locked_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PieLayout {
    pub sectors: Vec<PieSector>,
    pub label_radius_fraction: f64,
}

pub fn pie_layout(e: &EditorState, mode: LabelMode) -> PieLayout {
    pie_layout_with(e, mode, &PieStyle::default())
}

pub fn pie_layout_with(e: &EditorState, mode: LabelMode, style: &PieStyle) -> PieLayout {
    let mut start = 0.0;
    let mut last_shown: Option<f64> = None;
    let sectors = e
        .probs
        .iter()
        .zip(&e.locked)
        .zip(&e.outcomes)
        .map(|((&p, &locked), name)| {
            let sweep = 360.0 * p;
            let anchor = start + sweep / 2.0;
            let visible = match last_shown {
                Some(prev) if anchor - prev < style.label_separation => false,
                _ => {
                    last_shown = Some(anchor);
                    true
                }
            };
            let sector = PieSector {
                start_angle: start,
                sweep_angle: sweep,
                handle_angle: start + sweep,
                label_anchor_angle: anchor,
                label: format_label(name, p, mode),
                label_visible: visible,
                locked,
                locked_offset: if locked { style.locked_offset } else { 0.0 },
            };
            start += sweep;
            sector
        })
        .collect();
    PieLayout {
        sectors,
        label_radius_fraction: style.label_radius,
    }
}

impl PieLayout {
    fn locked_mass_excluding(&self, k: usize) -> f64 {
        self.sectors
            .iter()
            .enumerate()
            .filter(|(i, s)| *i != k && s.locked)
            .map(|(_, s)| s.sweep_angle)
            .sum::<f64>()
            / 360.0
    }

    /// Converts a dragged handle position into the target probability for sector `k`:
    /// the clockwise sweep from the sector's start, clamped to the unlocked arc.
    pub fn angle_to_target(&self, k: usize, pointer: f64) -> Result<f64> {
        let sector = self.sectors.get(k).ok_or(Error::OutcomeOutOfRange {
            index: k,
            cardinality: self.sectors.len(),
        })?;
        let raw = pointer - sector.start_angle;
        let sweep = if (0.0..=360.0).contains(&raw) {
            raw
        } else {
            raw.rem_euclid(360.0)
        };
        let max = 360.0 * (1.0 - self.locked_mass_excluding(k)).max(0.0);
        Ok(sweep.clamp(0.0, max) / 360.0)
    }
}

// ---------------------------------------------------------------------------
// Bar chart

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Bar {
    pub length_fraction: f64,
    pub handle_position: f64,
    pub locked: bool,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BarLayout {
    pub bars: Vec<Bar>,
    pub ticks: Vec<f64>,
}

pub fn bar_layout(e: &EditorState, mode: LabelMode) -> BarLayout {
    let bars = e
        .probs
        .iter()
        .zip(&e.locked)
        .zip(&e.outcomes)
        .map(|((&p, &locked), name)| Bar {
            length_fraction: p,
            handle_position: p,
            locked,
            label: format_label(name, p, mode),
        })
        .collect();
    BarLayout {
        bars,
        ticks: (0..=10).map(|i| i as f64 / 10.0).collect(),
    }
}

impl BarLayout {
    /// Horizontal pointer fraction to target probability for bar `k`.
    pub fn pointer_to_target(&self, k: usize, x: f64) -> Result<f64> {
        if k >= self.bars.len() {
            return Err(Error::OutcomeOutOfRange {
                index: k,
                cardinality: self.bars.len(),
            });
        }
        let locked: f64 = self
            .bars
            .iter()
            .enumerate()
            .filter(|(i, b)| *i != k && b.locked)
            .map(|(_, b)| b.length_fraction)
            .sum();
        Ok(x.clamp(0.0, (1.0 - locked).max(0.0)))
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SumViolation {
    pub node: NodeId,
    pub column_index: usize,
    pub actual_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Unspecified {
    pub node: NodeId,
    pub column_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub sum_violations: Vec<SumViolation>,
    pub unspecified: Vec<Unspecified>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.sum_violations.is_empty() && self.unspecified.is_empty()
    }
}

/// Lists columns whose sum is off by more than `tol` and columns never elicited.
pub fn validate(net: &Network, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    for spec in net.nodes() {
        let cpt = net.cpt(spec.id.as_str()).expect("every node has a table");
        for (k, (col, status)) in cpt.columns().zip(cpt.statuses()).enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > tol {
                report.sum_violations.push(SumViolation {
                    node: spec.id.clone(),
                    column_index: k,
                    actual_sum: sum,
                });
            }
            if *status == ColumnStatus::Default {
                report.unspecified.push(Unspecified {
                    node: spec.id.clone(),
                    column_index: k,
                });
            }
        }
    }
    report
}

/// Default tolerance for [`validate`] when callers give none.
pub const DEFAULT_VALIDATION_TOLERANCE: f64 = 1e-6;
