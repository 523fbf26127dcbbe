//! Network-modulation synthesis.
//!
//! A [`SynthArchitecture`] is a tree of nodes sharing one
//! [`AutoencoderModel`](crate::autoencoder::AutoencoderModel):
//!
//! - the root **modulator** decodes a latent track into magnitude frames;
//! - a **carrier** re-analyzes its parent's audio and predicts every frame
//!   through the full network, with an optional latent bias and feedback of
//!   its own previous prediction;
//! - a **predictive-feedback** node seeds a time-domain buffer from its
//!   parent's first frame and, frame by frame, rotates the start of its own
//!   reconstructed prediction into that buffer.
//!
//! Pitch shift and envelope are applied to leaf audio only.

mod render;
mod spec;

pub use render::{
    frames_for_duration, render_architecture, render_carrier, render_modulator,
    render_predictive_feedback, NodeRender, PredictiveFeedback, RenderConfig, RenderResult,
    DEFAULT_ROTATION, PREDICTIVE_GRIFFIN_LIM_ITERATIONS,
};
pub use spec::{ArchitectureSpec, EnvelopeSpec, NodeSpec, TrackSpec};

use std::collections::{HashMap, HashSet};

use crate::autoencoder::{LatentVector, LATENT_DIM};
use crate::dsp::Envelope;
use crate::{Error, Result};

/// Latent values for a node, fixed or one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamTrack {
    Constant(LatentVector),
    Automation(Vec<LatentVector>),
}

impl ParamTrack {
    /// Builds an automation track from `N × 8` rows.
    pub fn automation(rows: Vec<LatentVector>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Argument("automation needs at least one row".into()));
        }
        Ok(ParamTrack::Automation(rows))
    }

    /// Values for frame `t`; automation shorter than the render repeats its
    /// final row.
    pub fn row(&self, t: usize) -> &LatentVector {
        match self {
            ParamTrack::Constant(v) => v,
            ParamTrack::Automation(rows) => &rows[t.min(rows.len() - 1)],
        }
    }

    /// Number of automation rows; `None` for a constant track.
    pub fn automation_rows(&self) -> Option<usize> {
        match self {
            ParamTrack::Constant(_) => None,
            ParamTrack::Automation(rows) => Some(rows.len()),
        }
    }

    pub fn is_all_zero(&self) -> bool {
        match self {
            ParamTrack::Constant(v) => v.is_zero(),
            ParamTrack::Automation(rows) => rows.iter().all(LatentVector::is_zero),
        }
    }

    pub(crate) fn warn_if_short(&self, node: &str, frames: usize) {
        if let Some(n) = self.automation_rows() {
            if n < frames {
                tracing::warn!(
                    node,
                    rows = n,
                    frames,
                    "automation shorter than render; repeating its final row"
                );
            }
        }
    }
}

impl From<LatentVector> for ParamTrack {
    fn from(v: LatentVector) -> Self {
        ParamTrack::Constant(v)
    }
}

/// What a node does with its input, and the parameters that go with it.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeMode {
    Modulator { latent: ParamTrack },
    Carrier { bias: Option<ParamTrack>, feedback: f64 },
    PredictiveFeedback,
}

impl NodeMode {
    pub fn name(&self) -> &'static str {
        match self {
            NodeMode::Modulator { .. } => "modulator",
            NodeMode::Carrier { .. } => "carrier",
            NodeMode::PredictiveFeedback => "predictive_feedback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthNode {
    pub id: String,
    pub parent: Option<String>,
    pub mode: NodeMode,
    /// Semitones; leaves only.
    pub pitch_shift: f64,
    /// Leaves only.
    pub envelope: Option<Envelope>,
}

impl SynthNode {
    pub fn modulator(id: impl Into<String>, latent: impl Into<ParamTrack>) -> Self {
        Self {
            id: id.into(),
            parent: None,
            mode: NodeMode::Modulator {
                latent: latent.into(),
            },
            pitch_shift: 0.0,
            envelope: None,
        }
    }

    pub fn carrier(
        id: impl Into<String>,
        parent: impl Into<String>,
        bias: Option<ParamTrack>,
        feedback: f64,
    ) -> Self {
        Self {
            id: id.into(),
            parent: Some(parent.into()),
            mode: NodeMode::Carrier { bias, feedback },
            pitch_shift: 0.0,
            envelope: None,
        }
    }

    pub fn predictive_feedback(id: impl Into<String>, parent: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            parent: Some(parent.into()),
            mode: NodeMode::PredictiveFeedback,
            pitch_shift: 0.0,
            envelope: None,
        }
    }

    pub fn with_pitch_shift(mut self, semitones: f64) -> Self {
        self.pitch_shift = semitones;
        self
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = Some(envelope);
        self
    }
}

/// A validated single-rooted tree of nodes. Node order is preserved and
/// decides the order of children and of the rendered leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthArchitecture {
    nodes: Vec<SynthNode>,
    root: usize,
    children: Vec<Vec<usize>>,
}

/// Ids of nodes lying on a parent cycle, in input order. Assumes every
/// parent names an existing node.
fn cycle_members(nodes: &[SynthNode], index: &HashMap<&str, usize>) -> Vec<String> {
    let mut on_cycle = vec![false; nodes.len()];
    for start in 0..nodes.len() {
        let mut path = vec![start];
        let mut cur = start;
        while let Some(p) = nodes[cur].parent.as_deref() {
            cur = index[p];
            if let Some(pos) = path.iter().position(|&i| i == cur) {
                for &i in &path[pos..] {
                    on_cycle[i] = true;
                }
                break;
            }
            path.push(cur);
        }
    }
    (0..nodes.len())
        .filter(|&i| on_cycle[i])
        .map(|i| nodes[i].id.clone())
        .collect()
}

impl SynthArchitecture {
    pub fn new(nodes: Vec<SynthNode>) -> Result<Self> {
        let arch_err = |nodes: Vec<String>, message: &str| Error::Architecture {
            nodes,
            message: message.to_string(),
        };
        if nodes.is_empty() {
            return Err(arch_err(vec![], "architecture has no nodes"));
        }

        let mut index = HashMap::new();
        let mut dupes = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                dupes.push(n.id.clone());
            }
        }
        if !dupes.is_empty() {
            return Err(arch_err(dupes, "duplicate node ids"));
        }

        let unknown: Vec<String> = nodes
            .iter()
            .filter(|n| n.parent.as_deref().is_some_and(|p| !index.contains_key(p)))
            .map(|n| n.id.clone())
            .collect();
        if !unknown.is_empty() {
            return Err(arch_err(unknown, "parent does not name an existing node"));
        }

        let roots: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].parent.is_none()).collect();
        match roots.len() {
            0 => {
                return Err(arch_err(
                    cycle_members(&nodes, &index),
                    "cycle: no root node (every node names a parent)",
                ))
            }
            1 => {}
            _ => {
                return Err(arch_err(
                    roots.iter().map(|&i| nodes[i].id.clone()).collect(),
                    "more than one root node",
                ))
            }
        }
        let root = roots[0];

        let mut children = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = &n.parent {
                children[index[p.as_str()]].push(i);
            }
        }
        let mut seen = HashSet::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            seen.insert(i);
            stack.extend(&children[i]);
        }
        if seen.len() != nodes.len() {
            return Err(arch_err(
                cycle_members(&nodes, &index),
                "cycle: nodes are not reachable from the root",
            ));
        }

        if !matches!(nodes[root].mode, NodeMode::Modulator { .. }) {
            return Err(arch_err(vec![nodes[root].id.clone()], "the root must be a modulator"));
        }
        let stray: Vec<String> = nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| *i != root && matches!(n.mode, NodeMode::Modulator { .. }))
            .map(|(_, n)| n.id.clone())
            .collect();
        if !stray.is_empty() {
            return Err(arch_err(stray, "only the root may be a modulator"));
        }

        for n in &nodes {
            if let NodeMode::Carrier { feedback, .. } = n.mode {
                if !(0.0..=1.0).contains(&feedback) {
                    return Err(Error::Spec {
                        node: n.id.clone(),
                        field: "feedback".into(),
                        message: format!("{feedback} is outside [0, 1]"),
                    });
                }
            }
            if !n.pitch_shift.is_finite()
                || n.pitch_shift.abs() > crate::dsp::MAX_PITCH_SHIFT_SEMITONES
            {
                return Err(Error::Spec {
                    node: n.id.clone(),
                    field: "pitch_shift_semitones".into(),
                    message: format!("{} is outside ±48", n.pitch_shift),
                });
            }
            if let Some(env) = &n.envelope {
                env.validate().map_err(|e| Error::Spec {
                    node: n.id.clone(),
                    field: "envelope".into(),
                    message: e.to_string(),
                })?;
            }
        }

        Ok(Self {
            nodes,
            root,
            children,
        })
    }

    pub fn nodes(&self) -> &[SynthNode] {
        &self.nodes
    }

    pub fn root(&self) -> &SynthNode {
        &self.nodes[self.root]
    }

    pub fn node(&self, id: &str) -> Option<&SynthNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn children_of(&self, id: &str) -> impl Iterator<Item = &SynthNode> {
        let idx = self.nodes.iter().position(|n| n.id == id);
        idx.into_iter()
            .flat_map(move |i| self.children[i].iter().map(move |&c| &self.nodes[c]))
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        self.children_of(id).next().is_none()
    }

    /// Leaf ids in node order.
    pub fn leaf_ids(&self) -> Vec<&str> {
        (0..self.nodes.len())
            .filter(|&i| self.children[i].is_empty())
            .map(|i| self.nodes[i].id.as_str())
            .collect()
    }

    /// Node indices in depth-first order from the root.
    pub(crate) fn depth_first(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            order.push(i);
            stack.extend(self.children[i].iter().rev());
        }
        order
    }

    pub(crate) fn parent_index(&self, i: usize) -> Option<usize> {
        let parent = self.nodes[i].parent.as_deref()?;
        self.nodes.iter().position(|n| n.id == parent)
    }

    pub(crate) fn is_leaf_index(&self, i: usize) -> bool {
        self.children[i].is_empty()
    }
}

/// Convenience: an N × 8 automation track from plain rows.
pub fn automation_from_rows(rows: &[[f64; LATENT_DIM]]) -> Result<ParamTrack> {
    ParamTrack::automation(
        rows.iter()
            .map(|r| LatentVector::from_slice(r))
            .collect::<Result<_>>()?,
    )
}
