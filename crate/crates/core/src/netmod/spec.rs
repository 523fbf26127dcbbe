//! JSON architecture specs.
//!
//! ```json
//! { "duration_s": 2.0,
//!   "nodes": [
//!     { "id": "mod", "mode": "modulator", "latent": [3,3,3,3,3,3,3,3] },
//!     { "id": "car", "mode": "carrier", "parent": "mod", "feedback": 0.5,
//!       "envelope": { "type": "exp_decay", "tau": 0.5 } } ] }
//! ```
//!
//! `latent` and `bias` take either 8 numbers or a list of 8-number rows (one
//! per frame). Unknown fields are rejected, and every error names the node id
//! and the field at fault.

use serde::Serialize;
use serde_json::{Map, Value};

use super::{NodeMode, ParamTrack, SynthArchitecture, SynthNode};
use crate::autoencoder::{LatentVector, LATENT_DIM};
use crate::dsp::Envelope;
use crate::{Error, Result};

pub type EnvelopeSpec = Envelope;

/// Node label used for errors that concern the whole document.
const SPEC_LABEL: &str = "(spec)";

const TOP_FIELDS: &[&str] = &["duration_s", "nodes"];
const NODE_FIELDS: &[&str] = &[
    "id",
    "mode",
    "parent",
    "latent",
    "bias",
    "feedback",
    "pitch_shift_semitones",
    "envelope",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TrackSpec {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl TrackSpec {
    fn to_track(&self, node: &str, field: &str) -> Result<ParamTrack> {
        let row = |values: &[f64], what: String| {
            LatentVector::from_slice(values).map_err(|_| {
                spec_err(
                    node,
                    field,
                    format!("{what} must hold {LATENT_DIM} finite numbers"),
                )
            })
        };
        match self {
            TrackSpec::Vector(v) => Ok(ParamTrack::Constant(row(v, "vector".into())?)),
            TrackSpec::Matrix(rows) => {
                if rows.is_empty() {
                    return Err(spec_err(node, field, "automation needs at least one row"));
                }
                let rows = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| row(r, format!("row {i}")))
                    .collect::<Result<Vec<_>>>()?;
                ParamTrack::automation(rows)
            }
        }
    }

    fn from_track(track: &ParamTrack) -> Self {
        let row = |v: &LatentVector| v.values().iter().map(|&x| x as f64).collect();
        match track {
            ParamTrack::Constant(v) => TrackSpec::Vector(row(v)),
            ParamTrack::Automation(rows) => TrackSpec::Matrix(rows.iter().map(row).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSpec {
    pub id: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent: Option<TrackSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<TrackSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_shift_semitones: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Envelope>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchitectureSpec {
    pub duration_s: f64,
    pub nodes: Vec<NodeSpec>,
}

fn spec_err(node: &str, field: &str, message: impl Into<String>) -> Error {
    Error::Spec {
        node: node.to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

fn check_fields(obj: &Map<String, Value>, allowed: &[&str], node: &str) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(spec_err(node, k, "unknown field")),
        None => Ok(()),
    }
}

fn number(v: &Value, node: &str, field: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| spec_err(node, field, format!("expected a number, found {v}")))
}

fn numbers(v: &Value, node: &str, field: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| spec_err(node, field, "expected an array of numbers"))?
        .iter()
        .map(|x| number(x, node, field))
        .collect()
}

fn track(v: &Value, node: &str, field: &str) -> Result<TrackSpec> {
    let items = v
        .as_array()
        .ok_or_else(|| spec_err(node, field, "expected 8 numbers or a list of 8-number rows"))?;
    if items.first().is_some_and(Value::is_array) {
        Ok(TrackSpec::Matrix(
            items
                .iter()
                .map(|row| numbers(row, node, field))
                .collect::<Result<_>>()?,
        ))
    } else {
        Ok(TrackSpec::Vector(numbers(v, node, field)?))
    }
}

impl NodeSpec {
    fn from_value(v: &Value, position: usize) -> Result<Self> {
        let fallback = format!("#{position}");
        let obj = v
            .as_object()
            .ok_or_else(|| spec_err(&fallback, "-", "node must be a JSON object"))?;
        let id = match obj.get("id") {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(_) => return Err(spec_err(&fallback, "id", "must be a non-empty string")),
            None => return Err(spec_err(&fallback, "id", "missing")),
        };
        let node = id.as_str();
        check_fields(obj, NODE_FIELDS, node)?;
        let mode = match obj.get("mode").and_then(Value::as_str) {
            Some(m @ ("modulator" | "carrier" | "predictive_feedback")) => m.to_string(),
            Some(other) => {
                return Err(spec_err(
                    node,
                    "mode",
                    format!("unknown mode `{other}` (modulator, carrier, predictive_feedback)"),
                ))
            }
            None => return Err(spec_err(node, "mode", "missing or not a string")),
        };
        let parent = match obj.get("parent") {
            None | Some(Value::Null) => None,
            Some(Value::String(p)) => Some(p.clone()),
            Some(_) => return Err(spec_err(node, "parent", "must be a string")),
        };
        let opt = |field: &str| obj.get(field).filter(|v| !v.is_null());
        let envelope = opt("envelope")
            .map(|v| {
                serde_json::from_value::<Envelope>(v.clone())
                    .map_err(|e| spec_err(node, "envelope", e.to_string()))
            })
            .transpose()?;
        Ok(NodeSpec {
            latent: opt("latent").map(|v| track(v, node, "latent")).transpose()?,
            bias: opt("bias").map(|v| track(v, node, "bias")).transpose()?,
            feedback: opt("feedback").map(|v| number(v, node, "feedback")).transpose()?,
            pitch_shift_semitones: opt("pitch_shift_semitones")
                .map(|v| number(v, node, "pitch_shift_semitones"))
                .transpose()?,
            envelope,
            id,
            mode,
            parent,
        })
    }

    fn to_node(&self) -> Result<SynthNode> {
        let node = self.id.as_str();
        let forbid = |present: bool, field: &str| {
            if present {
                Err(spec_err(
                    node,
                    field,
                    format!("not allowed on a {} node", self.mode),
                ))
            } else {
                Ok(())
            }
        };
        let mode = match self.mode.as_str() {
            "modulator" => {
                forbid(self.bias.is_some(), "bias")?;
                forbid(self.feedback.is_some(), "feedback")?;
                let latent = self
                    .latent
                    .as_ref()
                    .ok_or_else(|| spec_err(node, "latent", "required on a modulator"))?;
                NodeMode::Modulator {
                    latent: latent.to_track(node, "latent")?,
                }
            }
            "carrier" => {
                forbid(self.latent.is_some(), "latent")?;
                let feedback = self.feedback.unwrap_or(0.0);
                if !(0.0..=1.0).contains(&feedback) {
                    return Err(spec_err(node, "feedback", format!("{feedback} is outside [0, 1]")));
                }
                NodeMode::Carrier {
                    bias: self
                        .bias
                        .as_ref()
                        .map(|b| b.to_track(node, "bias"))
                        .transpose()?,
                    feedback,
                }
            }
            _ => {
                forbid(self.latent.is_some(), "latent")?;
                forbid(self.bias.is_some(), "bias")?;
                forbid(self.feedback.is_some(), "feedback")?;
                NodeMode::PredictiveFeedback
            }
        };
        Ok(SynthNode {
            id: self.id.clone(),
            parent: self.parent.clone(),
            mode,
            pitch_shift: self.pitch_shift_semitones.unwrap_or(0.0),
            envelope: self.envelope,
        })
    }
}

impl ArchitectureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| spec_err(SPEC_LABEL, "-", format!("invalid JSON: {e}")))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| spec_err(SPEC_LABEL, "-", "spec must be a JSON object"))?;
        check_fields(obj, TOP_FIELDS, SPEC_LABEL)?;
        let duration_s = obj
            .get("duration_s")
            .ok_or_else(|| spec_err(SPEC_LABEL, "duration_s", "missing"))
            .and_then(|v| number(v, SPEC_LABEL, "duration_s"))?;
        if duration_s <= 0.0 {
            return Err(spec_err(SPEC_LABEL, "duration_s", "must be > 0"));
        }
        let nodes = obj
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| spec_err(SPEC_LABEL, "nodes", "missing or not an array"))?
            .iter()
            .enumerate()
            .map(|(i, n)| NodeSpec::from_value(n, i))
            .collect::<Result<_>>()?;
        Ok(Self { duration_s, nodes })
    }

    /// Converts to a validated tree.
    pub fn to_architecture(&self) -> Result<SynthArchitecture> {
        SynthArchitecture::new(
            self.nodes
                .iter()
                .map(NodeSpec::to_node)
                .collect::<Result<_>>()?,
        )
    }

    /// The spec describing `arch`.
    pub fn from_architecture(arch: &SynthArchitecture, duration_s: f64) -> Self {
        let nodes = arch
            .nodes()
            .iter()
            .map(|n| {
                let (latent, bias, feedback) = match &n.mode {
                    NodeMode::Modulator { latent } => (Some(TrackSpec::from_track(latent)), None, None),
                    NodeMode::Carrier { bias, feedback } => {
                        (None, bias.as_ref().map(TrackSpec::from_track), Some(*feedback))
                    }
                    NodeMode::PredictiveFeedback => (None, None, None),
                };
                NodeSpec {
                    id: n.id.clone(),
                    mode: n.mode.name().to_string(),
                    parent: n.parent.clone(),
                    latent,
                    bias,
                    feedback,
                    pitch_shift_semitones: (n.pitch_shift != 0.0).then_some(n.pitch_shift),
                    envelope: n.envelope,
                }
            })
            .collect();
        Self { duration_s, nodes }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_at(text: &str) -> (String, String) {
        let result =
            ArchitectureSpec::from_json(text).and_then(|s| s.to_architecture().map(|_| s));
        match result {
            Err(Error::Spec { node, field, .. }) => (node, field),
            Err(other) => panic!("expected spec error, got {other}"),
            Ok(_) => panic!("expected an error"),
        }
    }

    #[test]
    fn parses_full_example() {
        let spec = ArchitectureSpec::from_json(
            r#"{ "duration_s": 2.0, "nodes": [
                { "id": "mod", "mode": "modulator", "latent": [3,3,3,3,3,3,3,3] },
                { "id": "car", "mode": "carrier", "parent": "mod", "feedback": 0.5,
                  "bias": [[0,0,0,0,0,0,0,0],[1,0,0,0,0,0,0,0]],
                  "pitch_shift_semitones": -12,
                  "envelope": { "type": "exp_decay", "tau": 0.5 } },
                { "id": "pf", "mode": "predictive_feedback", "parent": "mod" } ] }"#,
        )
        .unwrap();
        let arch = spec.to_architecture().unwrap();
        assert_eq!(arch.leaf_ids(), vec!["car", "pf"]);
        let car = arch.node("car").unwrap();
        assert_eq!(car.pitch_shift, -12.0);
        assert!(matches!(&car.mode, NodeMode::Carrier { feedback, bias: Some(ParamTrack::Automation(rows)) } if *feedback == 0.5 && rows.len() == 2));
        assert_eq!(
            ArchitectureSpec::from_json(&spec.to_json()).unwrap(),
            spec
        );
        assert_eq!(ArchitectureSpec::from_architecture(&arch, 2.0), spec);
    }

    #[test]
    fn errors_name_node_and_field() {
        let base = |node: &str| format!(r#"{{"duration_s":1,"nodes":[{{"id":"m","mode":"modulator","latent":[1,1,1,1,1,1,1,1]}},{node}]}}"#);
        assert_eq!(
            err_at(&base(r#"{"id":"c","mode":"carrier","parent":"m","wobble":1}"#)),
            ("c".into(), "wobble".into())
        );
        assert_eq!(
            err_at(&base(r#"{"id":"c","mode":"carrier","parent":"m","feedback":2}"#)),
            ("c".into(), "feedback".into())
        );
        assert_eq!(
            err_at(&base(r#"{"id":"c","mode":"carrier","parent":"m","bias":[1,2]}"#)),
            ("c".into(), "bias".into())
        );
        assert_eq!(
            err_at(&base(r#"{"id":"p","mode":"predictive_feedback","parent":"m","feedback":0.1}"#)),
            ("p".into(), "feedback".into())
        );
        assert_eq!(
            err_at(&base(r#"{"id":"c","mode":"carrier","parent":"m","latent":[1,1,1,1,1,1,1,1]}"#)),
            ("c".into(), "latent".into())
        );
        assert_eq!(
            err_at(&base(r#"{"id":"c","mode":"ring","parent":"m"}"#)),
            ("c".into(), "mode".into())
        );
        assert_eq!(
            err_at(&base(r#"{"id":"c","mode":"carrier","parent":"m","envelope":{"type":"adsr"}}"#)),
            ("c".into(), "envelope".into())
        );
        assert_eq!(
            err_at(r#"{"duration_s":1,"nodes":[{"id":"m","mode":"modulator"}]}"#),
            ("m".into(), "latent".into())
        );
        assert_eq!(
            err_at(r#"{"duration_s":0,"nodes":[]}"#),
            (SPEC_LABEL.into(), "duration_s".into())
        );
        assert_eq!(
            err_at(r#"{"duration_s":1,"nodes":[],"extra":true}"#),
            (SPEC_LABEL.into(), "extra".into())
        );
    }

    #[test]
    fn cycles_are_architecture_errors() {
        let spec = ArchitectureSpec::from_json(
            r#"{"duration_s":1,"nodes":[
                {"id":"m","mode":"modulator","latent":[1,1,1,1,1,1,1,1]},
                {"id":"a","mode":"carrier","parent":"b"},
                {"id":"b","mode":"carrier","parent":"a"}]}"#,
        )
        .unwrap();
        match spec.to_architecture().unwrap_err() {
            Error::Architecture { nodes, message } => {
                assert_eq!(nodes, vec!["a", "b"]);
                assert!(message.contains("cycle"));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
