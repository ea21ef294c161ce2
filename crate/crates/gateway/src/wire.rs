//! JSON records exchanged with dashboard clients, one record per WebSocket message.

use std::collections::BTreeMap;

use nordwatch_core::explain::{ExplanationReport, Interval};
use nordwatch_core::features::FeatureVector;
use nordwatch_core::labeling::JudgeTag;
use nordwatch_core::models::{Branch, Proba};
use nordwatch_core::session::{MetricsSnapshot, Prediction};
use nordwatch_core::stream::{ClassLabel, ClassSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub key: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathNode {
    pub key: String,
    pub threshold: f64,
    /// `<=`, `>` or `missing`.
    pub branch: String,
    pub value: Option<f64>,
}

/// Outbound events without their per-connection sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireEvent {
    Slot {
        n: u64,
        values: BTreeMap<String, f64>,
    },
    /// Value of the display key at a slot.
    Feature {
        n: u64,
        key: String,
        value: f64,
    },
    Prediction {
        n: u64,
        label: String,
        proba: BTreeMap<String, f64>,
        cluster: usize,
    },
    Explanation {
        n: u64,
        prediction: String,
        gamma: Vec<GammaEntry>,
        path: Vec<PathNode>,
        texts: [String; 4],
        confidence: f64,
        display_key: Option<String>,
        display_fallback: bool,
        interval: Option<Interval>,
    },
    Metrics(MetricsSnapshot),
    TagAck {
        slot: u64,
        label: String,
        source: String,
    },
    /// Events dropped for a slow client.
    Gap {
        dropped: u64,
    },
    Error {
        message: String,
    },
    /// The replay finished after `slots` slots.
    End {
        slots: u64,
    },
}

fn proba_map(proba: &Proba) -> BTreeMap<String, f64> {
    proba
        .0
        .iter()
        .enumerate()
        .map(|(i, p)| (ClassLabel(i as u8).to_string(), *p))
        .collect()
}

impl WireEvent {
    pub fn slot(fv: &FeatureVector) -> Self {
        WireEvent::Slot {
            n: fv.n,
            values: fv.iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn prediction(p: &Prediction) -> Self {
        WireEvent::Prediction {
            n: p.n,
            label: p.label.to_string(),
            proba: proba_map(&p.proba),
            cluster: p.cluster,
        }
    }

    pub fn explanation(r: &ExplanationReport) -> Self {
        WireEvent::Explanation {
            n: r.n,
            prediction: r.prediction.to_string(),
            gamma: r
                .gamma
                .iter()
                .map(|g| GammaEntry {
                    key: g.key.to_string(),
                    count: g.count,
                })
                .collect(),
            path: r
                .path
                .iter()
                .map(|s| PathNode {
                    key: s.key.to_string(),
                    threshold: s.threshold,
                    branch: match s.branch {
                        Branch::Left => "<=",
                        Branch::Right => ">",
                        Branch::Missing => "missing",
                    }
                    .to_string(),
                    value: s.value,
                })
                .collect(),
            texts: r.texts.clone(),
            confidence: r.confidence,
            display_key: r.display_key.map(|k| k.to_string()),
            display_fallback: r.display_fallback,
            interval: r.interval,
        }
    }

    pub fn tag_ack(tag: &JudgeTag) -> Self {
        WireEvent::TagAck {
            slot: tag.slot,
            label: tag.label.to_string(),
            source: tag.source.clone(),
        }
    }
}

/// An event as sent on one connection.
#[derive(Serialize)]
pub struct Envelope<'a> {
    pub seq: u64,
    #[serde(flatten)]
    pub event: &'a serde_json::Value,
}

/// Client → server messages.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Tag {
        label: String,
        #[serde(default)]
        slot: Option<u64>,
        #[serde(default = "default_source")]
        source: String,
    },
    /// Request an explanation of the latest sample.
    Explain,
}

fn default_source() -> String {
    "judge".into()
}

/// A validated client request.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Tag {
        label: ClassLabel,
        slot: Option<u64>,
        source: String,
    },
    Explain,
}

pub fn parse_inbound(text: &str, classes: &ClassSet) -> Result<Request, String> {
    let msg: Inbound = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    match msg {
        Inbound::Tag {
            label,
            slot,
            source,
        } => {
            let label: ClassLabel = label
                .parse()
                .map_err(|e: nordwatch_core::Error| e.to_string())?;
            if !classes.contains(label) {
                return Err(format!(
                    "label {label} is not one of {} classes",
                    classes.len()
                ));
            }
            Ok(Request::Tag {
                label,
                slot,
                source,
            })
        }
        Inbound::Explain => Ok(Request::Explain),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nordwatch_core::session::LabelSource;

    #[test]
    fn prediction_field_names() {
        let p = Prediction {
            n: 12,
            timestamp: 0.48,
            label: ClassLabel(1),
            proba: Proba(vec![0.25, 0.5, 0.25]),
            cluster: 2,
            source: LabelSource::Tags,
            learned: true,
        };
        let event = serde_json::to_value(WireEvent::prediction(&p)).unwrap();
        let text = serde_json::to_string(&Envelope {
            seq: 3,
            event: &event,
        })
        .unwrap();
        assert_eq!(
            text,
            r#"{"seq":3,"type":"prediction","n":12,"label":"c1","proba":{"c0":0.25,"c1":0.5,"c2":0.25},"cluster":2}"#
        );
    }

    #[test]
    fn inbound_tag_defaults_and_errors() {
        let classes = ClassSet::nordic_practice();
        assert_eq!(
            parse_inbound(
                r#"{"type":"tag","label":"c0","source":"judge-1"}"#,
                &classes
            ),
            Ok(Request::Tag {
                label: ClassLabel(0),
                slot: None,
                source: "judge-1".into()
            })
        );
        assert_eq!(
            parse_inbound(r#"{"type":"tag","label":"c2","slot":40}"#, &classes),
            Ok(Request::Tag {
                label: ClassLabel(2),
                slot: Some(40),
                source: "judge".into()
            })
        );
        assert!(parse_inbound(r#"{"type":"tag","label":"c7"}"#, &classes).is_err());
        assert!(parse_inbound("not json", &classes).is_err());
        assert!(parse_inbound(r#"{"type":"dance"}"#, &classes).is_err());
    }
}
