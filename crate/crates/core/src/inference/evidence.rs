use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bin_of, DiscretizedNet, InferenceError};
use crate::netspec::rescale;

/// Observed states keyed by variable index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    states: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureFinding {
    pub variable: String,
    pub value: serde_json::Value,
}

/// Evidence as accepted over JSON: either a plain `{variable: value}` map,
/// or a case object with a `findings` list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvidenceInput {
    Case {
        findings: Vec<FixtureFinding>,
        /// Findings with no counterpart in the model, carried for display.
        #[serde(default)]
        unmapped: Vec<serde_json::Value>,
    },
    Map(BTreeMap<String, serde_json::Value>),
}

impl EvidenceInput {
    pub fn pairs(&self) -> Vec<(&str, &serde_json::Value)> {
        match self {
            Self::Case { findings, .. } => findings.iter().map(|f| (f.variable.as_str(), &f.value)).collect(),
            Self::Map(m) => m.iter().map(|(k, v)| (k.as_str(), v)).collect(),
        }
    }
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: usize, state: usize) {
        self.states.insert(var, state);
    }

    pub fn remove(&mut self, var: usize) -> Option<usize> {
        self.states.remove(&var)
    }

    pub fn get(&self, var: usize) -> Option<usize> {
        self.states.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states.iter().map(|(&v, &s)| (v, s))
    }

    /// Dense per-variable view.
    pub(crate) fn dense(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (v, s) in self.iter() {
            out[v] = Some(s);
        }
        out
    }

    /// The state a JSON finding denotes. Categorical findings are a category
    /// index or label; continuous findings are raw values in original units,
    /// clamped into the scale, rescaled and binned.
    pub fn finding_state(net: &DiscretizedNet, var: usize, value: &serde_json::Value) -> Result<usize, InferenceError> {
        let v = net.var(var);
        let bad = |message: String| InferenceError::BadFinding {
            var: v.name.clone(),
            message,
        };
        match (&v.edges, value) {
            (Some(edges), value) => {
                let raw = match value {
                    serde_json::Value::Number(x) => x.as_f64(),
                    serde_json::Value::String(s) => s.trim().parse::<f64>().ok(),
                    _ => None,
                }
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("expected a number, got {value}")))?;
                let y = match &v.scale {
                    Some(s) => {
                        let (raw, _) = s.clamp_raw(raw);
                        rescale(raw, s).map_err(|e| bad(e.to_string()))?
                    }
                    None => raw,
                };
                Ok(bin_of(edges, y))
            }
            (None, serde_json::Value::Number(x)) => {
                let k = x
                    .as_u64()
                    .ok_or_else(|| bad(format!("category must be a non-negative integer, got {x}")))?
                    as usize;
                if k >= v.n_states {
                    return Err(bad(format!("category {k} out of range 0..{}", v.n_states)));
                }
                Ok(k)
            }
            (None, serde_json::Value::String(s)) => {
                if let Ok(k) = s.trim().parse::<usize>() {
                    if k < v.n_states {
                        return Ok(k);
                    }
                }
                v.labels
                    .iter()
                    .position(|l| l == s)
                    .or_else(|| v.labels.iter().position(|l| l.eq_ignore_ascii_case(s.trim())))
                    .ok_or_else(|| bad(format!("unknown label `{s}`")))
            }
            (None, other) => Err(bad(format!("unsupported finding {other}"))),
        }
    }

    pub fn from_input(net: &DiscretizedNet, input: &EvidenceInput) -> Result<Self, InferenceError> {
        let mut e = Self::new();
        for (name, value) in input.pairs() {
            let var = net
                .index_of(name)
                .ok_or_else(|| InferenceError::UnknownVariable(name.to_string()))?;
            e.set(var, Self::finding_state(net, var, value)?);
        }
        Ok(e)
    }

    pub fn from_json(net: &DiscretizedNet, text: &str) -> Result<Self, InferenceError> {
        let input: EvidenceInput = serde_json::from_str(text).map_err(|e| InferenceError::BadFinding {
            var: String::new(),
            message: e.to_string(),
        })?;
        Self::from_input(net, &input)
    }
}
