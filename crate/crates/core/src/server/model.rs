use std::path::Path;

use thiserror::Error;

use crate::inference::{discretize, DiscretizedNet, InferenceError};
use crate::netspec::{parse_network, CNode};
use crate::priors::parse_priors;
use crate::{NetError, NetworkParams, NetworkSpec, PriorError, PriorSpec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Cond(#[from] crate::CondError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A queryable network, with its model file when it came from one.
#[derive(Debug, Clone)]
pub struct Model {
    pub net: DiscretizedNet,
    pub spec: Option<NetworkSpec>,
    pub priors: Option<PriorSpec>,
    pub text: Option<String>,
}

impl Model {
    pub fn from_net(net: DiscretizedNet) -> Result<Self, ModelError> {
        Ok(Self {
            net,
            spec: None,
            priors: None,
            text: None,
        })
    }

    /// Parses a model file and discretizes it at `params`, or at the prior
    /// means when none are given.
    pub fn from_text(text: &str, priors: Option<&str>, params: Option<NetworkParams>) -> Result<Self, ModelError> {
        let spec = parse_network(text)?;
        let priors = match priors {
            Some(p) => parse_priors(p, &spec)?,
            None => PriorSpec::defaults(&spec),
        };
        let params = match params {
            Some(p) => {
                p.check(&spec)?;
                p
            }
            None => priors.mean_params(&spec)?,
        };
        let net = discretize(&spec, &params)?;
        Ok(Self {
            net,
            spec: Some(spec),
            priors: Some(priors),
            text: Some(text.to_string()),
        })
    }

    /// Loads a `.json` discretized network, or a model file of any other extension.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_net(DiscretizedNet::from_json(&text)?)
        } else {
            Self::from_text(&text, None, None)
        }
    }

    /// Pathology variables.
    pub fn diseases(&self) -> Vec<usize> {
        (0..self.net.len()).filter(|&v| self.net.var(v).cnode == CNode::VD).collect()
    }
}
