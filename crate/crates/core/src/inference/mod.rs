//! Discretized networks and posterior queries: exact enumeration for small
//! networks, likelihood weighting for the full model.

mod discretize;
mod evidence;
mod query;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netspec::{CNode, ContinuousScale};

pub use discretize::{bin_edges, discretize, BINS};
pub use evidence::{Evidence, EvidenceInput, FixtureFinding};
pub use query::{
    diagnose, exact_posterior, lw_posterior, Diagnosis, Marginal, Method, QueryResult, QueryStatus,
    RankedDisease, EXACT_STATE_LIMIT,
};

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{var}`: CPT row for parent states {parents:?} cannot be normalized")]
    NonNormalizable { var: String, parents: Vec<usize> },
    #[error("`{var}`: {message}")]
    BadFinding { var: String, message: String },
    #[error("exact enumeration over {states:.3e} joint states exceeds the limit of {limit:.0e}")]
    StateSpace { states: f64, limit: f64 },
    #[error("sample size must be at least 1")]
    NoSamples,
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error(transparent)]
    Cond(#[from] crate::condmodels::CondError),
}

/// One variable of a discretized network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteVar {
    pub name: String,
    pub cnode: CNode,
    pub n_states: usize,
    pub parents: Vec<usize>,
    /// Row-major table: one row of `n_states` per parent configuration,
    /// the first parent varying slowest.
    pub cpt: Vec<f64>,
    /// Bin edges on the rescaled axis for discretized continuous variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ContinuousScale>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

impl DiscreteVar {
    /// State whose presence counts as "no finding": category 0, or the bin
    /// holding rescaled 0.
    pub fn neutral_state(&self) -> usize {
        match &self.edges {
            Some(e) => bin_of(e, 0.0),
            None => 0,
        }
    }
}

pub(crate) fn bin_of(edges: &[f64], y: f64) -> usize {
    let nb = edges.len() - 1;
    (0..nb).find(|&i| y < edges[i + 1]).unwrap_or(nb - 1)
}

/// A fully discrete network ready for propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetRepr", into = "NetRepr")]
pub struct DiscretizedNet {
    vars: Vec<DiscreteVar>,
    order: Vec<usize>,
    strides: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct NetRepr {
    variables: Vec<DiscreteVar>,
}

impl TryFrom<NetRepr> for DiscretizedNet {
    type Error = InferenceError;
    fn try_from(r: NetRepr) -> Result<Self, Self::Error> {
        Self::new(r.variables)
    }
}

impl From<DiscretizedNet> for NetRepr {
    fn from(n: DiscretizedNet) -> Self {
        NetRepr { variables: n.vars }
    }
}

impl DiscretizedNet {
    /// Validates table shapes, row normalization and acyclicity.
    pub fn new(vars: Vec<DiscreteVar>) -> Result<Self, InferenceError> {
        let n = vars.len();
        let mut index = HashMap::with_capacity(n);
        for (i, v) in vars.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(InferenceError::Invalid(format!("duplicate variable `{}`", v.name)));
            }
        }
        let mut strides = Vec::with_capacity(n);
        for v in &vars {
            if v.n_states == 0 {
                return Err(InferenceError::Invalid(format!("`{}` has no states", v.name)));
            }
            if let Some(e) = &v.edges {
                if e.len() != v.n_states + 1 || e.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(InferenceError::Invalid(format!("`{}`: bad bin edges", v.name)));
                }
            }
            let mut s = vec![0; v.parents.len()];
            let mut acc = 1usize;
            for (j, &p) in v.parents.iter().enumerate().rev() {
                if p >= n {
                    return Err(InferenceError::Invalid(format!("`{}`: parent index {p} out of range", v.name)));
                }
                s[j] = acc;
                acc *= vars[p].n_states;
            }
            if v.cpt.len() != acc * v.n_states {
                return Err(InferenceError::Invalid(format!(
                    "`{}`: table has {} entries, expected {}",
                    v.name,
                    v.cpt.len(),
                    acc * v.n_states
                )));
            }
            for (r, row) in v.cpt.chunks(v.n_states).enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(InferenceError::Invalid(format!("`{}`: row {r} is not a probability vector", v.name)));
                }
            }
            strides.push(s);
        }

        // Kahn's algorithm, lowest index first
        let mut indeg: Vec<usize> = vars.iter().map(|v| v.parents.len()).collect();
        let mut children = vec![Vec::new(); n];
        for (i, v) in vars.iter().enumerate() {
            for &p in &v.parents {
                children[p].push(i);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != n {
            return Err(InferenceError::Invalid("the network has a cycle".into()));
        }
        Ok(Self {
            vars,
            order,
            strides,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn variables(&self) -> &[DiscreteVar] {
        &self.vars
    }

    pub fn var(&self, i: usize) -> &DiscreteVar {
        &self.vars[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Table row of `var` under the given full joint state.
    #[inline]
    pub(crate) fn row(&self, var: usize, state: &[usize]) -> &[f64] {
        let v = &self.vars[var];
        let mut idx = 0;
        for (j, &p) in v.parents.iter().enumerate() {
            idx += state[p] * self.strides[var][j];
        }
        &v.cpt[idx * v.n_states..(idx + 1) * v.n_states]
    }

    /// Variables in topological order that are ancestors of (or are) any of `targets`.
    pub(crate) fn relevant(&self, targets: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut keep = vec![false; self.vars.len()];
        let mut stack: Vec<usize> = targets.into_iter().collect();
        while let Some(i) = stack.pop() {
            if keep[i] {
                continue;
            }
            keep[i] = true;
            stack.extend(self.vars[i].parents.iter().copied());
        }
        self.order.iter().copied().filter(|&i| keep[i]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InferenceError> {
        serde_json::from_str(text).map_err(|e| InferenceError::Invalid(e.to_string()))
    }
}
