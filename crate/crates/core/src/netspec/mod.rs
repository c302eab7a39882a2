//! Network definition: variables, c-node taxonomy, parent sets and the
//! constraint graph that restricts edge directions between c-nodes.
//!
//! A [`NetworkSpec`] is immutable once built. Every constructor runs the full
//! validation pipeline, so holding a `NetworkSpec` means holding a DAG whose
//! cross-c-node edges agree with the constraint graph (or are explicitly
//! exempted by the model file).

mod design;
pub(crate) mod parse;
mod scale;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use design::{dummy_expand, DesignError, DesignLayout, ParentSlot};
pub use parse::parse_network;
pub use scale::{inverse_rescale, rescale, ContinuousScale, ScaleError};

/// The eight sets of medical variables of the constraint graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CNode {
    /// Aetiology.
    VR,
    /// Epidemiology.
    VC,
    /// Pathogenesis.
    VQ,
    /// Pathology.
    VD,
    /// Pathophysiology.
    VS,
    /// Chief complaints.
    VMC,
    /// Future outcomes.
    VMO,
    /// Other manifestations.
    VMM,
}

impl CNode {
    pub const ALL: [CNode; 8] = [
        CNode::VR,
        CNode::VC,
        CNode::VQ,
        CNode::VD,
        CNode::VS,
        CNode::VMC,
        CNode::VMO,
        CNode::VMM,
    ];

    /// The c-edges between distinct c-nodes.
    pub const C_EDGES: [(CNode, CNode); 10] = [
        (CNode::VR, CNode::VQ),
        (CNode::VC, CNode::VQ),
        (CNode::VC, CNode::VD),
        (CNode::VC, CNode::VS),
        (CNode::VC, CNode::VMO),
        (CNode::VQ, CNode::VD),
        (CNode::VD, CNode::VS),
        (CNode::VS, CNode::VMC),
        (CNode::VS, CNode::VMO),
        (CNode::VS, CNode::VMM),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CNode::VR => "VR",
            CNode::VC => "VC",
            CNode::VQ => "VQ",
            CNode::VD => "VD",
            CNode::VS => "VS",
            CNode::VMC => "VMC",
            CNode::VMO => "VMO",
            CNode::VMM => "VMM",
        }
    }

    pub fn from_tag(tag: &str) -> Option<CNode> {
        CNode::ALL.into_iter().find(|c| c.as_str() == tag)
    }

    /// Whether an edge `self -> child` is permitted: `child` must be reachable
    /// from `self` along c-edges. Edges inside one c-node are only constrained
    /// by acyclicity.
    pub fn allows_edge_to(self, child: CNode) -> bool {
        if self == child {
            return true;
        }
        let mut stack = vec![self];
        let mut seen = [false; 8];
        while let Some(c) = stack.pop() {
            for &(a, b) in &CNode::C_EDGES {
                if a == c && !seen[b as usize] {
                    if b == child {
                        return true;
                    }
                    seen[b as usize] = true;
                    stack.push(b);
                }
            }
        }
        false
    }
}

impl fmt::Display for CNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Statistical typology of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Typology {
    /// One non-neutral category.
    Binary,
    /// `s >= 2` non-neutral categories.
    MultiValued(u32),
    Continuous(ContinuousScale),
}

impl Typology {
    pub fn is_categorical(&self) -> bool {
        !matches!(self, Typology::Continuous(_))
    }

    /// Number of non-neutral categories; `None` for continuous variables.
    pub fn non_neutral(&self) -> Option<u32> {
        match self {
            Typology::Binary => Some(1),
            Typology::MultiValued(s) => Some(*s),
            Typology::Continuous(_) => None,
        }
    }

    /// Sample-space size for categorical variables.
    pub fn n_categories(&self) -> Option<usize> {
        self.non_neutral().map(|s| s as usize + 1)
    }

    pub fn scale(&self) -> Option<&ContinuousScale> {
        match self {
            Typology::Continuous(s) => Some(s),
            _ => None,
        }
    }

    /// Width of this variable's block in a child's dummy vector.
    pub fn design_width(&self) -> usize {
        match self {
            Typology::MultiValued(s) => *s as usize,
            _ => 1,
        }
    }
}

/// A single observed or sampled value: a category index (0 = neutral) or a
/// rescaled continuous value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Cat(u32),
    Real(f64),
}

impl Value {
    pub fn is_neutral(&self) -> bool {
        match *self {
            Value::Cat(k) => k == 0,
            Value::Real(v) => v == 0.0,
        }
    }

    pub fn as_cat(&self) -> Option<u32> {
        match *self {
            Value::Cat(k) => Some(k),
            Value::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Value::Real(v) => Some(v),
            Value::Cat(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub cnode: CNode,
    pub typology: Typology,
    /// Parent names in model-file order; this order fixes the dummy layout.
    pub parents: Vec<String>,
    /// Category labels, index 0 being the neutral value. Empty when the
    /// model file gives none or for continuous variables.
    #[serde(default)]
    pub labels: Vec<String>,
}

impl VariableDef {
    pub fn new(name: impl Into<String>, cnode: CNode, typology: Typology) -> Self {
        Self {
            name: name.into(),
            cnode,
            typology,
            parents: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn with_parents<I, S>(mut self, parents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.parents = parents.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.labels = labels.into_iter().map(Into::into).collect();
        self
    }

    /// Resolves a category label (case-sensitive, then case-insensitive).
    pub fn category_of_label(&self, label: &str) -> Option<u32> {
        let label = label.trim();
        self.labels
            .iter()
            .position(|l| l == label)
            .or_else(|| self.labels.iter().position(|l| l.eq_ignore_ascii_case(label)))
            .map(|i| i as u32)
    }

    /// Domain of the rescaled value, `(lo, hi)`.
    pub fn rescaled_domain(&self) -> Option<(f64, f64)> {
        self.typology.scale().map(|s| s.rescaled_domain())
    }
}

/// A cross-c-node edge accepted despite contradicting the constraint graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exemption {
    pub parent: String,
    pub child: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("`{child}` lists unknown parent `{parent}`")]
    UnresolvedParent { child: String, parent: String },
    #[error("`{directive}` refers to undeclared variable `{name}`")]
    UnknownVariable { directive: &'static str, name: String },
    #[error("`{child}` lists parent `{parent}` more than once")]
    DuplicateParent { child: String, parent: String },
    #[error("directed cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("edge `{parent}` ({parent_cnode}) -> `{child}` ({child_cnode}) violates the c-node constraint graph")]
    CEdgeViolation {
        parent: String,
        parent_cnode: CNode,
        child: String,
        child_cnode: CNode,
    },
    #[error("exemption `{parent}` -> `{child}` does not match an edge of the network")]
    StaleExemption { parent: String, child: String },
    #[error("`{name}` has {given} labels but {expected} categories")]
    LabelCount {
        name: String,
        given: usize,
        expected: usize,
    },
    #[error("invalid scale for `{name}`: {source}")]
    Scale { name: String, source: ScaleError },
    #[error("multi-valued variable `{0}` needs at least two non-neutral categories")]
    MultiTooSmall(String),
}

/// A validated network.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    variables: Vec<VariableDef>,
    index: HashMap<String, usize>,
    parent_idx: Vec<Vec<usize>>,
    children_idx: Vec<Vec<usize>>,
    topo: Vec<usize>,
    layouts: Vec<DesignLayout>,
    exemptions: Vec<Exemption>,
}

impl NetworkSpec {
    /// Builds and validates a network from variable definitions.
    pub fn new(variables: Vec<VariableDef>, exemptions: Vec<Exemption>) -> Result<Self, NetError> {
        let mut index = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(NetError::DuplicateVariable(v.name.clone()));
            }
        }

        for v in &variables {
            match &v.typology {
                Typology::MultiValued(s) if *s < 2 => {
                    return Err(NetError::MultiTooSmall(v.name.clone()));
                }
                Typology::Continuous(s) => {
                    ContinuousScale::new(s.l2, s.l1, s.r1, s.r2).map_err(|source| {
                        NetError::Scale {
                            name: v.name.clone(),
                            source,
                        }
                    })?;
                }
                _ => {}
            }
            if let Some(expected) = v.typology.n_categories() {
                if !v.labels.is_empty() && v.labels.len() != expected {
                    return Err(NetError::LabelCount {
                        name: v.name.clone(),
                        given: v.labels.len(),
                        expected,
                    });
                }
            }
        }

        let mut parent_idx = Vec::with_capacity(variables.len());
        for v in &variables {
            let mut seen = BTreeSet::new();
            let mut ps = Vec::with_capacity(v.parents.len());
            for p in &v.parents {
                let Some(&pi) = index.get(p) else {
                    return Err(NetError::UnresolvedParent {
                        child: v.name.clone(),
                        parent: p.clone(),
                    });
                };
                if !seen.insert(pi) {
                    return Err(NetError::DuplicateParent {
                        child: v.name.clone(),
                        parent: p.clone(),
                    });
                }
                ps.push(pi);
            }
            parent_idx.push(ps);
        }

        let mut children_idx = vec![Vec::new(); variables.len()];
        for (c, ps) in parent_idx.iter().enumerate() {
            for &p in ps {
                children_idx[p].push(c);
            }
        }

        let topo = topological_order(&variables, &parent_idx, &children_idx)?;

        for e in &exemptions {
            for name in [&e.parent, &e.child] {
                if !index.contains_key(name) {
                    return Err(NetError::UnknownVariable {
                        directive: "exempt",
                        name: name.clone(),
                    });
                }
            }
        }
        let exempt: BTreeSet<(usize, usize)> = exemptions
            .iter()
            .map(|e| (index[&e.parent], index[&e.child]))
            .collect();

        for (c, ps) in parent_idx.iter().enumerate() {
            for &p in ps {
                let (pc, cc) = (variables[p].cnode, variables[c].cnode);
                if !pc.allows_edge_to(cc) && !exempt.contains(&(p, c)) {
                    return Err(NetError::CEdgeViolation {
                        parent: variables[p].name.clone(),
                        parent_cnode: pc,
                        child: variables[c].name.clone(),
                        child_cnode: cc,
                    });
                }
            }
        }
        for e in &exemptions {
            let (p, c) = (index[&e.parent], index[&e.child]);
            if !parent_idx[c].contains(&p) {
                return Err(NetError::StaleExemption {
                    parent: e.parent.clone(),
                    child: e.child.clone(),
                });
            }
        }

        let layouts = (0..variables.len())
            .map(|i| DesignLayout::build(&variables, &parent_idx[i]))
            .collect();

        Ok(Self {
            variables,
            index,
            parent_idx,
            children_idx,
            topo,
            layouts,
            exemptions,
        })
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[VariableDef] {
        &self.variables
    }

    pub fn var(&self, idx: usize) -> &VariableDef {
        &self.variables[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn var_by_name(&self, name: &str) -> Option<&VariableDef> {
        self.index_of(name).map(|i| &self.variables[i])
    }

    pub fn parents(&self, idx: usize) -> &[usize] {
        &self.parent_idx[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children_idx[idx]
    }

    /// Variable indices with every parent before its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn layout(&self, idx: usize) -> &DesignLayout {
        &self.layouts[idx]
    }

    pub fn edge_count(&self) -> usize {
        self.parent_idx.iter().map(Vec::len).sum()
    }

    pub fn exemptions(&self) -> &[Exemption] {
        &self.exemptions
    }

    /// All edges `(parent, child)` as indices, child-major in declaration order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent_idx
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
    }

    /// Variables of a c-node, in declaration order.
    pub fn in_cnode(&self, cnode: CNode) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.variables[i].cnode == cnode)
            .collect()
    }

    /// Serializes back to the model-file format.
    pub fn to_model_text(&self) -> String {
        parse::write_network(self)
    }
}

fn topological_order(
    variables: &[VariableDef],
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> Result<Vec<usize>, NetError> {
    let n = variables.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
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
    if order.len() == n {
        return Ok(order);
    }
    // Walk parent links inside the unresolved remainder until a node repeats.
    let start = (0..n).find(|&i| indeg[i] > 0).expect("remainder is nonempty");
    let mut path = vec![start];
    let mut pos: HashMap<usize, usize> = HashMap::from([(start, 0)]);
    let mut cur = start;
    loop {
        let next = *parents[cur]
            .iter()
            .find(|&&p| indeg[p] > 0)
            .expect("every unresolved node has an unresolved parent");
        if let Some(&at) = pos.get(&next) {
            let mut cycle = vec![variables[next].name.clone()];
            cycle.extend(path[at..].iter().rev().map(|&i| variables[i].name.clone()));
            return Err(NetError::Cycle(cycle));
        }
        pos.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}
