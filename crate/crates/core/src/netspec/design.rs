use std::collections::HashMap;

use thiserror::Error;

use super::{NetworkSpec, Typology, Value, VariableDef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("no value supplied for parent `{0}`")]
    MissingParent(String),
    #[error("category {value} out of range for `{name}` (0..={max})")]
    CategoryOutOfRange { name: String, value: u32, max: u32 },
    #[error("`{0}` expects a category index")]
    ExpectedCategory(String),
    #[error("`{0}` expects a rescaled real value")]
    ExpectedReal(String),
}

/// Where one parent's contribution lands in the dummy vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParentSlot {
    Binary { var: usize, offset: usize },
    Multi { var: usize, offset: usize, s: u32 },
    Continuous { var: usize, offset: usize },
}

impl ParentSlot {
    pub fn var(&self) -> usize {
        match *self {
            ParentSlot::Binary { var, .. }
            | ParentSlot::Multi { var, .. }
            | ParentSlot::Continuous { var, .. } => var,
        }
    }

    pub fn offset(&self) -> usize {
        match *self {
            ParentSlot::Binary { offset, .. }
            | ParentSlot::Multi { offset, .. }
            | ParentSlot::Continuous { offset, .. } => offset,
        }
    }
}

/// Precomputed dummy layout of one variable's parents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignLayout {
    pub slots: Vec<ParentSlot>,
    pub width: usize,
}

impl DesignLayout {
    pub(crate) fn build(vars: &[VariableDef], parents: &[usize]) -> Self {
        let mut slots = Vec::with_capacity(parents.len());
        let mut offset = 0;
        for &p in parents {
            let slot = match vars[p].typology {
                Typology::Binary => ParentSlot::Binary { var: p, offset },
                Typology::MultiValued(s) => ParentSlot::Multi { var: p, offset, s },
                Typology::Continuous(_) => ParentSlot::Continuous { var: p, offset },
            };
            offset += vars[p].typology.design_width();
            slots.push(slot);
        }
        Self {
            slots,
            width: offset,
        }
    }

    /// Number of distinct parent variables.
    pub fn n_parents(&self) -> usize {
        self.slots.len()
    }

    /// Fills `out` (length `width`) from a full-network state vector where
    /// categorical values are stored as their index. No validation: callers
    /// keep states inside their domains.
    #[inline]
    pub fn fill(&self, state: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for slot in &self.slots {
            match *slot {
                ParentSlot::Binary { var, offset } => out[offset] = state[var],
                ParentSlot::Multi { var, offset, .. } => {
                    let k = state[var] as usize;
                    if k > 0 {
                        out[offset + k - 1] = 1.0;
                    }
                }
                ParentSlot::Continuous { var, offset } => out[offset] = state[var],
            }
        }
    }
}

/// Builds the dummy vector of `var` from named parent values.
pub fn dummy_expand(
    spec: &NetworkSpec,
    var: &str,
    parent_values: &HashMap<String, Value>,
) -> Result<Vec<f64>, DesignError> {
    let idx = spec
        .index_of(var)
        .ok_or_else(|| DesignError::UnknownVariable(var.to_string()))?;
    let layout = spec.layout(idx);
    let mut x = vec![0.0; layout.width];
    for slot in &layout.slots {
        let def = spec.var(slot.var());
        let value = parent_values
            .get(&def.name)
            .ok_or_else(|| DesignError::MissingParent(def.name.clone()))?;
        match *slot {
            ParentSlot::Binary { offset, .. } | ParentSlot::Multi { offset, .. } => {
                let k = value
                    .as_cat()
                    .ok_or_else(|| DesignError::ExpectedCategory(def.name.clone()))?;
                let max = def.typology.non_neutral().unwrap_or(0);
                if k > max {
                    return Err(DesignError::CategoryOutOfRange {
                        name: def.name.clone(),
                        value: k,
                        max,
                    });
                }
                if k > 0 {
                    let pos = if matches!(slot, ParentSlot::Binary { .. }) { 0 } else { k as usize - 1 };
                    x[offset + pos] = 1.0;
                }
            }
            ParentSlot::Continuous { offset, .. } => {
                x[offset] = value
                    .as_real()
                    .ok_or_else(|| DesignError::ExpectedReal(def.name.clone()))?;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netspec::{CNode, ContinuousScale, VariableDef};

    fn heart_rate_net() -> NetworkSpec {
        NetworkSpec::new(
            vec![
                VariableDef::new("Autonomic nervous system status", CNode::VS, Typology::MultiValued(5)),
                VariableDef::new("Bradycardia/Tachycardia", CNode::VS, Typology::MultiValued(3)),
                VariableDef::new(
                    "Heart rate",
                    CNode::VMM,
                    Typology::Continuous(ContinuousScale::new(20.0, 60.0, 100.0, 220.0).unwrap()),
                )
                .with_parents(["Autonomic nervous system status", "Bradycardia/Tachycardia"]),
                VariableDef::new("Binary child", CNode::VMM, Typology::Binary)
                    .with_parents(["Heart rate", "Bradycardia/Tachycardia"]),
            ],
            vec![],
        )
        .unwrap()
    }

    fn vals(pairs: &[(&str, Value)]) -> HashMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn heart_rate_layout() {
        let spec = heart_rate_net();
        let x = dummy_expand(
            &spec,
            "Heart rate",
            &vals(&[
                ("Autonomic nervous system status", Value::Cat(2)),
                ("Bradycardia/Tachycardia", Value::Cat(0)),
            ]),
        )
        .unwrap();
        assert_eq!(x, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn neutral_and_continuous() {
        let spec = heart_rate_net();
        let x = dummy_expand(
            &spec,
            "Binary child",
            &vals(&[("Heart rate", Value::Real(-1.0)), ("Bradycardia/Tachycardia", Value::Cat(0))]),
        )
        .unwrap();
        assert_eq!(x, vec![-1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let spec = heart_rate_net();
        let err = dummy_expand(&spec, "Heart rate", &vals(&[("Bradycardia/Tachycardia", Value::Cat(0))]))
            .unwrap_err();
        assert_eq!(err, DesignError::MissingParent("Autonomic nervous system status".into()));
        let err = dummy_expand(
            &spec,
            "Heart rate",
            &vals(&[
                ("Autonomic nervous system status", Value::Cat(6)),
                ("Bradycardia/Tachycardia", Value::Cat(0)),
            ]),
        )
        .unwrap_err();
        assert!(matches!(err, DesignError::CategoryOutOfRange { value: 6, max: 5, .. }));
    }

    #[test]
    fn fill_matches_expand() {
        let spec = heart_rate_net();
        let state = [3.0, 2.0, 0.7, 1.0];
        let mut out = vec![9.0; spec.layout(2).width];
        spec.layout(2).fill(&state, &mut out);
        let x = dummy_expand(
            &spec,
            "Heart rate",
            &vals(&[
                ("Autonomic nervous system status", Value::Cat(3)),
                ("Bradycardia/Tachycardia", Value::Cat(2)),
            ]),
        )
        .unwrap();
        assert_eq!(out, x);
    }
}
