use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Dense,
    Transformer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    /// Whether L1/L2 penalties apply (weight matrices yes, biases and norms no).
    pub penalized: bool,
}

/// Named network parameters with same-shape gradient slots.
///
/// Iteration order is the lexicographic order of names so optimizer updates
/// and snapshots are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    architecture: Architecture,
    entries: BTreeMap<String, Parameter>,
}

impl ParameterSet {
    pub fn new(architecture: Architecture) -> Self {
        Self {
            architecture,
            entries: BTreeMap::new(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor, penalized: bool) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let grad = Tensor::zeros(value.shape());
        self.entries.insert(
            name,
            Parameter {
                value,
                grad,
                penalized,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.entries.get_mut(name)
    }

    pub(crate) fn value(&self, name: &str) -> &[f64] {
        self.entries[name].value.data()
    }

    pub(crate) fn grad_mut(&mut self, name: &str) -> &mut [f64] {
        self.entries
            .get_mut(name)
            .expect("parameter registered at construction")
            .grad
            .data_mut()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Parameter)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Parameter)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar weights.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(0.0);
        }
    }

    /// Copy values (not gradients) from a same-layout set.
    pub fn copy_values_from(&mut self, other: &ParameterSet) -> Result<()> {
        if self.architecture != other.architecture || self.entries.len() != other.entries.len() {
            return Err(Error::dim(
                "parameter copy",
                format!("{:?}/{}", self.architecture, self.entries.len()),
                format!("{:?}/{}", other.architecture, other.entries.len()),
            ));
        }
        for (name, p) in self.entries.iter_mut() {
            let src = other
                .entries
                .get(name)
                .ok_or_else(|| Error::dim("parameter copy", name, "missing"))?;
            if src.value.shape() != p.value.shape() {
                return Err(Error::dim(
                    name.clone(),
                    format!("{:?}", p.value.shape()),
                    format!("{:?}", src.value.shape()),
                ));
            }
            p.value.data_mut().copy_from_slice(src.value.data());
        }
        Ok(())
    }

    pub fn snapshot(&self) -> ParameterSnapshot {
        ParameterSnapshot {
            architecture: self.architecture,
            tensors: self
                .entries
                .iter()
                .map(|(name, p)| (name.clone(), p.value.clone()))
                .collect(),
        }
    }

    /// Overwrite values from a snapshot taken from a set with identical layout.
    pub fn load_snapshot(&mut self, snapshot: &ParameterSnapshot) -> Result<()> {
        if snapshot.architecture != self.architecture {
            return Err(Error::Config(format!(
                "snapshot architecture {:?} does not match {:?}",
                snapshot.architecture, self.architecture
            )));
        }
        if snapshot.tensors.len() != self.entries.len() {
            return Err(Error::dim("snapshot", self.entries.len(), snapshot.tensors.len()));
        }
        for (name, p) in self.entries.iter_mut() {
            let t = snapshot
                .tensors
                .get(name)
                .ok_or_else(|| Error::dim("snapshot", name, "missing"))?;
            if t.shape() != p.value.shape() {
                return Err(Error::dim(
                    name.clone(),
                    format!("{:?}", p.value.shape()),
                    format!("{:?}", t.shape()),
                ));
            }
            p.value.data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }
}

/// Serializable map name → tensor. JSON output round-trips every `f64`
/// bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSnapshot {
    pub architecture: Architecture,
    pub tensors: BTreeMap<String, Tensor>,
}

impl ParameterSnapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snap: Self = serde_json::from_str(s)?;
        for (name, t) in &snap.tensors {
            let expected: usize = t.shape().iter().product();
            if expected != t.len() {
                return Err(Error::dim(name.clone(), expected, t.len()));
            }
        }
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Adds `l1·Σ|w| + l2·Σw²` over penalized parameters to the gradient slots
/// and returns the penalty.
pub fn regularization_penalty(params: &mut ParameterSet, l1: f64, l2: f64) -> f64 {
    if l1 == 0.0 && l2 == 0.0 {
        return 0.0;
    }
    let mut penalty = 0.0;
    for p in params.entries.values_mut().filter(|p| p.penalized) {
        let grads = p.grad.data_mut();
        for (g, &w) in grads.iter_mut().zip(p.value.data()) {
            penalty += l1 * w.abs() + l2 * w * w;
            // subgradient 0 at w == 0
            *g += l1 * sign(w) + 2.0 * l2 * w;
        }
    }
    penalty
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64) -> ParameterSet {
        let mut p = ParameterSet::new(Architecture::Dense);
        p.insert("w", Tensor::vector(vec![w]), true).unwrap();
        p.insert("b", Tensor::vector(vec![5.0]), false).unwrap();
        p
    }

    #[test]
    fn zero_coefficients_leave_gradients() {
        let mut p = single(2.0);
        assert_eq!(regularization_penalty(&mut p, 0.0, 0.0), 0.0);
        assert_eq!(p.get("w").unwrap().grad.data(), &[0.0]);
    }

    #[test]
    fn l1_penalty_and_gradient() {
        let mut p = single(2.0);
        let pen = regularization_penalty(&mut p, 0.1, 0.0);
        assert!((pen - 0.2).abs() < 1e-15);
        assert!((p.get("w").unwrap().grad.data()[0] - 0.1).abs() < 1e-15);
        // biases are not penalized
        assert_eq!(p.get("b").unwrap().grad.data(), &[0.0]);
    }

    #[test]
    fn l2_penalty_and_gradient() {
        let mut p = single(2.0);
        let pen = regularization_penalty(&mut p, 0.0, 0.1);
        assert!((pen - 0.4).abs() < 1e-15);
        assert!((p.get("w").unwrap().grad.data()[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut p = single(1.0);
        assert!(p.insert("w", Tensor::vector(vec![0.0]), true).is_err());
    }

    #[test]
    fn snapshot_rejects_layout_mismatch() {
        let p = single(1.0);
        let mut other = ParameterSet::new(Architecture::Dense);
        other.insert("w", Tensor::vector(vec![1.0, 2.0]), true).unwrap();
        other.insert("b", Tensor::vector(vec![0.0]), false).unwrap();
        assert!(other.load_snapshot(&p.snapshot()).is_err());
    }
}
