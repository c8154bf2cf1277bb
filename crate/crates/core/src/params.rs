//! Flat storage for every learnable parameter of a tree.
//!
//! Components (coupling-layer nets, metric nets, parameterized velocities)
//! own a [`Weights`] handle. Learnable components point at a slice of the
//! shared [`ParamVector`]; frozen components carry their values inline and
//! never receive gradient.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub registry: Vec<ParamEntry>,
    pub values: Vec<f64>,
    /// Length scales resolved from data for diffeomorphism edges whose spec
    /// left them unset, keyed by edge name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub length_scales: BTreeMap<String, f64>,
}

impl ParamVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Appends a named component and returns its slice range.
    pub fn register(&mut self, name: impl Into<String>, init: &[f64]) -> Range<usize> {
        let offset = self.values.len();
        self.values.extend_from_slice(init);
        self.registry.push(ParamEntry {
            name: name.into(),
            offset,
            len: init.len(),
        });
        offset..offset + init.len()
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.registry.iter().find(|e| e.name == name)
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.entry(name)
            .map(|e| &self.values[e.offset..e.offset + e.len])
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            registry: self.registry.clone(),
            values,
            length_scales: self.length_scales.clone(),
        }
    }

    /// Checks that the registry is contiguous, disjoint and covers `values`.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for e in &self.registry {
            if e.offset != expected {
                return Err(Error::Config(format!(
                    "parameter `{}` starts at {} but previous component ends at {expected}",
                    e.name, e.offset
                )));
            }
            expected += e.len;
        }
        if expected != self.values.len() {
            return Err(Error::Config(format!(
                "registry covers {expected} values but vector holds {}",
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Takes values from `other` after checking both share the same registry.
    pub fn load_from(&mut self, other: &ParamVector) -> Result<()> {
        other.validate()?;
        if other.registry != self.registry {
            return Err(Error::Config(
                "parameter registry does not match the tree".into(),
            ));
        }
        self.values.clone_from(&other.values);
        self.length_scales.clone_from(&other.length_scales);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: ParamVector = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Where a component reads its weights from.
#[derive(Clone, Debug)]
pub enum Weights {
    Learnable(Range<usize>),
    Frozen(Vec<f64>),
}

impl Weights {
    pub fn get<'a>(&'a self, params: &'a ParamVector) -> &'a [f64] {
        match self {
            Weights::Learnable(r) => &params.values[r.clone()],
            Weights::Frozen(v) => v,
        }
    }

    /// Mutable gradient slice for learnable weights, `None` when frozen.
    pub fn grad<'g>(&self, grad: &'g mut [f64]) -> Option<&'g mut [f64]> {
        match self {
            Weights::Learnable(r) => Some(&mut grad[r.clone()]),
            Weights::Frozen(_) => None,
        }
    }

    pub fn is_learnable(&self) -> bool {
        matches!(self, Weights::Learnable(r) if !r.is_empty())
    }

    pub fn len(&self) -> usize {
        match self {
            Weights::Learnable(r) => r.len(),
            Weights::Frozen(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers `init` as learnable or keeps it inline.
    pub fn allocate(params: &mut ParamVector, name: String, init: Vec<f64>, learnable: bool) -> Self {
        if learnable {
            Weights::Learnable(params.register(name, &init))
        } else {
            Weights::Frozen(init)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_contiguous() {
        let mut p = ParamVector::new();
        let a = p.register("a", &[1.0, 2.0]);
        let b = p.register("b", &[3.0]);
        assert_eq!(a, 0..2);
        assert_eq!(b, 2..3);
        p.validate().unwrap();
        assert_eq!(p.slice("b").unwrap(), &[3.0]);
    }

    #[test]
    fn json_roundtrip_and_mismatch() {
        let mut p = ParamVector::new();
        p.register("w", &[0.5, -1.0]);
        let back = ParamVector::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);

        let mut other = ParamVector::new();
        other.register("v", &[0.0, 0.0]);
        assert!(other.load_from(&p).is_err());
    }

    #[test]
    fn gapped_registry_rejected() {
        let p = ParamVector {
            registry: vec![ParamEntry {
                name: "x".into(),
                offset: 1,
                len: 1,
            }],
            values: vec![0.0, 0.0],
            length_scales: Default::default(),
        };
        assert!(p.validate().is_err());
    }
}
