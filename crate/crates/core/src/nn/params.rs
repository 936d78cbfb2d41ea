use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Freezing unit of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Conv,
    Lstm,
    Dense,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Conv, Group::Lstm, Group::Dense];

    /// Group owning a qualified entry name such as `lstm.w_ih` or `dense2.bias`.
    pub fn of(name: &str) -> Option<Group> {
        let prefix = name.split('.').next()?;
        match prefix {
            "conv" => Some(Group::Conv),
            "lstm" => Some(Group::Lstm),
            p if p.starts_with("dense") => Some(Group::Dense),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Conv => "conv",
            Group::Lstm => "lstm",
            Group::Dense => "dense",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conv" => Ok(Group::Conv),
            "lstm" => Ok(Group::Lstm),
            "dense" => Ok(Group::Dense),
            other => Err(Error::config(format!("unknown parameter group `{other}`"))),
        }
    }
}

/// Named, shaped parameter arrays plus per-group frozen flags.
///
/// Entries are kept in a `BTreeMap` so iteration order, serialization and
/// gradient accumulation are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    entries: BTreeMap<String, Tensor>,
    frozen: BTreeMap<Group, bool>,
    rng_seed: u64,
}

impl ParamStore {
    pub fn new(rng_seed: u64) -> Self {
        ParamStore {
            entries: BTreeMap::new(),
            frozen: Group::ALL.iter().map(|&g| (g, false)).collect(),
            rng_seed,
        }
    }

    /// Registers an entry. The name must be group-qualified and unused.
    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if Group::of(name).is_none() {
            return Err(Error::config(format!("entry `{name}` belongs to no group")));
        }
        if self.entries.contains_key(name) {
            return Err(Error::config(format!("entry `{name}` already registered")));
        }
        self.entries.insert(name.to_string(), value);
        Ok(())
    }

    /// Replaces the contents of an existing entry, keeping its shape fixed.
    pub fn replace(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::usage(format!("no entry `{name}`")))?;
        value.expect_shape(slot.shape(), name)?;
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::usage(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn group_entries(&self, group: Group) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries()
            .filter(move |(k, _)| Group::of(k) == Some(group))
    }

    pub fn is_frozen(&self, group: Group) -> bool {
        self.frozen.get(&group).copied().unwrap_or(false)
    }

    pub fn set_frozen(&mut self, group: Group, frozen: bool) {
        self.frozen.insert(group, frozen);
    }

    pub fn frozen_flags(&self) -> &BTreeMap<Group, bool> {
        &self.frozen
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn n_params(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn group_n_params(&self, group: Group) -> usize {
        self.group_entries(group).map(|(_, t)| t.len()).sum()
    }

    /// Zero-filled gradient container with one slot per entry.
    pub fn zeros_like(&self) -> Grads {
        Grads {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    /// Whether every entry of `group` is bitwise equal between two stores.
    pub fn group_bit_identical(&self, other: &ParamStore, group: Group) -> bool {
        self.group_entries(group).all(|(name, t)| {
            other.entries.get(name).is_some_and(|o| {
                o.shape() == t.shape()
                    && o.data()
                        .iter()
                        .zip(t.data())
                        .all(|(a, b)| a.to_bits() == b.to_bits())
            })
        })
    }

    /// Largest absolute elementwise difference over a group.
    pub fn group_max_abs_diff(&self, other: &ParamStore, group: Group) -> f64 {
        self.group_entries(group)
            .filter_map(|(name, t)| other.entries.get(name).map(|o| t.max_abs_diff(o)))
            .fold(0.0, f64::max)
    }
}

/// Gradients keyed like the [`ParamStore`] they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    entries: BTreeMap<String, Tensor>,
}

impl Grads {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn slot(&mut self, name: &str) -> &mut Tensor {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("gradient slot `{name}` missing"))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (k, v) in self.entries.iter_mut() {
            if let Some(o) = other.entries.get(k) {
                v.add_assign(o);
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.entries.values_mut().for_each(|t| t.scale(k));
    }

    /// Shape check against a parameter store.
    pub fn check_against(&self, params: &ParamStore) -> Result<()> {
        for (name, p) in params.entries() {
            let g = self
                .entries
                .get(name)
                .ok_or_else(|| Error::usage(format!("gradient for `{name}` missing")))?;
            if g.shape() != p.shape() {
                return Err(Error::usage(format!(
                    "gradient for `{name}` has shape {:?}, parameter has {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
        }
        if self.entries.len() != params.entries.len() {
            return Err(Error::usage("gradient has entries unknown to the store"));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|t| t.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_resolve_from_prefix() {
        assert_eq!(Group::of("conv.kernel"), Some(Group::Conv));
        assert_eq!(Group::of("lstm.w_hh"), Some(Group::Lstm));
        assert_eq!(Group::of("dense1.weight"), Some(Group::Dense));
        assert_eq!(Group::of("dense2.bias"), Some(Group::Dense));
        assert_eq!(Group::of("head.bias"), None);
    }

    #[test]
    fn insert_rejects_ungrouped_and_duplicate_names() {
        let mut p = ParamStore::new(0);
        assert!(p.insert("misc.w", Tensor::zeros(&[2])).is_err());
        p.insert("conv.bias", Tensor::zeros(&[2])).unwrap();
        assert!(p.insert("conv.bias", Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn replace_keeps_shape_fixed() {
        let mut p = ParamStore::new(0);
        p.insert("dense1.bias", Tensor::zeros(&[3])).unwrap();
        assert!(p.replace("dense1.bias", Tensor::zeros(&[4])).is_err());
        p.replace(
            "dense1.bias",
            Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(p.get("dense1.bias").unwrap().data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn grads_shape_check() {
        let mut p = ParamStore::new(0);
        p.insert("lstm.bias", Tensor::zeros(&[8])).unwrap();
        let g = p.zeros_like();
        g.check_against(&p).unwrap();
        let mut q = ParamStore::new(0);
        q.insert("lstm.bias", Tensor::zeros(&[4])).unwrap();
        assert!(q.zeros_like().check_against(&p).is_err());
    }
}
