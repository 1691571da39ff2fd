use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Electrode name → applied voltage (V). Electrodes not listed sit at 0 V.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoltageSet(pub BTreeMap<String, f64>);

impl VoltageSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, name: impl Into<String>, volts: f64) {
        self.0.insert(name.into(), volts);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|(k, v)| (k.clone(), v * factor)).collect())
    }

    /// Element-wise sum; names missing on either side count as 0 V.
    pub fn added(&self, other: &VoltageSet) -> Self {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            *out.0.entry(k.to_string()).or_insert(0.0) += v;
        }
        out
    }

    /// Largest absolute difference over the union of names.
    pub fn max_abs_diff(&self, other: &VoltageSet) -> f64 {
        self.0
            .keys()
            .chain(other.0.keys())
            .map(|k| (self.get(k) - other.get(k)).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.0.values().all(|v| v.is_finite())
    }
}
