//! Capabilities: single forced manipulations of one component.
//!
//! A capability `[c, v]` either spoofs sensor `c` so the controller sees `v`,
//! or forces actuator `c` into state `v` regardless of what is commanded.
//! Capability sets gather at most one capability per component; histories are
//! the per-interval sequences of capability sets a test used.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::component::{ActuatorValue, ComponentId};

/// Value a capability forces: a discrete actuator state or a spoofed reading.
#[derive(Debug, Clone, Copy)]
pub enum CapValue {
    Actuator(ActuatorValue),
    Sensor(f64),
}

impl PartialEq for CapValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CapValue {}

impl PartialOrd for CapValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CapValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CapValue::Actuator(a), CapValue::Actuator(b)) => a.cmp(b),
            (CapValue::Sensor(a), CapValue::Sensor(b)) => a.total_cmp(b),
            (CapValue::Actuator(_), CapValue::Sensor(_)) => Ordering::Less,
            (CapValue::Sensor(_), CapValue::Actuator(_)) => Ordering::Greater,
        }
    }
}

impl std::hash::Hash for CapValue {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            CapValue::Actuator(a) => {
                0u8.hash(state);
                a.hash(state);
            }
            CapValue::Sensor(v) => {
                1u8.hash(state);
                v.to_bits().hash(state);
            }
        }
    }
}

impl fmt::Display for CapValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapValue::Actuator(a) => write!(f, "{a}"),
            CapValue::Sensor(v) => write!(f, "{v}"),
        }
    }
}

/// A single forced manipulation `[component, value]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Capability {
    pub component: ComponentId,
    pub value: CapValue,
}

impl Capability {
    pub fn force(component: impl Into<ComponentId>, value: ActuatorValue) -> Self {
        Capability { component: component.into(), value: CapValue::Actuator(value) }
    }

    pub fn spoof(component: impl Into<ComponentId>, value: f64) -> Self {
        Capability { component: component.into(), value: CapValue::Sensor(value) }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.component, self.value)
    }
}

impl FromStr for Capability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| format!("capability must look like [MV101,open], got `{s}`"))?;
        let (name, value) = body
            .split_once(',')
            .ok_or_else(|| format!("missing comma in capability `{s}`"))?;
        let name = name.trim();
        let value = value.trim();
        if name.is_empty() {
            return Err(format!("empty component name in `{s}`"));
        }
        if let Ok(av) = value.parse::<ActuatorValue>() {
            Ok(Capability::force(name, av))
        } else if let Ok(x) = value.parse::<f64>() {
            Ok(Capability::spoof(name, x))
        } else {
            Err(format!("unrecognised capability value `{value}`"))
        }
    }
}

impl Serialize for Capability {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Capability {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite set of capabilities with at most one per component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Capability>", into = "Vec<Capability>")]
pub struct CapabilitySet {
    caps: BTreeSet<Capability>,
}

impl CapabilitySet {
    pub fn empty() -> Self {
        CapabilitySet::default()
    }

    /// Builds a set, rejecting two capabilities on the same component.
    pub fn new(caps: impl IntoIterator<Item = Capability>) -> Result<Self, String> {
        let mut set = CapabilitySet::default();
        for c in caps {
            set.insert(c)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, cap: Capability) -> Result<(), String> {
        if self.caps.contains(&cap) {
            return Ok(());
        }
        if self.caps.iter().any(|c| c.component == cap.component) {
            return Err(format!(
                "capability set already holds a manipulation of {}",
                cap.component
            ));
        }
        self.caps.insert(cap);
        Ok(())
    }

    pub fn remove(&mut self, cap: &Capability) -> bool {
        self.caps.remove(cap)
    }

    pub fn contains(&self, cap: &Capability) -> bool {
        self.caps.contains(cap)
    }

    pub fn is_subset(&self, other: &CapabilitySet) -> bool {
        self.caps.is_subset(&other.caps)
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Capability> {
        self.caps.iter()
    }

    pub fn as_set(&self) -> &BTreeSet<Capability> {
        &self.caps
    }

    pub fn into_inner(self) -> BTreeSet<Capability> {
        self.caps
    }

    /// Set difference as a plain capability collection.
    pub fn difference<'a>(&'a self, other: &'a CapabilitySet) -> impl Iterator<Item = &'a Capability> {
        self.caps.difference(&other.caps)
    }

    /// Drops `cap` and returns the remainder; the one-per-component invariant
    /// is preserved by removal.
    pub fn without(&self, cap: &Capability) -> CapabilitySet {
        let mut out = self.clone();
        out.remove(cap);
        out
    }
}

impl FromIterator<Capability> for CapabilitySet {
    /// Panics if two capabilities target one component; use `new` to handle
    /// that case gracefully.
    fn from_iter<T: IntoIterator<Item = Capability>>(iter: T) -> Self {
        CapabilitySet::new(iter).expect("one capability per component")
    }
}

impl TryFrom<Vec<Capability>> for CapabilitySet {
    type Error = String;

    fn try_from(v: Vec<Capability>) -> Result<Self, String> {
        CapabilitySet::new(v)
    }
}

impl From<CapabilitySet> for Vec<Capability> {
    fn from(s: CapabilitySet) -> Vec<Capability> {
        s.caps.into_iter().collect()
    }
}

impl fmt::Display for CapabilitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.caps.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// Union of capabilities that may violate one-per-component; produced by
/// accumulating a whole history's sets.
pub type CumulativeSet = BTreeSet<Capability>;

/// The per-interval sequence of capability sets a test used.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct History(pub Vec<CapabilitySet>);

impl History {
    pub fn new(sets: Vec<CapabilitySet>) -> Self {
        History(sets)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CapabilitySet> {
        self.0.iter()
    }

    /// Cumulative set of every capability used anywhere in the history.
    pub fn cumulative_set(&self) -> CumulativeSet {
        let mut out = CumulativeSet::new();
        for set in &self.0 {
            out.extend(set.iter().cloned());
        }
        out
    }

    /// One-based inclusive slice: positions `k..=l`.
    pub fn slice(&self, k: usize, l: usize) -> Result<History, IndexError> {
        if !(1 <= k && k <= l && l <= self.0.len()) {
            return Err(IndexError { k, l, len: self.0.len() });
        }
        Ok(History(self.0[k - 1..=l - 1].to_vec()))
    }

    /// Number of individual capability usages summed over all positions.
    pub fn event_count(&self) -> usize {
        self.0.iter().map(|s| s.len()).sum()
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("slice bounds 1 <= k <= l <= {len} violated by k={k}, l={l}")]
pub struct IndexError {
    pub k: usize,
    pub l: usize,
    pub len: usize,
}
