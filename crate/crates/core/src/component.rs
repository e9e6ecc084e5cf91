//! Component identifiers, value domains, and per-component state snapshots.
//!
//! Components are the plant's sensors and actuators. The identifier prefix
//! determines what kind of device a name refers to: `MV` valves, `P` pumps,
//! `LIT` level sensors, `FIT` flow sensors, `DPIT` differential-pressure
//! sensors.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Name of a sensor or actuator, e.g. `MV101` or `LIT301`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(Arc<str>);

impl ComponentId {
    pub fn new(name: impl AsRef<str>) -> Self {
        ComponentId(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Device kind implied by the name prefix, if the prefix is known.
    pub fn kind(&self) -> Option<ComponentKind> {
        let s = self.as_str();
        if s.starts_with("DPIT") {
            Some(ComponentKind::PressureSensor)
        } else if s.starts_with("LIT") {
            Some(ComponentKind::LevelSensor)
        } else if s.starts_with("FIT") {
            Some(ComponentKind::FlowSensor)
        } else if s.starts_with("MV") {
            Some(ComponentKind::Valve)
        } else if s.starts_with('P') {
            Some(ComponentKind::Pump)
        } else {
            None
        }
    }

    pub fn is_sensor(&self) -> bool {
        matches!(
            self.kind(),
            Some(ComponentKind::LevelSensor)
                | Some(ComponentKind::FlowSensor)
                | Some(ComponentKind::PressureSensor)
        )
    }

    pub fn is_actuator(&self) -> bool {
        matches!(self.kind(), Some(ComponentKind::Valve) | Some(ComponentKind::Pump))
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComponentId({})", self.as_str())
    }
}

impl From<&str> for ComponentId {
    fn from(s: &str) -> Self {
        ComponentId::new(s)
    }
}

impl Serialize for ComponentId {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ComponentId {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Ok(ComponentId::new(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    Valve,
    Pump,
    LevelSensor,
    FlowSensor,
    PressureSensor,
}

/// Discrete state of an actuator. Valves take `Open`/`Closed`, pumps `On`/`Off`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuatorValue {
    Open,
    #[serde(alias = "close")]
    Closed,
    On,
    Off,
}

impl ActuatorValue {
    /// Whether this state lets water pass (valve open / pump running).
    pub fn enables_flow(self) -> bool {
        matches!(self, ActuatorValue::Open | ActuatorValue::On)
    }

    pub fn fits_kind(self, kind: ComponentKind) -> bool {
        match kind {
            ComponentKind::Valve => matches!(self, ActuatorValue::Open | ActuatorValue::Closed),
            ComponentKind::Pump => matches!(self, ActuatorValue::On | ActuatorValue::Off),
            _ => false,
        }
    }
}

impl fmt::Display for ActuatorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActuatorValue::Open => "open",
            ActuatorValue::Closed => "close",
            ActuatorValue::On => "on",
            ActuatorValue::Off => "off",
        };
        f.write_str(s)
    }
}

impl FromStr for ActuatorValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" => Ok(ActuatorValue::Open),
            "close" | "closed" => Ok(ActuatorValue::Closed),
            "on" => Ok(ActuatorValue::On),
            "off" => Ok(ActuatorValue::Off),
            other => Err(format!("unknown actuator value `{other}`")),
        }
    }
}

/// Domain of a discrete actuator: the finite ordered set of states it can take.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActuatorDomain {
    pub values: Vec<ActuatorValue>,
}

impl ActuatorDomain {
    pub fn valve() -> Self {
        ActuatorDomain { values: vec![ActuatorValue::Open, ActuatorValue::Closed] }
    }

    pub fn pump() -> Self {
        ActuatorDomain { values: vec![ActuatorValue::On, ActuatorValue::Off] }
    }

    pub fn contains(&self, v: ActuatorValue) -> bool {
        self.values.contains(&v)
    }
}

/// Real-valued sensor domain with its manufacturer-defined safe sub-range.
///
/// Invariant: `lo <= safe_lo < safe_hi <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorDomain {
    pub lo: f64,
    pub hi: f64,
    pub safe_lo: f64,
    pub safe_hi: f64,
}

impl SensorDomain {
    pub fn new(lo: f64, hi: f64, safe_lo: f64, safe_hi: f64) -> Result<Self, String> {
        if !(lo <= safe_lo && safe_lo < safe_hi && safe_hi <= hi) {
            return Err(format!(
                "invalid sensor domain: need lo <= safe_lo < safe_hi <= hi, got [{lo}, {safe_lo}, {safe_hi}, {hi}]"
            ));
        }
        Ok(SensorDomain { lo, hi, safe_lo, safe_hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_safe(&self, v: f64) -> bool {
        self.safe_lo <= v && v <= self.safe_hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Snapshot of every sensor's current reading: exactly one value per sensor,
/// held sorted by component id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Readings {
    entries: Vec<(ComponentId, f64)>,
}

impl Readings {
    pub fn from_entries(mut entries: Vec<(ComponentId, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|a, b| a.0 == b.0);
        Readings { entries }
    }

    pub fn get(&self, id: &ComponentId) -> Option<f64> {
        self.entries
            .binary_search_by(|(c, _)| c.cmp(id))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn get_by_name(&self, name: &str) -> Option<f64> {
        self.entries
            .binary_search_by(|(c, _)| c.as_str().cmp(name))
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Replaces the stored value for `id`; ignores unknown ids.
    pub fn set(&mut self, id: &ComponentId, value: f64) {
        if let Ok(i) = self.entries.binary_search_by(|(c, _)| c.cmp(id)) {
            self.entries[i].1 = value;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ComponentId, f64)> {
        self.entries.iter().map(|(c, v)| (c, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Snapshot of every actuator's commanded state: exactly one value per
/// actuator, held sorted by component id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Configurations {
    entries: Vec<(ComponentId, ActuatorValue)>,
}

impl Configurations {
    pub fn from_entries(mut entries: Vec<(ComponentId, ActuatorValue)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|a, b| a.0 == b.0);
        Configurations { entries }
    }

    pub fn get(&self, id: &ComponentId) -> Option<ActuatorValue> {
        self.entries
            .binary_search_by(|(c, _)| c.cmp(id))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn set(&mut self, id: &ComponentId, value: ActuatorValue) {
        match self.entries.binary_search_by(|(c, _)| c.cmp(id)) {
            Ok(i) => self.entries[i].1 = value,
            Err(i) => self.entries.insert(i, (id.clone(), value)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ComponentId, ActuatorValue)> {
        self.entries.iter().map(|(c, v)| (c, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
