//! Fuzzing framework for simulated multi-stage industrial control plants.
//!
//! The crate contains a deterministic plant simulator, a strategy formalism
//! over sensor/actuator manipulations, equivalence-class algebra for deciding
//! when two successful tests count as the same, counterfactual causal
//! minimization of tests, and the guided fuzzing loop that ties them together.

pub mod capability;
pub mod causal;
pub mod component;
pub mod cond;
pub mod equiv;
pub mod fuzz;
pub mod plant;
pub mod strategy;
pub mod suite;

pub use capability::{CapValue, Capability, CapabilitySet, CumulativeSet, History};
pub use component::{
    ActuatorDomain, ActuatorValue, ComponentId, ComponentKind, Configurations, Readings,
    SensorDomain,
};
pub use cond::{Assignment, CapCondition, CondError, SensorCondition};
pub use plant::{miniswat, PlantModel, Simulator};
pub use strategy::{Strategy, TestTrace, Transition};
