//! Plant model files: a TOML document listing tanks, pipes, sensor domains,
//! control rules, and the nominal start point. Loading validates the model;
//! saving a loaded model reproduces it exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::component::{ActuatorValue, ComponentId, SensorDomain};
use crate::cond::parse_sensor_condition;

use super::{
    ControlRule, ModelViolation, NominalState, Pipe, PlantModel, PressureSensor, Tank,
};

#[derive(Debug, thiserror::Error)]
pub enum PlantFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("TOML error: {0}")]
    Toml(String),
    #[error("{0}")]
    Invalid(String),
    #[error("model validation failed:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Violations(Vec<ModelViolation>),
}

#[derive(Debug, Serialize, Deserialize)]
struct PlantFile {
    tick_secs: u64,
    #[serde(rename = "tank")]
    tanks: Vec<Tank>,
    #[serde(rename = "pipe")]
    pipes: Vec<Pipe>,
    sensors: BTreeMap<ComponentId, SensorDomain>,
    #[serde(rename = "pressure_sensor", default)]
    pressure_sensors: Vec<PressureSensor>,
    #[serde(rename = "rule", default)]
    rules: Vec<RuleFile>,
    nominal: NominalFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleFile {
    guard: String,
    priority: i32,
    commands: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NominalFile {
    levels: BTreeMap<String, f64>,
    commands: Vec<String>,
}

fn parse_command(text: &str) -> Result<(ComponentId, ActuatorValue), PlantFileError> {
    let (actuator, value) = text
        .split_once(":=")
        .ok_or_else(|| PlantFileError::Invalid(format!("command `{text}` must look like `MV101 := open`")))?;
    let value: ActuatorValue = value
        .trim()
        .parse()
        .map_err(|e: String| PlantFileError::Invalid(format!("in command `{text}`: {e}")))?;
    Ok((ComponentId::new(actuator.trim()), value))
}

fn format_command(actuator: &ComponentId, value: ActuatorValue) -> String {
    format!("{actuator} := {value}")
}

/// Parses a plant model from TOML text and validates it.
pub fn parse_plant_toml(text: &str) -> Result<PlantModel, PlantFileError> {
    let file: PlantFile = toml::from_str(text).map_err(|e| PlantFileError::Toml(e.to_string()))?;
    let mut rules = Vec::with_capacity(file.rules.len());
    for r in file.rules {
        let guard = parse_sensor_condition(&r.guard)
            .map_err(|e| PlantFileError::Invalid(format!("rule guard: {e}")))?;
        let mut commands = Vec::with_capacity(r.commands.len());
        for c in &r.commands {
            commands.push(parse_command(c)?);
        }
        rules.push(ControlRule { guard, commands, priority: r.priority });
    }
    let mut nominal_commands = Vec::with_capacity(file.nominal.commands.len());
    for c in &file.nominal.commands {
        nominal_commands.push(parse_command(c)?);
    }
    let model = PlantModel {
        tanks: file.tanks,
        pipes: file.pipes,
        sensors: file.sensors,
        pressure_sensors: file.pressure_sensors,
        rules,
        tick_secs: file.tick_secs,
        nominal: NominalState { levels: file.nominal.levels, commands: nominal_commands },
    };
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(PlantFileError::Violations(violations));
    }
    Ok(model)
}

/// Renders a model back to its TOML document form.
pub fn plant_to_toml(model: &PlantModel) -> String {
    let file = PlantFile {
        tick_secs: model.tick_secs,
        tanks: model.tanks.clone(),
        pipes: model.pipes.clone(),
        sensors: model.sensors.clone(),
        pressure_sensors: model.pressure_sensors.clone(),
        rules: model
            .rules
            .iter()
            .map(|r| RuleFile {
                guard: r.guard.to_string(),
                priority: r.priority,
                commands: r.commands.iter().map(|(a, v)| format_command(a, *v)).collect(),
            })
            .collect(),
        nominal: NominalFile {
            levels: model.nominal.levels.clone(),
            commands: model
                .nominal
                .commands
                .iter()
                .map(|(a, v)| format_command(a, *v))
                .collect(),
        },
    };
    toml::to_string_pretty(&file).expect("plant model serialises")
}

pub fn load_plant_file(path: impl AsRef<Path>) -> Result<PlantModel, PlantFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PlantFileError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_plant_toml(&text)
}

pub fn save_plant_file(model: &PlantModel, path: impl AsRef<Path>) -> Result<(), PlantFileError> {
    let path = path.as_ref();
    std::fs::write(path, plant_to_toml(model)).map_err(|e| PlantFileError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
