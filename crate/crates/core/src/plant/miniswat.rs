//! MiniSWaT: the built-in three-tank reference plant.
//!
//! Water passes raw-in → T101 → T301 → (ultrafiltration) → T401 → drain.
//! The inflow valve MV101 duty-cycles on T101's level band while every
//! downstream pipe runs continuously on redundant pump pairs, so in normal
//! operation the transfer/UF/outflow sensors sit at their nominal readings and
//! every sensor stays inside its safe range indefinitely. The inflow pipe is
//! deliberately faster than the downstream pipes: holding MV101 open against
//! its shut-off rule is what makes the first tank overfill.

use std::collections::BTreeMap;

use crate::component::{ActuatorValue, ComponentId, SensorDomain};
use crate::cond::parse_sensor_condition;

use super::{ControlRule, Endpoint, NominalState, Pipe, PlantModel, PressureSensor, Tank};

const TANK_AREA_M2: f64 = 1.5;
const TANK_MAX_MM: f64 = 1600.0;

/// Builds the reference model. Always passes validation.
pub fn miniswat() -> PlantModel {
    let lit = SensorDomain::new(0.0, TANK_MAX_MM, 250.0, 1100.0).unwrap();
    let fit_fast = SensorDomain::new(0.0, 8.0, 0.0, 5.5).unwrap();
    let fit_steady = SensorDomain::new(0.0, 4.0, 1.0, 3.0).unwrap();
    let dpit = SensorDomain::new(0.0, 1.0, 0.1, 0.8).unwrap();

    let mut sensors = BTreeMap::new();
    sensors.insert(ComponentId::new("LIT101"), lit);
    sensors.insert(ComponentId::new("LIT301"), lit);
    sensors.insert(ComponentId::new("LIT401"), lit);
    sensors.insert(ComponentId::new("FIT101"), fit_fast);
    sensors.insert(ComponentId::new("FIT201"), fit_steady);
    sensors.insert(ComponentId::new("FIT301"), fit_steady);
    sensors.insert(ComponentId::new("FIT401"), fit_steady);
    sensors.insert(ComponentId::new("DPIT301"), dpit);

    let tanks = vec![
        Tank {
            id: "T101".into(),
            area_m2: TANK_AREA_M2,
            max_level_mm: TANK_MAX_MM,
            level_sensor: ComponentId::new("LIT101"),
        },
        Tank {
            id: "T301".into(),
            area_m2: TANK_AREA_M2,
            max_level_mm: TANK_MAX_MM,
            level_sensor: ComponentId::new("LIT301"),
        },
        Tank {
            id: "T401".into(),
            area_m2: TANK_AREA_M2,
            max_level_mm: TANK_MAX_MM,
            level_sensor: ComponentId::new("LIT401"),
        },
    ];

    let pipes = vec![
        Pipe {
            id: "inflow".into(),
            from: Endpoint::Source,
            to: Endpoint::Tank("T101".into()),
            valve: Some(ComponentId::new("MV101")),
            pumps: vec![],
            nominal_flow_m3h: 5.0,
            flow_sensor: Some(ComponentId::new("FIT101")),
        },
        Pipe {
            id: "transfer".into(),
            from: Endpoint::Tank("T101".into()),
            to: Endpoint::Tank("T301".into()),
            valve: Some(ComponentId::new("MV201")),
            pumps: vec![ComponentId::new("P101"), ComponentId::new("P102")],
            nominal_flow_m3h: 2.0,
            flow_sensor: Some(ComponentId::new("FIT201")),
        },
        Pipe {
            id: "uf".into(),
            from: Endpoint::Tank("T301".into()),
            to: Endpoint::Tank("T401".into()),
            valve: Some(ComponentId::new("MV302")),
            pumps: vec![ComponentId::new("P301"), ComponentId::new("P302")],
            nominal_flow_m3h: 2.0,
            flow_sensor: Some(ComponentId::new("FIT301")),
        },
        Pipe {
            id: "outflow".into(),
            from: Endpoint::Tank("T401".into()),
            to: Endpoint::Drain,
            valve: None,
            pumps: vec![ComponentId::new("P401"), ComponentId::new("P402")],
            nominal_flow_m3h: 2.0,
            flow_sensor: Some(ComponentId::new("FIT401")),
        },
    ];

    let pressure_sensors = vec![PressureSensor {
        id: ComponentId::new("DPIT301"),
        pipe: "uf".into(),
        gain_bar_per_m3h: 0.15,
    }];

    let rule = |guard: &str, commands: Vec<(&str, ActuatorValue)>, priority: i32| ControlRule {
        guard: parse_sensor_condition(guard).expect("built-in rule"),
        commands: commands
            .into_iter()
            .map(|(c, v)| (ComponentId::new(c), v))
            .collect(),
        priority,
    };

    use ActuatorValue::*;
    let rules = vec![
        // refill band for the first tank
        rule("LIT101 < 600", vec![("MV101", Open)], 1),
        rule("LIT101 > 800", vec![("MV101", Closed)], 1),
        // redundant pump pairs run whenever their source tank holds water
        rule("LIT101 >= 100", vec![("P101", On), ("P102", On)], 1),
        rule("LIT101 < 100", vec![("P101", Off), ("P102", Off)], 2),
        rule("LIT301 >= 100", vec![("P301", On), ("P302", On)], 1),
        rule("LIT301 < 100", vec![("P301", Off), ("P302", Off)], 2),
        rule("LIT401 >= 100", vec![("P401", On), ("P402", On)], 1),
        rule("LIT401 < 100", vec![("P401", Off), ("P402", Off)], 2),
    ];

    let nominal = NominalState {
        levels: BTreeMap::from([
            ("T101".to_string(), 700.0),
            ("T301".to_string(), 700.0),
            ("T401".to_string(), 700.0),
        ]),
        commands: vec![
            (ComponentId::new("MV101"), Open),
            (ComponentId::new("MV201"), Open),
            (ComponentId::new("P101"), On),
            (ComponentId::new("P102"), On),
            (ComponentId::new("MV302"), Open),
            (ComponentId::new("P301"), On),
            (ComponentId::new("P302"), On),
            (ComponentId::new("P401"), On),
            (ComponentId::new("P402"), On),
        ],
    };

    PlantModel {
        tanks,
        pipes,
        sensors,
        pressure_sensors,
        rules,
        tick_secs: 1,
        nominal,
    }
}
