//! Bundled instances. The JSON files under `instances/` at the workspace
//! root are the source of truth; the 3x5 demo instance is embedded here so
//! library users and tests do not depend on the working directory.

use crate::config::FactoryConfig;

/// JSON text of the bundled 3-workstation, 5-task, 2-resource instance.
pub const TABLE3_JSON: &str = include_str!("../../../instances/table3.json");

/// The bundled 3x5 instance (`instances/table3.json`), already validated.
pub fn table3() -> FactoryConfig {
    FactoryConfig::from_json(TABLE3_JSON).expect("bundled instance must be valid")
}
