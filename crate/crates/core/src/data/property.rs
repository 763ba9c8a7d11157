use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five ionic-liquid properties. Viscosity is carried as `ln(μ / mPa·s)` throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Density,
    LnViscosity,
    SurfaceTension,
    HeatCapacity,
    MeltingPoint,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Density,
        Property::LnViscosity,
        Property::SurfaceTension,
        Property::HeatCapacity,
        Property::MeltingPoint,
    ];

    /// Properties with simulated pre-training data.
    pub const PRETRAINABLE: [Property; 3] = [Property::Density, Property::LnViscosity, Property::HeatCapacity];

    pub fn tag(self) -> &'static str {
        match self {
            Property::Density => "density",
            Property::LnViscosity => "ln_viscosity",
            Property::SurfaceTension => "surface_tension",
            Property::HeatCapacity => "heat_capacity",
            Property::MeltingPoint => "melting_point",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Property::Density => "kg/m3",
            Property::LnViscosity => "ln(mPa s)",
            Property::SurfaceTension => "N/m",
            Property::HeatCapacity => "J/(mol K)",
            Property::MeltingPoint => "K",
        }
    }

    /// Melting point depends on structure only.
    pub fn depends_on_conditions(self) -> bool {
        self != Property::MeltingPoint
    }

    /// Default condition inputs for fine-tuning: `(temperature, pressure)`.
    pub fn default_conditions(self) -> (bool, bool) {
        match self {
            Property::MeltingPoint => (false, false),
            Property::Density => (true, true),
            _ => (true, false),
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .into_iter()
            .find(|p| p.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown property tag {s:?}")))
    }
}
