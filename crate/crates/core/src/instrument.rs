//! The design-perception measurement instrument: four design dimensions,
//! three adjective items each, rated on a bounded integer scale.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HillError, Result};

pub const INSTRUMENT_FORMAT: &str = "hill-instrument";
pub const INSTRUMENT_VERSION: u32 = 1;
pub const ITEMS_PER_DIMENSION: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Novelty,
    Energy,
    Simplicity,
    Tool,
}

impl Dimension {
    /// Instrument order.
    pub const ALL: [Dimension; 4] = [
        Dimension::Novelty,
        Dimension::Energy,
        Dimension::Simplicity,
        Dimension::Tool,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Novelty => "novelty",
            Dimension::Energy => "energy",
            Dimension::Simplicity => "simplicity",
            Dimension::Tool => "tool",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = HillError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "novelty" => Ok(Dimension::Novelty),
            "energy" => Ok(Dimension::Energy),
            "simplicity" => Ok(Dimension::Simplicity),
            "tool" => Ok(Dimension::Tool),
            other => Err(HillError::InvalidCategory(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: i64,
    pub max: i64,
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale { min: 1, max: 7 }
    }
}

impl RatingScale {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min >= max {
            return Err(HillError::InvalidScale { min, max });
        }
        Ok(RatingScale { min, max })
    }

    pub fn midpoint(&self) -> f64 {
        (self.min + self.max) as f64 / 2.0
    }

    pub fn contains(&self, value: i64) -> bool {
        (self.min..=self.max).contains(&value)
    }

    pub fn contains_f64(&self, value: f64) -> bool {
        value >= self.min as f64 && value <= self.max as f64
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min as f64, self.max as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionDef {
    pub name: Dimension,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstrumentDocument", into = "InstrumentDocument")]
pub struct Instrument {
    dimensions: Vec<DimensionDef>,
    scale: RatingScale,
}

impl Default for Instrument {
    fn default() -> Self {
        default_instrument()
    }
}

/// The 4×3 adjective instrument on a 1–7 scale.
pub fn default_instrument() -> Instrument {
    let defs = [
        (Dimension::Novelty, ["exciting", "unique", "creative"]),
        (Dimension::Energy, ["powerful", "clever", "intuitive"]),
        (Dimension::Simplicity, ["simple", "clear", "minimalistic"]),
        (Dimension::Tool, ["practical", "functional", "useful"]),
    ];
    Instrument {
        dimensions: defs
            .iter()
            .map(|(name, items)| DimensionDef {
                name: *name,
                items: items.iter().map(|s| s.to_string()).collect(),
            })
            .collect(),
        scale: RatingScale::default(),
    }
}

impl Instrument {
    /// Builds a custom instrument. Dimensions must come in instrument order
    /// with three distinct items each.
    pub fn new(dimensions: Vec<DimensionDef>, scale: RatingScale) -> Result<Self> {
        RatingScale::new(scale.min, scale.max)?;
        if dimensions.len() != Dimension::ALL.len() {
            return Err(HillError::InvalidInstrument(format!(
                "expected 4 dimensions, got {}",
                dimensions.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for (def, expected) in dimensions.iter().zip(Dimension::ALL) {
            if def.name != expected {
                return Err(HillError::InvalidInstrument(format!(
                    "dimension {} out of order, expected {}",
                    def.name, expected
                )));
            }
            if def.items.len() != ITEMS_PER_DIMENSION {
                return Err(HillError::InvalidInstrument(format!(
                    "dimension {} has {} items, expected 3",
                    def.name,
                    def.items.len()
                )));
            }
            for item in &def.items {
                if item.trim().is_empty() || !seen.insert(item.clone()) {
                    return Err(HillError::InvalidInstrument(format!(
                        "item {item:?} is empty or repeated"
                    )));
                }
            }
        }
        Ok(Instrument { dimensions, scale })
    }

    pub fn dimensions(&self) -> &[DimensionDef] {
        &self.dimensions
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn items_of(&self, dimension: Dimension) -> &[String] {
        &self.dimensions[dimension.index()].items
    }

    /// All item ids in instrument order (dimension-major).
    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.dimensions
            .iter()
            .flat_map(|d| d.items.iter().map(String::as_str))
    }

    pub fn item_count(&self) -> usize {
        self.dimensions.len() * ITEMS_PER_DIMENSION
    }

    pub fn dimension_of(&self, item: &str) -> Option<Dimension> {
        self.dimensions
            .iter()
            .find(|d| d.items.iter().any(|i| i == item))
            .map(|d| d.name)
    }

    /// Dimension of the item at column `index` in instrument order.
    pub fn dimension_at(&self, index: usize) -> Dimension {
        Dimension::ALL[index / ITEMS_PER_DIMENSION]
    }
}

/// Versioned on-disk form of an [`Instrument`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentDocument {
    pub format: String,
    pub version: u32,
    pub scale: RatingScale,
    pub dimensions: Vec<DimensionDef>,
}

impl From<Instrument> for InstrumentDocument {
    fn from(i: Instrument) -> Self {
        InstrumentDocument {
            format: INSTRUMENT_FORMAT.to_string(),
            version: INSTRUMENT_VERSION,
            scale: i.scale,
            dimensions: i.dimensions,
        }
    }
}

impl TryFrom<InstrumentDocument> for Instrument {
    type Error = HillError;

    fn try_from(doc: InstrumentDocument) -> Result<Self> {
        if doc.format != INSTRUMENT_FORMAT || doc.version != INSTRUMENT_VERSION {
            return Err(HillError::InvalidInstrument(format!(
                "unsupported document {} v{}",
                doc.format, doc.version
            )));
        }
        Instrument::new(doc.dimensions, doc.scale)
    }
}
