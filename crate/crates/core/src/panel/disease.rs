use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// One of the 16 GBD Level-2 cause categories analysed.
///
/// The discriminant is the dense id (0..16), stable across releases.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiseaseCategory(u8);

struct Entry {
    name: &'static str,
    aliases: &'static [&'static str],
}

const CATEGORIES: [Entry; 16] = [
    Entry {
        name: "HIV/AIDS and sexually transmitted infections",
        aliases: &["hiv/aids and stis", "hiv", "hiv/aids", "hiv/aids and sexually transmitted infections"],
    },
    Entry {
        name: "Neglected tropical diseases and malaria",
        aliases: &["ntds and malaria", "neglected tropical diseases", "malaria"],
    },
    Entry {
        name: "Respiratory infections and tuberculosis",
        aliases: &["respiratory infections", "tuberculosis"],
    },
    Entry {
        name: "Maternal and neonatal disorders",
        aliases: &["maternal and neonatal", "maternal"],
    },
    Entry {
        name: "Nutritional deficiencies",
        aliases: &["nutritional"],
    },
    Entry {
        name: "Cardiovascular diseases",
        aliases: &["cardiovascular"],
    },
    Entry {
        name: "Neoplasms",
        aliases: &["neoplasm", "cancer"],
    },
    Entry {
        name: "Diabetes and kidney diseases",
        aliases: &["diabetes and kidney", "diabetes"],
    },
    Entry {
        name: "Chronic respiratory diseases",
        aliases: &["chronic respiratory"],
    },
    Entry {
        name: "Digestive diseases",
        aliases: &["digestive"],
    },
    Entry {
        name: "Mental disorders",
        aliases: &["mental"],
    },
    Entry {
        name: "Neurological disorders",
        aliases: &["neurological"],
    },
    Entry {
        name: "Musculoskeletal disorders",
        aliases: &["musculoskeletal"],
    },
    Entry {
        name: "Sense organ diseases",
        aliases: &["sense organ"],
    },
    Entry {
        name: "Skin and subcutaneous diseases",
        aliases: &["skin and subcutaneous", "skin"],
    },
    Entry {
        name: "Substance use disorders",
        aliases: &["substance use"],
    },
];

/// Lowercase, map `_`/`-` to spaces and collapse runs of whitespace.
fn normalize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c == '_' || c == '-' { ' ' } else { c.to_ascii_lowercase() })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl DiseaseCategory {
    pub const COUNT: usize = CATEGORIES.len();

    pub fn from_id(id: usize) -> Option<Self> {
        (id < Self::COUNT).then_some(DiseaseCategory(id as u8))
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        CATEGORIES[self.id()].name
    }

    pub fn all() -> impl Iterator<Item = DiseaseCategory> {
        (0..Self::COUNT).map(|i| DiseaseCategory(i as u8))
    }

    /// Case-insensitive, whitespace-normalized lookup by canonical name or alias.
    pub fn parse(label: &str) -> Result<Self, Error> {
        let key = normalize(label);
        CATEGORIES
            .iter()
            .position(|e| normalize(e.name) == key || e.aliases.iter().any(|a| normalize(a) == key))
            .map(|i| DiseaseCategory(i as u8))
            .ok_or_else(|| Error::UnknownDisease(label.trim().to_string()))
    }
}

impl FromStr for DiseaseCategory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        DiseaseCategory::parse(s)
    }
}

impl fmt::Display for DiseaseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Debug for DiseaseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Disease({})", self.name())
    }
}

impl Serialize for DiseaseCategory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for DiseaseCategory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DiseaseCategory::parse(&s).map_err(serde::de::Error::custom)
    }
}
