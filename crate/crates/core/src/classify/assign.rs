use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClassifiedPair, Factor, Status};
use crate::error::{Error, Result};
use crate::panel::{CountryCode, DiseaseCategory};

/// Most frequent factor; ties go to the earliest in factor order.
fn mode(factors: impl Iterator<Item = Factor>) -> Option<Factor> {
    let mut counts: BTreeMap<Factor, usize> = BTreeMap::new();
    for f in factors {
        *counts.entry(f).or_default() += 1;
    }
    let max = *counts.values().max()?;
    counts.into_iter().find(|(_, c)| *c == max).map(|(f, _)| f)
}

/// Gives over-performing pairs the modal limiting factor of under-performing
/// pairs with the same disease, else the same country, else all of them.
///
/// Under-performers without a factor do not vote. Returns an error when an
/// over-performer exists but no under-performer has a factor.
pub fn assign_factor_overperforming(pairs: &mut [ClassifiedPair]) -> Result<()> {
    let voters: Vec<(CountryCode, DiseaseCategory, Factor)> = pairs
        .iter()
        .filter(|p| p.status == Status::UnderPerforming && p.factor != Factor::Unassigned)
        .map(|p| (p.country, p.disease, p.factor))
        .collect();
    let global = mode(voters.iter().map(|v| v.2));
    for p in pairs.iter_mut().filter(|p| p.status == Status::OverPerforming) {
        let f = mode(voters.iter().filter(|v| v.1 == p.disease).map(|v| v.2))
            .or_else(|| mode(voters.iter().filter(|v| v.0 == p.country).map(|v| v.2)))
            .or(global)
            .ok_or_else(|| Error::invalid("no diagnosed under-performing pair to match over-performers against"))?;
        p.factor = f;
    }
    Ok(())
}

/// Structural components of an as-expected pair, in the fixed tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Authorship,
    Burden,
    Recruitment,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub authorship: f64,
    pub burden: f64,
    pub recruitment: f64,
}

impl Components {
    fn get(&self, c: Component) -> f64 {
        match c {
            Component::Authorship => self.authorship,
            Component::Burden => self.burden,
            Component::Recruitment => self.recruitment,
        }
    }
}

/// Which factor each winning component maps to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComponentMapping {
    pub authorship: Factor,
    pub burden: Factor,
    pub recruitment: Factor,
}

impl Default for ComponentMapping {
    fn default() -> Self {
        ComponentMapping {
            authorship: Factor::ResearchInvestment,
            burden: Factor::Governance,
            recruitment: Factor::HealthInfrastructure,
        }
    }
}

impl ComponentMapping {
    fn factor(&self, c: Component) -> Factor {
        match c {
            Component::Authorship => self.authorship,
            Component::Burden => self.burden,
            Component::Recruitment => self.recruitment,
        }
    }
}

/// Gives as-expected pairs the factor of their largest normalized component.
///
/// Each component is divided by its maximum over the as-expected pairs. Ties
/// go to the first component in (authorship, burden, recruitment) order and
/// set `factor_tie`. A pair lacking components, or with all of them zero,
/// is an error.
pub fn assign_factor_as_expected(
    pairs: &mut [ClassifiedPair],
    components: &BTreeMap<(CountryCode, DiseaseCategory), Components>,
    mapping: &ComponentMapping,
) -> Result<()> {
    const ORDER: [Component; 3] = [Component::Authorship, Component::Burden, Component::Recruitment];
    let mut max = [0.0f64; 3];
    for p in pairs.iter().filter(|p| p.status == Status::AsExpected) {
        let c = components
            .get(&(p.country, p.disease))
            .ok_or_else(|| Error::invalid(format!("no components for {} / {}", p.country, p.disease)))?;
        for (m, k) in max.iter_mut().zip(ORDER) {
            let v = c.get(k);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("components must be finite and nonnegative"));
            }
            *m = m.max(v);
        }
    }
    for p in pairs.iter_mut().filter(|p| p.status == Status::AsExpected) {
        let c = components[&(p.country, p.disease)];
        let norm: Vec<f64> = ORDER.iter().zip(max).map(|(k, m)| if m > 0.0 { c.get(*k) / m } else { 0.0 }).collect();
        let best = norm.iter().copied().fold(0.0, f64::max);
        if best <= 0.0 {
            return Err(Error::invalid(format!("all components zero for {} / {}", p.country, p.disease)));
        }
        let winners: Vec<usize> = (0..3).filter(|&i| norm[i] == best).collect();
        p.factor = mapping.factor(ORDER[winners[0]]);
        p.factor_tie = winners.len() > 1;
    }
    Ok(())
}
