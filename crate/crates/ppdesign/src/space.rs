use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One attribute→level restriction inside a forbidden combination.
/// Attribute and level indices are 1-based, matching all external I/O.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeLevel {
    pub attribute: usize,
    pub level: usize,
}

/// A conjunction of attribute-level pairs that no profile may contain.
/// A profile is forbidden if it matches every pair of the combination.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbiddenCombination(pub Vec<AttributeLevel>);

impl ForbiddenCombination {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        ForbiddenCombination(
            pairs
                .into_iter()
                .map(|(attribute, level)| AttributeLevel { attribute, level })
                .collect(),
        )
    }

    /// `profile` holds 1-based levels indexed by 0-based attribute.
    pub fn matches(&self, profile: &[usize]) -> bool {
        self.0.iter().all(|al| profile[al.attribute - 1] == al.level)
    }
}

/// The shape of the experiment: S choice sets of J profiles over K attributes,
/// with F attributes held constant per set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub num_choice_sets: usize,
    pub profiles_per_set: usize,
    pub attribute_levels: Vec<usize>,
    pub num_constant_attributes: usize,
    #[serde(default)]
    pub forbidden_combinations: Vec<ForbiddenCombination>,
}

impl DesignSpace {
    pub fn new(
        num_choice_sets: usize,
        profiles_per_set: usize,
        attribute_levels: Vec<usize>,
        num_constant_attributes: usize,
        forbidden_combinations: Vec<ForbiddenCombination>,
    ) -> Result<Self> {
        let space = DesignSpace {
            num_choice_sets,
            profiles_per_set,
            attribute_levels,
            num_constant_attributes,
            forbidden_combinations,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_choice_sets == 0 {
            return Err(Error::InvalidInput("num_choice_sets must be positive".into()));
        }
        if self.profiles_per_set < 2 {
            return Err(Error::InvalidInput("profiles_per_set must be at least 2".into()));
        }
        if self.attribute_levels.is_empty() {
            return Err(Error::InvalidInput("at least one attribute is required".into()));
        }
        if self.attribute_levels.iter().any(|&d| d < 2) {
            return Err(Error::InvalidInput("every attribute needs at least 2 levels".into()));
        }
        if self.num_constant_attributes >= self.num_attributes() {
            return Err(Error::InvalidInput(format!(
                "num_constant_attributes ({}) must be smaller than the number of attributes ({})",
                self.num_constant_attributes,
                self.num_attributes()
            )));
        }
        for (ci, combo) in self.forbidden_combinations.iter().enumerate() {
            if combo.0.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "forbidden combination {} must involve at least two attributes",
                    ci + 1
                )));
            }
            for al in &combo.0 {
                if al.attribute == 0 || al.attribute > self.num_attributes() {
                    return Err(Error::InvalidInput(format!(
                        "forbidden combination {} references attribute {}, valid range is 1..={}",
                        ci + 1,
                        al.attribute,
                        self.num_attributes()
                    )));
                }
                let d = self.attribute_levels[al.attribute - 1];
                if al.level == 0 || al.level > d {
                    return Err(Error::InvalidInput(format!(
                        "forbidden combination {} references level {} of attribute {}, valid range is 1..={}",
                        ci + 1,
                        al.level,
                        al.attribute,
                        d
                    )));
                }
            }
        }
        Ok(())
    }

    /// K, the number of attributes.
    pub fn num_attributes(&self) -> usize {
        self.attribute_levels.len()
    }

    /// Profile strength t_v = K - F, the number of varying attributes per set.
    pub fn profile_strength(&self) -> usize {
        self.num_attributes() - self.num_constant_attributes
    }

    /// True if the 1-based level assignment matches any forbidden combination.
    pub fn profile_forbidden(&self, profile: &[usize]) -> bool {
        self.forbidden_combinations.iter().any(|c| c.matches(profile))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_many_constants() {
        let err = DesignSpace::new(4, 2, vec![2, 3], 2, vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rejects_bad_forbidden_reference() {
        let combo = ForbiddenCombination::new(vec![(1, 2), (3, 1)]);
        let err = DesignSpace::new(4, 2, vec![2, 3], 1, vec![combo]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        let combo = ForbiddenCombination::new(vec![(1, 2), (2, 4)]);
        let err = DesignSpace::new(4, 2, vec![2, 3], 1, vec![combo]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn forbidden_matching_is_a_conjunction() {
        let combo = ForbiddenCombination::new(vec![(1, 2), (2, 3)]);
        assert!(combo.matches(&[2, 3]));
        assert!(!combo.matches(&[2, 1]));
        assert!(!combo.matches(&[1, 3]));
    }
}
