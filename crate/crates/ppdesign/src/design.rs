use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::space::DesignSpace;

/// Resample cap per choice set before the space is declared infeasible.
pub const MAX_SET_RESAMPLES: usize = 10_000;

/// A partial profile design: an S×J×K array of 1-based level indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Design {
    num_sets: usize,
    profiles_per_set: usize,
    num_attributes: usize,
    levels: Vec<usize>,
}

impl Design {
    pub fn from_levels(
        num_sets: usize,
        profiles_per_set: usize,
        num_attributes: usize,
        levels: Vec<usize>,
    ) -> Result<Self> {
        if levels.len() != num_sets * profiles_per_set * num_attributes {
            return Err(Error::InvalidInput(format!(
                "expected {} level entries, got {}",
                num_sets * profiles_per_set * num_attributes,
                levels.len()
            )));
        }
        Ok(Design { num_sets, profiles_per_set, num_attributes, levels })
    }

    pub fn num_sets(&self) -> usize {
        self.num_sets
    }

    pub fn profiles_per_set(&self) -> usize {
        self.profiles_per_set
    }

    pub fn num_attributes(&self) -> usize {
        self.num_attributes
    }

    fn idx(&self, set: usize, profile: usize, attribute: usize) -> usize {
        (set * self.profiles_per_set + profile) * self.num_attributes + attribute
    }

    /// 1-based level of `attribute` (0-based) in `profile` of `set`.
    pub fn level(&self, set: usize, profile: usize, attribute: usize) -> usize {
        self.levels[self.idx(set, profile, attribute)]
    }

    pub fn set_level(&mut self, set: usize, profile: usize, attribute: usize, level: usize) {
        let i = self.idx(set, profile, attribute);
        self.levels[i] = level;
    }

    /// The K levels of one profile.
    pub fn profile(&self, set: usize, profile: usize) -> &[usize] {
        let start = self.idx(set, profile, 0);
        &self.levels[start..start + self.num_attributes]
    }

    /// All J profiles of one choice set, row-major.
    pub fn set_profiles(&self, set: usize) -> Vec<Vec<usize>> {
        (0..self.profiles_per_set).map(|j| self.profile(set, j).to_vec()).collect()
    }

    /// An attribute is constant in a set when all J profiles share its level.
    pub fn is_constant(&self, set: usize, attribute: usize) -> bool {
        let first = self.level(set, 0, attribute);
        (1..self.profiles_per_set).all(|j| self.level(set, j, attribute) == first)
    }

    /// 0-based indices of the constant attributes of a set.
    pub fn constant_attributes(&self, set: usize) -> Vec<usize> {
        (0..self.num_attributes).filter(|&i| self.is_constant(set, i)).collect()
    }

    /// 0-based indices of the varying attributes of a set.
    pub fn varying_attributes(&self, set: usize) -> Vec<usize> {
        (0..self.num_attributes).filter(|&i| !self.is_constant(set, i)).collect()
    }
}

/// One invariant violation found by [`validate_design`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    LevelOutOfRange { set: usize, profile: usize, attribute: usize, level: usize },
    ConstantCount { set: usize, found: usize, expected: usize },
    DuplicateProfiles { set: usize, profile_a: usize, profile_b: usize },
    ForbiddenCombination { set: usize, profile: usize, combination: usize },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every Design invariant against the space and reports all violations.
pub fn validate_design(design: &Design, space: &DesignSpace) -> ValidationReport {
    let mut report = ValidationReport::default();
    for s in 0..design.num_sets() {
        for j in 0..design.profiles_per_set() {
            for i in 0..design.num_attributes() {
                let level = design.level(s, j, i);
                if level == 0 || level > space.attribute_levels[i] {
                    report.violations.push(Violation::LevelOutOfRange {
                        set: s,
                        profile: j,
                        attribute: i,
                        level,
                    });
                }
            }
        }
        let found = design.constant_attributes(s).len();
        if found != space.num_constant_attributes {
            report.violations.push(Violation::ConstantCount {
                set: s,
                found,
                expected: space.num_constant_attributes,
            });
        }
        for a in 0..design.profiles_per_set() {
            for b in a + 1..design.profiles_per_set() {
                if design.profile(s, a) == design.profile(s, b) {
                    report.violations.push(Violation::DuplicateProfiles {
                        set: s,
                        profile_a: a,
                        profile_b: b,
                    });
                }
            }
        }
        for j in 0..design.profiles_per_set() {
            for (ci, combo) in space.forbidden_combinations.iter().enumerate() {
                if combo.matches(design.profile(s, j)) {
                    report.violations.push(Violation::ForbiddenCombination {
                        set: s,
                        profile: j,
                        combination: ci,
                    });
                }
            }
        }
    }
    report
}

fn sample_set<R: Rng>(
    space: &DesignSpace,
    constant: &[bool],
    rng: &mut R,
) -> Option<Vec<Vec<usize>>> {
    let j = space.profiles_per_set;
    let k = space.num_attributes();
    let mut profiles = vec![vec![0usize; k]; j];
    for i in 0..k {
        let d = space.attribute_levels[i];
        if constant[i] {
            let level = rng.gen_range(1..=d);
            for p in profiles.iter_mut() {
                p[i] = level;
            }
        } else {
            for p in profiles.iter_mut() {
                p[i] = rng.gen_range(1..=d);
            }
        }
    }
    // Varying attributes must actually vary, profiles must be distinct and allowed.
    for (i, &c) in constant.iter().enumerate() {
        if !c && (1..j).all(|p| profiles[p][i] == profiles[0][i]) {
            return None;
        }
    }
    for a in 0..j {
        if space.profile_forbidden(&profiles[a]) {
            return None;
        }
        for b in a + 1..j {
            if profiles[a] == profiles[b] {
                return None;
            }
        }
    }
    Some(profiles)
}

/// Draws one valid choice set, resampling until all invariants hold.
pub fn random_set<R: Rng>(
    space: &DesignSpace,
    fixed_constant: Option<&[bool]>,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let k = space.num_attributes();
    for _ in 0..MAX_SET_RESAMPLES {
        let constant: Vec<bool> = match fixed_constant {
            Some(pattern) => pattern.to_vec(),
            None => {
                let mut idx: Vec<usize> = (0..k).collect();
                for pos in 0..space.num_constant_attributes {
                    let pick = rng.gen_range(pos..k);
                    idx.swap(pos, pick);
                }
                let mut pattern = vec![false; k];
                for &i in &idx[..space.num_constant_attributes] {
                    pattern[i] = true;
                }
                pattern
            }
        };
        if let Some(profiles) = sample_set(space, &constant, rng) {
            return Ok(profiles);
        }
    }
    Err(Error::Infeasible(format!(
        "no valid choice set found after {} resamples",
        MAX_SET_RESAMPLES
    )))
}

fn build_random(
    space: &DesignSpace,
    patterns: Option<&[Vec<bool>]>,
    rng: &mut ChaCha8Rng,
) -> Result<Design> {
    let mut levels = Vec::with_capacity(
        space.num_choice_sets * space.profiles_per_set * space.num_attributes(),
    );
    for s in 0..space.num_choice_sets {
        let fixed = patterns.map(|p| p[s].as_slice());
        let profiles = random_set(space, fixed, rng)?;
        for p in profiles {
            levels.extend(p);
        }
    }
    Design::from_levels(space.num_choice_sets, space.profiles_per_set, space.num_attributes(), levels)
}

/// Uniform random valid partial profile design; deterministic given the seed.
pub fn random_design(space: &DesignSpace, seed: u64) -> Result<Design> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_random(space, None, &mut rng)
}

/// Random design whose per-set constant pattern is fixed (true = constant).
pub fn random_design_with_pattern(
    space: &DesignSpace,
    patterns: &[Vec<bool>],
    seed: u64,
) -> Result<Design> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build_random(space, Some(patterns), &mut rng)
}

/// Combined serialization: levels plus the constant-attribute marking per set.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DesignDocument {
    pub num_choice_sets: usize,
    pub profiles_per_set: usize,
    pub attribute_levels: Vec<usize>,
    /// levels[s][j][i], 1-based.
    pub levels: Vec<Vec<Vec<usize>>>,
    /// 1-based constant attribute indices per choice set.
    pub constant_attributes: Vec<Vec<usize>>,
}

impl DesignDocument {
    pub fn from_design(design: &Design, space: &DesignSpace) -> Self {
        DesignDocument {
            num_choice_sets: design.num_sets(),
            profiles_per_set: design.profiles_per_set(),
            attribute_levels: space.attribute_levels.clone(),
            levels: (0..design.num_sets()).map(|s| design.set_profiles(s)).collect(),
            constant_attributes: (0..design.num_sets())
                .map(|s| design.constant_attributes(s).iter().map(|i| i + 1).collect())
                .collect(),
        }
    }

    pub fn to_design(&self) -> Result<Design> {
        let mut flat = Vec::new();
        for set in &self.levels {
            for profile in set {
                flat.extend_from_slice(profile);
            }
        }
        Design::from_levels(
            self.num_choice_sets,
            self.profiles_per_set,
            self.attribute_levels.len(),
            flat,
        )
    }
}

/// CSV with columns (choice_set, profile, attr_1..attr_K), all 1-based.
pub fn design_to_csv(design: &Design) -> String {
    let mut out = String::from("choice_set,profile");
    for i in 1..=design.num_attributes() {
        let _ = write!(out, ",attr_{i}");
    }
    out.push('\n');
    for s in 0..design.num_sets() {
        for j in 0..design.profiles_per_set() {
            let _ = write!(out, "{},{}", s + 1, j + 1);
            for i in 0..design.num_attributes() {
                let _ = write!(out, ",{}", design.level(s, j, i));
            }
            out.push('\n');
        }
    }
    out
}

pub fn design_from_csv(text: &str) -> Result<Design> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "choice_set" || &headers[1] != "profile" {
        return Err(Error::InvalidInput("design CSV must start with choice_set,profile".into()));
    }
    let k = headers.len() - 2;
    let mut rows: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad integer in design CSV: {s:?}")))
        };
        let set = parse(&record[0])?;
        let profile = parse(&record[1])?;
        let levels = (0..k).map(|i| parse(&record[2 + i])).collect::<Result<Vec<_>>>()?;
        rows.push((set, profile, levels));
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("design CSV has no rows".into()));
    }
    let num_sets = rows.iter().map(|r| r.0).max().unwrap();
    let profiles = rows.iter().map(|r| r.1).max().unwrap();
    if rows.len() != num_sets * profiles {
        return Err(Error::InvalidInput("design CSV rows do not form a full S×J grid".into()));
    }
    let mut flat = vec![0usize; num_sets * profiles * k];
    for (set, profile, levels) in rows {
        let base = ((set - 1) * profiles + (profile - 1)) * k;
        flat[base..base + k].copy_from_slice(&levels);
    }
    Design::from_levels(num_sets, profiles, k, flat)
}

/// Sidecar JSON body with the 1-based constant attributes of each set.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConstantSidecar {
    pub constant_attributes: Vec<Vec<usize>>,
}

impl ConstantSidecar {
    pub fn from_design(design: &Design) -> Self {
        ConstantSidecar {
            constant_attributes: (0..design.num_sets())
                .map(|s| design.constant_attributes(s).iter().map(|i| i + 1).collect())
                .collect(),
        }
    }
}
