use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::space::DesignSpace;

/// Effects-type coding of a 1-based level into d-1 columns. The first d-1
/// levels map to unit indicators, the last level to the all-minus-one vector,
/// so the columns over all levels of an attribute sum to zero.
pub fn effects_code(level: usize, num_levels: usize) -> Result<Vec<f64>> {
    if num_levels < 2 {
        return Err(Error::InvalidInput(format!("num_levels must be >= 2, got {num_levels}")));
    }
    if level == 0 || level > num_levels {
        return Err(Error::InvalidInput(format!(
            "level {level} out of range 1..={num_levels}"
        )));
    }
    let mut code = vec![0.0; num_levels - 1];
    if level == num_levels {
        code.fill(-1.0);
    } else {
        code[level - 1] = 1.0;
    }
    Ok(code)
}

/// Which effects enter the model matrix: always all main effects, plus the
/// listed unordered two-way interactions (0-based attribute indices).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    interactions: Vec<(usize, usize)>,
}

impl ModelSpec {
    pub fn main_effects() -> Self {
        ModelSpec { interactions: Vec::new() }
    }

    pub fn with_interactions(pairs: Vec<(usize, usize)>, space: &DesignSpace) -> Result<Self> {
        let k = space.num_attributes();
        let mut normalized = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            if a >= k || b >= k {
                return Err(Error::InvalidInput(format!(
                    "interaction ({a}, {b}) references an attribute out of range 0..{k}"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-interaction ({a}, {a})")));
            }
            let pair = (a.min(b), a.max(b));
            if normalized.contains(&pair) {
                return Err(Error::InvalidInput(format!("duplicate interaction {pair:?}")));
            }
            normalized.push(pair);
        }
        Ok(ModelSpec { interactions: normalized })
    }

    pub fn interactions(&self) -> &[(usize, usize)] {
        &self.interactions
    }

    /// m = Σ (d_i - 1) + Σ (d_a - 1)(d_b - 1).
    pub fn num_params(&self, space: &DesignSpace) -> usize {
        let main: usize = space.attribute_levels.iter().map(|d| d - 1).sum();
        let int: usize = self
            .interactions
            .iter()
            .map(|&(a, b)| (space.attribute_levels[a] - 1) * (space.attribute_levels[b] - 1))
            .sum();
        main + int
    }

    /// 0-based attributes interacting with `attribute` under this model.
    pub fn partners(&self, attribute: usize) -> Vec<usize> {
        self.interactions
            .iter()
            .filter_map(|&(a, b)| {
                if a == attribute {
                    Some(b)
                } else if b == attribute {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn involves(&self, attribute: usize) -> bool {
        self.interactions.iter().any(|&(a, b)| a == attribute || b == attribute)
    }
}

/// Precomputed column layout for fast row construction.
///
/// Column order: main-effect blocks by attribute index (levels ascending
/// within each block), then interaction blocks in declared pair order, each
/// laid out row-major over the two coded blocks.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub attribute_levels: Vec<usize>,
    pub main_offsets: Vec<usize>,
    pub interactions: Vec<(usize, usize)>,
    pub interaction_offsets: Vec<usize>,
    pub num_params: usize,
}

impl CompiledModel {
    pub fn new(model: &ModelSpec, space: &DesignSpace) -> Self {
        let mut main_offsets = Vec::with_capacity(space.num_attributes());
        let mut offset = 0;
        for &d in &space.attribute_levels {
            main_offsets.push(offset);
            offset += d - 1;
        }
        let mut interaction_offsets = Vec::with_capacity(model.interactions.len());
        for &(a, b) in &model.interactions {
            interaction_offsets.push(offset);
            offset += (space.attribute_levels[a] - 1) * (space.attribute_levels[b] - 1);
        }
        CompiledModel {
            attribute_levels: space.attribute_levels.clone(),
            main_offsets,
            interactions: model.interactions.clone(),
            interaction_offsets,
            num_params: offset,
        }
    }

    /// Writes the coded row for one profile into `row` (length num_params).
    pub fn write_row(&self, profile: &[usize], row: &mut [f64]) {
        row.fill(0.0);
        for (i, (&level, &d)) in profile.iter().zip(&self.attribute_levels).enumerate() {
            let o = self.main_offsets[i];
            if level == d {
                row[o..o + d - 1].fill(-1.0);
            } else {
                row[o + level - 1] = 1.0;
            }
        }
        for (idx, &(a, b)) in self.interactions.iter().enumerate() {
            let da = self.attribute_levels[a] - 1;
            let db = self.attribute_levels[b] - 1;
            let oa = self.main_offsets[a];
            let ob = self.main_offsets[b];
            let mut o = self.interaction_offsets[idx];
            for p in 0..da {
                for q in 0..db {
                    row[o] = row[oa + p] * row[ob + q];
                    o += 1;
                }
            }
        }
    }

    pub fn row(&self, profile: &[usize]) -> Vec<f64> {
        let mut row = vec![0.0; self.num_params];
        self.write_row(profile, &mut row);
        row
    }

    /// J×m coded matrix for one choice set.
    pub fn set_matrix(&self, profiles: &[Vec<usize>]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(profiles.len(), self.num_params);
        let mut row = vec![0.0; self.num_params];
        for (j, p) in profiles.iter().enumerate() {
            self.write_row(p, &mut row);
            for (c, &v) in row.iter().enumerate() {
                x[(j, c)] = v;
            }
        }
        x
    }
}

/// Full (S·J)×m model matrix for a design.
pub fn model_matrix(design: &Design, model: &ModelSpec, space: &DesignSpace) -> DMatrix<f64> {
    let compiled = CompiledModel::new(model, space);
    let rows = design.num_sets() * design.profiles_per_set();
    let mut x = DMatrix::zeros(rows, compiled.num_params);
    let mut row = vec![0.0; compiled.num_params];
    for s in 0..design.num_sets() {
        for j in 0..design.profiles_per_set() {
            compiled.write_row(design.profile(s, j), &mut row);
            let r = s * design.profiles_per_set() + j;
            for (c, &v) in row.iter().enumerate() {
                x[(r, c)] = v;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::random_design;

    #[test]
    fn effects_code_examples() {
        assert_eq!(effects_code(1, 2).unwrap(), vec![1.0]);
        assert_eq!(effects_code(2, 2).unwrap(), vec![-1.0]);
        assert_eq!(effects_code(2, 3).unwrap(), vec![0.0, 1.0]);
        assert_eq!(effects_code(3, 3).unwrap(), vec![-1.0, -1.0]);
        assert!(effects_code(4, 3).is_err());
        assert!(effects_code(0, 3).is_err());
    }

    #[test]
    fn effects_code_columns_sum_to_zero() {
        for d in 2..=6 {
            let mut sums = vec![0.0; d - 1];
            for level in 1..=d {
                for (s, v) in sums.iter_mut().zip(effects_code(level, d).unwrap()) {
                    *s += v;
                }
            }
            assert!(sums.iter().all(|&s| s == 0.0), "d={d}");
        }
    }

    #[test]
    fn model_matrix_row_examples() {
        let space = DesignSpace::new(1, 2, vec![2, 3], 0, vec![]).unwrap();
        let main = ModelSpec::main_effects();
        let compiled = CompiledModel::new(&main, &space);
        assert_eq!(compiled.row(&[1, 1]), vec![1.0, 1.0, 0.0]);

        let int = ModelSpec::with_interactions(vec![(0, 1)], &space).unwrap();
        let compiled = CompiledModel::new(&int, &space);
        assert_eq!(compiled.row(&[1, 1]), vec![1.0, 1.0, 0.0, 1.0, 0.0]);
        // 2-level at last level crossed with 3-level at last level
        assert_eq!(compiled.row(&[2, 3]), vec![-1.0, -1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn num_params_matches_matrix_width() {
        let space = DesignSpace::new(8, 2, vec![2, 2, 2, 3, 3, 3], 1, vec![]).unwrap();
        let model =
            ModelSpec::with_interactions(vec![(0, 1), (0, 3)], &space).unwrap();
        assert_eq!(model.num_params(&space), 9 + 1 + 2);
        let d = random_design(&space, 5).unwrap();
        let x = model_matrix(&d, &model, &space);
        assert_eq!(x.ncols(), 12);
        assert_eq!(x.nrows(), 16);
    }

    #[test]
    fn duplicate_and_self_pairs_rejected() {
        let space = DesignSpace::new(4, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        assert!(ModelSpec::with_interactions(vec![(0, 0)], &space).is_err());
        assert!(ModelSpec::with_interactions(vec![(0, 1), (1, 0)], &space).is_err());
    }
}
