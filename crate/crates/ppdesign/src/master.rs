use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::logdet_psd;
use crate::space::DesignSpace;

/// Stage-one master design: entry (s, i) is true iff attribute i varies in
/// choice set s. Every row has exactly t_v true entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MasterDesign {
    pub incidence: Vec<Vec<bool>>,
}

impl MasterDesign {
    pub fn num_sets(&self) -> usize {
        self.incidence.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.incidence.first().map_or(0, |r| r.len())
    }

    pub fn varies(&self, set: usize, attribute: usize) -> bool {
        self.incidence[set][attribute]
    }

    /// Constant pattern per set (true = constant), the complement of the
    /// incidence; this is what stage two must preserve.
    pub fn constant_patterns(&self) -> Vec<Vec<bool>> {
        self.incidence.iter().map(|row| row.iter().map(|&v| !v).collect()).collect()
    }

    /// Number of sets in which each attribute is held constant.
    pub fn constant_counts(&self) -> Vec<usize> {
        let k = self.num_attributes();
        (0..k).map(|i| self.incidence.iter().filter(|row| !row[i]).count()).collect()
    }
}

/// Block matrix [[QᵀQ, QᵀZ], [ZᵀQ, ZᵀZ]] of the two-way ANOVA surrogate
/// model, built from the incidence. Q rows are unit treatment indicators for
/// each (set, varying attribute) pair; Z codes blocks 1..S-1 with the last
/// block as reference.
pub fn anova_information(master: &MasterDesign) -> DMatrix<f64> {
    let s = master.num_sets();
    let t = master.num_attributes();
    let dim = t + s - 1;
    let mut m = DMatrix::zeros(dim, dim);
    for (block, row) in master.incidence.iter().enumerate() {
        for (i, &varies) in row.iter().enumerate() {
            if !varies {
                continue;
            }
            m[(i, i)] += 1.0;
            if block < s - 1 {
                m[(i, t + block)] += 1.0;
                m[(t + block, i)] += 1.0;
                m[(t + block, t + block)] += 1.0;
            }
        }
    }
    m
}

/// Var(α̂_i) up to σ²: diagonal of {Qᵀ(I - Z(ZᵀZ)⁻¹Zᵀ)Q}⁻¹.
pub fn treatment_variances(master: &MasterDesign) -> Result<Vec<f64>> {
    let s = master.num_sets();
    let t = master.num_attributes();
    let t_v = master.incidence[0].iter().filter(|&&v| v).count() as f64;
    // QᵀQ - QᵀZ (ZᵀZ)⁻¹ ZᵀQ with ZᵀZ = t_v·I
    let mut a = DMatrix::zeros(t, t);
    for (block, row) in master.incidence.iter().enumerate() {
        for i in 0..t {
            if row[i] {
                a[(i, i)] += 1.0;
            }
        }
        if block < s - 1 {
            for i in 0..t {
                for j in 0..t {
                    if row[i] && row[j] {
                        a[(i, j)] -= 1.0 / t_v;
                    }
                }
            }
        }
    }
    let inv = a
        .clone()
        .try_inverse()
        .filter(|_| logdet_psd(&a).is_some())
        .ok_or_else(|| Error::SingularMaster("some attribute is inestimable given blocks".into()))?;
    Ok((0..t).map(|i| inv[(i, i)]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightScheme {
    I,
    II,
}

/// Variance balance weights: scheme I is the part-worth share
/// (d_i - 1)/Σ(d_j - 1); scheme II is (d_i - 1)²/(2 d_i).
pub fn variance_balance_weights(levels: &[usize], scheme: WeightScheme) -> Vec<f64> {
    match scheme {
        WeightScheme::I => {
            let total: usize = levels.iter().map(|d| d - 1).sum();
            levels.iter().map(|&d| (d - 1) as f64 / total as f64).collect()
        }
        WeightScheme::II => levels
            .iter()
            .map(|&d| {
                let dm1 = (d - 1) as f64;
                dm1 * dm1 / (2.0 * d as f64)
            })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterObjective {
    DOptimal,
    AWeighted(WeightScheme),
}

/// Score to maximize; None for singular masters.
pub fn master_score(
    master: &MasterDesign,
    objective: MasterObjective,
    levels: &[usize],
) -> Option<f64> {
    match objective {
        MasterObjective::DOptimal => logdet_psd(&anova_information(master)),
        MasterObjective::AWeighted(scheme) => {
            let weights = variance_balance_weights(levels, scheme);
            let vars = treatment_variances(master).ok()?;
            Some(-weights.iter().zip(&vars).map(|(w, v)| w * v).sum::<f64>())
        }
    }
}

fn random_incidence<R: Rng>(s: usize, k: usize, t_v: usize, rng: &mut R) -> Vec<Vec<bool>> {
    (0..s)
        .map(|_| {
            let mut idx: Vec<usize> = (0..k).collect();
            for pos in 0..t_v {
                let pick = rng.gen_range(pos..k);
                idx.swap(pos, pick);
            }
            let mut row = vec![false; k];
            for &i in &idx[..t_v] {
                row[i] = true;
            }
            row
        })
        .collect()
}

fn hill_climb(
    mut master: MasterDesign,
    objective: MasterObjective,
    levels: &[usize],
) -> (MasterDesign, f64) {
    let mut score = master_score(&master, objective, levels).unwrap_or(f64::NEG_INFINITY);
    loop {
        let mut improved = false;
        for s in 0..master.num_sets() {
            for a in 0..master.num_attributes() {
                if !master.incidence[s][a] {
                    continue;
                }
                for b in 0..master.num_attributes() {
                    if master.incidence[s][b] {
                        continue;
                    }
                    master.incidence[s][a] = false;
                    master.incidence[s][b] = true;
                    let candidate =
                        master_score(&master, objective, levels).unwrap_or(f64::NEG_INFINITY);
                    if candidate > score {
                        score = candidate;
                        improved = true;
                        break; // a was swapped away; move on to the next position
                    }
                    master.incidence[s][a] = true;
                    master.incidence[s][b] = false;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (master, score)
}

/// Multi-start first-improvement swap search over master designs.
/// Deterministic given the seed; ties break toward the earlier restart.
pub fn optimize_master(
    space: &DesignSpace,
    objective: MasterObjective,
    seed: u64,
    restarts: usize,
) -> Result<MasterDesign> {
    let s = space.num_choice_sets;
    let k = space.num_attributes();
    let t_v = space.profile_strength();
    if space.num_constant_attributes == 0 {
        return Ok(MasterDesign { incidence: vec![vec![true; k]; s] });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, MasterDesign)> = None;
    for _ in 0..restarts.max(1) {
        let start = MasterDesign { incidence: random_incidence(s, k, t_v, &mut rng) };
        let (candidate, score) = hill_climb(start, objective, &space.attribute_levels);
        if score > f64::NEG_INFINITY && best.as_ref().map_or(true, |(b, _)| score > *b) {
            best = Some((score, candidate));
        }
    }
    best.map(|(_, m)| m).ok_or(Error::InfeasibleMaster)
}

/// CSV of the S×K incidence (1 = varying) with an attribute header row.
pub fn master_to_csv(master: &MasterDesign) -> String {
    let mut out = String::new();
    let k = master.num_attributes();
    for i in 1..=k {
        if i > 1 {
            out.push(',');
        }
        let _ = write!(out, "attr_{i}");
    }
    out.push('\n');
    for row in &master.incidence {
        for (i, &v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push(if v { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn master(rows: &[&[u8]]) -> MasterDesign {
        MasterDesign {
            incidence: rows.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect(),
        }
    }

    #[test]
    fn anova_information_replication_counts() {
        let m = master(&[&[1, 1, 0], &[0, 1, 1]]);
        let info = anova_information(&m);
        assert_eq!(info.nrows(), 3 + 1);
        assert_relative_eq!(info[(0, 0)], 1.0);
        assert_relative_eq!(info[(1, 1)], 2.0);
        assert_relative_eq!(info[(2, 2)], 1.0);
        // block 0 holds t_v = 2 rows
        assert_relative_eq!(info[(3, 3)], 2.0);
    }

    #[test]
    fn never_varying_attribute_gives_zero_diagonal() {
        let m = master(&[&[1, 1, 0], &[1, 1, 0]]);
        let info = anova_information(&m);
        assert_relative_eq!(info[(2, 2)], 0.0);
        assert!(treatment_variances(&m).is_err());
    }

    #[test]
    fn symmetric_attributes_get_equal_variances() {
        // attributes 0 and 1 play interchangeable roles (each constant once,
        // both varying in the last block)
        let m = master(&[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        let vars = treatment_variances(&m).unwrap();
        assert_relative_eq!(vars[0], vars[1], epsilon = 1e-12);
    }

    #[test]
    fn variances_match_explicit_projection() {
        // oracle: build Q and Z densely and evaluate
        // {Qᵀ(I - Z(ZᵀZ)⁻¹Zᵀ)Q}⁻¹ directly
        let m = master(&[
            &[1, 1, 0, 1],
            &[0, 1, 1, 1],
            &[1, 0, 1, 1],
            &[1, 1, 1, 0],
            &[0, 1, 1, 1],
        ]);
        let (s, t, t_v) = (5, 4, 3);
        let r = s * t_v;
        let mut q = DMatrix::zeros(r, t);
        let mut z = DMatrix::zeros(r, s - 1);
        let mut row = 0;
        for (block, inc) in m.incidence.iter().enumerate() {
            for (i, &varies) in inc.iter().enumerate() {
                if varies {
                    q[(row, i)] = 1.0;
                    if block < s - 1 {
                        z[(row, block)] = 1.0;
                    }
                    row += 1;
                }
            }
        }
        let proj = DMatrix::identity(r, r)
            - &z * (z.transpose() * &z).try_inverse().unwrap() * z.transpose();
        let expected = (q.transpose() * proj * &q).try_inverse().unwrap();
        let vars = treatment_variances(&m).unwrap();
        for i in 0..t {
            assert_relative_eq!(vars[i], expected[(i, i)], epsilon = 1e-10);
        }
    }

    #[test]
    fn weight_scheme_examples() {
        let w = variance_balance_weights(&[2, 2, 2, 3, 3, 3], WeightScheme::I);
        let expect = [1.0 / 9.0, 1.0 / 9.0, 1.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0];
        for (a, b) in w.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let w = variance_balance_weights(&[2, 3], WeightScheme::II);
        assert_relative_eq!(w[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(w[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_levels_scheme_one_is_uniform() {
        let w = variance_balance_weights(&[3, 3, 3], WeightScheme::I);
        for v in w {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn small_d_optimal_master_is_balanced() {
        let space = DesignSpace::new(3, 2, vec![2, 2, 2], 1, vec![]).unwrap();
        let m = optimize_master(&space, MasterObjective::DOptimal, 1, 30).unwrap();
        let counts = m.constant_counts();
        assert_eq!(counts, vec![1, 1, 1], "incidence {:?}", m.incidence);
    }

    #[test]
    fn optimum_beats_random_masters() {
        let space = DesignSpace::new(8, 2, vec![2, 2, 3, 3], 1, vec![]).unwrap();
        let objective = MasterObjective::AWeighted(WeightScheme::II);
        let best = optimize_master(&space, objective, 3, 20).unwrap();
        let best_score = master_score(&best, objective, &space.attribute_levels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let m = MasterDesign { incidence: random_incidence(8, 4, 3, &mut rng) };
            if let Some(score) = master_score(&m, objective, &space.attribute_levels) {
                assert!(best_score >= score - 1e-10);
            }
        }
    }

    #[test]
    fn scheme_two_keeps_three_level_attributes_varying() {
        let space = DesignSpace::new(24, 2, vec![2, 2, 2, 3, 3, 3], 1, vec![]).unwrap();
        let m = optimize_master(&space, MasterObjective::AWeighted(WeightScheme::II), 5, 50)
            .unwrap();
        let counts = m.constant_counts();
        let max3 = counts[3..].iter().max().unwrap();
        let min2 = counts[..3].iter().min().unwrap();
        assert!(max3 < min2 || *max3 == 0, "constant counts {counts:?}");
    }

    #[test]
    fn f_zero_is_all_varying() {
        let space = DesignSpace::new(4, 2, vec![2, 3], 0, vec![]).unwrap();
        let m = optimize_master(&space, MasterObjective::DOptimal, 0, 5).unwrap();
        assert!(m.incidence.iter().all(|row| row.iter().all(|&v| v)));
    }
}
