use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg::logdet_psd;
use crate::model::{CompiledModel, ModelSpec};
use crate::prior::PriorDraws;
use crate::space::DesignSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Main,
    Interaction,
    Robust,
}

/// A criterion evaluation on the log-determinant scale; -inf encodes a
/// singular information matrix for at least one prior draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriterionValue {
    pub value: f64,
    pub num_draws: usize,
    pub model_tag: ModelTag,
}

/// MNL choice probabilities for one coded choice set, computed with
/// max-subtraction so large utilities cannot overflow.
pub fn mnl_probabilities(coded_set: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let utilities = coded_set * beta;
    softmax(utilities.as_slice())
}

fn softmax(utilities: &[f64]) -> DVector<f64> {
    let max = utilities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = DVector::from_iterator(utilities.len(), utilities.iter().map(|u| (u - max).exp()));
    let total: f64 = p.iter().sum();
    p /= total;
    p
}

/// Information contribution of one choice set: Xᵀ(P - ppᵀ)X, expanded as
/// Σ p_j x_j x_jᵀ - x̄ x̄ᵀ with x̄ = Σ p_j x_j.
pub fn set_information(coded_set: &DMatrix<f64>, beta: &DVector<f64>) -> DMatrix<f64> {
    let p = mnl_probabilities(coded_set, beta);
    let m = coded_set.ncols();
    let mut info = DMatrix::zeros(m, m);
    let mut mean = DVector::zeros(m);
    for j in 0..coded_set.nrows() {
        let x = coded_set.row(j).transpose();
        info.ger(p[j], &x, &x, 1.0);
        mean.axpy(p[j], &x, 1.0);
    }
    info.ger(-1.0, &mean, &mean, 1.0);
    info
}

/// M(X, β) = Σ_s Xₛᵀ(Pₛ - pₛpₛᵀ)Xₛ.
pub fn information_matrix(
    design: &Design,
    model: &ModelSpec,
    space: &DesignSpace,
    beta: &DVector<f64>,
) -> DMatrix<f64> {
    let compiled = CompiledModel::new(model, space);
    let m = compiled.num_params;
    let mut info = DMatrix::zeros(m, m);
    for s in 0..design.num_sets() {
        let x = compiled.set_matrix(&design.set_profiles(s));
        info += set_information(&x, beta);
    }
    info
}

/// D criterion log|M|; -inf when M is singular.
pub fn d_criterion(
    design: &Design,
    model: &ModelSpec,
    space: &DesignSpace,
    beta: &DVector<f64>,
) -> f64 {
    let info = information_matrix(design, model, space, beta);
    logdet_psd(&info).unwrap_or(f64::NEG_INFINITY)
}

/// Bayesian D_B criterion: arithmetic mean of log|M| over the frozen draws,
/// accumulated in draw order so results are schedule-independent.
pub fn db_criterion(
    design: &Design,
    model: &ModelSpec,
    space: &DesignSpace,
    draws: &PriorDraws,
    tag: ModelTag,
) -> CriterionValue {
    let mut acc = 0.0;
    for beta in &draws.draws {
        let d = d_criterion(design, model, space, beta);
        if d == f64::NEG_INFINITY {
            return CriterionValue { value: f64::NEG_INFINITY, num_draws: draws.num_draws(), model_tag: tag };
        }
        acc += d;
    }
    CriterionValue {
        value: acc / draws.num_draws() as f64,
        num_draws: draws.num_draws(),
        model_tag: tag,
    }
}

/// Relative D_B-efficiency of design X against reference X*.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Efficiency {
    pub value: f64,
    pub db_x: f64,
    pub db_ref: f64,
    pub m: usize,
    /// Set when either D_B was -inf and the value collapsed to 0 or +inf.
    pub degenerate: bool,
}

/// exp((D_B(X) - D_B(X*)) / m) on shared draws (common random numbers).
pub fn relative_db_efficiency(
    design_x: &Design,
    design_ref: &Design,
    model: &ModelSpec,
    space: &DesignSpace,
    draws: &PriorDraws,
) -> Efficiency {
    let m = model.num_params(space);
    let db_x = db_criterion(design_x, model, space, draws, ModelTag::Main).value;
    let db_ref = db_criterion(design_ref, model, space, draws, ModelTag::Main).value;
    let degenerate = db_x == f64::NEG_INFINITY || db_ref == f64::NEG_INFINITY;
    let value = if db_x == f64::NEG_INFINITY && db_ref == f64::NEG_INFINITY {
        f64::NAN
    } else {
        ((db_x - db_ref) / m as f64).exp()
    };
    Efficiency { value, db_x, db_ref, m, degenerate }
}

/// One model entering a (possibly composite) criterion, with its own frozen
/// draws and a weight applied to its D_B value.
#[derive(Clone, Debug)]
pub struct CriterionPart {
    pub model: ModelSpec,
    pub draws: PriorDraws,
    pub weight: f64,
}

/// The optimization objective: a weighted sum of Bayesian D_B criteria.
#[derive(Clone, Debug)]
pub struct CriterionSpec {
    pub tag: ModelTag,
    pub parts: Vec<CriterionPart>,
}

impl CriterionSpec {
    pub fn single(tag: ModelTag, model: ModelSpec, draws: PriorDraws) -> Self {
        CriterionSpec { tag, parts: vec![CriterionPart { model, draws, weight: 1.0 }] }
    }

    /// Composite criterion D_main/m_main + D_int/m_int with optional extra
    /// weights (default 1, 1). The main model's parameters must be a prefix
    /// of the interaction model's parameters under the documented column
    /// order.
    pub fn robust(
        main_model: ModelSpec,
        main_draws: PriorDraws,
        int_model: ModelSpec,
        int_draws: PriorDraws,
        space: &DesignSpace,
        weights: (f64, f64),
    ) -> Result<Self> {
        let prefix = int_model.interactions().starts_with(main_model.interactions());
        if !prefix {
            return Err(Error::InvalidInput(
                "main model parameters must be a prefix of the interaction model's".into(),
            ));
        }
        let m_main = main_model.num_params(space) as f64;
        let m_int = int_model.num_params(space) as f64;
        Ok(CriterionSpec {
            tag: ModelTag::Robust,
            parts: vec![
                CriterionPart { model: main_model, draws: main_draws, weight: weights.0 / m_main },
                CriterionPart { model: int_model, draws: int_draws, weight: weights.1 / m_int },
            ],
        })
    }

    /// Full (non-incremental) criterion value.
    pub fn value(&self, design: &Design, space: &DesignSpace) -> f64 {
        let mut acc = 0.0;
        for part in &self.parts {
            let db = db_criterion(design, &part.model, space, &part.draws, self.tag).value;
            if db == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            acc += part.weight * db;
        }
        acc
    }

    /// Per-part D_B values (unweighted), for reporting.
    pub fn part_values(&self, design: &Design, space: &DesignSpace) -> Vec<f64> {
        self.parts
            .iter()
            .map(|p| db_criterion(design, &p.model, space, &p.draws, self.tag).value)
            .collect()
    }

    /// Attribute pairs interacting in any part, for the exploration rule's
    /// independence check.
    pub fn interaction_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for part in &self.parts {
            for &p in part.model.interactions() {
                if !pairs.contains(&p) {
                    pairs.push(p);
                }
            }
        }
        pairs
    }

    pub fn evaluator(&self, design: &Design, space: &DesignSpace) -> CriterionEvaluator {
        CriterionEvaluator::new(self, design, space)
    }
}

struct PendingUpdate {
    set: usize,
    contribs: Vec<DMatrix<f64>>,
    totals: Vec<DMatrix<f64>>,
    db: f64,
}

struct PartState {
    compiled: CompiledModel,
    draws: Vec<DVector<f64>>,
    weight: f64,
    /// per_set[s][d]: information contribution of set s under draw d.
    per_set: Vec<Vec<DMatrix<f64>>>,
    /// totals[d]: full information matrix under draw d.
    totals: Vec<DMatrix<f64>>,
    db: f64,
    pending: Option<PendingUpdate>,
}

impl PartState {
    fn new(part: &CriterionPart, design: &Design, space: &DesignSpace) -> Self {
        let compiled = CompiledModel::new(&part.model, space);
        let m = compiled.num_params;
        let draws: Vec<DVector<f64>> = part.draws.draws.clone();
        let mut per_set = Vec::with_capacity(design.num_sets());
        let mut totals = vec![DMatrix::zeros(m, m); draws.len()];
        for s in 0..design.num_sets() {
            let x = compiled.set_matrix(&design.set_profiles(s));
            let mut row = Vec::with_capacity(draws.len());
            for (d, beta) in draws.iter().enumerate() {
                let c = set_information(&x, beta);
                totals[d] += &c;
                row.push(c);
            }
            per_set.push(row);
        }
        let db = mean_logdet(&totals);
        PartState { compiled, draws, weight: part.weight, per_set, totals, db, pending: None }
    }

    fn propose(&mut self, set: usize, profiles: &[Vec<usize>]) -> f64 {
        let x = self.compiled.set_matrix(profiles);
        let mut contribs = Vec::with_capacity(self.draws.len());
        let mut totals = Vec::with_capacity(self.draws.len());
        for (d, beta) in self.draws.iter().enumerate() {
            let c = set_information(&x, beta);
            let mut t = self.totals[d].clone();
            t -= &self.per_set[set][d];
            t += &c;
            contribs.push(c);
            totals.push(t);
        }
        let db = mean_logdet(&totals);
        self.pending = Some(PendingUpdate { set, contribs, totals, db });
        db
    }

    fn commit(&mut self) {
        if let Some(p) = self.pending.take() {
            self.per_set[p.set] = p.contribs;
            self.totals = p.totals;
            self.db = p.db;
        }
    }

    fn discard(&mut self) {
        self.pending = None;
    }
}

fn mean_logdet(totals: &[DMatrix<f64>]) -> f64 {
    let mut acc = 0.0;
    for t in totals {
        match logdet_psd(t) {
            Some(v) => acc += v,
            None => return f64::NEG_INFINITY,
        }
    }
    acc / totals.len() as f64
}

/// Incremental criterion evaluation keyed on choice sets: a move that
/// touches one set re-evaluates only that set's contribution per draw.
pub struct CriterionEvaluator {
    parts: Vec<PartState>,
}

impl CriterionEvaluator {
    pub fn new(spec: &CriterionSpec, design: &Design, space: &DesignSpace) -> Self {
        CriterionEvaluator {
            parts: spec.parts.iter().map(|p| PartState::new(p, design, space)).collect(),
        }
    }

    /// Current committed criterion value.
    pub fn criterion(&self) -> f64 {
        combine(self.parts.iter().map(|p| (p.weight, p.db)))
    }

    /// Criterion value if `set` were replaced with `profiles`; stays pending
    /// until `commit` or `discard`.
    pub fn propose(&mut self, set: usize, profiles: &[Vec<usize>]) -> f64 {
        combine(self.parts.iter_mut().map(|p| (p.weight, p.propose(set, profiles))))
    }

    pub fn commit(&mut self) {
        for p in &mut self.parts {
            p.commit();
        }
    }

    pub fn discard(&mut self) {
        for p in &mut self.parts {
            p.discard();
        }
    }
}

fn combine(items: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut acc = 0.0;
    for (w, db) in items {
        if db == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        acc += w * db;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{random_design, Design};
    use crate::prior::{sample_prior, PriorSpec};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn single_set_space() -> DesignSpace {
        DesignSpace::new(1, 2, vec![2], 0, vec![]).unwrap()
    }

    /// One set, J=2, one 2-level attribute differing.
    fn single_set_design() -> Design {
        Design::from_levels(1, 2, 1, vec![1, 2]).unwrap()
    }

    #[test]
    fn probabilities_zero_beta() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let p = mnl_probabilities(&x, &DVector::from_row_slice(&[0.0]));
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn probabilities_unit_gap() {
        let p = softmax(&[1.0, 0.0]);
        assert_relative_eq!(p[0], 0.73106, epsilon = 1e-5);
        assert_relative_eq!(p[1], 0.26894, epsilon = 1e-5);
    }

    #[test]
    fn probabilities_no_overflow() {
        let p = softmax(&[700.0, 0.0]);
        assert!(p[0] >= 1.0 - 1e-300);
        assert!(p[1] > 0.0 && p[1] < 1e-300);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn probabilities_shift_invariant() {
        let a = softmax(&[0.3, -1.2, 2.0]);
        let b = softmax(&[100.3, 98.8, 102.0]);
        for j in 0..3 {
            assert_relative_eq!(a[j], b[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn single_set_information_is_one() {
        let space = single_set_space();
        let design = single_set_design();
        let model = ModelSpec::main_effects();
        let beta = DVector::from_row_slice(&[0.0]);
        let m = information_matrix(&design, &model, &space, &beta);
        assert_relative_eq!(m[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(d_criterion(&design, &model, &space, &beta), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn information_invariant_to_profile_reorder() {
        let space = DesignSpace::new(3, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let model = ModelSpec::with_interactions(vec![(0, 1)], &space).unwrap();
        let design = random_design(&space, 4).unwrap();
        let beta = DVector::from_fn(model.num_params(&space), |i, _| 0.1 * i as f64 - 0.3);
        let base = information_matrix(&design, &model, &space, &beta);
        let mut swapped = design.clone();
        for i in 0..3 {
            let a = swapped.level(1, 0, i);
            let b = swapped.level(1, 1, i);
            swapped.set_level(1, 0, i, b);
            swapped.set_level(1, 1, i, a);
        }
        let after = information_matrix(&swapped, &model, &space, &beta);
        assert_relative_eq!(base, after, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_design_scores_neg_inf() {
        // attribute 1 never varies anywhere: its main effect is inestimable
        let space = DesignSpace::new(2, 2, vec![2, 2, 2], 1, vec![]).unwrap();
        let design = Design::from_levels(
            2,
            2,
            3,
            vec![1, 1, 1, 2, 1, 2, 1, 1, 2, 2, 1, 1],
        )
        .unwrap();
        let model = ModelSpec::main_effects();
        let beta = DVector::zeros(3);
        assert_eq!(d_criterion(&design, &model, &space, &beta), f64::NEG_INFINITY);
    }

    #[test]
    fn duplicating_sets_adds_m_log2() {
        let space = DesignSpace::new(4, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let model = ModelSpec::main_effects();
        let design = random_design(&space, 6).unwrap();
        let beta = DVector::from_fn(5, |i, _| 0.2 * i as f64 - 0.4);
        let d1 = d_criterion(&design, &model, &space, &beta);
        let mut doubled_levels = Vec::new();
        for s in 0..4 {
            for j in 0..2 {
                doubled_levels.extend_from_slice(design.profile(s, j));
            }
        }
        let doubled_levels = [doubled_levels.clone(), doubled_levels].concat();
        let doubled = Design::from_levels(8, 2, 3, doubled_levels).unwrap();
        let d2 = d_criterion(&doubled, &model, &space, &beta);
        assert_relative_eq!(d2, d1 + 5.0 * 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn db_with_constant_draws_equals_d() {
        let space = DesignSpace::new(4, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let model = ModelSpec::main_effects();
        let design = random_design(&space, 1).unwrap();
        let beta = DVector::from_row_slice(&[-1.0, -1.0, 0.0, -1.0, 0.0]);
        let draws = sample_prior(&PriorSpec::degenerate(beta.clone()), 8, 0).unwrap();
        let db = db_criterion(&design, &model, &space, &draws, ModelTag::Main);
        assert_relative_eq!(db.value, d_criterion(&design, &model, &space, &beta), epsilon = 1e-12);
    }

    #[test]
    fn db_monotone_under_adding_a_set() {
        let space = DesignSpace::new(4, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let bigger = DesignSpace::new(5, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let model = ModelSpec::main_effects();
        let prior = PriorSpec::new(
            DVector::from_row_slice(&[-1.0, -1.0, 0.0, -1.0, 0.0]),
            DMatrix::identity(5, 5),
        )
        .unwrap();
        let draws = sample_prior(&prior, 16, 5).unwrap();
        for seed in 0..10 {
            let large = random_design(&bigger, seed).unwrap();
            let mut flat = Vec::new();
            for s in 0..4 {
                for j in 0..2 {
                    flat.extend_from_slice(large.profile(s, j));
                }
            }
            let small = Design::from_levels(4, 2, 3, flat).unwrap();
            let db_small = db_criterion(&small, &model, &space, &draws, ModelTag::Main).value;
            let db_large = db_criterion(&large, &model, &bigger, &draws, ModelTag::Main).value;
            if db_small.is_finite() {
                assert!(db_large >= db_small - 1e-10, "seed {seed}");
            }
        }
    }

    #[test]
    fn efficiency_identity_and_formula() {
        let space = DesignSpace::new(6, 2, vec![2, 2, 3], 1, vec![]).unwrap();
        let model = ModelSpec::main_effects();
        let design = random_design(&space, 9).unwrap();
        let prior = PriorSpec::new(DVector::zeros(4), DMatrix::identity(4, 4)).unwrap();
        let draws = sample_prior(&prior, 8, 1).unwrap();
        let e = relative_db_efficiency(&design, &design, &model, &space, &draws);
        assert_eq!(e.value, 1.0);
        assert!(!e.degenerate);
    }

    #[test]
    fn efficiency_gap_of_m_gives_e() {
        // direct formula check: db gap of m maps to e
        let gap_eff = (4.0f64 / 4.0).exp();
        assert_relative_eq!(gap_eff, std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn robust_collapses_when_models_match() {
        let space = DesignSpace::new(6, 2, vec![2, 2, 3], 1, vec![]).unwrap();
        let main = ModelSpec::main_effects();
        let prior = PriorSpec::new(DVector::zeros(4), DMatrix::identity(4, 4)).unwrap();
        let draws = sample_prior(&prior, 8, 2).unwrap();
        let design = random_design(&space, 3).unwrap();
        let spec = CriterionSpec::robust(
            main.clone(),
            draws.clone(),
            main.clone(),
            draws.clone(),
            &space,
            (1.0, 1.0),
        )
        .unwrap();
        let db = db_criterion(&design, &main, &space, &draws, ModelTag::Main).value;
        assert_relative_eq!(spec.value(&design, &space), 2.0 * db / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn robust_requires_prefix_models() {
        let space = DesignSpace::new(6, 2, vec![2, 2, 3], 1, vec![]).unwrap();
        let main = ModelSpec::with_interactions(vec![(1, 2)], &space).unwrap();
        let int = ModelSpec::with_interactions(vec![(0, 1)], &space).unwrap();
        let prior = PriorSpec::new(DVector::zeros(6), DMatrix::identity(6, 6)).unwrap();
        let draws = sample_prior(&prior, 4, 0).unwrap();
        assert!(CriterionSpec::robust(main, draws.clone(), int, draws, &space, (1.0, 1.0)).is_err());
    }

    #[test]
    fn evaluator_matches_full_recompute() {
        let space = DesignSpace::new(8, 2, vec![2, 2, 2, 3, 3, 3], 1, vec![]).unwrap();
        let model = ModelSpec::with_interactions(vec![(0, 1), (0, 3)], &space).unwrap();
        let m = model.num_params(&space);
        let prior = PriorSpec::new(DVector::zeros(m), DMatrix::identity(m, m)).unwrap();
        let draws = sample_prior(&prior, 8, 3).unwrap();
        let spec = CriterionSpec::single(ModelTag::Interaction, model, draws);
        let mut design = random_design(&space, 10).unwrap();
        let mut eval = spec.evaluator(&design, &space);
        assert_relative_eq!(eval.criterion(), spec.value(&design, &space), epsilon = 1e-10);

        // replace set 2 with a fresh set and check propose/commit against full
        let other = random_design(&space, 99).unwrap();
        let new_profiles = other.set_profiles(2);
        let proposed = eval.propose(2, &new_profiles);
        for j in 0..2 {
            for i in 0..6 {
                design.set_level(2, j, i, other.level(2, j, i));
            }
        }
        assert_relative_eq!(proposed, spec.value(&design, &space), epsilon = 1e-10);
        eval.commit();
        assert_relative_eq!(eval.criterion(), spec.value(&design, &space), epsilon = 1e-10);
    }

    #[test]
    fn constant_attribute_level_does_not_move_d_without_interactions() {
        let space = DesignSpace::new(24, 2, vec![2, 2, 2, 3, 3, 3], 1, vec![]).unwrap();
        let model = ModelSpec::main_effects();
        let beta = DVector::from_fn(9, |i, _| 0.15 * i as f64 - 0.6);
        let mut finite = 0;
        for seed in 0..20 {
            let design = random_design(&space, seed).unwrap();
            let before = d_criterion(&design, &model, &space, &beta);
            if !before.is_finite() {
                continue;
            }
            finite += 1;
            let mut changed = design.clone();
            let s = (seed as usize) % 6;
            let attr = design.constant_attributes(s)[0];
            let d = space.attribute_levels[attr];
            let old = design.level(s, 0, attr);
            let new = if old == d { 1 } else { old + 1 };
            for j in 0..2 {
                changed.set_level(s, j, attr, new);
            }
            let after = d_criterion(&changed, &model, &space, &beta);
            assert!((before - after).abs() <= 1e-12, "seed {seed}: {before} vs {after}");
        }
        assert!(finite >= 10, "too few nonsingular designs: {finite}");
    }
}
