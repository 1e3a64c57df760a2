use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::criterion::{mnl_probabilities, set_information};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::model::{CompiledModel, ModelSpec};
use crate::space::DesignSpace;

const GRADIENT_TOL: f64 = 1e-8;
const MAX_NEWTON_ITERS: usize = 100;
const RIDGE: f64 = 1e-8;

/// Simulation protocol: who answers which choice sets, how often, and under
/// which true parameter vector.
#[derive(Clone, Debug)]
pub struct SimulationPlan {
    /// Partition of choice-set indices into survey groups; every respondent
    /// of a group answers exactly that group's sets.
    pub groups: Vec<Vec<usize>>,
    /// Respondents per survey group.
    pub num_respondents: usize,
    pub true_beta: DVector<f64>,
    pub num_replications: usize,
    pub seed: u64,
}

impl SimulationPlan {
    /// Single survey group covering all sets.
    pub fn single_group(
        num_sets: usize,
        num_respondents: usize,
        true_beta: DVector<f64>,
        num_replications: usize,
        seed: u64,
    ) -> Self {
        SimulationPlan {
            groups: vec![(0..num_sets).collect()],
            num_respondents,
            true_beta,
            num_replications,
            seed,
        }
    }

    pub fn validate(&self, num_sets: usize) -> Result<()> {
        if self.num_respondents == 0 {
            return Err(Error::Config("at least one respondent per group".into()));
        }
        if self.num_replications == 0 {
            return Err(Error::Config("at least one replication".into()));
        }
        let mut seen = vec![false; num_sets];
        for g in &self.groups {
            for &s in g {
                if s >= num_sets {
                    return Err(Error::Config(format!("group references set {s}")));
                }
                if seen[s] {
                    return Err(Error::Config(format!("set {s} appears in two groups")));
                }
                seen[s] = true;
            }
        }
        if !seen.iter().all(|&v| v) {
            return Err(Error::Config("survey groups must cover every choice set".into()));
        }
        Ok(())
    }
}

/// Per-set true choice probabilities for a design under `beta`.
fn true_probabilities(
    design: &Design,
    space: &DesignSpace,
    model: &ModelSpec,
    beta: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let compiled = CompiledModel::new(model, space);
    (0..design.num_sets())
        .map(|s| mnl_probabilities(&compiled.set_matrix(&design.set_profiles(s)), beta))
        .collect()
}

/// One replication of respondent choices, aggregated to S×J counts. The
/// uniform-variate stream is consumed in a fixed (group, respondent, set)
/// order and does not depend on the design's content, so replications are
/// paired across designs when the same rng seed is used.
pub fn simulate_replication<R: Rng>(
    probabilities: &[DVector<f64>],
    plan: &SimulationPlan,
    rng: &mut R,
) -> Vec<Vec<u64>> {
    let j = probabilities.first().map_or(0, |p| p.len());
    let mut counts = vec![vec![0u64; j]; probabilities.len()];
    for group in &plan.groups {
        for _ in 0..plan.num_respondents {
            for &s in group {
                let u: f64 = rng.gen();
                let p = &probabilities[s];
                let mut acc = 0.0;
                let mut chosen = p.len() - 1;
                for (idx, &pj) in p.iter().enumerate() {
                    acc += pj;
                    if u < acc {
                        chosen = idx;
                        break;
                    }
                }
                counts[s][chosen] += 1;
            }
        }
    }
    counts
}

/// All replications of the plan against one design; deterministic given the
/// plan seed.
pub fn simulate_choices(
    design: &Design,
    space: &DesignSpace,
    model: &ModelSpec,
    plan: &SimulationPlan,
) -> Result<Vec<Vec<Vec<u64>>>> {
    plan.validate(design.num_sets())?;
    let probabilities = true_probabilities(design, space, model, &plan.true_beta);
    Ok((0..plan.num_replications)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(plan.seed, r));
            simulate_replication(&probabilities, plan, &mut rng)
        })
        .collect())
}

fn replication_seed(seed: u64, replication: usize) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(replication as u64 + 1))
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimationResult {
    pub beta_hat: Vec<f64>,
    pub converged: bool,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub ridged: bool,
}

fn log_likelihood(sets: &[DMatrix<f64>], counts: &[Vec<u64>], beta: &DVector<f64>) -> f64 {
    let mut ll = 0.0;
    for (x, y) in sets.iter().zip(counts) {
        let p = mnl_probabilities(x, beta);
        for (j, &yj) in y.iter().enumerate() {
            if yj > 0 {
                ll += yj as f64 * p[j].ln();
            }
        }
    }
    ll
}

fn gradient(sets: &[DMatrix<f64>], counts: &[Vec<u64>], beta: &DVector<f64>) -> DVector<f64> {
    let m = beta.len();
    let mut g = DVector::zeros(m);
    for (x, y) in sets.iter().zip(counts) {
        let p = mnl_probabilities(x, beta);
        let n: f64 = y.iter().map(|&v| v as f64).sum();
        let resid = DVector::from_fn(y.len(), |j, _| y[j] as f64 - n * p[j]);
        g += x.transpose() * resid;
    }
    g
}

fn negative_hessian(
    sets: &[DMatrix<f64>],
    counts: &[Vec<u64>],
    beta: &DVector<f64>,
) -> DMatrix<f64> {
    let m = beta.len();
    let mut h = DMatrix::zeros(m, m);
    for (x, y) in sets.iter().zip(counts) {
        let n: f64 = y.iter().map(|&v| v as f64).sum();
        if n > 0.0 {
            h += set_information(x, beta) * n;
        }
    }
    h
}

/// Maximum-likelihood fit of the MNL model to aggregated choice counts:
/// Newton iterations from β = 0 with step halving and a small ridge when the
/// Hessian is singular (separation). Convergence is gradient max-norm ≤ 1e−8.
pub fn fit_mnl(
    design: &Design,
    space: &DesignSpace,
    model: &ModelSpec,
    counts: &[Vec<u64>],
) -> Result<EstimationResult> {
    if counts.len() != design.num_sets() {
        return Err(Error::InvalidInput(format!(
            "count matrix has {} sets, design has {}",
            counts.len(),
            design.num_sets()
        )));
    }
    let j = design.profiles_per_set();
    if counts.iter().any(|y| y.len() != j) {
        return Err(Error::InvalidInput(format!("each count row must have {j} entries")));
    }
    let compiled = CompiledModel::new(model, space);
    let sets: Vec<DMatrix<f64>> = (0..design.num_sets())
        .map(|s| compiled.set_matrix(&design.set_profiles(s)))
        .collect();
    let m = model.num_params(space);
    let mut beta = DVector::zeros(m);
    let mut ll = log_likelihood(&sets, counts, &beta);
    let mut ridged = false;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..MAX_NEWTON_ITERS {
        iterations = iter;
        let g = gradient(&sets, counts, &beta);
        if g.amax() <= GRADIENT_TOL {
            converged = true;
            break;
        }
        let mut h = negative_hessian(&sets, counts, &beta);
        let mut direction = solve_spd(&h, &g);
        if direction.is_none() {
            ridged = true;
            for d in 0..m {
                h[(d, d)] += RIDGE;
            }
            direction = solve_spd(&h, &g);
        }
        let Some(direction) = direction else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &beta + &direction * step;
            let candidate_ll = log_likelihood(&sets, counts, &candidate);
            if candidate_ll >= ll {
                beta = candidate;
                ll = candidate_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if converged {
        debug_assert!(gradient(&sets, counts, &beta).amax() <= GRADIENT_TOL);
    }
    Ok(EstimationResult {
        beta_hat: beta.iter().copied().collect(),
        converged,
        log_likelihood: ll,
        iterations,
        ridged,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EmseSummary {
    pub emse: f64,
    pub num_used: usize,
    pub num_excluded: usize,
}

/// Mean squared estimation error over converged replications; non-converged
/// fits are excluded and counted.
pub fn emse(results: &[EstimationResult], true_beta: &DVector<f64>) -> EmseSummary {
    let mut total = 0.0;
    let mut used = 0;
    for r in results {
        if !r.converged {
            continue;
        }
        let sq: f64 = r
            .beta_hat
            .iter()
            .zip(true_beta.iter())
            .map(|(b, t)| (b - t) * (b - t))
            .sum();
        total += sq;
        used += 1;
    }
    EmseSummary {
        emse: if used > 0 { total / used as f64 } else { f64::NAN },
        num_used: used,
        num_excluded: results.len() - used,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SquaredErrorRow {
    pub design_id: String,
    pub replication: usize,
    pub sq_error: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignEmse {
    pub design_id: String,
    pub emse: f64,
    pub num_used: usize,
    pub num_excluded: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<DesignEmse>,
    pub per_replication: Vec<SquaredErrorRow>,
}

/// Paired EMSE comparison across designs: replication r of every design uses
/// the same uniform-variate stream, so sampling noise is common across the
/// columns of the resulting table.
pub fn compare_designs(
    designs: &[(String, Design)],
    space: &DesignSpace,
    true_model: &ModelSpec,
    plan: &SimulationPlan,
) -> Result<ComparisonReport> {
    let mut rows = Vec::with_capacity(designs.len());
    let mut per_replication = Vec::new();
    for (id, design) in designs {
        plan.validate(design.num_sets())?;
        let probabilities = true_probabilities(design, space, true_model, &plan.true_beta);
        let fits: Vec<EstimationResult> = (0..plan.num_replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(plan.seed, r));
                let counts = simulate_replication(&probabilities, plan, &mut rng);
                fit_mnl(design, space, true_model, &counts)
            })
            .collect::<Result<Vec<_>>>()?;
        for (r, fit) in fits.iter().enumerate() {
            let sq: f64 = fit
                .beta_hat
                .iter()
                .zip(plan.true_beta.iter())
                .map(|(b, t)| (b - t) * (b - t))
                .sum();
            per_replication.push(SquaredErrorRow {
                design_id: id.clone(),
                replication: r,
                sq_error: sq,
                converged: fit.converged,
            });
        }
        let summary = emse(&fits, &plan.true_beta);
        rows.push(DesignEmse {
            design_id: id.clone(),
            emse: summary.emse,
            num_used: summary.num_used,
            num_excluded: summary.num_excluded,
        });
    }
    Ok(ComparisonReport { rows, per_replication })
}

pub fn squared_errors_to_csv(rows: &[SquaredErrorRow]) -> String {
    let mut out = String::from("design_id,replication,sq_error,converged\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.design_id, row.replication, row.sq_error, row.converged
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::random_design;
    use approx::assert_relative_eq;

    fn tiny_space() -> DesignSpace {
        DesignSpace::new(1, 2, vec![2], 0, vec![]).unwrap()
    }

    fn tiny_design() -> Design {
        Design::from_levels(1, 2, 1, vec![1, 2]).unwrap()
    }

    #[test]
    fn uniform_choice_under_zero_beta() {
        let space = tiny_space();
        let design = tiny_design();
        let model = ModelSpec::main_effects();
        let plan =
            SimulationPlan::single_group(1, 1_000_000, DVector::zeros(1), 1, 42);
        let reps = simulate_choices(&design, &space, &model, &plan).unwrap();
        let counts = &reps[0][0];
        assert_eq!(counts[0] + counts[1], 1_000_000);
        let share = counts[0] as f64 / 1_000_000.0;
        assert!((share - 0.5).abs() < 0.002, "share {share}");
    }

    #[test]
    fn counts_conserve_respondents_per_set() {
        let space = DesignSpace::new(6, 3, vec![2, 3, 3], 1, vec![]).unwrap();
        let design = random_design(&space, 9).unwrap();
        let model = ModelSpec::main_effects();
        let m = model.num_params(&space);
        // two survey groups of three sets each
        let plan = SimulationPlan {
            groups: vec![vec![0, 1, 2], vec![3, 4, 5]],
            num_respondents: 37,
            true_beta: DVector::from_element(m, 0.3),
            num_replications: 4,
            seed: 5,
        };
        let reps = simulate_choices(&design, &space, &model, &plan).unwrap();
        for rep in &reps {
            for counts in rep {
                assert_eq!(counts.iter().sum::<u64>(), 37);
            }
        }
    }

    #[test]
    fn empirical_shares_match_probabilities() {
        let space = DesignSpace::new(2, 2, vec![3], 0, vec![]).unwrap();
        let design = Design::from_levels(2, 2, 1, vec![1, 2, 2, 3]).unwrap();
        let model = ModelSpec::main_effects();
        let beta = DVector::from_row_slice(&[0.7, -0.2]);
        let plan = SimulationPlan::single_group(2, 200_000, beta.clone(), 1, 11);
        let reps = simulate_choices(&design, &space, &model, &plan).unwrap();
        let compiled = CompiledModel::new(&model, &space);
        for s in 0..2 {
            let p = mnl_probabilities(&compiled.set_matrix(&design.set_profiles(s)), &beta);
            for j in 0..2 {
                let share = reps[0][s][j] as f64 / 200_000.0;
                assert!((share - p[j]).abs() < 0.005, "set {s} alt {j}: {share} vs {}", p[j]);
            }
        }
    }

    #[test]
    fn two_level_closed_form() {
        let space = tiny_space();
        let design = tiny_design();
        let model = ModelSpec::main_effects();
        let fit = fit_mnl(&design, &space, &model, &[vec![75, 25]]).unwrap();
        assert!(fit.converged);
        // share 0.75 across a coded difference of 2: beta = logit(0.75)/2
        assert_relative_eq!(fit.beta_hat[0], (3.0f64).ln() / 2.0, epsilon = 1e-6);
        assert_relative_eq!(fit.beta_hat[0], 0.549306, epsilon = 1e-5);
    }

    #[test]
    fn exact_proportional_counts_recover_truth() {
        let space = DesignSpace::new(8, 2, vec![2, 3], 0, vec![]).unwrap();
        let design = random_design(&space, 3).unwrap();
        let model = ModelSpec::main_effects();
        let beta = DVector::from_row_slice(&[0.4, -0.3, 0.6]);
        let compiled = CompiledModel::new(&model, &space);
        // fractional "counts" scaled to integers that are exactly proportional
        // cannot be exact in general; use a huge multiplier and loose check
        let n = 10_000_000.0f64;
        let counts: Vec<Vec<u64>> = (0..8)
            .map(|s| {
                let p = mnl_probabilities(&compiled.set_matrix(&design.set_profiles(s)), &beta);
                vec![(p[0] * n).round() as u64, (p[1] * n).round() as u64]
            })
            .collect();
        let fit = fit_mnl(&design, &space, &model, &counts).unwrap();
        assert!(fit.converged);
        for (b, t) in fit.beta_hat.iter().zip(beta.iter()) {
            assert!((b - t).abs() < 1e-4, "{b} vs {t}");
        }
    }

    #[test]
    fn fitted_likelihood_dominates_null() {
        let space = DesignSpace::new(5, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let design = random_design(&space, 17).unwrap();
        let model = ModelSpec::main_effects();
        let m = model.num_params(&space);
        let plan =
            SimulationPlan::single_group(5, 50, DVector::from_element(m, 0.5), 1, 3);
        let counts = &simulate_choices(&design, &space, &model, &plan).unwrap()[0];
        let fit = fit_mnl(&design, &space, &model, counts).unwrap();
        let compiled = CompiledModel::new(&model, &space);
        let sets: Vec<DMatrix<f64>> =
            (0..5).map(|s| compiled.set_matrix(&design.set_profiles(s))).collect();
        let ll0 = log_likelihood(&sets, counts, &DVector::zeros(m));
        assert!(fit.log_likelihood >= ll0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let space = DesignSpace::new(4, 3, vec![2, 3], 0, vec![]).unwrap();
        let design = random_design(&space, 8).unwrap();
        let model = ModelSpec::main_effects();
        let m = model.num_params(&space);
        let compiled = CompiledModel::new(&model, &space);
        let sets: Vec<DMatrix<f64>> =
            (0..4).map(|s| compiled.set_matrix(&design.set_profiles(s))).collect();
        let counts = vec![vec![5, 3, 2], vec![1, 7, 2], vec![4, 4, 2], vec![0, 6, 4]];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let beta = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
            let g = gradient(&sets, &counts, &beta);
            let h = 1e-6;
            for d in 0..m {
                let mut up = beta.clone();
                up[d] += h;
                let mut down = beta.clone();
                down[d] -= h;
                let fd = (log_likelihood(&sets, &counts, &up)
                    - log_likelihood(&sets, &counts, &down))
                    / (2.0 * h);
                let scale = g[d].abs().max(1.0);
                assert!((g[d] - fd).abs() / scale < 1e-5, "coord {d}: {} vs {}", g[d], fd);
            }
        }
    }

    #[test]
    fn hessian_matches_information_summands() {
        let space = DesignSpace::new(3, 2, vec![2, 3], 0, vec![]).unwrap();
        let design = random_design(&space, 4).unwrap();
        let model = ModelSpec::main_effects();
        let m = model.num_params(&space);
        let compiled = CompiledModel::new(&model, &space);
        let sets: Vec<DMatrix<f64>> =
            (0..3).map(|s| compiled.set_matrix(&design.set_profiles(s))).collect();
        let counts = vec![vec![10, 5], vec![3, 12], vec![8, 7]];
        let beta = DVector::from_row_slice(&[0.2, -0.1, 0.4]);
        let h = negative_hessian(&sets, &counts, &beta);
        let mut expected = DMatrix::zeros(m, m);
        for (x, y) in sets.iter().zip(&counts) {
            expected += set_information(x, &beta) * (y.iter().sum::<u64>() as f64);
        }
        assert_relative_eq!(h, expected, epsilon = 1e-10);
    }

    #[test]
    fn emse_examples_and_permutation_invariance() {
        let truth = DVector::from_row_slice(&[0.5, -0.5]);
        let exact = EstimationResult {
            beta_hat: vec![0.5, -0.5],
            converged: true,
            log_likelihood: 0.0,
            iterations: 1,
            ridged: false,
        };
        assert_eq!(emse(&[exact.clone(), exact.clone()], &truth).emse, 0.0);

        let off = EstimationResult { beta_hat: vec![1.5, -0.5], ..exact.clone() };
        assert_relative_eq!(emse(&[off.clone()], &truth).emse, 1.0);

        let bad = EstimationResult { converged: false, ..off.clone() };
        let summary = emse(&[exact.clone(), bad.clone(), off.clone()], &truth);
        assert_eq!(summary.num_excluded, 1);
        assert_relative_eq!(summary.emse, 0.5);
        let permuted = emse(&[off, exact, bad], &truth);
        assert_relative_eq!(summary.emse, permuted.emse);
    }

    #[test]
    fn identical_designs_get_identical_emse() {
        let space = DesignSpace::new(6, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let design = random_design(&space, 22).unwrap();
        let model = ModelSpec::main_effects();
        let m = model.num_params(&space);
        let plan =
            SimulationPlan::single_group(6, 60, DVector::from_element(m, 0.4), 6, 13);
        let report = compare_designs(
            &[("a".into(), design.clone()), ("b".into(), design)],
            &space,
            &model,
            &plan,
        )
        .unwrap();
        assert_eq!(report.rows[0].emse, report.rows[1].emse);
        assert_eq!(report.per_replication.len(), 12);
    }

    #[test]
    fn emse_shrinks_with_more_respondents() {
        let space = DesignSpace::new(12, 2, vec![2, 3, 3], 1, vec![]).unwrap();
        let design = random_design(&space, 31).unwrap();
        let model = ModelSpec::main_effects();
        let m = model.num_params(&space);
        let truth = DVector::from_element(m, 0.4);
        let small = SimulationPlan::single_group(12, 100, truth.clone(), 20, 77);
        let large = SimulationPlan::single_group(12, 1000, truth, 20, 77);
        let a = compare_designs(&[("d".into(), design.clone())], &space, &model, &small)
            .unwrap();
        let b = compare_designs(&[("d".into(), design)], &space, &model, &large).unwrap();
        assert!(b.rows[0].emse < a.rows[0].emse);
    }

    #[test]
    fn csv_export_shape() {
        let rows = vec![SquaredErrorRow {
            design_id: "sa".into(),
            replication: 0,
            sq_error: 0.25,
            converged: true,
        }];
        let csv = squared_errors_to_csv(&rows);
        assert!(csv.starts_with("design_id,replication,sq_error,converged\n"));
        assert!(csv.contains("sa,0,0.25,true"));
    }
}
