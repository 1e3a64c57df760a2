use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::{Duration, Instant};

use crate::criterion::CriterionSpec;
use crate::design::{random_design, Design, MAX_SET_RESAMPLES};
use crate::error::{Error, Result};
use crate::space::DesignSpace;

/// Target initial acceptance probability for the mean uphill move during
/// temperature calibration.
const WALK_TARGET: f64 = 0.8;

/// Stopping rule for the annealer.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum Stopping {
    MaxRuntime(Duration),
    MaxReheats(usize),
    NoImprovementOverReheatCycle,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaConfig {
    pub reheat_stall: usize,
    /// Probability of changing a dependent constant attribute's shared level
    /// instead of swapping it with a varying one; defaults to F/K.
    pub gamma: Option<f64>,
    pub random_walk_steps: usize,
    pub stopping: Stopping,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            reheat_stall: 1000,
            gamma: None,
            random_walk_steps: 100,
            stopping: Stopping::NoImprovementOverReheatCycle,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn gamma_for(&self, space: &DesignSpace) -> f64 {
        self.gamma.unwrap_or(
            space.num_constant_attributes as f64 / space.num_attributes() as f64,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.reheat_stall == 0 {
            return Err(Error::Config("reheat_stall must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!("gamma {g} is outside [0, 1]")));
            }
        }
        if self.random_walk_steps < 2 {
            return Err(Error::Config("random_walk_steps must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Constant attribute whose level the criterion is independent of:
    /// swapped with a varying attribute.
    IndependentConvert,
    /// Dependent constant attribute, shared level re-randomized (p ≤ γ).
    GammaLevel,
    /// Dependent constant attribute, swapped with a varying one (p > γ).
    DependentConvert,
    /// Varying coordinate re-randomized.
    Varying,
    /// Varying coordinate collapsed to constant; a constant attribute was
    /// released to preserve the profile strength.
    VaryingRepair,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct BranchCounters {
    pub independent_convert: usize,
    pub gamma_level: usize,
    pub dependent_convert: usize,
    pub varying: usize,
    pub varying_repair: usize,
}

impl BranchCounters {
    fn record(&mut self, branch: Branch) {
        match branch {
            Branch::IndependentConvert => self.independent_convert += 1,
            Branch::GammaLevel => self.gamma_level += 1,
            Branch::DependentConvert => self.dependent_convert += 1,
            Branch::Varying => self.varying += 1,
            Branch::VaryingRepair => self.varying_repair += 1,
        }
    }
}

/// A single-set neighborhood move produced by the exploration rule.
#[derive(Clone, Debug)]
pub struct Move {
    pub set: usize,
    pub profiles: Vec<Vec<usize>>,
    pub branch: Branch,
}

fn constant_in(profiles: &[Vec<usize>], attribute: usize) -> bool {
    profiles.iter().all(|p| p[attribute] == profiles[0][attribute])
}

fn set_valid(space: &DesignSpace, profiles: &[Vec<usize>]) -> bool {
    let k = space.num_attributes();
    let constants = (0..k).filter(|&i| constant_in(profiles, i)).count();
    if constants != space.num_constant_attributes {
        return false;
    }
    for (a, pa) in profiles.iter().enumerate() {
        if space.profile_forbidden(pa) {
            return false;
        }
        for pb in &profiles[a + 1..] {
            if pa == pb {
                return false;
            }
        }
    }
    true
}

/// Whether the criterion is provably unaffected by the shared level of
/// constant attribute `i` in a set with the given profiles: the attribute
/// takes part in no modeled interaction, or every interaction partner is
/// itself constant in the set. In both cases the effects-coded contribution
/// of `i` is identical across the set's profiles and cancels out of the
/// choice probabilities.
pub fn level_independent(
    profiles: &[Vec<usize>],
    attribute: usize,
    interaction_pairs: &[(usize, usize)],
) -> bool {
    interaction_pairs.iter().all(|&(a, b)| {
        if a == attribute {
            constant_in(profiles, b)
        } else if b == attribute {
            constant_in(profiles, a)
        } else {
            true
        }
    })
}

fn random_other_level<R: Rng>(rng: &mut R, current: usize, num_levels: usize) -> usize {
    debug_assert!(num_levels >= 2);
    let pick = rng.gen_range(1..num_levels);
    if pick >= current {
        pick + 1
    } else {
        pick
    }
}

/// One application of the exploration rule: picks a uniform random
/// (set, profile, attribute) coordinate and perturbs it while preserving the
/// number of constant attributes per set. Candidate sets that introduce
/// duplicate or forbidden profiles are resampled, up to a bounded number of
/// retries.
pub fn propose_move<R: Rng>(
    design: &Design,
    space: &DesignSpace,
    interaction_pairs: &[(usize, usize)],
    gamma: f64,
    rng: &mut R,
) -> Result<Move> {
    let k = space.num_attributes();
    let j_count = space.profiles_per_set;
    for _ in 0..MAX_SET_RESAMPLES {
        let s = rng.gen_range(0..design.num_sets());
        let j = rng.gen_range(0..j_count);
        let i = rng.gen_range(0..k);
        let mut profiles = design.set_profiles(s);
        let branch;
        if constant_in(&profiles, i) {
            let independent = level_independent(&profiles, i, interaction_pairs);
            if independent || rng.gen::<f64>() > gamma {
                // swap roles: some varying attribute becomes constant, i is
                // released by re-randomizing its level at profile j
                let varying: Vec<usize> =
                    (0..k).filter(|&a| !constant_in(&profiles, a)).collect();
                if varying.is_empty() {
                    continue;
                }
                let v = varying[rng.gen_range(0..varying.len())];
                let shared = rng.gen_range(1..=space.attribute_levels[v]);
                for p in profiles.iter_mut() {
                    p[v] = shared;
                }
                profiles[j][i] = rng.gen_range(1..=space.attribute_levels[i]);
                branch = if independent {
                    Branch::IndependentConvert
                } else {
                    Branch::DependentConvert
                };
            } else {
                let shared =
                    random_other_level(rng, profiles[0][i], space.attribute_levels[i]);
                for p in profiles.iter_mut() {
                    p[i] = shared;
                }
                branch = Branch::GammaLevel;
            }
        } else {
            profiles[j][i] = random_other_level(rng, profiles[j][i], space.attribute_levels[i]);
            if constant_in(&profiles, i) {
                let constants: Vec<usize> =
                    (0..k).filter(|&a| a != i && constant_in(&profiles, a)).collect();
                if constants.is_empty() {
                    continue;
                }
                let c = constants[rng.gen_range(0..constants.len())];
                let pj = rng.gen_range(0..j_count);
                profiles[pj][c] =
                    random_other_level(rng, profiles[pj][c], space.attribute_levels[c]);
                branch = Branch::VaryingRepair;
            } else {
                branch = Branch::Varying;
            }
        }
        if set_valid(space, &profiles) {
            return Ok(Move { set: s, profiles, branch });
        }
    }
    Err(Error::StuckState(MAX_SET_RESAMPLES))
}

/// Convenience wrapper: applies one seeded exploration move to a design.
pub fn explore(
    design: &Design,
    space: &DesignSpace,
    interaction_pairs: &[(usize, usize)],
    gamma: f64,
    seed: u64,
) -> Result<Design> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mv = propose_move(design, space, interaction_pairs, gamma, &mut rng)?;
    let mut out = design.clone();
    apply_move(&mut out, &mv);
    Ok(out)
}

fn apply_move(design: &mut Design, mv: &Move) {
    for (j, profile) in mv.profiles.iter().enumerate() {
        for (i, &level) in profile.iter().enumerate() {
            design.set_level(mv.set, j, i, level);
        }
    }
}

/// Metropolis acceptance for a maximization move: accept iff
/// u < min{1, exp(delta / temperature)}.
pub fn metropolis_accept(delta: f64, temperature: f64, u: f64) -> bool {
    debug_assert!(temperature > 0.0);
    if delta >= 0.0 {
        return u < 1.0;
    }
    u < (delta / temperature).exp()
}

pub(crate) fn calibrate_temperature(deltas: &[f64]) -> (f64, bool) {
    let finite: Vec<f64> =
        deltas.iter().copied().filter(|d| d.is_finite()).map(f64::abs).collect();
    let mean = if finite.is_empty() {
        0.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    if mean > 0.0 {
        (mean / -WALK_TARGET.ln(), false)
    } else {
        (1.0, true)
    }
}

/// Initial temperature by an unconditional random walk: `steps` exploration
/// moves are applied unconditionally, the mean |Δcriterion| is scaled so
/// that the mean-magnitude uphill move has acceptance probability ≈ 0.8.
/// Returns the temperature and whether the flat-walk fallback fired.
pub fn initial_temperature(
    start: &Design,
    space: &DesignSpace,
    spec: &CriterionSpec,
    gamma: f64,
    steps: usize,
    seed: u64,
) -> Result<(f64, bool)> {
    if steps < 2 {
        return Err(Error::Config("temperature walk needs at least 2 steps".into()));
    }
    let pairs = spec.interaction_pairs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut design = start.clone();
    let mut eval = spec.evaluator(&design, space);
    let mut current = eval.criterion();
    let mut deltas = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mv = propose_move(&design, space, &pairs, gamma, &mut rng)?;
        let proposed = eval.propose(mv.set, &mv.profiles);
        eval.commit();
        apply_move(&mut design, &mv);
        deltas.push(proposed - current);
        current = proposed;
    }
    Ok(calibrate_temperature(&deltas))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SaTraceRow {
    pub iteration: usize,
    pub temperature: f64,
    pub current: f64,
    pub best: f64,
    pub accepted: bool,
    pub reheated: bool,
}

#[derive(Clone, Debug)]
pub struct SaResult {
    pub design: Design,
    pub criterion: f64,
    pub t0: f64,
    pub t0_flagged: bool,
    pub reheats: usize,
    pub iterations: usize,
    pub branches: BranchCounters,
    pub wall_time: Duration,
    pub trace: Vec<SaTraceRow>,
}

pub fn trace_to_csv(trace: &[SaTraceRow]) -> String {
    let mut out = String::from("iteration,temperature,current_db,best_db,accepted,reheated\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.iteration, row.temperature, row.current, row.best, row.accepted, row.reheated
        ));
    }
    out
}

/// The annealer: hyperbolic cooling T₀/(k+1), Metropolis acceptance,
/// best-so-far tracking, and reheating (reset T and k, keep the best) after
/// `reheat_stall` consecutive rejections.
pub fn anneal(space: &DesignSpace, spec: &CriterionSpec, config: &SaConfig) -> Result<SaResult> {
    let start = random_design(space, config.seed)?;
    anneal_from(start, space, spec, config)
}

pub fn anneal_from(
    start: Design,
    space: &DesignSpace,
    spec: &CriterionSpec,
    config: &SaConfig,
) -> Result<SaResult> {
    config.validate()?;
    let started = Instant::now();
    let gamma = config.gamma_for(space);
    let pairs = spec.interaction_pairs();
    let (t0, t0_flagged) = initial_temperature(
        &start,
        space,
        spec,
        gamma,
        config.random_walk_steps,
        config.seed.wrapping_add(0x517c_c1b7_2722_0a95),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x2545_f491_4f6c_dd1d));
    let mut design = start;
    let mut eval = spec.evaluator(&design, space);
    let mut current = eval.criterion();
    let mut best = current;
    let mut best_design = design.clone();

    let mut k: usize = 0;
    let mut iteration: usize = 0;
    let mut rejections: usize = 0;
    let mut reheats: usize = 0;
    let mut improved_this_cycle = false;
    let mut branches = BranchCounters::default();
    let mut trace = Vec::new();

    loop {
        if let Stopping::MaxRuntime(budget) = config.stopping {
            if started.elapsed() >= budget {
                break;
            }
        }
        let temperature = t0 / (k + 1) as f64;
        let mv = propose_move(&design, space, &pairs, gamma, &mut rng)?;
        let proposed = eval.propose(mv.set, &mv.profiles);
        let u: f64 = rng.gen();
        // singular designs: always move off −∞, never onto it by choice
        let accepted = if proposed == f64::NEG_INFINITY {
            false
        } else if current == f64::NEG_INFINITY {
            true
        } else {
            metropolis_accept(proposed - current, temperature, u)
        };
        if accepted {
            eval.commit();
            apply_move(&mut design, &mv);
            branches.record(mv.branch);
            current = proposed;
            rejections = 0;
            if current > best {
                best = current;
                best_design = design.clone();
                improved_this_cycle = true;
            }
        } else {
            eval.discard();
            rejections += 1;
        }
        iteration += 1;
        k += 1;

        let mut reheated = false;
        if rejections >= config.reheat_stall {
            reheats += 1;
            k = 0;
            rejections = 0;
            reheated = true;
        }
        trace.push(SaTraceRow { iteration, temperature, current, best, accepted, reheated });
        if reheated {
            match config.stopping {
                Stopping::MaxReheats(limit) if reheats >= limit => break,
                Stopping::NoImprovementOverReheatCycle if !improved_this_cycle => break,
                _ => {}
            }
            improved_this_cycle = false;
        }
    }

    Ok(SaResult {
        design: best_design,
        criterion: best,
        t0,
        t0_flagged,
        reheats,
        iterations: iteration,
        branches,
        wall_time: started.elapsed(),
        trace,
    })
}
