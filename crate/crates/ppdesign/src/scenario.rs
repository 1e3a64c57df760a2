use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::criterion::{CriterionSpec, ModelTag};
use crate::error::{Error, Result};
use crate::master::{MasterObjective, WeightScheme};
use crate::model::ModelSpec;
use crate::prior::{sample_prior, PriorSpec};
use crate::space::{DesignSpace, ForbiddenCombination};

pub const DEFAULT_NUM_DRAWS: usize = 128;

/// Main-effects prior family: for a d-level attribute the level means are
/// evenly spaced from -lambda to +lambda (the omitted last level), and the
/// per-attribute covariance block is equicorrelated with variance kappa² and
/// correlation -1/(d-1), which keeps the implicit last-level part-worth at
/// the same variance as the coded ones.
pub fn build_prior_family(levels: &[usize], lambda: f64, kappa: f64) -> Result<PriorSpec> {
    if lambda < 0.0 || kappa < 0.0 {
        return Err(Error::InvalidPrior("lambda and kappa must be nonnegative".into()));
    }
    let m: usize = levels.iter().map(|d| d - 1).sum();
    let mut mean = DVector::zeros(m);
    let mut cov = DMatrix::zeros(m, m);
    let mut offset = 0;
    for &d in levels {
        let block = d - 1;
        for l in 0..block {
            mean[offset + l] = -lambda + 2.0 * lambda * l as f64 / (d - 1) as f64;
        }
        let rho = -1.0 / (d as f64 - 1.0);
        for r in 0..block {
            for c in 0..block {
                cov[(offset + r, offset + c)] =
                    if r == c { kappa * kappa } else { rho * kappa * kappa };
            }
        }
        offset += block;
    }
    PriorSpec::new(mean, cov)
}

/// Extends a main-effects prior to an interaction model with a naive
/// interaction prior: mean zero, unit variance, independent.
pub fn naive_interaction_prior(
    main: &PriorSpec,
    space: &DesignSpace,
    int_model: &ModelSpec,
) -> Result<PriorSpec> {
    let m_int = int_model.num_params(space);
    extend_prior(main, &vec![0.0; m_int - main.dim()], &vec![1.0; m_int - main.dim()])
}

/// Extends a main-effects prior with explicit per-parameter interaction
/// means and standard deviations (independent block).
pub fn extend_prior(main: &PriorSpec, means: &[f64], sds: &[f64]) -> Result<PriorSpec> {
    if means.len() != sds.len() {
        return Err(Error::InvalidPrior("interaction means and sds differ in length".into()));
    }
    let m0 = main.dim();
    let m = m0 + means.len();
    let mut mean = DVector::zeros(m);
    let mut cov = DMatrix::zeros(m, m);
    mean.rows_mut(0, m0).copy_from(&main.mean);
    cov.view_mut((0, 0), (m0, m0)).copy_from(&main.covariance);
    for (i, (&mu, &sd)) in means.iter().zip(sds).enumerate() {
        mean[m0 + i] = mu;
        cov[(m0 + i, m0 + i)] = sd * sd;
    }
    PriorSpec::new(mean, cov)
}

// ---------------------------------------------------------------------------
// Presets: the 24-set benchmark family and the healthcare case study.
// ---------------------------------------------------------------------------

/// 24 choice sets over attributes with levels (2, 2, 2, 3, 3, 3).
pub fn benchmark_space(profiles_per_set: usize, num_constant: usize) -> DesignSpace {
    DesignSpace::new(24, profiles_per_set, vec![2, 2, 2, 3, 3, 3], num_constant, vec![])
        .expect("benchmark space is valid")
}

/// Interaction sets of the benchmark grid, keyed by the number of
/// interaction parameters: 0 (none), 2 (attribute 1 with the other 2-level
/// attributes), 6 (attribute 1 with the 3-level attributes), 8 (both).
pub fn benchmark_interactions(int_params: usize) -> Result<Vec<(usize, usize)>> {
    match int_params {
        0 => Ok(vec![]),
        2 => Ok(vec![(0, 1), (0, 2)]),
        6 => Ok(vec![(0, 3), (0, 4), (0, 5)]),
        8 => Ok(vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]),
        other => Err(Error::Config(format!(
            "unsupported interaction count {other}; expected 0, 2, 6 or 8"
        ))),
    }
}

/// The robust-design study setting: 24 sets, 2 profiles, 1 constant
/// attribute, interactions of attribute 1 with attributes 2 and 4.
pub fn robust_study_space() -> DesignSpace {
    benchmark_space(2, 1)
}

pub fn robust_study_interactions() -> Vec<(usize, usize)> {
    vec![(0, 1), (0, 3)]
}

/// Healthcare case study: 42 sets, 2 profiles, 7 attributes with levels
/// (2, 3, 3, 3, 3, 3, 5), 3 constant attributes per set, and four excluded
/// attribute-level combinations. The first two exclusions (a curative
/// intervention showing effects only after 20 or 5 years) make the
/// interaction between attributes 1 and 6 inestimable.
pub fn case_study_space() -> DesignSpace {
    DesignSpace::new(
        42,
        2,
        vec![2, 3, 3, 3, 3, 3, 5],
        3,
        vec![
            ForbiddenCombination::new(vec![(1, 2), (6, 1)]),
            ForbiddenCombination::new(vec![(1, 2), (6, 2)]),
            ForbiddenCombination::new(vec![(2, 3), (3, 1)]),
            ForbiddenCombination::new(vec![(4, 3), (7, 1)]),
        ],
    )
    .expect("case-study space is valid")
}

/// Main-effects prior mean of the case study (15 parameters).
pub fn case_study_main_prior() -> PriorSpec {
    let mean = DVector::from_row_slice(&[
        -0.4, -0.5, 0.0, -0.4, 0.1, -0.8, 0.0, -0.5, 0.0, -0.5, 0.2, -0.5, -0.25, 0.0, 0.25,
    ]);
    // block-diagonal covariance: variance 0.09 with correlation -1/(d-1)
    let mut cov = DMatrix::zeros(15, 15);
    let blocks: [usize; 7] = [2, 3, 3, 3, 3, 3, 5];
    let mut offset = 0;
    for d in blocks {
        let b = d - 1;
        let rho = -1.0 / (d as f64 - 1.0);
        for r in 0..b {
            for c in 0..b {
                cov[(offset + r, offset + c)] = if r == c { 0.09 } else { rho * 0.09 };
            }
        }
        offset += b;
    }
    PriorSpec::new(mean, cov).expect("case-study prior is valid")
}

/// All two-way interactions of interest in the case study: attribute 1 with
/// every other attribute except attribute 6 (inestimable by exclusion).
pub fn case_study_interactions() -> Vec<(usize, usize)> {
    vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 6)]
}

/// The interactions retained in the final model: attribute 1 with
/// attributes 4 and 7.
pub fn case_study_true_interactions() -> Vec<(usize, usize)> {
    vec![(0, 3), (0, 6)]
}

/// Estimated interaction effects used as the true-model prior: means and
/// standard deviations for the six parameters of the 1×4 and 1×7
/// interactions, in model column order.
pub fn case_study_true_interaction_table() -> (Vec<f64>, Vec<f64>) {
    (
        vec![-0.0431, 0.0345, 0.012, -0.0676, -0.048, 0.1103],
        vec![0.0378, 0.0394, 0.0528, 0.0524, 0.0558, 0.0578],
    )
}

/// Prior of the 21-parameter final model.
pub fn case_study_true_prior() -> PriorSpec {
    let (means, sds) = case_study_true_interaction_table();
    extend_prior(&case_study_main_prior(), &means, &sds).expect("true prior is valid")
}

/// Three survey groups of 14 choice sets each (0-based set indices).
pub fn case_study_groups() -> Vec<Vec<usize>> {
    (0..3).map(|g| (g * 14..(g + 1) * 14).collect()).collect()
}

// ---------------------------------------------------------------------------
// JSON run configuration.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum PriorConfig {
    Family { lambda: f64, kappa: f64 },
    Explicit { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum InteractionPriorConfig {
    Naive,
    Explicit { mean: Vec<f64>, sd: Vec<f64> },
}

impl Default for InteractionPriorConfig {
    fn default() -> Self {
        InteractionPriorConfig::Naive
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum StoppingConfig {
    MaxRuntimeSecs(f64),
    MaxReheats(usize),
    NoImprovementOverReheatCycle,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum MasterObjectiveConfig {
    DOptimal,
    VarianceBalanceI,
    VarianceBalanceIi,
}

impl MasterObjectiveConfig {
    pub fn to_objective(&self) -> MasterObjective {
        match self {
            MasterObjectiveConfig::DOptimal => MasterObjective::DOptimal,
            MasterObjectiveConfig::VarianceBalanceI => MasterObjective::AWeighted(WeightScheme::I),
            MasterObjectiveConfig::VarianceBalanceIi => {
                MasterObjective::AWeighted(WeightScheme::II)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SaOptimizerConfig {
    #[serde(default)]
    pub reheat_stall: Option<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub random_walk_steps: Option<usize>,
    #[serde(default)]
    pub stopping: Option<StoppingConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CeOptimizerConfig {
    #[serde(default)]
    pub num_starts: Option<usize>,
    #[serde(default)]
    pub max_cycles: Option<usize>,
    #[serde(default)]
    pub master_objective: Option<MasterObjectiveConfig>,
    #[serde(default)]
    pub master_restarts: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sa(SaOptimizerConfig),
    Ce(CeOptimizerConfig),
}

fn default_num_draws() -> usize {
    DEFAULT_NUM_DRAWS
}

/// One fully self-describing run: the design space, the modeled
/// interactions (1-based attribute indices in the file), the prior, the
/// objective, and the optimizer.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub space: DesignSpace,
    /// 1-based attribute index pairs.
    #[serde(default)]
    pub interactions: Vec<(usize, usize)>,
    /// "main", "interaction", or "robust".
    pub criterion: String,
    pub prior: PriorConfig,
    #[serde(default)]
    pub interaction_prior: InteractionPriorConfig,
    #[serde(default = "default_num_draws")]
    pub num_draws: usize,
    #[serde(default)]
    pub seed: u64,
    /// 1-based choice-set indices; defaults to a single group of all sets.
    #[serde(default)]
    pub survey_groups: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
}

/// A resolved scenario: validated space, compiled models, frozen draws.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub space: DesignSpace,
    pub main_model: ModelSpec,
    pub int_model: Option<ModelSpec>,
    pub main_prior: PriorSpec,
    pub int_prior: Option<PriorSpec>,
    pub criterion: CriterionSpec,
    pub tag: ModelTag,
    pub num_draws: usize,
    pub seed: u64,
    /// 0-based survey groups.
    pub groups: Vec<Vec<usize>>,
}

impl Scenario {
    /// The model whose parameter count scales efficiency comparisons: the
    /// interaction model when one is configured, otherwise main effects.
    pub fn eval_model(&self) -> &ModelSpec {
        self.int_model.as_ref().unwrap_or(&self.main_model)
    }
}

pub fn parse_criterion_tag(name: &str) -> Result<ModelTag> {
    match name {
        "main" => Ok(ModelTag::Main),
        "interaction" => Ok(ModelTag::Interaction),
        "robust" => Ok(ModelTag::Robust),
        other => Err(Error::Config(format!(
            "unknown criterion \"{other}\"; expected \"main\", \"interaction\" or \"robust\""
        ))),
    }
}

fn build_main_prior(config: &PriorConfig, space: &DesignSpace, m_main: usize) -> Result<PriorSpec> {
    let prior = match config {
        PriorConfig::Family { lambda, kappa } => {
            build_prior_family(&space.attribute_levels, *lambda, *kappa)?
        }
        PriorConfig::Explicit { mean, covariance } => {
            let m = mean.len();
            if covariance.len() != m || covariance.iter().any(|row| row.len() != m) {
                return Err(Error::InvalidPrior(format!(
                    "explicit covariance must be {m}x{m}"
                )));
            }
            let cov = DMatrix::from_fn(m, m, |r, c| covariance[r][c]);
            PriorSpec::new(DVector::from_row_slice(mean), cov)?
        }
    };
    if prior.dim() != m_main {
        return Err(Error::InvalidPrior(format!(
            "main-effects prior has {} parameters, model needs {m_main}",
            prior.dim()
        )));
    }
    Ok(prior)
}

/// Validates the config and freezes the prior draws. Draw seeds derive from
/// the scenario seed, so identical configs give identical criteria (common
/// random numbers across everything compared under one seed).
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.space.validate()?;
    let space = config.space.clone();
    let tag = parse_criterion_tag(&config.criterion)?;
    if config.num_draws == 0 {
        return Err(Error::Config("num_draws must be at least 1".into()));
    }

    let main_model = ModelSpec::main_effects();
    let pairs0: Vec<(usize, usize)> = config
        .interactions
        .iter()
        .map(|&(a, b)| {
            if a == 0 || b == 0 {
                Err(Error::Config(format!(
                    "interaction ({a}, {b}) uses 0; attribute indices are 1-based"
                )))
            } else {
                Ok((a - 1, b - 1))
            }
        })
        .collect::<Result<_>>()?;
    let int_model = if pairs0.is_empty() {
        None
    } else {
        Some(ModelSpec::with_interactions(pairs0, &space)?)
    };
    if matches!(tag, ModelTag::Interaction | ModelTag::Robust) && int_model.is_none() {
        return Err(Error::Config(format!(
            "criterion \"{}\" needs at least one interaction",
            config.criterion
        )));
    }

    let m_main = main_model.num_params(&space);
    let main_prior = build_main_prior(&config.prior, &space, m_main)?;
    let int_prior = match &int_model {
        None => None,
        Some(model) => Some(match &config.interaction_prior {
            InteractionPriorConfig::Naive => naive_interaction_prior(&main_prior, &space, model)?,
            InteractionPriorConfig::Explicit { mean, sd } => {
                let expected = model.num_params(&space) - m_main;
                if mean.len() != expected {
                    return Err(Error::InvalidPrior(format!(
                        "explicit interaction prior has {} entries, model needs {expected}",
                        mean.len()
                    )));
                }
                extend_prior(&main_prior, mean, sd)?
            }
        }),
    };

    let main_draws = sample_prior(&main_prior, config.num_draws, config.seed)?;
    let criterion = match tag {
        ModelTag::Main => CriterionSpec::single(ModelTag::Main, main_model.clone(), main_draws),
        ModelTag::Interaction => {
            let model = int_model.clone().unwrap();
            let draws =
                sample_prior(int_prior.as_ref().unwrap(), config.num_draws, config.seed)?;
            CriterionSpec::single(ModelTag::Interaction, model, draws)
        }
        ModelTag::Robust => {
            let model = int_model.clone().unwrap();
            let int_draws =
                sample_prior(int_prior.as_ref().unwrap(), config.num_draws, config.seed)?;
            CriterionSpec::robust(
                main_model.clone(),
                main_draws,
                model,
                int_draws,
                &space,
                (1.0, 1.0),
            )?
        }
    };

    let groups = match &config.survey_groups {
        None => vec![(0..space.num_choice_sets).collect()],
        Some(groups) => {
            let converted: Vec<Vec<usize>> = groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|&s| {
                            if s == 0 || s > space.num_choice_sets {
                                Err(Error::Config(format!(
                                    "survey group references choice set {s}; sets are 1..={}",
                                    space.num_choice_sets
                                )))
                            } else {
                                Ok(s - 1)
                            }
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            converted
        }
    };

    Ok(Scenario {
        space,
        main_model,
        int_model,
        main_prior,
        int_prior,
        criterion,
        tag,
        num_draws: config.num_draws,
        seed: config.seed,
        groups,
    })
}

/// The config with every default the user did not set filled in, for the
/// resolved-config echo in artifacts.
pub fn resolved_config(config: &ScenarioConfig) -> ScenarioConfig {
    let mut resolved = config.clone();
    if resolved.survey_groups.is_none() {
        resolved.survey_groups =
            Some(vec![(1..=config.space.num_choice_sets).collect()]);
    }
    if resolved.optimizer.is_none() {
        resolved.optimizer = Some(OptimizerConfig::Sa(SaOptimizerConfig {
            reheat_stall: Some(1000),
            gamma: None,
            random_walk_steps: Some(100),
            stopping: Some(StoppingConfig::NoImprovementOverReheatCycle),
        }));
    }
    resolved
}
