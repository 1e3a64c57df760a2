use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nalgebra::DVector;

use crate::ce::{two_stage_ce, CeConfig, TwoStageResult};
use crate::criterion::{relative_db_efficiency, ModelTag};
use crate::design::{
    design_from_csv, design_to_csv, validate_design, Design, DesignDocument,
};
use crate::error::{Error, Result};
use crate::master::{master_to_csv, MasterObjective, WeightScheme};
use crate::model::ModelSpec;
use crate::prior::PriorDraws;
use crate::sa::{anneal, trace_to_csv, SaConfig, SaResult, Stopping};
use crate::scenario::{
    build_scenario, resolved_config, CeOptimizerConfig, OptimizerConfig, SaOptimizerConfig,
    Scenario, ScenarioConfig, StoppingConfig,
};
use crate::simulation::{compare_designs, squared_errors_to_csv, SimulationPlan};

/// Command-line overrides applied on top of any config file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub num_draws: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(draws) = self.num_draws {
            config.num_draws = draws;
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_design(path: &Path) -> Result<Design> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let doc: DesignDocument = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        doc.to_design()
    } else {
        design_from_csv(&text)
    }
}

/// Draws used for efficiency reporting: those of the criterion part with the
/// largest model (the interaction part of a robust criterion).
fn eval_draws(scenario: &Scenario) -> &PriorDraws {
    &scenario
        .criterion
        .parts
        .last()
        .expect("criterion has at least one part")
        .draws
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub value: f64,
    pub part_db: Vec<f64>,
    pub num_params: usize,
    pub num_draws: usize,
    pub seed: u64,
}

fn tag_name(tag: ModelTag) -> &'static str {
    match tag {
        ModelTag::Main => "main",
        ModelTag::Interaction => "interaction",
        ModelTag::Robust => "robust",
    }
}

enum OptimizerRun {
    Sa(SaResult),
    Ce(TwoStageResult),
}

fn resolve_sa_config(config: &SaOptimizerConfig, seed: u64) -> Result<SaConfig> {
    let stopping = match config
        .stopping
        .clone()
        .unwrap_or(StoppingConfig::NoImprovementOverReheatCycle)
    {
        StoppingConfig::MaxRuntimeSecs(secs) => {
            if !(secs > 0.0) {
                return Err(Error::Config("max_runtime_secs must be positive".into()));
            }
            Stopping::MaxRuntime(Duration::from_secs_f64(secs))
        }
        StoppingConfig::MaxReheats(n) => Stopping::MaxReheats(n),
        StoppingConfig::NoImprovementOverReheatCycle => Stopping::NoImprovementOverReheatCycle,
    };
    let resolved = SaConfig {
        reheat_stall: config.reheat_stall.unwrap_or(1000),
        gamma: config.gamma,
        random_walk_steps: config.random_walk_steps.unwrap_or(100),
        stopping,
        seed,
    };
    resolved.validate()?;
    Ok(resolved)
}

fn resolve_ce_config(config: &CeOptimizerConfig, seed: u64) -> (CeConfig, MasterObjective, usize) {
    let ce = CeConfig {
        num_starts: config.num_starts.unwrap_or(30),
        max_cycles: config.max_cycles,
        seed,
    };
    let objective = config
        .master_objective
        .as_ref()
        .map(|o| o.to_objective())
        .unwrap_or(MasterObjective::AWeighted(WeightScheme::II));
    (ce, objective, config.master_restarts.unwrap_or(50))
}

/// `generate`: optimize one design for a scenario and write the design, its
/// criterion report, the optimizer trace, and the resolved config.
pub fn run_generate(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<()> {
    let mut config: ScenarioConfig = read_json(config_path)?;
    overrides.apply(&mut config);
    let scenario = build_scenario(&config)?;
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("resolved_config.json"), &resolved_config(&config))?;

    let optimizer = config.optimizer.clone().unwrap_or(OptimizerConfig::Sa(SaOptimizerConfig {
        reheat_stall: None,
        gamma: None,
        random_walk_steps: None,
        stopping: None,
    }));
    let run = match &optimizer {
        OptimizerConfig::Sa(sa_cfg) => {
            let resolved = resolve_sa_config(sa_cfg, config.seed)?;
            OptimizerRun::Sa(anneal(&scenario.space, &scenario.criterion, &resolved)?)
        }
        OptimizerConfig::Ce(ce_cfg) => {
            let (resolved, objective, restarts) = resolve_ce_config(ce_cfg, config.seed);
            OptimizerRun::Ce(two_stage_ce(
                &scenario.space,
                &scenario.criterion,
                objective,
                restarts,
                &resolved,
            )?)
        }
    };

    let (design, value) = match &run {
        OptimizerRun::Sa(r) => (&r.design, r.criterion),
        OptimizerRun::Ce(r) => (&r.design, r.criterion),
    };
    let report = validate_design(design, &scenario.space);
    if !report.is_valid() {
        return Err(Error::Numerical(format!(
            "optimizer produced an invalid design: {:?}",
            report.violations
        )));
    }

    fs::write(out_dir.join("design.csv"), design_to_csv(design))?;
    write_json(
        &out_dir.join("design.json"),
        &DesignDocument::from_design(design, &scenario.space),
    )?;
    write_json(
        &out_dir.join("criterion_report.json"),
        &CriterionReport {
            criterion: tag_name(scenario.tag).to_string(),
            value,
            part_db: scenario.criterion.part_values(design, &scenario.space),
            num_params: scenario.eval_model().num_params(&scenario.space),
            num_draws: config.num_draws,
            seed: config.seed,
        },
    )?;
    match &run {
        OptimizerRun::Sa(r) => {
            fs::write(out_dir.join("trace.csv"), trace_to_csv(&r.trace))?;
        }
        OptimizerRun::Ce(r) => {
            let mut trace = String::from("start,cycle,criterion,elapsed_ms\n");
            for row in &r.trace {
                trace.push_str(&format!(
                    "{},{},{},{}\n",
                    row.start, row.cycle, row.criterion, row.elapsed_ms
                ));
            }
            fs::write(out_dir.join("trace.csv"), trace)?;
            fs::write(out_dir.join("master.csv"), master_to_csv(&r.master))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DesignRef {
    pub id: String,
    pub path: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvaluateConfig {
    pub scenario: ScenarioConfig,
    pub designs: Vec<DesignRef>,
    /// id of the reference design (the denominator of the efficiency).
    pub reference: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct EfficiencyReport {
    pub design_id: String,
    pub reference_id: String,
    pub model_tag: String,
    pub m: usize,
    pub db_x: f64,
    pub db_ref: f64,
    pub efficiency: f64,
    pub num_draws: usize,
    pub seed: u64,
}

fn load_designs(refs: &[DesignRef], base: &Path, space_sets: usize) -> Result<Vec<(String, Design)>> {
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let mut path = PathBuf::from(&r.path);
        if path.is_relative() {
            path = base.join(path);
        }
        let design = load_design(&path)?;
        if design.num_sets() != space_sets {
            return Err(Error::InvalidInput(format!(
                "design \"{}\" has {} choice sets, scenario has {space_sets}",
                r.id,
                design.num_sets()
            )));
        }
        out.push((r.id.clone(), design));
    }
    Ok(out)
}

/// `evaluate`: relative D_B-efficiency of each design against a reference
/// design, on shared prior draws.
pub fn run_evaluate(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<()> {
    let mut config: EvaluateConfig = read_json(config_path)?;
    overrides.apply(&mut config.scenario);
    let scenario = build_scenario(&config.scenario)?;
    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let designs = load_designs(&config.designs, &base, scenario.space.num_choice_sets)?;
    for (id, design) in &designs {
        let report = validate_design(design, &scenario.space);
        if !report.is_valid() {
            return Err(Error::InvalidInput(format!(
                "design \"{id}\" violates the design space: {:?}",
                report.violations
            )));
        }
    }
    let reference = designs
        .iter()
        .find(|(id, _)| *id == config.reference)
        .map(|(_, d)| d.clone())
        .ok_or_else(|| {
            Error::Config(format!("reference \"{}\" is not among the designs", config.reference))
        })?;

    let draws = eval_draws(&scenario);
    let model = scenario.eval_model();
    let reports: Vec<EfficiencyReport> = designs
        .iter()
        .map(|(id, design)| {
            let eff = relative_db_efficiency(design, &reference, model, &scenario.space, draws);
            EfficiencyReport {
                design_id: id.clone(),
                reference_id: config.reference.clone(),
                model_tag: tag_name(scenario.tag).to_string(),
                m: eff.m,
                db_x: eff.db_x,
                db_ref: eff.db_ref,
                efficiency: eff.value,
                num_draws: config.scenario.num_draws,
                seed: config.scenario.seed,
            }
        })
        .collect();

    fs::create_dir_all(out_dir)?;
    let mut resolved = config.clone();
    resolved.scenario = resolved_config(&config.scenario);
    write_json(&out_dir.join("resolved_config.json"), &resolved)?;
    write_json(&out_dir.join("efficiency_report.json"), &reports)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SimulateConfig {
    pub scenario: ScenarioConfig,
    pub designs: Vec<DesignRef>,
    /// Interactions of the data-generating model (1-based attribute pairs).
    #[serde(default)]
    pub true_interactions: Vec<(usize, usize)>,
    pub true_beta: Vec<f64>,
    pub num_respondents: usize,
    #[serde(default = "default_replications")]
    pub num_replications: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_replications() -> usize {
    500
}

/// `simulate`: respondent simulation + MNL refits + EMSE comparison across
/// designs with paired replication seeds.
pub fn run_simulate(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<()> {
    let mut config: SimulateConfig = read_json(config_path)?;
    overrides.apply(&mut config.scenario);
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    let scenario = build_scenario(&config.scenario)?;
    let base = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let designs = load_designs(&config.designs, &base, scenario.space.num_choice_sets)?;

    let pairs: Vec<(usize, usize)> = config
        .true_interactions
        .iter()
        .map(|&(a, b)| {
            if a == 0 || b == 0 {
                Err(Error::Config("true_interactions indices are 1-based".into()))
            } else {
                Ok((a - 1, b - 1))
            }
        })
        .collect::<Result<_>>()?;
    let true_model = if pairs.is_empty() {
        ModelSpec::main_effects()
    } else {
        ModelSpec::with_interactions(pairs, &scenario.space)?
    };
    let m_true = true_model.num_params(&scenario.space);
    if config.true_beta.len() != m_true {
        return Err(Error::Config(format!(
            "true_beta has {} entries, the true model needs {m_true}",
            config.true_beta.len()
        )));
    }

    let plan = SimulationPlan {
        groups: scenario.groups.clone(),
        num_respondents: config.num_respondents,
        true_beta: DVector::from_row_slice(&config.true_beta),
        num_replications: config.num_replications,
        seed: config.seed,
    };
    let report = compare_designs(&designs, &scenario.space, &true_model, &plan)?;

    fs::create_dir_all(out_dir)?;
    let mut resolved = config.clone();
    resolved.scenario = resolved_config(&config.scenario);
    write_json(&out_dir.join("resolved_config.json"), &resolved)?;
    write_json(&out_dir.join("emse_summary.json"), &report.rows)?;
    fs::write(
        out_dir.join("squared_errors.csv"),
        squared_errors_to_csv(&report.per_replication),
    )?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchmarkConfig {
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub ce: Option<CeOptimizerConfig>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_replicates() -> usize {
    1
}

#[derive(Clone, Debug, Serialize)]
pub struct RaceRow {
    pub scenario: usize,
    pub replicate: usize,
    pub ce_db: f64,
    pub sa_db: f64,
    /// relative D_B-efficiency of the CE design against the SA design
    pub efficiency: f64,
    pub ce_runtime_s: f64,
    pub sa_runtime_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioSummary {
    pub scenario: usize,
    pub median_efficiency: f64,
    pub mean_efficiency: f64,
    pub mean_ce_runtime_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkSummary {
    pub per_scenario: Vec<ScenarioSummary>,
    pub overall_median_efficiency: f64,
    pub overall_mean_efficiency: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// One CE-vs-SA race: CE runs to convergence, its wall-clock time becomes
/// the annealer's runtime budget, and the CE design's relative
/// D_B-efficiency against the SA design is reported on shared draws.
pub fn race(
    config: &ScenarioConfig,
    ce_config: &CeOptimizerConfig,
    seed: u64,
) -> Result<(RaceRow, Design, Design)> {
    let mut config = config.clone();
    config.seed = seed;
    let scenario = build_scenario(&config)?;
    let (ce_resolved, objective, restarts) = resolve_ce_config(ce_config, seed);
    let ce_result =
        two_stage_ce(&scenario.space, &scenario.criterion, objective, restarts, &ce_resolved)?;

    let sa_config = SaConfig {
        reheat_stall: 1000,
        gamma: None,
        random_walk_steps: 100,
        stopping: Stopping::MaxRuntime(ce_result.wall_time),
        seed,
    };
    let sa_result = anneal(&scenario.space, &scenario.criterion, &sa_config)?;

    let draws = eval_draws(&scenario);
    let eff = relative_db_efficiency(
        &ce_result.design,
        &sa_result.design,
        scenario.eval_model(),
        &scenario.space,
        draws,
    );
    Ok((
        RaceRow {
            scenario: 0,
            replicate: 0,
            ce_db: eff.db_x,
            sa_db: eff.db_ref,
            efficiency: eff.value,
            ce_runtime_s: ce_result.wall_time.as_secs_f64(),
            sa_runtime_s: sa_result.wall_time.as_secs_f64(),
        },
        ce_result.design,
        sa_result.design,
    ))
}

/// `benchmark`: matched-runtime CE-vs-SA races over a scenario grid.
pub fn run_benchmark(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<()> {
    let mut config: BenchmarkConfig = read_json(config_path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(draws) = overrides.num_draws {
        for s in &mut config.scenarios {
            s.num_draws = draws;
        }
    }
    if config.scenarios.is_empty() {
        return Err(Error::Config("benchmark needs at least one scenario".into()));
    }
    if config.replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    let ce_config = config.ce.clone().unwrap_or(CeOptimizerConfig {
        num_starts: None,
        max_cycles: None,
        master_objective: None,
        master_restarts: None,
    });

    let mut rows = Vec::new();
    for (idx, scenario_config) in config.scenarios.iter().enumerate() {
        for rep in 0..config.replicates {
            let seed = config
                .seed
                .wrapping_add(1_000_003u64.wrapping_mul(idx as u64))
                .wrapping_add(rep as u64);
            let (mut row, _, _) = race(scenario_config, &ce_config, seed)?;
            row.scenario = idx;
            row.replicate = rep;
            rows.push(row);
        }
    }

    let mut per_scenario = Vec::new();
    for idx in 0..config.scenarios.len() {
        let effs: Vec<f64> =
            rows.iter().filter(|r| r.scenario == idx).map(|r| r.efficiency).collect();
        let runtimes: Vec<f64> =
            rows.iter().filter(|r| r.scenario == idx).map(|r| r.ce_runtime_s).collect();
        let mut sorted = effs.clone();
        per_scenario.push(ScenarioSummary {
            scenario: idx,
            median_efficiency: median(&mut sorted),
            mean_efficiency: effs.iter().sum::<f64>() / effs.len() as f64,
            mean_ce_runtime_s: runtimes.iter().sum::<f64>() / runtimes.len() as f64,
        });
    }
    let all: Vec<f64> = rows.iter().map(|r| r.efficiency).collect();
    let mut sorted = all.clone();
    let summary = BenchmarkSummary {
        per_scenario,
        overall_median_efficiency: median(&mut sorted),
        overall_mean_efficiency: all.iter().sum::<f64>() / all.len() as f64,
    };

    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("resolved_config.json"), &config)?;
    let mut csv =
        String::from("scenario,replicate,ce_db,sa_db,efficiency,ce_runtime_s,sa_runtime_s\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.scenario,
            row.replicate,
            row.ce_db,
            row.sa_db,
            row.efficiency,
            row.ce_runtime_s,
            row.sa_runtime_s
        ));
    }
    fs::write(out_dir.join("benchmark.csv"), csv)?;
    write_json(&out_dir.join("benchmark_summary.json"), &summary)?;
    Ok(())
}
