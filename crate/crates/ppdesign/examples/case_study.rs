//! The bundled healthcare case study and benchmark presets.
//!
//! `scenario` ships two ready-made setups: a 24-set benchmark family used
//! for optimizer comparisons, and a 42-set healthcare study with seven
//! attributes, three constant attributes per set, forbidden combinations,
//! and estimated interaction effects for a 21-parameter final model.
//!
//! Run with: `cargo run --release --example case_study`

use ppdesign::criterion::{CriterionSpec, ModelTag};
use ppdesign::model::ModelSpec;
use ppdesign::prior::sample_prior;
use ppdesign::sa::{anneal, SaConfig, Stopping};
use ppdesign::scenario::{
    case_study_groups, case_study_main_prior, case_study_space, case_study_true_interactions,
    case_study_true_prior,
};

fn main() -> ppdesign::Result<()> {
    let space = case_study_space();
    println!(
        "case study: {} sets, levels {:?}, {} constant attributes, {} forbidden combinations",
        space.num_choice_sets,
        space.attribute_levels,
        space.num_constant_attributes,
        space.forbidden_combinations.len(),
    );
    println!(
        "survey groups: {:?} sets each",
        case_study_groups().iter().map(Vec::len).collect::<Vec<_>>()
    );

    let main_prior = case_study_main_prior();
    let true_prior = case_study_true_prior();
    println!(
        "main-effects prior: {} parameters; final model: {} parameters",
        main_prior.dim(),
        true_prior.dim()
    );

    // A quick main-effects design for the study (a production run would use
    // more draws and the adaptive stopping rule).
    let spec = CriterionSpec::single(
        ModelTag::Main,
        ModelSpec::main_effects(),
        sample_prior(&main_prior, 32, 1)?,
    );
    let config = SaConfig {
        reheat_stall: 300,
        gamma: None,
        random_walk_steps: 50,
        stopping: Stopping::MaxReheats(2),
        seed: 8,
    };
    let result = anneal(&space, &spec, &config)?;
    println!(
        "main-effects design criterion: {:.4} ({} iterations, {:.2}s)",
        result.criterion,
        result.iterations,
        result.wall_time.as_secs_f64()
    );

    let true_model = ModelSpec::with_interactions(case_study_true_interactions(), &space)?;
    println!(
        "final model interactions {:?}, {} parameters",
        true_model.interactions(),
        true_model.num_params(&space)
    );
    Ok(())
}
