//! Model-robust designs via the composite criterion.
//!
//! A design optimized for the main-effects model alone loses efficiency if
//! interactions turn out to matter, and vice versa. The composite criterion
//! averages the per-parameter Bayesian D-criteria of both models, yielding a
//! design that hedges across them.
//!
//! Run with: `cargo run --release --example robust_design`

use ppdesign::criterion::{relative_db_efficiency, CriterionSpec, ModelTag};
use ppdesign::model::ModelSpec;
use ppdesign::prior::sample_prior;
use ppdesign::sa::{anneal, SaConfig, Stopping};
use ppdesign::scenario::{build_prior_family, extend_prior, naive_interaction_prior};
use ppdesign::space::DesignSpace;

fn main() -> ppdesign::Result<()> {
    let space = DesignSpace::new(16, 2, vec![2, 2, 3, 3], 1, vec![])?;
    let main_model = ModelSpec::main_effects();
    let int_model = ModelSpec::with_interactions(vec![(0, 2)], &space)?;
    let main_prior = build_prior_family(&space.attribute_levels, 1.0, 0.5)?;
    let int_prior = naive_interaction_prior(&main_prior, &space, &int_model)?;

    let num_draws = 64;
    let main_draws = sample_prior(&main_prior, num_draws, 10)?;
    let int_draws = sample_prior(&int_prior, num_draws, 10)?;

    let specs = [
        ("main-only", CriterionSpec::single(ModelTag::Main, main_model.clone(), main_draws.clone())),
        ("interaction", CriterionSpec::single(ModelTag::Interaction, int_model.clone(), int_draws.clone())),
        (
            "robust",
            CriterionSpec::robust(
                main_model.clone(),
                main_draws,
                int_model.clone(),
                int_draws,
                &space,
                (1.0, 1.0),
            )?,
        ),
    ];

    let config = SaConfig {
        reheat_stall: 500,
        gamma: None,
        random_walk_steps: 100,
        stopping: Stopping::MaxReheats(3),
        seed: 17,
    };
    let designs: Vec<_> = specs
        .iter()
        .map(|(name, spec)| anneal(&space, spec, &config).map(|r| (*name, r.design)))
        .collect::<ppdesign::Result<_>>()?;

    // Suppose the interaction is real with effect 0.4: how much efficiency
    // does each design retain? The truth is scored on fresh draws, not the
    // ones the optimizers saw.
    let extra = int_model.num_params(&space) - main_prior.dim();
    let true_prior = extend_prior(&main_prior, &vec![0.4; extra], &vec![0.0; extra])?;
    let eval_draws = sample_prior(&true_prior, 256, 999)?;
    let benchmark = anneal(
        &space,
        &CriterionSpec::single(
            ModelTag::Interaction,
            int_model.clone(),
            sample_prior(&true_prior, num_draws, 20)?,
        ),
        &config,
    )?;

    println!("efficiency under an interaction truth (effect 0.4):");
    for (name, design) in &designs {
        let eff =
            relative_db_efficiency(design, &benchmark.design, &int_model, &space, &eval_draws);
        println!("  {name:12} {:.4}", eff.value);
    }
    Ok(())
}
