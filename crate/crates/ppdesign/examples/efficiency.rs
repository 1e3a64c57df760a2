//! Comparing designs by relative Bayesian D-efficiency.
//!
//! The efficiency of X against a reference X* is
//! exp((D_B(X) - D_B(X*)) / m), with both criteria averaged over the same
//! frozen prior draws; a value of 0.95 means X needs about 5% more
//! respondents than X* for the same precision.
//!
//! Run with: `cargo run --release --example efficiency`

use ppdesign::criterion::{relative_db_efficiency, CriterionSpec, ModelTag};
use ppdesign::design::random_design;
use ppdesign::model::ModelSpec;
use ppdesign::prior::sample_prior;
use ppdesign::sa::{anneal, SaConfig, Stopping};
use ppdesign::scenario::build_prior_family;
use ppdesign::space::DesignSpace;

fn main() -> ppdesign::Result<()> {
    let space = DesignSpace::new(12, 2, vec![2, 3, 3, 3], 1, vec![])?;
    let model = ModelSpec::main_effects();
    let prior = build_prior_family(&space.attribute_levels, 1.0, 0.5)?;
    let draws = sample_prior(&prior, 64, 2)?;

    let spec = CriterionSpec::single(ModelTag::Main, model.clone(), draws.clone());
    let config = SaConfig {
        reheat_stall: 500,
        gamma: None,
        random_walk_steps: 100,
        stopping: Stopping::MaxReheats(3),
        seed: 5,
    };
    let optimized = anneal(&space, &spec, &config)?.design;

    for seed in [100, 101, 102] {
        let candidate = random_design(&space, seed)?;
        let eff = relative_db_efficiency(&candidate, &optimized, &model, &space, &draws);
        println!(
            "random design (seed {seed}): D_B {:.4} vs {:.4}  ->  efficiency {:.4}",
            eff.db_x, eff.db_ref, eff.value
        );
    }

    let self_eff = relative_db_efficiency(&optimized, &optimized, &model, &space, &draws);
    println!("optimized design against itself: efficiency {:.4}", self_eff.value);
    Ok(())
}
