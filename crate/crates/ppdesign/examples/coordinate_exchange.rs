//! The two-stage coordinate-exchange baseline.
//!
//! Stage one fixes a master design (which attributes vary in which set);
//! stage two runs a restricted coordinate exchange from several random
//! starts, never changing the constant pattern. The recorded wall-clock time
//! is what the annealer gets as a matched-runtime budget in benchmarks.
//!
//! Run with: `cargo run --release --example coordinate_exchange`

use ppdesign::ce::{two_stage_ce, CeConfig};
use ppdesign::criterion::{CriterionSpec, ModelTag};
use ppdesign::master::{MasterObjective, WeightScheme};
use ppdesign::model::ModelSpec;
use ppdesign::prior::sample_prior;
use ppdesign::scenario::build_prior_family;
use ppdesign::space::DesignSpace;

fn main() -> ppdesign::Result<()> {
    let space = DesignSpace::new(12, 2, vec![2, 2, 3, 3], 1, vec![])?;
    let model = ModelSpec::main_effects();
    let prior = build_prior_family(&space.attribute_levels, 1.0, 0.5)?;
    let draws = sample_prior(&prior, 32, 4)?;
    let spec = CriterionSpec::single(ModelTag::Main, model, draws);

    let config = CeConfig { num_starts: 10, max_cycles: None, seed: 9 };
    let result = two_stage_ce(
        &space,
        &spec,
        MasterObjective::AWeighted(WeightScheme::II),
        30,
        &config,
    )?;

    println!("master constant counts: {:?}", result.master.constant_counts());
    for start in &result.per_start {
        println!(
            "start {:2}: converged to {:.4} after {} cycles",
            start.start, start.criterion, start.cycles
        );
    }
    println!(
        "best of {} starts: {:.4} in {:.2}s",
        config.num_starts,
        result.criterion,
        result.wall_time.as_secs_f64()
    );
    Ok(())
}
