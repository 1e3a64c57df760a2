//! A matched-runtime race: coordinate exchange vs simulated annealing.
//!
//! The two-stage coordinate-exchange baseline runs to convergence first; its
//! wall-clock time then becomes the annealer's runtime budget, so both
//! optimizers get exactly the same computational allowance. The race reports
//! the CE design's relative D_B-efficiency against the SA design (values
//! below 1 mean annealing won).
//!
//! Run with: `cargo run --release --example matched_runtime_race`

use ppdesign::runner::race;
use ppdesign::scenario::{CeOptimizerConfig, PriorConfig, ScenarioConfig};
use ppdesign::space::DesignSpace;

fn main() -> ppdesign::Result<()> {
    let scenario = ScenarioConfig {
        space: DesignSpace::new(16, 2, vec![2, 2, 3, 3, 3], 1, vec![])?,
        interactions: vec![(1, 3)], // 1-based attribute pairs
        criterion: "interaction".into(),
        prior: PriorConfig::Family { lambda: 1.0, kappa: 1.0 },
        interaction_prior: Default::default(),
        num_draws: 32,
        seed: 0,
        survey_groups: None,
        optimizer: None,
    };
    let ce = CeOptimizerConfig {
        num_starts: Some(8),
        max_cycles: None,
        master_objective: None, // variance balance II
        master_restarts: Some(30),
    };

    for seed in [1u64, 2, 3] {
        let (row, _ce_design, _sa_design) = race(&scenario, &ce, seed)?;
        println!(
            "seed {seed}: CE {:.4} vs SA {:.4} in {:.2}s  ->  CE efficiency {:.4}",
            row.ce_db, row.sa_db, row.ce_runtime_s, row.efficiency
        );
    }
    Ok(())
}
