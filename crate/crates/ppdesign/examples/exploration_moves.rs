//! The constraint-preserving exploration rule, step by step.
//!
//! Every annealing move rewrites one choice set so that the number of
//! constant attributes never changes: constant attributes whose level the
//! criterion cannot see are converted to varying ones, dependent constants
//! either re-randomize their shared level (with probability gamma) or
//! convert, and a varying coordinate that happens to collapse to constant
//! triggers a repair that releases another constant attribute.
//!
//! Run with: `cargo run --example exploration_moves`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ppdesign::design::{random_design, validate_design};
use ppdesign::sa::{level_independent, propose_move, Branch};
use ppdesign::space::DesignSpace;

fn main() -> ppdesign::Result<()> {
    let space = DesignSpace::new(10, 2, vec![2, 2, 3, 3], 1, vec![])?;
    // Attribute 1 interacts with attribute 3, so a constant attribute 1 is
    // only criterion-independent in sets where attribute 3 is constant too.
    let pairs = vec![(0, 2)];
    let gamma = space.num_constant_attributes as f64 / space.num_attributes() as f64;

    let mut design = random_design(&space, 21)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 5];
    for step in 0..2000 {
        let mv = propose_move(&design, &space, &pairs, gamma, &mut rng)?;
        if step < 6 {
            let profiles = design.set_profiles(mv.set);
            let constants: Vec<String> = design
                .constant_attributes(mv.set)
                .iter()
                .map(|&a| {
                    let indep = level_independent(&profiles, a, &pairs);
                    format!("{}{}", a + 1, if indep { " (independent)" } else { "" })
                })
                .collect();
            println!(
                "step {step}: set {} had constants [{}]  ->  branch {:?}",
                mv.set + 1,
                constants.join(", "),
                mv.branch
            );
        }
        counts[match mv.branch {
            Branch::IndependentConvert => 0,
            Branch::GammaLevel => 1,
            Branch::DependentConvert => 2,
            Branch::Varying => 3,
            Branch::VaryingRepair => 4,
        }] += 1;
        for (j, profile) in mv.profiles.iter().enumerate() {
            for (i, &level) in profile.iter().enumerate() {
                design.set_level(mv.set, j, i, level);
            }
        }
        assert!(validate_design(&design, &space).is_valid(), "move broke the design");
    }

    println!("\nbranch frequencies over 2000 moves (gamma = {gamma:.2}):");
    for (name, count) in [
        ("independent convert", counts[0]),
        ("gamma level", counts[1]),
        ("dependent convert", counts[2]),
        ("varying", counts[3]),
        ("varying + repair", counts[4]),
    ] {
        println!("  {name:20} {count}");
    }
    println!("every intermediate design stayed valid.");
    Ok(())
}
