//! Describing a partial-profile design space, drawing a random conforming
//! design, and validating it.
//!
//! Run with: `cargo run --example design_space`

use ppdesign::design::{design_to_csv, random_design, validate_design};
use ppdesign::space::{DesignSpace, ForbiddenCombination};

fn main() -> ppdesign::Result<()> {
    // 8 choice sets of 2 profiles over four attributes with levels
    // (2, 2, 3, 3); one attribute is held constant within every set, and
    // level 1 of attribute 3 never appears together with level 3 of
    // attribute 4.
    let space = DesignSpace::new(
        8,
        2,
        vec![2, 2, 3, 3],
        1,
        vec![ForbiddenCombination::new(vec![(3, 1), (4, 3)])],
    )?;
    println!(
        "space: {} sets x {} profiles, levels {:?}, {} constant attribute(s), strength {}",
        space.num_choice_sets,
        space.profiles_per_set,
        space.attribute_levels,
        space.num_constant_attributes,
        space.profile_strength(),
    );

    let design = random_design(&space, 7)?;
    let report = validate_design(&design, &space);
    println!("random design valid: {}", report.is_valid());
    for s in 0..design.num_sets() {
        println!(
            "set {:2}: constant {:?}, varying {:?}",
            s + 1,
            design.constant_attributes(s).iter().map(|a| a + 1).collect::<Vec<_>>(),
            design.varying_attributes(s).iter().map(|a| a + 1).collect::<Vec<_>>(),
        );
    }

    println!("\nCSV form (set, profile, one column per attribute):");
    print!("{}", design_to_csv(&design));

    // Violations are reported per rule, not just as a single flag.
    let mut broken = design.clone();
    let level = broken.level(0, 0, 2);
    broken.set_level(0, 0, 2, if level == 1 { 2 } else { 1 });
    let report = validate_design(&broken, &space);
    println!("\nafter breaking the constant pattern of set 1: {:?}", report.violations);
    Ok(())
}
