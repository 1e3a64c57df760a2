//! Stage-one master designs: which attributes vary in which choice set.
//!
//! The master design fixes only the incidence of varying attributes. Three
//! objectives are available for choosing it: D-optimality on a two-way
//! ANOVA surrogate, and two weighted-A (variance balance) schemes that
//! equalize the precision of attributes with unequal level counts.
//!
//! Run with: `cargo run --example master_design`

use ppdesign::master::{
    master_score, optimize_master, treatment_variances, MasterObjective, WeightScheme,
};
use ppdesign::space::DesignSpace;

fn main() -> ppdesign::Result<()> {
    let space = DesignSpace::new(12, 2, vec![2, 2, 3, 3, 4], 2, vec![])?;
    let levels = space.attribute_levels.clone();

    for (name, objective) in [
        ("d_optimal", MasterObjective::DOptimal),
        ("variance_balance_i", MasterObjective::AWeighted(WeightScheme::I)),
        ("variance_balance_ii", MasterObjective::AWeighted(WeightScheme::II)),
    ] {
        let master = optimize_master(&space, objective, 42, 30)?;
        println!("objective {name}:");
        for (s, row) in master.incidence.iter().enumerate() {
            let varying: Vec<usize> =
                row.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i + 1).collect();
            println!("  set {:2} varies attributes {varying:?}", s + 1);
        }
        println!("  constant counts per attribute: {:?}", master.constant_counts());
        let vars = treatment_variances(&master)?;
        let pretty: Vec<String> = vars.iter().map(|v| format!("{v:.4}")).collect();
        println!("  surrogate treatment variances: {pretty:?}");
        println!(
            "  score: {:?}\n",
            master_score(&master, objective, &levels)
        );
    }
    Ok(())
}
