//! Driving a full run from a JSON configuration, as the CLI does.
//!
//! `runner::run_generate` is the function behind `ppdesign generate`; it
//! reads a scenario config, optimizes a design, and writes the design
//! (CSV and JSON), a criterion report, the optimizer trace, and a resolved
//! config that echoes every defaulted setting. `run_evaluate`,
//! `run_simulate`, and `run_benchmark` follow the same pattern.
//!
//! Run with: `cargo run --release --example run_from_config`

use std::fs;

use ppdesign::runner::{run_generate, Overrides};

const CONFIG: &str = r#"{
    "space": {
        "num_choice_sets": 12,
        "profiles_per_set": 2,
        "attribute_levels": [2, 2, 3, 3],
        "num_constant_attributes": 1,
        "forbidden_combinations": []
    },
    "interactions": [[1, 3]],
    "criterion": "robust",
    "prior": {"family": {"lambda": 1.0, "kappa": 0.5}},
    "num_draws": 32,
    "seed": 4,
    "optimizer": {"sa": {"reheat_stall": 300, "stopping": {"max_reheats": 2}}}
}"#;

fn main() -> ppdesign::Result<()> {
    let dir = std::env::temp_dir().join("ppdesign_example_run");
    fs::create_dir_all(&dir)?;
    let config_path = dir.join("config.json");
    fs::write(&config_path, CONFIG)?;

    let out = dir.join("out");
    // Overrides mirror the CLI flags --seed and --draws.
    run_generate(&config_path, &out, &Overrides { seed: None, num_draws: None })?;

    println!("artifacts in {}:", out.display());
    let mut entries: Vec<_> = fs::read_dir(&out)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    entries.sort();
    for name in entries {
        println!("  {name}");
    }

    let report = fs::read_to_string(out.join("criterion_report.json"))?;
    println!("\ncriterion_report.json:\n{report}");
    println!("equivalent CLI invocation:");
    println!(
        "  ppdesign generate --config {} --out {}",
        config_path.display(),
        out.display()
    );
    Ok(())
}
