//! Trains the desk-scale detector and attribute models and saves them in
//! the directory layout read by the CLI and the service.
//!
//! `cargo run --release --example train_models -- models`
//!
//! Pass `--quick` for a smaller, weaker set that trains in a fraction of
//! the time.

use std::time::Instant;

use real::detector::dump_cascade;
use real::interface::Engine;
use real::pipeline::PipelineConfig;
use real::synth::DeskRecipe;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let quick = args.iter().any(|a| a == "--quick");
    let out = args.iter().find(|a| !a.starts_with("--")).cloned().unwrap_or_else(|| "models".into());
    let recipe = if quick { DeskRecipe::quick() } else { DeskRecipe::default() };
    println!("recipe: {recipe:?}");

    let start = Instant::now();
    let training = recipe.train_cascade()?;
    println!("cascade: {:?} after {:.1?}", training.stop_reason, start.elapsed());
    for (i, s) in training.reports.iter().enumerate() {
        println!(
            "  stage {i:2}: {:3} stumps, detection {:.4}, false positives {:.4}, {} negatives ({} mined)",
            s.stumps, s.detection_rate, s.false_positive_rate, s.train_negatives, s.mined_negatives
        );
    }
    let attributes = recipe.train_attributes()?;
    let engine = Engine::new(training.cascade, attributes, PipelineConfig::default());
    engine.save_dir(&out)?;
    println!("{}", dump_cascade(&engine.cascade).lines().next().unwrap_or_default());
    println!("saved models to {out}");
    Ok(())
}
