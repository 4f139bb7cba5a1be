//! Starts the HTTP service with a models directory and a face database.
//!
//! `cargo run --release --example serve -- models db 8080`
//!
//! Then, for example:
//!
//! ```text
//! curl -s --data-binary @scene.png 'localhost:8080/detect?recognize=true'
//! curl -s -X POST localhost:8080/streams
//! curl -s --data-binary @frame.png localhost:8080/streams/<id>/frames
//! curl -s -H 'content-type: application/json' -d '{"accept":true,"name":"Ada"}' localhost:8080/streams/<id>/enroll
//! curl -s localhost:8080/persons
//! ```

use std::sync::Arc;

use real::facedb::FaceDb;
use real::interface::{serve, AppState, Engine, ServiceConfig};
use real::synth::DeskRecipe;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let models = args.first().cloned().unwrap_or_else(|| "models".into());
    let cfg = ServiceConfig {
        db_path: args.get(1).cloned().unwrap_or_else(|| "db".into()).into(),
        port: args.get(2).map(|p| p.parse()).transpose()?.unwrap_or(8080),
        ..ServiceConfig::default()
    };
    let engine = Engine::load_dir(&models).or_else(|e| {
        eprintln!("{models}: {e}; training a quick model set");
        Engine::train(&DeskRecipe::quick())
    })?;
    let state = Arc::new(AppState::new(Some(engine), FaceDb::open(&cfg.db_path)?, &cfg));
    tokio::runtime::Runtime::new()?.block_on(serve(state, &cfg.bind, cfg.port))?;
    Ok(())
}
