//! Shared fixtures for the kernel benchmarks.

use setback_core::env::run_day;
use setback_core::fqi::ReducedBatch;
use setback_core::weather::synthesize_trace;
use setback_core::{
    EncoderWeights, EnvConfig, EpisodeState, ExogenousTrace, ExperimentConfig, LearningController, Transition,
};

/// Winter experiment on the low-insulation preset.
pub fn config(days: usize) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!("days = {days}\n")).expect("valid bench config")
}

pub fn trace(days: usize) -> ExogenousTrace {
    synthesize_trace(days, setback_core::Season::Winter, 11).expect("synthetic trace")
}

/// Transitions of `days` days under uniform exploration.
pub fn exploration_batch(env: &EnvConfig, trace: &ExogenousTrace, days: usize) -> Vec<Transition> {
    let cfg = config(days);
    let mut state = EpisodeState::initial(cfg.initial_state(), trace, 0, cfg.start_weekday);
    let mut batch = Vec::with_capacity(days * setback_core::QUARTERS_PER_DAY);
    for day in 0..days {
        let out = run_day(&mut LearningController::exploring(day as u64), env, state, trace).expect("exploration day");
        state = out.end;
        batch.extend(out.transitions);
    }
    batch
}

/// Flattened history windows of a batch, the auto-encoder's training data.
pub fn histories(batch: &[Transition]) -> Vec<f64> {
    batch.iter().flat_map(|t| t.x.z.to_array()).collect()
}

/// Reduced batch with a briefly trained encoder.
pub fn reduced(env: &EnvConfig, batch: &[Transition]) -> ReducedBatch {
    let cfg = setback_core::TrainConfig {
        max_iters: 20,
        ..Default::default()
    };
    let (encoder, _) = EncoderWeights::train(&histories(batch), &cfg, 3).expect("encoder");
    ReducedBatch::from_transitions(batch, &encoder, &env.schedule).expect("reduced batch")
}
