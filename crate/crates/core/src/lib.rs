//! Model-free set-back control for a heat pump with auxiliary heating.
//!
//! The crate bundles everything needed to run the learning experiment end to
//! end:
//!
//! * [`weather`]: exogenous traces (outdoor temperature, irradiance, gains),
//!   loaded from CSV or synthesized from a seed.
//! * [`thermal`]: a two-node equivalent-thermal-parameter building model.
//! * [`thermostat`]: the override logic that turns requested power into the
//!   physical draw, including auxiliary-heating and cooling latches.
//! * [`env`]: the decision process around the simulator: observable and
//!   augmented state, comfort schedule, cost and the daily episode loop.
//! * [`autoencoder`]: compression of the 20-value history window to 6 features.
//! * [`extratrees`]: extremely randomized regression trees.
//! * [`fqi`]: fitted Q-iteration over the encoded batch.
//! * [`policy`]: Boltzmann exploration and controllers built on a Q-function.
//! * [`baselines`]: the constant set-point controller and the prescient
//!   dynamic-programming controller.
//! * [`harness`], [`metrics`], [`plot`]: the experiment runner and its outputs.

// Guards like `!(tau > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoencoder;
pub mod baselines;
pub mod env;
mod error;
pub mod extratrees;
pub mod fqi;
pub mod harness;
pub mod metrics;
pub mod plot;
pub mod policy;
pub mod rng;
pub mod thermal;
pub mod thermostat;
pub mod weather;

pub use error::{Error, Result};

pub use autoencoder::{EncoderWeights, TrainConfig};
pub use baselines::{DefaultController, GridSpec, PrescientPlan};
pub use env::{
    AugmentedState, ComfortSchedule, Controller, DayTrace, EnvConfig, EpisodeState, HistoryVector, ObservableState,
    StepContext, StepRecord, Transition,
};
pub use extratrees::{FeatureMatrix, Forest, ForestConfig};
pub use fqi::{QFunction, ReducedBatch};
pub use harness::{ExperimentConfig, ExperimentSummary};
pub use metrics::DailyMetrics;
pub use policy::{ExplorationSchedule, LearningController};
pub use thermal::{BuildingParams, BuildingState};
pub use thermostat::{Latch, PhysicalAction, ThermostatParams};
pub use weather::{ExogenousTrace, Season};

/// Quarter-hours per day; the control period is one quarter.
pub const QUARTERS_PER_DAY: usize = 96;

/// Length of one control period in seconds.
pub const STEP_SECONDS: f64 = 900.0;

/// Length of one control period in hours, used for the energy term of the cost.
pub const STEP_HOURS: f64 = 0.25;
