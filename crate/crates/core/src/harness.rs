//! Experiment runner.
//!
//! Three lanes share one exogenous trace and one initial state: the default
//! strategy on constant comfort bounds, and the learning agent and the
//! prescient controller on the set-back schedule. Each day the learning lane
//! first retrains the auto-encoder on every stored history, rebuilds the
//! reduced batch and runs fitted Q-iteration (offline), then controls the
//! day with Boltzmann exploration and appends its 96 transitions to the
//! batch (online). The first day has no batch and explores uniformly.
//!
//! Result files, all CSV with a header row:
//!
//! * `daily_metrics.csv`: energies, `M_d`, `D_d` and violations per day.
//! * `cumulative_energy.csv`: running energy totals of the three lanes.
//! * `trace_default.csv`, `trace_learning.csv`, `trace_prescient.csv`: one
//!   row per quarter.
//! * `batch.csv`: the learning agent's transitions, without header (see
//!   [`crate::env::write_batch`]).

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{EncoderWeights, TrainConfig};
use crate::baselines::{prescient_day, DefaultController, GridSpec};
use crate::env::{
    run_day, write_batch, ComfortSchedule, EnvConfig, EpisodeState, SetbackConfig, StepRecord, Transition,
};
use crate::extratrees::ForestConfig;
use crate::fqi::{fitted_q_iteration, QFunction, ReducedBatch, HORIZON};
use crate::metrics::{mean_defined, metric_d, metric_m, DailyMetrics};
use crate::policy::{ExplorationSchedule, LearningController};
use crate::rng::derive_seed;
use crate::thermal::{BuildingParams, BuildingState};
use crate::thermostat::ThermostatParams;
use crate::weather::{load_trace, synthesize_trace_with, ColumnMap, ExogenousTrace, Season, SynthParams};
use crate::{Error, Result};

/// Quarter whose end marks 17h00, where `D_d` is measured.
pub const SETBACK_END_QUARTER: u8 = 68;

const WEATHER_STREAM: u64 = 1;
const ENCODER_STREAM: u64 = 1_000;
const FQI_STREAM: u64 = 2_000;
const POLICY_STREAM: u64 = 3_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildingSection {
    pub preset: String,
    /// Field overrides applied on top of the preset, e.g. `cop_heat = 4.0`.
    #[serde(flatten)]
    pub overrides: toml::Table,
}

impl Default for BuildingSection {
    fn default() -> Self {
        BuildingSection {
            preset: "low_insulation".into(),
            overrides: toml::Table::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherSection {
    /// Trace file; when absent a synthetic trace is generated from the seed.
    pub csv: Option<PathBuf>,
    /// Column names as `quarter=..,t_out=..,solar=..,q_gains=..`.
    pub columns: Option<String>,
    /// Overrides of the season's synthetic-weather parameters.
    pub synthetic: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub exploration: ExplorationSchedule,
    pub fqi_iterations: usize,
    pub autoencoder: TrainConfig,
    pub forest: ForestConfig,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            exploration: ExplorationSchedule::default(),
            fqi_iterations: HORIZON,
            autoencoder: TrainConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub season: Season,
    /// Simulated days; 100 in winter and 80 in summer when absent.
    pub days: Option<usize>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Initial indoor and mass temperatures, °C; season defaults when absent.
    pub initial_t_in: Option<f64>,
    pub initial_t_m: Option<f64>,
    /// Day of the week of the first day, 1..=7.
    pub start_weekday: u8,
    pub building: BuildingSection,
    pub weather: WeatherSection,
    pub thermostat: ThermostatParams,
    pub setback: SetbackConfig,
    pub learning: LearningConfig,
    /// Prescient DP grid keys, applied over the season's default grid.
    pub grid: toml::Table,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            season: Season::Winter,
            days: None,
            seed: 1,
            output_dir: PathBuf::from("results"),
            initial_t_in: None,
            initial_t_m: None,
            start_weekday: 1,
            building: BuildingSection::default(),
            weather: WeatherSection::default(),
            thermostat: ThermostatParams::default(),
            setback: SetbackConfig::default(),
            learning: LearningConfig::default(),
            grid: toml::Table::new(),
        }
    }
}

/// Applies `patch` to the serialized form of `base`, rejecting unknown keys.
fn overlay<T: Serialize + DeserializeOwned>(base: &T, patch: &toml::Table, what: &str) -> Result<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Params(e.to_string()))?;
    for (k, v) in patch {
        if !table.contains_key(k) {
            return Err(Error::Params(format!("unknown {what} key `{k}`")));
        }
        table.insert(k.clone(), v.clone());
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Params(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Params(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        if let Some(csv) = &mut config.weather.csv {
            if csv.is_relative() {
                *csv = base.join(&*csv);
            }
        }
        config.validate().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.days() < 1 {
            return Err(Error::Params("days must be at least 1".into()));
        }
        if !(1..=7).contains(&self.start_weekday) {
            return Err(Error::Params(format!(
                "start_weekday {} not in 1..=7",
                self.start_weekday
            )));
        }
        self.building_params()?;
        self.synth_params()?;
        self.grid()?.validate()?;
        self.env_setback()?;
        if self.learning.fqi_iterations < 1 {
            return Err(Error::Params("fqi_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        overlay(&GridSpec::for_season(self.season), &self.grid, "grid")
    }

    pub fn days(&self) -> usize {
        self.days.unwrap_or(match self.season {
            Season::Winter => 100,
            Season::Summer => 80,
        })
    }

    pub fn initial_state(&self) -> BuildingState {
        let (t_in, t_m) = match self.season {
            Season::Winter => (20.5, 20.0),
            Season::Summer => (22.0, 22.0),
        };
        BuildingState::new(self.initial_t_in.unwrap_or(t_in), self.initial_t_m.unwrap_or(t_m))
    }

    pub fn building_params(&self) -> Result<BuildingParams> {
        let base = BuildingParams::preset(&self.building.preset)?;
        let params = overlay(&base, &self.building.overrides, "building")?;
        params.validate()?;
        Ok(params)
    }

    pub fn synth_params(&self) -> Result<SynthParams> {
        overlay(
            &SynthParams::for_season(self.season),
            &self.weather.synthetic,
            "weather.synthetic",
        )
    }

    /// Exogenous trace covering exactly `days()` days.
    pub fn trace(&self) -> Result<ExogenousTrace> {
        let days = self.days();
        match &self.weather.csv {
            Some(path) => {
                let columns = match &self.weather.columns {
                    Some(spec) => ColumnMap::parse(spec)?,
                    None => ColumnMap::default(),
                };
                let trace = load_trace(path, &columns)?;
                if trace.days() < days {
                    return Err(Error::Argument(format!(
                        "{} holds {} days, the experiment needs {days}",
                        path.display(),
                        trace.days()
                    )));
                }
                trace.truncated(days)
            }
            None => synthesize_trace_with(days, &self.synth_params()?, derive_seed(self.seed, WEATHER_STREAM)),
        }
    }

    fn comfort(&self) -> (f64, f64) {
        (self.thermostat.t_low, self.thermostat.t_high)
    }

    /// Environment of the learning and prescient lanes.
    pub fn env_setback(&self) -> Result<EnvConfig> {
        let (lo, hi) = self.comfort();
        let schedule = ComfortSchedule::setback(lo, hi, self.season, &self.setback)?;
        EnvConfig::new(self.building_params()?, self.thermostat.clone(), self.season, schedule)
    }

    /// Environment of the default lane: constant bounds all day.
    pub fn env_default(&self) -> Result<EnvConfig> {
        let (lo, hi) = self.comfort();
        EnvConfig::new(
            self.building_params()?,
            self.thermostat.clone(),
            self.season,
            ComfortSchedule::constant(lo, hi),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub days: usize,
    pub energy_default_wh: f64,
    pub energy_learning_wh: f64,
    pub energy_prescient_wh: f64,
    pub metrics: Vec<DailyMetrics>,
    pub output_dir: PathBuf,
}

impl ExperimentSummary {
    /// Energy saved relative to the default strategy, percent.
    pub fn savings_learning_pct(&self) -> f64 {
        100.0 * (1.0 - self.energy_learning_wh / self.energy_default_wh)
    }

    pub fn savings_prescient_pct(&self) -> f64 {
        100.0 * (1.0 - self.energy_prescient_wh / self.energy_default_wh)
    }

    /// Mean `M_d` over days `first..=last` (1-based), skipping undefined days.
    pub fn mean_m(&self, first: usize, last: usize) -> Option<f64> {
        mean_defined(self.window(first, last).map(|m| m.m_d))
    }

    pub fn mean_d(&self, first: usize, last: usize) -> Option<f64> {
        mean_defined(self.window(first, last).map(|m| Some(m.d_d)))
    }

    fn window(&self, first: usize, last: usize) -> impl Iterator<Item = &DailyMetrics> {
        self.metrics.iter().filter(move |m| m.day >= first && m.day <= last)
    }

    /// Cumulative energies `(default, learning, prescient)` after `day`.
    pub fn cumulative_after(&self, day: usize) -> (f64, f64, f64) {
        self.window(1, day)
            .fold((0.0, 0.0, 0.0), |acc, m| (acc.0 + m.e_d, acc.1 + m.e_l, acc.2 + m.e_p))
    }
}

/// Learning lane state carried from one day to the next.
struct LearningLane {
    state: EpisodeState,
    batch: Vec<Transition>,
}

impl LearningLane {
    /// Offline part: encoder, reduced batch and Q-function for `day`, or
    /// `None` while the batch is empty.
    fn fit(
        &self,
        config: &ExperimentConfig,
        env: &EnvConfig,
        day: usize,
    ) -> Result<Option<(QFunction, EncoderWeights)>> {
        if self.batch.is_empty() {
            return Ok(None);
        }
        let seed = config.seed;
        let histories: Vec<f64> = self.batch.iter().flat_map(|t| t.x.z.to_array()).collect();
        let (encoder, _) = EncoderWeights::train(
            &histories,
            &config.learning.autoencoder,
            derive_seed(seed, ENCODER_STREAM + day as u64),
        )?;
        let reduced = ReducedBatch::from_transitions(&self.batch, &encoder, &env.schedule)?;
        let q = fitted_q_iteration(
            &reduced,
            &env.actions,
            config.learning.fqi_iterations,
            &config.learning.forest,
            derive_seed(seed, FQI_STREAM + day as u64),
        )?;
        Ok(Some((q, encoder)))
    }
}

struct ResultWriters {
    dir: PathBuf,
    metrics: File,
    cumulative: File,
    traces: [(PathBuf, csv::Writer<File>); 3],
}

impl ResultWriters {
    fn create(dir: &Path) -> Result<Self> {
        use std::io::Write;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| -> Result<(PathBuf, File)> {
            let p = dir.join(name);
            let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
            Ok((p, f))
        };
        let (mp, mut metrics) = open("daily_metrics.csv")?;
        writeln!(metrics, "{}", DailyMetrics::HEADER).map_err(|e| Error::io(&mp, e))?;
        let (cp, mut cumulative) = open("cumulative_energy.csv")?;
        writeln!(cumulative, "day,default_wh,learning_wh,prescient_wh").map_err(|e| Error::io(&cp, e))?;
        let trace = |name: &str| -> Result<(PathBuf, csv::Writer<File>)> {
            let (p, f) = open(name)?;
            Ok((p, csv::Writer::from_writer(f)))
        };
        Ok(ResultWriters {
            dir: dir.to_path_buf(),
            metrics,
            cumulative,
            traces: [trace(TRACE_FILES[0])?, trace(TRACE_FILES[1])?, trace(TRACE_FILES[2])?],
        })
    }

    fn day(&mut self, m: &DailyMetrics, cumulative: (f64, f64, f64), traces: [&[StepRecord]; 3]) -> Result<()> {
        use std::io::Write;
        let mp = self.dir.join("daily_metrics.csv");
        writeln!(self.metrics, "{}", m.csv_row()).map_err(|e| Error::io(&mp, e))?;
        let cp = self.dir.join("cumulative_energy.csv");
        writeln!(
            self.cumulative,
            "{},{},{},{}",
            m.day, cumulative.0, cumulative.1, cumulative.2
        )
        .map_err(|e| Error::io(&cp, e))?;
        for ((path, w), records) in self.traces.iter_mut().zip(traces) {
            for r in records {
                w.serialize(r).map_err(|e| Error::csv(path.as_path(), e))?;
            }
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }
}

/// Trace files in lane order: default, learning, prescient.
pub const TRACE_FILES: [&str; 3] = ["trace_default.csv", "trace_learning.csv", "trace_prescient.csv"];

pub fn run_experiment(config: &ExperimentConfig, eval_greedy: bool) -> Result<ExperimentSummary> {
    run_experiment_with(config, eval_greedy, |_| {})
}

/// Runs the experiment, calling `on_day` after each simulated day.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    eval_greedy: bool,
    mut on_day: impl FnMut(&DailyMetrics),
) -> Result<ExperimentSummary> {
    config.validate()?;
    let days = config.days();
    let trace = config.trace()?;
    let env_setback = config.env_setback()?;
    let env_default = config.env_default()?;
    let grid = config.grid()?;
    let start = EpisodeState::initial(config.initial_state(), &trace, 0, config.start_weekday);

    let mut writers = ResultWriters::create(&config.output_dir)?;
    let mut default_state = start;
    let mut prescient_state = start;
    let mut learning = LearningLane {
        state: start,
        batch: Vec::with_capacity(days * crate::QUARTERS_PER_DAY),
    };
    let mut metrics = Vec::with_capacity(days);
    let mut cumulative = (0.0, 0.0, 0.0);

    for day in 1..=days {
        let in_day = |e: Error| Error::Day {
            day,
            source: Box::new(e),
        };
        let (baselines, learned) = rayon::join(
            || -> Result<_> {
                let default = run_day(
                    &mut DefaultController::new(config.season),
                    &env_default,
                    default_state,
                    &trace,
                )?;
                let prescient = prescient_day(&env_setback, prescient_state, &trace, &grid)?;
                Ok((default, prescient))
            },
            || -> Result<_> {
                let fitted = learning.fit(config, &env_setback, day)?;
                let policy_seed = derive_seed(config.seed, POLICY_STREAM + day as u64);
                let (mut controller, tau) = match &fitted {
                    None => (LearningController::exploring(policy_seed), None),
                    Some((q, enc)) => {
                        let tau = config.learning.exploration.tau(day);
                        (
                            LearningController::boltzmann(q.clone(), enc.clone(), tau, policy_seed)?,
                            Some(tau),
                        )
                    }
                };
                let out = run_day(&mut controller, &env_setback, learning.state, &trace)?;
                let greedy = match fitted {
                    Some((q, enc)) if eval_greedy => {
                        let mut g = LearningController::greedy(q, enc, policy_seed);
                        Some(run_day(&mut g, &env_setback, learning.state, &trace)?.trace.energy_wh())
                    }
                    _ => None,
                };
                Ok((out, tau, greedy))
            },
        );
        let (default, prescient) = baselines.map_err(in_day)?;
        let (learned, tau, e_greedy) = learned.map_err(in_day)?;

        let schedule = &env_setback.schedule;
        let deviation = |t: &crate::env::DayTrace| {
            t.t_in_after(SETBACK_END_QUARTER, schedule)
                .map(|(t_in, bounds)| metric_d(t_in, bounds))
                .unwrap_or(0.0)
        };
        let (e_d, e_l, e_p) = (
            default.trace.energy_wh(),
            learned.trace.energy_wh(),
            prescient.energy_wh,
        );
        let m = DailyMetrics {
            day,
            e_l,
            e_d,
            e_p,
            m_d: metric_m(e_l, e_d, e_p),
            d_d: deviation(&learned.trace),
            d_p: deviation(&prescient.outcome.trace),
            violations: learned.trace.violations(),
            violations_default: default.trace.violations(),
            violations_prescient: prescient.outcome.trace.violations(),
            tau,
            e_greedy,
        };
        cumulative = (cumulative.0 + e_d, cumulative.1 + e_l, cumulative.2 + e_p);
        writers
            .day(
                &m,
                cumulative,
                [
                    &default.trace.steps,
                    &learned.trace.steps,
                    &prescient.outcome.trace.steps,
                ],
            )
            .map_err(in_day)?;
        on_day(&m);
        metrics.push(m);

        default_state = default.end;
        prescient_state = prescient.outcome.end;
        learning.state = learned.end;
        learning.batch.extend(learned.transitions);
    }

    write_batch(config.output_dir.join("batch.csv"), &learning.batch)?;
    Ok(ExperimentSummary {
        days,
        energy_default_wh: cumulative.0,
        energy_learning_wh: cumulative.1,
        energy_prescient_wh: cumulative.2,
        metrics,
        output_dir: config.output_dir.clone(),
    })
}
