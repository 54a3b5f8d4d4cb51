//! Decision process around the simulator.
//!
//! Each quarter the agent observes `(d, t, T_in, T_out, S)`, augmented with
//! the last ten indoor temperatures and ten physical draws. A requested level
//! passes through the thermostat, the resulting electrical draw is converted
//! to heat, and the building advances 900 s. The cost of a step is the
//! electrical energy in Wh plus a fixed penalty when the next indoor
//! temperature leaves the comfort bounds of the next quarter.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::thermal::{self, BuildingParams, BuildingState};
use crate::thermostat::{self, Latch, PhysicalAction, ThermostatParams};
use crate::weather::{Exogenous, ExogenousTrace, Season};
use crate::{Error, Result, QUARTERS_PER_DAY, STEP_HOURS, STEP_SECONDS};

/// Past observations kept in the augmented state (per signal).
pub const HISTORY_LEN: usize = 10;

/// Width of the flattened history vector.
pub const HISTORY_DIM: usize = 2 * HISTORY_LEN;

/// Number of discrete requested levels.
pub const N_ACTIONS: usize = 10;

/// Penalty added to a step whose next indoor temperature leaves the bounds.
pub const COMFORT_PENALTY: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableState {
    /// Day of the week, 1..=7.
    pub day: u8,
    /// Quarter of the day, 1..=96.
    pub quarter: u8,
    pub t_in: f64,
    pub t_out: f64,
    /// Solar irradiance, W/m².
    pub solar: f64,
}

impl ObservableState {
    /// Calendar position of the following quarter.
    pub fn next_clock(&self) -> (u8, u8) {
        next_clock(self.day, self.quarter)
    }
}

pub fn next_clock(day: u8, quarter: u8) -> (u8, u8) {
    if quarter as usize >= QUARTERS_PER_DAY {
        (day % 7 + 1, 1)
    } else {
        (day, quarter + 1)
    }
}

/// Last ten indoor temperatures and physical draws, most recent first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryVector {
    pub past_t_in: [f64; HISTORY_LEN],
    pub past_u_ph: [f64; HISTORY_LEN],
}

impl HistoryVector {
    /// History before the first step: the initial temperature and zero draw.
    pub fn padded(t_in: f64) -> Self {
        HistoryVector {
            past_t_in: [t_in; HISTORY_LEN],
            past_u_ph: [0.0; HISTORY_LEN],
        }
    }

    /// Window after one more step with indoor temperature `t_in` and draw `u_ph`.
    pub fn shifted(&self, t_in: f64, u_ph: f64) -> Self {
        let mut next = *self;
        next.past_t_in.copy_within(0..HISTORY_LEN - 1, 1);
        next.past_u_ph.copy_within(0..HISTORY_LEN - 1, 1);
        next.past_t_in[0] = t_in;
        next.past_u_ph[0] = u_ph;
        next
    }

    /// Temperatures followed by draws.
    pub fn to_array(&self) -> [f64; HISTORY_DIM] {
        let mut out = [0.0; HISTORY_DIM];
        out[..HISTORY_LEN].copy_from_slice(&self.past_t_in);
        out[HISTORY_LEN..].copy_from_slice(&self.past_u_ph);
        out
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != HISTORY_DIM {
            return Err(Error::Dimension {
                expected: HISTORY_DIM,
                got: values.len(),
            });
        }
        let mut z = HistoryVector::padded(0.0);
        z.past_t_in.copy_from_slice(&values[..HISTORY_LEN]);
        z.past_u_ph.copy_from_slice(&values[HISTORY_LEN..]);
        Ok(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub obs: ObservableState,
    pub z: HistoryVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x: AugmentedState,
    /// Requested level, W.
    pub u: f64,
    pub x_next: AugmentedState,
    /// Total electrical draw that actually occurred, W.
    pub u_ph: f64,
}

/// Where the set-back relaxation applies and how far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetbackConfig {
    /// Relaxed lower bound in heating mode, °C.
    pub relaxed_low: f64,
    /// Relaxed upper bound in cooling mode, °C.
    pub relaxed_high: f64,
    /// First relaxed quarter (quarter 29 starts at 07h00).
    pub start_quarter: u8,
    /// Last relaxed quarter (quarter 68 ends at 17h00).
    pub end_quarter: u8,
}

impl Default for SetbackConfig {
    fn default() -> Self {
        SetbackConfig {
            relaxed_low: 15.0,
            relaxed_high: 27.5,
            start_quarter: 29,
            end_quarter: 68,
        }
    }
}

/// Comfort bounds `(t_low, t_high)` per quarter of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct ComfortSchedule {
    bounds: Vec<(f64, f64)>,
}

impl ComfortSchedule {
    pub fn constant(t_low: f64, t_high: f64) -> Self {
        ComfortSchedule {
            bounds: vec![(t_low, t_high); QUARTERS_PER_DAY],
        }
    }

    /// Constant bounds, relaxed during the set-back window: the lower bound in
    /// heating mode, the upper bound in cooling mode.
    pub fn setback(t_low: f64, t_high: f64, season: Season, cfg: &SetbackConfig) -> Result<Self> {
        if cfg.start_quarter < 1 || cfg.end_quarter as usize > QUARTERS_PER_DAY || cfg.start_quarter > cfg.end_quarter {
            return Err(Error::Params(format!(
                "set-back window {}..={} is not within 1..=96",
                cfg.start_quarter, cfg.end_quarter
            )));
        }
        let mut schedule = Self::constant(t_low, t_high);
        for q in cfg.start_quarter..=cfg.end_quarter {
            let b = &mut schedule.bounds[q as usize - 1];
            match season {
                Season::Winter => b.0 = cfg.relaxed_low,
                Season::Summer => b.1 = cfg.relaxed_high,
            }
        }
        Ok(schedule)
    }

    pub fn from_bounds(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != QUARTERS_PER_DAY {
            return Err(Error::Dimension {
                expected: QUARTERS_PER_DAY,
                got: bounds.len(),
            });
        }
        if let Some((q, b)) = bounds.iter().enumerate().find(|(_, b)| !(b.0 < b.1)) {
            return Err(Error::Params(format!(
                "quarter {}: lower bound {} not below upper bound {}",
                q + 1,
                b.0,
                b.1
            )));
        }
        Ok(ComfortSchedule { bounds })
    }

    /// Bounds active during `quarter` (1..=96).
    pub fn bounds(&self, quarter: u8) -> (f64, f64) {
        self.bounds[(quarter as usize).clamp(1, QUARTERS_PER_DAY) - 1]
    }

    /// Bounds of the quarter following `quarter`, against which the
    /// temperature reached at the end of `quarter` is judged.
    pub fn bounds_after(&self, quarter: u8) -> (f64, f64) {
        self.bounds(next_clock(1, quarter).1)
    }
}

/// `n` evenly spaced levels from 0 to the full heat-pump power of the season.
pub fn action_set(season: Season, params: &ThermostatParams) -> Vec<f64> {
    let p = params.max_request(season);
    let last = (N_ACTIONS - 1) as f64;
    (0..N_ACTIONS).map(|i| p * i as f64 / last).collect()
}

/// Energy in Wh plus the comfort penalty when `t_in_next` is out of bounds.
pub fn cost(u_ph: f64, t_in_next: f64, bounds: (f64, f64), dt_hours: f64) -> f64 {
    u_ph * dt_hours
        + if violates(t_in_next, bounds) {
            COMFORT_PENALTY
        } else {
            0.0
        }
}

pub fn violates(t_in: f64, bounds: (f64, f64)) -> bool {
    t_in < bounds.0 || t_in > bounds.1
}

/// Everything that stays fixed over an episode.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub building: BuildingParams,
    pub thermostat: ThermostatParams,
    pub season: Season,
    pub schedule: ComfortSchedule,
    pub actions: Vec<f64>,
}

impl EnvConfig {
    pub fn new(
        building: BuildingParams,
        thermostat: ThermostatParams,
        season: Season,
        schedule: ComfortSchedule,
    ) -> Result<Self> {
        building.validate()?;
        thermostat.validate()?;
        for q in 1..=QUARTERS_PER_DAY as u8 {
            let (lo, hi) = schedule.bounds(q);
            thermostat
                .with_bounds(lo, hi)
                .validate()
                .map_err(|e| Error::Params(format!("schedule at quarter {q} gives invalid thermostat: {e}")))?;
        }
        let actions = action_set(season, &thermostat);
        Ok(EnvConfig {
            building,
            thermostat,
            season,
            schedule,
            actions,
        })
    }

    /// Thermostat decision for indoor temperature `t_in` during `quarter`.
    pub fn thermostat_decision(&self, t_in: f64, requested: f64, quarter: u8, latch: Latch) -> (PhysicalAction, Latch) {
        let (lo, hi) = self.schedule.bounds(quarter);
        thermostat::apply(
            t_in,
            requested,
            &self.thermostat.with_bounds(lo, hi),
            latch,
            self.season,
        )
    }
}

/// Full simulator state carried between steps: physical state, thermostat
/// latch, the agent's augmented observation and the absolute step index into
/// the exogenous trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeState {
    pub building: BuildingState,
    pub latch: Latch,
    pub x: AugmentedState,
    pub step: usize,
}

impl EpisodeState {
    /// Start of an episode at step `step` of `trace`, on day-of-week `day`,
    /// with a padded history.
    pub fn initial(building: BuildingState, trace: &ExogenousTrace, step: usize, day: u8) -> Self {
        let exo = trace.at(step);
        let quarter = (step % QUARTERS_PER_DAY) as u8 + 1;
        EpisodeState {
            building,
            latch: Latch::Free,
            x: AugmentedState {
                obs: ObservableState {
                    day,
                    quarter,
                    t_in: building.t_in,
                    t_out: exo.t_out,
                    solar: exo.solar,
                },
                z: HistoryVector::padded(building.t_in),
            },
            step,
        }
    }
}

/// What a controller may look at when choosing a request. Model-free agents
/// use `x` only; the prescient baseline also reads the hidden physical state.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub x: &'a AugmentedState,
    pub building: BuildingState,
    pub latch: Latch,
    /// Absolute step index into the trace.
    pub step: usize,
    /// Step within the current day, 0..96.
    pub step_in_day: usize,
}

pub trait Controller {
    /// Requested level for this quarter; should be one of `actions`.
    fn request(&mut self, ctx: &StepContext<'_>, actions: &[f64]) -> Result<f64>;
}

impl<F> Controller for F
where
    F: FnMut(&StepContext<'_>, &[f64]) -> f64,
{
    fn request(&mut self, ctx: &StepContext<'_>, actions: &[f64]) -> Result<f64> {
        Ok(self(ctx, actions))
    }
}

/// Per-step record written to the trace files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Experiment day, 1-based.
    pub day: usize,
    pub weekday: u8,
    pub quarter: u8,
    pub t_in: f64,
    pub t_m: f64,
    pub t_out: f64,
    pub solar: f64,
    pub gains: f64,
    pub t_low: f64,
    pub t_high: f64,
    pub request: f64,
    pub u_hp: f64,
    pub u_aux: f64,
    pub cooling: bool,
    pub u_ph: f64,
    pub t_in_next: f64,
    pub t_m_next: f64,
    pub cost: f64,
    pub violation: bool,
}

/// One simulated step. `exo_now` drives the simulator; `exo_next` fills the
/// exogenous part of the next observation.
pub fn env_step(
    env: &EnvConfig,
    state: &EpisodeState,
    u: f64,
    exo_now: Exogenous,
    exo_next: Exogenous,
) -> Result<(Transition, EpisodeState, StepRecord)> {
    let x = &state.x;
    let quarter = x.obs.quarter;
    let (action, latch) = env.thermostat_decision(state.building.t_in, u, quarter, state.latch);
    let q_h = env.building.thermal_output(&action);
    let building = thermal::step(
        state.building,
        &env.building,
        exo_now.t_out,
        exo_now.q_gains,
        exo_now.solar,
        q_h,
        STEP_SECONDS,
    )
    .map_err(|e| match e {
        Error::Divergence { t_in, t_m, .. } => Error::Divergence {
            context: format!("step {} (quarter {quarter})", state.step),
            t_in,
            t_m,
        },
        other => other,
    })?;
    let u_ph = action.total();
    let (day, next_quarter) = x.obs.next_clock();
    let x_next = AugmentedState {
        obs: ObservableState {
            day,
            quarter: next_quarter,
            t_in: building.t_in,
            t_out: exo_next.t_out,
            solar: exo_next.solar,
        },
        z: x.z.shifted(x.obs.t_in, u_ph),
    };
    let next_bounds = env.schedule.bounds(next_quarter);
    let c = cost(u_ph, building.t_in, next_bounds, STEP_HOURS);
    let (t_low, t_high) = env.schedule.bounds(quarter);
    let record = StepRecord {
        day: state.step / QUARTERS_PER_DAY + 1,
        weekday: x.obs.day,
        quarter,
        t_in: state.building.t_in,
        t_m: state.building.t_m,
        t_out: exo_now.t_out,
        solar: exo_now.solar,
        gains: exo_now.q_gains,
        t_low,
        t_high,
        request: u,
        u_hp: action.u_ph_hp,
        u_aux: action.u_ph_aux,
        cooling: action.cooling,
        u_ph,
        t_in_next: building.t_in,
        t_m_next: building.t_m,
        cost: c,
        violation: violates(building.t_in, next_bounds),
    };
    let transition = Transition { x: *x, u, x_next, u_ph };
    let next = EpisodeState {
        building,
        latch,
        x: x_next,
        step: state.step + 1,
    };
    Ok((transition, next, record))
}

/// The records of one simulated day (or a shorter run).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DayTrace {
    pub steps: Vec<StepRecord>,
}

impl DayTrace {
    /// Electrical energy, Wh.
    pub fn energy_wh(&self) -> f64 {
        self.steps.iter().map(|s| s.u_ph * STEP_HOURS).sum()
    }

    pub fn violations(&self) -> usize {
        self.steps.iter().filter(|s| s.violation).count()
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }

    pub fn aux_quarters(&self) -> usize {
        self.steps.iter().filter(|s| s.u_aux > 0.0).count()
    }

    /// Indoor temperature at the end of `quarter` and the bounds that apply
    /// right after it. For quarter 68 this is the temperature at 17h00.
    pub fn t_in_after(&self, quarter: u8, schedule: &ComfortSchedule) -> Option<(f64, (f64, f64))> {
        self.steps
            .iter()
            .find(|s| s.quarter == quarter)
            .map(|s| (s.t_in_next, schedule.bounds_after(quarter)))
    }
}

#[derive(Debug, Clone)]
pub struct DayOutcome {
    pub transitions: Vec<Transition>,
    pub trace: DayTrace,
    pub end: EpisodeState,
}

/// Runs 96 steps from `start` with `controller`.
pub fn run_day(
    controller: &mut dyn Controller,
    env: &EnvConfig,
    start: EpisodeState,
    trace: &ExogenousTrace,
) -> Result<DayOutcome> {
    run_steps(controller, env, start, trace, QUARTERS_PER_DAY)
}

/// Runs `n` steps from `start` with `controller`.
pub fn run_steps(
    controller: &mut dyn Controller,
    env: &EnvConfig,
    start: EpisodeState,
    trace: &ExogenousTrace,
    n: usize,
) -> Result<DayOutcome> {
    if start.step + n > trace.len() {
        return Err(Error::Argument(format!(
            "trace of {} steps does not cover {n} steps from step {}",
            trace.len(),
            start.step
        )));
    }
    let mut state = start;
    let mut transitions = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let ctx = StepContext {
            x: &state.x,
            building: state.building,
            latch: state.latch,
            step: state.step,
            step_in_day: i,
        };
        let u = controller.request(&ctx, &env.actions)?;
        let (tr, next, rec) = env_step(env, &state, u, trace.at(state.step), trace.at(state.step + 1))?;
        transitions.push(tr);
        steps.push(rec);
        state = next;
    }
    Ok(DayOutcome {
        transitions,
        trace: DayTrace { steps },
        end: state,
    })
}

/// Fields of one augmented state in batch files, in order.
pub const STATE_FIELDS: usize = 5 + HISTORY_DIM;

fn push_state(out: &mut Vec<String>, x: &AugmentedState) {
    out.push(x.obs.day.to_string());
    out.push(x.obs.quarter.to_string());
    out.push(x.obs.t_in.to_string());
    out.extend(x.z.to_array().iter().map(f64::to_string));
    out.push(x.obs.t_out.to_string());
    out.push(x.obs.solar.to_string());
}

fn parse_state(fields: &[&str], line: u64) -> Result<AugmentedState> {
    let num = |i: usize| -> Result<f64> {
        fields[i].trim().parse::<f64>().map_err(|_| Error::Malformed {
            line,
            column: format!("field {}", i + 1),
            message: format!("`{}` is not a number", fields[i]),
        })
    };
    let int = |i: usize| -> Result<u8> {
        fields[i].trim().parse::<u8>().map_err(|_| Error::Malformed {
            line,
            column: format!("field {}", i + 1),
            message: format!("`{}` is not a calendar index", fields[i]),
        })
    };
    let mut z = [0.0; HISTORY_DIM];
    for (j, v) in z.iter_mut().enumerate() {
        *v = num(3 + j)?;
    }
    Ok(AugmentedState {
        obs: ObservableState {
            day: int(0)?,
            quarter: int(1)?,
            t_in: num(2)?,
            t_out: num(3 + HISTORY_DIM)?,
            solar: num(4 + HISTORY_DIM)?,
        },
        z: HistoryVector::from_slice(&z)?,
    })
}

/// Writes one transition per line:
/// `day,quarter,t_in,z[20],t_out,solar,u,day',quarter',t_in',z'[20],t_out',solar',u_ph`.
pub fn write_batch(path: impl AsRef<Path>, batch: &[Transition]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in batch {
        let mut fields = Vec::with_capacity(2 * STATE_FIELDS + 2);
        push_state(&mut fields, &t.x);
        fields.push(t.u.to_string());
        push_state(&mut fields, &t.x_next);
        fields.push(t.u_ph.to_string());
        writeln!(w, "{}", fields.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_batch(path: impl AsRef<Path>) -> Result<Vec<Transition>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i as u64 + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 * STATE_FIELDS + 2 {
            return Err(Error::Malformed {
                line: lineno,
                column: "record".into(),
                message: format!("expected {} fields, found {}", 2 * STATE_FIELDS + 2, fields.len()),
            });
        }
        let x = parse_state(&fields[..STATE_FIELDS], lineno)?;
        let u = fields[STATE_FIELDS].parse::<f64>().map_err(|_| Error::Malformed {
            line: lineno,
            column: "u".into(),
            message: format!("`{}` is not a number", fields[STATE_FIELDS]),
        })?;
        let x_next = parse_state(&fields[STATE_FIELDS + 1..2 * STATE_FIELDS + 1], lineno)?;
        let last = fields[2 * STATE_FIELDS + 1];
        let u_ph = last.parse::<f64>().map_err(|_| Error::Malformed {
            line: lineno,
            column: "u_ph".into(),
            message: format!("`{last}` is not a number"),
        })?;
        out.push(Transition { x, u, x_next, u_ph });
    }
    Ok(out)
}

/// Reference sliding window used to cross-check [`HistoryVector`].
#[doc(hidden)]
pub fn reference_window(t_in0: f64, record: &[(f64, f64)]) -> HistoryVector {
    let mut temps: VecDeque<f64> = std::iter::repeat_n(t_in0, HISTORY_LEN).collect();
    let mut draws: VecDeque<f64> = std::iter::repeat_n(0.0, HISTORY_LEN).collect();
    for &(t, u) in record {
        temps.push_front(t);
        temps.pop_back();
        draws.push_front(u);
        draws.pop_back();
    }
    let mut z = HistoryVector::padded(t_in0);
    for i in 0..HISTORY_LEN {
        z.past_t_in[i] = temps[i];
        z.past_u_ph[i] = draws[i];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weather::{synthesize_trace, synthesize_trace_with, SynthParams};

    fn winter_env(building: BuildingParams, schedule: ComfortSchedule) -> EnvConfig {
        EnvConfig::new(building, ThermostatParams::default(), Season::Winter, schedule).unwrap()
    }

    fn constant_trace(days: usize, t_out: f64) -> ExogenousTrace {
        let n = days * QUARTERS_PER_DAY;
        ExogenousTrace::new(vec![t_out; n], vec![0.0; n], vec![0.0; n]).unwrap()
    }

    #[test]
    fn action_levels() {
        let p = ThermostatParams::default();
        let w = action_set(Season::Winter, &p);
        assert_eq!(w.len(), 10);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[9], 2500.0);
        assert!((w[1] - 277.777_777_777_777_8).abs() < 1e-9);
        assert_eq!(action_set(Season::Summer, &p), w);
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost(2500.0, 21.0, (20.0, 22.5), 0.25), 625.0);
        assert_eq!(cost(0.0, 19.5, (20.0, 22.5), 0.25), 100_000.0);
        assert_eq!(cost(0.0, 21.0, (20.0, 22.5), 0.25), 0.0);
    }

    #[test]
    fn setback_schedule_window() {
        let s = ComfortSchedule::setback(20.0, 22.5, Season::Winter, &SetbackConfig::default()).unwrap();
        assert_eq!(s.bounds(28), (20.0, 22.5));
        assert_eq!(s.bounds(29), (15.0, 22.5));
        assert_eq!(s.bounds(68), (15.0, 22.5));
        assert_eq!(s.bounds(69), (20.0, 22.5));
        assert_eq!(s.bounds_after(68), (20.0, 22.5));
        assert_eq!(s.bounds_after(96), (20.0, 22.5));
        let s = ComfortSchedule::setback(20.0, 22.5, Season::Summer, &SetbackConfig::default()).unwrap();
        assert_eq!(s.bounds(40), (20.0, 27.5));
        assert!(ComfortSchedule::from_bounds(vec![(21.0, 20.0); 96]).is_err());
    }

    #[test]
    fn clock_wraps() {
        assert_eq!(next_clock(3, 95), (3, 96));
        assert_eq!(next_clock(3, 96), (4, 1));
        assert_eq!(next_clock(7, 96), (1, 1));
    }

    #[test]
    fn history_shift() {
        let z = HistoryVector::padded(20.0).shifted(21.0, 500.0);
        assert_eq!(z.past_t_in[0], 21.0);
        assert_eq!(z.past_t_in[1], 20.0);
        assert_eq!(z.past_u_ph[0], 500.0);
        assert_eq!(z.to_array().len(), 20);
    }

    #[test]
    fn aux_override_at_18() {
        let env = winter_env(BuildingParams::high_insulation(), ComfortSchedule::constant(20.0, 22.5));
        let trace = constant_trace(1, 0.0);
        let s = EpisodeState::initial(BuildingState::new(18.0, 18.0), &trace, 0, 1);
        let (tr, next, rec) = env_step(&env, &s, 0.0, trace.at(0), trace.at(1)).unwrap();
        assert_eq!(tr.u_ph, 5500.0);
        assert_eq!(next.latch, Latch::AuxHeating);
        assert_eq!(tr.x_next.z.past_t_in[0], tr.x.obs.t_in);
        assert_eq!(tr.x_next.z.past_u_ph[0], tr.u_ph);
        assert_eq!(rec.u_aux, 3000.0);
    }

    #[test]
    fn free_band_zero_action_decays() {
        let env = winter_env(BuildingParams::high_insulation(), ComfortSchedule::constant(20.0, 22.5));
        let trace = constant_trace(1, 10.0);
        let s = EpisodeState::initial(BuildingState::new(21.5, 21.5), &trace, 0, 1);
        let (tr, next, _) = env_step(&env, &s, 0.0, trace.at(0), trace.at(1)).unwrap();
        assert_eq!(tr.u_ph, 0.0);
        assert!(next.building.t_in < 21.5 && next.building.t_in > 10.0);
    }

    #[test]
    fn cold_day_triggers_aux() {
        let env = winter_env(BuildingParams::low_insulation(), ComfortSchedule::constant(20.0, 22.5));
        let trace = constant_trace(1, -5.0);
        let start = EpisodeState::initial(BuildingState::new(20.5, 20.5), &trace, 0, 1);
        let mut zero = |_: &StepContext<'_>, _: &[f64]| 0.0;
        let out = run_day(&mut zero, &env, start, &trace).unwrap();
        assert_eq!(out.transitions.len(), 96);
        assert!(out.trace.aux_quarters() > 0);
    }

    #[test]
    fn run_day_bookkeeping() {
        let schedule = ComfortSchedule::setback(20.0, 22.5, Season::Winter, &SetbackConfig::default()).unwrap();
        let env = winter_env(BuildingParams::high_insulation(), schedule);
        let trace = synthesize_trace(2, Season::Winter, 3).unwrap();
        let start = EpisodeState::initial(BuildingState::new(20.5, 20.5), &trace, 0, 7);
        let mut k = 0usize;
        let mut cycle = |_: &StepContext<'_>, a: &[f64]| {
            k += 1;
            a[k % a.len()]
        };
        let day1 = run_day(&mut cycle, &env, start, &trace).unwrap();
        assert_eq!(day1.end.x.obs.day, 1);
        assert_eq!(day1.end.x.obs.quarter, 1);
        for (i, t) in day1.transitions.iter().enumerate() {
            assert_eq!(t.x.obs.quarter as usize, i + 1);
        }

        // history matches an independent sliding window
        let record: Vec<(f64, f64)> = day1.transitions.iter().map(|t| (t.x.obs.t_in, t.u_ph)).collect();
        for n in 0..record.len() {
            let expect = reference_window(20.5, &record[..n + 1]);
            assert_eq!(day1.transitions[n].x_next.z, expect);
        }

        // cost decomposes into energy and penalties
        let e = day1.trace.energy_wh();
        let v = day1.trace.violations() as f64;
        let total = day1.trace.total_cost();
        assert!((total - (e + COMFORT_PENALTY * v)).abs() <= 1e-9 * total.max(1.0));

        // deterministic replay
        let mut k2 = 0usize;
        let mut cycle2 = |_: &StepContext<'_>, a: &[f64]| {
            k2 += 1;
            a[k2 % a.len()]
        };
        let again = run_day(&mut cycle2, &env, start, &trace).unwrap();
        assert_eq!(again.trace, day1.trace);
    }

    #[test]
    fn run_day_needs_coverage() {
        let env = winter_env(BuildingParams::high_insulation(), ComfortSchedule::constant(20.0, 22.5));
        let trace = constant_trace(1, 5.0);
        let start = EpisodeState::initial(BuildingState::new(20.5, 20.5), &trace, 10, 1);
        let mut zero = |_: &StepContext<'_>, _: &[f64]| 0.0;
        assert!(run_day(&mut zero, &env, start, &trace).is_err());
    }

    #[test]
    fn batch_file_round_trip() {
        let env = winter_env(BuildingParams::low_insulation(), ComfortSchedule::constant(20.0, 22.5));
        let params = SynthParams {
            t_mean: 12.0,
            ..SynthParams::for_season(Season::Winter)
        };
        let trace = synthesize_trace_with(1, &params, 9).unwrap();
        let start = EpisodeState::initial(BuildingState::new(21.0, 20.0), &trace, 0, 2);
        let mut full = |_: &StepContext<'_>, a: &[f64]| a[a.len() - 1];
        let out = run_day(&mut full, &env, start, &trace).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_batch(f.path(), &out.transitions).unwrap();
        assert_eq!(read_batch(f.path()).unwrap(), out.transitions);
    }
}
