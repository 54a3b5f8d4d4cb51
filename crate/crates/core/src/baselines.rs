//! Reference controllers.
//!
//! [`DefaultController`] holds a constant set point. The prescient
//! controller knows the building model and the whole day of disturbances: a
//! backward dynamic program over a `(T_in, T_m, latch)` grid computes the
//! cost-to-go with the same objective as the environment (energy plus comfort
//! penalty), and a forward pass then picks, at the true simulated state, the
//! request minimizing stage cost plus the interpolated value of where it
//! lands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{self, run_steps, Controller, DayOutcome, EnvConfig, EpisodeState, StepContext};
use crate::thermal::{split_gains, BuildingState, StepMap};
use crate::thermostat::Latch;
use crate::weather::{Exogenous, ExogenousTrace, Season};
use crate::{Error, Result, QUARTERS_PER_DAY, STEP_HOURS, STEP_SECONDS};

/// Constant set-point strategy: full heat below 20.5 °C in winter, full
/// cooling above 22 °C in summer, nothing otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultController {
    pub season: Season,
    pub heat_below: f64,
    pub cool_above: f64,
}

impl DefaultController {
    pub fn new(season: Season) -> Self {
        DefaultController {
            season,
            heat_below: 20.5,
            cool_above: 22.0,
        }
    }

    /// Requested level for indoor temperature `t_in`.
    pub fn decide(&self, t_in: f64, actions: &[f64]) -> f64 {
        let full = actions.iter().copied().fold(0.0, f64::max);
        let on = match self.season {
            Season::Winter => t_in < self.heat_below,
            Season::Summer => t_in > self.cool_above,
        };
        if on {
            full
        } else {
            0.0
        }
    }
}

impl Controller for DefaultController {
    fn request(&mut self, ctx: &StepContext<'_>, actions: &[f64]) -> Result<f64> {
        Ok(self.decide(ctx.x.obs.t_in, actions))
    }
}

/// Discretization of the physical state for the dynamic program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub t_in_min: f64,
    pub t_in_max: f64,
    pub t_in_step: f64,
    pub t_m_min: f64,
    pub t_m_max: f64,
    pub t_m_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            t_in_min: 14.0,
            t_in_max: 26.0,
            t_in_step: 0.1,
            t_m_min: 10.0,
            t_m_max: 30.0,
            t_m_step: 0.2,
        }
    }
}

impl GridSpec {
    /// Default ranges for `season`. Summer set-back lets the air warm to
    /// 27.5 °C, so its grid sits higher.
    pub fn for_season(season: Season) -> Self {
        match season {
            Season::Winter => GridSpec::default(),
            Season::Summer => GridSpec {
                t_in_min: 18.0,
                t_in_max: 30.0,
                t_m_min: 14.0,
                t_m_max: 34.0,
                ..GridSpec::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi, step) in [
            ("t_in", self.t_in_min, self.t_in_max, self.t_in_step),
            ("t_m", self.t_m_min, self.t_m_max, self.t_m_step),
        ] {
            if !(step > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Params(format!(
                    "{name} grid needs a positive step and max > min, got {lo}..{hi} step {step}"
                )));
            }
        }
        Ok(())
    }

    /// Same ranges, both steps halved.
    pub fn refined(&self) -> Self {
        GridSpec {
            t_in_step: self.t_in_step / 2.0,
            t_m_step: self.t_m_step / 2.0,
            ..self.clone()
        }
    }

    fn points(lo: f64, hi: f64, step: f64) -> usize {
        ((hi - lo) / step).round() as usize + 1
    }

    pub fn t_in_points(&self) -> usize {
        Self::points(self.t_in_min, self.t_in_max, self.t_in_step)
    }

    pub fn t_m_points(&self) -> usize {
        Self::points(self.t_m_min, self.t_m_max, self.t_m_step)
    }

    fn t_in_at(&self, i: usize) -> f64 {
        self.t_in_min + i as f64 * self.t_in_step
    }

    fn t_m_at(&self, j: usize) -> f64 {
        self.t_m_min + j as f64 * self.t_m_step
    }

    /// Why `s` lies outside the grid, if it does.
    pub fn excursion(&self, s: BuildingState) -> Option<String> {
        let t_in_hi = self.t_in_at(self.t_in_points() - 1);
        let t_m_hi = self.t_m_at(self.t_m_points() - 1);
        if s.t_in < self.t_in_min || s.t_in > t_in_hi {
            Some(format!(
                "t_in {:.3} °C outside {}..{} °C",
                s.t_in, self.t_in_min, t_in_hi
            ))
        } else if s.t_m < self.t_m_min || s.t_m > t_m_hi {
            Some(format!("t_m {:.3} °C outside {}..{} °C", s.t_m, self.t_m_min, t_m_hi))
        } else {
            None
        }
    }
}

/// Cost-to-go on the grid for every stage of a horizon; `stage(T) ≡ 0`.
#[derive(Debug, Clone)]
pub struct ValueTable {
    grid: GridSpec,
    n_in: usize,
    n_m: usize,
    stages: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    fn index(&self, latch: Latch, i: usize, j: usize) -> usize {
        (latch.index() * self.n_in + i) * self.n_m + j
    }

    /// Value at grid node `(i, j)`.
    pub fn at_node(&self, k: usize, latch: Latch, i: usize, j: usize) -> f64 {
        self.stages[k][self.index(latch, i, j)]
    }

    /// Bilinear interpolation of stage `k`, with coordinates clamped to the grid.
    pub fn value(&self, k: usize, s: BuildingState, latch: Latch) -> f64 {
        let g = &self.grid;
        let locate = |x: f64, lo: f64, step: f64, n: usize| -> (usize, f64) {
            let f = ((x - lo) / step).clamp(0.0, (n - 1) as f64);
            let i = (f.floor() as usize).min(n - 2);
            (i, f - i as f64)
        };
        let (i, wi) = locate(s.t_in, g.t_in_min, g.t_in_step, self.n_in);
        let (j, wj) = locate(s.t_m, g.t_m_min, g.t_m_step, self.n_m);
        let v = &self.stages[k];
        let base = self.index(latch, i, j);
        let v00 = v[base];
        let v01 = v[base + 1];
        let v10 = v[base + self.n_m];
        let v11 = v[base + self.n_m + 1];
        (1.0 - wi) * ((1.0 - wj) * v00 + wj * v01) + wi * ((1.0 - wj) * v10 + wj * v11)
    }
}

/// Disturbances and clock for one stage.
#[derive(Debug, Clone, Copy)]
struct Stage {
    exo: Exogenous,
    quarter: u8,
    next_bounds: (f64, f64),
}

fn stages_for(env: &EnvConfig, start_quarter: u8, exo: &[Exogenous]) -> Vec<Stage> {
    let mut quarter = start_quarter;
    exo.iter()
        .map(|&e| {
            let next = env::next_clock(1, quarter).1;
            let st = Stage {
                exo: e,
                quarter,
                next_bounds: env.schedule.bounds(next),
            };
            quarter = next;
            st
        })
        .collect()
}

/// Best action index and its stage cost plus continuation value. Requests
/// that the thermostat maps to the same physical action share one
/// evaluation; ties go to the lower request.
fn best_action(
    env: &EnvConfig,
    map: &StepMap,
    stage: &Stage,
    s: BuildingState,
    latch: Latch,
    continuation: impl Fn(BuildingState, Latch) -> f64,
) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    let mut prev = None;
    for (a, &u) in env.actions.iter().enumerate() {
        let (action, next_latch) = env.thermostat_decision(s.t_in, u, stage.quarter, latch);
        if prev == Some((action, next_latch)) {
            continue;
        }
        prev = Some((action, next_latch));
        let q_h = env.building.thermal_output(&action);
        let (q_i, q_m) = split_gains(stage.exo.q_gains, stage.exo.solar, q_h, &env.building);
        let next = map.apply(s, stage.exo.t_out, q_i, q_m);
        let total =
            env::cost(action.total(), next.t_in, stage.next_bounds, STEP_HOURS) + continuation(next, next_latch);
        if total < best.1 {
            best = (a, total);
        }
    }
    best
}

/// Backward induction over `exo.len()` stages starting at `start_quarter`.
pub fn value_function(env: &EnvConfig, start_quarter: u8, exo: &[Exogenous], grid: &GridSpec) -> Result<ValueTable> {
    grid.validate()?;
    let map = StepMap::new(&env.building, STEP_SECONDS);
    let stages = stages_for(env, start_quarter, exo);
    let (n_in, n_m) = (grid.t_in_points(), grid.t_m_points());
    let cells = Latch::ALL.len() * n_in * n_m;
    let mut table = ValueTable {
        grid: grid.clone(),
        n_in,
        n_m,
        stages: vec![vec![0.0; cells]; stages.len() + 1],
    };
    for k in (0..stages.len()).rev() {
        let stage = &stages[k];
        let current: Vec<f64> = (0..cells)
            .into_par_iter()
            .map(|c| {
                let latch = Latch::ALL[c / (n_in * n_m)];
                let i = (c / n_m) % n_in;
                let j = c % n_m;
                let s = BuildingState::new(grid.t_in_at(i), grid.t_m_at(j));
                best_action(env, &map, stage, s, latch, |ns, nl| table.value(k + 1, ns, nl)).1
            })
            .collect();
        table.stages[k] = current;
    }
    Ok(table)
}

/// Result of the prescient controller over one horizon.
#[derive(Debug, Clone)]
pub struct PrescientPlan {
    /// Requested level at every step.
    pub actions: Vec<f64>,
    /// Electrical energy of the rollout, Wh.
    pub energy_wh: f64,
    /// Energy plus comfort penalties of the rollout.
    pub total_cost: f64,
    pub outcome: DayOutcome,
}

struct RolloutController<'a> {
    env: &'a EnvConfig,
    map: StepMap,
    stages: Vec<Stage>,
    table: &'a ValueTable,
    grid: &'a GridSpec,
}

impl Controller for RolloutController<'_> {
    fn request(&mut self, ctx: &StepContext<'_>, actions: &[f64]) -> Result<f64> {
        if let Some(excursion) = self.grid.excursion(ctx.building) {
            return Err(Error::GridCoverage {
                step: ctx.step,
                excursion,
            });
        }
        let k = ctx.step_in_day;
        let (a, _) = best_action(
            self.env,
            &self.map,
            &self.stages[k],
            ctx.building,
            ctx.latch,
            |ns, nl| self.table.value(k + 1, ns, nl),
        );
        Ok(actions[a])
    }
}

/// Solves and rolls out `horizon` steps from `start` (96 for a day).
pub fn prescient_solve(
    env: &EnvConfig,
    start: EpisodeState,
    trace: &ExogenousTrace,
    horizon: usize,
    grid: &GridSpec,
) -> Result<PrescientPlan> {
    if start.step + horizon > trace.len() {
        return Err(Error::Argument(format!(
            "trace of {} steps does not cover {horizon} steps from step {}",
            trace.len(),
            start.step
        )));
    }
    let exo: Vec<Exogenous> = (start.step..start.step + horizon).map(|k| trace.at(k)).collect();
    let table = value_function(env, start.x.obs.quarter, &exo, grid)?;
    let mut controller = RolloutController {
        env,
        map: StepMap::new(&env.building, STEP_SECONDS),
        stages: stages_for(env, start.x.obs.quarter, &exo),
        table: &table,
        grid,
    };
    let outcome = run_steps(&mut controller, env, start, trace, horizon)?;
    if let Some(excursion) = grid.excursion(outcome.end.building) {
        return Err(Error::GridCoverage {
            step: outcome.end.step,
            excursion,
        });
    }
    Ok(PrescientPlan {
        actions: outcome.trace.steps.iter().map(|s| s.request).collect(),
        energy_wh: outcome.trace.energy_wh(),
        total_cost: outcome.trace.total_cost(),
        outcome,
    })
}

/// One day of the prescient controller.
pub fn prescient_day(
    env: &EnvConfig,
    start: EpisodeState,
    trace: &ExogenousTrace,
    grid: &GridSpec,
) -> Result<PrescientPlan> {
    prescient_solve(env, start, trace, QUARTERS_PER_DAY, grid)
}
