//! Thermostat override logic of a heat pump with auxiliary heating.
//!
//! The thermostat maps a requested heat-pump level to the physical draw.
//! Below the auxiliary threshold it forces heat pump plus auxiliary element
//! and keeps them on until the air is back above `t_low + t_b`; above
//! `t_high` it forces cooling until the air is below `t_high - t_b`. The
//! "keep on until" memory is carried explicitly as a [`Latch`].

use serde::{Deserialize, Serialize};

use crate::weather::Season;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermostatParams {
    /// Lower set point, °C.
    pub t_low: f64,
    /// Upper set point, °C.
    pub t_high: f64,
    /// Hysteresis band, °C.
    pub t_b: f64,
    /// Auxiliary activation band below `t_low`, °C.
    pub t_b_aux: f64,
    /// Heat-pump electrical power when heating, W.
    pub p_h: f64,
    /// Heat-pump electrical power when cooling, W.
    pub p_c: f64,
    /// Auxiliary element power, W.
    pub p_aux: f64,
}

impl Default for ThermostatParams {
    fn default() -> Self {
        ThermostatParams {
            t_low: 20.0,
            t_high: 22.5,
            t_b: 0.5,
            t_b_aux: 1.5,
            p_h: 2500.0,
            p_c: 2500.0,
            p_aux: 3000.0,
        }
    }
}

impl ThermostatParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_b > 0.0 && self.t_b_aux > self.t_b) {
            return Err(Error::Params(format!(
                "need t_b_aux > t_b > 0, got t_b {} and t_b_aux {}",
                self.t_b, self.t_b_aux
            )));
        }
        if self.t_low + self.t_b >= self.t_high - self.t_b {
            return Err(Error::Params(format!(
                "bands overlap: t_low + t_b = {} >= t_high - t_b = {}",
                self.t_low + self.t_b,
                self.t_high - self.t_b
            )));
        }
        if !(self.p_h > 0.0 && self.p_c > 0.0 && self.p_aux > 0.0) {
            return Err(Error::Params("heat-pump and auxiliary powers must be positive".into()));
        }
        Ok(())
    }

    /// Copy with the set points replaced by the schedule's bounds.
    pub fn with_bounds(&self, t_low: f64, t_high: f64) -> Self {
        ThermostatParams {
            t_low,
            t_high,
            ..self.clone()
        }
    }

    /// Largest heat-pump level a request can ask for in `season`.
    pub fn max_request(&self, season: Season) -> f64 {
        match season {
            Season::Winter => self.p_h,
            Season::Summer => self.p_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Latch {
    #[default]
    Free,
    AuxHeating,
    Cooling,
}

impl Latch {
    pub const ALL: [Latch; 3] = [Latch::Free, Latch::AuxHeating, Latch::Cooling];

    pub fn index(self) -> usize {
        match self {
            Latch::Free => 0,
            Latch::AuxHeating => 1,
            Latch::Cooling => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhysicalAction {
    /// Heat-pump electrical draw, W.
    pub u_ph_hp: f64,
    /// Auxiliary element electrical draw, W.
    pub u_ph_aux: f64,
    pub cooling: bool,
}

impl PhysicalAction {
    fn heat(u_ph_hp: f64, u_ph_aux: f64) -> Self {
        PhysicalAction {
            u_ph_hp,
            u_ph_aux,
            cooling: false,
        }
    }

    fn cool(u_ph_hp: f64) -> Self {
        PhysicalAction {
            u_ph_hp,
            u_ph_aux: 0.0,
            cooling: true,
        }
    }

    /// Total electrical draw, W.
    pub fn total(&self) -> f64 {
        self.u_ph_hp + self.u_ph_aux
    }
}

/// One thermostat decision. `params` must already carry the set points that
/// are active this quarter.
pub fn apply(
    t_in: f64,
    requested: f64,
    params: &ThermostatParams,
    latch: Latch,
    season: Season,
) -> (PhysicalAction, Latch) {
    match latch {
        Latch::AuxHeating if t_in < params.t_low + params.t_b => {
            return (PhysicalAction::heat(params.p_h, params.p_aux), Latch::AuxHeating)
        }
        Latch::Cooling if t_in > params.t_high - params.t_b => {
            return (PhysicalAction::cool(params.p_c), Latch::Cooling)
        }
        _ => {}
    }

    if t_in < params.t_low - params.t_b_aux {
        (PhysicalAction::heat(params.p_h, params.p_aux), Latch::AuxHeating)
    } else if t_in <= params.t_low + params.t_b {
        (PhysicalAction::heat(params.p_h, 0.0), Latch::Free)
    } else if t_in < params.t_high {
        let level = requested.clamp(0.0, params.max_request(season));
        let action = match season {
            Season::Winter => PhysicalAction::heat(level, 0.0),
            Season::Summer => PhysicalAction::cool(level),
        };
        (action, Latch::Free)
    } else {
        (PhysicalAction::cool(params.p_c), Latch::Cooling)
    }
}
