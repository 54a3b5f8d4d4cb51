//! Exogenous traces driving the simulator.
//!
//! A trace holds one row per quarter-hour with outdoor temperature, solar
//! irradiance on a horizontal surface and internal heat gains. Gains feed the
//! simulator only; the learning agent never observes them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded};
use crate::{Error, Result, QUARTERS_PER_DAY};

pub const T_OUT_MIN: f64 = -40.0;
pub const T_OUT_MAX: f64 = 50.0;

/// Heating (winter) or cooling (summer) operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Summer,
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Season::Winter => f.write_str("winter"),
            Season::Summer => f.write_str("summer"),
        }
    }
}

impl FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "winter" => Ok(Season::Winter),
            "summer" => Ok(Season::Summer),
            other => Err(Error::Argument(format!(
                "unknown season `{other}` (expected winter or summer)"
            ))),
        }
    }
}

/// Exogenous inputs for one quarter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exogenous {
    pub t_out: f64,
    pub solar: f64,
    pub q_gains: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousTrace {
    quarters: Vec<u64>,
    t_out: Vec<f64>,
    solar: Vec<f64>,
    q_gains: Vec<f64>,
}

impl ExogenousTrace {
    /// Builds a trace with quarters numbered from zero.
    pub fn new(t_out: Vec<f64>, solar: Vec<f64>, q_gains: Vec<f64>) -> Result<Self> {
        let quarters = (0..t_out.len() as u64).collect();
        Self::with_quarters(quarters, t_out, solar, q_gains)
    }

    pub fn with_quarters(quarters: Vec<u64>, t_out: Vec<f64>, solar: Vec<f64>, q_gains: Vec<f64>) -> Result<Self> {
        let n = t_out.len();
        if solar.len() != n || q_gains.len() != n || quarters.len() != n {
            return Err(Error::Argument(format!(
                "series lengths differ: quarters {}, t_out {}, solar {}, gains {}",
                quarters.len(),
                n,
                solar.len(),
                q_gains.len()
            )));
        }
        if n == 0 || !n.is_multiple_of(QUARTERS_PER_DAY) {
            return Err(Error::Length { len: n });
        }
        for k in 0..n {
            let row = k as u64 + 1;
            if !t_out[k].is_finite() || !(T_OUT_MIN..=T_OUT_MAX).contains(&t_out[k]) {
                return Err(Error::Malformed {
                    line: row,
                    column: "t_out".into(),
                    message: format!("outdoor temperature {} outside [-40, 50] °C", t_out[k]),
                });
            }
            if !solar[k].is_finite() || solar[k] < 0.0 {
                return Err(Error::Malformed {
                    line: row,
                    column: "solar".into(),
                    message: format!("irradiance {} must be finite and non-negative", solar[k]),
                });
            }
            if !q_gains[k].is_finite() {
                return Err(Error::Malformed {
                    line: row,
                    column: "gains".into(),
                    message: "internal gains must be finite".into(),
                });
            }
        }
        Ok(ExogenousTrace {
            quarters,
            t_out,
            solar,
            q_gains,
        })
    }

    pub fn len(&self) -> usize {
        self.t_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_out.is_empty()
    }

    pub fn days(&self) -> usize {
        self.len() / QUARTERS_PER_DAY
    }

    pub fn quarters(&self) -> &[u64] {
        &self.quarters
    }

    pub fn t_out(&self) -> &[f64] {
        &self.t_out
    }

    pub fn solar(&self) -> &[f64] {
        &self.solar
    }

    pub fn q_gains(&self) -> &[f64] {
        &self.q_gains
    }

    /// Inputs at absolute step `k`; steps past the end repeat the last row.
    pub fn at(&self, k: usize) -> Exogenous {
        let k = k.min(self.len() - 1);
        Exogenous {
            t_out: self.t_out[k],
            solar: self.solar[k],
            q_gains: self.q_gains[k],
        }
    }

    /// The 96 rows of day `day` (zero-based).
    pub fn day(&self, day: usize) -> Result<Vec<Exogenous>> {
        if day >= self.days() {
            return Err(Error::Argument(format!(
                "day {day} outside a trace of {} days",
                self.days()
            )));
        }
        let start = day * QUARTERS_PER_DAY;
        Ok((start..start + QUARTERS_PER_DAY).map(|k| self.at(k)).collect())
    }

    /// First `days` days of the trace.
    pub fn truncated(&self, days: usize) -> Result<Self> {
        if days == 0 || days > self.days() {
            return Err(Error::Argument(format!(
                "cannot take {days} days from a trace of {} days",
                self.days()
            )));
        }
        let n = days * QUARTERS_PER_DAY;
        Ok(ExogenousTrace {
            quarters: self.quarters[..n].to_vec(),
            t_out: self.t_out[..n].to_vec(),
            solar: self.solar[..n].to_vec(),
            q_gains: self.q_gains[..n].to_vec(),
        })
    }
}

/// Maps trace fields to CSV header names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub quarter: Option<String>,
    pub t_out: String,
    pub solar: String,
    pub q_gains: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            quarter: Some("quarter".into()),
            t_out: "t_out_c".into(),
            solar: "solar_wm2".into(),
            q_gains: "gains_w".into(),
        }
    }
}

impl ColumnMap {
    /// Parses `field=column` pairs separated by commas, e.g.
    /// `t_out=temp,solar=ghi`. Unmentioned fields keep their defaults.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut map = ColumnMap::default();
        for pair in spec.split(',').filter(|p| !p.trim().is_empty()) {
            let (field, column) = pair
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("column mapping `{pair}` lacks `=`")))?;
            let column = column.trim().to_string();
            match field.trim() {
                "quarter" => map.quarter = Some(column),
                "t_out" => map.t_out = column,
                "solar" => map.solar = column,
                "gains" | "q_gains" => map.q_gains = column,
                other => return Err(Error::Argument(format!("unknown trace field `{other}`"))),
            }
        }
        Ok(map)
    }
}

pub fn load_trace(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<ExogenousTrace> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| {
        index.get(name).copied().ok_or_else(|| Error::Malformed {
            line: 1,
            column: name.to_string(),
            message: "column missing from header".into(),
        })
    };
    let quarter_col = columns.quarter.as_deref().map(find).transpose()?;
    let t_out_col = find(&columns.t_out)?;
    let solar_col = find(&columns.solar)?;
    let gains_col = find(&columns.q_gains)?;

    let (mut quarters, mut t_out, mut solar, mut gains) = (vec![], vec![], vec![], vec![]);
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(row_idx as u64 + 2);
        let number = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            let value: f64 = raw.parse().map_err(|_| Error::Malformed {
                line,
                column: name.to_string(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Malformed {
                    line,
                    column: name.to_string(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            Ok(value)
        };
        let q = match quarter_col {
            Some(col) => {
                let name = columns.quarter.as_deref().unwrap_or("quarter");
                let raw = record.get(col).unwrap_or("");
                raw.parse::<u64>().map_err(|_| Error::Malformed {
                    line,
                    column: name.to_string(),
                    message: format!("`{raw}` is not a quarter index"),
                })?
            }
            None => row_idx as u64,
        };
        let to = number(t_out_col, &columns.t_out)?;
        if !(T_OUT_MIN..=T_OUT_MAX).contains(&to) {
            return Err(Error::Malformed {
                line,
                column: columns.t_out.clone(),
                message: format!("outdoor temperature {to} outside [-40, 50] °C"),
            });
        }
        let s = number(solar_col, &columns.solar)?;
        if s < 0.0 {
            return Err(Error::Malformed {
                line,
                column: columns.solar.clone(),
                message: format!("negative irradiance {s}"),
            });
        }
        let g = number(gains_col, &columns.q_gains)?;
        quarters.push(q);
        t_out.push(to);
        solar.push(s);
        gains.push(g);
    }
    ExogenousTrace::with_quarters(quarters, t_out, solar, gains)
}

/// Writes the trace with the `quarter,t_out_c,solar_wm2,gains_w` header.
/// Values use the shortest representation that parses back to the same `f64`.
pub fn save_trace(trace: &ExogenousTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    writer
        .write_record(["quarter", "t_out_c", "solar_wm2", "gains_w"])
        .map_err(|e| Error::csv(path, e))?;
    for k in 0..trace.len() {
        writer
            .write_record([
                trace.quarters[k].to_string(),
                trace.t_out[k].to_string(),
                trace.solar[k].to_string(),
                trace.q_gains[k].to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Shape parameters of the synthetic weather generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Mean outdoor temperature, °C.
    pub t_mean: f64,
    /// Amplitude of the daily sinusoid (coldest at 03h, warmest at 15h), °C.
    pub t_amplitude: f64,
    /// Standard deviation of the per-day offset of the mean, °C.
    pub day_offset_std: f64,
    /// Standard deviation of the AR(1) quarter-hour noise, °C.
    pub noise_std: f64,
    /// Peak irradiance at solar noon on a clear day, W/m².
    pub solar_peak: f64,
    /// Hours of daylight centred on noon.
    pub daylight_hours: f64,
    /// Lower bound of the per-day clear-sky fraction.
    pub min_clearness: f64,
    /// Occupancy gains baseline and peak, W.
    pub gains_base: f64,
    pub gains_peak: f64,
}

impl SynthParams {
    pub fn for_season(season: Season) -> Self {
        match season {
            Season::Winter => SynthParams {
                t_mean: 4.0,
                t_amplitude: 4.0,
                day_offset_std: 2.0,
                noise_std: 0.3,
                solar_peak: 300.0,
                daylight_hours: 8.0,
                min_clearness: 0.3,
                gains_base: 100.0,
                gains_peak: 600.0,
            },
            Season::Summer => SynthParams {
                t_mean: 24.0,
                t_amplitude: 5.0,
                day_offset_std: 2.0,
                noise_std: 0.3,
                solar_peak: 800.0,
                daylight_hours: 15.0,
                min_clearness: 0.5,
                gains_base: 100.0,
                gains_peak: 600.0,
            },
        }
    }
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams::for_season(Season::Winter)
    }
}

pub fn synthesize_trace(days: usize, season: Season, seed: u64) -> Result<ExogenousTrace> {
    synthesize_trace_with(days, &SynthParams::for_season(season), seed)
}

/// Deterministic synthetic trace: sinusoidal temperature with a per-day offset
/// and AR(1) noise, a clipped half-sine irradiance scaled by a per-day
/// clearness draw, and a two-peak occupancy gain profile (morning and evening).
pub fn synthesize_trace_with(days: usize, p: &SynthParams, seed: u64) -> Result<ExogenousTrace> {
    if days < 1 {
        return Err(Error::Argument("days must be at least 1".into()));
    }
    let n = days * QUARTERS_PER_DAY;
    let mut temp_rng = seeded(derive_seed(seed, 1));
    let mut sky_rng = seeded(derive_seed(seed, 2));
    let day_offset = Normal::new(0.0, p.day_offset_std.max(0.0)).map_err(|e| Error::Argument(e.to_string()))?;
    let noise = Normal::new(0.0, p.noise_std.max(0.0)).map_err(|e| Error::Argument(e.to_string()))?;
    const AR: f64 = 0.95;
    let innovation = (1.0 - AR * AR).sqrt();

    let mut t_out = Vec::with_capacity(n);
    let mut solar = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    let mut ar_state = 0.0;
    for _day in 0..days {
        let offset = day_offset.sample(&mut temp_rng);
        let clearness = sky_rng.gen_range(p.min_clearness.clamp(0.0, 1.0)..=1.0);
        for q in 0..QUARTERS_PER_DAY {
            let hour = (q as f64 + 0.5) / 4.0;
            ar_state = AR * ar_state + innovation * noise.sample(&mut temp_rng);
            let t = p.t_mean + offset - p.t_amplitude * (2.0 * PI * (hour - 3.0) / 24.0).cos() + ar_state;
            t_out.push(t.clamp(T_OUT_MIN, T_OUT_MAX));

            let sunrise = 12.0 - p.daylight_hours / 2.0;
            let phase = (hour - sunrise) / p.daylight_hours;
            let s = if (0.0..=1.0).contains(&phase) {
                (p.solar_peak * clearness * (PI * phase).sin()).max(0.0)
            } else {
                0.0
            };
            solar.push(s);

            let morning = (-(hour - 7.5).powi(2) / 2.0).exp();
            let evening = (-(hour - 19.0).powi(2) / (2.0 * 1.5 * 1.5)).exp();
            gains.push(p.gains_base + (p.gains_peak - p.gains_base) * morning.max(evening));
        }
    }
    ExogenousTrace::new(t_out, solar, gains)
}
