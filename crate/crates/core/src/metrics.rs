//! Daily comparison metrics.

use serde::{Deserialize, Serialize};

/// Distance of the indoor temperature at the end of the set-back period
/// from the comfort band that applies right after it.
pub fn metric_d(t_in_17: f64, bounds: (f64, f64)) -> f64 {
    (t_in_17 - bounds.1).max(0.0) + (bounds.0 - t_in_17).max(0.0)
}

/// Where the learning agent's energy falls between the default strategy
/// (0) and the prescient controller (1). `None` when the two anchors agree.
pub fn metric_m(e_l: f64, e_d: f64, e_p: f64) -> Option<f64> {
    if e_p == e_d {
        None
    } else {
        Some((e_l - e_d) / (e_p - e_d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyMetrics {
    pub day: usize,
    /// Learning agent energy, Wh.
    pub e_l: f64,
    /// Default strategy energy, Wh.
    pub e_d: f64,
    /// Prescient energy, Wh.
    pub e_p: f64,
    pub m_d: Option<f64>,
    /// Learning agent deviation at 17h00, °C.
    pub d_d: f64,
    /// Prescient deviation at 17h00, °C.
    pub d_p: f64,
    /// Comfort violations of the learning agent.
    pub violations: usize,
    pub violations_default: usize,
    pub violations_prescient: usize,
    /// Exploration temperature used that day; `None` for the uniform first day.
    pub tau: Option<f64>,
    /// Energy of a greedy rerun of the same day, when requested.
    pub e_greedy: Option<f64>,
}

impl DailyMetrics {
    pub const HEADER: &'static str =
        "day,e_l_wh,e_d_wh,e_p_wh,m_d,d_d_c,d_p_c,violations_l,violations_d,violations_p,tau,e_greedy_wh";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.day,
            self.e_l,
            self.e_d,
            self.e_p,
            opt(self.m_d),
            self.d_d,
            self.d_p,
            self.violations,
            self.violations_default,
            self.violations_prescient,
            opt(self.tau),
            opt(self.e_greedy)
        )
    }
}

/// Mean of the defined values, or `None` when there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_examples() {
        assert_eq!(metric_d(21.0, (20.0, 22.5)), 0.0);
        assert!((metric_d(19.2, (20.0, 22.5)) - 0.8).abs() < 1e-12);
        assert!((metric_d(23.0, (20.0, 22.5)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn performance_examples() {
        assert_eq!(metric_m(10_000.0, 10_000.0, 9_000.0), Some(0.0));
        assert_eq!(metric_m(9_000.0, 10_000.0, 9_000.0), Some(1.0));
        assert_eq!(metric_m(9_500.0, 10_000.0, 9_000.0), Some(0.5));
        assert_eq!(metric_m(9_500.0, 9_000.0, 9_000.0), None);
    }

    #[test]
    fn csv_marks_undefined() {
        let m = DailyMetrics {
            day: 3,
            e_l: 1.0,
            e_d: 2.0,
            e_p: 2.0,
            m_d: None,
            d_d: 0.0,
            d_p: 0.0,
            violations: 0,
            violations_default: 1,
            violations_prescient: 0,
            tau: None,
            e_greedy: None,
        };
        let row = m.csv_row();
        assert_eq!(row.split(',').count(), DailyMetrics::HEADER.split(',').count());
        assert!(row.contains("NA"));
        assert_eq!(mean_defined([None, Some(1.0), Some(3.0)]), Some(2.0));
        assert_eq!(mean_defined([None]), None);
    }
}
