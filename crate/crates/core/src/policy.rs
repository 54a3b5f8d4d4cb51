//! Boltzmann exploration and the learning agent's controller.
//!
//! Q-values are costs, so an action's weight is `exp(-Q/τ)`: cheaper actions
//! are more likely. The temperature follows `τ_d = d^(-n)` over experiment
//! days, starting at 1 on the first day.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::EncoderWeights;
use crate::env::{Controller, StepContext};
use crate::fqi::{reduce_state, QFunction};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationSchedule {
    pub exponent: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule { exponent: 0.7 }
    }
}

impl ExplorationSchedule {
    /// Temperature on experiment day `day` (1-based).
    pub fn tau(&self, day: usize) -> f64 {
        (day.max(1) as f64).powf(-self.exponent)
    }
}

/// Selection probabilities `∝ exp(-Q/τ)`, shifted by the smallest Q so the
/// largest weight is exactly 1.
pub fn boltzmann_probs(q_values: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Temperature(tau));
    }
    if q_values.is_empty() {
        return Err(Error::Argument("no actions to choose from".into()));
    }
    let q_min = q_values.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = q_values.iter().map(|q| (-(q - q_min) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Inverse-CDF draw of an index from `probs`.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // rounding left the total just below u
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Every action equally likely; used before any Q-function exists.
    Uniform,
    Boltzmann {
        tau: f64,
    },
    Greedy,
}

/// Controller of the learning agent for one day.
#[derive(Debug, Clone)]
pub struct LearningController {
    policy: Option<(QFunction, EncoderWeights)>,
    mode: Mode,
    rng: ChaCha8Rng,
}

impl LearningController {
    /// Uniform random requests, for the first day when the batch is empty.
    pub fn exploring(seed: u64) -> Self {
        LearningController {
            policy: None,
            mode: Mode::Uniform,
            rng: seeded(seed),
        }
    }

    pub fn boltzmann(q: QFunction, encoder: EncoderWeights, tau: f64, seed: u64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Temperature(tau));
        }
        Ok(LearningController {
            policy: Some((q, encoder)),
            mode: Mode::Boltzmann { tau },
            rng: seeded(seed),
        })
    }

    pub fn greedy(q: QFunction, encoder: EncoderWeights, seed: u64) -> Self {
        LearningController {
            policy: Some((q, encoder)),
            mode: Mode::Greedy,
            rng: seeded(seed),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

impl Controller for LearningController {
    fn request(&mut self, ctx: &StepContext<'_>, actions: &[f64]) -> Result<f64> {
        let Some((q, encoder)) = &self.policy else {
            return Ok(actions[self.rng.gen_range(0..actions.len())]);
        };
        if q.actions() != actions {
            return Err(Error::Argument(
                "controller actions differ from those the Q-function was fitted on".into(),
            ));
        }
        let state = reduce_state(ctx.x, encoder)?;
        let values = q.q_values(&state)?;
        let index = match self.mode {
            Mode::Boltzmann { tau } => sample_action(&boltzmann_probs(&values, tau)?, &mut self.rng),
            Mode::Greedy | Mode::Uniform => crate::fqi::argmin(&values),
        };
        Ok(actions[index])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schedule_values() {
        let s = ExplorationSchedule::default();
        assert_eq!(s.tau(1), 1.0);
        assert!((s.tau(2) - 2f64.powf(-0.7)).abs() < 1e-15);
        for d in 1..500 {
            assert!(s.tau(d + 1) < s.tau(d));
        }
    }

    #[test]
    fn equal_values_are_uniform() {
        let p = boltzmann_probs(&[3.0; 10], 0.5).unwrap();
        assert!(p.iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn cold_temperature_concentrates_on_argmin() {
        let q = [5.0, 4.0, 3.5, 6.0, 3.0, 9.0, 4.5, 7.0, 8.0, 3.2];
        let p = boltzmann_probs(&q, 1e-6).unwrap();
        assert!(p[4] >= 0.999);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_temperature_is_rejected() {
        assert!(matches!(boltzmann_probs(&[1.0, 2.0], 0.0), Err(Error::Temperature(_))));
        assert!(matches!(boltzmann_probs(&[1.0, 2.0], -1.0), Err(Error::Temperature(_))));
    }

    #[test]
    fn degenerate_probabilities() {
        let mut rng = seeded(1);
        let mut p = [0.0; 10];
        p[3] = 1.0;
        for _ in 0..1000 {
            assert_eq!(sample_action(&p, &mut rng), 3);
        }
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let p = boltzmann_probs(&[0.0, 0.3, 0.7, 1.2, 0.1, 2.0, 0.5, 0.9, 1.5, 0.2], 0.6).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 10];
        let mut rng = seeded(42);
        for _ in 0..n {
            counts[sample_action(&p, &mut rng)] += 1;
        }
        for (c, pi) in counts.iter().zip(&p) {
            let sigma = (n as f64 * pi * (1.0 - pi)).sqrt();
            assert!(
                (*c as f64 - n as f64 * pi).abs() <= 3.0 * sigma,
                "{c} vs {}",
                n as f64 * pi
            );
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let p = [0.25; 4];
        let draw = |seed| {
            let mut rng = seeded(seed);
            (0..50).map(|_| sample_action(&p, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    proptest! {
        #[test]
        fn shift_invariance(q in prop::collection::vec(0.0..100.0f64, 2..12), c in -50.0..50.0f64, tau in 0.05..20.0f64) {
            let shifted: Vec<f64> = q.iter().map(|v| v + c).collect();
            let a = boltzmann_probs(&q, tau).unwrap();
            let b = boltzmann_probs(&shifted, tau).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cheaper_is_likelier(q in prop::collection::vec(-1e3..1e3f64, 2..12), tau in 1e-3..1e3f64) {
            let p = boltzmann_probs(&q, tau).unwrap();
            for i in 0..q.len() {
                for j in 0..q.len() {
                    if q[i] < q[j] {
                        prop_assert!(p[i] >= p[j]);
                    }
                }
            }
        }
    }
}
