//! Fitted Q-iteration over the encoded batch.
//!
//! Every stored transition is reduced to `(d, t, T_in, code, T_out, S)` with
//! the current encoder, and the stage cost is recomputed from the recorded
//! draw and the next indoor temperature. Starting from `Q̂₀ = 0`, each
//! iteration regresses `c + min_u Q̂(x′, u)` with a fresh extra-trees
//! forest. There is no discounting: after `N` iterations `Q̂` estimates the
//! `N`-step cost to go.

use rayon::prelude::*;

use crate::autoencoder::EncoderWeights;
use crate::env::{self, AugmentedState, ComfortSchedule, Transition};
use crate::extratrees::{FeatureMatrix, Forest, ForestConfig};
use crate::rng::derive_seed;
use crate::{Error, Result, STEP_HOURS};

/// Reduced-state width with the default six-feature code.
pub const REDUCED_DIM: usize = 11;

/// Default horizon: one day of quarters.
pub const HORIZON: usize = 96;

/// Transitions in reduced coordinates with their recomputed costs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBatch {
    state_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    next_states: Vec<f64>,
    costs: Vec<f64>,
}

/// `(d, t, T_in, code, T_out, S)` for one augmented state.
pub fn reduce_state(x: &AugmentedState, encoder: &EncoderWeights) -> Result<Vec<f64>> {
    let code = encoder.encode(&x.z.to_array())?;
    let mut out = Vec::with_capacity(5 + code.len());
    out.push(f64::from(x.obs.day));
    out.push(f64::from(x.obs.quarter));
    out.push(x.obs.t_in);
    out.extend_from_slice(&code);
    out.push(x.obs.t_out);
    out.push(x.obs.solar);
    Ok(out)
}

impl ReducedBatch {
    /// Encodes `transitions` with `encoder`; costs are judged against the
    /// bounds of the quarter each transition lands in.
    pub fn from_transitions(
        transitions: &[Transition],
        encoder: &EncoderWeights,
        schedule: &ComfortSchedule,
    ) -> Result<Self> {
        let state_dim = 5 + encoder.code_dim();
        let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = transitions
            .par_iter()
            .map(|t| {
                let s = reduce_state(&t.x, encoder)?;
                let s_next = reduce_state(&t.x_next, encoder)?;
                let bounds = schedule.bounds(t.x_next.obs.quarter);
                Ok((s, s_next, env::cost(t.u_ph, t.x_next.obs.t_in, bounds, STEP_HOURS)))
            })
            .collect::<Result<_>>()?;
        let mut batch = ReducedBatch {
            state_dim,
            states: Vec::with_capacity(rows.len() * state_dim),
            actions: transitions.iter().map(|t| t.u).collect(),
            next_states: Vec::with_capacity(rows.len() * state_dim),
            costs: Vec::with_capacity(rows.len()),
        };
        for (s, s_next, c) in rows {
            batch.states.extend(s);
            batch.next_states.extend(s_next);
            batch.costs.push(c);
        }
        Ok(batch)
    }

    /// Batch from explicit flat rows, for small hand-built problems.
    pub fn from_rows(
        state_dim: usize,
        states: Vec<f64>,
        actions: Vec<f64>,
        next_states: Vec<f64>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        let n = actions.len();
        if state_dim == 0 {
            return Err(Error::Argument("state dimension must be positive".into()));
        }
        for (len, what) in [
            (states.len(), n * state_dim),
            (next_states.len(), n * state_dim),
            (costs.len(), n),
        ] {
            if len != what {
                return Err(Error::Dimension {
                    expected: what,
                    got: len,
                });
            }
        }
        Ok(ReducedBatch {
            state_dim,
            states,
            actions,
            next_states,
            costs,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn next_state(&self, i: usize) -> &[f64] {
        &self.next_states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn action(&self, i: usize) -> f64 {
        self.actions[i]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Regression inputs: each state with its action appended.
    fn inputs(&self) -> FeatureMatrix {
        let cols = self.state_dim + 1;
        let mut data = Vec::with_capacity(self.len() * cols);
        for i in 0..self.len() {
            data.extend_from_slice(self.state(i));
            data.push(self.actions[i]);
        }
        FeatureMatrix::new(self.len(), cols, data).expect("consistent by construction")
    }
}

/// The regressed state-action cost-to-go.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    forest: Option<Forest>,
    actions: Vec<f64>,
    state_dim: usize,
    iterations: usize,
}

impl QFunction {
    /// `Q ≡ 0`, the starting point of the iteration.
    pub fn zero(actions: Vec<f64>, state_dim: usize) -> Self {
        QFunction {
            forest: None,
            actions,
            state_dim,
            iterations: 0,
        }
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn forest(&self) -> Option<&Forest> {
        self.forest.as_ref()
    }

    /// `Q(x̂, u)` for every action, in action order.
    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::Dimension {
                expected: self.state_dim,
                got: state.len(),
            });
        }
        let mut out = vec![0.0; self.actions.len()];
        if let Some(f) = &self.forest {
            f.predict_actions_unchecked(state, &self.actions, &mut out);
        }
        Ok(out)
    }

    /// Index of the cheapest action; ties go to the lowest power level.
    pub fn greedy_index(&self, state: &[f64]) -> Result<usize> {
        Ok(argmin(&self.q_values(state)?))
    }

    pub fn greedy_action(&self, state: &[f64]) -> Result<f64> {
        Ok(self.actions[self.greedy_index(state)?])
    }
}

/// First index of the smallest value.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn check_actions(actions: &[f64]) -> Result<()> {
    if actions.is_empty() {
        return Err(Error::Argument("the action set is empty".into()));
    }
    if actions.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Argument("actions must be strictly ascending".into()));
    }
    Ok(())
}

pub fn fitted_q_iteration(
    batch: &ReducedBatch,
    actions: &[f64],
    iterations: usize,
    config: &ForestConfig,
    seed: u64,
) -> Result<QFunction> {
    fitted_q_iteration_observed(batch, actions, iterations, config, seed, |_, _| {})
}

/// Same as [`fitted_q_iteration`], calling `observe(n, targets)` with the
/// regression targets of every iteration `n = 1..=iterations`.
pub fn fitted_q_iteration_observed(
    batch: &ReducedBatch,
    actions: &[f64],
    iterations: usize,
    config: &ForestConfig,
    seed: u64,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<QFunction> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_actions(actions)?;
    let inputs = batch.inputs();
    let mut q = QFunction::zero(actions.to_vec(), batch.state_dim);
    for n in 1..=iterations {
        let targets: Vec<f64> = match &q.forest {
            None => batch.costs.clone(),
            Some(forest) => (0..batch.len())
                .into_par_iter()
                .map_init(
                    || vec![0.0; actions.len()],
                    |buf, i| {
                        forest.predict_actions_unchecked(batch.next_state(i), actions, buf);
                        batch.costs[i] + buf.iter().copied().fold(f64::INFINITY, f64::min)
                    },
                )
                .collect(),
        };
        observe(n, &targets);
        q.forest = Some(Forest::fit(&inputs, &targets, config, derive_seed(seed, n as u64))?);
        q.iterations = n;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::TrainConfig;
    use crate::env::{run_day, EnvConfig, EpisodeState, StepContext};
    use crate::thermal::{BuildingParams, BuildingState};
    use crate::thermostat::ThermostatParams;
    use crate::weather::{synthesize_trace, Season};
    use proptest::prelude::*;

    /// Deterministic finite MDP: `next[s][a]`, `cost[s][a]`; states are
    /// encoded as the scalar `s`, actions as `a`.
    #[derive(Debug)]
    struct Toy {
        next: Vec<Vec<usize>>,
        cost: Vec<Vec<f64>>,
    }

    impl Toy {
        fn chain() -> Self {
            Toy {
                next: vec![vec![0, 1], vec![0, 1]],
                cost: vec![vec![2.0, 1.0], vec![0.5, 3.0]],
            }
        }

        fn actions(&self) -> Vec<f64> {
            (0..self.cost[0].len()).map(|a| a as f64).collect()
        }

        /// Every state-action pair three times so leaves can be exact.
        fn batch(&self, shift: f64) -> ReducedBatch {
            let (mut s, mut a, mut s2, mut c) = (vec![], vec![], vec![], vec![]);
            for _ in 0..3 {
                for (si, row) in self.next.iter().enumerate() {
                    for (ai, &ni) in row.iter().enumerate() {
                        s.push(si as f64);
                        a.push(ai as f64);
                        s2.push(ni as f64);
                        c.push(self.cost[si][ai] + shift);
                    }
                }
            }
            ReducedBatch::from_rows(1, s, a, s2, c).unwrap()
        }

        fn value_iteration(&self, n: usize) -> Vec<Vec<f64>> {
            let mut q = vec![vec![0.0; self.cost[0].len()]; self.cost.len()];
            for _ in 0..n {
                let v: Vec<f64> = q
                    .iter()
                    .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
                    .collect();
                q = self
                    .cost
                    .iter()
                    .zip(&self.next)
                    .map(|(cr, nr)| cr.iter().zip(nr).map(|(c, &ns)| c + v[ns]).collect())
                    .collect();
            }
            q
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        let b = ReducedBatch::from_rows(1, vec![], vec![], vec![], vec![]).unwrap();
        let err = fitted_q_iteration(&b, &[0.0, 1.0], 3, &ForestConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::EmptyBatch));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn matches_value_iteration_on_toy_chain() {
        let toy = Toy::chain();
        let batch = toy.batch(0.0);
        for n in [1, 2, 3, 7, 20] {
            let q = fitted_q_iteration(&batch, &toy.actions(), n, &ForestConfig::default(), 5).unwrap();
            let exact = toy.value_iteration(n);
            for s in 0..2 {
                let got = q.q_values(&[s as f64]).unwrap();
                for a in 0..2 {
                    assert!((got[a] - exact[s][a]).abs() < 1e-9, "n={n} s={s} a={a}");
                }
            }
        }
    }

    #[test]
    fn greedy_invariant_under_cost_shift() {
        let toy = Toy::chain();
        let cfg = ForestConfig::default();
        let q = fitted_q_iteration(&toy.batch(0.0), &toy.actions(), 10, &cfg, 1).unwrap();
        let shifted = fitted_q_iteration(&toy.batch(7.0), &toy.actions(), 10, &cfg, 1).unwrap();
        for s in [0.0, 1.0] {
            assert_eq!(q.greedy_index(&[s]).unwrap(), shifted.greedy_index(&[s]).unwrap());
        }
    }

    #[test]
    fn zero_costs_give_zero_q() {
        let toy = Toy {
            next: vec![vec![1, 0], vec![1, 1]],
            cost: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        let q = fitted_q_iteration(&toy.batch(0.0), &toy.actions(), HORIZON, &ForestConfig::default(), 2).unwrap();
        assert_eq!(q.q_values(&[0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(q.greedy_action(&[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_self_loop_accumulates() {
        let b = ReducedBatch::from_rows(1, vec![0.3], vec![1.0], vec![0.3], vec![5.0]).unwrap();
        let actions = [0.0, 1.0];
        let q1 = fitted_q_iteration(&b, &actions, 1, &ForestConfig::default(), 0).unwrap();
        assert_eq!(q1.q_values(&[0.3]).unwrap(), vec![5.0, 5.0]);
        let q2 = fitted_q_iteration(&b, &actions, 2, &ForestConfig::default(), 0).unwrap();
        assert_eq!(q2.q_values(&[0.3]).unwrap(), vec![10.0, 10.0]);
        assert_eq!(q2.greedy_action(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn reduced_batch_from_simulation() {
        let env = EnvConfig::new(
            BuildingParams::high_insulation(),
            ThermostatParams::default(),
            Season::Winter,
            ComfortSchedule::constant(20.0, 22.5),
        )
        .unwrap();
        let trace = synthesize_trace(1, Season::Winter, 4).unwrap();
        let start = EpisodeState::initial(BuildingState::new(20.5, 20.5), &trace, 0, 1);
        let mut k = 0;
        let mut cycle = |_: &StepContext<'_>, a: &[f64]| {
            k += 3;
            a[k % a.len()]
        };
        let day = run_day(&mut cycle, &env, start, &trace).unwrap();
        let data: Vec<f64> = day.transitions.iter().flat_map(|t| t.x.z.to_array()).collect();
        let cfg = TrainConfig {
            max_iters: 20,
            ..Default::default()
        };
        let (enc, _) = EncoderWeights::train(&data, &cfg, 1).unwrap();
        let batch = ReducedBatch::from_transitions(&day.transitions, &enc, &env.schedule).unwrap();
        assert_eq!(batch.len(), 96);
        assert_eq!(batch.state_dim(), REDUCED_DIM);
        for (c, rec) in batch.costs().iter().zip(&day.trace.steps) {
            assert_eq!(*c, rec.cost);
        }
        assert_eq!(batch.state(5)[1], 6.0);
        assert_eq!(batch.next_state(5), batch.state(6));

        let q = fitted_q_iteration(&batch, &env.actions, 4, &ForestConfig::default(), 3).unwrap();
        assert_eq!(q.iterations(), 4);
        assert_eq!(q.q_values(batch.state(0)).unwrap().len(), 10);
        assert!(q.q_values(&[0.0; 3]).is_err());
    }

    fn finite_mdp() -> impl Strategy<Value = Toy> {
        (1usize..4, 2usize..4).prop_flat_map(|(ns, na)| {
            (
                prop::collection::vec(prop::collection::vec(0..ns, na), ns),
                prop::collection::vec(prop::collection::vec(0.0..1000.0f64, na), ns),
            )
                .prop_map(|(next, cost)| Toy { next, cost })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn targets_monotone_bounded_and_exact(toy in finite_mdp()) {
            let n_iter = 12;
            let batch = toy.batch(0.0);
            let c_max = batch.costs().iter().copied().fold(0.0, f64::max);
            let mut prev: Option<Vec<f64>> = None;
            let cfg = ForestConfig { n_trees: 10, ..Default::default() };
            let q = fitted_q_iteration_observed(&batch, &toy.actions(), n_iter, &cfg, 9, |n, t| {
                for &v in t {
                    assert!(v <= n as f64 * c_max + 1e-9);
                }
                if let Some(p) = &prev {
                    for (a, b) in t.iter().zip(p) {
                        assert!(a + 1e-9 >= *b);
                    }
                }
                prev = Some(t.to_vec());
            }).unwrap();
            let exact = toy.value_iteration(n_iter);
            for (s, row) in exact.iter().enumerate() {
                let got = q.q_values(&[s as f64]).unwrap();
                for (g, e) in got.iter().zip(row) {
                    prop_assert!((g - e).abs() <= 1e-9 * e.abs().max(1.0));
                }
            }
        }
    }
}
