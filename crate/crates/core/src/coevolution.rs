//! Coevolutionary action-opinion dynamics and committed-minority control.
//!
//! A revising agent switches action on the sign of its discriminant `delta_i`
//! and moves its opinion to the convex combination of the neighborhood mean
//! opinion and its new action, which is the joint best response to the
//! coevolutionary payoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{coevolution_payoff, Action, CoevolutionParams, InnerGame, PopulationState};
use crate::graph::Graph;

/// Sweep convergence threshold on opinions, max norm.
pub const SWEEP_TOL: f64 = 1e-10;
/// Decreases smaller than this are rounding, not a monotonicity violation.
pub const MONOTONE_SLACK: f64 = 1e-12;
pub const DEFAULT_MAX_ROUNDS: usize = 1_000_000;

/// Update rule for one population: action layer `a`, opinion layer `w`, and
/// per-agent weights.
#[derive(Clone, Debug)]
pub struct CoevolutionRule {
    a: Graph,
    w: Graph,
    params: CoevolutionParams,
}

impl CoevolutionRule {
    /// Both layers must be row-stochastic and sized like `params`.
    pub fn new(a: Graph, w: Graph, params: CoevolutionParams) -> Result<Self> {
        params.validate()?;
        let n = params.n();
        if a.n() != n || w.n() != n {
            return Err(Error::domain(format!(
                "layers have {} and {} nodes, parameters {n}",
                a.n(),
                w.n()
            )));
        }
        if !a.is_row_stochastic() || !w.is_row_stochastic() {
            return Err(Error::domain("coevolution layers must be row-stochastic"));
        }
        Ok(CoevolutionRule { a, w, params })
    }

    /// Same graph for both layers.
    pub fn single_layer(g: Graph, params: CoevolutionParams) -> Result<Self> {
        Self::new(g.clone(), g, params)
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn params(&self) -> &CoevolutionParams {
        &self.params
    }

    pub fn action_layer(&self) -> &Graph {
        &self.a
    }

    pub fn opinion_layer(&self) -> &Graph {
        &self.w
    }

    /// `2 b l / (b + l)` where `b` is the effective opinion weight.
    fn opinion_coupling(&self, i: usize) -> f64 {
        let b = self.params.opinion_weight(i);
        let l = self.params.lambda[i];
        2.0 * b * l / (b + l)
    }

    /// Payoff advantage of `+1` over `-1` after each action is paired with its
    /// optimal opinion.
    pub fn discriminant(&self, i: usize, state: &PopulationState) -> Result<f64> {
        if i >= self.n() {
            return Err(Error::domain(format!("node {i} out of range")));
        }
        let b = self.params.opinion_weight(i);
        if !(b + self.params.lambda[i] > 0.0) {
            return Err(Error::domain(format!("agent {i}: opinion weight + lambda is zero")));
        }
        let mean_opinion = self.w.weighted_sum(i, |j| state.y[j]);
        let action_term = match self.params.inner {
            InnerGame::Coordination(c) => {
                // f(+1) - f(-1) = alpha/2 + (1 + alpha/2) sum_j a_ij x_j on stochastic rows
                let sum = self.a.action_sum(i, &state.x);
                0.5 * c.alpha + (1.0 + 0.5 * c.alpha) * sum
            }
            InnerGame::Pgg(p) => p.r / p.n as f64 - 1.0,
        };
        Ok(self.params.gamma[i] * action_term + self.opinion_coupling(i) * mean_opinion)
    }

    /// Opinion that maximizes the payoff of agent `i` once it plays `action`.
    pub fn optimal_opinion(&self, i: usize, action: Action, state: &PopulationState) -> f64 {
        let b = self.params.opinion_weight(i);
        let l = self.params.lambda[i];
        let mean_opinion = self.w.weighted_sum(i, |j| state.y[j]);
        ((b * mean_opinion + l * action.value()) / (b + l)).clamp(-1.0, 1.0)
    }

    /// Closed-form joint best response of agent `i`.
    pub fn revise(&self, i: usize, state: &PopulationState) -> Result<(Action, f64)> {
        let delta = self.discriminant(i, state)?;
        let action = if delta > 0.0 {
            Action::Plus
        } else if delta < 0.0 {
            Action::Minus
        } else {
            state.x[i]
        };
        Ok((action, self.optimal_opinion(i, action, state)))
    }

    /// Revises the active, non-committed agents against the state at time `t`.
    pub fn step(&self, state: &PopulationState, active: &[usize]) -> Result<PopulationState> {
        let mut next = state.clone();
        for &i in active {
            if state.committed[i] {
                continue;
            }
            let (x, y) = self.revise(i, state)?;
            next.x[i] = x;
            next.y[i] = y;
        }
        Ok(next)
    }

    pub fn payoff(&self, i: usize, choice: (Action, f64), state: &PopulationState) -> Result<f64> {
        coevolution_payoff(&self.a, &self.w, &self.params, i, choice, state)
    }

    /// Whether the closed-form update of agent `i` maximizes its payoff, by
    /// comparing both actions each paired with its optimal opinion.
    /// `None` for committed agents.
    pub fn joint_best_response_check(&self, i: usize, state: &PopulationState) -> Result<Option<bool>> {
        if state.committed[i] {
            return Ok(None);
        }
        let chosen = self.revise(i, state)?;
        let chosen_payoff = self.payoff(i, chosen, state)?;
        let mut best = f64::NEG_INFINITY;
        for a in Action::BOTH {
            let s = self.optimal_opinion(i, a, state);
            best = best.max(self.payoff(i, (a, s), state)?);
        }
        Ok(Some(chosen_payoff >= best - 1e-10))
    }

    /// `beta l / (beta + l) > gamma (1 - r/n)` for every agent; the condition
    /// for the all-cooperation profile to be an equilibrium.
    pub fn all_cooperation_equilibrium_check(&self) -> Result<bool> {
        let InnerGame::Pgg(p) = self.params.inner else {
            return Err(Error::domain("all-cooperation condition applies to the public goods game"));
        };
        let ratio = p.r / p.n as f64;
        Ok((0..self.n()).all(|i| {
            let b = self.params.beta[i];
            let l = self.params.lambda[i];
            b * l / (b + l) > self.params.gamma[i] * (1.0 - ratio)
        }))
    }

    /// Status quo `x = y = -1` with `committed` pinned at `+1`.
    pub fn controlled_initial_state(&self, committed: &[usize]) -> Result<PopulationState> {
        let mut state = PopulationState::consensus(self.n(), Action::Minus);
        state.commit(committed)?;
        Ok(state)
    }

    /// Runs synchronous sweeps from the controlled status quo until the state
    /// stops moving, checking that every coordinate is non-decreasing.
    pub fn reach_collective_change(&self, committed: &[usize]) -> Result<ChangeOutcome> {
        self.reach_collective_change_with(committed, DEFAULT_MAX_ROUNDS)
    }

    pub fn reach_collective_change_with(&self, committed: &[usize], max_rounds: usize) -> Result<ChangeOutcome> {
        let mut state = self.controlled_initial_state(committed)?;
        let everyone: Vec<usize> = (0..self.n()).collect();
        let mut rounds = 0;
        loop {
            let next = self.step(&state, &everyone)?;
            let mut flipped = false;
            let mut moved: f64 = 0.0;
            for i in 0..self.n() {
                if next.x[i] < state.x[i] {
                    return Err(Error::NonMonotone {
                        round: rounds + 1,
                        node: i,
                        detail: "action switched from +1 to -1".into(),
                    });
                }
                let dy = next.y[i] - state.y[i];
                if dy < -MONOTONE_SLACK {
                    return Err(Error::NonMonotone {
                        round: rounds + 1,
                        node: i,
                        detail: format!("opinion decreased by {:e}", -dy),
                    });
                }
                flipped |= next.x[i] != state.x[i];
                moved = moved.max(dy.abs());
            }
            if !flipped && moved < SWEEP_TOL {
                break;
            }
            state = next;
            rounds += 1;
            if rounds >= max_rounds {
                return Err(Error::Iteration {
                    iterations: rounds,
                    residual: moved,
                });
            }
        }
        Ok(ChangeOutcome {
            changed: state.is_consensus(Action::Plus),
            rounds,
            final_state: state,
        })
    }

    /// Smallest committed fraction that produces collective change, by
    /// bisection over the number of committed agents `0..m`. Intended for
    /// vertex-transitive graphs where placement does not matter.
    pub fn critical_mass(&self) -> Result<f64> {
        Ok(self.critical_count()? as f64 / self.n() as f64)
    }

    pub fn critical_count(&self) -> Result<usize> {
        let n = self.n();
        let changes = |m: usize| -> Result<bool> {
            let set: Vec<usize> = (0..m).collect();
            Ok(self.reach_collective_change(&set)?.changed)
        };
        // changes(n) holds trivially; find the least m with changes(m)
        let (mut lo, mut hi) = (0usize, n);
        if changes(0)? {
            return Ok(0);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if changes(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Grows the committed set along `ranking` until collective change
    /// occurs. Fails once the set would cover all but one node.
    pub fn min_control_set_greedy(&self, ranking: &[usize], ranking_name: &str) -> Result<ControlSetReport> {
        if ranking.is_empty() {
            return Err(Error::domain("empty candidate ranking"));
        }
        let n = self.n();
        if let Some(&i) = ranking.iter().find(|&&i| i >= n) {
            return Err(Error::domain(format!("ranking names node {i} of {n}")));
        }
        let limit = ranking.len().min(n.saturating_sub(1)).max(1);
        let mut last = None;
        for size in 1..=limit {
            let set = &ranking[..size];
            let outcome = self.reach_collective_change(set)?;
            let changed = outcome.changed;
            last = Some(ControlSetReport::new(set.to_vec(), &outcome, ranking_name));
            if changed {
                break;
            }
        }
        Ok(last.expect("at least one candidate set was evaluated"))
    }

    /// Evaluates one committed set as given.
    pub fn evaluate_control_set(&self, committed: &[usize], ranking_name: &str) -> Result<ControlSetReport> {
        let outcome = self.reach_collective_change(committed)?;
        Ok(ControlSetReport::new(committed.to_vec(), &outcome, ranking_name))
    }
}

#[derive(Clone, Debug)]
pub struct ChangeOutcome {
    pub changed: bool,
    pub rounds: usize,
    pub final_state: PopulationState,
}

/// Result of a control-set evaluation or search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSetReport {
    pub committed_nodes: Vec<usize>,
    pub changed: bool,
    pub rounds: usize,
    pub final_zeta: f64,
    pub ranking_used: String,
}

impl ControlSetReport {
    fn new(committed_nodes: Vec<usize>, outcome: &ChangeOutcome, ranking: &str) -> Self {
        ControlSetReport {
            committed_nodes,
            changed: outcome.changed,
            rounds: outcome.rounds,
            final_zeta: outcome.final_state.zeta(),
            ranking_used: ranking.to_string(),
        }
    }
}

/// Node orderings used to place a committed minority.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    #[default]
    Eigenvector,
    Degree,
    Random,
}

impl Ranking {
    pub fn name(self) -> &'static str {
        match self {
            Ranking::Eigenvector => "eigenvector",
            Ranking::Degree => "degree",
            Ranking::Random => "random",
        }
    }

    /// Nodes in descending score order, ties by index. `Random` shuffles
    /// with `seed`.
    pub fn order(self, g: &Graph, seed: u64) -> Result<Vec<usize>> {
        let scores: Vec<f64> = match self {
            Ranking::Eigenvector => g.eigenvector_centrality(
                crate::graph::DEFAULT_CENTRALITY_TOL,
                crate::graph::DEFAULT_CENTRALITY_MAX_ITER,
            )?,
            Ranking::Degree => g.out_degrees().into_iter().map(|d| d as f64).collect(),
            Ranking::Random => {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut order: Vec<usize> = (0..g.n()).collect();
                order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                return Ok(order);
            }
        };
        Ok(rank_descending(&scores))
    }
}

/// Indices sorted by descending score, ties broken by index.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}
