//! Revision protocols and the simulation engine.
//!
//! Every step function reads the state at time `t` and returns the state at
//! `t + 1`; agents outside the active set and committed agents are copied.

mod engine;

pub use engine::{
    simulate, ChangeCriterion, InitialActions, InitialCondition, InitialOpinions, Network, Scenario,
    ScenarioGame, Snapshot, Trajectory,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{
    best_response_set, coordination_payoff, Action, CoordinationParams, PopulationState, PAYOFF_TIE_TOL,
};
use crate::graph::Graph;
use crate::tempnet::{ContactParams, ContactSampler};

/// How a best responder resolves a tie between the two actions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    KeepCurrent,
    PreferPlus,
    Uniform,
}

/// Sign of the exponent in the logit choice rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitSign {
    /// `exp(+sigma f)`: large `sigma` approaches best response.
    #[default]
    Positive,
    /// `exp(-sigma f)`.
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    BestResponse {
        #[serde(default)]
        tie: TieRule,
    },
    Logit {
        sigma: f64,
        #[serde(default)]
        sign: LogitSign,
    },
    /// With probability `u_t` follow the population trend, otherwise best
    /// respond to freshly sampled contacts.
    TrendMixed { u_t: f64 },
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Protocol::Logit { sigma, .. } if !(sigma >= 0.0) || !sigma.is_finite() => {
                Err(Error::config(format!("logit sigma must be finite and >= 0, got {sigma}")))
            }
            Protocol::TrendMixed { u_t } if !(0.0..=1.0).contains(&u_t) => {
                Err(Error::config(format!("trend sensitivity u_t must lie in [0, 1], got {u_t}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// Everyone revises every step.
    #[default]
    Synchronous,
    /// One uniformly random agent revises per step.
    AsyncUniform,
    /// Agents revise one per step, cycling through `order`.
    FixedSequence { order: Vec<usize> },
}

impl Schedule {
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Schedule::FixedSequence { order } = self {
            if order.is_empty() {
                return Err(Error::config("fixed_sequence order is empty"));
            }
            if let Some(&i) = order.iter().find(|&&i| i >= n) {
                return Err(Error::config(format!("fixed_sequence names node {i} of {n}")));
            }
        }
        Ok(())
    }

    /// Agents revising at step `t`. Draws from `rng` only for `AsyncUniform`.
    pub fn active<R: Rng + ?Sized>(&self, t: usize, n: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        match self {
            Schedule::Synchronous => out.extend(0..n),
            Schedule::AsyncUniform => out.push(rng.random_range(0..n)),
            Schedule::FixedSequence { order } => out.push(order[t % order.len()]),
        }
    }

    pub fn is_synchronous(&self) -> bool {
        matches!(self, Schedule::Synchronous)
    }
}

/// Protocol plus activation schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisionSpec {
    pub protocol: Protocol,
    #[serde(default)]
    pub schedule: Schedule,
}

/// Compares a neighborhood action sum with the switching threshold.
fn threshold_decision(sum: f64, threshold: f64, current: Action) -> Action {
    if sum > threshold + PAYOFF_TIE_TOL {
        Action::Plus
    } else if sum < threshold - PAYOFF_TIE_TOL {
        Action::Minus
    } else {
        current
    }
}

/// Best response in the network coordination game:
/// `+1` if `sum_j a_ij x_j > -alpha/(2+alpha) sum_j a_ij`, `-1` if below,
/// unchanged on a tie.
pub fn step_best_response_coordination(
    g: &Graph,
    alpha: f64,
    state: &PopulationState,
    active: &[usize],
) -> PopulationState {
    let threshold = -alpha / (2.0 + alpha);
    let mut next = state.clone();
    for &i in active {
        if state.committed[i] {
            continue;
        }
        next.x[i] = threshold_decision(g.action_sum(i, &state.x), threshold * g.out_weight(i), state.x[i]);
    }
    next
}

fn resolve_tie<R: Rng + ?Sized>(set: &[Action], current: Action, tie: TieRule, rng: &mut R) -> Action {
    if set.len() == 1 {
        return set[0];
    }
    match tie {
        TieRule::KeepCurrent => current,
        TieRule::PreferPlus => Action::Plus,
        TieRule::Uniform => set[rng.random_range(0..set.len())],
    }
}

/// Best response for an arbitrary binary game given by `payoff(i, a, x)`.
pub fn step_best_response<F, R>(
    state: &PopulationState,
    active: &[usize],
    tie: TieRule,
    payoff: F,
    rng: &mut R,
) -> PopulationState
where
    F: Fn(usize, Action, &[Action]) -> f64,
    R: Rng + ?Sized,
{
    let mut next = state.clone();
    for &i in active {
        if state.committed[i] {
            continue;
        }
        let set = best_response_set(&Action::BOTH, |a| payoff(i, a, &state.x));
        next.x[i] = resolve_tie(&set, state.x[i], tie, rng);
    }
    next
}

/// Probability of choosing `+1` under the logit rule.
pub fn logit_plus_probability(sigma: f64, sign: LogitSign, f_plus: f64, f_minus: f64) -> f64 {
    let s = match sign {
        LogitSign::Positive => sigma,
        LogitSign::Negative => -sigma,
    };
    if s == 0.0 {
        return 0.5;
    }
    // logistic in the scaled gap; exp overflow saturates to 0 or 1
    let d = s * (f_plus - f_minus);
    1.0 / (1.0 + (-d).exp())
}

/// Logit (noisy best response) revision with per-agent rationality `sigma`.
pub fn step_logit<F, R>(
    state: &PopulationState,
    active: &[usize],
    sigma: &[f64],
    sign: LogitSign,
    payoff: F,
    rng: &mut R,
) -> PopulationState
where
    F: Fn(usize, Action, &[Action]) -> f64,
    R: Rng + ?Sized,
{
    let mut next = state.clone();
    for &i in active {
        if state.committed[i] {
            continue;
        }
        let p = logit_plus_probability(
            sigma[i],
            sign,
            payoff(i, Action::Plus, &state.x),
            payoff(i, Action::Minus, &state.x),
        );
        next.x[i] = if rng.random::<f64>() < p { Action::Plus } else { Action::Minus };
    }
    next
}

/// Logit revision in the coordination game on a static graph.
pub fn step_logit_coordination<R: Rng + ?Sized>(
    g: &Graph,
    params: &CoordinationParams,
    state: &PopulationState,
    active: &[usize],
    sigma: &[f64],
    sign: LogitSign,
    rng: &mut R,
) -> PopulationState {
    step_logit(
        state,
        active,
        sigma,
        sign,
        |i, a, x| coordination_payoff(g, params, i, a, x).expect("node in range"),
        rng,
    )
}

/// The trend rule: follow the direction in which the adopter fraction moved.
pub fn trend_decision(zeta_now: f64, zeta_prev: f64, current: Action) -> Action {
    if zeta_now > zeta_prev {
        Action::Plus
    } else if zeta_now < zeta_prev {
        Action::Minus
    } else {
        current
    }
}

/// One step of the trend-mixed model: every non-committed agent follows the
/// trend with probability `u_t` and otherwise best responds in the
/// coordination game on `k` freshly drawn contacts of weight `1/k`.
pub fn step_trend_mixed<R: Rng + ?Sized>(
    contacts: &ContactParams,
    u_t: f64,
    alpha: f64,
    state: &PopulationState,
    zeta_prev: f64,
    rng: &mut R,
) -> Result<PopulationState> {
    let sampler = ContactSampler::visibility(contacts, &state.x)?;
    let zeta_now = state.zeta();
    let threshold = -alpha / (2.0 + alpha);
    let k = contacts.k as f64;
    let mut scratch = Vec::with_capacity(contacts.k);
    let mut next = state.clone();
    for i in 0..state.n() {
        if state.committed[i] {
            continue;
        }
        next.x[i] = if u_t > 0.0 && rng.random::<f64>() < u_t {
            trend_decision(zeta_now, zeta_prev, state.x[i])
        } else {
            let adopters = sampler.adopter_contacts(i, &state.x, rng, &mut scratch) as f64;
            threshold_decision((2.0 * adopters - k) / k, threshold, state.x[i])
        };
    }
    Ok(next)
}

/// One synchronous round of linear averaging, `y_i <- sum_j w_ij y_j`.
pub fn averaging_step(w: &Graph, y: &[f64]) -> Vec<f64> {
    (0..w.n()).map(|i| w.weighted_sum(i, |j| y[j])).collect()
}

/// Iterates linear averaging until successive states differ by less than
/// `tol` in max norm. Returns the final opinions and the rounds taken.
pub fn run_linear_averaging(w: &Graph, y0: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    if !w.is_row_stochastic() {
        return Err(Error::domain("linear averaging needs a row-stochastic graph"));
    }
    if y0.len() != w.n() {
        return Err(Error::domain("opinion vector length differs from node count"));
    }
    let mut y = y0.to_vec();
    let mut residual = f64::INFINITY;
    for round in 1..=max_iter {
        let next = averaging_step(w, &y);
        residual = next
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        y = next;
        if residual < tol {
            return Ok((y, round));
        }
    }
    Err(Error::Iteration {
        iterations: max_iter,
        residual,
    })
}
