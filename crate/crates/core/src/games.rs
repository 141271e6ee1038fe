//! Payoffs and best responses for the binary games on networks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Payoff differences within this are ties.
pub const PAYOFF_TIE_TOL: f64 = 1e-12;

/// Binary strategy: `Minus` is the status quo (or defection), `Plus` the
/// innovation (or cooperation). Serialized as `-1` / `1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Action {
    Minus,
    Plus,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Minus, Action::Plus];

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Action::Minus => -1.0,
            Action::Plus => 1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Action {
        match self {
            Action::Minus => Action::Plus,
            Action::Plus => Action::Minus,
        }
    }

    fn index(self) -> usize {
        match self {
            Action::Minus => 0,
            Action::Plus => 1,
        }
    }
}

impl From<Action> for i8 {
    fn from(a: Action) -> i8 {
        match a {
            Action::Minus => -1,
            Action::Plus => 1,
        }
    }
}

impl TryFrom<i8> for Action {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Action::Minus),
            1 => Ok(Action::Plus),
            other => Err(format!("action must be -1 or 1, got {other}")),
        }
    }
}

/// Actions, opinions and the committed mask of a population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub x: Vec<Action>,
    pub y: Vec<f64>,
    pub committed: Vec<bool>,
}

impl PopulationState {
    /// Everyone at `action`, with the matching extreme opinion.
    pub fn consensus(n: usize, action: Action) -> Self {
        PopulationState {
            x: vec![action; n],
            y: vec![action.value(); n],
            committed: vec![false; n],
        }
    }

    pub fn from_actions(x: Vec<Action>) -> Self {
        let y = x.iter().map(|a| a.value()).collect();
        let n = x.len();
        PopulationState {
            x,
            y,
            committed: vec![false; n],
        }
    }

    /// Pins `nodes` at `x = y = +1`.
    pub fn commit(&mut self, nodes: &[usize]) -> Result<()> {
        for &i in nodes {
            if i >= self.n() {
                return Err(Error::domain(format!("committed node {i} out of range")));
            }
            self.committed[i] = true;
            self.x[i] = Action::Plus;
            self.y[i] = 1.0;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn adopters(&self) -> usize {
        self.x.iter().filter(|&&a| a == Action::Plus).count()
    }

    /// Fraction of agents playing `+1`.
    pub fn zeta(&self) -> f64 {
        zeta(&self.x)
    }

    pub fn is_consensus(&self, action: Action) -> bool {
        self.x.iter().all(|&a| a == action)
    }

    pub fn committed_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.committed[i]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.y.len() != n || self.committed.len() != n {
            return Err(Error::domain("state vectors have different lengths"));
        }
        if let Some(i) = self.y.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::domain(format!("opinion of node {i} outside [-1, 1]")));
        }
        Ok(())
    }
}

pub fn zeta(x: &[Action]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().filter(|&&a| a == Action::Plus).count() as f64 / x.len() as f64
}

/// 2x2 payoff matrix over `{-1, +1}`; `payoff(a, b)` is what `a` earns against `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixGame {
    m: [[f64; 2]; 2],
}

impl MatrixGame {
    /// Entries `[[m(-1,-1), m(-1,+1)], [m(+1,-1), m(+1,+1)]]`.
    pub fn new(m: [[f64; 2]; 2]) -> Self {
        MatrixGame { m }
    }

    pub fn coordination(alpha: f64) -> Self {
        MatrixGame::new([[1.0, 0.0], [0.0, 1.0 + alpha]])
    }

    pub fn payoff(&self, a: Action, b: Action) -> f64 {
        self.m[a.index()][b.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinationParams {
    /// Relative advantage of `+1`.
    pub alpha: f64,
}

impl CoordinationParams {
    pub fn new(alpha: f64) -> Result<Self> {
        let p = CoordinationParams { alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > -1.0) || !self.alpha.is_finite() {
            return Err(Error::domain(format!("alpha must exceed -1, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Value of `sum_j a_ij x_j` at which both actions pay the same, for a
    /// stochastic row; scale by the out-weight otherwise.
    pub fn switch_threshold(&self) -> f64 {
        -self.alpha / (2.0 + self.alpha)
    }
}

/// How the public pool depends on the fraction of contributors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoolReturn {
    Linear { r: f64 },
}

impl PoolReturn {
    pub fn eval(&self, zeta: f64) -> f64 {
        match *self {
            PoolReturn::Linear { r } => r * zeta,
        }
    }
}

/// Linear public goods game on a population of `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PggParams {
    pub r: f64,
    pub n: usize,
}

impl PggParams {
    /// Outside `1 < r < n` there is no dilemma; that is logged, not rejected.
    pub fn new(r: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("public goods game needs n > 0"));
        }
        if !r.is_finite() {
            return Err(Error::domain(format!("invalid multiplier r = {r}")));
        }
        if !(r > 1.0 && r < n as f64) {
            log::warn!("public goods multiplier r = {r} outside (1, {n}): no social dilemma");
        }
        Ok(PggParams { r, n })
    }

    pub fn pool(&self) -> PoolReturn {
        PoolReturn::Linear { r: self.r }
    }

    /// Payoff of `a` when the other players' actions sum to `others`.
    ///
    /// The pool share is evaluated at the exact contributor fraction, so the
    /// consensus payoffs `0` and `r - 1` come out exact.
    pub fn payoff_given_others(&self, a: Action, others: i64) -> f64 {
        let n = self.n as i64;
        // contributors among the others plus i itself when cooperating
        let contributors = (n - 1 + others) / 2 + i64::from(a == Action::Plus);
        let share = self.pool().eval(contributors as f64 / n as f64);
        match a {
            Action::Plus => share - 1.0,
            Action::Minus => share,
        }
    }
}

/// Coefficient on the opinion-disagreement term of the coevolutionary payoff.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpinionWeightConvention {
    /// `beta_i`
    #[default]
    Beta,
    /// `beta_i (1 - lambda_i)`
    BetaTimesOneMinusLambda,
}

/// Game governing the action component of the coevolutionary model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerGame {
    Coordination(CoordinationParams),
    Pgg(PggParams),
}

/// Per-agent weights of action payoff (`gamma`), opinion agreement (`beta`)
/// and action-opinion consistency (`lambda`).
#[derive(Clone, Debug, PartialEq)]
pub struct CoevolutionParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub inner: InnerGame,
    pub convention: OpinionWeightConvention,
}

impl CoevolutionParams {
    pub fn homogeneous(n: usize, gamma: f64, beta: f64, lambda: f64, inner: InnerGame) -> Result<Self> {
        let p = CoevolutionParams {
            gamma: vec![gamma; n],
            beta: vec![beta; n],
            lambda: vec![lambda; n],
            inner,
            convention: OpinionWeightConvention::Beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.beta.len() != n || self.lambda.len() != n {
            return Err(Error::domain("gamma, beta and lambda must have one entry per agent"));
        }
        for i in 0..n {
            let (g, b, l) = (self.gamma[i], self.beta[i], self.lambda[i]);
            if !(g >= 0.0 && b >= 0.0 && l >= 0.0) || !(g + b + l).is_finite() {
                return Err(Error::domain(format!(
                    "agent {i}: gamma, beta, lambda must be finite and nonnegative"
                )));
            }
            let eff = self.opinion_weight(i);
            if !(eff >= 0.0) {
                return Err(Error::domain(format!(
                    "agent {i}: effective opinion weight {eff} is negative"
                )));
            }
            if !(eff + l > 0.0) {
                return Err(Error::domain(format!(
                    "agent {i}: opinion weight + lambda must be positive"
                )));
            }
        }
        match self.inner {
            InnerGame::Coordination(c) => c.validate(),
            InnerGame::Pgg(p) if p.n != n => Err(Error::domain(format!(
                "public goods game sized for {} agents, population has {n}",
                p.n
            ))),
            InnerGame::Pgg(_) => Ok(()),
        }
    }

    /// Coefficient on `-1/2 sum_j w_ij (s - y_j)^2` for agent `i`.
    pub fn opinion_weight(&self, i: usize) -> f64 {
        match self.convention {
            OpinionWeightConvention::Beta => self.beta[i],
            OpinionWeightConvention::BetaTimesOneMinusLambda => self.beta[i] * (1.0 - self.lambda[i]),
        }
    }
}

fn check_node(g: &Graph, i: usize) -> Result<()> {
    if i >= g.n() {
        return Err(Error::domain(format!("node {i} out of range for {} nodes", g.n())));
    }
    Ok(())
}

/// `sum_j a_ij m(a, x_j)`.
pub fn network_matrix_payoff(g: &Graph, game: &MatrixGame, i: usize, a: Action, x: &[Action]) -> Result<f64> {
    check_node(g, i)?;
    Ok(g.weighted_sum(i, |j| game.payoff(a, x[j])))
}

/// Network coordination payoff, `1/4 sum_j a_ij ((1+alpha)(1+s)(1+x_j) + (1-s)(1-x_j))`.
pub fn coordination_payoff(g: &Graph, params: &CoordinationParams, i: usize, a: Action, x: &[Action]) -> Result<f64> {
    check_node(g, i)?;
    let s = a.value();
    let alpha = params.alpha;
    Ok(0.25
        * g.weighted_sum(i, |j| {
            let xj = x[j].value();
            (1.0 + alpha) * (1.0 + s) * (1.0 + xj) + (1.0 - s) * (1.0 - xj)
        }))
}

/// Linear public goods payoff of `i` playing `a` against the rest of `x`.
pub fn pgg_payoff(params: &PggParams, i: usize, a: Action, x: &[Action]) -> Result<f64> {
    if params.n == 0 {
        return Err(Error::domain("public goods game needs n > 0"));
    }
    if x.len() != params.n {
        return Err(Error::domain(format!(
            "profile has {} entries, game has {} players",
            x.len(),
            params.n
        )));
    }
    if i >= x.len() {
        return Err(Error::domain(format!("node {i} out of range")));
    }
    let others: i64 = x
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &a)| i8::from(a) as i64)
        .sum();
    Ok(params.payoff_given_others(a, others))
}

/// Opinion game payoff `-1/2 sum_j w_ij (s - y_j)^2`.
pub fn opinion_payoff(w: &Graph, i: usize, s: f64, y: &[f64]) -> f64 {
    -0.5 * w.weighted_sum(i, |j| (s - y[j]).powi(2))
}

/// Coevolutionary payoff of agent `i` choosing action `a` and opinion `s`.
pub fn coevolution_payoff(
    a_layer: &Graph,
    w_layer: &Graph,
    params: &CoevolutionParams,
    i: usize,
    (a, s): (Action, f64),
    state: &PopulationState,
) -> Result<f64> {
    check_node(a_layer, i)?;
    check_node(w_layer, i)?;
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("opinion {s} outside [-1, 1]")));
    }
    let action_payoff = match &params.inner {
        InnerGame::Coordination(c) => coordination_payoff(a_layer, c, i, a, &state.x)?,
        InnerGame::Pgg(p) => pgg_payoff(p, i, a, &state.x)?,
    };
    let disagreement = w_layer.weighted_sum(i, |j| (s - state.y[j]).powi(2));
    let gap = a.value() - s;
    Ok(params.gamma[i] * action_payoff
        - 0.5 * params.opinion_weight(i) * disagreement
        - 0.5 * params.lambda[i] * gap * gap)
}

/// Candidates whose payoff is within [`PAYOFF_TIE_TOL`] of the maximum.
pub fn best_response_set<S: Copy>(candidates: &[S], payoff: impl Fn(S) -> f64) -> Vec<S> {
    let values: Vec<f64> = candidates.iter().map(|&c| payoff(c)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    candidates
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v >= best - PAYOFF_TIE_TOL)
        .map(|(&c, _)| c)
        .collect()
}
