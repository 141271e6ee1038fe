use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    logit_plus_probability, step_best_response_coordination, step_trend_mixed, threshold_decision, Protocol, Schedule, TieRule,
};
use crate::coevolution::{CoevolutionRule, SWEEP_TOL};
use crate::error::{Error, Result};
use crate::games::{best_response_set, coordination_payoff, Action, CoordinationParams, PggParams, PopulationState};
use crate::graph::Graph;
use crate::tempnet::ContactParams;

/// The game being played.
#[derive(Clone, Debug)]
pub enum ScenarioGame {
    Coordination(CoordinationParams),
    Pgg(PggParams),
    /// Joint action-opinion revision; the rule carries its own layers.
    Coevolution(Box<CoevolutionRule>),
}

/// Where interactions come from.
#[derive(Clone, Debug)]
pub enum Network {
    /// A fixed row-stochastic influence graph.
    Static(Graph),
    /// Fresh contacts every step.
    ActivityDriven { n: usize, contacts: ContactParams },
}

impl Network {
    pub fn n(&self) -> usize {
        match self {
            Network::Static(g) => g.n(),
            Network::ActivityDriven { n, .. } => *n,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialActions {
    #[default]
    AllMinus,
    /// `round(fraction * n)` adopters placed uniformly at random.
    Fraction { fraction: f64 },
    Nodes { nodes: Vec<usize> },
    Profile { x: Vec<Action> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialOpinions {
    /// `y_i = x_i`.
    #[default]
    MatchActions,
    Constant { value: f64 },
    /// Independent uniform draws on `[low, high]`.
    Uniform { low: f64, high: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialCondition {
    pub actions: InitialActions,
    pub opinions: InitialOpinions,
    /// Pin every initial adopter as committed.
    pub commit_adopters: bool,
}

/// What counts as collective change in a finished trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChangeCriterion {
    /// `zeta` reaches 1.
    Consensus,
    /// `zeta >= threshold` for `window` consecutive steps.
    Sustained { threshold: f64, window: usize },
}

impl Default for ChangeCriterion {
    fn default() -> Self {
        ChangeCriterion::Consensus
    }
}

impl ChangeCriterion {
    pub fn sustained_default() -> Self {
        ChangeCriterion::Sustained {
            threshold: 0.95,
            window: 50,
        }
    }
}

/// A fully specified single run, minus the seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub game: ScenarioGame,
    pub network: Network,
    pub protocol: Protocol,
    pub schedule: Schedule,
    pub initial: InitialCondition,
    pub committed: Vec<usize>,
    pub horizon: usize,
    /// Record full states every `snapshot_stride` steps; 0 disables.
    pub snapshot_stride: usize,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.network.n()
    }

    /// Checks that game, network, protocol and schedule fit together.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::config("network has no nodes"));
        }
        self.protocol.validate()?;
        self.schedule.validate(n)?;
        if let Some(&i) = self.committed.iter().find(|&&i| i >= n) {
            return Err(Error::config(format!("committed node {i} out of range for {n} nodes")));
        }
        match &self.initial.actions {
            InitialActions::Fraction { fraction } if !(0.0..=1.0).contains(fraction) => {
                return Err(Error::config(format!("initial fraction {fraction} outside [0, 1]")));
            }
            InitialActions::Nodes { nodes } if nodes.iter().any(|&i| i >= n) => {
                return Err(Error::config("initial adopter out of range"));
            }
            InitialActions::Profile { x } if x.len() != n => {
                return Err(Error::config(format!("initial profile has {} entries for {n} nodes", x.len())));
            }
            _ => {}
        }
        match self.initial.opinions {
            InitialOpinions::Constant { value } if !(-1.0..=1.0).contains(&value) => {
                return Err(Error::config(format!("initial opinion {value} outside [-1, 1]")));
            }
            InitialOpinions::Uniform { low, high } if !(-1.0 <= low && low <= high && high <= 1.0) => {
                return Err(Error::config(format!("opinion range [{low}, {high}] not inside [-1, 1]")));
            }
            _ => {}
        }
        let trend = matches!(self.protocol, Protocol::TrendMixed { .. });
        match (&self.network, trend) {
            (Network::ActivityDriven { contacts, .. }, true) => {
                contacts.validate(n)?;
                if !self.schedule.is_synchronous() {
                    return Err(Error::config("the trend-mixed model revises every agent each step"));
                }
                if !matches!(self.game, ScenarioGame::Coordination(_)) {
                    return Err(Error::config("the trend-mixed model needs the coordination game"));
                }
            }
            (Network::ActivityDriven { .. }, false) => {
                return Err(Error::config("activity-driven networks need the trend_mixed protocol"));
            }
            (Network::Static(_), true) => {
                return Err(Error::config("trend_mixed protocol needs an activity-driven network"));
            }
            (Network::Static(g), false) => {
                if !g.is_row_stochastic() {
                    return Err(Error::config("static influence graph must be row-stochastic"));
                }
            }
        }
        match &self.game {
            ScenarioGame::Coordination(c) => c.validate()?,
            ScenarioGame::Pgg(p) => {
                if p.n != n {
                    return Err(Error::config(format!("public goods game sized {} on {n} nodes", p.n)));
                }
            }
            ScenarioGame::Coevolution(rule) => {
                if rule.n() != n {
                    return Err(Error::config(format!("coevolution rule sized {} on {n} nodes", rule.n())));
                }
                if !matches!(self.protocol, Protocol::BestResponse { tie: TieRule::KeepCurrent }) {
                    return Err(Error::config(
                        "coevolution uses the joint best response with keep-current ties",
                    ));
                }
            }
        }
        Ok(())
    }

    fn deterministic(&self) -> bool {
        match self.protocol {
            Protocol::BestResponse { tie } => tie != TieRule::Uniform,
            _ => false,
        }
    }
}

/// Full state at one recorded step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub x: Vec<Action>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    /// `zeta[t]` for `t = 0..=last step`.
    pub zeta: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Step at which the run stopped at consensus or a fixed point.
    pub absorbed_at: Option<usize>,
    pub final_state: PopulationState,
    pub committed: Vec<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.zeta.len() - 1
    }

    pub fn final_zeta(&self) -> f64 {
        *self.zeta.last().expect("trajectory records zeta(0)")
    }

    /// `zeta(t)`, holding the last value after the run stopped.
    pub fn zeta_at(&self, t: usize) -> f64 {
        self.zeta.get(t).copied().unwrap_or_else(|| self.final_zeta())
    }

    /// First step at which the change criterion is met. A run that stopped
    /// at a fixed point holds its final value forever.
    pub fn change_time(&self, criterion: ChangeCriterion) -> Option<usize> {
        match criterion {
            ChangeCriterion::Consensus => self.zeta.iter().position(|&z| z >= 1.0),
            ChangeCriterion::Sustained { threshold, window } => {
                let frozen = self.absorbed_at.is_some();
                let mut start = None;
                for (t, &z) in self.zeta.iter().enumerate() {
                    if z >= threshold {
                        let s = *start.get_or_insert(t);
                        if t + 1 - s >= window.max(1) {
                            return Some(s);
                        }
                    } else {
                        start = None;
                    }
                }
                if frozen {
                    start
                } else {
                    None
                }
            }
        }
    }

    pub fn changed(&self, criterion: ChangeCriterion) -> bool {
        self.change_time(criterion).is_some()
    }
}

fn initial_state(s: &Scenario, rng: &mut ChaCha8Rng) -> PopulationState {
    let n = s.n();
    let mut x = vec![Action::Minus; n];
    match &s.initial.actions {
        InitialActions::AllMinus => {}
        InitialActions::Fraction { fraction } => {
            let m = ((fraction * n as f64).round() as usize).min(n);
            for i in index::sample(rng, n, m) {
                x[i] = Action::Plus;
            }
        }
        InitialActions::Nodes { nodes } => {
            for &i in nodes {
                x[i] = Action::Plus;
            }
        }
        InitialActions::Profile { x: profile } => x.clone_from(profile),
    }
    let mut state = PopulationState::from_actions(x);
    match s.initial.opinions {
        InitialOpinions::MatchActions => {}
        InitialOpinions::Constant { value } => state.y.iter_mut().for_each(|y| *y = value),
        InitialOpinions::Uniform { low, high } => {
            for y in &mut state.y {
                *y = if high > low { rng.random_range(low..=high) } else { low };
            }
        }
    }
    state
}

/// Steps one scenario forward and answers whether an agent is settled.
struct Stepper<'a> {
    s: &'a Scenario,
}

impl Stepper<'_> {
    fn graph(&self) -> &Graph {
        match &self.s.network {
            Network::Static(g) => g,
            Network::ActivityDriven { .. } => unreachable!("validated: static network"),
        }
    }

    /// `f(+1) - f(-1)` for agent `i`.
    fn payoff_gap(&self, i: usize, x: &[Action], action_total: i64) -> f64 {
        match &self.s.game {
            ScenarioGame::Coordination(c) => {
                let g = self.graph();
                coordination_payoff(g, c, i, Action::Plus, x).expect("node in range")
                    - coordination_payoff(g, c, i, Action::Minus, x).expect("node in range")
            }
            ScenarioGame::Pgg(p) => {
                let others = action_total - i8::from(x[i]) as i64;
                p.payoff_given_others(Action::Plus, others) - p.payoff_given_others(Action::Minus, others)
            }
            ScenarioGame::Coevolution(_) => unreachable!("coevolution has its own update"),
        }
    }

    fn best_responses(&self, i: usize, x: &[Action], total: i64) -> Vec<Action> {
        let gap = self.payoff_gap(i, x, total);
        best_response_set(&Action::BOTH, |a| if a == Action::Plus { gap } else { 0.0 })
    }

    fn step(
        &self,
        state: &PopulationState,
        active: &[usize],
        zeta_prev: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<PopulationState> {
        let total: i64 = state.x.iter().map(|&a| i8::from(a) as i64).sum();
        match (&self.s.game, &self.s.protocol) {
            (ScenarioGame::Coevolution(rule), _) => rule.step(state, active),
            (ScenarioGame::Coordination(c), Protocol::TrendMixed { u_t }) => {
                let Network::ActivityDriven { contacts, .. } = &self.s.network else {
                    unreachable!("validated: activity-driven network")
                };
                step_trend_mixed(contacts, *u_t, c.alpha, state, zeta_prev, rng)
            }
            (ScenarioGame::Coordination(c), Protocol::BestResponse { tie: TieRule::KeepCurrent }) => {
                Ok(step_best_response_coordination(self.graph(), c.alpha, state, active))
            }
            (_, Protocol::BestResponse { tie }) => {
                let mut next = state.clone();
                for &i in active {
                    if state.committed[i] {
                        continue;
                    }
                    let set = self.best_responses(i, &state.x, total);
                    next.x[i] = super::resolve_tie(&set, state.x[i], *tie, rng);
                }
                Ok(next)
            }
            (_, Protocol::Logit { sigma, sign }) => {
                let mut next = state.clone();
                for &i in active {
                    if state.committed[i] {
                        continue;
                    }
                    let p = logit_plus_probability(*sigma, *sign, self.payoff_gap(i, &state.x, total), 0.0);
                    next.x[i] = if rng.random::<f64>() < p { Action::Plus } else { Action::Minus };
                }
                Ok(next)
            }
            (_, Protocol::TrendMixed { .. }) => unreachable!("validated: trend needs coordination"),
        }
    }

    /// Deterministic protocols stop at a fixed point; stochastic ones only at
    /// a consensus that no agent can leave.
    fn stopped(&self, state: &PopulationState) -> Result<bool> {
        if self.s.deterministic() {
            return self.at_fixed_point(state);
        }
        let Some(&first) = state.x.first() else {
            return Ok(true);
        };
        if !state.is_consensus(first) {
            return Ok(false);
        }
        match self.s.protocol {
            Protocol::TrendMixed { .. } => Ok(true),
            Protocol::BestResponse { .. } => {
                let total: i64 = state.x.iter().map(|&a| i8::from(a) as i64).sum();
                Ok((0..state.n()).all(|i| state.committed[i] || self.best_responses(i, &state.x, total) == [first]))
            }
            Protocol::Logit { .. } => Ok(false),
        }
    }

    /// Whether no agent would move under a deterministic protocol.
    fn at_fixed_point(&self, state: &PopulationState) -> Result<bool> {
        let total: i64 = state.x.iter().map(|&a| i8::from(a) as i64).sum();
        for i in 0..state.n() {
            if state.committed[i] {
                continue;
            }
            let settled = match (&self.s.game, &self.s.protocol) {
                (ScenarioGame::Coevolution(rule), _) => {
                    let (x, y) = rule.revise(i, state)?;
                    x == state.x[i] && (y - state.y[i]).abs() < SWEEP_TOL
                }
                (ScenarioGame::Coordination(c), Protocol::BestResponse { tie: TieRule::KeepCurrent }) => {
                    let sum = self.graph().action_sum(i, &state.x);
                    threshold_decision(sum, c.switch_threshold() * self.graph().out_weight(i), state.x[i]) == state.x[i]
                }
                (_, Protocol::BestResponse { tie: TieRule::PreferPlus }) => {
                    let set = self.best_responses(i, &state.x, total);
                    let chosen = if set.len() == 1 { set[0] } else { Action::Plus };
                    chosen == state.x[i]
                }
                (_, Protocol::BestResponse { .. }) => self.best_responses(i, &state.x, total).contains(&state.x[i]),
                _ => return Ok(false),
            };
            if !settled {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn changed_any(a: &PopulationState, b: &PopulationState) -> bool {
    a.x != b.x || a.y.iter().zip(&b.y).any(|(u, v)| (u - v).abs() >= SWEEP_TOL)
}

/// Runs `scenario` from a fresh `ChaCha8` stream seeded with `seed`.
///
/// Initial actions and opinions are drawn before committed agents are
/// pinned, so adding committed agents leaves the other initial draws intact.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<Trajectory> {
    scenario.validate()?;
    let n = scenario.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_state(scenario, &mut rng);
    let mut committed = scenario.committed.clone();
    if scenario.initial.commit_adopters {
        committed.extend((0..n).filter(|&i| state.x[i] == Action::Plus));
    }
    committed.sort_unstable();
    committed.dedup();
    state.commit(&committed)?;

    let stepper = Stepper { s: scenario };
    let record = |t: usize, st: &PopulationState, out: &mut Vec<Snapshot>| {
        out.push(Snapshot {
            t,
            x: st.x.clone(),
            y: st.y.clone(),
        })
    };
    let mut zeta = vec![state.zeta()];
    let mut snapshots = Vec::new();
    if scenario.snapshot_stride > 0 {
        record(0, &state, &mut snapshots);
    }
    let deterministic = scenario.deterministic();
    let synchronous = scenario.schedule.is_synchronous();
    let mut absorbed_at = None;
    let mut zeta_prev = zeta[0];
    let mut quiet = 0usize;
    let mut active = Vec::with_capacity(n);

    if stepper.stopped(&state)? {
        absorbed_at = Some(0);
    }
    let mut t = 0;
    while absorbed_at.is_none() && t < scenario.horizon {
        scenario.schedule.active(t, n, &mut rng, &mut active);
        let next = stepper.step(&state, &active, zeta_prev, &mut rng)?;
        let moved = changed_any(&state, &next);
        zeta_prev = zeta[t];
        state = next;
        t += 1;
        zeta.push(state.zeta());
        if scenario.snapshot_stride > 0 && t % scenario.snapshot_stride == 0 {
            record(t, &state, &mut snapshots);
        }
        // a single activation rarely settles anything: check after n quiet steps
        let check = if synchronous || !deterministic {
            true
        } else if moved {
            quiet = 0;
            false
        } else {
            quiet += 1;
            quiet >= n
        };
        if check {
            quiet = 0;
            if stepper.stopped(&state)? {
                absorbed_at = Some(t);
            }
        }
    }
    if scenario.snapshot_stride > 0 && snapshots.last().map(|s| s.t) != Some(t) {
        record(t, &state, &mut snapshots);
    }
    Ok(Trajectory {
        seed,
        zeta,
        snapshots,
        absorbed_at,
        final_state: state,
        committed,
    })
}
