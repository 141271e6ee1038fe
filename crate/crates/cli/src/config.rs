//! Run configuration: JSON schema, defaults, and construction of scenarios.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use collective::coevolution::{CoevolutionRule, Ranking};
use collective::dynamics::{
    ChangeCriterion, InitialCondition, Network, Protocol, Schedule, Scenario, ScenarioGame, TieRule,
};
use collective::games::{CoevolutionParams, CoordinationParams, InnerGame, OpinionWeightConvention, PggParams};
use collective::graph::{self, Graph, LoadOptions};
use collective::tempnet::ContactParams;

use crate::error::CliError;

pub const DEFAULT_HORIZON: usize = 1000;

/// Static graph models available without a file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Complete { n: usize },
    Star { n: usize },
    Ring { n: usize },
    TwoTriangles,
    ErdosRenyi {
        n: usize,
        p: f64,
        #[serde(default)]
        seed: u64,
    },
    WattsStrogatz {
        n: usize,
        k: usize,
        p: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<Graph, CliError> {
        Ok(match *self {
            GeneratorSpec::Complete { n } => graph::complete(n),
            GeneratorSpec::Star { n } => graph::star(n),
            GeneratorSpec::Ring { n } => graph::ring(n),
            GeneratorSpec::TwoTriangles => graph::two_triangles(),
            GeneratorSpec::ErdosRenyi { n, p, seed } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(CliError::config(format!("network.p: {p} is not a probability")));
                }
                graph::erdos_renyi(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            GeneratorSpec::WattsStrogatz { n, k, p, seed } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(CliError::config(format!("network.p: {p} is not a probability")));
                }
                graph::watts_strogatz(n, k, p, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(CliError::config_from)?
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// Edge-list file; relative paths resolve against the config file.
    File {
        path: PathBuf,
        /// Separate opinion layer; the influence graph is reused otherwise.
        #[serde(default)]
        opinion_path: Option<PathBuf>,
        #[serde(default)]
        load: LoadOptions,
    },
    Generator(GeneratorSpec),
    ActivityDriven {
        n: usize,
        #[serde(default)]
        contacts: ContactParams,
    },
}

/// A scalar applied to everyone or one value per agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAgent {
    Scalar(f64),
    Each(Vec<f64>),
}

impl PerAgent {
    fn expand(&self, n: usize, name: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerAgent::Scalar(v) => Ok(vec![*v; n]),
            PerAgent::Each(v) if v.len() == n => Ok(v.clone()),
            PerAgent::Each(v) => Err(CliError::config(format!(
                "game.{name}: {} values for {n} agents",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnerSpec {
    Coordination { alpha: f64 },
    Pgg { r: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    Coordination {
        alpha: f64,
    },
    Pgg {
        r: f64,
    },
    Coevolution {
        gamma: PerAgent,
        beta: PerAgent,
        lambda: PerAgent,
        inner: InnerSpec,
        #[serde(default)]
        opinion_weight_convention: OpinionWeightConvention,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommittedSpec {
    None,
    List { nodes: Vec<usize> },
    /// The `count` highest-ranked nodes of the influence graph.
    Top {
        count: usize,
        #[serde(default)]
        ranking: Ranking,
    },
}

impl Default for CommittedSpec {
    fn default() -> Self {
        CommittedSpec::None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisionConfig {
    pub protocol: Protocol,
    /// Defaults to asynchronous uniform activation for coevolution and
    /// synchronous otherwise.
    #[serde(default)]
    pub schedule: Option<Schedule>,
}

impl Default for RevisionConfig {
    fn default() -> Self {
        RevisionConfig {
            protocol: Protocol::BestResponse {
                tie: TieRule::KeepCurrent,
            },
            schedule: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlRanking {
    #[default]
    Eigenvector,
    Degree,
    Random,
    /// Evaluate `nodes` exactly as listed.
    Explicit,
}

/// Control-set search settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub ranking: ControlRanking,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub game: GameSpec,
    #[serde(default)]
    pub revision: RevisionConfig,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub committed: CommittedSpec,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Defaults to sustained high adoption for logit runs and consensus otherwise.
    #[serde(default)]
    pub change_criterion: Option<ChangeCriterion>,
    #[serde(default)]
    pub runs: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub control: ControlConfig,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

/// Graphs behind a configuration, before row normalization.
#[derive(Clone, Debug)]
pub struct Graphs {
    pub influence: Graph,
    pub opinion: Option<Graph>,
}

/// Everything needed to run a resolved configuration.
#[derive(Clone, Debug)]
pub struct Built {
    pub scenario: Scenario,
    pub criterion: ChangeCriterion,
    pub graphs: Option<Graphs>,
}

impl RunConfig {
    /// Parses JSON, reporting schema violations with their field path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(format!("{path}: {}", e.inner()))
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative file paths relative to `dir`.
    fn rebase(&mut self, dir: &Path) {
        if let NetworkSpec::File { path, opinion_path, .. } = &mut self.network {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
            if let Some(p) = opinion_path {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
    }

    fn is_coevolution(&self) -> bool {
        matches!(self.game, GameSpec::Coevolution { .. })
    }

    /// Fills every defaulted choice so the emitted config replays as is.
    pub fn resolve(mut self, seed: u64, runs: Option<usize>) -> Self {
        if self.revision.schedule.is_none() {
            self.revision.schedule = Some(if self.is_coevolution() {
                Schedule::AsyncUniform
            } else {
                Schedule::Synchronous
            });
        }
        if self.change_criterion.is_none() {
            self.change_criterion = Some(match self.revision.protocol {
                Protocol::Logit { .. } => ChangeCriterion::sustained_default(),
                _ => ChangeCriterion::Consensus,
            });
        }
        self.seed = Some(seed);
        if runs.is_some() {
            self.runs = runs;
        }
        self
    }

    /// SHA-256 of the canonical JSON of the config with the seed removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load_graphs(&self) -> Result<Option<Graphs>, CliError> {
        Ok(match &self.network {
            NetworkSpec::File {
                path,
                opinion_path,
                load,
            } => {
                let influence = graph::read_edge_list(path, load)?;
                let opinion = match opinion_path {
                    Some(p) => {
                        let w = graph::read_edge_list(p, load)?;
                        if w.n() != influence.n() {
                            return Err(CliError::config(format!(
                                "network.opinion_path: {} nodes, influence graph has {}",
                                w.n(),
                                influence.n()
                            )));
                        }
                        Some(w)
                    }
                    None => None,
                };
                Some(Graphs { influence, opinion })
            }
            NetworkSpec::Generator(g) => Some(Graphs {
                influence: g.build()?,
                opinion: None,
            }),
            NetworkSpec::ActivityDriven { .. } => None,
        })
    }

    fn committed_nodes(&self, graphs: Option<&Graphs>, seed: u64) -> Result<Vec<usize>, CliError> {
        match &self.committed {
            CommittedSpec::None => Ok(vec![]),
            CommittedSpec::List { nodes } => Ok(nodes.clone()),
            CommittedSpec::Top { count, ranking } => {
                let g = graphs
                    .map(|g| &g.influence)
                    .ok_or_else(|| CliError::config("committed.top: needs a static network to rank"))?;
                if *count > g.n() {
                    return Err(CliError::config(format!("committed.count: {count} exceeds {} nodes", g.n())));
                }
                let mut order = ranking.order(g, seed)?;
                order.truncate(*count);
                Ok(order)
            }
        }
    }

    /// Builds the scenario of a resolved config.
    pub fn build(&self) -> Result<Built, CliError> {
        let seed = self.seed.unwrap_or(0);
        let graphs = self.load_graphs()?;
        let committed = self.committed_nodes(graphs.as_ref(), seed)?;
        let network = match (&self.network, &graphs) {
            (NetworkSpec::ActivityDriven { n, contacts }, _) => Network::ActivityDriven {
                n: *n,
                contacts: contacts.clone(),
            },
            (_, Some(g)) => Network::Static(g.influence.row_normalize()?),
            (_, None) => unreachable!("static specs always load a graph"),
        };
        let n = network.n();
        let game = match &self.game {
            GameSpec::Coordination { alpha } => ScenarioGame::Coordination(
                CoordinationParams::new(*alpha).map_err(|e| CliError::config(format!("game.alpha: {e}")))?,
            ),
            GameSpec::Pgg { r } => ScenarioGame::Pgg(PggParams::new(*r, n).map_err(|e| CliError::config(format!("game.r: {e}")))?),
            GameSpec::Coevolution {
                gamma,
                beta,
                lambda,
                inner,
                opinion_weight_convention,
            } => {
                let Some(g) = &graphs else {
                    return Err(CliError::config("game.coevolution: needs a static network"));
                };
                let inner = match *inner {
                    InnerSpec::Coordination { alpha } => InnerGame::Coordination(
                        CoordinationParams::new(alpha).map_err(|e| CliError::config(format!("game.inner.alpha: {e}")))?,
                    ),
                    InnerSpec::Pgg { r } => InnerGame::Pgg(
                        PggParams::new(r, n).map_err(|e| CliError::config(format!("game.inner.r: {e}")))?,
                    ),
                };
                let params = CoevolutionParams {
                    gamma: gamma.expand(n, "gamma")?,
                    beta: beta.expand(n, "beta")?,
                    lambda: lambda.expand(n, "lambda")?,
                    inner,
                    convention: *opinion_weight_convention,
                };
                params.validate().map_err(|e| CliError::config(format!("game: {e}")))?;
                let a = g.influence.row_normalize()?;
                let w = match &g.opinion {
                    Some(w) => w.row_normalize()?,
                    None => a.clone(),
                };
                ScenarioGame::Coevolution(Box::new(CoevolutionRule::new(a, w, params)?))
            }
        };
        let scenario = Scenario {
            game,
            network,
            protocol: self.revision.protocol.clone(),
            schedule: self.revision.schedule.clone().unwrap_or_default(),
            initial: self.initial.clone(),
            committed,
            horizon: self.horizon,
            snapshot_stride: self.snapshot_stride,
        };
        scenario.validate()?;
        Ok(Built {
            scenario,
            criterion: self.change_criterion.unwrap_or_default(),
            graphs,
        })
    }

    /// The coevolution rule of a static coevolution config.
    pub fn coevolution_rule(&self) -> Result<CoevolutionRule, CliError> {
        match self.build()?.scenario.game {
            ScenarioGame::Coevolution(rule) => Ok(*rule),
            _ => Err(CliError::config("game: controlset needs a coevolution game")),
        }
    }
}
