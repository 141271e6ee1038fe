use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use collective::analysis::{self, NashGame};
use collective::coevolution::{ControlSetReport, Ranking};
use collective::dynamics::{simulate, ScenarioGame, Trajectory};
use collective::graph::{self, Graph, LoadOptions, DEFAULT_CENTRALITY_MAX_ITER, DEFAULT_CENTRALITY_TOL};
use collective::montecarlo::{run_ensemble, EnsembleResult};

use crate::config::{ControlRanking, RunConfig};
use crate::error::CliError;

pub const DEFAULT_RUNS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "collective", version, about = "Collective change in evolutionary games on networks")]
pub struct Cli {
    /// Worker threads for parallel runs; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory.
    Simulate(RunArgs),
    /// Run seeded replicas and write the envelope of the adopter fraction.
    Ensemble(RunArgs),
    /// Tabulate sensitivity thresholds over parameter grids.
    Thresholds(ThresholdArgs),
    /// Enumerate pure Nash equilibria of a small graph.
    Nash(NashArgs),
    /// Search or evaluate a committed set for the coevolutionary model.
    Controlset(ControlArgs),
    /// Summarize a graph: size, connectivity, centralities.
    GraphInfo(GraphArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Comma list or `start:stop:step`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub alpha: String,
    #[arg(long = "u-t", default_value = "0")]
    pub u_t: String,
    #[arg(long = "u-v", default_value = "0")]
    pub u_v: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphSource {
    /// Take the network (and game) from a run config.
    #[arg(long, conflicts_with = "graph")]
    pub config: Option<PathBuf>,
    /// Edge-list file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub undirected: bool,
    /// Node ids are labels rather than integers.
    #[arg(long)]
    pub labels: bool,
}

#[derive(Debug, Args)]
pub struct NashArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "r")]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ControlArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub ranking: Option<RankingArg>,
    /// Committed nodes for the explicit ranking, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum RankingArg {
    Eigenvector,
    Degree,
    Random,
    Explicit,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[command(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Ensemble(a) => cmd_ensemble(&a),
        Command::Thresholds(a) => cmd_thresholds(&a),
        Command::Nash(a) => cmd_nash(&a),
        Command::Controlset(a) => cmd_controlset(&a),
        Command::GraphInfo(a) => cmd_graph_info(&a),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Seed from the command line, else the config, else fresh entropy.
fn pick_seed(flag: Option<u64>, cfg: &RunConfig) -> u64 {
    flag.or(cfg.seed).unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}

fn load_resolved(args: &RunArgs) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::read(&args.config)?;
    let seed = pick_seed(args.seed, &cfg);
    Ok(cfg.resolve(seed, args.runs))
}

fn labels_of(cfg: &RunConfig) -> Result<Option<Vec<String>>, CliError> {
    Ok(cfg
        .load_graphs()?
        .and_then(|g| g.influence.labels().map(|l| l.to_vec())))
}

pub fn trajectory_csv(tr: &Trajectory, with_opinions: bool) -> String {
    let mut out = String::from("t,zeta");
    if tr.snapshots.is_empty() {
        out.push('\n');
        for (t, z) in tr.zeta.iter().enumerate() {
            let _ = writeln!(out, "{t},{z}");
        }
        return out;
    }
    let n = tr.final_state.n();
    for i in 0..n {
        let _ = write!(out, ",x_{i}");
    }
    if with_opinions {
        for i in 0..n {
            let _ = write!(out, ",y_{i}");
        }
    }
    out.push('\n');
    for s in &tr.snapshots {
        let _ = write!(out, "{},{}", s.t, tr.zeta[s.t]);
        for a in &s.x {
            let _ = write!(out, ",{}", i8::from(*a));
        }
        if with_opinions {
            for y in &s.y {
                let _ = write!(out, ",{y}");
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_resolved(args)?;
    let built = cfg.build()?;
    let seed = cfg.seed.expect("resolved");
    let tr = simulate(&built.scenario, seed)?;
    let coevolution = matches!(built.scenario.game, ScenarioGame::Coevolution(_));
    write_file(&args.out.join("trajectory.csv"), trajectory_csv(&tr, coevolution).as_bytes())?;
    let meta = json!({
        "seed": seed,
        "config_hash": cfg.hash(),
        "steps": tr.steps(),
        "absorbed_at": tr.absorbed_at,
        "final_zeta": tr.final_zeta(),
        "changed": tr.changed(built.criterion),
        "change_time": tr.change_time(built.criterion),
        "committed_nodes": tr.committed,
        "labels": labels_of(&cfg)?,
    });
    write_json(&args.out.join("trajectory.json"), &meta)?;
    write_json(&args.out.join("resolved_config.json"), &cfg)?;
    log::info!(
        "{} steps, final zeta {}, absorbed {:?}",
        tr.steps(),
        tr.final_zeta(),
        tr.absorbed_at
    );
    Ok(())
}

pub fn ensemble_csv(res: &EnsembleResult) -> String {
    let mut out = String::from("t,q025,q500,q975,mean_zeta\n");
    for t in 0..res.q500.len() {
        let _ = writeln!(
            out,
            "{t},{},{},{},{}",
            res.q025[t], res.q500[t], res.q975[t], res.mean_zeta[t]
        );
    }
    out
}

fn cmd_ensemble(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_resolved(args)?;
    let built = cfg.build()?;
    let runs = cfg.runs.unwrap_or(DEFAULT_RUNS);
    if runs == 0 {
        return Err(CliError::config("runs: must be at least 1"));
    }
    let seed = cfg.seed.expect("resolved");
    let res = run_ensemble(&built.scenario, runs, seed, built.criterion)?;
    write_file(&args.out.join("ensemble.csv"), ensemble_csv(&res).as_bytes())?;
    let summary = json!({
        "runs": res.runs,
        "master_seed": res.master_seed,
        "config_hash": cfg.hash(),
        "criterion": res.criterion,
        "change_probability": res.change_probability,
        "changed_runs": res.changed_runs,
        "mean_change_time": res.mean_change_time,
        "mean_absorption_time": res.mean_absorption_time,
        "committed_nodes": built.scenario.committed,
        "seeds": res.seeds,
    });
    write_json(&args.out.join("ensemble.json"), &summary)?;
    write_json(&args.out.join("resolved_config.json"), &cfg)?;
    log::info!("{runs} runs, change probability {}", res.change_probability);
    Ok(())
}

/// Parses `a,b,c` or `start:stop:step` (inclusive of `stop`).
pub fn parse_grid(text: &str, name: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::config(format!("--{name}: {what} in `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("invalid number"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
            return Err(bad("step must be positive"));
        }
        if stop < start {
            return Err(bad("empty range"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("empty range"));
    }
    Ok(values)
}

fn cmd_thresholds(args: &ThresholdArgs) -> Result<(), CliError> {
    let alphas = parse_grid(&args.alpha, "alpha")?;
    let u_ts = parse_grid(&args.u_t, "u-t")?;
    let u_vs = parse_grid(&args.u_v, "u-v")?;
    let rows = analysis::threshold_sweep(args.k, &alphas, &u_ts, &u_vs).map_err(CliError::config_from)?;
    let mut buf = Vec::new();
    analysis::write_sweep_csv(&rows, &mut buf).expect("writing to memory");
    write_file(&args.out.join("thresholds.csv"), &buf)?;
    let mut ustar = String::from("k,alpha,u_star\n");
    for &alpha in &alphas {
        let u = analysis::u_star(args.k, alpha, 1e-10).map_err(CliError::config_from)?;
        let _ = writeln!(ustar, "{},{alpha},{u}", args.k);
    }
    write_file(&args.out.join("ustar.csv"), ustar.as_bytes())?;
    log::info!("{} threshold rows", rows.len());
    Ok(())
}

fn source_graph(src: &GraphSource) -> Result<(Graph, Option<RunConfig>), CliError> {
    match (&src.config, &src.graph) {
        (Some(path), _) => {
            let cfg = RunConfig::read(path)?;
            let graphs = cfg
                .load_graphs()?
                .ok_or_else(|| CliError::config("network: needs a static graph"))?;
            Ok((graphs.influence, Some(cfg)))
        }
        (None, Some(path)) => {
            let opts = LoadOptions {
                undirected: src.undirected,
                labels: src.labels,
                keep_self_loops: false,
            };
            Ok((graph::read_edge_list(path, &opts)?, None))
        }
        (None, None) => Err(CliError::config("pass --config or --graph")),
    }
}

fn cmd_nash(args: &NashArgs) -> Result<(), CliError> {
    let (g, cfg) = source_graph(&args.source)?;
    let game = match (args.alpha, args.r, cfg.as_ref().map(|c| &c.game)) {
        (Some(alpha), _, _) => NashGame::Coordination { alpha },
        (_, Some(r), _) => NashGame::Pgg { r },
        (_, _, Some(crate::config::GameSpec::Coordination { alpha })) => NashGame::Coordination { alpha: *alpha },
        (_, _, Some(crate::config::GameSpec::Pgg { r })) => NashGame::Pgg { r: *r },
        _ => return Err(CliError::config("pass --alpha or --r")),
    };
    let eq = match analysis::find_nash_bruteforce(&g, game) {
        Err(e @ collective::Error::Size { .. }) => return Err(CliError::config_from(e)),
        other => other?,
    };
    let game_json = match game {
        NashGame::Coordination { alpha } => json!({"kind": "coordination", "alpha": alpha}),
        NashGame::Pgg { r } => json!({"kind": "pgg", "r": r}),
    };
    let report = json!({
        "n": g.n(),
        "game": game_json,
        "count": eq.len(),
        "equilibria": eq,
        "labels": g.labels(),
    });
    write_json(&args.out.join("equilibria.json"), &report)?;
    println!("{} equilibria", eq.len());
    Ok(())
}

fn cmd_controlset(args: &ControlArgs) -> Result<(), CliError> {
    let cfg = RunConfig::read(&args.config)?;
    let seed = pick_seed(args.seed, &cfg);
    let mut cfg = cfg.resolve(seed, None);
    if let Some(r) = args.ranking {
        cfg.control.ranking = match r {
            RankingArg::Eigenvector => ControlRanking::Eigenvector,
            RankingArg::Degree => ControlRanking::Degree,
            RankingArg::Random => ControlRanking::Random,
            RankingArg::Explicit => ControlRanking::Explicit,
        };
    }
    if let Some(nodes) = &args.nodes {
        cfg.control.nodes.clone_from(nodes);
        if args.ranking.is_none() {
            cfg.control.ranking = ControlRanking::Explicit;
        }
    }
    let rule = cfg.coevolution_rule()?;
    let raw = cfg
        .load_graphs()?
        .expect("coevolution configs have static graphs")
        .influence;
    let report: ControlSetReport = match cfg.control.ranking {
        ControlRanking::Explicit => {
            if let Some(&i) = cfg.control.nodes.iter().find(|&&i| i >= rule.n()) {
                return Err(CliError::config(format!("control.nodes: node {i} out of range")));
            }
            rule.evaluate_control_set(&cfg.control.nodes, "explicit")?
        }
        other => {
            let ranking = match other {
                ControlRanking::Eigenvector => Ranking::Eigenvector,
                ControlRanking::Degree => Ranking::Degree,
                _ => Ranking::Random,
            };
            let order = ranking.order(&raw, seed)?;
            rule.min_control_set_greedy(&order, ranking.name())?
        }
    };
    write_json(&args.out.join("controlset.json"), &report)?;
    write_json(&args.out.join("resolved_config.json"), &cfg)?;
    println!(
        "{} committed nodes: {}",
        report.committed_nodes.len(),
        if report.changed { "collective change" } else { "no collective change" }
    );
    Ok(())
}

fn cmd_graph_info(args: &GraphArgs) -> Result<(), CliError> {
    let (g, _) = source_graph(&args.source)?;
    let degrees = g.out_degrees();
    let (components, _) = g.strongly_connected_components();
    let connected = g.is_weakly_connected();
    let centrality = if connected {
        Some(g.eigenvector_centrality(DEFAULT_CENTRALITY_TOL, DEFAULT_CENTRALITY_MAX_ITER)?)
    } else {
        None
    };
    let power = g.row_normalize().ok().and_then(|w| w.social_power().ok());
    let info = json!({
        "n": g.n(),
        "arcs": g.edge_count(),
        "min_out_degree": degrees.iter().min(),
        "max_out_degree": degrees.iter().max(),
        "weakly_connected": connected,
        "strongly_connected_components": components,
        "globally_reachable_nodes": g.globally_reachable_nodes(),
        "eigenvector_centrality": centrality,
        "social_power": power,
        "labels": g.labels(),
    });
    write_json(&args.out.join("graph_info.json"), &info)?;
    println!(
        "{} nodes, {} arcs, {}",
        g.n(),
        g.edge_count(),
        if connected { "connected" } else { "disconnected" }
    );
    Ok(())
}
