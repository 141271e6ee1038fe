//! Seeded ensembles, envelopes and empirical change thresholds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, ChangeCriterion, InitialActions, Scenario, Trajectory};
use crate::error::{Error, Result};

/// Seed of run `run` under `master`: one splitmix64 round over both.
pub fn derive_seed(master: u64, run: u64) -> u64 {
    let mut z = master ^ run.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `runs` independent replicas in parallel, in run order.
pub fn run_trajectories(scenario: &Scenario, runs: usize, master_seed: u64) -> Result<Vec<Trajectory>> {
    if runs == 0 {
        return Err(Error::domain("an ensemble needs at least one run"));
    }
    scenario.validate()?;
    (0..runs as u64)
        .into_par_iter()
        .map(|r| simulate(scenario, derive_seed(master_seed, r)))
        .collect()
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub runs: usize,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub criterion: ChangeCriterion,
    pub q025: Vec<f64>,
    pub q500: Vec<f64>,
    pub q975: Vec<f64>,
    pub mean_zeta: Vec<f64>,
    pub changed_runs: usize,
    pub change_probability: f64,
    /// Mean first time the criterion is met, over changed runs.
    pub mean_change_time: Option<f64>,
    /// Mean stopping time over runs that stopped before the horizon.
    pub mean_absorption_time: Option<f64>,
}

/// Envelope and change statistics; shorter runs hold their final value.
pub fn summarize(trajectories: &[Trajectory], master_seed: u64, criterion: ChangeCriterion) -> EnsembleResult {
    let runs = trajectories.len();
    let len = trajectories.iter().map(|t| t.zeta.len()).max().unwrap_or(0);
    let mut q025 = Vec::with_capacity(len);
    let mut q500 = Vec::with_capacity(len);
    let mut q975 = Vec::with_capacity(len);
    let mut mean_zeta = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(runs);
    for t in 0..len {
        column.clear();
        column.extend(trajectories.iter().map(|tr| tr.zeta_at(t)));
        column.sort_by(f64::total_cmp);
        q025.push(quantile_sorted(&column, 0.025));
        q500.push(quantile_sorted(&column, 0.5));
        q975.push(quantile_sorted(&column, 0.975));
        mean_zeta.push(column.iter().sum::<f64>() / runs as f64);
    }
    let times: Vec<usize> = trajectories.iter().filter_map(|t| t.change_time(criterion)).collect();
    let absorbed: Vec<usize> = trajectories.iter().filter_map(|t| t.absorbed_at).collect();
    let mean = |v: &[usize]| (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64);
    EnsembleResult {
        runs,
        master_seed,
        seeds: trajectories.iter().map(|t| t.seed).collect(),
        criterion,
        q025,
        q500,
        q975,
        mean_zeta,
        changed_runs: times.len(),
        change_probability: times.len() as f64 / runs as f64,
        mean_change_time: mean(&times),
        mean_absorption_time: mean(&absorbed),
    }
}

pub fn run_ensemble(
    scenario: &Scenario,
    runs: usize,
    master_seed: u64,
    criterion: ChangeCriterion,
) -> Result<EnsembleResult> {
    let trajectories = run_trajectories(scenario, runs, master_seed)?;
    Ok(summarize(&trajectories, master_seed, criterion))
}

/// Number of runs meeting `criterion`, without keeping trajectories.
pub fn count_changes(scenario: &Scenario, runs: usize, master_seed: u64, criterion: ChangeCriterion) -> Result<usize> {
    if runs == 0 {
        return Err(Error::domain("an ensemble needs at least one run"));
    }
    scenario.validate()?;
    let hits: Result<Vec<bool>> = (0..runs as u64)
        .into_par_iter()
        .map(|r| Ok(simulate(scenario, derive_seed(master_seed, r))?.changed(criterion)))
        .collect();
    Ok(hits?.into_iter().filter(|&h| h).count())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub zeta0: f64,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    /// Midpoint of the final bisection bracket; absent when the frequency
    /// profile is not monotone beyond noise.
    pub estimate: Option<f64>,
    /// Largest probe with frequency clearly below one half and smallest
    /// clearly above, by three binomial standard errors.
    pub band: (f64, f64),
    pub probes: Vec<Probe>,
    pub runs_per_probe: usize,
}

impl ThresholdEstimate {
    pub fn is_monotone(&self) -> bool {
        self.estimate.is_some()
    }
}

/// Three standard errors of a frequency near one half.
fn noise(runs: usize) -> f64 {
    3.0 * (0.25 / runs as f64).sqrt()
}

/// Smallest initial adopter fraction with empirical change frequency at
/// least one half, by bisection on `[0, 1]` down to width `tol`. Every probe
/// reuses `master_seed`, so probes differ only in the initial fraction.
pub fn estimate_change_threshold(
    template: &Scenario,
    runs: usize,
    master_seed: u64,
    criterion: ChangeCriterion,
    tol: f64,
) -> Result<ThresholdEstimate> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut probes = Vec::new();
    let mut probe = |zeta0: f64| -> Result<f64> {
        let mut s = template.clone();
        s.initial.actions = InitialActions::Fraction { fraction: zeta0 };
        let f = count_changes(&s, runs, master_seed, criterion)? as f64 / runs as f64;
        log::debug!("threshold probe zeta0 = {zeta0:.6}: change frequency {f}");
        probes.push(Probe { zeta0, frequency: f });
        Ok(f)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if probe(lo)? >= 0.5 {
        hi = 0.0;
    } else {
        probe(hi)?;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? >= 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let eps = noise(runs);
    // widen outward until a probe on each side is clear of the noise
    let mut w = tol;
    let mut below = lo;
    while below > 0.0 {
        below = (lo - w).max(0.0);
        if probe(below)? < 0.5 - eps {
            break;
        }
        w *= 2.0;
    }
    let mut w = tol;
    let mut above = hi;
    while above < 1.0 {
        above = (hi + w).min(1.0);
        if probe(above)? > 0.5 + eps {
            break;
        }
        w *= 2.0;
    }
    probes.sort_by(|a, b| a.zeta0.total_cmp(&b.zeta0));
    probes.dedup_by(|a, b| a.zeta0 == b.zeta0);
    let monotone = probes
        .windows(2)
        .all(|w| w[1].frequency >= w[0].frequency - 2f64.sqrt() * eps);
    if !monotone {
        log::warn!("change frequency is not monotone in the initial fraction beyond binomial noise");
    }
    let band_lo = probes
        .iter()
        .filter(|p| p.frequency < 0.5 - eps)
        .map(|p| p.zeta0)
        .fold(0.0, f64::max);
    let band_hi = probes
        .iter()
        .filter(|p| p.frequency > 0.5 + eps)
        .map(|p| p.zeta0)
        .fold(1.0, f64::min);
    Ok(ThresholdEstimate {
        estimate: monotone.then_some(0.5 * (lo + hi)),
        band: (band_lo, band_hi),
        probes,
        runs_per_probe: runs,
    })
}
