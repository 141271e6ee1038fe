//! Sensitivity thresholds of the trend-mixed model and exact equilibrium
//! enumeration on small graphs.
//!
//! With `Q = 1 - Pi` and `1 - zeta~ = (1 - zeta) / (1 + u_v zeta)`, the drift
//! `f_u(zeta) = (1-u) Pi(zeta~) - zeta + u` factors as `(1 - zeta) h_u(zeta)`
//! where `h_u = 1 - (1-u) R` and `R(zeta) = Q(zeta~) / (1 - zeta)` is a
//! polynomial in `zeta` over a power of `1 + u_v zeta`. All thresholds are
//! read off `h`, which stays well conditioned at `zeta = 1`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{Action, PggParams};
use crate::graph::Graph;
use crate::tempnet::biased_adopter_fraction;

pub const GRID_POINTS: usize = 10_000;
pub const ROOT_TOL: f64 = 1e-12;
pub const NASH_MAX_NODES: usize = 20;

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be finite and > -1, got {alpha}")));
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

fn check_uv(u_v: f64) -> Result<()> {
    if !(u_v >= 0.0) || !u_v.is_finite() {
        return Err(Error::domain(format!("visibility boost must be >= 0, got {u_v}")));
    }
    Ok(())
}

/// Smallest number of `+1` contacts out of `k` that makes `+1` the strict
/// best response: `floor(k / (2 + alpha)) + 1`.
pub fn lower_limit(k: usize, alpha: f64) -> usize {
    (k as f64 / (2.0 + alpha)).floor() as usize + 1
}

fn binomial(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |c, i| c * (k - i) as f64 / (i + 1) as f64)
}

/// Probability that at least `lower_limit(k, alpha)` of `k` independent
/// contacts are adopters when each is one with probability `zeta`.
pub fn pi_k_alpha(zeta: f64, k: usize, alpha: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    check_unit("zeta", zeta)?;
    let lo = lower_limit(k, alpha);
    Ok((lo..=k)
        .map(|j| binomial(k, j) * zeta.powi(j as i32) * (1.0 - zeta).powi((k - j) as i32))
        .sum())
}

/// Threshold curve `h_u` for fixed `(k, alpha, u_v)`.
#[derive(Clone, Debug)]
struct Drift {
    k: usize,
    lo: usize,
    u_v: f64,
    coeffs: Vec<f64>,
}

impl Drift {
    fn new(k: usize, alpha: f64, u_v: f64) -> Self {
        let lo = lower_limit(k, alpha).min(k + 1);
        Drift {
            k,
            lo,
            u_v,
            coeffs: (0..lo.min(k + 1)).map(|j| binomial(k, j)).collect(),
        }
    }

    /// `R(zeta) = Q(zeta~) / (1 - zeta)`.
    fn ratio(&self, zeta: f64) -> f64 {
        if self.lo > self.k {
            // Q = 1: no number of contacts makes +1 strictly better
            return 1.0 / (1.0 - zeta);
        }
        let zt = biased_adopter_fraction(zeta, self.u_v);
        let scale = 1.0 + self.u_v * zeta;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let m = (self.k - j) as i32;
                c * zt.powi(j as i32) * (1.0 - zeta).powi(m - 1) / scale.powi(m)
            })
            .sum()
    }

    fn h(&self, u: f64, zeta: f64) -> f64 {
        1.0 - (1.0 - u) * self.ratio(zeta)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximum of `f` on `[0, 1]`: grid scan, then golden-section refinement
/// around the best grid point and in both end cells.
fn maximize_unit(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let step = 1.0 / GRID_POINTS as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=GRID_POINTS {
        let v = f(i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let cells = [best_i.saturating_sub(1), 0, GRID_POINTS - 1];
    for lo in cells {
        let a = lo as f64 * step;
        let b = ((lo + 2).min(GRID_POINTS)) as f64 * step;
        best = best.max(golden_max(&f, a, b, tol).1);
    }
    best
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    // invariant: f(lo) <= 0 < f(hi)
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Interior solution of `Pi_{k,alpha}(zeta) = zeta`, or `None` when the
/// curve does not cross the diagonal inside `(0, 1)`.
///
/// A crossing exists exactly when `2 <= lower_limit <= k - 1`; in
/// particular there is none for `alpha > k - 2`.
pub fn zeta_star(k: usize, alpha: f64) -> Result<Option<f64>> {
    check_k(k)?;
    check_alpha(alpha)?;
    let lo = lower_limit(k, alpha);
    if lo < 2 || lo + 1 > k {
        return Ok(None);
    }
    let drift = Drift::new(k, alpha, 0.0);
    Ok(Some(last_nonpositive(&drift, 0.0)))
}

/// Supremum of `{zeta : h_u(zeta) <= 0}`, or 0 if `h_u > 0` on `(0, 1]`.
fn last_nonpositive(drift: &Drift, u: f64) -> f64 {
    let h = |z: f64| drift.h(u, z);
    if h(1.0) <= 0.0 {
        return 1.0;
    }
    let step = 1.0 / GRID_POINTS as f64;
    for i in (1..GRID_POINTS).rev() {
        let z = i as f64 * step;
        if h(z) <= 0.0 {
            return bisect(h, z, z + step, ROOT_TOL);
        }
    }
    // possible dip inside the first cell, where h(0) = u
    let (z_min, h_min) = golden_max(|z| -h(z), 0.0, step, ROOT_TOL);
    if -h_min <= 0.0 {
        bisect(h, z_min, step, ROOT_TOL)
    } else {
        0.0
    }
}

/// Least trend sensitivity for which `f_u > 0` on all of `(0, 1)`:
/// `max(0, 1 - 1 / max R)`.
pub fn u_star(k: usize, alpha: f64, tol: f64) -> Result<f64> {
    u_star_uv(k, alpha, 0.0, tol)
}

/// [`u_star`] under a visibility boost `u_v`.
pub fn u_star_uv(k: usize, alpha: f64, u_v: f64, tol: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    check_uv(u_v)?;
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let drift = Drift::new(k, alpha, u_v);
    if drift.lo > k {
        // f_u = u (1 - zeta) on this branch, positive for every u > 0
        return Ok(0.0);
    }
    let r_max = maximize_unit(|z| drift.ratio(z), tol);
    Ok((1.0 - 1.0 / r_max).max(0.0))
}

/// Least initial adopter fraction above which `f_{u_t} > 0` up to 1.
pub fn zeta_star_u(k: usize, alpha: f64, u_t: f64) -> Result<f64> {
    zeta_star_uv(k, alpha, u_t, 0.0)
}

/// Mean-field threshold with contacts biased toward adopters by `u_v`.
pub fn zeta_star_uv(k: usize, alpha: f64, u_t: f64, u_v: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    check_unit("u_t", u_t)?;
    check_uv(u_v)?;
    let drift = Drift::new(k, alpha, u_v);
    if drift.lo > k {
        return Ok(if u_t > 0.0 { 0.0 } else { 1.0 });
    }
    Ok(last_nonpositive(&drift, u_t))
}

/// The drift `f_u(zeta)` itself.
pub fn drift(k: usize, alpha: f64, u_t: f64, u_v: f64, zeta: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    check_unit("u_t", u_t)?;
    check_uv(u_v)?;
    check_unit("zeta", zeta)?;
    Ok((1.0 - zeta) * Drift::new(k, alpha, u_v).h(u_t, zeta))
}

/// One point of a threshold sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub k: usize,
    pub alpha: f64,
    pub u_t: f64,
    pub u_v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub query: ThresholdQuery,
    pub zeta_star: f64,
}

/// `zeta_star_uv` over the product of the three grids.
pub fn threshold_sweep(k: usize, alphas: &[f64], u_ts: &[f64], u_vs: &[f64]) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() || u_ts.is_empty() || u_vs.is_empty() {
        return Err(Error::domain("threshold sweep needs nonempty alpha, u_t and u_v grids"));
    }
    let queries: Vec<ThresholdQuery> = alphas
        .iter()
        .flat_map(|&alpha| {
            u_ts.iter()
                .flat_map(move |&u_t| u_vs.iter().map(move |&u_v| ThresholdQuery { k, alpha, u_t, u_v }))
        })
        .collect();
    queries
        .into_par_iter()
        .map(|q| {
            Ok(SweepRow {
                query: q,
                zeta_star: zeta_star_uv(q.k, q.alpha, q.u_t, q.u_v)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,alpha,u_t,u_v,zeta_star")?;
    for r in rows {
        let q = r.query;
        writeln!(out, "{},{},{},{},{}", q.k, q.alpha, q.u_t, q.u_v, r.zeta_star)?;
    }
    Ok(())
}

/// Game for equilibrium enumeration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NashGame {
    Coordination { alpha: f64 },
    Pgg { r: f64 },
}

/// Every pure profile in which each agent plays a best response, ties
/// included. Profiles come back in increasing order of the bitmask with bit
/// `i` set when `x_i = +1`.
pub fn find_nash_bruteforce(g: &Graph, game: NashGame) -> Result<Vec<Vec<Action>>> {
    let n = g.n();
    if n > NASH_MAX_NODES {
        return Err(Error::Size {
            n,
            limit: NASH_MAX_NODES,
        });
    }
    let pgg = match game {
        NashGame::Coordination { alpha } => {
            check_alpha(alpha)?;
            None
        }
        NashGame::Pgg { r } => Some(PggParams::new(r, n.max(1))?),
    };
    let tol = crate::games::PAYOFF_TIE_TOL;
    let is_equilibrium = |mask: u32| -> bool {
        let x = |j: usize| if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
        let total: i64 = (0..n).map(|j| x(j) as i64).sum();
        (0..n).all(|i| {
            // f(+1) - f(-1)
            let gap = match (game, pgg) {
                (NashGame::Coordination { alpha }, _) => {
                    0.5 * g.weighted_sum(i, |j| (1.0 + alpha) * (1.0 + x(j)) - (1.0 - x(j)))
                }
                (_, Some(p)) => {
                    let others = total - x(i) as i64;
                    p.payoff_given_others(Action::Plus, others) - p.payoff_given_others(Action::Minus, others)
                }
                _ => unreachable!(),
            };
            if x(i) > 0.0 {
                gap >= -tol
            } else {
                gap <= tol
            }
        })
    };
    let masks: Vec<u32> = (0..1u32 << n).into_par_iter().filter(|&m| is_equilibrium(m)).collect();
    Ok(masks
        .into_iter()
        .map(|m| {
            (0..n)
                .map(|j| if m >> j & 1 == 1 { Action::Plus } else { Action::Minus })
                .collect()
        })
        .collect())
}
