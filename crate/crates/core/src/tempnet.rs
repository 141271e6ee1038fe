//! Activity-driven temporal contacts, optionally biased toward adopters.
//!
//! Every step each agent draws `k` contacts and weighs each draw `1/k`.
//! Without bias a draw hits any node with probability `1/n`; with visibility
//! boost `u_v` an adopter is hit with probability `(1+u_v) / (n (1 + u_v zeta))`
//! and a non-adopter with `1 / (n (1 + u_v zeta))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{zeta, Action};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// Contacts per agent per step.
    pub k: usize,
    /// Relative visibility boost of adopters.
    pub u_v: f64,
    pub include_self: bool,
    pub with_replacement: bool,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            k: 3,
            u_v: 0.0,
            include_self: true,
            with_replacement: true,
        }
    }
}

impl ContactParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::domain(format!("contact sampling needs n >= 2, got {n}")));
        }
        if self.k == 0 {
            return Err(Error::domain("k must be positive"));
        }
        if self.k < 2 {
            log::warn!("k = {} contacts per step; the threshold analysis assumes k >= 2", self.k);
        }
        if !(self.u_v >= 0.0) || !self.u_v.is_finite() {
            return Err(Error::domain(format!("visibility boost must be >= 0, got {}", self.u_v)));
        }
        let pool = if self.include_self { n } else { n - 1 };
        if !self.with_replacement && self.k > pool {
            return Err(Error::domain(format!(
                "cannot draw {} distinct contacts from {pool} candidates",
                self.k
            )));
        }
        Ok(())
    }
}

/// Probability that one draw lands on a given adopter and on a given
/// non-adopter, in a population of `n` with adopter fraction `zeta`.
pub fn draw_probabilities(n: usize, zeta: f64, u_v: f64) -> (f64, f64) {
    let norm = n as f64 * (1.0 + u_v * zeta);
    ((1.0 + u_v) / norm, 1.0 / norm)
}

/// Probability that one draw lands on some adopter: the adopter fraction as
/// seen through the visibility bias.
pub fn biased_adopter_fraction(zeta: f64, u_v: f64) -> f64 {
    zeta * (1.0 + u_v) / (1.0 + u_v * zeta)
}

/// Draws contacts for one step, given the current actions.
#[derive(Clone, Debug)]
pub struct ContactSampler<'a> {
    params: &'a ContactParams,
    n: usize,
    adopters: Vec<usize>,
    others: Vec<usize>,
    p_adopter: f64,
}

impl<'a> ContactSampler<'a> {
    /// Uniform sampling, ignoring any visibility boost.
    pub fn uniform(n: usize, params: &'a ContactParams) -> Result<Self> {
        params.validate(n)?;
        Ok(ContactSampler {
            params,
            n,
            adopters: Vec::new(),
            others: Vec::new(),
            p_adopter: 0.0,
        })
    }

    /// Sampling biased toward the `+1` players of `x` by `params.u_v`.
    pub fn visibility(params: &'a ContactParams, x: &[Action]) -> Result<Self> {
        let n = x.len();
        params.validate(n)?;
        if params.u_v == 0.0 {
            return Self::uniform(n, params);
        }
        let (adopters, others): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&j| x[j] == Action::Plus);
        Ok(ContactSampler {
            params,
            n,
            p_adopter: biased_adopter_fraction(zeta(x), params.u_v),
            adopters,
            others,
        })
    }

    fn raw_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.adopters.is_empty() && self.others.is_empty() {
            return rng.random_range(0..self.n);
        }
        if !self.adopters.is_empty() && rng.random::<f64>() < self.p_adopter {
            self.adopters[rng.random_range(0..self.adopters.len())]
        } else {
            self.others[rng.random_range(0..self.others.len())]
        }
    }

    /// The `k` contacts of agent `i`. Draws excluded by `include_self` or
    /// `with_replacement` are redrawn, which renormalizes proportionally.
    pub fn contacts_of<R: Rng + ?Sized>(&self, i: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        while out.len() < self.params.k {
            let j = self.raw_draw(rng);
            if !self.params.include_self && j == i {
                continue;
            }
            if !self.params.with_replacement && out.contains(&j) {
                continue;
            }
            out.push(j);
        }
    }

    /// Number of `+1` players among the `k` contacts of `i`.
    pub fn adopter_contacts<R: Rng + ?Sized>(&self, i: usize, x: &[Action], rng: &mut R, scratch: &mut Vec<usize>) -> usize {
        self.contacts_of(i, rng, scratch);
        scratch.iter().filter(|&&j| x[j] == Action::Plus).count()
    }
}

/// One step of contact lists: `lists[i]` holds `(j, w_ij)` with every draw
/// weighing `1/k` and repeated draws accumulating.
pub type ContactLists = Vec<Vec<(usize, f64)>>;

fn collect_lists<R: Rng + ?Sized>(sampler: &ContactSampler<'_>, n: usize, k: usize, rng: &mut R) -> ContactLists {
    let weight = 1.0 / k as f64;
    let mut draws = Vec::with_capacity(k);
    (0..n)
        .map(|i| {
            sampler.contacts_of(i, rng, &mut draws);
            let mut list: Vec<(usize, f64)> = Vec::with_capacity(k);
            for &j in &draws {
                match list.iter_mut().find(|(t, _)| *t == j) {
                    Some((_, w)) => *w += weight,
                    None => list.push((j, weight)),
                }
            }
            list
        })
        .collect()
}

pub fn sample_contacts_uniform<R: Rng + ?Sized>(n: usize, params: &ContactParams, rng: &mut R) -> Result<ContactLists> {
    let sampler = ContactSampler::uniform(n, params)?;
    Ok(collect_lists(&sampler, n, params.k, rng))
}

pub fn sample_contacts_visibility<R: Rng + ?Sized>(
    params: &ContactParams,
    x: &[Action],
    rng: &mut R,
) -> Result<ContactLists> {
    let sampler = ContactSampler::visibility(params, x)?;
    Ok(collect_lists(&sampler, x.len(), params.k, rng))
}
