//! Static weighted directed graphs.
//!
//! An arc `i -> j` with weight `w` means that `i` observes (is influenced by)
//! `j`. The same type serves the action layer `A` and the opinion layer `W`
//! of the coevolutionary model; undirected inputs are stored as two arcs.

mod generators;
mod io;

pub use generators::{complete, erdos_renyi, ring, star, two_triangles, watts_strogatz};
pub use io::{load_edge_list, read_edge_list, LoadOptions};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::games::Action;

/// Row sums of a row-stochastic graph must be within this of one.
pub const STOCHASTIC_TOL: f64 = 1e-12;

pub const DEFAULT_CENTRALITY_TOL: f64 = 1e-10;
pub const DEFAULT_CENTRALITY_MAX_ITER: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    /// Out-arcs of every node, sorted by target, no duplicates, no zero weights.
    rows: Vec<Vec<(usize, f64)>>,
    row_stochastic: bool,
    labels: Option<Vec<String>>,
}

impl Graph {
    /// Builds a graph from arcs `(source, target, weight)`. Duplicate arcs are
    /// summed and zero-weight arcs dropped; self-loops are kept.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (src, dst, w) in edges {
            if src >= n || dst >= n {
                return Err(Error::domain(format!(
                    "arc {src} -> {dst} out of range for {n} nodes"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::domain(format!(
                    "arc {src} -> {dst} has invalid weight {w}"
                )));
            }
            rows[src].push((dst, w));
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, w) in row.iter() {
                match merged.last_mut() {
                    Some((last, acc)) if *last == j => *acc += w,
                    _ => merged.push((j, w)),
                }
            }
            merged.retain(|&(_, w)| w > 0.0);
            *row = merged;
        }
        let mut g = Graph {
            rows,
            row_stochastic: false,
            labels: None,
        };
        g.row_stochastic = g.check_row_stochastic();
        Ok(g)
    }

    /// Symmetric graph with an arc each way for every listed pair.
    pub fn from_undirected<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let arcs: Vec<_> = edges
            .into_iter()
            .flat_map(|(a, b, w)| {
                if a == b {
                    vec![(a, b, w)]
                } else {
                    vec![(a, b, w), (b, a, w)]
                }
            })
            .collect();
        Self::from_edges(n, arcs)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Out-arcs of `i` as `(target, weight)`, sorted by target.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn out_weight(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(t, _)| t) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.row_stochastic
    }

    /// Node labels in index order, when the graph was loaded with string ids.
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub(crate) fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    /// `sum_j w_ij * value(j)`.
    #[inline]
    pub fn weighted_sum(&self, i: usize, value: impl Fn(usize) -> f64) -> f64 {
        self.rows[i].iter().map(|&(j, w)| w * value(j)).sum()
    }

    /// `sum_j a_ij x_j` for a ±1 action profile.
    #[inline]
    pub fn action_sum(&self, i: usize, x: &[Action]) -> f64 {
        self.weighted_sum(i, |j| x[j].value())
    }

    pub fn has_self_loops(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .any(|(i, row)| row.iter().any(|&(j, _)| j == i))
    }

    pub fn without_self_loops(&self) -> Graph {
        let rows: Vec<Vec<(usize, f64)>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().copied().filter(|&(j, _)| j != i).collect())
            .collect();
        let mut g = Graph {
            rows,
            row_stochastic: false,
            labels: self.labels.clone(),
        };
        g.row_stochastic = g.check_row_stochastic();
        g
    }

    /// Multiplies every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Graph> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::domain(format!("invalid scale factor {factor}")));
        }
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| (j, w * factor)).collect())
            .collect();
        let mut g = Graph {
            rows,
            row_stochastic: false,
            labels: self.labels.clone(),
        };
        g.row_stochastic = g.check_row_stochastic();
        Ok(g)
    }

    fn check_row_stochastic(&self) -> bool {
        (0..self.n()).all(|i| (self.out_weight(i) - 1.0).abs() <= STOCHASTIC_TOL)
    }

    /// Divides every out-row by its sum.
    pub fn row_normalize(&self) -> Result<Graph> {
        let mut rows = Vec::with_capacity(self.n());
        for (i, row) in self.rows.iter().enumerate() {
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            if total <= 0.0 {
                return Err(Error::Normalization { node: i });
            }
            rows.push(row.iter().map(|&(j, w)| (j, w / total)).collect());
        }
        Ok(Graph {
            rows,
            // Rounding may leave a row a few ulps off one; the operation
            // guarantees stochasticity so the flag is set unconditionally.
            row_stochastic: true,
            labels: self.labels.clone(),
        })
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    /// Connectivity ignoring arc direction.
    pub fn is_weakly_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return false;
        }
        let mut undirected: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                undirected[i].push(j);
                undirected[j].push(i);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &undirected[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Strongly connected component id of every node (Kosaraju).
    pub fn strongly_connected_components(&self) -> (usize, Vec<usize>) {
        let n = self.n();
        // first pass: finishing order on the forward graph
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        for start in 0..n {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            let mut stack = vec![(start, 0usize)];
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                if *next < self.rows[u].len() {
                    let v = self.rows[u][*next].0;
                    *next += 1;
                    if !visited[v] {
                        visited[v] = true;
                        stack.push((v, 0));
                    }
                } else {
                    order.push(u);
                    stack.pop();
                }
            }
        }
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                reverse[j].push(i);
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for &root in order.iter().rev() {
            if comp[root] != usize::MAX {
                continue;
            }
            comp[root] = count;
            let mut stack = vec![root];
            while let Some(u) = stack.pop() {
                for &v in &reverse[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    /// Nodes reachable from every node along arcs, i.e. the unique sink
    /// component when there is exactly one. Empty if there is none.
    pub fn globally_reachable_nodes(&self) -> Vec<usize> {
        let (count, comp) = self.strongly_connected_components();
        let mut is_sink = vec![true; count];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                if comp[i] != comp[j] {
                    is_sink[comp[i]] = false;
                }
            }
        }
        let sinks: Vec<usize> = (0..count).filter(|&c| is_sink[c]).collect();
        if sinks.len() != 1 {
            return Vec::new();
        }
        (0..self.n()).filter(|&i| comp[i] == sinks[0]).collect()
    }

    /// Dominant right eigenvector of the weight matrix, normalized to unit sum.
    ///
    /// Iterates `x <- (W + I) x` from the uniform vector; the shift leaves the
    /// eigenvectors unchanged and removes the oscillation of plain power
    /// iteration on bipartite graphs.
    pub fn eigenvector_centrality(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        if !(tol > 0.0) {
            return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
        }
        let n = self.n();
        if n == 0 {
            return Err(Error::domain("empty graph"));
        }
        if !self.is_weakly_connected() {
            return Err(Error::domain("eigenvector centrality needs a connected graph"));
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            for (i, slot) in next.iter_mut().enumerate() {
                *slot = x[i] + self.weighted_sum(i, |j| x[j]);
            }
            let total: f64 = next.iter().sum();
            if total <= 0.0 {
                return Err(Error::domain("weight matrix has no positive eigenvector"));
            }
            residual = 0.0;
            for (xi, ni) in x.iter_mut().zip(next.iter()) {
                let v = ni / total;
                residual = f64::max(residual, (v - *xi).abs());
                *xi = v;
            }
            if residual < tol {
                return Ok(x);
            }
        }
        Err(Error::Iteration {
            iterations: max_iter,
            residual,
        })
    }

    /// Stationary left eigenvector `pi` of a row-stochastic graph:
    /// `pi^T W = pi^T`, `sum pi = 1`, supported on the globally reachable nodes.
    pub fn social_power(&self) -> Result<Vec<f64>> {
        if !self.row_stochastic {
            return Err(Error::domain("social power needs a row-stochastic graph"));
        }
        let n = self.n();
        if n == 0 {
            return Err(Error::domain("empty graph"));
        }
        if self.globally_reachable_nodes().is_empty() {
            return Err(Error::domain("no globally reachable node"));
        }
        // (W^T - I) pi = 0 with the last equation replaced by sum(pi) = 1;
        // nonsingular when the stationary distribution is unique.
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(j, i)] += w;
            }
        }
        for i in 0..n {
            m[(i, i)] -= 1.0;
        }
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::domain("stationary system is singular"))?;
        let mut pi: Vec<f64> = pi.iter().map(|&v| if v.abs() < 1e-15 { 0.0 } else { v }).collect();
        if pi.iter().any(|&v| v < 0.0) {
            return Err(Error::domain("stationary vector has negative entries"));
        }
        let total: f64 = pi.iter().sum();
        for v in &mut pi {
            *v /= total;
        }
        Ok(pi)
    }

    /// Cohesiveness of `set` for coordinating on `action`: every member keeps at
    /// least `1/(2+alpha)` (for +1) or `(1+alpha)/(2+alpha)` (for -1) of its
    /// influence weight inside the set.
    pub fn is_cohesive(&self, set: &[usize], alpha: f64, action: Action) -> Result<bool> {
        if set.is_empty() {
            return Err(Error::domain("cohesive-set test needs a nonempty set"));
        }
        if !(alpha > -1.0) {
            return Err(Error::domain(format!("alpha must exceed -1, got {alpha}")));
        }
        let n = self.n();
        let mut member = vec![false; n];
        for &i in set {
            if i >= n {
                return Err(Error::domain(format!("node {i} out of range")));
            }
            member[i] = true;
        }
        let threshold = match action {
            Action::Plus => 1.0 / (2.0 + alpha),
            Action::Minus => (1.0 + alpha) / (2.0 + alpha),
        };
        Ok(set.iter().all(|&i| {
            let inside = self.weighted_sum(i, |j| if member[j] { 1.0 } else { 0.0 });
            inside >= threshold - STOCHASTIC_TOL
        }))
    }
}
