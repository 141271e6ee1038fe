//! Small symmetric unit-weight graphs for experiments and tests.

use std::collections::BTreeSet;

use rand::Rng;

use super::Graph;
use crate::error::{Error, Result};

fn undirected(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Graph {
    Graph::from_undirected(n, pairs.into_iter().map(|(a, b)| (a, b, 1.0)))
        .expect("generator produced a valid edge set")
}

pub fn complete(n: usize) -> Graph {
    undirected(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Hub `0` joined to leaves `1..n`.
pub fn star(n: usize) -> Graph {
    undirected(n, (1..n).map(|leaf| (0, leaf)))
}

pub fn ring(n: usize) -> Graph {
    undirected(n, (0..n).map(|i| (i, (i + 1) % n)).filter(|(a, b)| a != b))
}

/// Cliques `{0,1,2}` and `{3,4,5}` joined by the bridge `1 - 4`.
pub fn two_triangles() -> Graph {
    undirected(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (1, 4)])
}

pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    undirected(n, pairs)
}

/// Ring lattice where every node links to its `k/2` nearest neighbors on each
/// side, with each lattice edge rewired to a uniform target with probability `p`.
pub fn watts_strogatz<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Result<Graph> {
    if k % 2 != 0 || k == 0 || k >= n {
        return Err(Error::domain(format!(
            "small-world lattice needs an even degree 0 < k < n, got k={k}, n={n}"
        )));
    }
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        for step in 1..=k / 2 {
            edges.insert(key(i, (i + step) % n));
        }
    }
    for step in 1..=k / 2 {
        for i in 0..n {
            let old = key(i, (i + step) % n);
            if !edges.contains(&old) || rng.random::<f64>() >= p {
                continue;
            }
            let degree = edges.iter().filter(|&&(a, b)| a == i || b == i).count();
            if degree >= n - 1 {
                continue;
            }
            loop {
                let target = rng.random_range(0..n);
                if target != i && !edges.contains(&key(i, target)) {
                    edges.remove(&old);
                    edges.insert(key(i, target));
                    break;
                }
            }
        }
    }
    Ok(undirected(n, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sizes() {
        assert_eq!(complete(4).edge_count(), 12);
        assert_eq!(star(4).edge_count(), 6);
        assert_eq!(ring(5).edge_count(), 10);
        assert_eq!(two_triangles().edge_count(), 14);
    }

    #[test]
    fn small_world_keeps_edge_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = watts_strogatz(84, 6, 0.1, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 84 * 6);
        assert!(!g.has_self_loops());
        assert!(watts_strogatz(10, 3, 0.1, &mut rng).is_err());
    }
}
