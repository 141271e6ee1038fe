use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// How an edge-list document is interpreted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    /// Each line adds both `src -> dst` and `dst -> src`.
    pub undirected: bool,
    /// Node ids are arbitrary tokens, mapped to dense indices in order of
    /// first appearance. Otherwise ids must be nonnegative integers.
    pub labels: bool,
    pub keep_self_loops: bool,
}

/// Parses `src dst [weight]` lines; `#` starts a comment.
pub fn load_edge_list(text: &str, opts: &LoadOptions) -> Result<Graph> {
    let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut n = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() > 3 || tokens.len() < 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected `src dst [weight]`, found {} fields", tokens.len()),
            });
        }
        let mut node = |tok: &str| -> Result<usize> {
            if opts.labels {
                let next = labels.len();
                let id = *index.entry(tok.to_string()).or_insert_with(|| {
                    labels.push(tok.to_string());
                    next
                });
                Ok(id)
            } else {
                tok.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid node id `{tok}`"),
                })
            }
        };
        let src = node(tokens[0])?;
        let dst = node(tokens[1])?;
        let weight = match tokens.get(2) {
            None => 1.0,
            Some(tok) => {
                let w: f64 = tok.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid weight `{tok}`"),
                })?;
                if !w.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite weight `{tok}`"),
                    });
                }
                if w < 0.0 {
                    return Err(Error::domain(format!("line {line}: negative weight {w}")));
                }
                w
            }
        };
        n = n.max(src + 1).max(dst + 1);
        if src == dst && !opts.keep_self_loops {
            continue;
        }
        arcs.push((src, dst, weight));
        if opts.undirected && src != dst {
            arcs.push((dst, src, weight));
        }
    }
    if n == 0 {
        return Err(Error::domain("edge list contains no edges"));
    }
    let g = Graph::from_edges(n, arcs)?;
    Ok(if opts.labels { g.with_labels(labels) } else { g })
}

pub fn read_edge_list(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_edge_list(&text, opts)
}
