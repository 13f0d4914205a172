//! Space generators.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricMeasureSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    /// Points `0..len` on the line with weight `(1 + x)^exponent`.
    Grid1d { len: usize, exponent: f64 },
    /// The `side x side` integer grid with Euclidean distance and weight
    /// `(1 + |x|)^exponent`. Point `(i, j)` has id `i * side + j`.
    Grid2d { side: usize, exponent: f64 },
    /// Path graph on `len` vertices, unit edges and weights.
    Path { len: usize },
    /// Complete binary tree of the given depth, unit edges and weights.
    /// Vertex `v` has children `2v + 1` and `2v + 2`.
    BinaryTree { depth: u32 },
    /// Random recursive tree: vertex `i` attaches to a uniform earlier vertex.
    RandomTree { n: usize, seed: u64 },
    /// Strict lower triangle of the distance matrix plus weights.
    Explicit {
        label: String,
        lower: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub generator: Generator,
    /// Rescale distances so the diameter is 1/2.
    #[serde(default)]
    pub normalize: bool,
}

impl SpaceSpec {
    pub fn new(generator: Generator) -> Self {
        Self {
            generator,
            normalize: false,
        }
    }

    pub fn normalized(generator: Generator) -> Self {
        Self {
            generator,
            normalize: true,
        }
    }
}

pub fn build_space(spec: &SpaceSpec) -> Result<MetricMeasureSpace> {
    let space = match &spec.generator {
        Generator::Grid1d { len, exponent } => {
            check_len(*len)?;
            check_exponent(*exponent, 1)?;
            let n = *len;
            let dist = (0..n * n)
                .map(|k| (k / n).abs_diff(k % n) as f64)
                .collect();
            let weight = (0..n).map(|x| (1.0 + x as f64).powf(*exponent)).collect();
            MetricMeasureSpace::from_matrix(format!("grid1d-{n}-a{exponent}"), dist, weight)?
        }
        Generator::Grid2d { side, exponent } => {
            check_len(*side)?;
            check_exponent(*exponent, 2)?;
            let s = *side;
            let n = s * s;
            let coords: Vec<(f64, f64)> = (0..n).map(|k| ((k / s) as f64, (k % s) as f64)).collect();
            let mut dist = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    dist[a * n + b] = (coords[a].0 - coords[b].0).hypot(coords[a].1 - coords[b].1);
                }
            }
            let weight = coords
                .iter()
                .map(|&(i, j)| (1.0 + i.hypot(j)).powf(*exponent))
                .collect();
            MetricMeasureSpace::from_matrix(format!("grid2d-{s}-a{exponent}"), dist, weight)?
        }
        Generator::Path { len } => {
            check_len(*len)?;
            let edges: Vec<(usize, usize)> = (1..*len).map(|i| (i - 1, i)).collect();
            graph_space(format!("path-{len}"), *len, &edges)?
        }
        Generator::BinaryTree { depth } => {
            if *depth > 12 {
                return Err(Error::Invalid(format!("binary tree depth {depth} is too large")));
            }
            let n = (1usize << (depth + 1)) - 1;
            let edges: Vec<(usize, usize)> = (1..n).map(|v| ((v - 1) / 2, v)).collect();
            graph_space(format!("bintree-{depth}"), n, &edges)?
        }
        Generator::RandomTree { n, seed } => {
            check_len(*n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let edges: Vec<(usize, usize)> = (1..*n).map(|v| (rng.gen_range(0..v), v)).collect();
            graph_space(format!("randtree-{n}-s{seed}"), *n, &edges)?
        }
        Generator::Explicit { label, lower, weights } => {
            MetricMeasureSpace::from_lower_triangle(label.clone(), lower, weights.clone())?
        }
    };
    Ok(if spec.normalize { space.normalized() } else { space })
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Invalid("generator size must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `(1 + |x|)^a` is doubling on `Z^d` iff `a > -d`.
fn check_exponent(exponent: f64, dimension: usize) -> Result<()> {
    if exponent.is_finite() && exponent > -(dimension as f64) {
        Ok(())
    } else {
        Err(Error::NonDoubling {
            exponent,
            dimension,
        })
    }
}

/// Shortest-path metric of a connected graph with unit edges, unit weights.
fn graph_space(label: String, n: usize, edges: &[(usize, usize)]) -> Result<MetricMeasureSpace> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![f64::INFINITY; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        row[s] = 0.0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if row[w].is_infinite() {
                    row[w] = row[v] + 1.0;
                    queue.push_back(w);
                }
            }
        }
    }
    if dist.iter().any(|d| d.is_infinite()) {
        return Err(Error::Distance("graph is not connected".into()));
    }
    MetricMeasureSpace::from_matrix(label, dist, vec![1.0; n])
}
