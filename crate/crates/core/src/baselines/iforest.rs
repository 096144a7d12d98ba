use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EXACT_HARMONIC_LIMIT: usize = 512;

/// `H(n) = 1 + 1/2 + … + 1/n`; summed exactly up to 512, asymptotic above.
pub fn harmonic(n: usize) -> f64 {
    if n <= EXACT_HARMONIC_LIMIT {
        (1..=n).map(|k| 1.0 / k as f64).sum()
    } else {
        (n as f64).ln() + EULER_GAMMA
    }
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// nodes: `c(n) = 2H(n−1) − 2(n−1)/n`, with `c(1) = 0` and `c(2) = 1`.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IForestConfig {
    pub trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            subsample: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// Arena-stored isolation tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    /// Rows each tree was built on: `min(ψ, N)`.
    pub sample_size: usize,
    pub dim: usize,
}

struct Builder<'a> {
    data: &'a Matrix,
    height_limit: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= self.height_limit || rows.len() <= 1 {
            return id;
        }
        let mut features: Vec<usize> = (0..self.data.cols()).collect();
        features.shuffle(rng);
        for f in features {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    let v = self.data[(r, f)];
                    (lo.min(v), hi.max(v))
                });
            if hi <= lo {
                continue;
            }
            // Any value in (lo, hi] leaves both sides non-empty.
            let mut value = lo + rng.random::<f64>() * (hi - lo);
            if value <= lo {
                value = hi;
            }
            let mut k = 0;
            for i in 0..rows.len() {
                if self.data[(rows[i], f)] < value {
                    rows.swap(i, k);
                    k += 1;
                }
            }
            let (l, r) = rows.split_at_mut(k);
            let left = self.build(l, depth + 1, rng);
            let right = self.build(r, depth + 1, rng);
            self.nodes[id] = Node::Split {
                feature: f,
                value,
                left,
                right,
            };
            return id;
        }
        id
    }
}

impl IsolationTree {
    /// Depth at which `x` lands, plus `c(size)` for the unresolved leaf.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { size } => return depth + average_path_length(*size),
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *value { *left } else { *right };
                    depth += 1.0;
                }
            }
        }
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64 + 1);
    rng
}

pub fn iforest_fit(data: &Matrix, cfg: &IForestConfig) -> Result<IsolationForest> {
    if data.is_empty() {
        return Err(Error::invalid("isolation forest needs at least one row"));
    }
    if cfg.trees == 0 || cfg.subsample == 0 {
        return Err(Error::invalid("trees and subsample size must be positive"));
    }
    let psi = cfg.subsample.min(data.rows());
    let height_limit = (psi as f64).log2().ceil() as usize;
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(cfg.seed, t);
            let mut rows = index::sample(&mut rng, data.rows(), psi).into_vec();
            let mut b = Builder {
                data,
                height_limit,
                nodes: Vec::new(),
            };
            b.build(&mut rows, 0, &mut rng);
            IsolationTree { nodes: b.nodes }
        })
        .collect();
    Ok(IsolationForest {
        trees,
        sample_size: psi,
        dim: data.cols(),
    })
}

impl IsolationForest {
    pub fn mean_path_lengths(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim {
            return Err(Error::shape(format!(
                "forest fit on {} features, got {}",
                self.dim,
                x.cols()
            )));
        }
        let t = self.trees.len() as f64;
        Ok(x.iter_rows()
            .map(|r| self.trees.iter().map(|tr| tr.path_length(r)).sum::<f64>() / t)
            .collect())
    }

    /// `2^{−E[h(x)]/c(ψ)}`, in `(0, 1]`.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        let c = average_path_length(self.sample_size);
        Ok(self
            .mean_path_lengths(x)?
            .into_iter()
            .map(|h| if c > 0.0 { 2f64.powf(-h / c) } else { 1.0 })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_length_constants() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        assert!((average_path_length(3) - (2.0 * 1.5 - 4.0 / 3.0)).abs() < 1e-15);
        assert!((harmonic(513) - (513f64.ln() + EULER_GAMMA)).abs() < 1e-3);
    }

    #[test]
    fn expected_depth_equal_to_c_scores_half() {
        let c = average_path_length(256);
        assert_eq!(2f64.powf(-c / c), 0.5);
    }

    #[test]
    fn constant_data_gives_single_leaf() {
        let x = Matrix::from_vec(10, 2, vec![1.0; 20]).unwrap();
        let f = iforest_fit(
            &x,
            &IForestConfig {
                trees: 3,
                subsample: 8,
                seed: 0,
            },
        )
        .unwrap();
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        let s = f.score(&x).unwrap();
        // Every row ends in one leaf of size 8: E[h] = c(8), score 0.5.
        assert!(s.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }
}
