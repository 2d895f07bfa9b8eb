//! Bagged CART trees with gini splits on one-hot columns.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::predictor::Dataset;
use crate::stable_hash;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    /// Columns tried per split; 0 means `ceil(sqrt(width))`.
    pub mtry: usize,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 100, max_depth: 12, mtry: 0, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    /// Rows with `codes[field] == value` go to `yes`.
    Split { field: u16, value: u16, yes: u32, no: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, codes: &[u16]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(p) => return p,
                Node::Split { field, value, yes, no } => {
                    i = if codes[field as usize] == value { yes } else { no } as usize;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    data: &'a Dataset,
    columns: Vec<(u16, u16)>,
    params: ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let id = self.nodes.len() as u32;
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.data.labels[i]).count();
        let leaf = Node::Leaf(if n == 0 { 0.5 } else { pos as f64 / n as f64 });
        self.nodes.push(leaf);
        if depth >= self.params.max_depth || n < self.params.min_samples_split || pos == 0 || pos == n {
            return id;
        }
        let parent = gini(pos, n);
        let (candidates, _) = self.columns.partial_shuffle(rng, self.mtry);
        let mut best: Option<(f64, u16, u16)> = None;
        for &(field, value) in candidates.iter() {
            let (mut yn, mut yp) = (0, 0);
            for &i in &rows {
                if self.data.codes[i][field as usize] == value {
                    yn += 1;
                    yp += self.data.labels[i] as usize;
                }
            }
            if yn == 0 || yn == n {
                continue;
            }
            let child = (yn as f64 * gini(yp, yn) + (n - yn) as f64 * gini(pos - yp, n - yn)) / n as f64;
            let gain = parent - child;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, field, value));
            }
        }
        let Some((_, field, value)) = best else { return id };
        let (yes_rows, no_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.data.codes[i][field as usize] == value);
        let yes = self.grow(yes_rows, depth + 1, rng);
        let no = self.grow(no_rows, depth + 1, rng);
        self.nodes[id as usize] = Node::Split { field, value, yes, no };
        id
    }
}

impl Forest {
    pub fn fit(data: &Dataset, params: ForestParams, seed: u64) -> Self {
        let columns: Vec<(u16, u16)> = data
            .cardinalities
            .iter()
            .enumerate()
            .flat_map(|(f, &c)| (0..c).map(move |v| (f as u16, v as u16)))
            .collect();
        let width = columns.len();
        let mtry = if params.mtry == 0 { libm::ceil(libm::sqrt(width as f64)) as usize } else { params.mtry }.clamp(1, width);
        let n = data.len();
        let trees = (0..params.trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[b"forest", &seed.to_le_bytes(), &(t as u64).to_le_bytes()]));
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut b = Builder { data, columns: columns.clone(), params, mtry, nodes: Vec::new() };
                b.grow(sample, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Forest { trees }
    }

    pub fn predict_proba(&self, codes: &[u16]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.predict(codes)).sum::<f64>() / self.trees.len() as f64
    }
}
