//! Extremely randomized regression trees.
//!
//! At every node `k` candidate features are drawn among the non-constant
//! ones, each gets one cut-point drawn uniformly between the node's minimum
//! and maximum of that feature, and the candidate with the largest variance
//! reduction wins. Nodes with fewer than `n_min` samples, constant targets or
//! only constant features become leaves holding the mean target. The forest
//! predicts the average of its trees.
//!
//! Tree `i` draws from its own RNG stream seeded with `seed + i`, so building
//! the trees in parallel gives the same forest as building them in order.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Minimum node size that may still be split.
    pub n_min: usize,
    /// Candidate features per node; `None` means the input dimension.
    pub k_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 60,
            n_min: 3,
            k_features: None,
        }
    }
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column-major copy: feature `j` occupies `[j * rows, (j + 1) * rows)`.
    fn columns(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for (i, row) in self.data.chunks_exact(self.cols).enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[j * self.rows + i] = v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: u32,
        cut: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    #[inline]
    fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    cut,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] < cut {
                        left as usize
                    } else {
                        right as usize
                    }
                }
            }
        }
    }

    fn depths(&self, out: &mut Vec<usize>) {
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf(_) => {
                    if out.len() <= d {
                        out.resize(d + 1, 0);
                    }
                    out[d] += 1;
                }
                Node::Split { left, right, .. } => {
                    stack.push((left as usize, d + 1));
                    stack.push((right as usize, d + 1));
                }
            }
        }
    }
}

/// Scores seen at one node while fitting: the chosen split's variance
/// reduction and that of every candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAudit {
    pub chosen: f64,
    pub candidates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    n_features: usize,
}

/// Size summary for debugging dumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestStats {
    pub trees: usize,
    pub nodes: usize,
    pub leaves: usize,
    pub max_depth: usize,
    /// Leaf count per depth, summed over trees.
    pub depth_histogram: Vec<usize>,
}

impl Forest {
    pub fn fit(x: &FeatureMatrix, y: &[f64], config: &ForestConfig, seed: u64) -> Result<Forest> {
        validate(x, y, config)?;
        let columns = x.columns();
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| build_tree(x, &columns, y, config, seed.wrapping_add(t as u64), None))
            .collect();
        Ok(Forest {
            trees,
            n_features: x.cols(),
        })
    }

    /// Serial fit that also records every node's candidate scores.
    pub fn fit_audited(
        x: &FeatureMatrix,
        y: &[f64],
        config: &ForestConfig,
        seed: u64,
    ) -> Result<(Forest, Vec<SplitAudit>)> {
        validate(x, y, config)?;
        let mut audit = Vec::new();
        let columns = x.columns();
        let trees = (0..config.n_trees)
            .map(|t| build_tree(x, &columns, y, config, seed.wrapping_add(t as u64), Some(&mut audit)))
            .collect();
        Ok((
            Forest {
                trees,
                n_features: x.cols(),
            },
            audit,
        ))
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    /// Average of the tree leaves. The result is clamped to the range of the
    /// visited leaf values, which the exact mean never leaves.
    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for tree in &self.trees {
            let v = tree.leaf_value(x);
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (sum / self.trees.len() as f64).clamp(lo, hi)
    }

    /// Predictions at `(state, a)` for every `a` in `actions`, where the
    /// action is the last input feature. `actions` must be ascending. Each
    /// tree is walked once, forking only at splits on the action, and the
    /// values equal those of [`Forest::predict`] bit for bit.
    pub fn predict_actions(&self, state: &[f64], actions: &[f64], out: &mut [f64]) -> Result<()> {
        if state.len() + 1 != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features - 1,
                got: state.len(),
            });
        }
        if out.len() != actions.len() {
            return Err(Error::Dimension {
                expected: actions.len(),
                got: out.len(),
            });
        }
        if actions.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Argument("actions must be sorted ascending".into()));
        }
        self.predict_actions_unchecked(state, actions, out);
        Ok(())
    }

    pub(crate) fn predict_actions_unchecked(&self, state: &[f64], actions: &[f64], out: &mut [f64]) {
        let m = actions.len();
        let action_feature = state.len() as u32;
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut stack: Vec<(usize, usize, usize)> = Vec::with_capacity(16);
        for tree in &self.trees {
            stack.push((0, 0, m));
            while let Some((mut i, a, b)) = stack.pop() {
                loop {
                    match tree.nodes[i] {
                        Node::Leaf(v) => {
                            for k in a..b {
                                out[k] += v;
                                lo[k] = lo[k].min(v);
                                hi[k] = hi[k].max(v);
                            }
                            break;
                        }
                        Node::Split {
                            feature,
                            cut,
                            left,
                            right,
                        } if feature == action_feature => {
                            let p = a + actions[a..b].partition_point(|&u| u < cut);
                            if p > a {
                                stack.push((left as usize, a, p));
                            }
                            if p < b {
                                stack.push((right as usize, p, b));
                            }
                            break;
                        }
                        Node::Split {
                            feature,
                            cut,
                            left,
                            right,
                        } => {
                            i = if state[feature as usize] < cut {
                                left as usize
                            } else {
                                right as usize
                            };
                        }
                    }
                }
            }
        }
        let n = self.trees.len() as f64;
        for k in 0..m {
            out[k] = (out[k] / n).clamp(lo[k], hi[k]);
        }
    }

    pub fn stats(&self) -> ForestStats {
        let mut hist = Vec::new();
        for t in &self.trees {
            t.depths(&mut hist);
        }
        ForestStats {
            trees: self.trees.len(),
            nodes: self.trees.iter().map(|t| t.nodes.len()).sum(),
            leaves: hist.iter().sum(),
            max_depth: hist.len().saturating_sub(1),
            depth_histogram: hist,
        }
    }
}

fn validate(x: &FeatureMatrix, y: &[f64], config: &ForestConfig) -> Result<()> {
    if x.rows() == 0 || y.is_empty() {
        return Err(Error::Argument("cannot fit a forest on an empty dataset".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.cols() == 0 {
        return Err(Error::Argument("inputs need at least one feature".into()));
    }
    if config.n_trees == 0 {
        return Err(Error::Argument("a forest needs at least one tree".into()));
    }
    if !x.data.iter().chain(y).all(|v| v.is_finite()) {
        return Err(Error::Argument("inputs and targets must be finite".into()));
    }
    Ok(())
}

/// Uniform draw strictly inside `(lo, hi)`; falls back to `hi` only when no
/// representable value lies strictly between, which still separates samples.
fn draw_cut<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    for _ in 0..16 {
        let c = lo + rng.gen::<f64>() * (hi - lo);
        if c > lo && c < hi {
            return c;
        }
    }
    let mid = lo + 0.5 * (hi - lo);
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// `columns` is the column-major copy of `x`: ranges are gathered row by
/// row, candidate cuts are scored column by column.
fn build_tree(
    x: &FeatureMatrix,
    columns: &[f64],
    y: &[f64],
    config: &ForestConfig,
    seed: u64,
    mut audit: Option<&mut Vec<SplitAudit>>,
) -> Tree {
    let mut rng = seeded(seed);
    let (rows, d) = (x.rows(), x.cols());
    let column = |f: usize| &columns[f * rows..(f + 1) * rows];
    let k = config.k_features.unwrap_or(d).clamp(1, d);
    let mut idx: Vec<u32> = (0..rows as u32).collect();
    let mut nodes = vec![Node::Leaf(0.0)];
    let mut stack = vec![(0usize, 0usize, idx.len())];
    let mut ranges: Vec<(usize, f64, f64)> = Vec::with_capacity(d);
    let mut scores: Vec<f64> = Vec::with_capacity(d);
    let (mut lo, mut hi) = (vec![0.0; d], vec![0.0; d]);
    // Centred targets of the current node, in sample order.
    let mut dy: Vec<f64> = Vec::with_capacity(rows);

    while let Some((id, start, end)) = stack.pop() {
        let samples = &mut idx[start..end];
        let n = samples.len();
        let (mut y_lo, mut y_hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &i in samples.iter() {
            let v = y[i as usize];
            y_lo = y_lo.min(v);
            y_hi = y_hi.max(v);
            sum += v;
        }
        let mean = (sum / n as f64).clamp(y_lo, y_hi);
        if n < config.n_min.max(2) || y_lo == y_hi {
            nodes[id] = Node::Leaf(mean);
            continue;
        }

        lo.fill(f64::INFINITY);
        hi.fill(f64::NEG_INFINITY);
        for &i in samples.iter() {
            for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(x.row(i as usize)) {
                *l = if v < *l { v } else { *l };
                *h = if v > *h { v } else { *h };
            }
        }
        ranges.clear();
        ranges.extend((0..d).filter(|&f| lo[f] < hi[f]).map(|f| (f, lo[f], hi[f])));
        if ranges.is_empty() {
            nodes[id] = Node::Leaf(mean);
            continue;
        }
        if k < ranges.len() {
            let mut picked = index::sample(&mut rng, ranges.len(), k).into_vec();
            picked.sort_unstable();
            ranges = picked.into_iter().map(|j| ranges[j]).collect();
        }

        dy.clear();
        dy.extend(samples.iter().map(|&i| y[i as usize] - mean));
        let (mut tot_d, mut tot_d2) = (0.0, 0.0);
        for &dv in &dy {
            tot_d += dv;
            tot_d2 += dv * dv;
        }

        let mut best: Option<(usize, f64, f64)> = None;
        scores.clear();
        for &(f, lo, hi) in &ranges {
            let cut = draw_cut(&mut rng, lo, hi);
            let col = column(f);
            let (mut nl, mut sl, mut sl2) = (0usize, 0.0, 0.0);
            // Branch-free: the cut falls at random, so a branch here mispredicts half the time.
            for (&i, &dv) in samples.iter().zip(&dy) {
                let below = col[i as usize] < cut;
                let m = below as u8 as f64;
                nl += below as usize;
                sl += m * dv;
                sl2 += m * (dv * dv);
            }
            let nr = n - nl;
            let ss_l = sl2 - sl * sl / nl as f64;
            let (sr, sr2) = (tot_d - sl, tot_d2 - sl2);
            let ss_r = sr2 - sr * sr / nr as f64;
            let score = tot_d2 - ss_l - ss_r;
            scores.push(score);
            // Ascending feature order makes the first maximum the lowest index.
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((f, cut, score));
            }
        }
        let (feature, cut, chosen) = best.expect("at least one candidate");
        if let Some(log) = audit.as_deref_mut() {
            log.push(SplitAudit {
                chosen,
                candidates: scores.clone(),
            });
        }

        // Partition: samples below the cut first.
        let col = column(feature);
        let mut mid = 0;
        for j in 0..n {
            if col[samples[j] as usize] < cut {
                samples.swap(mid, j);
                mid += 1;
            }
        }
        debug_assert!(mid > 0 && mid < n);
        let left = nodes.len();
        nodes.push(Node::Leaf(0.0));
        nodes.push(Node::Leaf(0.0));
        nodes[id] = Node::Split {
            feature: feature as u32,
            cut,
            left: left as u32,
            right: left as u32 + 1,
        };
        stack.push((left + 1, start + mid, end));
        stack.push((left, start, start + mid));
    }
    Tree { nodes }
}
