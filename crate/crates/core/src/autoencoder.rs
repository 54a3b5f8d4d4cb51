//! Auto-associative network compressing the history window.
//!
//! The default architecture is 20 → 12 → 6 → 12 → 20 with `tanh` on the
//! two outer hidden layers, a linear bottleneck and a linear output. Inputs
//! are standardized with per-feature statistics of the training batch, and
//! the weights minimize the mean squared reconstruction error with
//! full-batch nonlinear conjugate gradient (Polak–Ribière, restarted to
//! steepest descent every `n_params` steps or when the direction stops
//! descending) and a backtracking Armijo line search.
//!
//! With fewer than `min_samples` histories the encoder is a pass-through
//! that returns the first standardized features, so the agent can still act
//! on its first days.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

/// Samples per parallel work unit. Fixed so the reduction order, and thus
/// the result, does not depend on the thread count.
const CHUNK: usize = 256;

const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Layer widths, input to output. The middle entry is the code width.
    pub sizes: Vec<usize>,
    pub max_iters: usize,
    /// Stop once a steepest-descent step improves the loss by less than this
    /// fraction. A stalled conjugate step restarts the direction instead.
    pub tol: f64,
    pub min_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sizes: vec![20, 12, 6, 12, 20],
            max_iters: 500,
            tol: 1e-6,
            min_samples: 20,
        }
    }
}

/// Layer layout over a flat parameter vector: for each layer the weight
/// matrix (row-major, `out × in`) followed by the bias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    sizes: Vec<usize>,
}

impl Architecture {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 3 || sizes.len().is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "auto-encoder needs an odd number (>= 3) of layer widths, got {sizes:?}"
            )));
        }
        if sizes.first() != sizes.last() || sizes.contains(&0) {
            return Err(Error::Argument(format!(
                "input and output widths must match and be positive: {sizes:?}"
            )));
        }
        Ok(Architecture { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        self.sizes[self.bottleneck()]
    }

    /// Index (into `sizes`) of the code layer.
    fn bottleneck(&self) -> usize {
        self.sizes.len() / 2
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Offset of layer `l`'s weights; its bias follows the weights.
    fn offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.sizes[k + 1] * (self.sizes[k] + 1)).sum()
    }

    pub fn n_params(&self) -> usize {
        self.offset(self.layers())
    }

    /// Whether the output of layer `l` (0-based) goes through `tanh`.
    fn is_tanh(&self, l: usize) -> bool {
        let out = l + 1;
        out != self.bottleneck() && out != self.sizes.len() - 1
    }

    /// Activations of every layer for one input; `acts[0]` is the input.
    fn forward(&self, params: &[f64], x: &[f64], upto: usize, acts: &mut Vec<Vec<f64>>) {
        acts.resize(upto + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        for l in 0..upto {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[self.offset(l)..];
            let b = &w[n_out * n_in..];
            let (prev, rest) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for r in 0..n_out {
                let row = &w[r * n_in..(r + 1) * n_in];
                let mut s = b[r];
                for (wi, xi) in row.iter().zip(input) {
                    s += wi * xi;
                }
                out.push(if self.is_tanh(l) { s.tanh() } else { s });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderWeights {
    arch: Architecture,
    params: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
    passthrough: bool,
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    /// Loss after every accepted step, starting with the initial loss.
    pub loss_history: Vec<f64>,
}

/// Per-feature mean and standard deviation; zero-variance features get 1.
pub fn standardization(data: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() / dim;
    if n == 0 {
        return (vec![0.0; dim], vec![1.0; dim]);
    }
    let mut mean = vec![0.0; dim];
    for row in data.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dim];
    for row in data.chunks_exact(dim) {
        for j in 0..dim {
            var[j] += (row[j] - mean[j]).powi(2);
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

fn standardize_into(data: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    let dim = mean.len();
    data.chunks_exact(dim)
        .flat_map(|row| (0..dim).map(move |j| (row[j] - mean[j]) / std[j]))
        .collect()
}

/// Mean squared reconstruction error over standardized samples `data`.
pub fn loss(arch: &Architecture, params: &[f64], data: &[f64]) -> f64 {
    let dim = arch.input_dim();
    let n = data.len() / dim;
    let partial: Vec<f64> = data
        .par_chunks(CHUNK * dim)
        .map(|chunk| {
            let mut acts = Vec::new();
            let mut s = 0.0;
            for x in chunk.chunks_exact(dim) {
                arch.forward(params, x, arch.layers(), &mut acts);
                let out = &acts[arch.layers()];
                s += out.iter().zip(x).map(|(o, t)| (o - t).powi(2)).sum::<f64>();
            }
            s
        })
        .collect();
    partial.iter().sum::<f64>() / (n * dim) as f64
}

/// Loss and its exact gradient by backpropagation.
pub fn loss_and_gradient(arch: &Architecture, params: &[f64], data: &[f64]) -> (f64, Vec<f64>) {
    let dim = arch.input_dim();
    let n = data.len() / dim;
    let partial: Vec<(f64, Vec<f64>)> = data
        .par_chunks(CHUNK * dim)
        .map(|chunk| {
            let mut grad = vec![0.0; params.len()];
            let mut acts = Vec::new();
            let mut delta: Vec<f64> = Vec::new();
            let mut prev_delta: Vec<f64> = Vec::new();
            let mut s = 0.0;
            let layers = arch.layers();
            for x in chunk.chunks_exact(dim) {
                arch.forward(params, x, layers, &mut acts);
                delta.clear();
                for (o, t) in acts[layers].iter().zip(x) {
                    s += (o - t).powi(2);
                    delta.push(2.0 * (o - t));
                }
                for l in (0..layers).rev() {
                    let (n_in, n_out) = (arch.sizes[l], arch.sizes[l + 1]);
                    let off = arch.offset(l);
                    if arch.is_tanh(l) {
                        for (dv, a) in delta.iter_mut().zip(&acts[l + 1]) {
                            *dv *= 1.0 - a * a;
                        }
                    }
                    let input = &acts[l];
                    for r in 0..n_out {
                        let g = &mut grad[off + r * n_in..off + (r + 1) * n_in];
                        for (gi, xi) in g.iter_mut().zip(input) {
                            *gi += delta[r] * xi;
                        }
                        grad[off + n_out * n_in + r] += delta[r];
                    }
                    if l > 0 {
                        prev_delta.clear();
                        prev_delta.resize(n_in, 0.0);
                        let w = &params[off..off + n_out * n_in];
                        for r in 0..n_out {
                            for c in 0..n_in {
                                prev_delta[c] += w[r * n_in + c] * delta[r];
                            }
                        }
                        std::mem::swap(&mut delta, &mut prev_delta);
                    }
                }
            }
            (s, grad)
        })
        .collect();
    let scale = 1.0 / (n * dim) as f64;
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    for (s, g) in partial {
        total += s;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    (total * scale, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Step length along `dir` satisfying the Armijo condition, with its loss.
/// An accepted trial is refined by the minimizer of the quadratic through
/// `f(0)`, `f'(0)` and `f(α)`; a rejected one backtracks to that minimizer,
/// kept within `[0.1 α, 0.5 α]`.
#[allow(clippy::too_many_arguments)]
fn line_search(
    arch: &Architecture,
    params: &[f64],
    dir: &[f64],
    data: &[f64],
    f0: f64,
    slope: f64,
    alpha0: f64,
    scratch: &mut [f64],
) -> Option<(f64, f64)> {
    let mut eval = |a: f64| {
        for i in 0..params.len() {
            scratch[i] = params[i] + a * dir[i];
        }
        loss(arch, scratch, data)
    };
    let armijo = |a: f64, fa: f64| fa.is_finite() && fa <= f0 + ARMIJO_C1 * a * slope;
    let quadratic_min = |a: f64, fa: f64| {
        let curvature = fa - f0 - slope * a;
        if fa.is_finite() && curvature > 0.0 {
            -slope * a * a / (2.0 * curvature)
        } else {
            f64::NAN
        }
    };
    let mut a = alpha0;
    let mut fa = eval(a);
    for _ in 0..MAX_HALVINGS {
        let a_q = quadratic_min(a, fa);
        if armijo(a, fa) {
            if a_q > 0.0 && a_q <= 10.0 * a && (a_q - a).abs() > 0.1 * a {
                let fq = eval(a_q);
                if armijo(a_q, fq) && fq < fa {
                    return Some((a_q, fq));
                }
            }
            return Some((a, fa));
        }
        a = if a_q > 0.0 {
            a_q.clamp(0.1 * a, 0.5 * a)
        } else {
            0.5 * a
        };
        fa = eval(a);
    }
    None
}

/// Minimizes [`loss`] from `params` by Polak–Ribière conjugate gradient.
pub fn conjugate_gradient(
    arch: &Architecture,
    mut params: Vec<f64>,
    data: &[f64],
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, TrainReport) {
    let n_params = params.len();
    let (mut f, mut g) = loss_and_gradient(arch, &params, data);
    let mut history = vec![f];
    let initial = f;
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut last_alpha: Option<f64> = None;
    let mut since_restart = 0usize;
    let mut iterations = 0;
    let mut scratch = vec![0.0; n_params];

    while iterations < max_iters {
        let gg = dot(&g, &g);
        if gg == 0.0 || !gg.is_finite() {
            break;
        }
        let mut slope = dot(&g, &dir);
        let mut steepest = since_restart == 0;
        if slope >= 0.0 {
            dir.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv);
            slope = -gg;
            steepest = true;
            since_restart = 0;
        }
        let alpha0 = match last_alpha {
            Some(a) => (2.0 * a).min(1e3),
            None => 1.0,
        };

        let Some((alpha, f_new)) = line_search(arch, &params, &dir, data, f, slope, alpha0, &mut scratch) else {
            if steepest {
                break;
            }
            // Conjugate direction failed; retry from steepest descent.
            dir.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv);
            since_restart = 0;
            continue;
        };
        last_alpha = Some(alpha);

        iterations += 1;
        for i in 0..n_params {
            params[i] += alpha * dir[i];
        }
        let (_, g_new) = loss_and_gradient(arch, &params, data);
        let improvement = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
        f = f_new;
        history.push(f);
        if improvement < tol {
            if steepest {
                break;
            }
            // A stalled conjugate step: restart before giving up.
            g = g_new;
            dir.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv);
            since_restart = 0;
            continue;
        }

        since_restart += 1;
        let beta = if since_restart >= n_params {
            since_restart = 0;
            0.0
        } else {
            let num: f64 = g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
            (num / gg).max(0.0)
        };
        for i in 0..n_params {
            dir[i] = -g_new[i] + beta * dir[i];
        }
        g = g_new;
    }

    (
        params,
        TrainReport {
            initial_loss: initial,
            final_loss: f,
            iterations,
            loss_history: history,
        },
    )
}

impl EncoderWeights {
    /// Trains on `data`, a flat array of samples of width `sizes[0]`.
    pub fn train(data: &[f64], config: &TrainConfig, seed: u64) -> Result<(Self, TrainReport)> {
        let arch = Architecture::new(config.sizes.clone())?;
        let dim = arch.input_dim();
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: data.len() % dim,
            });
        }
        let n = data.len() / dim;
        let (mean, std) = standardization(data, dim);
        if n < config.min_samples.max(1) {
            let w = EncoderWeights {
                arch,
                params: Vec::new(),
                mean,
                std,
                passthrough: true,
            };
            return Ok((
                w,
                TrainReport {
                    initial_loss: f64::NAN,
                    final_loss: f64::NAN,
                    iterations: 0,
                    loss_history: Vec::new(),
                },
            ));
        }
        let standardized = standardize_into(data, &mean, &std);
        let mut rng = seeded(seed);
        let init: Vec<f64> = (0..arch.n_params()).map(|_| rng.gen_range(-0.1..=0.1)).collect();
        let (params, report) = conjugate_gradient(&arch, init, &standardized, config.max_iters, config.tol);
        Ok((
            EncoderWeights {
                arch,
                params,
                mean,
                std,
                passthrough: false,
            },
            report,
        ))
    }

    /// Pass-through encoder with the given standardization.
    pub fn passthrough(sizes: Vec<usize>, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let arch = Architecture::new(sizes)?;
        if mean.len() != arch.input_dim() || std.len() != arch.input_dim() {
            return Err(Error::Dimension {
                expected: arch.input_dim(),
                got: mean.len().min(std.len()),
            });
        }
        Ok(EncoderWeights {
            arch,
            params: Vec::new(),
            mean,
            std,
            passthrough: true,
        })
    }

    /// Wraps explicit parameters (e.g. for gradient checks).
    pub fn from_parts(arch: Architecture, params: Vec<f64>, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if params.len() != arch.n_params() {
            return Err(Error::Dimension {
                expected: arch.n_params(),
                got: params.len(),
            });
        }
        if mean.len() != arch.input_dim() || std.len() != arch.input_dim() {
            return Err(Error::Dimension {
                expected: arch.input_dim(),
                got: mean.len(),
            });
        }
        if std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Argument("standard deviations must be positive".into()));
        }
        Ok(EncoderWeights {
            arch,
            params,
            mean,
            std,
            passthrough: false,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn is_passthrough(&self) -> bool {
        self.passthrough
    }

    pub fn code_dim(&self) -> usize {
        self.arch.code_dim()
    }

    pub fn standardize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Code of one input vector.
    pub fn encode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.arch.input_dim() {
            return Err(Error::Dimension {
                expected: self.arch.input_dim(),
                got: z.len(),
            });
        }
        let x = self.standardize(z);
        if self.passthrough {
            return Ok(x[..self.code_dim()].to_vec());
        }
        let mut acts = Vec::new();
        self.arch.forward(&self.params, &x, self.arch.bottleneck(), &mut acts);
        Ok(acts.swap_remove(self.arch.bottleneck()))
    }

    /// Reconstruction of `z` in standardized units.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if self.passthrough {
            return Err(Error::Argument("a pass-through encoder has no decoder".into()));
        }
        if z.len() != self.arch.input_dim() {
            return Err(Error::Dimension {
                expected: self.arch.input_dim(),
                got: z.len(),
            });
        }
        let x = self.standardize(z);
        let mut acts = Vec::new();
        self.arch.forward(&self.params, &x, self.arch.layers(), &mut acts);
        Ok(acts.swap_remove(self.arch.layers()))
    }

    /// Gradient of the reconstruction loss on raw samples `batch`, with this
    /// encoder's standardization.
    pub fn gradient(&self, batch: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.passthrough {
            return Err(Error::Argument("a pass-through encoder has no weights".into()));
        }
        if !batch.len().is_multiple_of(self.arch.input_dim()) {
            return Err(Error::Dimension {
                expected: self.arch.input_dim(),
                got: batch.len() % self.arch.input_dim(),
            });
        }
        let x = standardize_into(batch, &self.mean, &self.std);
        Ok(loss_and_gradient(&self.arch, &self.params, &x))
    }

    /// Text snapshot: shape header followed by the flat parameter arrays.
    pub fn to_snapshot(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        let mut s = String::from("autoencoder v1\n");
        let sizes: Vec<String> = self.arch.sizes.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "sizes {}", sizes.join(" "));
        let _ = writeln!(s, "passthrough {}", u8::from(self.passthrough));
        let _ = writeln!(s, "mean {}", join(&self.mean));
        let _ = writeln!(s, "std {}", join(&self.std));
        let _ = writeln!(s, "params {}", join(&self.params));
        s
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Argument(format!("bad auto-encoder snapshot: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("autoencoder v1") {
            return Err(bad("missing header"));
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{name}`")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(&format!("expected `{name}`")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let nums =
            |v: Vec<String>| -> Result<Vec<f64>> { v.iter().map(|s| s.parse::<f64>().map_err(|_| bad(s))).collect() };
        let sizes = field("sizes")?
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| bad(s)))
            .collect::<Result<Vec<_>>>()?;
        let passthrough = field("passthrough")?.first().map(String::as_str) == Some("1");
        let mean = nums(field("mean")?)?;
        let std = nums(field("std")?)?;
        let params = nums(field("params")?)?;
        let arch = Architecture::new(sizes)?;
        if passthrough {
            Self::passthrough(arch.sizes, mean, std)
        } else {
            Self::from_parts(arch, params, mean, std)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_snapshot()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_snapshot(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn small_arch() -> Architecture {
        Architecture::new(vec![5, 4, 2, 4, 5]).unwrap()
    }

    fn random_params(arch: &Architecture, seed: u64, scale: f64) -> Vec<f64> {
        let mut rng = seeded(seed);
        (0..arch.n_params()).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    fn random_batch(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn architecture_layout() {
        let a = Architecture::new(vec![20, 12, 6, 12, 20]).unwrap();
        assert_eq!(a.n_params(), 12 * 21 + 6 * 13 + 12 * 7 + 20 * 13);
        assert_eq!(a.code_dim(), 6);
        assert!(a.is_tanh(0) && !a.is_tanh(1) && a.is_tanh(2) && !a.is_tanh(3));
        assert!(Architecture::new(vec![20, 6, 19]).is_err());
        assert!(Architecture::new(vec![20, 6]).is_err());
    }

    #[test]
    fn backprop_matches_central_differences() {
        let arch = small_arch();
        let params = random_params(&arch, 3, 0.8);
        let batch = random_batch(5, 5, 4);
        let (_, grad) = loss_and_gradient(&arch, &params, &batch);
        let h = 1e-5;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let up = loss(&arch, &p, &batch);
            p[i] -= 2.0 * h;
            let down = loss(&arch, &p, &batch);
            let fd = (up - down) / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-6);
            assert!((grad[i] - fd).abs() / denom < 1e-5, "param {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let arch = small_arch();
        let params = random_params(&arch, 5, 0.5);
        let batch = random_batch(4, 5, 6);
        let doubled: Vec<f64> = batch.iter().chain(&batch).copied().collect();
        let (l1, g1) = loss_and_gradient(&arch, &params, &batch);
        let (l2, g2) = loss_and_gradient(&arch, &params, &doubled);
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weights_on_zero_data_are_stationary() {
        let arch = small_arch();
        let params = vec![0.0; arch.n_params()];
        let batch = vec![0.0; 5 * 5];
        let (l, g) = loss_and_gradient(&arch, &params, &batch);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    fn subspace_data(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        let basis: Vec<f64> = (0..20 * 3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut out = Vec::with_capacity(n * 20);
        for _ in 0..n {
            let s: [f64; 3] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            for r in 0..20 {
                out.push((0..3).map(|c| basis[r * 3 + c] * s[c]).sum());
            }
        }
        out
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let data = subspace_data(60, 1);
        let cfg = TrainConfig {
            max_iters: 40,
            ..Default::default()
        };
        let (a, ra) = EncoderWeights::train(&data, &cfg, 9).unwrap();
        let (b, _) = EncoderWeights::train(&data, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert!(ra.final_loss <= ra.initial_loss);
        assert!(ra.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn recovers_three_dimensional_subspace() {
        let data = subspace_data(200, 2);
        let (w, report) = EncoderWeights::train(&data, &TrainConfig::default(), 5).unwrap();
        let mut se = 0.0;
        for z in data.chunks_exact(20) {
            let target = w.standardize(z);
            let rec = w.reconstruct(z).unwrap();
            se += rec.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        let rmse = (se / data.len() as f64).sqrt();
        assert!(rmse < 0.05, "rmse {rmse}, report {report:?}");
    }

    #[test]
    fn passthrough_below_min_samples() {
        let data = random_batch(10, 20, 3);
        let (w, _) = EncoderWeights::train(&data, &TrainConfig::default(), 1).unwrap();
        assert!(w.is_passthrough());
        let z = &data[20..40];
        let code = w.encode(z).unwrap();
        assert_eq!(code, w.standardize(z)[..6].to_vec());
        assert!(w.gradient(&data).is_err());
    }

    #[test]
    fn encode_checks_dimension_and_is_pure() {
        let data = subspace_data(40, 7);
        let cfg = TrainConfig {
            max_iters: 10,
            ..Default::default()
        };
        let (w, _) = EncoderWeights::train(&data, &cfg, 2).unwrap();
        assert!(matches!(w.encode(&[0.0; 19]), Err(Error::Dimension { .. })));
        let z = &data[..20];
        assert_eq!(w.encode(z).unwrap(), w.encode(z).unwrap());
        assert_eq!(w.encode(z).unwrap().len(), 6);
        let huge = vec![1e12; 20];
        assert!(w.encode(&huge).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn snapshot_round_trip() {
        let data = subspace_data(30, 8);
        let cfg = TrainConfig {
            max_iters: 5,
            ..Default::default()
        };
        let (w, _) = EncoderWeights::train(&data, &cfg, 3).unwrap();
        let back = EncoderWeights::from_snapshot(&w.to_snapshot()).unwrap();
        assert_eq!(w, back);
        let (p, _) = EncoderWeights::train(&data[..200], &cfg, 3).unwrap();
        assert_eq!(EncoderWeights::from_snapshot(&p.to_snapshot()).unwrap(), p);
    }
}
