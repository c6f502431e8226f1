use super::RevenueError;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FEATURES: usize = 5;

/// Inputs of the per-request revenue model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueFeatures {
    pub category: usize,
    pub location: usize,
    pub server: usize,
    pub bandwidth: f64,
    pub server_location: usize,
}

impl RevenueFeatures {
    pub fn to_array(&self) -> [f64; FEATURES] {
        [
            self.category as f64,
            self.location as f64,
            self.server as f64,
            self.bandwidth,
            self.server_location as f64,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueSample {
    pub features: RevenueFeatures,
    pub label: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            rounds: 50,
            max_depth: 3,
            shrinkage: 0.1,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64; FEATURES]) -> f64 {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], n: usize) -> usize {
            match nodes[n] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevenueModel {
    pub base: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegressionTree>,
}

impl RevenueModel {
    pub fn constant(value: f64) -> Self {
        Self {
            base: value,
            shrinkage: 0.0,
            trees: Vec::new(),
        }
    }

    fn raw(&self, x: &[f64; FEATURES]) -> f64 {
        self.base + self.trees.iter().map(|t| self.shrinkage * t.predict(x)).sum::<f64>()
    }

    /// Predicted revenue, clamped at zero.
    pub fn predict(&self, features: &RevenueFeatures) -> f64 {
        let v = self.raw(&features.to_array());
        if v.is_finite() {
            v.max(0.0)
        } else {
            0.0
        }
    }

    pub fn predict_request_revenue(
        &self,
        category: usize,
        location: usize,
        server: usize,
        bandwidth: f64,
        server_location: usize,
    ) -> f64 {
        self.predict(&RevenueFeatures {
            category,
            location,
            server,
            bandwidth,
            server_location,
        })
    }

    pub fn to_json(&self) -> Result<String, RevenueError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, RevenueError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), RevenueError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RevenueError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    x: &'a [[f64; FEATURES]],
    target: &'a [f64],
    config: &'a GbdtConfig,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn mean(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&j| self.target[j]).sum::<f64>() / idx.len() as f64
    }

    /// Exhaustive search over midpoints between consecutive distinct values.
    /// Strictly better gains win, so ties keep the lowest feature and threshold.
    fn best_split(&self, idx: &[usize]) -> Option<Split> {
        let n = idx.len();
        let min_leaf = self.config.min_samples_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let total: f64 = idx.iter().map(|&j| self.target[j]).sum();
        let sse: f64 = {
            let mu = total / n as f64;
            idx.iter().map(|&j| (self.target[j] - mu).powi(2)).sum()
        };
        let parent = total * total / n as f64;
        let mut best: Option<Split> = None;
        let mut order = idx.to_vec();
        for f in 0..FEATURES {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.target[order[k]];
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64
                    - parent;
                if gain > 1e-12 * sse.max(1e-300) && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: lo + (hi - lo) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: self.mean(&idx),
        });
        if depth >= self.config.max_depth {
            return id;
        }
        let Some(split) = self.best_split(&idx) else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&j| self.x[j][split.feature] <= split.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn fit_tree(x: &[[f64; FEATURES]], target: &[f64], config: &GbdtConfig) -> RegressionTree {
    let mut builder = Builder {
        x,
        target,
        config,
        nodes: Vec::new(),
    };
    builder.grow((0..x.len()).collect(), 0);
    RegressionTree {
        nodes: builder.nodes,
    }
}

/// Squared-error gradient boosting. Returns the model and the training MSE
/// before the first round and after each round.
pub fn train_revenue_model_with_history(
    samples: &[RevenueSample],
    config: &GbdtConfig,
) -> Result<(RevenueModel, Vec<f64>), RevenueError> {
    if samples.is_empty() {
        return Err(RevenueError::NoSamples);
    }
    if let Some(s) = samples.iter().find(|s| !(s.label.is_finite() && s.label >= 0.0)) {
        return Err(RevenueError::BadLabel(s.label));
    }
    let x: Vec<[f64; FEATURES]> = samples.iter().map(|s| s.features.to_array()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let n = y.len() as f64;
    let base = y.iter().sum::<f64>() / n;
    let mut fitted = vec![base; y.len()];
    let mse = |fitted: &[f64]| y.iter().zip(fitted).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;

    let mut history = vec![mse(&fitted)];
    let mut trees = Vec::with_capacity(config.rounds);
    let mut residual = vec![0.0; y.len()];
    for _ in 0..config.rounds {
        for ((r, yi), fi) in residual.iter_mut().zip(&y).zip(&fitted) {
            *r = yi - fi;
        }
        let tree = fit_tree(&x, &residual, config);
        for (fi, xi) in fitted.iter_mut().zip(&x) {
            *fi += config.shrinkage * tree.predict(xi);
        }
        history.push(mse(&fitted));
        trees.push(tree);
    }
    log::debug!(
        "revenue model: {} rounds, training mse {:.6} -> {:.6}",
        config.rounds,
        history[0],
        history[history.len() - 1]
    );
    Ok((
        RevenueModel {
            base,
            shrinkage: config.shrinkage,
            trees,
        },
        history,
    ))
}

pub fn train_revenue_model(
    samples: &[RevenueSample],
    config: &GbdtConfig,
) -> Result<RevenueModel, RevenueError> {
    train_revenue_model_with_history(samples, config).map(|(m, _)| m)
}
