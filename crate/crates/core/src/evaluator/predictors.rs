use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numcore::Tensor;
use crate::{math, Error, Result};

pub const MIN_TRAIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Linear model with epsilon-insensitive loss (support-vector stand-in).
    LinearSvr,
    Knn,
    Tree,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::LinearSvr, ModelKind::Knn, ModelKind::Tree];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearSvr => "linear_svr",
            ModelKind::Knn => "knn",
            ModelKind::Tree => "tree",
        }
    }
}

pub trait Regressor {
    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &Tensor) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

fn check_train(x: &Tensor, y: &[f64], min_rows: usize) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    if x.rows() < min_rows {
        return Err(Error::arg(format!(
            "need at least {min_rows} training rows, got {}",
            x.rows()
        )));
    }
    Ok(())
}

/// Brute-force k-nearest-neighbour regression (Euclidean, mean of targets).
/// Distance ties resolve to the lower training index.
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    k: usize,
    x: Tensor,
    y: Vec<f64>,
}

impl KnnRegressor {
    pub const DEFAULT_K: usize = 5;

    pub fn fit(x: &Tensor, y: &[f64], k: usize) -> Result<Self> {
        check_train(x, y, 1)?;
        if k == 0 {
            return Err(Error::arg("knn needs k >= 1"));
        }
        Ok(KnnRegressor {
            k: k.min(x.rows()),
            x: x.clone(),
            y: y.to_vec(),
        })
    }
}

impl Regressor for KnnRegressor {
    fn predict_row(&self, q: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = (0..self.x.rows())
            .map(|i| {
                let r = self.x.row(i);
                (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
        }
        d[..self.k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree grown by greedy variance reduction.
#[derive(Debug, Clone)]
pub struct DecisionTreeRegressor {
    nodes: Vec<Node>,
    leaf_sizes: Vec<usize>,
}

impl DecisionTreeRegressor {
    pub const DEFAULT_MAX_DEPTH: usize = 6;
    pub const DEFAULT_MIN_LEAF: usize = 5;

    pub fn fit(x: &Tensor, y: &[f64], max_depth: usize, min_leaf: usize) -> Result<Self> {
        check_train(x, y, 1)?;
        let min_leaf = min_leaf.max(1);
        let mut tree = DecisionTreeRegressor {
            nodes: Vec::new(),
            leaf_sizes: Vec::new(),
        };
        let idx: Vec<usize> = (0..x.rows()).collect();
        tree.grow(x, y, idx, 0, max_depth, min_leaf);
        Ok(tree)
    }

    /// Row counts of every leaf, in creation order.
    pub fn leaf_sizes(&self) -> &[usize] {
        &self.leaf_sizes
    }

    fn grow(&mut self, x: &Tensor, y: &[f64], idx: Vec<usize>, depth: usize, max_depth: usize, min_leaf: usize) -> usize {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| y[i]).sum();
        let mean = sum / n as f64;
        let node = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if depth >= max_depth || n < 2 * min_leaf {
            self.leaf_sizes.push(n);
            return node;
        }
        let parent_sse: f64 = idx.iter().map(|&i| (y[i] - mean) * (y[i] - mean)).sum();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.clone();
        for f in 0..x.cols() {
            order.sort_by(|&a, &b| x.row(a)[f].total_cmp(&x.row(b)[f]).then(a.cmp(&b)));
            let (mut ls, mut lq) = (0.0, 0.0);
            let total_q: f64 = order.iter().map(|&i| y[i] * y[i]).sum();
            for pos in 1..n {
                let yi = y[order[pos - 1]];
                ls += yi;
                lq += yi * yi;
                if pos < min_leaf || n - pos < min_leaf {
                    continue;
                }
                let lo = x.row(order[pos - 1])[f];
                let hi = x.row(order[pos])[f];
                if lo >= hi {
                    continue;
                }
                let rs = sum - ls;
                let rq = total_q - lq;
                let sse = (lq - ls * ls / pos as f64) + (rq - rs * rs / (n - pos) as f64);
                if best.map_or(true, |(b, _, _)| sse < b) {
                    best = Some((sse, f, 0.5 * (lo + hi)));
                }
            }
        }
        match best {
            Some((sse, feature, threshold)) if sse < parent_sse - 1e-12 * (1.0 + parent_sse) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.row(i)[feature] <= threshold);
                let left = self.grow(x, y, l, depth + 1, max_depth, min_leaf);
                let right = self.grow(x, y, r, depth + 1, max_depth, min_leaf);
                self.nodes[node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
            _ => self.leaf_sizes.push(n),
        }
        node
    }
}

impl Regressor for DecisionTreeRegressor {
    fn predict_row(&self, q: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if q[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Linear regression under the epsilon-insensitive loss, fitted by full-batch
/// subgradient descent with a `1/sqrt(t)` step. Features and target are
/// standardized internally, so `epsilon` is in target standard deviations.
/// The best iterate by training objective is kept.
#[derive(Debug, Clone)]
pub struct LinearEpsRegressor {
    weights: Vec<f64>,
    bias: f64,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl LinearEpsRegressor {
    pub const DEFAULT_EPSILON: f64 = 0.05;
    pub const DEFAULT_EPOCHS: usize = 500;
    const STEP: f64 = 0.5;
    const L2: f64 = 1e-4;

    pub fn fit(x: &Tensor, y: &[f64], epsilon: f64, epochs: usize) -> Result<Self> {
        check_train(x, y, 1)?;
        let n = x.rows();
        let d = x.cols();
        let mut x_mean = vec![0.0; d];
        let mut x_scale = vec![1.0; d];
        for j in 0..d {
            let col = x.column(j);
            x_mean[j] = math::mean(&col);
            let s = math::std_dev(&col);
            x_scale[j] = if s > 1e-12 { s } else { 0.0 };
        }
        let y_mean = math::mean(y);
        let s = math::std_dev(y);
        let y_scale = if s > 1e-12 { s } else { 0.0 };
        let mut model = LinearEpsRegressor {
            weights: vec![0.0; d],
            bias: 0.0,
            x_mean,
            x_scale,
            y_mean,
            y_scale,
        };
        if y_scale == 0.0 {
            return Ok(model);
        }
        let xs: Vec<Vec<f64>> = (0..n).map(|i| model.standardize(x.row(i))).collect();
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

        let objective = |w: &[f64], b: f64| -> f64 {
            let loss: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(r, t)| {
                    let p = b + r.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
                    ((t - p).abs() - epsilon).max(0.0)
                })
                .sum::<f64>()
                / n as f64;
            loss + 0.5 * Self::L2 * w.iter().map(|v| v * v).sum::<f64>()
        };

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut best = (objective(&w, b), w.clone(), b);
        let mut gw = vec![0.0; d];
        for t in 0..epochs {
            gw.iter_mut().zip(&w).for_each(|(g, wv)| *g = Self::L2 * wv);
            let mut gb = 0.0;
            for (r, target) in xs.iter().zip(&ys) {
                let p = b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let resid = target - p;
                let s = if resid > epsilon {
                    -1.0
                } else if resid < -epsilon {
                    1.0
                } else {
                    continue;
                };
                for (g, v) in gw.iter_mut().zip(r) {
                    *g += s * v / n as f64;
                }
                gb += s / n as f64;
            }
            let step = Self::STEP / math::sqrt(t as f64 + 1.0);
            for (wv, g) in w.iter_mut().zip(&gw) {
                *wv -= step * g;
            }
            b -= step * gb;
            let obj = objective(&w, b);
            if obj < best.0 {
                best = (obj, w.clone(), b);
            }
        }
        model.weights = best.1;
        model.bias = best.2;
        Ok(model)
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }
}

impl Regressor for LinearEpsRegressor {
    fn predict_row(&self, q: &[f64]) -> f64 {
        if self.y_scale == 0.0 {
            return self.y_mean;
        }
        let z = self.standardize(q);
        let p = self.bias + z.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>();
        self.y_mean + self.y_scale * p
    }
}

/// The three fitted regressors used by the utility and privacy metrics.
#[derive(Debug, Clone)]
pub struct FittedModels {
    pub linear: LinearEpsRegressor,
    pub knn: KnnRegressor,
    pub tree: DecisionTreeRegressor,
}

impl FittedModels {
    pub fn model(&self, kind: ModelKind) -> &dyn Regressor {
        match kind {
            ModelKind::LinearSvr => &self.linear,
            ModelKind::Knn => &self.knn,
            ModelKind::Tree => &self.tree,
        }
    }
}

/// Fits all three models to predict column `target` from the remaining
/// columns of `train`.
pub fn fit_predictors(train: &Tensor, target: usize) -> Result<FittedModels> {
    if target >= train.cols() || train.cols() < 2 {
        return Err(Error::arg("target column out of range or no feature columns"));
    }
    let y = train.column(target);
    let x = train.without_column(target);
    fit_xy(&x, &y)
}

pub(crate) fn fit_xy(x: &Tensor, y: &[f64]) -> Result<FittedModels> {
    check_train(x, y, MIN_TRAIN_ROWS)?;
    Ok(FittedModels {
        linear: LinearEpsRegressor::fit(x, y, LinearEpsRegressor::DEFAULT_EPSILON, LinearEpsRegressor::DEFAULT_EPOCHS)?,
        knn: KnnRegressor::fit(x, y, KnnRegressor::DEFAULT_K)?,
        tree: DecisionTreeRegressor::fit(
            x,
            y,
            DecisionTreeRegressor::DEFAULT_MAX_DEPTH,
            DecisionTreeRegressor::DEFAULT_MIN_LEAF,
        )?,
    })
}
