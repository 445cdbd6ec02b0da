//! Lag-window regression: embedding a series into a supervised design,
//! four regression learners, and recursive multi-step forecasting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::Forecast;
use crate::linalg::{lstsq, solve, Matrix};
use crate::stats::mean;

/// Supervised view of a series: row `i` holds `series[i..i+W]` (oldest
/// first) and the target is `series[i+W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub window: usize,
}

impl LagMatrix {
    pub fn rows(&self) -> usize {
        self.y.len()
    }
}

pub fn embed(series: &[f64], window: usize) -> Result<LagMatrix> {
    if window == 0 || series.len() <= window {
        return Err(Error::WindowTooLarge {
            window,
            len: series.len(),
        });
    }
    let rows: Vec<Vec<f64>> = series
        .windows(window + 1)
        .map(|w| w[..window].to_vec())
        .collect();
    Ok(LagMatrix {
        x: Matrix::from_rows(&rows),
        y: series[window..].to_vec(),
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RegressorSpec {
    #[serde(rename = "OLS")]
    Ols,
    Ridge {
        alpha: f64,
    },
    #[serde(rename = "KNN")]
    Knn {
        k: usize,
        weighting: Weighting,
    },
    #[serde(rename = "CART")]
    Cart {
        max_depth: usize,
        min_leaf: usize,
    },
}

impl RegressorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            RegressorSpec::Ridge { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                bad(format!("ridge alpha {alpha} must be finite and >= 0"))
            }
            RegressorSpec::Knn { k: 0, .. } => bad("k must be >= 1".into()),
            RegressorSpec::Cart {
                max_depth,
                min_leaf,
            } if !(1..=12).contains(&max_depth) || min_leaf == 0 => bad(format!(
                "tree depth {max_depth} / min_leaf {min_leaf} out of range"
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    /// One coefficient per lag column, oldest lag first.
    pub coefs: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, q: &[f64]) -> f64 {
        self.intercept + self.coefs.iter().zip(q).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Ordinary least squares with an intercept column.
pub fn fit_ols(lag: &LagMatrix) -> Result<LinearFit> {
    let rows: Vec<Vec<f64>> = (0..lag.rows())
        .map(|r| {
            std::iter::once(1.0)
                .chain(lag.x.row(r).iter().copied())
                .collect()
        })
        .collect();
    let fit = lstsq(&Matrix::from_rows(&rows), &lag.y)?;
    Ok(LinearFit {
        intercept: fit.coef[0],
        coefs: fit.coef[1..].to_vec(),
    })
}

/// Ridge regression; the intercept is left unpenalised by centring.
pub fn fit_ridge(lag: &LagMatrix, alpha: f64) -> Result<LinearFit> {
    RegressorSpec::Ridge { alpha }.validate()?;
    let n = lag.rows();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let w = lag.window;
    let x_mean: Vec<f64> = (0..w)
        .map(|c| (0..n).map(|r| lag.x.get(r, c)).sum::<f64>() / n as f64)
        .collect();
    let y_mean = mean(&lag.y);
    let centred: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..w).map(|c| lag.x.get(r, c) - x_mean[c]).collect())
        .collect();
    let xc = Matrix::from_rows(&centred);
    let yc: Vec<f64> = lag.y.iter().map(|v| v - y_mean).collect();
    let mut gram = xc.gram();
    for i in 0..w {
        gram.set(i, i, gram.get(i, i) + alpha);
    }
    let coefs = solve(&gram, &xc.t_mul_vec(&yc))?;
    let intercept = y_mean - coefs.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearFit { intercept, coefs })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// k-nearest-neighbour regression by exhaustive scan. Neighbours are ranked
/// by (distance, row index).
pub fn predict_knn(lag: &LagMatrix, q: &[f64], k: usize, weighting: Weighting) -> Result<f64> {
    let rows = lag.rows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if k > rows {
        return Err(Error::KTooLarge { k, rows });
    }
    if q.len() != lag.window {
        return Err(Error::LengthMismatch(q.len(), lag.window));
    }
    let mut ranked: Vec<(f64, usize)> =
        (0..rows).map(|r| (euclidean(lag.x.row(r), q), r)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &ranked[..k];
    Ok(match weighting {
        Weighting::Uniform => nearest.iter().map(|&(_, r)| lag.y[r]).sum::<f64>() / k as f64,
        Weighting::Distance => {
            let exact: Vec<f64> = nearest
                .iter()
                .filter(|(d, _)| *d == 0.0)
                .map(|&(_, r)| lag.y[r])
                .collect();
            if !exact.is_empty() {
                mean(&exact)
            } else {
                let num: f64 = nearest.iter().map(|&(d, r)| lag.y[r] / d).sum();
                let den: f64 = nearest.iter().map(|&(d, _)| 1.0 / d).sum();
                num / den
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Greedy variance-reduction regression tree stored as an arena; node 0 is
/// the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, q: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value, .. } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if q[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Split improvements below this fraction of the node's squared error count
/// as ties.
const SPLIT_TIE_RTOL: f64 = 1e-12;

struct SplitChoice {
    feature: usize,
    threshold: f64,
    sse: f64,
}

fn best_split(
    lag: &LagMatrix,
    idx: &[usize],
    min_leaf: usize,
    node_sse: f64,
) -> Option<SplitChoice> {
    let n = idx.len();
    let centre = idx.iter().map(|&r| lag.y[r]).sum::<f64>() / n as f64;
    let tie = SPLIT_TIE_RTOL * node_sse.max(f64::MIN_POSITIVE);
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for f in 0..lag.window {
        order.sort_by(|&a, &b| lag.x.get(a, f).total_cmp(&lag.x.get(b, f)).then(a.cmp(&b)));
        let (mut s, mut ss) = (0.0, 0.0);
        let (tot_s, tot_ss) = order.iter().fold((0.0, 0.0), |(a, b), &r| {
            let v = lag.y[r] - centre;
            (a + v, b + v * v)
        });
        for i in 1..n {
            let v = lag.y[order[i - 1]] - centre;
            s += v;
            ss += v * v;
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let (lo, hi) = (lag.x.get(order[i - 1], f), lag.x.get(order[i], f));
            if lo >= hi {
                continue;
            }
            let left = ss - s * s / i as f64;
            let (rs, rss) = (tot_s - s, tot_ss - ss);
            let right = rss - rs * rs / (n - i) as f64;
            let sse = left.max(0.0) + right.max(0.0);
            if best.as_ref().is_none_or(|b| sse < b.sse - tie) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: 0.5 * (lo + hi),
                    sse,
                });
            }
        }
    }
    best.filter(|b| b.sse < node_sse - tie)
}

fn node_sse(lag: &LagMatrix, idx: &[usize]) -> (f64, f64) {
    let m = idx.iter().map(|&r| lag.y[r]).sum::<f64>() / idx.len() as f64;
    (m, idx.iter().map(|&r| (lag.y[r] - m).powi(2)).sum())
}

pub fn fit_cart(lag: &LagMatrix, max_depth: usize, min_leaf: usize) -> Result<RegressionTree> {
    RegressorSpec::Cart {
        max_depth,
        min_leaf,
    }
    .validate()?;
    if lag.rows() < 2 * min_leaf {
        return Err(Error::TooShort {
            needed: 2 * min_leaf,
            got: lag.rows(),
        });
    }
    let mut tree = RegressionTree { nodes: Vec::new() };
    let all: Vec<usize> = (0..lag.rows()).collect();
    grow(lag, &mut tree, all, 0, max_depth, min_leaf);
    Ok(tree)
}

fn grow(
    lag: &LagMatrix,
    tree: &mut RegressionTree,
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> usize {
    let (value, sse) = node_sse(lag, &idx);
    let at = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf {
        value,
        samples: idx.len(),
    });
    if depth >= max_depth || idx.len() < 2 * min_leaf {
        return at;
    }
    let Some(split) = best_split(lag, &idx, min_leaf, sse) else {
        return at;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| lag.x.get(i, split.feature) <= split.threshold);
    let left = grow(lag, tree, l, depth + 1, max_depth, min_leaf);
    let right = grow(lag, tree, r, depth + 1, max_depth, min_leaf);
    tree.nodes[at] = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}

pub fn predict_cart(tree: &RegressionTree, q: &[f64]) -> f64 {
    tree.predict(q)
}

/// Anything that maps a lag window (oldest first) to a one-step prediction.
pub trait Regressor {
    fn window(&self) -> usize;
    fn predict(&self, q: &[f64]) -> f64;
}

/// A regressor fitted on a [`LagMatrix`].
#[derive(Debug, Clone)]
pub enum FittedRegressor {
    Linear {
        fit: LinearFit,
        window: usize,
    },
    Knn {
        lag: LagMatrix,
        k: usize,
        weighting: Weighting,
    },
    Tree {
        tree: RegressionTree,
        window: usize,
    },
}

/// Serializable description of a fitted regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RegressorSummary {
    Linear {
        intercept: f64,
        coefs: Vec<f64>,
    },
    #[serde(rename = "KNN")]
    Knn {
        k: usize,
        weighting: Weighting,
        rows: usize,
    },
    Tree {
        depth: usize,
        leaves: usize,
        nodes: Vec<TreeNode>,
    },
}

impl FittedRegressor {
    pub fn fit(spec: &RegressorSpec, lag: &LagMatrix) -> Result<Self> {
        spec.validate()?;
        let window = lag.window;
        Ok(match *spec {
            RegressorSpec::Ols => FittedRegressor::Linear {
                fit: fit_ols(lag)?,
                window,
            },
            RegressorSpec::Ridge { alpha } => FittedRegressor::Linear {
                fit: fit_ridge(lag, alpha)?,
                window,
            },
            RegressorSpec::Knn { k, weighting } => {
                if k > lag.rows() {
                    return Err(Error::KTooLarge {
                        k,
                        rows: lag.rows(),
                    });
                }
                FittedRegressor::Knn {
                    lag: lag.clone(),
                    k,
                    weighting,
                }
            }
            RegressorSpec::Cart {
                max_depth,
                min_leaf,
            } => FittedRegressor::Tree {
                tree: fit_cart(lag, max_depth, min_leaf)?,
                window,
            },
        })
    }

    pub fn summary(&self) -> RegressorSummary {
        match self {
            FittedRegressor::Linear { fit, .. } => RegressorSummary::Linear {
                intercept: fit.intercept,
                coefs: fit.coefs.clone(),
            },
            FittedRegressor::Knn { lag, k, weighting } => RegressorSummary::Knn {
                k: *k,
                weighting: *weighting,
                rows: lag.rows(),
            },
            FittedRegressor::Tree { tree, .. } => RegressorSummary::Tree {
                depth: tree.depth(),
                leaves: tree.leaves(),
                nodes: tree.nodes.clone(),
            },
        }
    }
}

impl Regressor for FittedRegressor {
    fn window(&self) -> usize {
        match self {
            FittedRegressor::Linear { window, .. } | FittedRegressor::Tree { window, .. } => {
                *window
            }
            FittedRegressor::Knn { lag, .. } => lag.window,
        }
    }

    fn predict(&self, q: &[f64]) -> f64 {
        match self {
            FittedRegressor::Linear { fit, .. } => fit.predict(q),
            FittedRegressor::Knn { lag, k, weighting } => {
                predict_knn(lag, q, *k, *weighting).expect("k and window validated at fit time")
            }
            FittedRegressor::Tree { tree, .. } => tree.predict(q),
        }
    }
}

/// Feeds each prediction back as the newest lag, `h` times.
pub fn recursive_forecast<R: Regressor + ?Sized>(
    model: &R,
    history: &[f64],
    window: usize,
    h: usize,
) -> Result<Forecast> {
    if window == 0 || history.len() < window || model.window() != window {
        return Err(Error::WindowTooLarge {
            window,
            len: history.len(),
        });
    }
    if h == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let mut buf = history[history.len() - window..].to_vec();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let next = model.predict(&buf[buf.len() - window..]);
        out.push(next);
        buf.push(next);
    }
    Forecast::new(out, history.len() - 1)
}
