//! Expanding-window cross-validation, seeded random hyperparameter search
//! and forecast accuracy metrics.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean;

/// Block length used for block-mean RMSE when it divides the horizon.
pub const METRIC_BLOCK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldWindow {
    pub train_end: usize,
    pub val_start: usize,
    pub val_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: usize,
    pub horizon: usize,
    pub fold_windows: Vec<FoldWindow>,
}

/// The last `folds` blocks of length `m` in `0..n_train` become validation
/// windows; each fold trains on everything before its block.
pub fn make_splits(n_train: usize, m: usize, folds: usize) -> Result<SplitPlan> {
    if m == 0 || folds == 0 || n_train < (folds + 1) * m {
        return Err(Error::InsufficientData {
            n_train,
            horizon: m,
            folds,
        });
    }
    let fold_windows = (1..=folds)
        .map(|i| {
            let val_start = n_train - (folds - i + 1) * m;
            FoldWindow {
                train_end: val_start,
                val_start,
                val_end: val_start + m,
            }
        })
        .collect();
    Ok(SplitPlan {
        folds,
        horizon: m,
        fold_windows,
    })
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

pub fn rmse_of_mean(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok((mean(y) - mean(yhat)).abs())
}

/// RMSE over the means of consecutive non-overlapping blocks.
pub fn block_mean_rmse(y: &[f64], yhat: &[f64], block: usize) -> Result<f64> {
    check_pair(y, yhat)?;
    if block == 0 || !y.len().is_multiple_of(block) {
        return Err(Error::NotDivisible {
            len: y.len(),
            block,
        });
    }
    if block == 1 {
        return rmse(y, yhat);
    }
    if block == y.len() {
        return rmse_of_mean(y, yhat);
    }
    let ym: Vec<f64> = y.chunks(block).map(mean).collect();
    let fm: Vec<f64> = yhat.chunks(block).map(mean).collect();
    rmse(&ym, &fm)
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Mean absolute percentage error in percent. Observations equal to zero
/// are skipped; if every observation is zero the result is 0.
pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let terms: Vec<f64> = y
        .iter()
        .zip(yhat)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, b)| ((a - b) / a).abs())
        .collect();
    Ok(if terms.is_empty() {
        0.0
    } else {
        100.0 * mean(&terms)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub rmse: f64,
    pub rmse_of_mean: f64,
    pub block_mean_rmse: f64,
    pub mae: f64,
    pub mape: f64,
}

impl MetricSet {
    /// Uses [`METRIC_BLOCK`]-long blocks when they tile the window and a
    /// single block otherwise.
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        check_pair(y, yhat)?;
        let block = if y.len().is_multiple_of(METRIC_BLOCK) {
            METRIC_BLOCK
        } else {
            y.len()
        };
        Ok(Self {
            rmse: rmse(y, yhat)?,
            rmse_of_mean: rmse_of_mean(y, yhat)?,
            block_mean_rmse: block_mean_rmse(y, yhat, block)?,
            mae: mae(y, yhat)?,
            mape: mape(y, yhat)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMethod {
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchPolicy {
    pub iterations: usize,
    pub method: SearchMethod,
    pub seed: u64,
}

impl SearchPolicy {
    pub fn random(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            method: SearchMethod::Random,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// One hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ParamValue::Text(v) => Some(v),
            _ => None,
        }
    }
}

pub type Candidate = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// Inclusive integer range.
    IntRange {
        lo: i64,
        hi: i64,
    },
    Choice {
        options: Vec<ParamValue>,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    LogUniform {
        lo: f64,
        hi: f64,
    },
}

impl Domain {
    fn cardinality(&self) -> Option<usize> {
        match self {
            Domain::IntRange { lo, hi } => Some((hi - lo + 1).max(0) as usize),
            Domain::Choice { options } => Some(options.len()),
            Domain::Uniform { .. } | Domain::LogUniform { .. } => None,
        }
    }

    fn nth(&self, i: usize) -> ParamValue {
        match self {
            Domain::IntRange { lo, .. } => ParamValue::Int(lo + i as i64),
            Domain::Choice { options } => options[i].clone(),
            _ => unreachable!("continuous domains are not indexable"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> ParamValue {
        match self {
            Domain::IntRange { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            Domain::Choice { options } => options[rng.random_range(0..options.len())].clone(),
            Domain::Uniform { lo, hi } => ParamValue::Real(rng.random_range(*lo..*hi)),
            Domain::LogUniform { lo, hi } => {
                ParamValue::Real(rng.random_range(lo.ln()..hi.ln()).exp())
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Domain::IntRange { lo, hi } => lo <= hi,
            Domain::Choice { options } => !options.is_empty(),
            Domain::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            Domain::LogUniform { lo, hi } => *lo > 0.0 && lo < hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "empty search domain for `{name}`"
            )))
        }
    }
}

/// Ordered list of named dimensions. A space with no dimensions holds the
/// single empty candidate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<(String, Domain)>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, domain: Domain) -> Self {
        self.dims.push((name.to_string(), domain));
        self
    }

    /// Number of points when every dimension is discrete.
    pub fn cardinality(&self) -> Option<usize> {
        self.dims.iter().try_fold(1usize, |acc, (_, d)| {
            d.cardinality().map(|c| acc.saturating_mul(c))
        })
    }

    /// Decodes a mixed-radix index, first dimension most significant.
    pub fn point(&self, mut i: usize) -> Candidate {
        let mut out = Candidate::new();
        for (name, d) in self.dims.iter().rev() {
            let c = d.cardinality().expect("point() needs a discrete space");
            out.insert(name.clone(), d.nth(i % c));
            i /= c;
        }
        out
    }

    pub fn enumerate(&self) -> Option<Vec<Candidate>> {
        self.cardinality()
            .map(|c| (0..c).map(|i| self.point(i)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.iter().try_for_each(|(n, d)| d.validate(n))
    }
}

/// Draws the candidate sequence for `policy`. Discrete spaces are sampled
/// without replacement (all points when the space is smaller than the
/// budget); spaces with a continuous dimension draw independently.
pub fn draw_candidates(space: &SearchSpace, policy: &SearchPolicy) -> Result<Vec<Candidate>> {
    policy.validate()?;
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    Ok(match space.cardinality() {
        Some(card) => {
            let amount = policy.iterations.min(card);
            index::sample(&mut rng, card, amount)
                .into_iter()
                .map(|i| space.point(i))
                .collect()
        }
        None => (0..policy.iterations)
            .map(|_| {
                space
                    .dims
                    .iter()
                    .map(|(n, d)| (n.clone(), d.draw(&mut rng)))
                    .collect()
            })
            .collect(),
    })
}

/// A model family that can be tuned: it maps a candidate and a raw training
/// window to a raw-scale forecast.
pub trait ModelFamily: Sync {
    fn space(&self) -> SearchSpace;

    /// Effective parameter count, used to break score ties.
    fn complexity(&self, candidate: &Candidate) -> usize;

    fn fit_forecast(
        &self,
        candidate: &Candidate,
        train: &[f64],
        horizon: usize,
    ) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrace {
    pub draw: usize,
    pub candidate: Candidate,
    pub fold_rmse: Vec<f64>,
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Candidate,
    pub score: f64,
    pub trace: Vec<CandidateTrace>,
}

/// Mean validation RMSE of `candidate` across the folds of `splits`.
pub fn cv_score<M: ModelFamily + ?Sized>(
    family: &M,
    candidate: &Candidate,
    splits: &SplitPlan,
    data: &[f64],
) -> Result<Vec<f64>> {
    splits
        .fold_windows
        .iter()
        .map(|w| {
            if w.val_end > data.len() {
                return Err(Error::LengthMismatch(w.val_end, data.len()));
            }
            let pred = family.fit_forecast(candidate, &data[..w.train_end], splits.horizon)?;
            let s = rmse(&data[w.val_start..w.val_end], &pred)?;
            if s.is_finite() {
                Ok(s)
            } else {
                Err(Error::DegenerateData("non-finite validation error"))
            }
        })
        .collect()
}

fn evaluate<M: ModelFamily + ?Sized>(
    family: &M,
    draw: usize,
    candidate: Candidate,
    splits: &SplitPlan,
    data: &[f64],
) -> CandidateTrace {
    match cv_score(family, &candidate, splits, data) {
        Ok(fold_rmse) => CandidateTrace {
            draw,
            score: Some(mean(&fold_rmse)),
            fold_rmse,
            candidate,
            error: None,
        },
        Err(e) => CandidateTrace {
            draw,
            candidate,
            fold_rmse: Vec::new(),
            score: None,
            error: Some(e.to_string()),
        },
    }
}

/// Picks the lowest score; ties go to lower complexity, then earlier draw.
pub fn select_best<M: ModelFamily + ?Sized>(family: &M, trace: &[CandidateTrace]) -> Option<usize> {
    trace
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            t.score
                .map(|s| (s, family.complexity(&t.candidate), t.draw, i))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
        .map(|x| x.3)
}

/// Seeded random search. `data` is the training region only; folds come from
/// `splits`. Candidates are drawn up front and evaluated in parallel.
pub fn random_search<M: ModelFamily + ?Sized>(
    family: &M,
    space: &SearchSpace,
    splits: &SplitPlan,
    policy: &SearchPolicy,
    data: &[f64],
) -> Result<SearchOutcome> {
    let candidates = draw_candidates(space, policy)?;
    let trace: Vec<CandidateTrace> = candidates
        .into_par_iter()
        .enumerate()
        .map(|(i, c)| evaluate(family, i, c, splits, data))
        .collect();
    let best = select_best(family, &trace).ok_or(Error::AllCandidatesFailed(trace.len()))?;
    Ok(SearchOutcome {
        best: trace[best].candidate.clone(),
        score: trace[best].score.expect("selected candidates are scored"),
        trace,
    })
}
