//! GISTEMP ingestion, descriptive statistics and outlier screening.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::stats::{mean, quantile_sorted, sorted_copy};

/// Column holding the January–December annual mean.
pub const DEFAULT_COLUMN: &str = "J-D";

const MISSING_MARKERS: [&str; 3] = ["***", "****", ""];

/// Annual observations on consecutive calendar years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries {
    years: Vec<i32>,
    values: Vec<f64>,
}

impl AnnualSeries {
    pub fn new(years: Vec<i32>, values: Vec<f64>) -> Result<Self> {
        if years.len() != values.len() {
            return Err(Error::LengthMismatch(years.len(), values.len()));
        }
        ensure_len(years.len(), 2)?;
        for w in years.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::NonConsecutiveYears {
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value {v}")));
        }
        Ok(Self { years, values })
    }

    /// Series starting at `first_year` with one value per year.
    pub fn from_values(first_year: i32, values: Vec<f64>) -> Result<Self> {
        let years = (0..values.len() as i32).map(|i| first_year + i).collect();
        Self::new(years, values)
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }

    /// Writes the series as a two-column `Year,<column>` CSV.
    pub fn to_csv(&self, column: &str) -> String {
        let mut out = format!("Year,{column}\n");
        for (y, v) in self.years.iter().zip(&self.values) {
            out.push_str(&format!("{y},{v}\n"));
        }
        out
    }
}

/// Parses a GISTEMP "Land-Ocean Temperature Index" table.
///
/// Preamble lines before the `Year,...` header are skipped, as are later
/// lines that do not start with a year (GISTEMP repeats headers in some
/// layouts). Rows whose selected cell holds a missing marker are dropped;
/// dropping anywhere but the tail leaves a gap and is reported as
/// [`Error::NonConsecutiveYears`].
pub fn parse_gistemp(text: &str, column: &str) -> Result<AnnualSeries> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim_start().starts_with("Year,") => break l,
            Some(_) => continue,
            None => return Err(Error::MissingHeader),
        }
    };
    let col_idx = header
        .split(',')
        .position(|h| h.trim() == column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))?;

    let mut years = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines {
        let mut cells = line.split(',');
        let Some(Ok(year)) = cells.next().map(|c| c.trim().parse::<i32>()) else {
            continue;
        };
        let cell = line.split(',').nth(col_idx).unwrap_or("").trim();
        if MISSING_MARKERS.contains(&cell) {
            continue;
        }
        let v: f64 = cell.parse().map_err(|_| Error::BadValue {
            line: lineno + 1,
            value: cell.to_string(),
        })?;
        years.push(year);
        values.push(v);
    }
    if years.is_empty() {
        return Err(Error::EmptySeries);
    }
    AnnualSeries::new(years, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub kurtosis: f64,
    pub skewness: f64,
}

/// Sample moments (n−1 std, adjusted Fisher–Pearson skewness, unbiased
/// excess kurtosis) and type-7 quartiles. Zero spread reports zero shape
/// moments.
pub fn describe(values: &[f64]) -> Result<DescriptiveStats> {
    let n = values.len();
    ensure_len(n, 4)?;
    let nf = n as f64;
    let m = mean(values);
    let m2 = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / nf;
    let m3 = values.iter().map(|v| (v - m).powi(3)).sum::<f64>() / nf;
    let m4 = values.iter().map(|v| (v - m).powi(4)).sum::<f64>() / nf;
    let std = (m2 * nf / (nf - 1.0)).sqrt();
    let (skewness, kurtosis) = if m2 == 0.0 {
        (0.0, 0.0)
    } else {
        let g1 = m3 / m2.powf(1.5);
        let skew = (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * g1;
        let g2 = m4 / (m2 * m2) - 3.0;
        let kurt = (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0);
        (skew, kurt)
    };
    let s = sorted_copy(values);
    Ok(DescriptiveStats {
        count: n,
        mean: m,
        std,
        min: s[0],
        q25: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q75: quantile_sorted(&s, 0.75),
        max: s[n - 1],
        kurtosis,
        skewness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutlierMethod {
    #[serde(rename = "IQR")]
    Iqr,
    IsolationForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub method: OutlierMethod,
    pub flagged_years: Vec<i32>,
    pub scores: Vec<f64>,
}

/// Tukey fences at 1.5·IQR. Scores are the signed distance past the nearest
/// fence, zero inside.
pub fn detect_outliers_iqr(s: &AnnualSeries) -> Result<OutlierReport> {
    ensure_len(s.len(), 4)?;
    let sorted = sorted_copy(s.values());
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let scores: Vec<f64> = s
        .values()
        .iter()
        .map(|&v| {
            if v > hi {
                v - hi
            } else if v < lo {
                v - lo
            } else {
                0.0
            }
        })
        .collect();
    let flagged_years = s
        .years()
        .iter()
        .zip(&scores)
        .filter(|(_, &sc)| sc != 0.0)
        .map(|(&y, _)| y)
        .collect();
    Ok(OutlierReport {
        method: OutlierMethod::Iqr,
        flagged_years,
        scores,
    })
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a BST of `n` nodes.
fn avg_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let nf = n as f64;
            2.0 * ((nf - 1.0).ln() + EULER_GAMMA) - 2.0 * (nf - 1.0) / nf
        }
    }
}

enum ITree {
    Leaf(usize),
    Split {
        at: f64,
        left: Box<ITree>,
        right: Box<ITree>,
    },
}

impl ITree {
    fn grow(values: &mut [f64], depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> ITree {
        if depth >= limit || values.len() <= 1 {
            return ITree::Leaf(values.len());
        }
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        if lo == hi {
            return ITree::Leaf(values.len());
        }
        let at = rng.random_range(lo..hi);
        // partition in place: [< at | >= at]
        let mut k = 0;
        for i in 0..values.len() {
            if values[i] < at {
                values.swap(i, k);
                k += 1;
            }
        }
        let (l, r) = values.split_at_mut(k);
        ITree::Split {
            at,
            left: Box::new(ITree::grow(l, depth + 1, limit, rng)),
            right: Box::new(ITree::grow(r, depth + 1, limit, rng)),
        }
    }

    fn path_length(&self, x: f64) -> f64 {
        let mut node = self;
        let mut depth = 0.0;
        loop {
            match node {
                ITree::Leaf(size) => return depth + avg_path_length(*size),
                ITree::Split { at, left, right } => {
                    node = if x < *at { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

/// Isolation-forest anomaly scores, `2^(−E[h(x)]/c(ψ))` with subsample
/// ψ = min(64, n). The `top_k` highest scores are flagged (ties resolved by
/// earlier year).
pub fn isolation_forest_scores(values: &[f64], trees: usize, seed: u64) -> Result<Vec<f64>> {
    let n = values.len();
    ensure_len(n, 8)?;
    if trees == 0 {
        return Err(Error::InvalidParameter("trees must be >= 1".into()));
    }
    let psi = n.min(64);
    let limit = (psi as f64).log2().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = vec![0.0; n];
    let mut buf = Vec::with_capacity(psi);
    for _ in 0..trees {
        buf.clear();
        buf.extend(sample(&mut rng, n, psi).into_iter().map(|i| values[i]));
        let tree = ITree::grow(&mut buf, 0, limit, &mut rng);
        for (acc, &x) in total.iter_mut().zip(values) {
            *acc += tree.path_length(x);
        }
    }
    let c = avg_path_length(psi);
    Ok(total
        .into_iter()
        .map(|h| 2f64.powf(-(h / trees as f64) / c))
        .collect())
}

/// Isolation-forest screening that flags as many years as the IQR rule does,
/// so the two reports are directly comparable.
pub fn detect_outliers_iforest(s: &AnnualSeries, trees: usize, seed: u64) -> Result<OutlierReport> {
    let scores = isolation_forest_scores(s.values(), trees, seed)?;
    let k = detect_outliers_iqr(s)?.flagged_years.len();
    let mut flagged_years: Vec<i32> = top_k_indices(&scores, k)
        .into_iter()
        .map(|i| s.years()[i])
        .collect();
    flagged_years.sort_unstable();
    Ok(OutlierReport {
        method: OutlierMethod::IsolationForest,
        flagged_years,
        scores,
    })
}

/// Indices of the `k` largest scores, ties broken by lower index.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
