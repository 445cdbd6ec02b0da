//! Univariate forecasters: drift-naive baseline, polynomial trend,
//! exponential smoothing (simple and Holt) and least-squares AR(p).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::linalg::{lstsq, solve, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub values: Vec<f64>,
    pub horizon: usize,
    /// Index of the last training observation.
    pub origin: usize,
}

impl Forecast {
    pub(crate) fn new(values: Vec<f64>, origin: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData("forecast is not finite"));
        }
        Ok(Self {
            horizon: values.len(),
            values,
            origin,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ForecasterSpec {
    NaiveDrift,
    PolyTrend {
        degree: usize,
    },
    ExpSmoothing {
        alpha: f64,
        beta: f64,
        use_trend: bool,
    },
    #[serde(rename = "AR")]
    Ar {
        p: usize,
    },
}

impl ForecasterSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            ForecasterSpec::NaiveDrift => Ok(()),
            ForecasterSpec::PolyTrend { degree } if !(1..=3).contains(&degree) => {
                bad(format!("polynomial degree {degree} outside 1..=3"))
            }
            ForecasterSpec::ExpSmoothing { alpha, beta, .. }
                if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) =>
            {
                bad(format!(
                    "smoothing weights ({alpha}, {beta}) must lie in (0, 1)"
                ))
            }
            ForecasterSpec::Ar { p } if !(1..=10).contains(&p) => {
                bad(format!("AR order {p} outside 1..=10"))
            }
            _ => Ok(()),
        }
    }

    pub fn fit_predict(&self, train: &[f64], h: usize) -> Result<Forecast> {
        self.validate()?;
        match *self {
            ForecasterSpec::NaiveDrift => fit_predict_naive_drift(train, h),
            ForecasterSpec::PolyTrend { degree } => fit_predict_polytrend(train, degree, h),
            ForecasterSpec::ExpSmoothing {
                alpha,
                beta,
                use_trend,
            } => fit_predict_expsmoothing(train, alpha, beta, use_trend, h),
            ForecasterSpec::Ar { p } => fit_predict_ar(train, p, h),
        }
    }
}

fn check_horizon(h: usize) -> Result<()> {
    if h == 0 {
        Err(Error::InvalidParameter("horizon must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// `ŷ(t+k) = y(t) + k·(y(t) − y(1))/(t − 1)`.
pub fn fit_predict_naive_drift(train: &[f64], h: usize) -> Result<Forecast> {
    ensure_len(train.len(), 2)?;
    check_horizon(h)?;
    let t = train.len();
    let last = train[t - 1];
    let drift = (last - train[0]) / (t - 1) as f64;
    Forecast::new((1..=h).map(|k| last + k as f64 * drift).collect(), t - 1)
}

/// Polynomial in a centred, scaled time index `u = (i − c)/c`, `c = (t−1)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTrendFit {
    pub center: f64,
    pub scale: f64,
    /// Ascending powers of `u`.
    pub coef: Vec<f64>,
}

impl PolyTrendFit {
    /// Value at raw time index `i` (0-based).
    pub fn value_at(&self, i: f64) -> f64 {
        let u = (i - self.center) / self.scale;
        self.coef.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }
}

/// Least-squares polynomial trend via normal equations on the scaled index.
pub fn fit_polytrend(train: &[f64], degree: usize) -> Result<PolyTrendFit> {
    let t = train.len();
    ensure_len(t, degree + 1)?;
    let center = (t - 1) as f64 / 2.0;
    let scale = center.max(f64::MIN_POSITIVE);
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|i| {
            let u = (i as f64 - center) / scale;
            (0..=degree).map(|d| u.powi(d as i32)).collect()
        })
        .collect();
    let x = Matrix::from_rows(&rows);
    let coef = solve(&x.gram(), &x.t_mul_vec(train))?;
    Ok(PolyTrendFit {
        center,
        scale,
        coef,
    })
}

pub fn fit_predict_polytrend(train: &[f64], degree: usize, h: usize) -> Result<Forecast> {
    check_horizon(h)?;
    let fit = fit_polytrend(train, degree)?;
    let t = train.len();
    Forecast::new(
        (0..h).map(|k| fit.value_at((t + k) as f64)).collect(),
        t - 1,
    )
}

/// Simple exponential smoothing, or Holt's linear trend when `use_trend`.
/// Initial level is `y₁`, initial trend `y₂ − y₁`.
pub fn fit_predict_expsmoothing(
    train: &[f64],
    alpha: f64,
    beta: f64,
    use_trend: bool,
    h: usize,
) -> Result<Forecast> {
    ensure_len(train.len(), 3)?;
    check_horizon(h)?;
    ForecasterSpec::ExpSmoothing {
        alpha,
        beta,
        use_trend,
    }
    .validate()?;
    let mut level = train[0];
    let values = if use_trend {
        let mut trend = train[1] - train[0];
        for &y in &train[1..] {
            let prev = level;
            level = alpha * y + (1.0 - alpha) * (level + trend);
            trend = beta * (level - prev) + (1.0 - beta) * trend;
        }
        (1..=h).map(|k| level + k as f64 * trend).collect()
    } else {
        for &y in &train[1..] {
            level = alpha * y + (1.0 - alpha) * level;
        }
        vec![level; h]
    };
    Forecast::new(values, train.len() - 1)
}

/// AR(p) with intercept: `x(t) = c + Σ φᵢ x(t−i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArFit {
    pub intercept: f64,
    /// `φ₁..φₚ`, most recent lag first.
    pub coefs: Vec<f64>,
}

impl ArFit {
    /// One-step prediction from `history` (oldest first, at least `p` long).
    pub fn predict_next(&self, history: &[f64]) -> f64 {
        let n = history.len();
        self.intercept
            + self
                .coefs
                .iter()
                .enumerate()
                .map(|(i, c)| c * history[n - 1 - i])
                .sum::<f64>()
    }

    pub fn forecast(&self, history: &[f64], h: usize) -> Vec<f64> {
        let mut buf = history.to_vec();
        for _ in 0..h {
            let next = self.predict_next(&buf);
            buf.push(next);
        }
        buf.split_off(history.len())
    }
}

pub fn fit_ar(train: &[f64], p: usize) -> Result<ArFit> {
    ensure_len(train.len(), p + 5)?;
    if train.iter().all(|&v| v == train[0]) {
        // Lags are collinear with the intercept; the constant is the fit.
        return Ok(ArFit {
            intercept: train[0],
            coefs: vec![0.0; p],
        });
    }
    let rows: Vec<Vec<f64>> = (p..train.len())
        .map(|t| {
            std::iter::once(1.0)
                .chain((1..=p).map(|i| train[t - i]))
                .collect()
        })
        .collect();
    let fit = lstsq(&Matrix::from_rows(&rows), &train[p..])?;
    Ok(ArFit {
        intercept: fit.coef[0],
        coefs: fit.coef[1..].to_vec(),
    })
}

pub fn fit_predict_ar(train: &[f64], p: usize, h: usize) -> Result<Forecast> {
    check_horizon(h)?;
    let fit = fit_ar(train, p)?;
    Forecast::new(fit.forecast(train, h), train.len() - 1)
}
