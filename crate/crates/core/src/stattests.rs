//! Unit-root (ADF) and level-stationarity (KPSS) tests with fixed lag rules
//! and asymptotic critical values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Result};
use crate::linalg::{lstsq, Matrix};
use crate::stats::mean;

pub const MIN_LEN: usize = 20;

/// Constant-only Dickey-Fuller τ distribution.
pub const ADF_CRITICAL: [(&str, f64); 3] = [("1%", -3.43), ("5%", -2.86), ("10%", -2.57)];
/// Level-stationarity KPSS η distribution.
pub const KPSS_CRITICAL: [(&str, f64); 3] = [("1%", 0.739), ("5%", 0.463), ("10%", 0.347)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub lags: usize,
    pub crit_values: BTreeMap<String, f64>,
    pub reject_at_5pct: bool,
}

impl TestResult {
    fn new(
        statistic: f64,
        lags: usize,
        table: &[(&str, f64); 3],
        reject: impl Fn(f64, f64) -> bool,
    ) -> Self {
        let crit_values: BTreeMap<String, f64> =
            table.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let reject_at_5pct = reject(statistic, crit_values["5%"]);
        Self {
            statistic,
            lags,
            crit_values,
            reject_at_5pct,
        }
    }
}

/// Schwert's rule, `floor(12·(n/100)^¼)`.
pub fn schwert_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// `floor(4·(n/100)^¼)`.
pub fn kpss_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller test with a constant and Schwert-rule lags.
/// The statistic is the t-ratio on the lagged level.
pub fn adf_test(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    ensure_len(n, MIN_LEN)?;
    let p = schwert_lags(n);
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let rows: Vec<Vec<f64>> = (p..dx.len())
        .map(|t| {
            let mut r = Vec::with_capacity(p + 2);
            r.push(1.0);
            r.push(x[t]);
            r.extend((1..=p).map(|i| dx[t - i]));
            r
        })
        .collect();
    let target: Vec<f64> = dx[p..].to_vec();
    let design = Matrix::from_rows(&rows);
    let fit = lstsq(&design, &target)?;
    let resid_ss: f64 = design
        .mul_vec(&fit.coef)
        .iter()
        .zip(&target)
        .map(|(f, y)| (y - f).powi(2))
        .sum();
    let dof = (rows.len() - design.cols()) as f64;
    let sigma2 = resid_ss / dof;
    let se = (sigma2 * fit.xtx_inv_diag()[1]).sqrt();
    let tau = fit.coef[1] / se;
    Ok(TestResult::new(tau, p, &ADF_CRITICAL, |s, c| s < c))
}

/// KPSS level-stationarity test with a Bartlett-kernel Newey-West long-run
/// variance.
pub fn kpss_test(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    ensure_len(n, MIN_LEN)?;
    let bw = kpss_bandwidth(n);
    let m = mean(x);
    let e: Vec<f64> = x.iter().map(|v| v - m).collect();
    let nf = n as f64;
    let mut lrv = e.iter().map(|v| v * v).sum::<f64>() / nf;
    for j in 1..=bw {
        let gamma: f64 = (j..n).map(|t| e[t] * e[t - j]).sum::<f64>() / nf;
        lrv += 2.0 * (1.0 - j as f64 / (bw as f64 + 1.0)) * gamma;
    }
    let mut partial = 0.0;
    let ss: f64 = e
        .iter()
        .map(|v| {
            partial += v;
            partial * partial
        })
        .sum();
    let eta = ss / (nf * nf * lrv);
    Ok(TestResult::new(eta, bw, &KPSS_CRITICAL, |s, c| s > c))
}
