//! Invertible data preparation: first differencing, Box-Cox / Yeo-Johnson
//! power transforms and standardization.
//!
//! The chain is always applied in the order difference → offset → power →
//! scale, and inverted in reverse. All parameters are fitted on the training
//! window only; [`FittedPipeline::apply`] reuses them on continuations.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::stats::{mean, pvariance};

/// Added to `|min|` when shifting data for Box-Cox.
pub const BOXCOX_EPSILON: f64 = 1e-6;
/// λ search interval for the profile likelihood.
pub const LAMBDA_BOUNDS: (f64, f64) = (-5.0, 5.0);
/// Final golden-section bracket width.
pub const LAMBDA_TOL: f64 = 1e-6;
const LAMBDA_SCAN_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PowerTransform {
    #[serde(rename = "NO")]
    None,
    #[serde(rename = "BC")]
    BoxCox,
    #[serde(rename = "YJ")]
    YeoJohnson,
}

impl PowerTransform {
    pub fn code(self) -> &'static str {
        match self {
            PowerTransform::None => "NO",
            PowerTransform::BoxCox => "BC",
            PowerTransform::YeoJohnson => "YJ",
        }
    }
}

/// Which λ-family to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerFamily {
    BoxCox,
    YeoJohnson,
}

/// Declarative data-preparation choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrepSpec {
    pub diff_order: u8,
    pub power: PowerTransform,
    #[serde(default = "default_true")]
    pub scale: bool,
}

fn default_true() -> bool {
    true
}

impl PrepSpec {
    pub fn new(diff_order: u8, power: PowerTransform) -> Self {
        Self {
            diff_order,
            power,
            scale: true,
        }
    }

    /// The six (differencing × power) combinations, scaled.
    pub fn grid() -> Vec<PrepSpec> {
        let mut v = Vec::with_capacity(6);
        for d in 0..=1 {
            for p in [
                PowerTransform::None,
                PowerTransform::BoxCox,
                PowerTransform::YeoJohnson,
            ] {
                v.push(PrepSpec::new(d, p));
            }
        }
        v
    }

    /// Key fragment such as `D1-YJ`.
    pub fn label(&self) -> String {
        format!("D{}-{}", self.diff_order, self.power.code())
    }

    pub fn validate(&self) -> Result<()> {
        if self.diff_order > 1 {
            return Err(Error::InvalidParameter(format!(
                "diff_order must be 0 or 1, got {}",
                self.diff_order
            )));
        }
        Ok(())
    }
}

pub fn difference(x: &[f64]) -> Result<Vec<f64>> {
    ensure_len(x.len(), 2)?;
    Ok(x.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Cumulative sum starting from `anchor`; exact inverse of [`difference`].
pub fn undifference(d: &[f64], anchor: f64) -> Vec<f64> {
    let mut level = anchor;
    d.iter()
        .map(|v| {
            level += v;
            level
        })
        .collect()
}

fn boxcox_scalar(y: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        y.ln()
    } else if lambda == 1.0 {
        y - 1.0
    } else {
        (lambda * y.ln()).exp_m1() / lambda
    }
}

fn boxcox_inverse_scalar(z: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(z.exp());
    }
    if lambda == 1.0 {
        return Ok(z + 1.0);
    }
    let t = lambda * z;
    if t <= -1.0 || !t.is_finite() {
        return Err(Error::InverseDomain(z));
    }
    Ok((t.ln_1p() / lambda).exp())
}

pub fn boxcox_forward(y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if let Some(&bad) = y.iter().find(|&&v| v <= 0.0 || v.is_nan()) {
        return Err(Error::NonPositiveInput(bad));
    }
    Ok(y.iter().map(|&v| boxcox_scalar(v, lambda)).collect())
}

pub fn boxcox_inverse(z: &[f64], lambda: f64) -> Result<Vec<f64>> {
    z.iter()
        .map(|&v| boxcox_inverse_scalar(v, lambda))
        .collect()
}

fn yeojohnson_scalar(y: f64, lambda: f64) -> f64 {
    if lambda == 1.0 {
        return y;
    }
    if y >= 0.0 {
        if lambda == 0.0 {
            y.ln_1p()
        } else {
            (lambda * y.ln_1p()).exp_m1() / lambda
        }
    } else if lambda == 2.0 {
        -(-y).ln_1p()
    } else {
        let e = 2.0 - lambda;
        -(e * (-y).ln_1p()).exp_m1() / e
    }
}

fn yeojohnson_inverse_scalar(z: f64, lambda: f64) -> Result<f64> {
    if lambda == 1.0 {
        return Ok(z);
    }
    if z >= 0.0 {
        if lambda == 0.0 {
            return Ok(z.exp_m1());
        }
        let t = lambda * z;
        if t <= -1.0 || !t.is_finite() {
            return Err(Error::InverseDomain(z));
        }
        Ok((t.ln_1p() / lambda).exp_m1())
    } else if lambda == 2.0 {
        Ok(-(-z).exp_m1())
    } else {
        let e = 2.0 - lambda;
        let t = -e * z;
        if t <= -1.0 || !t.is_finite() {
            return Err(Error::InverseDomain(z));
        }
        Ok(-(t.ln_1p() / e).exp_m1())
    }
}

pub fn yeojohnson_forward(y: &[f64], lambda: f64) -> Vec<f64> {
    y.iter().map(|&v| yeojohnson_scalar(v, lambda)).collect()
}

pub fn yeojohnson_inverse(z: &[f64], lambda: f64) -> Result<Vec<f64>> {
    z.iter()
        .map(|&v| yeojohnson_inverse_scalar(v, lambda))
        .collect()
}

/// Profile Gaussian log-likelihood of the transformed data, Jacobian
/// included. Returns `-inf` where the variance is zero or not finite.
pub fn profile_loglik(y: &[f64], lambda: f64, family: PowerFamily) -> f64 {
    let n = y.len() as f64;
    let (transformed, jacobian): (Vec<f64>, f64) = match family {
        PowerFamily::BoxCox => (
            y.iter().map(|&v| boxcox_scalar(v, lambda)).collect(),
            (lambda - 1.0) * y.iter().map(|v| v.ln()).sum::<f64>(),
        ),
        PowerFamily::YeoJohnson => (
            y.iter().map(|&v| yeojohnson_scalar(v, lambda)).collect(),
            (lambda - 1.0) * y.iter().map(|v| v.signum() * v.abs().ln_1p()).sum::<f64>(),
        ),
    };
    let var = pvariance(&transformed);
    if var <= 0.0 || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let ll = -0.5 * n * var.ln() + jacobian;
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

/// Maximum-likelihood λ on [−5, 5].
///
/// A coarse scan locates the best cell, which golden-section search then
/// refines to [`LAMBDA_TOL`].
pub fn fit_lambda(y: &[f64], family: PowerFamily) -> Result<f64> {
    ensure_len(y.len(), 4)?;
    if family == PowerFamily::BoxCox {
        if let Some(&bad) = y.iter().find(|&&v| v <= 0.0 || v.is_nan()) {
            return Err(Error::NonPositiveInput(bad));
        }
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::DegenerateData(
            "constant input has zero variance for every lambda",
        ));
    }
    let f = |l: f64| profile_loglik(y, l, family);
    let (lo, hi) = LAMBDA_BOUNDS;
    let steps = ((hi - lo) / LAMBDA_SCAN_STEP).round() as usize;
    let grid = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
    let (best_i, best_v) = (0..=steps)
        .map(|i| (i, f(grid(i))))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    if best_v == f64::NEG_INFINITY {
        return Err(Error::DegenerateData(
            "log-likelihood undefined over the lambda range",
        ));
    }
    let mut a = grid(best_i.saturating_sub(1));
    let mut b = grid((best_i + 1).min(steps));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > LAMBDA_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // The bracket may sit against a bound where the optimum is the bound.
    let candidates = [(mid, f(mid)), (grid(best_i), best_v)];
    Ok(candidates
        .into_iter()
        .fold(
            (mid, f64::NEG_INFINITY),
            |b, c| if c.1 > b.1 { c } else { b },
        )
        .0)
}

/// Fitted, invertible realisation of a [`PrepSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub spec: PrepSpec,
    pub lambda: f64,
    pub offset: f64,
    pub mean: f64,
    pub std: f64,
    /// Last raw training observation, the integration anchor for D1.
    pub anchor: f64,
    pub train_len: usize,
}

/// Minimum raw training length accepted by [`fit_pipeline`] for `spec`:
/// two points left after differencing, four when λ must be estimated.
pub fn min_train_len(spec: PrepSpec) -> usize {
    let after_diff = match spec.power {
        PowerTransform::None => 2,
        _ => 4,
    };
    after_diff + spec.diff_order as usize
}

pub fn fit_pipeline(train: &[f64], spec: PrepSpec) -> Result<FittedPipeline> {
    spec.validate()?;
    ensure_len(train.len(), min_train_len(spec))?;
    let base = if spec.diff_order == 1 {
        difference(train)?
    } else {
        train.to_vec()
    };
    let (lambda, offset, powered) = match spec.power {
        PowerTransform::None => (1.0, 0.0, base),
        PowerTransform::BoxCox => {
            let min = base.iter().copied().fold(f64::INFINITY, f64::min);
            let offset = if min <= 0.0 {
                min.abs() + BOXCOX_EPSILON
            } else {
                0.0
            };
            let shifted: Vec<f64> = base.iter().map(|v| v + offset).collect();
            let lambda = fit_lambda(&shifted, PowerFamily::BoxCox)?;
            let powered = boxcox_forward(&shifted, lambda)?;
            (lambda, offset, powered)
        }
        PowerTransform::YeoJohnson => {
            let lambda = fit_lambda(&base, PowerFamily::YeoJohnson)?;
            (lambda, 0.0, yeojohnson_forward(&base, lambda))
        }
    };
    let (mu, sigma) = if spec.scale {
        let sigma = pvariance(&powered).sqrt();
        if sigma == 0.0 || !sigma.is_finite() {
            return Err(Error::DegenerateData("zero spread after transformation"));
        }
        (mean(&powered), sigma)
    } else {
        (0.0, 1.0)
    };
    Ok(FittedPipeline {
        spec,
        lambda,
        offset,
        mean: mu,
        std: sigma,
        anchor: *train.last().expect("length checked"),
        train_len: train.len(),
    })
}

impl FittedPipeline {
    fn power_scale(&self, base: &[f64]) -> Result<Vec<f64>> {
        let powered = match self.spec.power {
            PowerTransform::None => base.to_vec(),
            PowerTransform::BoxCox => {
                let shifted: Vec<f64> = base.iter().map(|v| v + self.offset).collect();
                boxcox_forward(&shifted, self.lambda)?
            }
            PowerTransform::YeoJohnson => yeojohnson_forward(base, self.lambda),
        };
        Ok(powered
            .into_iter()
            .map(|v| (v - self.mean) / self.std)
            .collect())
    }

    /// Transforms a full series (normally the training window) with frozen
    /// parameters. Under D1 the output is one element shorter.
    pub fn transform_series(&self, series: &[f64]) -> Result<Vec<f64>> {
        let base = if self.spec.diff_order == 1 {
            difference(series)?
        } else {
            series.to_vec()
        };
        self.power_scale(&base)
    }

    /// Transforms a continuation of the training window; under D1 the first
    /// difference is taken against the anchor.
    pub fn apply(&self, continuation: &[f64]) -> Result<Vec<f64>> {
        let base = if self.spec.diff_order == 1 {
            let mut prev = self.anchor;
            continuation
                .iter()
                .map(|&v| {
                    let d = v - prev;
                    prev = v;
                    d
                })
                .collect()
        } else {
            continuation.to_vec()
        };
        self.power_scale(&base)
    }

    /// Maps a transformed-space forecast back to the original scale.
    pub fn invert_forecast(&self, z: &[f64]) -> Result<Vec<f64>> {
        let unscaled: Vec<f64> = z.iter().map(|v| v * self.std + self.mean).collect();
        let base = match self.spec.power {
            PowerTransform::None => unscaled,
            PowerTransform::BoxCox => boxcox_inverse(&unscaled, self.lambda)?
                .into_iter()
                .map(|v| v - self.offset)
                .collect(),
            PowerTransform::YeoJohnson => yeojohnson_inverse(&unscaled, self.lambda)?,
        };
        Ok(if self.spec.diff_order == 1 {
            undifference(&base, self.anchor)
        } else {
            base
        })
    }
}
