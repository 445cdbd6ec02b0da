//! The model roster: binds forecasters and lag regressors to a data
//! preparation pipeline so they can be tuned and scored in original units.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalx::{Candidate, Domain, ModelFamily, ParamValue, SearchSpace};
use crate::forecast::ForecasterSpec;
use crate::lagreg::{embed, recursive_forecast, FittedRegressor, RegressorSpec, Weighting};
use crate::transform::{fit_pipeline, FittedPipeline, PrepSpec};

pub const MAX_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Drift-naive baseline.
    #[serde(rename = "NAV")]
    NaiveDrift,
    #[serde(rename = "POT")]
    PolyTrend,
    #[serde(rename = "EXS")]
    ExpSmoothing,
    #[serde(rename = "ARI")]
    Ar,
    #[serde(rename = "LIN")]
    Ols,
    #[serde(rename = "RID")]
    Ridge,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "DTR")]
    Cart,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::NaiveDrift,
        ModelKind::PolyTrend,
        ModelKind::ExpSmoothing,
        ModelKind::Ar,
        ModelKind::Ols,
        ModelKind::Ridge,
        ModelKind::Knn,
        ModelKind::Cart,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ModelKind::NaiveDrift => "NAV",
            ModelKind::PolyTrend => "POT",
            ModelKind::ExpSmoothing => "EXS",
            ModelKind::Ar => "ARI",
            ModelKind::Ols => "LIN",
            ModelKind::Ridge => "RID",
            ModelKind::Knn => "KNN",
            ModelKind::Cart => "DTR",
        }
    }

    pub fn is_lag_model(self) -> bool {
        matches!(
            self,
            ModelKind::Ols | ModelKind::Ridge | ModelKind::Knn | ModelKind::Cart
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A roster entry. Lag models may pin `window`; otherwise it is tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl ModelSpec {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            window: None,
        }
    }

    pub fn with_window(model: ModelKind, window: usize) -> Self {
        Self {
            model,
            window: Some(window),
        }
    }

    pub fn default_roster() -> Vec<ModelSpec> {
        ModelKind::ALL.iter().map(|&m| ModelSpec::new(m)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self.window {
            Some(_) if !self.model.is_lag_model() => Err(Error::InvalidParameter(format!(
                "{} takes no window",
                self.model
            ))),
            Some(w) if w == 0 || w > MAX_WINDOW => Err(Error::InvalidParameter(format!(
                "window {w} outside 1..={MAX_WINDOW}"
            ))),
            _ => Ok(()),
        }
    }
}

fn int_range(lo: i64, hi: i64) -> Domain {
    Domain::IntRange { lo, hi }
}

/// Declared search space for a roster entry.
pub fn search_space(spec: &ModelSpec) -> SearchSpace {
    let s = SearchSpace::new();
    let s = match spec.model {
        ModelKind::NaiveDrift | ModelKind::Ols => s,
        ModelKind::PolyTrend => s.with("degree", int_range(1, 3)),
        ModelKind::ExpSmoothing => s
            .with("alpha", Domain::Uniform { lo: 0.01, hi: 0.99 })
            .with("beta", Domain::Uniform { lo: 0.01, hi: 0.99 })
            .with(
                "use_trend",
                Domain::Choice {
                    options: vec![ParamValue::Bool(true), ParamValue::Bool(false)],
                },
            ),
        ModelKind::Ar => s.with("p", int_range(1, 10)),
        ModelKind::Ridge => s.with("alpha", Domain::LogUniform { lo: 1e-4, hi: 1e2 }),
        ModelKind::Knn => s.with("k", int_range(1, 25)).with(
            "weighting",
            Domain::Choice {
                options: vec![
                    ParamValue::Text("uniform".into()),
                    ParamValue::Text("distance".into()),
                ],
            },
        ),
        ModelKind::Cart => s
            .with("max_depth", int_range(1, 12))
            .with("min_leaf", int_range(1, 10)),
    };
    if spec.model.is_lag_model() && spec.window.is_none() {
        SearchSpace {
            dims: std::iter::once(("W".to_string(), int_range(1, MAX_WINDOW as i64)))
                .chain(s.dims)
                .collect(),
        }
    } else {
        s
    }
}

fn get_int(c: &Candidate, name: &str) -> Result<usize> {
    c.get(name)
        .and_then(ParamValue::as_int)
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| Error::InvalidParameter(format!("missing integer hyperparameter `{name}`")))
}

fn get_real(c: &Candidate, name: &str) -> Result<f64> {
    c.get(name)
        .and_then(ParamValue::as_real)
        .ok_or_else(|| Error::InvalidParameter(format!("missing real hyperparameter `{name}`")))
}

fn get_bool(c: &Candidate, name: &str) -> Result<bool> {
    c.get(name)
        .and_then(ParamValue::as_bool)
        .ok_or_else(|| Error::InvalidParameter(format!("missing boolean hyperparameter `{name}`")))
}

/// Concrete model built from a roster entry and a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConcreteModel {
    Forecaster(ForecasterSpec),
    Lag {
        window: usize,
        regressor: RegressorSpec,
    },
}

impl ConcreteModel {
    pub fn window(&self) -> Option<usize> {
        match self {
            ConcreteModel::Lag { window, .. } => Some(*window),
            ConcreteModel::Forecaster(_) => None,
        }
    }
}

pub fn build(spec: &ModelSpec, c: &Candidate) -> Result<ConcreteModel> {
    let window = || match spec.window {
        Some(w) => Ok(w),
        None => get_int(c, "W"),
    };
    let m = match spec.model {
        ModelKind::NaiveDrift => ConcreteModel::Forecaster(ForecasterSpec::NaiveDrift),
        ModelKind::PolyTrend => ConcreteModel::Forecaster(ForecasterSpec::PolyTrend {
            degree: get_int(c, "degree")?,
        }),
        ModelKind::ExpSmoothing => ConcreteModel::Forecaster(ForecasterSpec::ExpSmoothing {
            alpha: get_real(c, "alpha")?,
            beta: get_real(c, "beta")?,
            use_trend: get_bool(c, "use_trend")?,
        }),
        ModelKind::Ar => ConcreteModel::Forecaster(ForecasterSpec::Ar {
            p: get_int(c, "p")?,
        }),
        ModelKind::Ols => ConcreteModel::Lag {
            window: window()?,
            regressor: RegressorSpec::Ols,
        },
        ModelKind::Ridge => ConcreteModel::Lag {
            window: window()?,
            regressor: RegressorSpec::Ridge {
                alpha: get_real(c, "alpha")?,
            },
        },
        ModelKind::Knn => {
            let weighting = match c.get("weighting").and_then(ParamValue::as_text) {
                Some("uniform") => Weighting::Uniform,
                Some("distance") => Weighting::Distance,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown KNN weighting {other:?}"
                    )))
                }
            };
            ConcreteModel::Lag {
                window: window()?,
                regressor: RegressorSpec::Knn {
                    k: get_int(c, "k")?,
                    weighting,
                },
            }
        }
        ModelKind::Cart => ConcreteModel::Lag {
            window: window()?,
            regressor: RegressorSpec::Cart {
                max_depth: get_int(c, "max_depth")?,
                min_leaf: get_int(c, "min_leaf")?,
            },
        },
    };
    Ok(m)
}

/// Everything produced by fitting one concrete model on one training window.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub forecast: Vec<f64>,
    pub pipeline: FittedPipeline,
    pub summary: serde_json::Value,
}

/// Fits the pipeline on `train`, fits the model in transformed space,
/// forecasts `horizon` steps and maps the forecast back to original units.
pub fn fit_forecast_model(
    model: &ConcreteModel,
    prep: PrepSpec,
    train: &[f64],
    horizon: usize,
) -> Result<FitOutput> {
    let pipeline = fit_pipeline(train, prep)?;
    let z = pipeline.transform_series(train)?;
    let (zf, summary) = match model {
        ConcreteModel::Forecaster(f) => {
            let out = f.fit_predict(&z, horizon)?;
            (
                out.values,
                serde_json::to_value(f).expect("spec serializes"),
            )
        }
        ConcreteModel::Lag { window, regressor } => {
            let lag = embed(&z, *window)?;
            let fitted = FittedRegressor::fit(regressor, &lag)?;
            let out = recursive_forecast(&fitted, &z, *window, horizon)?;
            (
                out.values,
                serde_json::to_value(fitted.summary()).expect("summary serializes"),
            )
        }
    };
    let forecast = pipeline.invert_forecast(&zf)?;
    if forecast.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(
            "forecast is not finite in original units",
        ));
    }
    Ok(FitOutput {
        forecast,
        pipeline,
        summary,
    })
}

/// Tunable family for one roster entry under one preparation. Tracks the
/// longest training window it was ever handed.
#[derive(Debug)]
pub struct PreparedFamily {
    pub spec: ModelSpec,
    pub prep: PrepSpec,
    max_seen: AtomicUsize,
    fits: AtomicUsize,
}

impl PreparedFamily {
    pub fn new(spec: ModelSpec, prep: PrepSpec) -> Self {
        Self {
            spec,
            prep,
            max_seen: AtomicUsize::new(0),
            fits: AtomicUsize::new(0),
        }
    }

    pub fn fit(&self, c: &Candidate, train: &[f64], horizon: usize) -> Result<FitOutput> {
        self.max_seen.fetch_max(train.len(), Ordering::Relaxed);
        self.fits.fetch_add(1, Ordering::Relaxed);
        fit_forecast_model(&build(&self.spec, c)?, self.prep, train, horizon)
    }

    pub fn max_train_seen(&self) -> usize {
        self.max_seen.load(Ordering::Relaxed)
    }

    pub fn fit_count(&self) -> usize {
        self.fits.load(Ordering::Relaxed)
    }
}

impl ModelFamily for PreparedFamily {
    fn space(&self) -> SearchSpace {
        search_space(&self.spec)
    }

    fn complexity(&self, c: &Candidate) -> usize {
        let w = self
            .spec
            .window
            .or_else(|| get_int(c, "W").ok())
            .unwrap_or(0);
        match self.spec.model {
            ModelKind::NaiveDrift => 1,
            ModelKind::PolyTrend => get_int(c, "degree").unwrap_or(0) + 1,
            ModelKind::ExpSmoothing => 1 + usize::from(get_bool(c, "use_trend").unwrap_or(true)),
            ModelKind::Ar => get_int(c, "p").unwrap_or(0) + 1,
            ModelKind::Ols | ModelKind::Ridge | ModelKind::Knn => w + 1,
            ModelKind::Cart => w + get_int(c, "max_depth").unwrap_or(0),
        }
    }

    fn fit_forecast(&self, c: &Candidate, train: &[f64], horizon: usize) -> Result<Vec<f64>> {
        self.fit(c, train, horizon).map(|o| o.forecast)
    }
}
