//! Experiment grid: every (preparation, test size, model) cell is tuned on
//! its training region, refitted, and scored on the held-out final years.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::evalx::{
    make_splits, random_search, Candidate, CandidateTrace, MetricSet, ModelFamily, SearchPolicy,
    SplitPlan,
};
use crate::ingest::{
    describe, detect_outliers_iforest, detect_outliers_iqr, parse_gistemp, AnnualSeries,
    DescriptiveStats, OutlierReport, DEFAULT_COLUMN,
};
use crate::models::{ModelKind, ModelSpec, PreparedFamily};
use crate::stattests::{adf_test, kpss_test, TestResult};
use crate::transform::{difference, min_train_len, FittedPipeline, PrepSpec};
use crate::{plot, report};

pub const SCHEMA_VERSION: u32 = 1;

fn default_column() -> String {
    DEFAULT_COLUMN.to_string()
}
fn default_test_sizes() -> Vec<usize> {
    vec![5, 10, 15]
}
fn default_folds() -> usize {
    3
}
fn default_iterations() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Relative paths are resolved against the config file's directory.
    pub data_path: PathBuf,
    #[serde(default = "default_column")]
    pub column: String,
    #[serde(default = "PrepSpec::grid")]
    pub preps: Vec<PrepSpec>,
    #[serde(default = "default_test_sizes")]
    pub test_sizes: Vec<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "ModelSpec::default_roster")]
    pub roster: Vec<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Failures before any grid cell runs.
#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(Error),
}

impl ExperimentConfig {
    /// Full-grid defaults for a data file.
    pub fn new(data_path: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            data_path: data_path.into(),
            column: default_column(),
            preps: PrepSpec::grid(),
            test_sizes: default_test_sizes(),
            folds: default_folds(),
            iterations: default_iterations(),
            base_seed: 0,
            roster: ModelSpec::default_roster(),
            workers: None,
        }
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, SetupError> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| SetupError::Config(e.to_string()))?;
        if cfg.data_path.is_relative() {
            cfg.data_path = base_dir.join(&cfg.data_path);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SetupError> {
        let text = fs::read_to_string(path)
            .map_err(|e| SetupError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<(), SetupError> {
        let bad = |m: String| Err(SetupError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.preps.is_empty() || self.test_sizes.is_empty() || self.roster.is_empty() {
            return bad("preps, test_sizes and roster must be non-empty".into());
        }
        if self.folds == 0 || self.iterations == 0 {
            return bad("folds and iterations must be >= 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if let Some(t) = self.test_sizes.iter().find(|&&t| t == 0) {
            return bad(format!("test size {t} must be >= 1"));
        }
        for p in &self.preps {
            p.validate()
                .map_err(|e| SetupError::Config(e.to_string()))?;
        }
        for m in &self.roster {
            m.validate()
                .map_err(|e| SetupError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Checks every test size against a series of length `n`: the training
    /// region must hold `folds` validation blocks plus a fittable first fold.
    pub fn validate_against(&self, n: usize) -> Result<(), SetupError> {
        self.validate()?;
        for &t in &self.test_sizes {
            let n_train = n.saturating_sub(t);
            let need = (self.folds + 1) * t;
            if t >= n || n_train < need {
                return Err(SetupError::Config(format!(
                    "test size {t} violates n - T >= (folds + 1) * T: n = {n}, folds = {}, need n - T >= {need}",
                    self.folds
                )));
            }
            let first_fold = n_train - self.folds * t;
            for p in &self.preps {
                if first_fold < min_train_len(*p) {
                    return Err(SetupError::Config(format!(
                        "test size {t} leaves {first_fold} points in the first fold, below the {} needed by {}",
                        min_train_len(*p),
                        p.label()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load_series(&self) -> Result<AnnualSeries, SetupError> {
        let text = fs::read_to_string(&self.data_path).map_err(|e| {
            SetupError::Data(Error::Io(format!("{}: {e}", self.data_path.display())))
        })?;
        parse_gistemp(&text, &self.column).map_err(SetupError::Data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearPoint {
    pub year: i32,
    pub observed: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_key: String,
    pub model: ModelKind,
    #[serde(rename = "W")]
    pub window: Option<usize>,
    pub prep: PrepSpec,
    pub test_size: usize,
    pub metrics: Option<MetricSet>,
    pub chosen_hyperparams: Candidate,
    pub cv_score: Option<f64>,
    pub per_year: Vec<YearPoint>,
    pub pipeline: Option<FittedPipeline>,
    pub model_summary: Option<serde_json::Value>,
    pub seed: u64,
    pub error: Option<String>,
}

impl RunResult {
    pub fn sort_key(&self) -> (PrepSpec, usize, ModelKind, Option<usize>, &str) {
        (
            self.prep,
            self.test_size,
            self.model,
            self.window,
            &self.run_key,
        )
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.model.code(), self.run_key)
    }
}

/// Instrumentation and search trace for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAudit {
    pub run_key: String,
    pub cell_key: String,
    pub model: ModelKind,
    pub seed: u64,
    pub n_obs: usize,
    pub train_len: usize,
    pub test_years: Vec<i32>,
    pub splits: Option<SplitPlan>,
    pub iterations: usize,
    pub multistep: Option<String>,
    pub trace: Vec<CandidateTrace>,
    pub chosen_hyperparams: Candidate,
    pub cv_score: Option<f64>,
    /// Longest training window passed to any pipeline or model fit.
    pub max_fit_len: usize,
    pub fit_count: usize,
    /// Reads of held-out observations, all during final scoring.
    pub test_reads: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub results: Vec<RunResult>,
    pub audits: Vec<RunAudit>,
}

impl GridOutput {
    pub fn failed(&self) -> usize {
        self.results.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Key of a grid cell before tuning; the seed is derived from it.
pub fn cell_key(prep: &PrepSpec, test_size: usize, spec: &ModelSpec) -> String {
    let base = format!("{}-T{test_size}", prep.label());
    let base = match spec.window {
        Some(w) => format!("W{w}-{base}"),
        None => base,
    };
    let base = if prep.scale {
        base
    } else {
        format!("{base}-U")
    };
    format!("{base}/{}", spec.model.code())
}

/// FNV-1a over the seed and key bytes, finished with a SplitMix64 mix.
pub fn run_seed(base_seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in base_seed.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

fn run_key(prep: &PrepSpec, test_size: usize, window: Option<usize>) -> String {
    let base = format!("{}-T{test_size}", prep.label());
    let base = match window {
        Some(w) => format!("W{w}-{base}"),
        None => base,
    };
    if prep.scale {
        base
    } else {
        format!("{base}-U")
    }
}

/// Executes one grid cell. Never panics on model failure; the error is
/// recorded in both outputs.
pub fn run_cell(
    series: &AnnualSeries,
    prep: PrepSpec,
    test_size: usize,
    spec: ModelSpec,
    folds: usize,
    iterations: usize,
    base_seed: u64,
) -> (RunResult, RunAudit) {
    let key = cell_key(&prep, test_size, &spec);
    let seed = run_seed(base_seed, &key);
    let n = series.len();
    let family = PreparedFamily::new(spec, prep);
    let mut result = RunResult {
        run_key: run_key(&prep, test_size, spec.window),
        model: spec.model,
        window: spec.window,
        prep,
        test_size,
        metrics: None,
        chosen_hyperparams: Candidate::new(),
        cv_score: None,
        per_year: Vec::new(),
        pipeline: None,
        model_summary: None,
        seed,
        error: None,
    };
    let mut audit = RunAudit {
        run_key: result.run_key.clone(),
        cell_key: key,
        model: spec.model,
        seed,
        n_obs: n,
        train_len: n.saturating_sub(test_size),
        test_years: series.years()[n.saturating_sub(test_size)..].to_vec(),
        splits: None,
        iterations,
        multistep: spec.model.is_lag_model().then(|| "recursive".to_string()),
        trace: Vec::new(),
        chosen_hyperparams: Candidate::new(),
        cv_score: None,
        max_fit_len: 0,
        fit_count: 0,
        test_reads: 0,
        error: None,
    };

    let outcome = (|| -> crate::Result<()> {
        if test_size == 0 || test_size >= n {
            return Err(Error::InsufficientData {
                n_train: n.saturating_sub(test_size),
                horizon: test_size,
                folds,
            });
        }
        let train = &series.values()[..n - test_size];
        let splits = make_splits(train.len(), test_size, folds)?;
        audit.splits = Some(splits.clone());
        let policy = SearchPolicy::random(iterations, seed);
        let search = random_search(&family, &family.space(), &splits, &policy, train);
        let search = match search {
            Ok(s) => s,
            Err(e) => {
                if let Error::AllCandidatesFailed(_) = e {
                    // keep the trace of failures for the audit
                    audit.trace = crate::evalx::draw_candidates(&family.space(), &policy)?
                        .into_iter()
                        .enumerate()
                        .map(|(i, c)| CandidateTrace {
                            draw: i,
                            error: family
                                .fit_forecast(&c, train, test_size)
                                .err()
                                .map(|e| e.to_string()),
                            candidate: c,
                            fold_rmse: Vec::new(),
                            score: None,
                        })
                        .collect();
                }
                return Err(e);
            }
        };
        audit.trace = search.trace;
        audit.chosen_hyperparams = search.best.clone();
        audit.cv_score = Some(search.score);
        result.chosen_hyperparams = search.best.clone();
        result.cv_score = Some(search.score);
        let model = crate::models::build(&spec, &search.best)?;
        if let Some(w) = model.window() {
            result.window = Some(w);
            result.run_key = run_key(&prep, test_size, Some(w));
            audit.run_key = result.run_key.clone();
        }
        let fit = family.fit(&search.best, train, test_size)?;
        result.pipeline = Some(fit.pipeline);
        result.model_summary = Some(fit.summary);

        let test = &series.values()[n - test_size..];
        audit.test_reads += test.len();
        result.metrics = Some(MetricSet::compute(test, &fit.forecast)?);
        result.per_year = series.years()[n - test_size..]
            .iter()
            .zip(test)
            .zip(&fit.forecast)
            .map(|((&year, &observed), &predicted)| YearPoint {
                year,
                observed,
                predicted,
            })
            .collect();
        Ok(())
    })();

    audit.max_fit_len = family.max_train_seen();
    audit.fit_count = family.fit_count();
    if let Err(e) = outcome {
        result.error = Some(e.to_string());
        audit.error = result.error.clone();
        result.metrics = None;
        result.per_year.clear();
    }
    (result, audit)
}

/// Runs every cell of the grid on `series`. Cells run on a pool of
/// `cfg.workers` threads (all cores when unset); output order is canonical.
pub fn run_grid(cfg: &ExperimentConfig, series: &AnnualSeries) -> Result<GridOutput, SetupError> {
    cfg.validate_against(series.len())?;
    let mut cells = Vec::new();
    for prep in &cfg.preps {
        for &t in &cfg.test_sizes {
            for spec in &cfg.roster {
                cells.push((*prep, t, *spec));
            }
        }
    }
    let work = || -> Vec<(RunResult, RunAudit)> {
        cells
            .par_iter()
            .map(|&(prep, t, spec)| {
                run_cell(
                    series,
                    prep,
                    t,
                    spec,
                    cfg.folds,
                    cfg.iterations,
                    cfg.base_seed,
                )
            })
            .collect()
    };
    let mut pairs = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| SetupError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    pairs.sort_by(|a, b| a.0.sort_key().cmp(&b.0.sort_key()));
    let (results, audits) = pairs.into_iter().unzip();
    Ok(GridOutput { results, audits })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub test: TestResult,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityPair {
    pub adf: Verdict,
    pub kpss: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    pub first_year: i32,
    pub last_year: i32,
    pub describe: DescriptiveStats,
    pub raw: StationarityPair,
    pub differenced: StationarityPair,
    pub outliers_iqr: OutlierReport,
    pub outliers_iforest: OutlierReport,
}

fn stationarity(x: &[f64]) -> crate::Result<StationarityPair> {
    let label = |stationary: bool| {
        if stationary {
            "stationary"
        } else {
            "non-stationary"
        }
        .to_string()
    };
    let adf = adf_test(x)?;
    let kpss = kpss_test(x)?;
    Ok(StationarityPair {
        adf: Verdict {
            verdict: label(adf.reject_at_5pct),
            test: adf,
        },
        kpss: Verdict {
            verdict: label(!kpss.reject_at_5pct),
            test: kpss,
        },
    })
}

/// Descriptive statistics, ADF/KPSS verdicts on the raw and differenced
/// series, and both outlier reports.
pub fn eda(series: &AnnualSeries, trees: usize, seed: u64) -> crate::Result<EdaReport> {
    let years = series.years();
    Ok(EdaReport {
        first_year: years[0],
        last_year: years[years.len() - 1],
        describe: describe(series.values())?,
        raw: stationarity(series.values())?,
        differenced: stationarity(&difference(series.values())?)?,
        outliers_iqr: detect_outliers_iqr(series)?,
        outliers_iforest: detect_outliers_iforest(series, trees, seed)?,
    })
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub results_csv: PathBuf,
    pub results_json: PathBuf,
    pub audits: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

/// Writes `results.csv`, `results.json`, `audit/*.json` and `plots/*.svg`.
pub fn write_outputs(out: &GridOutput, out_dir: &Path) -> crate::Result<OutputFiles> {
    fs::create_dir_all(out_dir.join("audit"))?;
    let results_csv = out_dir.join("results.csv");
    let results_json = out_dir.join("results.json");
    fs::write(&results_csv, report::to_csv(&out.results))?;
    fs::write(&results_json, report::to_json(&out.results))?;
    let mut audits = Vec::new();
    for (r, a) in out.results.iter().zip(&out.audits) {
        let path = out_dir
            .join("audit")
            .join(format!("{}.json", r.file_stem()));
        let mut text = serde_json::to_string_pretty(a).expect("audit serializes");
        text.push('\n');
        fs::write(&path, text)?;
        audits.push(path);
    }
    let plots = if out.results.iter().any(|r| r.metrics.is_some()) {
        plot::render_plots(&out.results, &out_dir.join("plots"))?
    } else {
        Vec::new()
    };
    Ok(OutputFiles {
        results_csv,
        results_json,
        audits,
        plots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::PowerTransform;

    #[test]
    fn seeds_are_stable_and_key_sensitive() {
        let a = run_seed(7, "D0-NO-T5/NAV");
        assert_eq!(a, run_seed(7, "D0-NO-T5/NAV"));
        assert_ne!(a, run_seed(8, "D0-NO-T5/NAV"));
        assert_ne!(a, run_seed(7, "D0-NO-T10/NAV"));
    }

    #[test]
    fn keys() {
        let p = PrepSpec::new(1, PowerTransform::YeoJohnson);
        assert_eq!(run_key(&p, 10, None), "D1-YJ-T10");
        assert_eq!(run_key(&p, 5, Some(29)), "W29-D1-YJ-T5");
        assert_eq!(
            cell_key(&p, 5, &ModelSpec::new(ModelKind::Knn)),
            "D1-YJ-T5/KNN"
        );
    }

    #[test]
    fn config_defaults_and_bounds() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schema_version":1,"data_path":"x.csv"}"#,
            Path::new("/d"),
        )
        .unwrap();
        assert_eq!(cfg.data_path, PathBuf::from("/d/x.csv"));
        assert_eq!(cfg.preps.len() * cfg.test_sizes.len(), 18);
        assert_eq!(cfg.roster.len(), 8);
        assert!(cfg.validate_against(141).is_ok());
        let mut big = cfg.clone();
        big.test_sizes = vec![200];
        let msg = big.validate_against(141).unwrap_err().to_string();
        assert!(msg.contains("n - T >= (folds + 1) * T"), "{msg}");
        let mut v2 = cfg;
        v2.schema_version = 2;
        assert!(v2.validate().is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"schema_version":1,"data_path":"x","bogus":1}"#,
            Path::new(".")
        )
        .is_err());
    }
}
