mod support;

use gmtbench::evalx::{
    block_mean_rmse, make_splits, random_search, rmse, rmse_of_mean, Candidate, MetricSet,
    ModelFamily, SearchPolicy, SearchSpace,
};
use gmtbench::models::{ModelKind, ModelSpec, PreparedFamily};
use gmtbench::transform::{PowerTransform, PrepSpec};
use gmtbench::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_search_matches_exhaustive_oracle() {
    assert_eq!(support::suite_search(10, 100), 0);
}

#[test]
fn metric_identities_hold_exactly() {
    assert_eq!(support::suite_metric_identities(2000, 9), 0);
}

#[test]
fn single_point_space_returns_its_cv_mean() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let data = support::gmt_like(&mut r, 50);
    let fam = PreparedFamily::new(
        ModelSpec::new(ModelKind::NaiveDrift),
        PrepSpec::new(0, PowerTransform::None),
    );
    let splits = make_splits(50, 5, 3).unwrap();
    let out = random_search(
        &fam,
        &SearchSpace::new(),
        &splits,
        &SearchPolicy::random(20, 4),
        &data,
    )
    .unwrap();
    assert_eq!(out.best, Candidate::new());
    assert_eq!(out.trace.len(), 1);
    let mut total = 0.0;
    for w in &splits.fold_windows {
        let f = fam
            .fit_forecast(&Candidate::new(), &data[..w.train_end], 5)
            .unwrap();
        total += rmse(&data[w.val_start..w.val_end], &f).unwrap();
    }
    assert_eq!(out.score, total / 3.0);
}

#[test]
fn search_is_deterministic_per_seed() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let data = support::gmt_like(&mut r, 60);
    let fam = PreparedFamily::new(
        ModelSpec::new(ModelKind::ExpSmoothing),
        PrepSpec::new(0, PowerTransform::YeoJohnson),
    );
    let splits = make_splits(60, 5, 3).unwrap();
    let policy = SearchPolicy::random(30, 77);
    let a = random_search(&fam, &fam.space(), &splits, &policy, &data).unwrap();
    let b = random_search(&fam, &fam.space(), &splits, &policy, &data).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let c = random_search(
        &fam,
        &fam.space(),
        &splits,
        &SearchPolicy::random(30, 78),
        &data,
    )
    .unwrap();
    assert_ne!(a.trace[0].candidate, c.trace[0].candidate);
}

#[test]
fn search_reports_total_failure() {
    let data = vec![0.5; 40];
    let fam = PreparedFamily::new(
        ModelSpec::new(ModelKind::Ar),
        PrepSpec::new(0, PowerTransform::None),
    );
    let splits = make_splits(40, 5, 3).unwrap();
    let e = random_search(
        &fam,
        &fam.space(),
        &splits,
        &SearchPolicy::random(4, 0),
        &data,
    )
    .unwrap_err();
    assert_eq!(e, Error::AllCandidatesFailed(4));
}

proptest! {
    #[test]
    fn splits_never_leak(n in 8usize..300, m in 1usize..20, f in 1usize..5) {
        match make_splits(n, m, f) {
            Ok(p) => {
                prop_assert_eq!(p.fold_windows.len(), f);
                let mut prev_train = 0;
                for (i, w) in p.fold_windows.iter().enumerate() {
                    prop_assert_eq!(w.train_end, w.val_start);
                    prop_assert!(w.train_end > prev_train);
                    prop_assert_eq!(w.val_end - w.val_start, m);
                    prop_assert!(w.val_end <= n);
                    if i + 1 < f {
                        prop_assert_eq!(w.val_end, p.fold_windows[i + 1].val_start);
                    }
                    prev_train = w.train_end;
                }
                prop_assert_eq!(p.fold_windows[f - 1].val_end, n);
            }
            Err(_) => prop_assert!(n < (f + 1) * m),
        }
    }

    #[test]
    fn rmse_translation_and_scale(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
        c in -10.0f64..10.0,
        k in 0.01f64..10.0,
    ) {
        let (y, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let base = rmse(&y, &f).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
        let fs: Vec<f64> = f.iter().map(|v| v + c).collect();
        prop_assert!((rmse(&ys, &fs).unwrap() - base).abs() < 1e-12);
        let yk: Vec<f64> = y.iter().map(|v| v * k).collect();
        let fk: Vec<f64> = f.iter().map(|v| v * k).collect();
        prop_assert!((rmse(&yk, &fk).unwrap() - k * base).abs() < 1e-12 * (1.0 + k * base));
    }

    #[test]
    fn metrics_are_non_negative_and_zero_iff_equal(y in prop::collection::vec(-5.0f64..5.0, 5..6)) {
        let m = MetricSet::compute(&y, &y).unwrap();
        prop_assert_eq!(m.rmse, 0.0);
        prop_assert_eq!(m.block_mean_rmse, 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + 0.1).collect();
        let m = MetricSet::compute(&y, &shifted).unwrap();
        prop_assert!(m.rmse > 0.0 && m.mae > 0.0 && m.rmse_of_mean > 0.0);
        prop_assert!(m.mape >= 0.0);
        prop_assert_eq!(block_mean_rmse(&y, &shifted, 5).unwrap(), rmse_of_mean(&y, &shifted).unwrap());
    }
}
