use sfde_core::diagnostics::{
    convergence_study, increment_bound_check, make_holder_path, martingale_check,
    moment_bound_check, normalization_check,
};
use sfde_core::engine::{girsanov_weight, simulate_gap_path};
use sfde_core::pricing::price_gap_mc;
use sfde_core::stats::{collect_replicates, column_estimates, combined_se};
use sfde_core::*;

const DT: f64 = 1.0 / 64.0;

fn path_dependent() -> (FunctionalSpec, FunctionalSpec) {
    let f = FunctionalSpec::affine(FunctionalSpec::moving_average(0.5).unwrap(), 0.001, 0.0)
        .unwrap()
        .with_bounds(0.0, 0.5)
        .unwrap();
    let g = FunctionalSpec::affine(FunctionalSpec::realized_vol(0.5, 0.5, 50.0).unwrap(), 0.02, 0.1)
        .unwrap();
    (f, g)
}

#[test]
fn gbm_mean_growth() {
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let f = FunctionalSpec::constant(0.1).unwrap();
    let g = FunctionalSpec::constant(0.2).unwrap();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT).with_seed(5);
    let rows = collect_replicates(&Serial, 100_000, false, |stream, _| {
        Ok(vec![simulate_gap_path(&model, &cfg, stream)?.terminal() / 100.0])
    })
    .unwrap();
    let est = column_estimates(&rows, 1)[0];
    assert!(est.within(0.1f64.exp(), 3.0), "{est:?}");
}

#[test]
fn girsanov_mean_constant_coefficients() {
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let f = FunctionalSpec::constant(0.1).unwrap();
    let g = FunctionalSpec::constant(0.2).unwrap();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(9)
        .with_replicates(100_000);
    let report = normalization_check(&Serial, &model, 0.05, &cfg).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn positivity_under_large_volatility() {
    let theta = make_holder_path(0.4, 2, 0.5, 1.0, DT).unwrap();
    let f = FunctionalSpec::constant(-0.5).unwrap();
    let g = FunctionalSpec::affine(FunctionalSpec::realized_vol(0.5, 0.5, 5.0).unwrap(), 0.4, 0.2)
        .unwrap();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(2.0, 0.25, 0.5, DT).with_seed(3);
    for stream in 0..2000 {
        let path = simulate_gap_path(&model, &cfg, stream).unwrap();
        assert!(path.prices().iter().all(|&s| s > 0.0));
    }
}

#[test]
fn measure_change_matches_risk_neutral_simulation() {
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let (f, g) = path_dependent();
    let model = Model::new(&theta, &f, &g);
    let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(17)
        .with_replicates(40_000);
    let q = price_gap_mc(&Serial, &model, &cfg, &mkt).unwrap().estimate();

    let p_cfg = cfg.with_seed(18);
    let rows = collect_replicates(&Serial, p_cfg.replicates, false, |stream, _| {
        let path = simulate_gap_path(&model, &p_cfg, stream)?;
        let w = girsanov_weight(&path, &f, &g, mkt.rate)?;
        Ok(vec![w.value() * mkt.discount(1.0) * (path.terminal() - 100.0).max(0.0)])
    })
    .unwrap();
    let weighted = column_estimates(&rows, 1)[0];
    let gap = (q.mean - weighted.mean).abs();
    assert!(gap <= 3.0 * combined_se(&q, &weighted), "{q:?} vs {weighted:?}");
}

#[test]
fn path_dependent_normalization_and_martingale() {
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let (f, g) = path_dependent();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(23)
        .with_replicates(20_000);
    assert!(normalization_check(&Serial, &model, 0.05, &cfg).unwrap().pass);
    let mkt = MarketConfig::call(0.05, 100.0, 1.0).unwrap();
    for report in martingale_check(&Serial, &model, &cfg, &mkt).unwrap() {
        assert!(report.pass, "{report:?}");
    }
}

#[test]
fn zero_rate_mean_is_flat() {
    let theta = InitialPath::constant(100.0, 0.5, DT).unwrap();
    let f = FunctionalSpec::constant(0.0).unwrap();
    let g = FunctionalSpec::realized_vol(0.5, 0.05, 5.0).unwrap();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, DT)
        .with_seed(29)
        .with_replicates(20_000);
    let mkt = MarketConfig::call(0.0, 100.0, 1.0).unwrap();
    let reports = martingale_check(&Serial, &model, &cfg, &mkt).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.pass), "{reports:?}");
}

#[test]
fn moment_and_increment_bounds_uniform_in_k() {
    let dt = 1.0 / 128.0;
    let theta = make_holder_path(0.4, 11, 0.5, 100.0, dt).unwrap();
    let (f, g) = path_dependent();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, dt)
        .with_seed(31)
        .with_replicates(2000);
    let ks = [2, 4, 8, 16];
    let m1 = moment_bound_check(&Serial, &ks, 1, &model, &cfg).unwrap();
    let m2 = moment_bound_check(&Serial, &ks, 2, &model, &cfg).unwrap();
    assert!(m1.pass && m2.pass, "{m1:?} {m2:?}");
    for (a, b) in m1.estimates.iter().zip(&m2.estimates) {
        assert!(b.mean >= a.mean * a.mean * 0.99);
    }
    let inc = increment_bound_check(&Serial, &ks, &[1.0 / 64.0, 1.0 / 16.0, 0.25], &model, &cfg)
        .unwrap();
    assert!(inc.pass, "{inc:?}");
}

#[test]
fn convergence_study_is_reproducible_and_monotone() {
    let dt = 1.0 / 128.0;
    let theta = make_holder_path(0.4, 4, 0.5, 100.0, dt).unwrap();
    let (f, g) = path_dependent();
    let model = Model::new(&theta, &f, &g);
    let cfg = SimulationConfig::new(1.0, 0.25, 0.5, dt)
        .with_seed(37)
        .with_replicates(500);
    let a = convergence_study(&Serial, &[2, 4, 8, 16], 0.4, &model, &cfg).unwrap();
    let b = convergence_study(&Serial, &[2, 4, 8, 16], 0.4, &model, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(!a.degenerate);
    assert!(a.monotone_within(2.0), "{a:?}");
    assert!(a.slope_ok(), "{a:?}");
}
