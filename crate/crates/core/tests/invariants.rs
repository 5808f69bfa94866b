//! Cross-module properties of paths, ensembles and the study drivers.

use proptest::prelude::*;
use sdesim_core::levy::{AreaSampler, AreaSamplerKind, SamplerBudget};
use sdesim_core::mc::{
    conditional_area_rms, path_bundle, strong_error_study, weak_vs_strong_study, EnsembleConfig, Reference,
    WeakStrongConfig,
};
use sdesim_core::wiener::{pair_count, PathBundle};
use sdesim_core::{ModelSpec, PathKind, Scheme, SchemeKind};

fn gbm(scheme: SchemeKind, paths: usize, m: u32) -> EnsembleConfig {
    EnsembleConfig {
        paths,
        seed: 11,
        t0: 0.0,
        t_end: 1.0,
        m,
        m_start: 3,
        model: ModelSpec::Gbm { a: 3.0, b: 1.4 },
        scheme: Scheme::new(scheme),
        sampler: AreaSampler::NONE,
        y0: None,
        reference_scheme: None,
    }
}

fn bilinear(sampler: AreaSamplerKind) -> EnsembleConfig {
    EnsembleConfig {
        model: ModelSpec::Linear2d,
        scheme: Scheme::new(SchemeKind::CastellGainesOne),
        sampler: AreaSampler::new(sampler, SamplerBudget::Auto),
        m: 5,
        ..gbm(SchemeKind::EulerMaruyama, 16, 5)
    }
}

fn chen(a: f64, b: f64, dwi: (f64, f64), dwj: (f64, f64)) -> f64 {
    a + b + 0.5 * (dwi.0 * dwj.1 - dwi.1 * dwj.0)
}

proptest! {
    #[test]
    fn coarse_views_sum_increments_and_merge_areas(
        inc in proptest::collection::vec(-1.0f64..1.0, 16),
        areas in proptest::collection::vec(-0.5f64..0.5, 8),
    ) {
        let mut b = PathBundle::from_increments(2, 0.0, 1.0, inc.clone(), PathKind::Gaussian).unwrap();
        prop_assert_eq!(pair_count(2), 1);
        b.set_areas(areas.clone()).unwrap();
        let v = b.coarsen(2).unwrap();
        for n in 0..4 {
            for i in 0..2 {
                let want = inc[i * 8 + 2 * n] + inc[i * 8 + 2 * n + 1];
                prop_assert!((v.increment(i, n) - want).abs() < 1e-12);
            }
            let w1 = (inc[2 * n], inc[2 * n + 1]);
            let w0 = (inc[8 + 2 * n], inc[8 + 2 * n + 1]);
            let stored = v.area(1, 0, n).unwrap();
            let want = chen(areas[2 * n], areas[2 * n + 1], w0, w1);
            prop_assert!((stored - want).abs() < 1e-12, "{} vs {}", stored, want);
            prop_assert_eq!(v.area(0, 1, n).unwrap(), -stored);
        }
        let direct = b.coarsen(4).unwrap();
        let nested = v.coarsen(2).unwrap();
        for n in 0..2 {
            prop_assert_eq!(direct.area(1, 0, n), nested.area(1, 0, n));
            prop_assert_eq!(direct.increment(0, n), nested.increment(0, n));
        }
    }

    #[test]
    fn weak_strong_arrays_have_n_plus_one_rows_of_p(paths in 1usize..6, n in 1usize..12) {
        let cfg = WeakStrongConfig { paths, h: 1.0 / n as f64, ..WeakStrongConfig::default() };
        let r = weak_vs_strong_study(&cfg, 1).unwrap();
        prop_assert_eq!(r.times.len(), n + 1);
        prop_assert_eq!(r.binomial.len(), n + 1);
        prop_assert!(r.binomial.iter().chain(&r.gaussian).all(|row| row.len() == paths));
        prop_assert!(r.binomial[0].iter().all(|&y| y == cfg.y0));
    }
}

#[test]
fn every_level_sees_the_same_driving_path() {
    for kind in [AreaSamplerKind::Kl, AreaSamplerKind::Rw] {
        let cfg = bilinear(kind);
        let model = cfg.model.build().unwrap();
        let b = path_bundle(&cfg, model.as_ref(), 3).unwrap();
        assert!(b.areas().is_some());
        let fine = b.fine_view();
        let coarsest = b.coarsen(1 << (cfg.m - cfg.m_start)).unwrap();
        for i in 0..2 {
            let total_fine: f64 = fine.component(i).iter().sum();
            let total_coarse: f64 = coarsest.component(i).iter().sum();
            assert!((total_fine - total_coarse).abs() < 1e-12);
        }
        // same path index, same bundle
        let again = path_bundle(&cfg, model.as_ref(), 3).unwrap();
        assert_eq!(b.component(0), again.component(0));
        assert_eq!(b.areas(), again.areas());
    }
}

#[test]
fn cond_sampler_refines_the_fine_grid() {
    let cfg = bilinear(AreaSamplerKind::Cond);
    assert_eq!(cfg.refine(), 32);
    let model = cfg.model.build().unwrap();
    let b = path_bundle(&cfg, model.as_ref(), 0).unwrap();
    assert_eq!(b.n_fine(), 32 << cfg.m);
}

#[test]
fn doubling_q_shrinks_conditional_error_by_sqrt_two() {
    let a = conditional_area_rms(0.02, 25, 4000, 3, 0).unwrap();
    let b = conditional_area_rms(0.02, 50, 4000, 4, 0).unwrap();
    let ratio = a.rms / b.rms;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn study_is_identical_for_any_worker_count() {
    let cfg = gbm(SchemeKind::Milstein, 40, 7);
    let one = strong_error_study(&cfg, 1).unwrap();
    let three = strong_error_study(&cfg, 3).unwrap();
    assert_eq!(one.fit, three.fit);
    for (x, y) in one.levels.iter().zip(&three.levels) {
        assert_eq!((x.h, x.rms_error, x.stderr), (y.h, y.rms_error, y.stderr));
    }
    assert_eq!(one.reference, Reference::Exact);
}

#[test]
fn config_round_trips_through_json() {
    let mut cfg = bilinear(AreaSamplerKind::Rw);
    cfg.reference_scheme = Some(Scheme::new(SchemeKind::Milstein));
    cfg.y0 = Some(vec![0.5, -2.0]);
    let text = serde_json::to_string(&cfg).unwrap();
    let back: EnsembleConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let a = strong_error_study(&cfg, 1).unwrap();
    let b = strong_error_study(&back, 1).unwrap();
    assert_eq!(a.fit, b.fit);
}

#[test]
fn error_shrinks_from_coarsest_to_finest_level() {
    let cfg = gbm(SchemeKind::EulerMaruyama, 200, 6);
    let r = strong_error_study(&cfg, 0).unwrap();
    let finest = r.levels.last().unwrap();
    assert!(finest.rms_error < 0.5 * r.levels[0].rms_error);
}
