//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails. Tolerances are fixed below.

use std::process::ExitCode;
use std::time::Instant;

use sdesim_core::algebra::{expected_stratonovich, expected_stratonovich_exact, expected_via_ito, words_of_length, Word};
use sdesim_core::fk::{cross_validate, FkProblem};
use sdesim_core::levy::{
    sample_kl, sample_rw, AreaSampler, AreaSamplerKind, DensityOracle, LevyContext,
    SamplerBudget,
};
use sdesim_core::mc::{
    conditional_area_rms, estimate_expectation, strong_error_study, weak_vs_strong_study,
    EnsembleConfig, ErrorReport, WeakStrongConfig,
};
use sdesim_core::model::{HestonParams, ModelSpec, Payoff};
use sdesim_core::rng::RngStream;
use sdesim_core::scheme::{Scheme, SchemeKind};
use sdesim_core::stats::{ks_distance, Moments};

const SEED: u64 = 20240601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn gbm_config(kind: SchemeKind) -> EnsembleConfig {
    EnsembleConfig {
        paths: 1000,
        seed: SEED,
        t0: 0.0,
        t_end: 1.0,
        m: 9,
        m_start: 4,
        model: ModelSpec::Gbm { a: 3.0, b: 1.4 },
        scheme: Scheme::new(kind),
        sampler: AreaSampler::NONE,
        y0: Some(vec![1.0]),
        reference_scheme: None,
    }
}

fn slope_within(report: &ErrorReport, target: f64, tol: f64) -> bool {
    (report.fit.slope - target).abs() <= tol
}

fn errors(report: &ErrorReport) -> String {
    report
        .levels
        .iter()
        .map(|l| format!("{:.3e}", l.rms_error))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = strong_error_study(&gbm_config(SchemeKind::EulerMaruyama), 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: slope_within(&r, 0.5, 0.1) && secs < 30.0,
        detail: format!("EM slope {:.4} (want 0.5 ± 0.1), {secs:.1}s single-threaded", r.fit.slope),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r = strong_error_study(&gbm_config(SchemeKind::Milstein), 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: slope_within(&r, 1.0, 0.15) && secs < 60.0,
        detail: format!("Milstein slope {:.4} (want 1.0 ± 0.15), {secs:.1}s", r.fit.slope),
    }
}

fn bilinear_config(kind: SchemeKind) -> EnsembleConfig {
    EnsembleConfig {
        m: 8,
        m_start: 3,
        model: ModelSpec::Linear2d,
        scheme: Scheme::new(kind),
        sampler: AreaSampler::new(AreaSamplerKind::Kl, SamplerBudget::Auto),
        y0: Some(vec![1.0, 1.0]),
        ..gbm_config(kind)
    }
}

/// On scalar GBM the frozen Castell–Gaines field integrates to the exact
/// flow, so the half-order variant only shows its order-1/2 behaviour with
/// non-commuting noise; its slope is measured on the bilinear testbed and
/// the accuracy comparison with Euler–Maruyama is made on GBM.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let em = strong_error_study(&gbm_config(SchemeKind::EulerMaruyama), 0).unwrap();
    let half_gbm = strong_error_study(&gbm_config(SchemeKind::CastellGainesHalf), 0).unwrap();
    let dominated = half_gbm
        .levels
        .iter()
        .zip(&em.levels)
        .all(|(c, e)| c.rms_error <= e.rms_error);
    // a half-order scheme measured against itself on the finest level
    // inflates the slope; the order-1 variant supplies the reference
    let half_cfg = EnsembleConfig {
        reference_scheme: Some(Scheme::new(SchemeKind::CastellGainesOne)),
        ..bilinear_config(SchemeKind::CastellGainesHalf)
    };
    let half = strong_error_study(&half_cfg, 0).unwrap();
    let one = strong_error_study(&bilinear_config(SchemeKind::CastellGainesOne), 0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: slope_within(&half, 0.5, 0.1)
            && dominated
            && slope_within(&one, 1.0, 0.2)
            && secs < 300.0,
        detail: format!(
            "CG-half bilinear slope {:.4} (want 0.5 ± 0.1); GBM CG-half <= EM at every level: {dominated} [{}] vs [{}] (GBM CG-half slope {:.2}, exact flow); CG-one bilinear slope {:.4} (want 1.0 ± 0.2); {secs:.1}s",
            half.fit.slope,
            errors(&half_gbm),
            errors(&em),
            half_gbm.fit.slope,
            one.fit.slope
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (h, q) in [(0.01, 25u32), (0.01, 100), (0.02, 100)] {
        let r = conditional_area_rms(h, q, 10_000, SEED, 0).unwrap();
        let claimed = h / (q as f64).sqrt();
        let ratio = r.rms / claimed;
        passed &= (ratio - 1.0).abs() <= 0.10;
        parts.push(format!(
            "(h={h}, Q={q}) rms {:.4e} vs h/sqrt(Q) {:.4e} ratio {ratio:.4} [h/sqrt(2Q) ratio {:.4}]",
            r.rms,
            claimed,
            r.rms / (h / (2.0 * q as f64).sqrt())
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let h = 0.1;
    let ctx = LevyContext::new(h, h.sqrt(), h.sqrt()).unwrap();
    let oracle = DensityOracle::new(ctx);
    let table = oracle.cdf_table(4001).unwrap();
    let n = 100_000;
    let mut s = RngStream::new(SEED, 5);
    let kl: Vec<f64> = (0..n).map(|_| sample_kl(&mut s, &ctx, SamplerBudget::Fixed(200))).collect();
    let mut s = RngStream::new(SEED, 6);
    let rw: Vec<f64> = (0..n)
        .map(|_| sample_rw(&mut s, &ctx, SamplerBudget::Fixed(32)).unwrap())
        .collect();
    let d_kl = ks_distance(&kl, |x| table.eval(x));
    let d_rw = ks_distance(&rw, |x| table.eval(x));
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: d_kl < 0.01 && d_rw < 0.01 && secs < 120.0,
        detail: format!("KS KL(Q=200) {d_kl:.5}, RW(Q=32) {d_rw:.5} (want < 0.01), {secs:.1}s"),
    }
}

/// `J_w` over `[0, t]` for words of length 2, built from `q` sub-steps with
/// Chen's relation; sub-step areas from the RW sampler.
fn iterated_integrals(s: &mut RngStream, t: f64, q: usize) -> [f64; 3] {
    let dt = t / q as f64;
    let (mut w1, mut w2, mut time) = (0.0, 0.0, 0.0);
    let (mut j11, mut j12, mut j00) = (0.0, 0.0, 0.0);
    for _ in 0..q {
        let d1 = s.wiener_increment(dt).unwrap();
        let d2 = s.wiener_increment(dt).unwrap();
        let ctx = LevyContext::new(dt, d1, d2).unwrap();
        let a = sample_rw(s, &ctx, SamplerBudget::Fixed(16)).unwrap();
        j11 += 0.5 * d1 * d1 + w1 * d1;
        j12 += 0.5 * d1 * d2 + a + w1 * d2;
        j00 += 0.5 * dt * dt + time * dt;
        w1 += d1;
        w2 += d2;
        time += dt;
    }
    let _ = w2;
    [j11, j12, j00]
}

fn criterion_6() -> Outcome {
    let mut exact_ok = true;
    let mut count = 0;
    for d in 1..=3 {
        for len in 0..=4 {
            for w in words_of_length(d, len) {
                count += 1;
                exact_ok &= expected_stratonovich_exact(&w).unwrap() == expected_via_ito(&w).unwrap();
            }
        }
    }
    let t = 0.5;
    let n = 100_000;
    let mut samples = [vec![], vec![], vec![]];
    for p in 0..n {
        let mut s = RngStream::new(SEED, 600_000 + p as u64);
        let j = iterated_integrals(&mut s, t, 8);
        for k in 0..3 {
            samples[k].push(j[k]);
        }
    }
    let mut mc_ok = true;
    let mut parts = Vec::new();
    for (k, word) in ["11", "12", "00"].iter().enumerate() {
        let m = Moments::from_slice(&samples[k]);
        let want = expected_stratonovich(&word.parse::<Word>().unwrap(), t);
        // deterministic J_00 has zero spread; allow rounding only
        let tol = 3.0 * m.std_error() + 1e-12;
        mc_ok &= (m.mean - want).abs() <= tol;
        parts.push(format!("J_{word}: {:.5} vs {want:.5} (3se {:.1e})", m.mean, 3.0 * m.std_error()));
    }
    Outcome {
        passed: exact_ok && mc_ok,
        detail: format!("exact identities on {count} words: {exact_ok}; {}", parts.join(", ")),
    }
}

fn criterion_7() -> Outcome {
    let h = 0.05;
    let mut s = RngStream::new(SEED, 7);
    let xs: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let dw = s.wiener_increment(h).unwrap();
            0.5 * dw * dw
        })
        .collect();
    let m = Moments::from_slice(&xs);
    Outcome {
        passed: (m.mean - h / 2.0).abs() <= 3.0 * m.std_error(),
        detail: format!("mean {:.6} vs {:.6} (3se {:.1e})", m.mean, h / 2.0, 3.0 * m.std_error()),
    }
}

fn criterion_8() -> Outcome {
    let spec = ModelSpec::Langevin { a: 3.0, b: 0.25 };
    let problem = FkProblem::around(spec.clone(), Payoff::Id, 1.0, 1.0, 401).unwrap();
    let mc = EnsembleConfig {
        paths: 100_000,
        seed: SEED,
        t0: 0.0,
        t_end: 1.0,
        m: 8,
        m_start: 8,
        model: spec,
        scheme: Scheme::new(SchemeKind::EulerMaruyama),
        sampler: AreaSampler::NONE,
        y0: None,
        reference_scheme: None,
    };
    let r = cross_validate(&problem, 1.0, &mc, 0).unwrap();
    let exact = (-3.0f64).exp();
    let tol = r.tolerance;
    let pde_ok = (r.pde - exact).abs() < tol;
    let mc_ok = (r.mc.mean - exact).abs() < tol;
    Outcome {
        passed: r.passed && pde_ok && mc_ok,
        detail: format!(
            "PDE {:.6}, MC {:.6} ± {:.1e}, exact {exact:.6}, 4σ tolerance {tol:.2e}",
            r.pde, r.mc.mean, r.mc.stderr
        ),
    }
}

fn criterion_9() -> Outcome {
    let cfg = WeakStrongConfig {
        paths: 100_000,
        seed: SEED,
        ..WeakStrongConfig::default()
    };
    let r = weak_vs_strong_study(&cfg, 0).unwrap();
    let n = r.times.len() - 1;
    let exact = (cfg.a * cfg.t_end).exp();
    // leading Euler weak-error term for linear drift: e^{aT} a^2 T h / 2
    let bias = exact * cfg.a * cfg.a * cfg.t_end * cfg.h / 2.0;
    let ok_b = (r.mean_binomial[n] - exact).abs() <= 4.0 * r.stderr_binomial + bias;
    let ok_g = (r.mean_gaussian[n] - exact).abs() <= 4.0 * r.stderr_gaussian + bias;
    Outcome {
        passed: ok_b && ok_g && n == 20,
        detail: format!(
            "binomial {:.4} ± {:.3}, gaussian {:.4} ± {:.3}, e^3 = {exact:.4}, bias band {bias:.3}, N = {n}",
            r.mean_binomial[n], r.stderr_binomial, r.mean_gaussian[n], r.stderr_gaussian
        ),
    }
}

fn heston_config() -> EnsembleConfig {
    EnsembleConfig {
        paths: 100,
        seed: SEED,
        t0: 0.0,
        t_end: 1.0,
        m: 8,
        m_start: 4,
        model: ModelSpec::Heston(HestonParams::default()),
        scheme: Scheme::new(SchemeKind::HestonFullTruncation),
        sampler: AreaSampler::NONE,
        y0: Some(vec![1.0, 0.09]),
        reference_scheme: None,
    }
}

fn criterion_10() -> Outcome {
    let r = strong_error_study(&heston_config(), 0).unwrap();
    let decreasing = r.levels.windows(2).all(|w| w[1].rms_error < w[0].rms_error);
    let finite = r.excluded == 0 && r.levels.iter().all(|l| l.rms_error.is_finite());
    Outcome {
        passed: decreasing && finite,
        detail: format!(
            "errors [{}], strictly decreasing: {decreasing}, excluded paths {}",
            errors(&r),
            r.excluded
        ),
    }
}

fn numeric_fingerprint(r: &ErrorReport) -> Vec<u64> {
    let mut v: Vec<u64> = r
        .levels
        .iter()
        .flat_map(|l| [l.h.to_bits(), l.rms_error.to_bits(), l.stderr.to_bits()])
        .collect();
    v.extend([r.fit.slope.to_bits(), r.fit.intercept.to_bits(), r.fit.residual.to_bits()]);
    v
}

fn criterion_11() -> Outcome {
    let mut same = true;
    let mut checked = Vec::new();
    let runs = [
        ("em", gbm_config(SchemeKind::EulerMaruyama)),
        ("heston", heston_config()),
        (
            "bilinear-cg",
            EnsembleConfig {
                paths: 200,
                m: 7,
                ..bilinear_config(SchemeKind::CastellGainesOne)
            },
        ),
    ];
    for (name, cfg) in runs {
        let a = numeric_fingerprint(&strong_error_study(&cfg, 1).unwrap());
        let b = numeric_fingerprint(&strong_error_study(&cfg, 4).unwrap());
        same &= a == b;
        checked.push(name);
    }
    let ws = WeakStrongConfig {
        paths: 2000,
        ..WeakStrongConfig::default()
    };
    let a = weak_vs_strong_study(&ws, 1).unwrap();
    let b = weak_vs_strong_study(&ws, 4).unwrap();
    same &= a == b;
    checked.push("weak-strong");
    let cfg = EnsembleConfig {
        paths: 2000,
        m: 6,
        ..gbm_config(SchemeKind::Milstein)
    };
    let a = estimate_expectation(&cfg, &|y| y[0], 1).unwrap();
    let b = estimate_expectation(&cfg, &|y| y[0], 4).unwrap();
    same &= a.mean.to_bits() == b.mean.to_bits() && a.stderr.to_bits() == b.stderr.to_bits();
    checked.push("expectation");
    Outcome {
        passed: same,
        detail: format!("1 vs 4 workers bit-identical for {}: {same}", checked.join(", ")),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("EM strong order on GBM", criterion_1),
        ("Milstein strong order on GBM", criterion_2),
        ("Castell-Gaines orders and accuracy", criterion_3),
        ("conditional-area RMS law h/sqrt(Q)", criterion_4),
        ("Levy samplers vs density oracle", criterion_5),
        ("word identities and MC iterated integrals", criterion_6),
        ("E J_ii = h/2", criterion_7),
        ("Feynman-Kac agreement", criterion_8),
        ("weak vs strong experiment", criterion_9),
        ("Heston full-truncation study", criterion_10),
        ("determinism across worker counts", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let verdict = if out.passed { "PASS" } else { "FAIL" };
        if !out.passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {verdict}: {name} — {} [{:.1}s]",
            k + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
