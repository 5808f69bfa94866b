//! Ensemble drivers: expectations with standard errors, the matched-path
//! strong-error study across dyadic levels, order fitting, and the paired
//! binomial/Gaussian weak experiment.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Result, SdeError};
use crate::levy::{attach_bundle_areas, conditional_trial, AreaSampler, AreaSamplerKind, SamplerBudget};
use crate::model::{make_gbm, ModelSpec, Payoff, SdeModel};
use crate::rng::RngStream;
use crate::scheme::{em_step, integrate_with, Scheme, StepInputs};
use crate::stats::Moments;
use crate::wiener::{PathBundle, PathKind};

/// Substream tags; each path's main stream drives the Wiener increments.
const AREA_TAG: u64 = 0x4152_4541;
const BINOMIAL_TAG: u64 = 0x4249_4e4f;
const GAUSSIAN_TAG: u64 = 0x4741_5553;

/// Everything that determines an ensemble run's numeric output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub seed: u64,
    pub t0: f64,
    pub t_end: f64,
    /// finest step `(t_end - t0) / 2^m`
    pub m: u32,
    /// coarsest step `(t_end - t0) / 2^m_start`
    pub m_start: u32,
    pub model: ModelSpec,
    pub scheme: Scheme,
    pub sampler: AreaSampler,
    /// initial state in observed coordinates; model default when absent
    pub y0: Option<Vec<f64>>,
    /// scheme for the finest-level reference when no closed form exists;
    /// the studied scheme itself when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_scheme: Option<Scheme>,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(invalid("paths", "need at least one path"));
        }
        if !(self.t_end > self.t0) || !self.t0.is_finite() || !self.t_end.is_finite() {
            return Err(invalid("T", format!("interval [{}, {}] is empty", self.t0, self.t_end)));
        }
        if self.m_start > self.m {
            return Err(invalid("m_start", format!("{} exceeds m = {}", self.m_start, self.m)));
        }
        if self.m > 24 {
            return Err(invalid("m", format!("{} is beyond the supported 2^24 steps", self.m)));
        }
        let model = self.model.build()?;
        let y0 = self.initial_observed();
        if y0.len() != model.state_dim() {
            return Err(invalid(
                "y0",
                format!("expected {} components, got {}", model.state_dim(), y0.len()),
            ));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("y0", "must be finite"));
        }
        for scheme in self.schemes() {
            scheme.check_model(model.as_ref())?;
            if scheme.needs_areas(model.as_ref()) && self.sampler.kind == AreaSamplerKind::None {
                return Err(SdeError::Config(format!(
                    "scheme {} on model {} needs an area sampler (kl, rw or cond)",
                    scheme.kind,
                    model.name()
                )));
            }
        }
        Ok(())
    }

    /// The studied scheme and, when distinct, the reference scheme.
    pub fn schemes(&self) -> Vec<Scheme> {
        let mut out = vec![self.scheme];
        if let Some(r) = self.reference_scheme {
            if r != self.scheme {
                out.push(r);
            }
        }
        out
    }

    fn needs_areas(&self, model: &dyn SdeModel) -> bool {
        self.schemes().iter().any(|s| s.needs_areas(model))
    }

    pub fn initial_observed(&self) -> Vec<f64> {
        self.y0
            .clone()
            .unwrap_or_else(|| self.model.default_initial_state())
    }

    /// Number of levels `m - m_start + 1`.
    pub fn levels(&self) -> usize {
        (self.m - self.m_start + 1) as usize
    }

    pub fn h_min(&self) -> f64 {
        (self.t_end - self.t0) / 2f64.powi(self.m as i32)
    }

    /// Fine sub-steps per finest step: the conditional sampler needs a
    /// sub-grid of `Q(h_min)` points, the others none.
    pub fn refine(&self) -> usize {
        match self.sampler.kind {
            AreaSamplerKind::Cond => self.sampler.budget.resolve_linear(self.h_min()) as usize,
            _ => 1,
        }
    }
}

fn run_in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SdeError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Driving path for path index `p`, with areas attached when the run needs
/// them. Identical for every caller using the same config.
pub fn path_bundle(cfg: &EnsembleConfig, model: &dyn SdeModel, p: usize) -> Result<PathBundle> {
    let mut stream = RngStream::new(cfg.seed, p as u64);
    let n_fine = cfg.refine() << cfg.m;
    let mut bundle = PathBundle::generate(
        &mut stream,
        model.noise_dim(),
        cfg.t0,
        cfg.t_end,
        n_fine,
        PathKind::Gaussian,
    )?;
    if cfg.needs_areas(model)
        && matches!(cfg.sampler.kind, AreaSamplerKind::Kl | AreaSamplerKind::Rw)
    {
        attach_bundle_areas(&mut bundle, &cfg.sampler, &mut stream.substream(AREA_TAG))?;
    }
    Ok(bundle)
}

/// Trajectory of path `p` at the finest step, in observed coordinates.
pub fn path_trajectory(cfg: &EnsembleConfig, p: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let bundle = path_bundle(cfg, model.as_ref(), p)?;
    let view = bundle.coarsen(cfg.refine())?;
    let y0 = model.from_observed(&cfg.initial_observed());
    let mut states = Vec::with_capacity(view.n_steps() + 1);
    integrate_with(model.as_ref(), &cfg.scheme, &view, &y0, cfg.sampler.kind, |_, y| {
        states.push(model.observed(y))
    })?;
    let times = (0..=view.n_steps()).map(|n| view.time(n)).collect();
    Ok((times, states))
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    /// paths dropped for non-finite values
    pub excluded: usize,
}

fn check_excluded(excluded: usize, total: usize) -> Result<()> {
    if excluded * 100 > total {
        return Err(SdeError::TooManyNonFinite { excluded, total });
    }
    Ok(())
}

/// `(1/P) sum f(y_T)` over the ensemble at the finest step, with `f`
/// applied in observed coordinates.
pub fn estimate_expectation(
    cfg: &EnsembleConfig,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    threads: usize,
) -> Result<Estimate> {
    cfg.validate()?;
    if cfg.paths < 2 {
        return Err(invalid("paths", "need at least two paths for a standard error"));
    }
    let model = cfg.model.build()?;
    let model = model.as_ref();
    let y0 = model.from_observed(&cfg.initial_observed());
    let outcomes: Vec<Result<Option<f64>>> = run_in_pool(threads, || {
        (0..cfg.paths)
            .into_par_iter()
            .map(|p| {
                let bundle = path_bundle(cfg, model, p)?;
                let view = bundle.coarsen(cfg.refine())?;
                match integrate_with(model, &cfg.scheme, &view, &y0, cfg.sampler.kind, |_, _| {}) {
                    Ok(y) => {
                        let v = f(&model.observed(&y));
                        Ok(v.is_finite().then_some(v))
                    }
                    Err(SdeError::NonFinite { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    })?;
    let mut values = Vec::with_capacity(cfg.paths);
    for o in outcomes {
        if let Some(v) = o? {
            values.push(v);
        }
    }
    let excluded = cfg.paths - values.len();
    check_excluded(excluded, cfg.paths)?;
    estimate_from_values(&values, excluded)
}

/// Mean and standard error of precomputed per-path values.
pub fn estimate_from_values(values: &[f64], excluded: usize) -> Result<Estimate> {
    if values.len() < 2 {
        return Err(invalid("paths", "need at least two finite values"));
    }
    let m = Moments::from_slice(values);
    Ok(Estimate {
        mean: m.mean,
        stderr: m.std_error(),
        paths: values.len(),
        excluded,
    })
}

/// Least-squares line through `(log10 h, log10 e)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in log10 units
    pub residual: f64,
}

pub fn fit_order(levels: &[(f64, f64)]) -> Result<OrderFit> {
    if levels.len() < 2 {
        return Err(SdeError::Fit(format!("need at least 2 levels, got {}", levels.len())));
    }
    if let Some(&(h, e)) = levels.iter().find(|&&(h, e)| !(e > 0.0) || !(h > 0.0)) {
        return Err(SdeError::Fit(format!("non-positive point (h={h}, e={e}) cannot be logged")));
    }
    let xs: Vec<f64> = levels.iter().map(|&(h, _)| h.log10()).collect();
    let ys: Vec<f64> = levels.iter().map(|&(_, e)| e.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SdeError::Fit("all step sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// path-wise closed form
    Exact,
    /// the finest level of the studied scheme on the same path
    Finest,
    /// the finest level on the same path, integrated with another scheme
    FinestOther(crate::scheme::SchemeKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelError {
    pub h: f64,
    pub rms_error: f64,
    pub stderr: f64,
    /// wall-clock seconds spent integrating this level, summed over paths
    pub cpu_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// coarsest first
    pub levels: Vec<LevelError>,
    pub fit: OrderFit,
    pub reference: Reference,
    pub paths: usize,
    pub excluded: usize,
}

impl ErrorReport {
    /// Levels that enter the fit (the finest is dropped when it is the reference).
    pub fn fitted_levels(&self) -> &[LevelError] {
        match self.reference {
            Reference::Finest => &self.levels[..self.levels.len() - 1],
            _ => &self.levels,
        }
    }
}

struct PathErrors {
    sq_errors: Vec<f64>,
    seconds: Vec<f64>,
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Matched-path strong error at every level `h = T / 2^k`, `k = m_start..=m`.
pub fn strong_error_study(cfg: &EnsembleConfig, threads: usize) -> Result<ErrorReport> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let model = model.as_ref();
    let y0 = model.from_observed(&cfg.initial_observed());
    let levels = cfg.levels();
    let refine = cfg.refine();
    let span = cfg.t_end - cfg.t0;
    let reference = if model.exact_solution(&y0, span, &vec![0.0; model.noise_dim()]).is_some() {
        Reference::Exact
    } else {
        match cfg.reference_scheme {
            Some(r) if r != cfg.scheme => Reference::FinestOther(r.kind),
            _ => Reference::Finest,
        }
    };
    let run_path = |p: usize| -> Result<Option<PathErrors>> {
        let bundle = path_bundle(cfg, model, p)?;
        // finest level first so the reference is available for the rest
        let mut view = bundle.coarsen(refine)?;
        let mut finals = Vec::with_capacity(levels);
        let mut seconds = Vec::with_capacity(levels);
        for r in 0..levels {
            if r > 0 {
                view = view.coarsen(2)?;
            }
            let start = Instant::now();
            let y = match integrate_with(model, &cfg.scheme, &view, &y0, cfg.sampler.kind, |_, _| {}) {
                Ok(y) => y,
                Err(SdeError::NonFinite { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            seconds.push(start.elapsed().as_secs_f64());
            finals.push(model.observed(&y));
        }
        let target = match reference {
            Reference::FinestOther(_) => {
                let scheme = cfg.reference_scheme.expect("set for this reference");
                let view = bundle.coarsen(refine)?;
                match integrate_with(model, &scheme, &view, &y0, cfg.sampler.kind, |_, _| {}) {
                    Ok(y) => model.observed(&y),
                    Err(SdeError::NonFinite { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Reference::Exact => {
                let w: Vec<f64> = (0..model.noise_dim())
                    .map(|i| bundle.component(i).iter().sum())
                    .collect();
                let exact = model
                    .exact_solution(&y0, span, &w)
                    .expect("reference kind checked above");
                model.observed(&exact)
            }
            Reference::Finest => finals[0].clone(),
        };
        let sq_errors: Vec<f64> = finals.iter().map(|y| l2_distance(y, &target).powi(2)).collect();
        if sq_errors.iter().any(|e| !e.is_finite()) {
            return Ok(None);
        }
        Ok(Some(PathErrors { sq_errors, seconds }))
    };
    let outcomes: Vec<Result<Option<PathErrors>>> =
        run_in_pool(threads, || (0..cfg.paths).into_par_iter().map(run_path).collect())?;

    // reduce in path order so the result is independent of scheduling
    let mut sq: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.paths); levels];
    let mut seconds = vec![0.0; levels];
    let mut excluded = 0;
    for o in outcomes {
        match o? {
            Some(pe) => {
                for r in 0..levels {
                    sq[r].push(pe.sq_errors[r]);
                    seconds[r] += pe.seconds[r];
                }
            }
            None => excluded += 1,
        }
    }
    check_excluded(excluded, cfg.paths)?;
    if sq[0].is_empty() {
        return Err(SdeError::TooManyNonFinite {
            excluded,
            total: cfg.paths,
        });
    }
    // internal index r is finest-first; report coarsest first
    let mut out = Vec::with_capacity(levels);
    for r in (0..levels).rev() {
        let m = Moments::from_slice(&sq[r]);
        let rms = m.mean.sqrt();
        // delta method on sqrt of the mean square
        let stderr = if rms > 0.0 { m.std_error() / (2.0 * rms) } else { 0.0 };
        out.push(LevelError {
            h: cfg.h_min() * (1u64 << r) as f64,
            rms_error: rms,
            stderr: if stderr.is_finite() { stderr } else { 0.0 },
            cpu_seconds: seconds[r],
        });
    }
    let fit_points: Vec<(f64, f64)> = match reference {
        Reference::Finest => out[..levels - 1].iter().map(|l| (l.h, l.rms_error)).collect(),
        _ => out.iter().map(|l| (l.h, l.rms_error)).collect(),
    };
    let fit = fit_order(&fit_points)?;
    Ok(ErrorReport {
        levels: out,
        fit,
        reference,
        paths: cfg.paths,
        excluded,
    })
}

/// Paired binomial/Gaussian Euler–Maruyama experiment on scalar GBM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakStrongConfig {
    pub a: f64,
    pub b: f64,
    pub y0: f64,
    pub t_end: f64,
    pub h: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for WeakStrongConfig {
    fn default() -> Self {
        WeakStrongConfig {
            a: 3.0,
            b: 1.4,
            y0: 1.0,
            t_end: 1.0,
            h: 0.05,
            paths: 10,
            seed: 42,
        }
    }
}

impl WeakStrongConfig {
    /// `N = T / h`, required to be an integer.
    pub fn steps(&self) -> Result<usize> {
        require_positive("h", self.h)?;
        require_positive("T", self.t_end)?;
        let n = (self.t_end / self.h).round();
        if n < 1.0 || ((n * self.h) - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(invalid("h", format!("T = {} is not a whole number of steps {}", self.t_end, self.h)));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakStrongReport {
    pub times: Vec<f64>,
    /// `[step][path]`, `N + 1` rows of `P`
    pub binomial: Vec<Vec<f64>>,
    pub gaussian: Vec<Vec<f64>>,
    pub mean_binomial: Vec<f64>,
    pub mean_gaussian: Vec<f64>,
    pub analytic: Vec<f64>,
    /// standard errors of the two means at `T`
    pub stderr_binomial: f64,
    pub stderr_gaussian: f64,
}

fn em_run(model: &dyn SdeModel, y0: f64, h: f64, n: usize, stream: &mut RngStream, kind: PathKind) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    let mut y = y0;
    out.push(y);
    for _ in 0..n {
        let dw = match kind {
            PathKind::Gaussian => stream.wiener_increment(h)?,
            PathKind::Binomial => stream.binomial_increment(h)?,
        };
        y = em_step(model, &[y], &StepInputs::new(h, &[dw]))[0];
        out.push(y);
    }
    Ok(out)
}

/// Runs the same Euler–Maruyama loop on binomial and on Gaussian increments.
pub fn weak_vs_strong_study(cfg: &WeakStrongConfig, threads: usize) -> Result<WeakStrongReport> {
    let n = cfg.steps()?;
    if cfg.paths == 0 {
        return Err(invalid("paths", "need at least one path"));
    }
    let model = make_gbm(cfg.a, cfg.b)?;
    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = run_in_pool(threads, || {
        (0..cfg.paths)
            .into_par_iter()
            .map(|p| {
                let base = RngStream::new(cfg.seed, p as u64);
                let bin = em_run(&model, cfg.y0, cfg.h, n, &mut base.substream(BINOMIAL_TAG), PathKind::Binomial)?;
                let gau = em_run(&model, cfg.y0, cfg.h, n, &mut base.substream(GAUSSIAN_TAG), PathKind::Gaussian)?;
                Ok((bin, gau))
            })
            .collect()
    })?;
    let mut binomial = vec![Vec::with_capacity(cfg.paths); n + 1];
    let mut gaussian = vec![Vec::with_capacity(cfg.paths); n + 1];
    for run in runs {
        let (bin, gau) = run?;
        for k in 0..=n {
            binomial[k].push(bin[k]);
            gaussian[k].push(gau[k]);
        }
    }
    let mean = |rows: &[Vec<f64>]| -> Vec<f64> {
        rows.iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    };
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * cfg.h).collect();
    let analytic = times
        .iter()
        .map(|&t| model.exact_expectation(&[cfg.y0], t, Payoff::Id).unwrap_or(f64::NAN))
        .collect();
    let se = |row: &[f64]| if row.len() > 1 { Moments::from_slice(row).std_error() } else { 0.0 };
    Ok(WeakStrongReport {
        mean_binomial: mean(&binomial),
        mean_gaussian: mean(&gaussian),
        stderr_binomial: se(&binomial[n]),
        stderr_gaussian: se(&gaussian[n]),
        times,
        binomial,
        gaussian,
        analytic,
    })
}

/// RMS of `J_12 - J_12_hat` for the conditional approximation at `(h, Q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRms {
    pub h: f64,
    pub q: u32,
    pub trials: usize,
    pub rms: f64,
    pub stderr: f64,
}

pub fn conditional_area_rms(h: f64, q: u32, trials: usize, seed: u64, threads: usize) -> Result<ConditionalRms> {
    if trials < 2 {
        return Err(invalid("trials", "need at least two"));
    }
    // sub-interval areas are tiny; a short RW series with its Normal tail is ample
    let budget = SamplerBudget::Fixed(16);
    let sq: Vec<Result<f64>> = run_in_pool(threads, || {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut s = RngStream::new(seed, t as u64);
                let (j, jhat) = conditional_trial(&mut s, h, q, budget)?;
                Ok((j - jhat).powi(2))
            })
            .collect()
    })?;
    let sq = sq.into_iter().collect::<Result<Vec<f64>>>()?;
    let m = Moments::from_slice(&sq);
    let rms = m.mean.sqrt();
    Ok(ConditionalRms {
        h,
        q,
        trials,
        rms,
        stderr: m.std_error() / (2.0 * rms),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::SamplerBudget;
    use crate::model::HestonParams;
    use crate::scheme::SchemeKind;
    use approx::assert_relative_eq;

    fn gbm_cfg(kind: SchemeKind, paths: usize) -> EnsembleConfig {
        EnsembleConfig {
            paths,
            seed: 42,
            t0: 0.0,
            t_end: 1.0,
            m: 8,
            m_start: 4,
            model: ModelSpec::Gbm { a: 3.0, b: 1.4 },
            scheme: Scheme::new(kind),
            sampler: AreaSampler::NONE,
            y0: None,
            reference_scheme: None,
        }
    }

    #[test]
    fn fit_order_examples() {
        let f = fit_order(&[(0.1, 0.01), (0.05, 0.005)]).unwrap();
        assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
        let pts: Vec<(f64, f64)> = (0..6).map(|k| {
            let h = 0.5f64.powi(k);
            (h, 3.0 * h.sqrt())
        }).collect();
        let f = fit_order(&pts).unwrap();
        assert_relative_eq!(f.slope, 0.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3f64.log10(), epsilon = 1e-12);
        assert!(f.residual < 1e-12);
        assert!(fit_order(&[(0.1, 0.01)]).is_err());
        assert!(fit_order(&[(0.1, 0.0), (0.05, 0.1)]).is_err());
    }

    #[test]
    fn constant_values_have_zero_stderr() {
        let e = estimate_from_values(&[2.5; 10], 0).unwrap();
        assert_eq!((e.mean, e.stderr), (2.5, 0.0));
        let e = estimate_from_values(&[0.0, 2.0], 0).unwrap();
        assert_relative_eq!(e.stderr, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = gbm_cfg(SchemeKind::EulerMaruyama, 0);
        assert!(c.validate().is_err());
        c.paths = 1;
        c.m_start = 9;
        assert!(c.validate().is_err());
        c.m_start = 4;
        c.scheme = Scheme::new(SchemeKind::HestonFullTruncation);
        assert!(c.validate().is_err());
        let mut c = gbm_cfg(SchemeKind::Milstein, 2);
        c.model = ModelSpec::Linear2d;
        assert!(matches!(c.validate(), Err(SdeError::Config(_))));
        c.sampler = AreaSampler::new(AreaSamplerKind::Kl, SamplerBudget::Auto);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn em_expectation_near_closed_form() {
        // h = 2^-5: weak bias of EM on this GBM is a few percent
        let mut c = gbm_cfg(SchemeKind::EulerMaruyama, 4000);
        c.m = 5;
        let e = estimate_expectation(&c, &|y| y[0], 2).unwrap();
        let exact = 3f64.exp();
        let bias = exact * 0.15;
        assert!((e.mean - exact).abs() < 4.0 * e.stderr + bias, "{e:?}");
        assert_eq!(e.excluded, 0);
    }

    #[test]
    fn strong_study_is_thread_invariant() {
        let c = gbm_cfg(SchemeKind::Milstein, 64);
        let a = strong_error_study(&c, 1).unwrap();
        let b = strong_error_study(&c, 3).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert_eq!(x.rms_error.to_bits(), y.rms_error.to_bits());
            assert_eq!(x.stderr.to_bits(), y.stderr.to_bits());
        }
        assert_eq!(a.fit, b.fit);
        assert_eq!(a.reference, Reference::Exact);
        assert_eq!(a.levels.len(), 5);
        assert_relative_eq!(a.levels[0].h, 1.0 / 16.0);
        assert_relative_eq!(a.levels[4].h, 1.0 / 256.0);
    }

    #[test]
    fn heston_uses_finest_reference() {
        let c = EnsembleConfig {
            model: ModelSpec::Heston(HestonParams::default()),
            scheme: Scheme::new(SchemeKind::HestonFullTruncation),
            m: 6,
            ..gbm_cfg(SchemeKind::EulerMaruyama, 20)
        };
        let r = strong_error_study(&c, 2).unwrap();
        assert_eq!(r.reference, Reference::Finest);
        assert_eq!(r.levels.last().unwrap().rms_error, 0.0);
        assert_eq!(r.fitted_levels().len(), 2);
    }

    #[test]
    fn other_scheme_reference_keeps_finest_row() {
        let c = EnsembleConfig {
            model: ModelSpec::Linear2d,
            scheme: Scheme::new(SchemeKind::CastellGainesHalf),
            reference_scheme: Some(Scheme::new(SchemeKind::CastellGainesOne)),
            sampler: AreaSampler::new(AreaSamplerKind::Kl, SamplerBudget::Auto),
            m: 6,
            ..gbm_cfg(SchemeKind::EulerMaruyama, 20)
        };
        let r = strong_error_study(&c, 2).unwrap();
        assert_eq!(r.reference, Reference::FinestOther(SchemeKind::CastellGainesOne));
        assert!(r.levels.last().unwrap().rms_error > 0.0);
        assert_eq!(r.fitted_levels().len(), 3);
        let mut bad = c.clone();
        bad.sampler = AreaSampler::NONE;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trajectory_starts_at_observed_initial_state() {
        let c = EnsembleConfig {
            model: ModelSpec::Heston(HestonParams::default()),
            scheme: Scheme::new(SchemeKind::HestonFullTruncation),
            m: 4,
            ..gbm_cfg(SchemeKind::EulerMaruyama, 1)
        };
        let (t, s) = path_trajectory(&c, 0).unwrap();
        assert_eq!(t.len(), 17);
        assert_relative_eq!(s[0][0], 1.0, epsilon = 1e-15);
        assert_eq!(s[0][1], 0.09);
        assert_eq!(t[16], 1.0);
    }

    #[test]
    fn weak_strong_shapes() {
        let cfg = WeakStrongConfig::default();
        assert_eq!(cfg.steps().unwrap(), 20);
        let r = weak_vs_strong_study(&cfg, 1).unwrap();
        assert_eq!(r.binomial.len(), 21);
        assert_eq!(r.gaussian.len(), 21);
        assert!(r.binomial.iter().chain(&r.gaussian).all(|row| row.len() == 10));
        assert_eq!(r.analytic[0], 1.0);
        assert_relative_eq!(r.analytic[20], 3f64.exp(), max_relative = 1e-14);
        let bad = WeakStrongConfig { h: 0.3, ..cfg };
        assert!(bad.steps().is_err());
    }

    #[test]
    fn conditional_rms_is_h_over_sqrt_2q() {
        let r = conditional_area_rms(0.01, 25, 4000, 9, 2).unwrap();
        let want = 0.01 / (2.0f64 * 25.0).sqrt();
        assert!((r.rms / want - 1.0).abs() < 0.05, "{r:?}");
    }
}
