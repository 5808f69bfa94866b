//! Feynman–Kac cross-check in one dimension: an explicit finite-difference
//! solve of `u_t = L u`, `u(0, y) = f(y)`, against Monte-Carlo `E f(y_t)`.

use serde::{Deserialize, Serialize};

use crate::algebra::directional_derivative;
use crate::error::{invalid, require_positive, Result, SdeError};
use crate::mc::{estimate_expectation, EnsembleConfig, Estimate};
use crate::model::{ModelSpec, Payoff, SdeModel};

/// Safety factor on the explicit stability limits.
pub const SAFETY: f64 = 0.4;

/// Coefficients of `L = mu(y) d/dy + sigma2(y) d^2/dy^2` for a scalar model.
#[derive(Debug)]
pub struct Generator<'a> {
    model: &'a dyn SdeModel,
}

pub fn build_generator(model: &dyn SdeModel) -> Result<Generator<'_>> {
    if model.state_dim() != 1 {
        return Err(SdeError::Unsupported(format!(
            "finite-difference generator for {}-dimensional state (only scalar models)",
            model.state_dim()
        )));
    }
    Ok(Generator { model })
}

impl Generator<'_> {
    /// Itô drift `V0~(y)`.
    pub fn first_order(&self, y: f64) -> f64 {
        self.model.drift_ito(&[y])[0]
    }

    /// `(1/2) sum_i V_i(y)^2`.
    pub fn second_order(&self, y: f64) -> f64 {
        0.5 * (0..self.model.noise_dim())
            .map(|i| self.model.diffusion(i, &[y])[0].powi(2))
            .sum::<f64>()
    }

    /// First-order coefficient of `V0 + (1/2) sum V_i^2` expanded as
    /// operators: `V0(y) + (1/2) sum_i V_i'(y) V_i(y)`. `None` when the
    /// model does not supply its Stratonovich drift independently.
    pub fn first_order_from_stratonovich(&self, y: f64) -> Option<f64> {
        let v0 = self.model.drift_strat(&[y])?[0];
        let corr: f64 = (0..self.model.noise_dim())
            .map(|i| {
                let vi = self.model.diffusion(i, &[y]);
                directional_derivative(self.model, i, &[y], &vi)[0]
            })
            .sum();
        Some(v0 + 0.5 * corr)
    }

    /// Largest gap between the Itô and expanded Stratonovich first-order
    /// coefficients over `points`, relative to `1 + |Itô value|`.
    pub fn form_disagreement(&self, points: &[f64]) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for &y in points {
            let s = self.first_order_from_stratonovich(y)?;
            let i = self.first_order(y);
            worst = worst.max((s - i).abs() / (1.0 + i.abs()));
        }
        Some(worst)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkProblem {
    pub model: ModelSpec,
    pub payoff: Payoff,
    pub t: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    /// grid points including both boundaries
    pub n_y: usize,
    pub n_t: usize,
}

impl FkProblem {
    /// Domain covering six standard deviations of `y_t` around both `y0` and
    /// the mean, with the smallest stable step count.
    pub fn around(model: ModelSpec, payoff: Payoff, t: f64, y0: f64, n_y: usize) -> Result<FkProblem> {
        require_positive("t", t)?;
        if n_y < 5 {
            return Err(invalid("grid", format!("need at least 5 points, got {n_y}")));
        }
        let m = model.build()?;
        build_generator(m.as_ref())?;
        let (mean, sd) = match (
            m.exact_expectation(&[y0], t, Payoff::Id),
            m.exact_expectation(&[y0], t, Payoff::Square),
        ) {
            (Some(mean), Some(sq)) => (mean, (sq - mean * mean).max(0.0).sqrt()),
            _ => {
                let drift = m.drift_ito(&[y0])[0];
                let g = Generator { model: m.as_ref() };
                (y0 + drift * t, (2.0 * g.second_order(y0) * t).sqrt())
            }
        };
        let spread = 6.0 * sd.max(1e-3 * (1.0 + y0.abs()));
        let mut y_lo = y0.min(mean) - spread;
        let y_hi = y0.max(mean) + spread;
        if matches!(model, ModelSpec::Gbm { .. }) && y0 >= 0.0 {
            // the positive half-line is invariant
            y_lo = y_lo.max(0.0);
        }
        let mut p = FkProblem {
            model,
            payoff,
            t,
            y_lo,
            y_hi,
            n_y,
            n_t: 1,
        };
        p.n_t = p.required_steps()?;
        Ok(p)
    }

    pub fn dy(&self) -> f64 {
        (self.y_hi - self.y_lo) / (self.n_y - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dy = self.dy();
        (0..self.n_y).map(|k| self.y_lo + k as f64 * dy).collect()
    }

    /// Smallest `n_t` meeting both explicit limits with the safety factor.
    pub fn required_steps(&self) -> Result<usize> {
        let m = self.model.build()?;
        let g = build_generator(m.as_ref())?;
        let dy = self.dy();
        let mut max_diff: f64 = 0.0;
        let mut max_drift: f64 = 0.0;
        for y in self.grid() {
            max_diff = max_diff.max(g.second_order(y));
            max_drift = max_drift.max(g.first_order(y).abs());
        }
        let mut dt_max = f64::INFINITY;
        if max_diff > 0.0 {
            dt_max = dt_max.min(SAFETY * dy * dy / (2.0 * max_diff));
        }
        if max_drift > 0.0 {
            dt_max = dt_max.min(SAFETY * dy / max_drift);
        }
        Ok(if dt_max.is_finite() {
            (self.t / dt_max).ceil().max(1.0) as usize
        } else {
            1
        })
    }

    fn validate(&self) -> Result<()> {
        require_positive("t", self.t)?;
        if self.n_y < 5 {
            return Err(invalid("grid", format!("need at least 5 points, got {}", self.n_y)));
        }
        if !(self.y_hi > self.y_lo) {
            return Err(invalid("domain", format!("[{}, {}] is empty", self.y_lo, self.y_hi)));
        }
        if self.n_t == 0 {
            return Err(invalid("n_t", "need at least one time step"));
        }
        let need = self.required_steps()?;
        if self.n_t < need {
            return Err(SdeError::Config(format!(
                "explicit scheme unstable with n_t = {}; need n_t >= {need}",
                self.n_t
            )));
        }
        Ok(())
    }
}

/// `u(t, .)` on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkSolution {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl FkSolution {
    /// Linear interpolation; `None` outside the grid.
    pub fn at(&self, y: f64) -> Option<f64> {
        let (lo, hi) = (self.grid[0], *self.grid.last()?);
        if !(lo..=hi).contains(&y) {
            return None;
        }
        let dy = self.grid[1] - lo;
        let k = (((y - lo) / dy).floor() as usize).min(self.grid.len() - 2);
        let w = (y - self.grid[k]) / dy;
        Some((1.0 - w) * self.values[k] + w * self.values[k + 1])
    }
}

/// Central differences in space (method of lines) advanced by explicit
/// classical RK4 in time; boundary rates are extrapolated quadratically from
/// the interior, which is exact for quadratic `u`.
pub fn solve_pde(problem: &FkProblem) -> Result<FkSolution> {
    problem.validate()?;
    let m = problem.model.build()?;
    let g = build_generator(m.as_ref())?;
    let grid = problem.grid();
    let dy = problem.dy();
    let dt = problem.t / problem.n_t as f64;
    let n = grid.len();
    // per-node weights of (u[k-1], u[k], u[k+1]) in L u
    let weights: Vec<[f64; 3]> = grid
        .iter()
        .map(|&y| {
            let mu = g.first_order(y) / (2.0 * dy);
            let d = g.second_order(y) / (dy * dy);
            [d - mu, -2.0 * d, d + mu]
        })
        .collect();
    let apply = |u: &[f64], out: &mut [f64]| {
        for k in 1..n - 1 {
            let [a, b, c] = weights[k];
            out[k] = a * u[k - 1] + b * u[k] + c * u[k + 1];
        }
        out[0] = 3.0 * out[1] - 3.0 * out[2] + out[3];
        out[n - 1] = 3.0 * out[n - 2] - 3.0 * out[n - 3] + out[n - 4];
    };
    let mut u: Vec<f64> = grid.iter().map(|&y| problem.payoff.eval(y)).collect();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    for _ in 0..problem.n_t {
        apply(&u, &mut k1);
        stage.iter_mut().zip(&u).zip(&k1).for_each(|((s, u), k)| *s = u + 0.5 * dt * k);
        apply(&stage, &mut k2);
        stage.iter_mut().zip(&u).zip(&k2).for_each(|((s, u), k)| *s = u + 0.5 * dt * k);
        apply(&stage, &mut k3);
        stage.iter_mut().zip(&u).zip(&k3).for_each(|((s, u), k)| *s = u + dt * k);
        apply(&stage, &mut k4);
        for j in 0..n {
            u[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(SdeError::NonFinite { step: problem.n_t });
    }
    Ok(FkSolution { grid, values: u })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FkReport {
    pub y0: f64,
    pub pde: f64,
    /// `|u_{n_y} - u_{n_y/2}|` at `y0`
    pub pde_error: f64,
    pub mc: Estimate,
    pub exact: Option<f64>,
    pub difference: f64,
    /// `4 sqrt(stderr^2 + pde_error^2)`
    pub tolerance: f64,
    pub passed: bool,
}

/// Solves the PDE on `problem` and a half-resolution copy, runs the
/// ensemble, and compares at `y0`.
pub fn cross_validate(problem: &FkProblem, y0: f64, mc: &EnsembleConfig, threads: usize) -> Result<FkReport> {
    let model = problem.model.build()?;
    if mc.model != problem.model {
        return Err(invalid("model", "PDE and Monte-Carlo runs use different models"));
    }
    if (mc.t_end - mc.t0 - problem.t).abs() > 1e-12 * problem.t {
        return Err(invalid("t", "PDE horizon and Monte-Carlo interval differ"));
    }
    let fine = solve_pde(problem)?;
    let mut coarse_p = problem.clone();
    coarse_p.n_y = problem.n_y.div_ceil(2);
    coarse_p.n_t = coarse_p.required_steps()?.max(1);
    let coarse = solve_pde(&coarse_p)?;
    let pde = fine
        .at(y0)
        .ok_or_else(|| invalid("y0", format!("{y0} lies outside the PDE domain")))?;
    let pde_error = (pde - coarse.at(y0).unwrap_or(pde)).abs();
    let payoff = problem.payoff;
    let mut cfg = mc.clone();
    cfg.y0 = Some(vec![y0]);
    let est = estimate_expectation(&cfg, &move |y: &[f64]| payoff.eval(y[0]), threads)?;
    let difference = (pde - est.mean).abs();
    let tolerance = 4.0 * (est.stderr.powi(2) + pde_error.powi(2)).sqrt();
    Ok(FkReport {
        y0,
        pde,
        pde_error,
        mc: est,
        exact: model.exact_expectation(&[y0], problem.t, payoff),
        difference,
        tolerance,
        passed: difference < tolerance,
    })
}
