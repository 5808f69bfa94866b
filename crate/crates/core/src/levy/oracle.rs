//! Conditional law of the Lévy area: characteristic function and its
//! numerical inversion to a density and distribution function.

use std::f64::consts::PI;

use super::LevyContext;
use crate::error::{Result, SdeError};

/// `|phi(xi)|` below this is treated as zero when truncating the transform.
const CF_CUTOFF: f64 = 1e-12;
const GL_ORDER: usize = 20;
const MAX_PANELS: usize = 1 << 16;

/// `z / sinh(z)`, stable for small and large `|z|`.
fn z_over_sinh(z: f64) -> f64 {
    let a = z.abs();
    if a < 1e-4 {
        1.0 - a * a / 6.0
    } else if a > 20.0 {
        2.0 * a * (-a).exp() / (1.0 - (-2.0 * a).exp())
    } else {
        a / a.sinh()
    }
}

/// `z coth(z) - 1`, stable near zero.
fn z_coth_minus_one(z: f64) -> f64 {
    let a = z.abs();
    if a < 1e-4 {
        a * a / 3.0
    } else {
        a / a.tanh() - 1.0
    }
}

/// Characteristic function of the logistic part, `(h xi / 2) / sinh(h xi / 2)`.
pub fn char_function_logistic(h: f64, xi: f64) -> f64 {
    z_over_sinh(0.5 * h * xi)
}

/// Characteristic function of the compound-Poisson part.
pub fn char_function_poisson(h: f64, a2: f64, xi: f64) -> f64 {
    (-0.5 * a2 * z_coth_minus_one(0.5 * h * xi)).exp()
}

/// Characteristic function of `A_12` given the step increments.
pub fn char_function(ctx: &LevyContext, xi: f64) -> f64 {
    char_function_logistic(ctx.h, xi) * char_function_poisson(ctx.h, ctx.a2, xi)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Inverse-Fourier oracle for the conditional Lévy-area law.
#[derive(Clone, Debug)]
pub struct DensityOracle {
    ctx: LevyContext,
    xi_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    tol: f64,
}

impl DensityOracle {
    pub fn new(ctx: LevyContext) -> DensityOracle {
        let mut xi_max = 1.0 / ctx.h;
        while char_function(&ctx, xi_max).abs() >= CF_CUTOFF {
            xi_max *= 1.25;
        }
        let (nodes, weights) = gauss_legendre(GL_ORDER);
        DensityOracle {
            ctx,
            xi_max,
            nodes,
            weights,
            tol: 1e-10,
        }
    }

    pub fn context(&self) -> &LevyContext {
        &self.ctx
    }

    /// Upper limit where the transform is truncated.
    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    fn panels(&self, n: usize, g: &dyn Fn(f64) -> f64) -> f64 {
        let width = self.xi_max / n as f64;
        let mut total = 0.0;
        for p in 0..n {
            let mid = (p as f64 + 0.5) * width;
            let half = 0.5 * width;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * g(mid + half * x);
            }
            total += s * half;
        }
        total
    }

    fn integrate(&self, g: &dyn Fn(f64) -> f64, tol: f64) -> Result<f64> {
        let mut n = 16;
        let mut prev = self.panels(n, g);
        loop {
            n *= 2;
            let next = self.panels(n, g);
            let err = (next - prev).abs();
            if err <= tol {
                return Ok(next);
            }
            if n >= MAX_PANELS {
                return Err(SdeError::Quadrature {
                    achieved: err,
                    wanted: tol,
                });
            }
            prev = next;
        }
    }

    /// Density `(1/pi) * int_0^inf phi(xi) cos(x xi) d xi`.
    pub fn density(&self, x: f64) -> Result<f64> {
        let ctx = self.ctx;
        // density values scale like 1/h
        let tol = self.tol / ctx.h;
        let v = self.integrate(&|xi| char_function(&ctx, xi) * (x * xi).cos(), tol)?;
        Ok(v / PI)
    }

    /// Distribution function by the Gil-Pelaez formula for a symmetric law.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.5);
        }
        let ctx = self.ctx;
        let v = self.integrate(&|xi| char_function(&ctx, xi) * (x * xi).sin() / xi, self.tol)?;
        Ok(0.5 + v / PI)
    }

    /// Half-width beyond which each tail holds less than `1e-9`.
    pub fn support_half_width(&self) -> Result<f64> {
        let mut l = 6.0 * self.ctx.conditional_variance().sqrt();
        while 1.0 - self.cdf(l)? > 1e-9 {
            l *= 1.5;
        }
        Ok(l)
    }

    /// Tabulates the distribution function for fast repeated evaluation.
    pub fn cdf_table(&self, points: usize) -> Result<CdfTable> {
        let half = self.support_half_width()?;
        let n = points.max(3);
        let step = 2.0 * half / (n - 1) as f64;
        let values = (0..n)
            .map(|k| self.cdf(-half + k as f64 * step))
            .collect::<Result<Vec<f64>>>()?;
        Ok(CdfTable {
            lo: -half,
            step,
            values,
        })
    }
}

/// Piecewise-linear distribution function on a uniform grid.
#[derive(Clone, Debug)]
pub struct CdfTable {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl CdfTable {
    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let last = self.values.len() - 1;
        if pos >= last as f64 {
            return 1.0;
        }
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }
}
