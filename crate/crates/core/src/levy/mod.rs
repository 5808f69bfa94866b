//! Lévy-area sampling for a pair of Wiener processes over one step,
//! conditioned on the step increments.
//!
//! Three samplers are provided, each with a truncation count `Q`:
//!
//! * [`sample_kl`]: truncated Karhunen–Loève (Fourier) series, error `O(h/sqrt(Q))`,
//!   auto budget `Q = ceil(1/h)`.
//! * [`sample_rw`]: logistic plus compound Poisson–Laplace representation with
//!   a Normal surrogate for the dropped tail, auto budget `Q = ceil(h^-1/2)`.
//! * [`sample_conditional`]: a `Q`-step sub-path and the left-point sum
//!   `J12_hat`, auto budget `Q = ceil(1/h)`.
//!
//! For `d > 2` noises each pair `i > j` is sampled independently; the joint
//! law across pairs is not reproduced.

mod oracle;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use oracle::{
    char_function, char_function_logistic, char_function_poisson, CdfTable, DensityOracle,
};

use crate::error::{invalid, require_positive, Result, SdeError};
use crate::rng::RngStream;
use crate::wiener::{pair_count, pair_index, PathBundle};

/// Step size and conditioning increments of one area sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevyContext {
    pub h: f64,
    pub dw1: f64,
    pub dw2: f64,
    /// `(dw1^2 + dw2^2) / h`
    pub a2: f64,
}

impl LevyContext {
    pub fn new(h: f64, dw1: f64, dw2: f64) -> Result<LevyContext> {
        require_positive("h", h)?;
        if !dw1.is_finite() || !dw2.is_finite() {
            return Err(invalid("dW", "increments must be finite"));
        }
        Ok(LevyContext {
            h,
            dw1,
            dw2,
            a2: (dw1 * dw1 + dw2 * dw2) / h,
        })
    }

    /// `Var(A_12 | dW) = (1 + a^2) h^2 / 12`.
    pub fn conditional_variance(&self) -> f64 {
        (1.0 + self.a2) * self.h * self.h / 12.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SamplerBudget {
    Auto,
    Fixed(u32),
}

impl SamplerBudget {
    fn resolve(self, auto: impl FnOnce() -> u32) -> u32 {
        match self {
            SamplerBudget::Auto => auto().max(1),
            SamplerBudget::Fixed(q) => q.max(1),
        }
    }

    /// `Q` for the series and conditional samplers (auto: `ceil(1/h)`).
    pub fn resolve_linear(self, h: f64) -> u32 {
        self.resolve(|| (1.0 / h).ceil() as u32)
    }

    /// `Q` for the Rydén–Wiktorsson sampler (auto: `ceil(h^-1/2)`).
    pub fn resolve_sqrt(self, h: f64) -> u32 {
        self.resolve(|| (1.0 / h.sqrt()).ceil() as u32)
    }
}

impl fmt::Display for SamplerBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerBudget::Auto => f.write_str("auto"),
            SamplerBudget::Fixed(q) => write!(f, "{q}"),
        }
    }
}

impl FromStr for SamplerBudget {
    type Err = SdeError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SamplerBudget::Auto);
        }
        match s.parse::<u32>() {
            Ok(q) if q >= 1 => Ok(SamplerBudget::Fixed(q)),
            _ => Err(invalid("Q", format!("expected `auto` or a positive integer, got {s:?}"))),
        }
    }
}

impl From<SamplerBudget> for String {
    fn from(b: SamplerBudget) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for SamplerBudget {
    type Error = SdeError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaSamplerKind {
    None,
    Kl,
    Rw,
    Cond,
}

impl fmt::Display for AreaSamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AreaSamplerKind::None => "none",
            AreaSamplerKind::Kl => "kl",
            AreaSamplerKind::Rw => "rw",
            AreaSamplerKind::Cond => "cond",
        })
    }
}

impl FromStr for AreaSamplerKind {
    type Err = SdeError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(AreaSamplerKind::None),
            "kl" => Ok(AreaSamplerKind::Kl),
            "rw" => Ok(AreaSamplerKind::Rw),
            "cond" => Ok(AreaSamplerKind::Cond),
            other => Err(invalid("sampler", format!("unknown area sampler {other:?}"))),
        }
    }
}

/// Which sampler produces areas for a scheme, and at what cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaSampler {
    pub kind: AreaSamplerKind,
    pub budget: SamplerBudget,
}

impl AreaSampler {
    pub const NONE: AreaSampler = AreaSampler {
        kind: AreaSamplerKind::None,
        budget: SamplerBudget::Auto,
    };

    pub fn new(kind: AreaSamplerKind, budget: SamplerBudget) -> AreaSampler {
        AreaSampler { kind, budget }
    }

    /// Draws one area at `ctx` with the configured method.
    pub fn sample(&self, stream: &mut RngStream, ctx: &LevyContext) -> Result<f64> {
        match self.kind {
            AreaSamplerKind::None => Err(SdeError::Config(
                "no area sampler configured; choose kl, rw or cond".into(),
            )),
            AreaSamplerKind::Kl => Ok(sample_kl(stream, ctx, self.budget)),
            AreaSamplerKind::Rw => sample_rw(stream, ctx, self.budget),
            AreaSamplerKind::Cond => {
                Ok(sample_conditional_bridge(stream, ctx, self.budget.resolve_linear(ctx.h)))
            }
        }
    }
}

/// Truncated Karhunen–Loève sum for explicit Normal draws `(U_k, V_k, X_k, Y_k)`, `k = 1..`.
pub fn kl_area(ctx: &LevyContext, normals: &[[f64; 4]]) -> f64 {
    let s = (2.0 / ctx.h).sqrt();
    let sum: f64 = normals
        .iter()
        .enumerate()
        .map(|(k, [u, v, x, y])| {
            let k = (k + 1) as f64;
            (u * (y - s * ctx.dw2) - v * (x - s * ctx.dw1)) / k
        })
        .sum();
    ctx.h / (2.0 * PI) * sum
}

pub fn sample_kl(stream: &mut RngStream, ctx: &LevyContext, budget: SamplerBudget) -> f64 {
    let q = budget.resolve_linear(ctx.h) as usize;
    let normals: Vec<[f64; 4]> = (0..q)
        .map(|_| [stream.normal(), stream.normal(), stream.normal(), stream.normal()])
        .collect();
    kl_area(ctx, &normals)
}

/// `sum_{k > q} 1/k^2`.
pub fn inverse_square_tail(q: u32) -> f64 {
    let head: f64 = (1..=q).map(|k| 1.0 / (k as f64 * k as f64)).sum();
    (PI * PI / 6.0 - head).max(0.0)
}

/// Variance of the compound-Poisson terms `k > q` before the `h/(2 pi)` scaling.
pub fn rw_tail_variance(a2: f64, q: u32) -> f64 {
    2.0 * a2 * inverse_square_tail(q)
}

pub fn sample_rw(stream: &mut RngStream, ctx: &LevyContext, budget: SamplerBudget) -> Result<f64> {
    let q = budget.resolve_sqrt(ctx.h);
    let u = stream.uniform_open();
    let logistic = (u / (1.0 - u)).ln();
    let mut compound = 0.0;
    for k in 1..=q {
        let n = stream.poisson(ctx.a2)?;
        let scale = 1.0 / k as f64;
        for _ in 0..n {
            compound += stream.laplace(scale)?;
        }
    }
    let tail = rw_tail_variance(ctx.a2, q).sqrt() * stream.normal();
    Ok(ctx.h / (2.0 * PI) * (logistic + compound + tail))
}

/// Left-point sum `sum_q (W^i_{tau_q} - W^i_{t_n}) dW^j(tau_q)` over a sub-path.
pub fn conditional_j(sub_i: &[f64], sub_j: &[f64]) -> f64 {
    let mut w_i = 0.0;
    let mut j = 0.0;
    for (&di, &dj) in sub_i.iter().zip(sub_j) {
        j += w_i * dj;
        w_i += di;
    }
    j
}

/// One draw of the conditional-expectation approximation on a fresh sub-path.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSample {
    pub dw1: f64,
    pub dw2: f64,
    pub j12: f64,
    pub sub1: Vec<f64>,
    pub sub2: Vec<f64>,
}

impl ConditionalSample {
    /// `A_12_hat = J_12_hat - dw1 dw2 / 2`.
    pub fn area(&self) -> f64 {
        self.j12 - 0.5 * self.dw1 * self.dw2
    }
}

pub fn sample_conditional(stream: &mut RngStream, h: f64, q: u32) -> Result<ConditionalSample> {
    require_positive("h", h)?;
    if q == 0 {
        return Err(invalid("Q", "must be at least 1"));
    }
    let root_dt = (h / q as f64).sqrt();
    let mut sub1 = Vec::with_capacity(q as usize);
    let mut sub2 = Vec::with_capacity(q as usize);
    for _ in 0..q {
        sub1.push(root_dt * stream.normal());
        sub2.push(root_dt * stream.normal());
    }
    Ok(ConditionalSample {
        dw1: sub1.iter().sum(),
        dw2: sub2.iter().sum(),
        j12: conditional_j(&sub1, &sub2),
        sub1,
        sub2,
    })
}

/// One trial of the conditional approximation together with the full
/// integral it approximates: `J_12 = J_12_hat + sum_q J_12(tau_q, tau_q+1)`,
/// each sub-interval term drawn as `dW1 dW2 / 2 + A` with `A` from the
/// Rydén–Wiktorsson sampler at `area_budget`. Returns `(J_12, J_12_hat)`.
pub fn conditional_trial(
    stream: &mut RngStream,
    h: f64,
    q: u32,
    area_budget: SamplerBudget,
) -> Result<(f64, f64)> {
    let c = sample_conditional(stream, h, q)?;
    let dt = h / q as f64;
    let mut residual = 0.0;
    for (&a, &b) in c.sub1.iter().zip(&c.sub2) {
        let ctx = LevyContext::new(dt, a, b)?;
        residual += 0.5 * a * b + sample_rw(stream, &ctx, area_budget)?;
    }
    Ok((c.j12 + residual, c.j12))
}

/// Conditional-expectation area on a discrete Brownian bridge pinned to the
/// increments in `ctx`.
pub fn sample_conditional_bridge(stream: &mut RngStream, ctx: &LevyContext, q: u32) -> f64 {
    let q = q.max(1) as usize;
    let root_dt = (ctx.h / q as f64).sqrt();
    let mut sub1: Vec<f64> = Vec::with_capacity(q);
    let mut sub2: Vec<f64> = Vec::with_capacity(q);
    for _ in 0..q {
        sub1.push(root_dt * stream.normal());
        sub2.push(root_dt * stream.normal());
    }
    let shift1 = (ctx.dw1 - sub1.iter().sum::<f64>()) / q as f64;
    let shift2 = (ctx.dw2 - sub2.iter().sum::<f64>()) / q as f64;
    sub1.iter_mut().for_each(|x| *x += shift1);
    sub2.iter_mut().for_each(|x| *x += shift2);
    conditional_j(&sub1, &sub2) - 0.5 * ctx.dw1 * ctx.dw2
}

/// The ordered pair of iterated integrals built from an area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JPair {
    pub jij: f64,
    pub jji: f64,
}

/// `J_ij = dWi dWj / 2 + A_ij`, `J_ji = dWi dWj - J_ij`.
pub fn j_pair_from_area(dwi: f64, dwj: f64, aij: f64) -> JPair {
    let jij = 0.5 * dwi * dwj + aij;
    JPair {
        jij,
        jji: dwi * dwj - jij,
    }
}

/// `J_ii = dWi^2 / 2`.
pub fn j_diagonal(dwi: f64) -> f64 {
    0.5 * dwi * dwi
}

/// Samples one area per fine step and pair with `sampler` and attaches them
/// to the bundle. Coarse views then combine them exactly (Chen's relation).
pub fn attach_bundle_areas(
    bundle: &mut PathBundle,
    sampler: &AreaSampler,
    stream: &mut RngStream,
) -> Result<()> {
    let d = bundle.dim();
    let n = bundle.n_fine();
    let h = bundle.dt_fine();
    let mut areas = vec![0.0; pair_count(d) * n];
    for step in 0..n {
        for i in 1..d {
            for j in 0..i {
                let ctx = LevyContext::new(h, bundle.component(i)[step], bundle.component(j)[step])?;
                areas[pair_index(i, j) * n + step] = sampler.sample(stream, &ctx)?;
            }
        }
    }
    bundle.set_areas(areas)
}
