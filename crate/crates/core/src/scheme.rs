//! One-step strong integrators and path integration over a coarse view.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::{directional_derivative, lie_bracket, stratonovich_drift};
use crate::error::{invalid, Result, SdeError};
use crate::levy::{conditional_j, j_diagonal, j_pair_from_area, AreaSamplerKind};
use crate::model::{HestonParams, SdeModel};
use crate::wiener::{pair_count, pair_index, CoarseView};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EulerMaruyama,
    Milstein,
    CastellGainesHalf,
    CastellGainesOne,
    HestonFullTruncation,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::EulerMaruyama,
        SchemeKind::Milstein,
        SchemeKind::CastellGainesHalf,
        SchemeKind::CastellGainesOne,
        SchemeKind::HestonFullTruncation,
    ];

    /// Whether the scheme consumes Lévy areas (for non-commuting noise).
    pub fn uses_areas(self) -> bool {
        matches!(self, SchemeKind::Milstein | SchemeKind::CastellGainesOne)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::EulerMaruyama => "euler_maruyama",
            SchemeKind::Milstein => "milstein",
            SchemeKind::CastellGainesHalf => "castell_gaines_half",
            SchemeKind::CastellGainesOne => "castell_gaines_one",
            SchemeKind::HestonFullTruncation => "heston_full_truncation",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = SdeError;

    fn from_str(s: &str) -> Result<SchemeKind> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "em" | "euler" | "euler_maruyama" => SchemeKind::EulerMaruyama,
            "milstein" => SchemeKind::Milstein,
            "cg_half" | "castell_gaines_half" => SchemeKind::CastellGainesHalf,
            "cg_one" | "cg" | "castell_gaines_one" => SchemeKind::CastellGainesOne,
            "heston_ft" | "ft" | "full_truncation" | "heston_full_truncation" => {
                SchemeKind::HestonFullTruncation
            }
            _ => {
                return Err(invalid(
                    "scheme",
                    format!("unknown scheme {s:?} (em, milstein, cg-half, cg-one, heston-ft)"),
                ))
            }
        })
    }
}

/// A scheme plus its sub-solver setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    /// RK4 sub-steps for the Castell–Gaines flow
    pub ode_substeps: u32,
}

impl Scheme {
    pub const DEFAULT_ODE_SUBSTEPS: u32 = 2;

    pub fn new(kind: SchemeKind) -> Scheme {
        Scheme {
            kind,
            ode_substeps: Self::DEFAULT_ODE_SUBSTEPS,
        }
    }

    pub fn with_substeps(kind: SchemeKind, ode_substeps: u32) -> Result<Scheme> {
        if ode_substeps == 0 {
            return Err(invalid("ode_substeps", "must be at least 1"));
        }
        Ok(Scheme { kind, ode_substeps })
    }

    /// Rejects scheme/model pairs that cannot run.
    pub fn check_model(&self, model: &dyn SdeModel) -> Result<()> {
        if self.kind == SchemeKind::HestonFullTruncation && model.heston_params().is_none() {
            return Err(SdeError::Config(format!(
                "scheme heston_full_truncation needs the heston model, got {}",
                model.name()
            )));
        }
        if self.ode_substeps == 0 {
            return Err(invalid("ode_substeps", "must be at least 1"));
        }
        Ok(())
    }

    /// True when this model/scheme pair needs Lévy areas to reach its order.
    pub fn needs_areas(&self, model: &dyn SdeModel) -> bool {
        self.kind.uses_areas() && model.noise_dim() >= 2 && !model.commutative_noise()
    }
}

/// Inputs to one step.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<'a> {
    pub h: f64,
    pub dw: &'a [f64],
    /// `A_ij` for `i > j`, at `pair_index(i, j)`
    pub areas: Option<&'a [f64]>,
}

impl<'a> StepInputs<'a> {
    pub fn new(h: f64, dw: &'a [f64]) -> StepInputs<'a> {
        StepInputs { h, dw, areas: None }
    }

    pub fn with_areas(h: f64, dw: &'a [f64], areas: &'a [f64]) -> StepInputs<'a> {
        StepInputs {
            h,
            dw,
            areas: Some(areas),
        }
    }

    fn area(&self, i: usize, j: usize) -> f64 {
        self.areas.map_or(0.0, |a| a[pair_index(i, j)])
    }
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

fn missing_areas(model: &dyn SdeModel) -> SdeError {
    SdeError::Config(format!(
        "model {} has non-commuting noise; this scheme needs Lévy areas (set the area sampler to kl, rw or cond)",
        model.name()
    ))
}

/// `y + h V0~(y) + sum_i dW_i V_i(y)`.
pub fn em_step(model: &dyn SdeModel, y: &[f64], inp: &StepInputs<'_>) -> Vec<f64> {
    let mut out = y.to_vec();
    axpy(&mut out, inp.h, &model.drift_ito(y));
    for (i, &dw) in inp.dw.iter().enumerate() {
        axpy(&mut out, dw, &model.diffusion(i, y));
    }
    out
}

/// Stratonovich Milstein: `y + h V0 + sum dW_i V_i + sum_{i,j} J_ij dV_j[V_i]`.
pub fn milstein_step(model: &dyn SdeModel, y: &[f64], inp: &StepInputs<'_>) -> Result<Vec<f64>> {
    let d = model.noise_dim();
    if d >= 2 && inp.areas.is_none() && !model.commutative_noise() {
        return Err(missing_areas(model));
    }
    let mut out = y.to_vec();
    axpy(&mut out, inp.h, &stratonovich_drift(model, y));
    let fields: Vec<Vec<f64>> = (0..d).map(|i| model.diffusion(i, y)).collect();
    for (i, v) in fields.iter().enumerate() {
        axpy(&mut out, inp.dw[i], v);
    }
    for i in 0..d {
        for j in 0..d {
            let jij = match i.cmp(&j) {
                std::cmp::Ordering::Equal => j_diagonal(inp.dw[i]),
                std::cmp::Ordering::Greater => {
                    j_pair_from_area(inp.dw[i], inp.dw[j], inp.area(i, j)).jij
                }
                std::cmp::Ordering::Less => {
                    j_pair_from_area(inp.dw[j], inp.dw[i], inp.area(j, i)).jji
                }
            };
            if jij != 0.0 {
                axpy(&mut out, jij, &directional_derivative(model, j, y, &fields[i]));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgOrder {
    Half,
    One,
}

/// Frozen field `h V0(u) + sum dW_i V_i(u) + sum_{i>j} A_ij [V_i, V_j](u)`.
fn frozen_field(model: &dyn SdeModel, u: &[f64], inp: &StepInputs<'_>, order: CgOrder) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    axpy(&mut out, inp.h, &stratonovich_drift(model, u));
    for (i, &dw) in inp.dw.iter().enumerate() {
        axpy(&mut out, dw, &model.diffusion(i, u));
    }
    if order == CgOrder::One && inp.areas.is_some() {
        for i in 1..inp.dw.len() {
            for j in 0..i {
                let a = inp.area(i, j);
                if a != 0.0 {
                    axpy(&mut out, a, &lie_bracket(model, i, j, u));
                }
            }
        }
    }
    out
}

/// Solves `u' = psi(u)` on `[0, 1]` with classical RK4 over `substeps` steps.
pub fn castell_gaines_step(
    model: &dyn SdeModel,
    y: &[f64],
    inp: &StepInputs<'_>,
    order: CgOrder,
    substeps: u32,
) -> Result<Vec<f64>> {
    if substeps == 0 {
        return Err(invalid("ode_substeps", "must be at least 1"));
    }
    if order == CgOrder::One
        && model.noise_dim() >= 2
        && inp.areas.is_none()
        && !model.commutative_noise()
    {
        return Err(missing_areas(model));
    }
    let dt = 1.0 / substeps as f64;
    let mut u = y.to_vec();
    let shifted = |u: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        u.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    for _ in 0..substeps {
        let k1 = frozen_field(model, &u, inp, order);
        let k2 = frozen_field(model, &shifted(&u, &k1, 0.5 * dt), inp, order);
        let k3 = frozen_field(model, &shifted(&u, &k2, 0.5 * dt), inp, order);
        let k4 = frozen_field(model, &shifted(&u, &k3, dt), inp, order);
        for (n, x) in u.iter_mut().enumerate() {
            *x += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
        }
    }
    Ok(u)
}

/// Full-truncation update of price and variance.
pub fn heston_ft_step(p: &HestonParams, s: f64, v: f64, h: f64, j1: f64, j2: f64) -> (f64, f64) {
    let vp = v.max(0.0);
    let root = vp.sqrt();
    let s_new = ((p.mu - vp / 2.0) * h + root * j1).exp() * s;
    let v_new = v
        + p.kappa * (p.theta - vp) * h
        + p.epsilon * (p.rho * j1 + (1.0 - p.rho * p.rho).sqrt() * j2) * root;
    (s_new, v_new)
}

/// Areas for coarse step `n`, from the view or from its fine sub-increments.
fn step_areas(
    view: &CoarseView<'_>,
    source: AreaSamplerKind,
    n: usize,
    out: &mut [f64],
) -> Result<()> {
    let d = view.dim();
    for i in 1..d {
        for j in 0..i {
            out[pair_index(i, j)] = match source {
                AreaSamplerKind::Cond => {
                    let si = view.sub_increments(i, n);
                    let sj = view.sub_increments(j, n);
                    conditional_j(si, sj) - 0.5 * view.increment(i, n) * view.increment(j, n)
                }
                _ => view
                    .area(i, j, n)
                    .ok_or_else(|| SdeError::Config(format!(
                        "area sampler {source} selected but the path bundle carries no areas"
                    )))?,
            };
        }
    }
    Ok(())
}

/// Integrates from `y0` (model coordinates) across every step of `view`,
/// calling `visit(n, y_n)` at each grid point including both ends. Returns
/// the terminal state.
pub fn integrate_with(
    model: &dyn SdeModel,
    scheme: &Scheme,
    view: &CoarseView<'_>,
    y0: &[f64],
    areas: AreaSamplerKind,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    scheme.check_model(model)?;
    if y0.len() != model.state_dim() {
        return Err(invalid(
            "y0",
            format!("expected {} components, got {}", model.state_dim(), y0.len()),
        ));
    }
    if view.dim() != model.noise_dim() {
        return Err(invalid(
            "paths",
            format!("model needs {} noise components, bundle has {}", model.noise_dim(), view.dim()),
        ));
    }
    let needs = scheme.needs_areas(model);
    if needs && areas == AreaSamplerKind::None {
        return Err(missing_areas(model));
    }
    let h = view.dt();
    let mut a = vec![0.0; pair_count(view.dim())];
    let mut y = y0.to_vec();
    let heston = model.heston_params().copied();
    // full truncation steps the price itself, not its logarithm
    let mut price = match (scheme.kind, heston) {
        (SchemeKind::HestonFullTruncation, Some(_)) => y[0].exp(),
        _ => 0.0,
    };
    visit(0, &y);
    for n in 0..view.n_steps() {
        let dw = view.step_increments(n);
        if needs {
            step_areas(view, areas, n, &mut a)?;
        }
        let inp = StepInputs {
            h,
            dw: &dw,
            areas: needs.then_some(a.as_slice()),
        };
        y = match scheme.kind {
            SchemeKind::EulerMaruyama => em_step(model, &y, &inp),
            SchemeKind::Milstein => milstein_step(model, &y, &inp)?,
            SchemeKind::CastellGainesHalf => {
                castell_gaines_step(model, &y, &inp, CgOrder::Half, scheme.ode_substeps)?
            }
            SchemeKind::CastellGainesOne => {
                castell_gaines_step(model, &y, &inp, CgOrder::One, scheme.ode_substeps)?
            }
            SchemeKind::HestonFullTruncation => {
                let p = heston.expect("checked by check_model");
                let (s, v) = heston_ft_step(&p, price, y[1], h, dw[0], dw[1]);
                price = s;
                vec![s.ln(), v]
            }
        };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SdeError::NonFinite { step: n + 1 });
        }
        visit(n + 1, &y);
    }
    Ok(y)
}

/// States at every grid point of `view`, starting with `y0`.
pub fn integrate_path(
    model: &dyn SdeModel,
    scheme: &Scheme,
    view: &CoarseView<'_>,
    y0: &[f64],
    areas: AreaSamplerKind,
) -> Result<Vec<Vec<f64>>> {
    let mut traj = Vec::with_capacity(view.n_steps() + 1);
    integrate_with(model, scheme, view, y0, areas, |_, y| traj.push(y.to_vec()))?;
    Ok(traj)
}
