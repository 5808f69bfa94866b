//! SDE models: `dy = V0~(y) dt + sum_i V_i(y) dW^i` (Itô form) with autonomous
//! vector fields, plus the concrete models used by the experiments.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Scalar observable `f` applied to the first state component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payoff {
    #[serde(alias = "identity")]
    Id,
    Square,
    Exp,
}

impl Payoff {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            Payoff::Id => y,
            Payoff::Square => y * y,
            Payoff::Exp => y.exp(),
        }
    }
}

impl std::str::FromStr for Payoff {
    type Err = crate::SdeError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "id" | "identity" => Ok(Payoff::Id),
            "square" => Ok(Payoff::Square),
            "exp" => Ok(Payoff::Exp),
            other => Err(invalid("f", format!("unknown payoff {other:?}"))),
        }
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Payoff::Id => "id",
            Payoff::Square => "square",
            Payoff::Exp => "exp",
        })
    }
}

/// An autonomous SDE with `noise_dim` diffusion fields, indexed `0..noise_dim`.
pub trait SdeModel: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;

    /// Itô drift `V0~(y)`.
    fn drift_ito(&self, y: &[f64]) -> Vec<f64>;

    /// Diffusion field `V_{i+1}(y)`.
    fn diffusion(&self, i: usize, y: &[f64]) -> Vec<f64>;

    /// Analytic directional derivative `dV_i(y)[v]`, when the model knows it.
    fn diffusion_derivative(&self, _i: usize, _y: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Stratonovich drift `V0(y)`, when supplied directly.
    fn drift_strat(&self, _y: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// True when all diffusion fields commute, so Lévy areas drop out.
    fn commutative_noise(&self) -> bool {
        self.noise_dim() <= 1
    }

    /// Path-wise solution at time `t` given the realised `W_t - W_0`.
    fn exact_solution(&self, _y0: &[f64], _t: f64, _w: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form `E f(y_t)` started from `y0`.
    fn exact_expectation(&self, _y0: &[f64], _t: f64, _f: Payoff) -> Option<f64> {
        None
    }

    fn heston_params(&self) -> Option<&HestonParams> {
        None
    }

    /// Coordinates reported to users; identity unless the model integrates a
    /// transformed state (Heston uses log-price internally).
    fn observed(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    /// Inverse of [`SdeModel::observed`].
    fn from_observed(&self, o: &[f64]) -> Vec<f64> {
        o.to_vec()
    }

    /// Column names for observed coordinates.
    fn labels(&self) -> Vec<String> {
        match self.state_dim() {
            1 => vec!["y".into()],
            n => (1..=n).map(|i| format!("y{i}")).collect(),
        }
    }

    fn name(&self) -> &'static str;
}

/// `dy = -a y dt + sqrt(b) dW`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Langevin {
    pub a: f64,
    pub b: f64,
}

pub fn make_langevin(a: f64, b: f64) -> Result<Langevin> {
    if !(b >= 0.0) || !b.is_finite() || !a.is_finite() {
        return Err(invalid("b", format!("need finite a and b >= 0, got a={a}, b={b}")));
    }
    Ok(Langevin { a, b })
}

impl Langevin {
    fn mean_factor(&self, t: f64) -> f64 {
        (-self.a * t).exp()
    }

    fn variance(&self, t: f64) -> f64 {
        if self.a.abs() < 1e-12 {
            self.b * t
        } else {
            self.b / (2.0 * self.a) * (1.0 - (-2.0 * self.a * t).exp())
        }
    }
}

impl SdeModel for Langevin {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift_ito(&self, y: &[f64]) -> Vec<f64> {
        vec![-self.a * y[0]]
    }
    fn diffusion(&self, _i: usize, _y: &[f64]) -> Vec<f64> {
        vec![self.b.sqrt()]
    }
    fn diffusion_derivative(&self, _i: usize, _y: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
    fn drift_strat(&self, y: &[f64]) -> Option<Vec<f64>> {
        Some(self.drift_ito(y))
    }
    fn exact_expectation(&self, y0: &[f64], t: f64, f: Payoff) -> Option<f64> {
        let m = y0[0] * self.mean_factor(t);
        let v = self.variance(t);
        Some(match f {
            Payoff::Id => m,
            Payoff::Square => m * m + v,
            Payoff::Exp => (m + 0.5 * v).exp(),
        })
    }
    fn name(&self) -> &'static str {
        "langevin"
    }
}

/// `dy = a y dt + b y dW`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gbm {
    pub a: f64,
    pub b: f64,
}

pub fn make_gbm(a: f64, b: f64) -> Result<Gbm> {
    if !a.is_finite() || !b.is_finite() {
        return Err(invalid("a", "coefficients must be finite"));
    }
    Ok(Gbm { a, b })
}

impl SdeModel for Gbm {
    fn state_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift_ito(&self, y: &[f64]) -> Vec<f64> {
        vec![self.a * y[0]]
    }
    fn diffusion(&self, _i: usize, y: &[f64]) -> Vec<f64> {
        vec![self.b * y[0]]
    }
    fn diffusion_derivative(&self, _i: usize, _y: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(vec![self.b * v[0]])
    }
    fn drift_strat(&self, y: &[f64]) -> Option<Vec<f64>> {
        Some(vec![(self.a - 0.5 * self.b * self.b) * y[0]])
    }
    fn exact_solution(&self, y0: &[f64], t: f64, w: &[f64]) -> Option<Vec<f64>> {
        let (a, b) = (self.a, self.b);
        Some(vec![y0[0] * (a * t + b * w[0] - 0.5 * b * b * t).exp()])
    }
    fn exact_expectation(&self, y0: &[f64], t: f64, f: Payoff) -> Option<f64> {
        match f {
            Payoff::Id => Some(y0[0] * (self.a * t).exp()),
            Payoff::Square => Some(y0[0] * y0[0] * ((2.0 * self.a + self.b * self.b) * t).exp()),
            Payoff::Exp => None,
        }
    }
    fn name(&self) -> &'static str {
        "gbm"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub mu: f64,
    /// mean-reversion rate (often written `alpha`)
    pub kappa: f64,
    pub theta: f64,
    /// vol-of-vol (often written `beta`)
    pub epsilon: f64,
    pub rho: f64,
}

impl Default for HestonParams {
    fn default() -> Self {
        HestonParams {
            mu: 0.05,
            kappa: 2.0,
            theta: 0.09,
            epsilon: 0.1,
            rho: 0.5,
        }
    }
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mu, self.kappa, self.theta, self.epsilon, self.rho];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("heston", "parameters must be finite"));
        }
        if self.epsilon < 0.0 {
            return Err(invalid("epsilon", format!("must be >= 0, got {}", self.epsilon)));
        }
        if self.kappa < 0.0 {
            return Err(invalid("kappa", format!("must be >= 0, got {}", self.kappa)));
        }
        if self.theta < 0.0 {
            return Err(invalid("theta", format!("must be >= 0, got {}", self.theta)));
        }
        if self.rho.abs() > 1.0 {
            return Err(invalid("rho", format!("must lie in [-1, 1], got {}", self.rho)));
        }
        Ok(())
    }
}

/// Heston in log-price form, state `(x, v)`, with full truncation `v+ = max(0, v)`
/// inside the drift and diffusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Heston {
    pub params: HestonParams,
}

pub fn make_heston(params: HestonParams) -> Result<Heston> {
    params.validate()?;
    Ok(Heston { params })
}

impl SdeModel for Heston {
    fn state_dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn drift_ito(&self, y: &[f64]) -> Vec<f64> {
        let p = &self.params;
        vec![p.mu, p.kappa * (p.theta - y[1].max(0.0))]
    }
    fn diffusion(&self, i: usize, y: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let s = y[1].max(0.0).sqrt();
        match i {
            0 => vec![s, p.epsilon * p.rho * s],
            _ => vec![0.0, p.epsilon * (1.0 - p.rho * p.rho).sqrt() * s],
        }
    }
    fn diffusion_derivative(&self, i: usize, y: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let p = &self.params;
        let ds = if y[1] > 0.0 { 0.5 / y[1].sqrt() * v[1] } else { 0.0 };
        Some(match i {
            0 => vec![ds, p.epsilon * p.rho * ds],
            _ => vec![0.0, p.epsilon * (1.0 - p.rho * p.rho).sqrt() * ds],
        })
    }
    fn heston_params(&self) -> Option<&HestonParams> {
        Some(&self.params)
    }
    fn observed(&self, y: &[f64]) -> Vec<f64> {
        vec![y[0].exp(), y[1]]
    }
    fn from_observed(&self, o: &[f64]) -> Vec<f64> {
        vec![o[0].ln(), o[1]]
    }
    fn labels(&self) -> Vec<String> {
        vec!["S".into(), "v".into()]
    }
    fn name(&self) -> &'static str {
        "heston"
    }
}

/// Coefficients of the Heston backward operator
/// `mu u_x + kappa (theta - v) u_v + v/2 u_xx + rho eps v u_xv + eps^2 v/2 u_vv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HestonPdeCoefficients {
    params: HestonParams,
}

pub fn heston_pde_coefficients(params: HestonParams) -> Result<HestonPdeCoefficients> {
    params.validate()?;
    Ok(HestonPdeCoefficients { params })
}

impl HestonPdeCoefficients {
    pub fn u_x(&self, _x: f64, _v: f64) -> f64 {
        self.params.mu
    }
    pub fn u_v(&self, _x: f64, v: f64) -> f64 {
        self.params.kappa * (self.params.theta - v)
    }
    pub fn u_xx(&self, _x: f64, v: f64) -> f64 {
        0.5 * v
    }
    pub fn u_xv(&self, _x: f64, v: f64) -> f64 {
        self.params.rho * self.params.epsilon * v
    }
    pub fn u_vv(&self, _x: f64, v: f64) -> f64 {
        0.5 * self.params.epsilon * self.params.epsilon * v
    }
}

/// Linear Stratonovich system `dy = sum_i A_i y o dW^i` with square matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Bilinear {
    n: usize,
    /// row-major `n x n` per noise
    mats: Vec<Vec<f64>>,
}

impl Bilinear {
    pub fn new(n: usize, mats: Vec<Vec<f64>>) -> Result<Bilinear> {
        if n == 0 || mats.is_empty() || mats.iter().any(|m| m.len() != n * n) {
            return Err(invalid("matrices", format!("need one or more {n}x{n} matrices")));
        }
        Ok(Bilinear { n, mats })
    }

    /// `A1 = [[0,1],[0,0]]`, `A2 = [[0,0],[1,0]]`: non-commuting, nilpotent.
    pub fn noncommuting_testbed() -> Bilinear {
        Bilinear {
            n: 2,
            mats: vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]],
        }
    }

    fn apply(&self, m: &[f64], y: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| m[r * self.n + c] * y[c]).sum())
            .collect()
    }
}

impl SdeModel for Bilinear {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn noise_dim(&self) -> usize {
        self.mats.len()
    }
    fn drift_ito(&self, y: &[f64]) -> Vec<f64> {
        // V0~ = V0 + (1/2) sum A_i^2 y with V0 = 0
        let mut out = vec![0.0; self.n];
        for m in &self.mats {
            let sq = self.apply(m, &self.apply(m, y));
            for (o, s) in out.iter_mut().zip(sq) {
                *o += 0.5 * s;
            }
        }
        out
    }
    fn diffusion(&self, i: usize, y: &[f64]) -> Vec<f64> {
        self.apply(&self.mats[i], y)
    }
    fn diffusion_derivative(&self, i: usize, _y: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(self.apply(&self.mats[i], v))
    }
    fn drift_strat(&self, _y: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.n])
    }
    fn commutative_noise(&self) -> bool {
        let n = self.n;
        let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n * n];
            for r in 0..n {
                for c in 0..n {
                    out[r * n + c] = (0..n).map(|k| a[r * n + k] * b[k * n + c]).sum();
                }
            }
            out
        };
        self.mats.iter().enumerate().all(|(i, a)| {
            self.mats[..i].iter().all(|b| mul(a, b) == mul(b, a))
        })
    }
    fn name(&self) -> &'static str {
        "linear2d"
    }
}

/// Serializable model selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelSpec {
    Langevin { a: f64, b: f64 },
    Gbm { a: f64, b: f64 },
    Heston(HestonParams),
    Linear2d,
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn SdeModel>> {
        Ok(match *self {
            ModelSpec::Langevin { a, b } => Box::new(make_langevin(a, b)?),
            ModelSpec::Gbm { a, b } => Box::new(make_gbm(a, b)?),
            ModelSpec::Heston(p) => Box::new(make_heston(p)?),
            ModelSpec::Linear2d => Box::new(Bilinear::noncommuting_testbed()),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Langevin { .. } => "langevin",
            ModelSpec::Gbm { .. } => "gbm",
            ModelSpec::Heston(_) => "heston",
            ModelSpec::Linear2d => "linear2d",
        }
    }

    /// Initial state used when none is configured, in observed coordinates.
    pub fn default_initial_state(&self) -> Vec<f64> {
        match self {
            ModelSpec::Langevin { .. } | ModelSpec::Gbm { .. } => vec![1.0],
            ModelSpec::Heston(_) => vec![1.0, 0.09],
            ModelSpec::Linear2d => vec![1.0, 1.0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn langevin_examples() {
        let m = make_langevin(3.0, 0.25).unwrap();
        assert_relative_eq!(
            m.exact_expectation(&[1.0], 1.0, Payoff::Id).unwrap(),
            0.049787068367863944,
            epsilon = 1e-15
        );
        assert_eq!(m.diffusion(0, &[5.0]), vec![0.5]);
        assert_eq!(m.drift_strat(&[2.0]), Some(m.drift_ito(&[2.0])));
        assert!(make_langevin(1.0, -0.1).is_err());
        let det = make_langevin(3.0, 0.0).unwrap();
        assert_eq!(det.exact_expectation(&[1.0], 1.0, Payoff::Square).unwrap(), (-6.0f64).exp());
    }

    #[test]
    fn gbm_examples() {
        let m = make_gbm(3.0, 1.4).unwrap();
        let y = m.exact_solution(&[1.0], 1.0, &[0.0]).unwrap()[0];
        assert_relative_eq!(y, 2.02f64.exp(), epsilon = 1e-14);
        assert_relative_eq!(y, 7.5383, epsilon = 1e-4);
        assert_relative_eq!(
            m.exact_expectation(&[1.0], 1.0, Payoff::Id).unwrap(),
            20.085536923187668,
            epsilon = 1e-12
        );
        let ode = make_gbm(0.7, 0.0).unwrap();
        let y = ode.exact_solution(&[2.0], 0.5, &[0.3]).unwrap()[0];
        assert_relative_eq!(y, 2.0 * 0.35f64.exp(), epsilon = 1e-14);
        let m = make_gbm(0.1, 0.2).unwrap();
        assert_relative_eq!(
            m.exact_expectation(&[1.0], 1.0, Payoff::Square).unwrap(),
            0.24f64.exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn heston_fields() {
        let p = HestonParams::default();
        let m = make_heston(p).unwrap();
        assert_eq!(m.drift_ito(&[0.0, 0.09])[1], 0.0);
        let zero_rho = make_heston(HestonParams { rho: 0.0, ..p }).unwrap();
        assert_eq!(zero_rho.diffusion(0, &[0.0, 0.04])[1], 0.0);
        // negative variance is truncated inside the fields
        assert_eq!(m.diffusion(0, &[0.0, -0.01]), vec![0.0, 0.0]);
        assert_eq!(m.drift_ito(&[0.0, -0.01])[1], 2.0 * 0.09);
        assert!(make_heston(HestonParams { rho: 1.5, ..p }).is_err());
        assert!(make_heston(HestonParams { epsilon: -0.1, ..p }).is_err());
        assert!(make_heston(HestonParams { theta: -0.1, ..p }).is_err());
    }

    #[test]
    fn heston_pde_coefficient_examples() {
        let c = heston_pde_coefficients(HestonParams::default()).unwrap();
        assert_relative_eq!(c.u_xx(0.0, 0.09), 0.045, epsilon = 1e-17);
        assert_relative_eq!(c.u_xv(0.0, 0.09), 0.0045, epsilon = 1e-17);
        assert_relative_eq!(c.u_vv(0.0, 0.09), 0.00045, epsilon = 1e-17);
        assert_eq!(c.u_x(0.3, 0.09), 0.05);
        assert_eq!(c.u_v(0.3, 0.09), 0.0);
    }

    #[test]
    fn bilinear_commutation() {
        assert!(!Bilinear::noncommuting_testbed().commutative_noise());
        let diag = Bilinear::new(2, vec![vec![1.0, 0.0, 0.0, 2.0], vec![0.5, 0.0, 0.0, -1.0]]).unwrap();
        assert!(diag.commutative_noise());
        assert!(Bilinear::new(2, vec![vec![1.0]]).is_err());
        // nilpotent testbed: Itô and Stratonovich drifts both vanish
        let t = Bilinear::noncommuting_testbed();
        assert_eq!(t.drift_ito(&[0.3, -0.7]), vec![0.0, 0.0]);
    }

    #[test]
    fn model_spec_builds() {
        let spec = ModelSpec::Heston(HestonParams::default());
        assert_eq!(spec.name(), "heston");
        assert_eq!(spec.build().unwrap().state_dim(), 2);
        assert_eq!(ModelSpec::Linear2d.build().unwrap().noise_dim(), 2);
        assert!(ModelSpec::Langevin { a: 1.0, b: -1.0 }.build().is_err());
    }

    #[test]
    fn payoff_parse() {
        assert_eq!("id".parse::<Payoff>().unwrap(), Payoff::Id);
        assert_eq!("Square".parse::<Payoff>().unwrap(), Payoff::Square);
        assert!("cube".parse::<Payoff>().is_err());
        assert_eq!(Payoff::Exp.eval(0.0), 1.0);
    }
}
