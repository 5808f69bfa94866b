//! Driving paths: generation on a uniform fine grid, exact dyadic coarsening,
//! and replay of the same realisation at several step sizes.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::format_f64;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Gaussian,
    Binomial,
}

/// Index of the pair `(i, j)`, `i > j`, in the packed lower triangle.
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

pub fn pair_count(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// Finest-resolution increments of a `d`-dimensional driving path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    dim: usize,
    t0: f64,
    t_end: f64,
    n_fine: usize,
    kind: PathKind,
    /// component-major, `dim * n_fine`
    increments: Vec<f64>,
    /// pair-major Lévy areas per fine step, when attached
    areas: Option<Vec<f64>>,
}

impl PathBundle {
    pub fn generate(
        stream: &mut RngStream,
        dim: usize,
        t0: f64,
        t_end: f64,
        n_fine: usize,
        kind: PathKind,
    ) -> Result<PathBundle> {
        if dim == 0 {
            return Err(invalid("d", "need at least one noise component"));
        }
        if n_fine == 0 {
            return Err(invalid("n_fine", "need at least one step"));
        }
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(invalid("T", format!("interval [{t0}, {t_end}] is empty")));
        }
        let dt = (t_end - t0) / n_fine as f64;
        let mut increments = vec![0.0; dim * n_fine];
        for n in 0..n_fine {
            for i in 0..dim {
                increments[i * n_fine + n] = match kind {
                    PathKind::Gaussian => stream.wiener_increment(dt)?,
                    PathKind::Binomial => stream.binomial_increment(dt)?,
                };
            }
        }
        Ok(PathBundle {
            dim,
            t0,
            t_end,
            n_fine,
            kind,
            increments,
            areas: None,
        })
    }

    /// Builds a bundle from explicit component-major increments.
    pub fn from_increments(
        dim: usize,
        t0: f64,
        t_end: f64,
        increments: Vec<f64>,
        kind: PathKind,
    ) -> Result<PathBundle> {
        if dim == 0 || increments.is_empty() || increments.len() % dim != 0 {
            return Err(invalid(
                "increments",
                format!("{} values do not split into {dim} components", increments.len()),
            ));
        }
        if !(t_end > t0) {
            return Err(invalid("T", format!("interval [{t0}, {t_end}] is empty")));
        }
        let n_fine = increments.len() / dim;
        Ok(PathBundle {
            dim,
            t0,
            t_end,
            n_fine,
            kind,
            increments,
            areas: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn n_fine(&self) -> usize {
        self.n_fine
    }
    pub fn kind(&self) -> PathKind {
        self.kind
    }
    pub fn dt_fine(&self) -> f64 {
        (self.t_end - self.t0) / self.n_fine as f64
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.increments[i * self.n_fine..(i + 1) * self.n_fine]
    }

    pub fn areas(&self) -> Option<&[f64]> {
        self.areas.as_deref()
    }

    /// Attaches per-fine-step Lévy areas, pair-major with pairs packed by
    /// [`pair_index`].
    pub fn set_areas(&mut self, areas: Vec<f64>) -> Result<()> {
        let want = pair_count(self.dim) * self.n_fine;
        if areas.len() != want {
            return Err(invalid(
                "areas",
                format!("expected {want} values, got {}", areas.len()),
            ));
        }
        self.areas = Some(areas);
        Ok(())
    }

    /// The view at the finest resolution.
    pub fn fine_view(&self) -> CoarseView<'_> {
        CoarseView {
            parent: self,
            factor: 1,
            n_steps: self.n_fine,
            increments: self.increments.clone(),
            areas: self.areas.clone(),
        }
    }

    pub fn coarsen(&self, factor: usize) -> Result<CoarseView<'_>> {
        self.fine_view().coarsen(factor)
    }
}

/// Increments (and areas, when the parent carries them) over steps of
/// `factor * dt_fine`.
#[derive(Clone, Debug)]
pub struct CoarseView<'a> {
    parent: &'a PathBundle,
    factor: usize,
    n_steps: usize,
    increments: Vec<f64>,
    areas: Option<Vec<f64>>,
}

impl<'a> CoarseView<'a> {
    pub fn parent(&self) -> &'a PathBundle {
        self.parent
    }
    pub fn factor(&self) -> usize {
        self.factor
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn dim(&self) -> usize {
        self.parent.dim
    }
    pub fn t0(&self) -> f64 {
        self.parent.t0
    }
    pub fn dt(&self) -> f64 {
        self.parent.dt_fine() * self.factor as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.parent.t_end
        } else {
            self.parent.t0 + n as f64 * self.dt()
        }
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.increments[i * self.n_steps..(i + 1) * self.n_steps]
    }

    pub fn increment(&self, i: usize, n: usize) -> f64 {
        self.increments[i * self.n_steps + n]
    }

    pub fn step_increments(&self, n: usize) -> Vec<f64> {
        (0..self.dim()).map(|i| self.increment(i, n)).collect()
    }

    pub fn has_areas(&self) -> bool {
        self.areas.is_some()
    }

    /// `A_ij` over step `n`, antisymmetric in `(i, j)`; `None` without areas.
    pub fn area(&self, i: usize, j: usize, n: usize) -> Option<f64> {
        let areas = self.areas.as_ref()?;
        Some(match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => areas[pair_index(i, j) * self.n_steps + n],
            std::cmp::Ordering::Less => -areas[pair_index(j, i) * self.n_steps + n],
        })
    }

    /// Fine increments of component `i` lying inside coarse step `n`.
    pub fn sub_increments(&self, i: usize, n: usize) -> &'a [f64] {
        let fine = self.parent.component(i);
        &fine[n * self.factor..(n + 1) * self.factor]
    }

    /// Regroups `k` consecutive steps into one.
    ///
    /// Power-of-two factors are applied as repeated pairwise halving, so the
    /// `f2`-view of a bundle is bit-identical to the `f2/f1`-coarsening of
    /// its `f1`-view for any dyadic `f1 | f2`.
    pub fn coarsen(&self, k: usize) -> Result<CoarseView<'a>> {
        if k == 0 || self.n_steps % k != 0 {
            return Err(invalid(
                "factor",
                format!("{k} does not divide {} steps", self.n_steps),
            ));
        }
        if k.is_power_of_two() {
            let mut view = self.clone();
            for _ in 0..k.trailing_zeros() {
                view = view.merge_groups(2);
            }
            Ok(view)
        } else {
            Ok(self.merge_groups(k))
        }
    }

    fn merge_groups(&self, k: usize) -> CoarseView<'a> {
        let d = self.dim();
        let n_out = self.n_steps / k;
        let mut increments = vec![0.0; d * n_out];
        let mut areas = self.areas.as_ref().map(|_| vec![0.0; pair_count(d) * n_out]);
        for m in 0..n_out {
            let mut acc_w: Vec<f64> = (0..d).map(|i| self.increment(i, m * k)).collect();
            let mut acc_a: Vec<f64> = match &self.areas {
                Some(a) => (0..pair_count(d))
                    .map(|p| a[p * self.n_steps + m * k])
                    .collect(),
                None => Vec::new(),
            };
            for c in 1..k {
                let n = m * k + c;
                if let Some(a) = &self.areas {
                    // Chen: A(ab) = A(a) + A(b) + (dWi(a) dWj(b) - dWj(a) dWi(b)) / 2
                    for i in 1..d {
                        for j in 0..i {
                            let p = pair_index(i, j);
                            acc_a[p] += a[p * self.n_steps + n]
                                + 0.5
                                    * (acc_w[i] * self.increment(j, n)
                                        - acc_w[j] * self.increment(i, n));
                        }
                    }
                }
                for (i, w) in acc_w.iter_mut().enumerate() {
                    *w += self.increment(i, n);
                }
            }
            for i in 0..d {
                increments[i * n_out + m] = acc_w[i];
            }
            if let Some(out) = areas.as_mut() {
                for (p, v) in acc_a.into_iter().enumerate() {
                    out[p * n_out + m] = v;
                }
            }
        }
        CoarseView {
            parent: self.parent,
            factor: self.factor * k,
            n_steps: n_out,
            increments,
            areas,
        }
    }

    /// Path values `W_i` at every grid point, starting from zero.
    pub fn partial_sums(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| partial_sums(self.component(i)))
            .collect()
    }

    /// CSV dump with columns `t,W1..Wd`, one row per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let d = self.dim();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=d).map(|i| format!("W{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        let values = self.partial_sums();
        for n in 0..=self.n_steps {
            let row: Vec<String> = std::iter::once(format_f64(self.time(n)))
                .chain(values.iter().map(|w| format_f64(w[n])))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Running sums `(0, x1, x1 + x2, ...)`.
pub fn partial_sums(increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &x in increments {
        acc += x;
        out.push(acc);
    }
    out
}
