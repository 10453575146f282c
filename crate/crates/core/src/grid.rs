//! Sampled functions on `[0, T]` with the interior point `eta` pinned to a node.

use crate::error::{Error, Result};
use crate::quadrature::{simpson_unchecked, UniformGrid};

/// Largest denominator tried when snapping `eta / T` to a rational.
const MAX_DENOMINATOR: usize = 64;

/// Two uniform pieces, `[0, eta]` with `n_left` subintervals and `[eta, T]`
/// with `n_right`, both even. When `eta / T` is a rational with a small
/// denominator the two step sizes coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    eta: f64,
    t_end: f64,
    n_left: usize,
    n_right: usize,
}

fn round_even(x: f64) -> usize {
    let k = (x / 2.0).round().max(1.0) as usize;
    2 * k
}

impl Mesh {
    /// Build a mesh of roughly `n_target` subintervals with `eta` on a node.
    pub fn new(eta: f64, t_end: f64, n_target: usize) -> Result<Self> {
        if !(eta > 0.0 && eta < t_end && t_end.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "need 0 < eta < T, got eta = {eta}, T = {t_end}"
            )));
        }
        let n_target = n_target.max(4);
        let ratio = eta / t_end;
        for q in 2..=MAX_DENOMINATOR {
            let p = (ratio * q as f64).round();
            if p >= 1.0 && (ratio * q as f64 - p).abs() < 1e-9 {
                let p = p as usize;
                let blocks = ((n_target as f64) / (2 * q) as f64).round().max(1.0) as usize;
                let n = 2 * q * blocks;
                let n_left = n * p / q;
                return Self::from_parts(eta, t_end, n_left, n - n_left);
            }
        }
        let n_left = round_even(n_target as f64 * ratio);
        let n_right = round_even(n_target as f64 - n_left as f64);
        Self::from_parts(eta, t_end, n_left, n_right)
    }

    pub fn from_parts(eta: f64, t_end: f64, n_left: usize, n_right: usize) -> Result<Self> {
        // validates evenness and ordering
        UniformGrid::new(0.0, eta, n_left)?;
        UniformGrid::new(eta, t_end, n_right)?;
        Ok(Mesh {
            eta,
            t_end,
            n_left,
            n_right,
        })
    }

    /// Same pieces with every subinterval halved.
    pub fn refined(&self) -> Mesh {
        Mesh {
            n_left: self.n_left * 2,
            n_right: self.n_right * 2,
            ..*self
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Index of the node sitting at `eta`.
    pub fn eta_index(&self) -> usize {
        self.n_left
    }

    /// Total number of subintervals.
    pub fn n(&self) -> usize {
        self.n_left + self.n_right
    }

    pub fn len(&self) -> usize {
        self.n() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn left(&self) -> UniformGrid {
        UniformGrid::new(0.0, self.eta, self.n_left).expect("validated on construction")
    }

    pub fn right(&self) -> UniformGrid {
        UniformGrid::new(self.eta, self.t_end, self.n_right).expect("validated on construction")
    }

    pub fn h_left(&self) -> f64 {
        self.eta / self.n_left as f64
    }

    pub fn h_right(&self) -> f64 {
        (self.t_end - self.eta) / self.n_right as f64
    }

    pub fn max_h(&self) -> f64 {
        self.h_left().max(self.h_right())
    }

    pub fn node(&self, i: usize) -> f64 {
        if i <= self.n_left {
            self.left().node(i)
        } else {
            self.right().node(i - self.n_left)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Simpson over the whole mesh (piecewise, `eta` as a break point).
    pub(crate) fn integrate(&self, values: &[f64]) -> f64 {
        self.integrate_left(values) + self.integrate_right(values)
    }

    pub(crate) fn integrate_left(&self, values: &[f64]) -> f64 {
        simpson_unchecked(&values[..=self.n_left], self.h_left())
    }

    pub(crate) fn integrate_right(&self, values: &[f64]) -> f64 {
        simpson_unchecked(&values[self.n_left..], self.h_right())
    }

    /// Running integral `int_0^{t_i} y` at every node, fourth order.
    ///
    /// Even nodes of each piece use composite Simpson; an odd node adds the
    /// quadratic-interpolation rule `h/12 (5 y0 + 8 y1 - y2)` for its last
    /// subinterval.
    pub(crate) fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        let mut offset = 0.0;
        for (start, count, h) in [
            (0, self.n_left, self.h_left()),
            (self.n_left, self.n_right, self.h_right()),
        ] {
            let y = &values[start..=start + count];
            let mut acc = 0.0;
            for k in (0..count).step_by(2) {
                let (y0, y1, y2) = (y[k], y[k + 1], y[k + 2]);
                out[start + k + 1] = offset + acc + h / 12.0 * (5.0 * y0 + 8.0 * y1 - y2);
                acc += h / 3.0 * (y0 + 4.0 * y1 + y2);
                out[start + k + 2] = offset + acc;
            }
            offset += acc;
        }
        out
    }

    /// Piecewise-linear interpolation of `values` at `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let t = t.clamp(0.0, self.t_end);
        let (base, h, count) = if t <= self.eta {
            (0, self.h_left(), self.n_left)
        } else {
            (self.n_left, self.h_right(), self.n_right)
        };
        let origin = if base == 0 { 0.0 } else { self.eta };
        let x = (t - origin) / h;
        let k = (x.floor() as usize).min(count - 1);
        let w = x - k as f64;
        values[base + k] * (1.0 - w) + values[base + k + 1] * w
    }
}

/// A function sampled at the nodes of a [`Mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Mesh,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::LengthMismatch {
                expected: mesh.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "grid value at t = {} is {}",
                mesh.node(i),
                values[i]
            )));
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn zeros(mesh: Mesh) -> Self {
        GridFunction {
            mesh,
            values: vec![0.0; mesh.len()],
        }
    }

    pub fn constant(mesh: Mesh, c: f64) -> Self {
        GridFunction {
            mesh,
            values: vec![c; mesh.len()],
        }
    }

    pub fn from_fn(mesh: Mesh, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = mesh.nodes().into_iter().map(f).collect();
        Self::new(mesh, values)
    }

    pub(crate) fn from_raw(mesh: Mesh, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.len());
        GridFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Minimum over the nodes in `[eta, T]`.
    pub fn min_on_tail(&self) -> f64 {
        self.values[self.mesh.eta_index()..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn at_eta(&self) -> f64 {
        self.values[self.mesh.eta_index()]
    }

    pub fn integral(&self) -> f64 {
        self.mesh.integrate(&self.values)
    }

    pub fn integral_to_eta(&self) -> f64 {
        self.mesh.integrate_left(&self.values)
    }

    pub fn distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            mesh: self.mesh,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    /// Linear interpolation onto another mesh over the same `[0, T]`.
    pub fn resample(&self, target: Mesh) -> GridFunction {
        let values = target
            .nodes()
            .into_iter()
            .map(|t| self.mesh.interpolate(&self.values, t))
            .collect();
        GridFunction { mesh: target, values }
    }
}
