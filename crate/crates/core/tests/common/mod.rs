#![allow(dead_code)]

use nonlocal_bvp::{parse, BvpParams, Expr, GridFunction, Mesh};
use proptest::prelude::*;

/// Admissible boundary data, kept away from the edges of the window.
pub fn params() -> impl Strategy<Value = BvpParams> {
    (0.5f64..3.0, 0.1f64..0.9, 0.05f64..0.95, 0.0f64..0.95).prop_map(|(t, eta_frac, a_frac, b_frac)| {
        let eta = eta_frac * t;
        let alpha = a_frac * 2.0 * t / (eta * eta);
        let beta_sup = (2.0 * t - alpha * eta * eta) / (alpha * eta * eta - 2.0 * eta + 2.0 * t);
        BvpParams::new(alpha, b_frac * beta_sup, eta, t).unwrap()
    })
}

/// Smooth nonnegative load: constant floor, two oscillating modes and a bump.
#[derive(Debug, Clone, Copy)]
pub struct Load {
    pub floor: f64,
    pub modes: [(f64, f64, f64); 2],
    pub bump: (f64, f64, f64),
}

pub fn load() -> impl Strategy<Value = Load> {
    let mode = (0.0f64..2.0, 0.5f64..8.0, 0.0f64..6.3);
    (0.0f64..1.0, mode.clone(), mode, 0.0f64..3.0, 0.0f64..1.0, 0.05f64..0.3).prop_map(
        |(floor, m1, m2, height, centre, width)| Load {
            floor,
            modes: [m1, m2],
            bump: (height, centre, width),
        },
    )
}

impl Load {
    /// Value at `t` on `[0, t_end]`; strictly positive somewhere.
    pub fn at(&self, t: f64, t_end: f64) -> f64 {
        let mut v = self.floor + 1e-3;
        for (amp, freq, phase) in self.modes {
            v += amp * (1.0 + (freq * t + phase).sin());
        }
        let (h, c, w) = self.bump;
        let z = (t - c * t_end) / (w * t_end);
        v + h * (-z * z).exp()
    }

    pub fn on(&self, mesh: Mesh) -> GridFunction {
        let t_end = mesh.t_end();
        GridFunction::from_fn(mesh, |t| self.at(t, t_end)).unwrap()
    }
}

/// Positive coefficient `a(t)` as an expression in `t`.
pub fn coefficient() -> impl Strategy<Value = Expr> {
    (0.1f64..3.0, 0.0f64..2.0, 0.5f64..5.0, 0.0f64..1.0)
        .prop_map(|(c0, c1, w, c2)| parse(&format!("{c0} + {c1}*sin({w}*t)^2 + {c2}*t"), "t").unwrap())
}

pub fn example_params(id: usize) -> BvpParams {
    nonlocal_bvp::problem::builtin(id).unwrap().params().unwrap()
}
