//! The Hammerstein operator
//!
//! ```text
//! (A u)(t) = sum of the closed-form linear solution with load a(s) f(u(s))
//! ```
//!
//! i.e. `A u = solve_linear(params, a * f(u))`. Fixed points of `A` are the
//! solutions of the nonlinear boundary-value problem.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone_constants::gamma;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{GridFunction, Mesh};
use crate::linear_kernel::{solve_linear_values, BvpParams, CHECK_TOL};

#[derive(Debug)]
pub struct OperatorContext {
    params: BvpParams,
    a: Expr,
    f: Expr,
    mesh: Mesh,
    a_values: Vec<f64>,
    kernel: OnceLock<DMatrix<f64>>,
}

/// Result of one application of `A`.
#[derive(Debug, Clone)]
pub struct Applied {
    pub value: GridFunction,
    /// Nodes where a negative `u` was evaluated as `f(0)`.
    pub clamped: usize,
}

impl OperatorContext {
    pub fn new(params: BvpParams, a: Expr, f: Expr, n_target: usize) -> Result<Self> {
        let mesh = params.mesh(n_target)?;
        Self::with_mesh(params, a, f, mesh)
    }

    pub fn with_mesh(params: BvpParams, a: Expr, f: Expr, mesh: Mesh) -> Result<Self> {
        if (mesh.eta() - params.eta()).abs() > 1e-12 * params.t_end()
            || (mesh.t_end() - params.t_end()).abs() > 1e-12 * params.t_end()
        {
            return Err(Error::EtaNotOnGrid { eta: params.eta() });
        }
        let a_values = mesh
            .nodes()
            .into_iter()
            .map(|t| {
                a.eval(t).map_err(|source| Error::Eval {
                    source,
                    var: "t",
                    at: t,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OperatorContext {
            params,
            a,
            f,
            mesh,
            a_values,
            kernel: OnceLock::new(),
        })
    }

    /// Same problem on a different mesh.
    pub fn remeshed(&self, mesh: Mesh) -> Result<Self> {
        Self::with_mesh(self.params, self.a.clone(), self.f.clone(), mesh)
    }

    pub fn params(&self) -> &BvpParams {
        &self.params
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn a(&self) -> &Expr {
        &self.a
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a_values
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if u.mesh() != &self.mesh {
            return Err(Error::LengthMismatch {
                expected: self.mesh.len(),
                found: u.values().len(),
            });
        }
        Ok(())
    }

    /// `w(s) = a(s) f(max(u(s), 0))` at every node.
    pub fn load(&self, u: &GridFunction) -> Result<(Vec<f64>, usize)> {
        self.check(u)?;
        let nodes = self.mesh.nodes();
        let mut clamped = 0;
        let w = u
            .values()
            .iter()
            .zip(&self.a_values)
            .zip(&nodes)
            .map(|((&ui, &ai), &t)| {
                let arg = if ui < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    ui
                };
                self.f
                    .eval(arg)
                    .map(|fv| ai * fv)
                    .map_err(|source| Error::OperatorEval { source, t, u: arg })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((w, clamped))
    }

    pub fn apply(&self, u: &GridFunction) -> Result<Applied> {
        let (w, clamped) = self.load(u)?;
        let values = solve_linear_values(&self.params, &self.mesh, &w);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("A u overflowed".into()));
        }
        Ok(Applied {
            value: GridFunction::from_raw(self.mesh, values),
            clamped,
        })
    }

    /// Dense matrix of the discrete linear solution operator: column `j` is
    /// the response to a unit load at node `j`. Built once, on first use.
    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        self.kernel.get_or_init(|| {
            let n = self.mesh.len();
            let mut m = DMatrix::<f64>::zeros(n, n);
            let mut e = vec![0.0; n];
            for j in 0..n {
                e[j] = 1.0;
                let col = solve_linear_values(&self.params, &self.mesh, &e);
                m.set_column(j, &nalgebra::DVector::from_vec(col));
                e[j] = 0.0;
            }
            m
        })
    }
}

pub fn apply_a(ctx: &OperatorContext, u: &GridFunction) -> Result<GridFunction> {
    Ok(ctx.apply(u)?.value)
}

/// `||A u - u||` over the mesh nodes.
pub fn fixed_point_residual(ctx: &OperatorContext, u: &GridFunction) -> Result<f64> {
    Ok(ctx.apply(u)?.value.distance(u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeMappingReport {
    pub samples: usize,
    pub passed: usize,
    /// Samples where `f` could not be evaluated.
    pub errored: usize,
    /// Smallest `min(Au) + tol`; negative means a sign violation.
    pub worst_nonneg_margin: f64,
    /// Smallest `min_tail(Au) - gamma ||Au|| + tol`.
    pub worst_cone_margin: f64,
}

impl ConeMappingReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.samples
    }
}

/// Apply `A` to each given cone element and check `Au` is back in the cone.
pub fn check_cone_mapping_on(ctx: &OperatorContext, samples: &[GridFunction]) -> Result<ConeMappingReport> {
    let g = gamma(&ctx.params)?;
    let mut report = ConeMappingReport {
        samples: samples.len(),
        passed: 0,
        errored: 0,
        worst_nonneg_margin: f64::INFINITY,
        worst_cone_margin: f64::INFINITY,
    };
    for u in samples {
        let au = match ctx.apply(u) {
            Ok(applied) => applied.value,
            Err(Error::OperatorEval { .. }) | Err(Error::NonFinite(_)) => {
                report.errored += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let norm = au.sup_norm();
        let tol = CHECK_TOL * (1.0 + norm);
        let nonneg = au.min() + tol;
        let cone = au.min_on_tail() - g * norm + tol;
        report.worst_nonneg_margin = report.worst_nonneg_margin.min(nonneg);
        report.worst_cone_margin = report.worst_cone_margin.min(cone);
        if nonneg >= 0.0 && cone >= 0.0 {
            report.passed += 1;
        }
    }
    Ok(report)
}

/// Random smooth elements of the cone `{u >= 0, min_[eta,T] u >= gamma ||u||}`
/// with sup-norms log-uniform in `[1e-3, 10]`.
pub fn random_cone_elements(mesh: &Mesh, gamma: f64, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_end = mesh.t_end();
    (0..count)
        .map(|_| {
            let modes: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(0.5..12.0) / t_end,
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let bump = |t: f64| -> f64 {
                modes
                    .iter()
                    .map(|(c, w, phi)| c * 0.5 * (1.0 + (w * t + phi).sin()))
                    .sum()
            };
            let v: Vec<f64> = mesh.nodes().into_iter().map(bump).collect();
            let s = v.iter().fold(0.0_f64, |m, x| m.max(*x)).max(1e-3);
            // lift so that lift >= gamma (lift + s) / 1, i.e. the tail minimum
            // dominates gamma times the norm
            let lift = gamma * s / (1.0 - gamma) * (1.0 + rng.gen_range(0.0..2.0));
            let raw: Vec<f64> = v.iter().map(|x| lift + x).collect();
            let norm = raw.iter().fold(0.0_f64, |m, x| m.max(*x));
            let scale = 10f64.powf(rng.gen_range(-3.0..1.0)) / norm;
            GridFunction::from_raw(*mesh, raw.into_iter().map(|x| x * scale).collect())
        })
        .collect()
}

pub fn check_cone_mapping(ctx: &OperatorContext, sample_count: usize, seed: u64) -> Result<ConeMappingReport> {
    let g = gamma(&ctx.params)?;
    let samples = random_cone_elements(&ctx.mesh, g, sample_count, seed);
    check_cone_mapping_on(ctx, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::linear_kernel::solve_linear;

    fn ctx(f: &str, n: usize) -> OperatorContext {
        let p = BvpParams::new(2.0, 1.0 / 30.0, 1.0, 2.0).unwrap();
        OperatorContext::new(p, parse("5/32*(2-t)^3", "t").unwrap(), parse(f, "u").unwrap(), n).unwrap()
    }

    #[test]
    fn zero_nonlinearity_maps_to_zero() {
        let c = ctx("0", 64);
        let u = GridFunction::constant(*c.mesh(), 3.0);
        assert_eq!(apply_a(&c, &u).unwrap().sup_norm(), 0.0);
        assert_eq!(fixed_point_residual(&c, &GridFunction::zeros(*c.mesh())).unwrap(), 0.0);
    }

    #[test]
    fn unit_nonlinearity_reduces_to_linear_solve() {
        let c = ctx("1", 128);
        let u = GridFunction::from_fn(*c.mesh(), |t| t * t).unwrap();
        let au = apply_a(&c, &u).unwrap();
        let a = GridFunction::new(*c.mesh(), c.a_values().to_vec()).unwrap();
        let lin = solve_linear(c.params(), &a).unwrap();
        assert!(au.distance(&lin) <= 1e-14 * lin.sup_norm());
        let r = fixed_point_residual(&c, &u).unwrap();
        assert!((r - lin.distance(&u)).abs() < 1e-14);
    }

    #[test]
    fn constant_four_lands_in_cone() {
        let c = ctx("u^(1/2)/2 + u^2/32", 256);
        let u = GridFunction::constant(*c.mesh(), 4.0);
        let au = apply_a(&c, &u).unwrap();
        let g = gamma(c.params()).unwrap();
        assert!(au.min() >= 0.0);
        assert!(au.at_eta() >= g * au.sup_norm());
    }

    #[test]
    fn negative_values_are_clamped() {
        let c = ctx("u + 1", 32);
        let u = GridFunction::constant(*c.mesh(), -2.0);
        let applied = c.apply(&u).unwrap();
        assert_eq!(applied.clamped, c.mesh().len());
        let one = apply_a(&c, &GridFunction::zeros(*c.mesh())).unwrap();
        assert_eq!(applied.value, one);
    }

    #[test]
    fn evaluation_errors_name_the_node() {
        let c = ctx("log(u)", 16);
        let err = apply_a(&c, &GridFunction::zeros(*c.mesh())).unwrap_err();
        assert!(matches!(err, Error::OperatorEval { t, u, .. } if t == 0.0 && u == 0.0));
    }

    #[test]
    fn zero_function_is_mapped_into_cone() {
        let c = ctx("u", 32);
        let r = check_cone_mapping_on(&c, &[GridFunction::zeros(*c.mesh())]).unwrap();
        assert!(r.all_passed());
    }

    #[test]
    fn random_samples_are_cone_elements() {
        let c = ctx("u", 64);
        let g = gamma(c.params()).unwrap();
        for u in random_cone_elements(c.mesh(), g, 50, 7) {
            assert!(u.min() >= 0.0);
            assert!(u.min_on_tail() >= g * u.sup_norm());
        }
    }

    #[test]
    fn kernel_matrix_reproduces_apply() {
        let c = ctx("u^2", 32);
        let u = GridFunction::from_fn(*c.mesh(), |t| 1.0 + t).unwrap();
        let (w, _) = c.load(&u).unwrap();
        let via_matrix = c.kernel_matrix() * nalgebra::DVector::from_vec(w);
        let direct = apply_a(&c, &u).unwrap();
        for (x, y) in via_matrix.iter().zip(direct.values()) {
            assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }
}
