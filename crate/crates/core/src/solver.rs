//! Numerical fixed points of `A`: damped Picard iteration, Newton on the
//! discretized system, verification against the defining equations, and
//! matching against certificate norm intervals.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::cone_constants::gamma;
use crate::criteria::{Certificate, NormInterval, Theorem};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linear_kernel::{check_cone_bound, CHECK_TOL};
use crate::operator::OperatorContext;

pub const DEFAULT_GRID_N: usize = 1024;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
pub const DEFAULT_DEDUP_DISTANCE: f64 = 1e-4;
/// Grid size for the Newton probes that look for Picard-unstable points.
pub const PROBE_GRID_N: usize = 128;
/// Norm below which an iterate counts as the trivial solution.
pub const TRIVIAL_NORM: f64 = 1e-10;

const OMEGA_FLOOR: f64 = 1.0 / 64.0;
const STAGNATION_RATIO: f64 = 0.99;
const STAGNATION_STEPS: usize = 10;
const NEWTON_MAX_STEPS: usize = 60;
const BLOW_UP_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub grid_n: usize,
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub start_scales: Vec<f64>,
    pub dedup_distance: f64,
}

/// `count` log-spaced values in `[1e-3 rho_ref, 1e3 rho_ref]`.
pub fn default_start_scales(rho_ref: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = ((1e-3 * rho_ref).ln(), (1e3 * rho_ref).ln());
    (0..count)
        .map(|i| (lo + (hi - lo) * i as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}

impl SolveOptions {
    pub fn with_rho_ref(rho_ref: f64) -> Self {
        SolveOptions {
            grid_n: DEFAULT_GRID_N,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            start_scales: default_start_scales(rho_ref, 24),
            dedup_distance: DEFAULT_DEDUP_DISTANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParams("residual_tol must be positive".into()));
        }
        if self.start_scales.is_empty() || self.start_scales.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidParams(
                "start_scales must be nonempty and positive".into(),
            ));
        }
        if self.grid_n < 2 || !self.grid_n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "grid size must be even, got {}",
                self.grid_n
            )));
        }
        if !(self.dedup_distance >= 0.0) {
            return Err(Error::InvalidParams("dedup_distance must be nonnegative".into()));
        }
        Ok(())
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::with_rho_ref(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub u: GridFunction,
    pub sup_norm: f64,
    pub fixed_point_residual: f64,
    /// Sup over interior nodes of the central-difference `u'' + a f(u)`.
    pub ode_residual: f64,
    /// `|u(0) - beta u(eta)|` and `|u(T) - alpha * integral_0^eta u|`.
    pub bc_residuals: (f64, f64),
    pub in_cone: bool,
    pub certificate_bucket: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    /// Distinct nonzero fixed points, by increasing norm.
    pub positive: Vec<SolveResult>,
    /// The zero solution, when some start converged to it.
    pub trivial: Option<SolveResult>,
    /// Starts abandoned after an evaluation failure or blow-up.
    pub abandoned_starts: usize,
}

fn residual_target(tol: f64, norm: f64) -> f64 {
    tol * norm.min(1.0)
}

enum Found {
    Solution(Vec<f64>),
    Trivial,
    Stalled(Vec<f64>, f64),
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn gf(ctx: &OperatorContext, values: Vec<f64>) -> GridFunction {
    GridFunction::from_raw(*ctx.mesh(), values)
}

/// `u - A u` as raw values.
fn defect(ctx: &OperatorContext, u: &[f64]) -> Result<Vec<f64>> {
    let au = ctx.apply(&gf(ctx, u.to_vec()))?.value;
    Ok(u.iter().zip(au.values()).map(|(x, y)| x - y).collect())
}

fn picard(ctx: &OperatorContext, start: f64, opts: &SolveOptions) -> Result<Found> {
    let mut u = vec![start; ctx.mesh().len()];
    let mut omega: f64 = 1.0;
    let mut prev = f64::INFINITY;
    let mut slow_steps = 0;
    for _ in 0..opts.max_iterations {
        let au = ctx.apply(&gf(ctx, u.clone()))?.value.into_values();
        let r = u.iter().zip(&au).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        let norm = sup(&u);
        if norm < TRIVIAL_NORM && sup(&au) < TRIVIAL_NORM {
            return Ok(Found::Trivial);
        }
        if r <= residual_target(opts.residual_tol, norm) {
            return Ok(Found::Solution(u));
        }
        if norm > BLOW_UP_NORM {
            return Err(Error::NonFinite(format!("Picard iterate reached norm {norm:e}")));
        }
        if r > prev {
            omega = (omega / 2.0).max(OMEGA_FLOOR);
        }
        slow_steps = if r > STAGNATION_RATIO * prev { slow_steps + 1 } else { 0 };
        prev = r;
        if slow_steps >= STAGNATION_STEPS {
            return Ok(Found::Stalled(u, r));
        }
        for (x, y) in u.iter_mut().zip(&au) {
            *x = (1.0 - omega) * *x + omega * y;
        }
    }
    Ok(Found::Stalled(u, prev))
}

/// Jacobian of `u - A u`: `I - K diag(a_j f'(u_j))` with `f'` by forward
/// differences.
fn jacobian(ctx: &OperatorContext, u: &[f64]) -> Result<DMatrix<f64>> {
    let k = ctx.kernel_matrix();
    let norm = sup(u);
    let f = ctx.f();
    let mut j = DMatrix::<f64>::identity(u.len(), u.len());
    for (col, (&x, &a)) in u.iter().zip(ctx.a_values()).enumerate() {
        let base = x.max(0.0);
        let delta = f64::EPSILON.sqrt() * base.max(1e-6 * norm).max(1e-12);
        let eval = |v: f64| {
            f.eval(v).map_err(|source| Error::OperatorEval {
                source,
                t: ctx.mesh().node(col),
                u: v,
            })
        };
        let d = a * (eval((x + delta).max(0.0))? - eval(base)?) / delta;
        if d != 0.0 {
            let mut target = j.column_mut(col);
            target.axpy(-d, &k.column(col), 1.0);
        }
    }
    Ok(j)
}

/// Damped Newton with chord reuse while the defect keeps halving.
fn newton(ctx: &OperatorContext, u0: Vec<f64>, tol: f64) -> Result<Found> {
    let mut u = u0;
    let mut fu = defect(ctx, &u)?;
    let mut lu = None;
    for _ in 0..NEWTON_MAX_STEPS {
        let r = sup(&fu);
        let norm = sup(&u);
        if norm < TRIVIAL_NORM && r < TRIVIAL_NORM {
            return Ok(Found::Trivial);
        }
        if r <= residual_target(tol, norm) {
            return Ok(Found::Solution(u));
        }
        if norm > BLOW_UP_NORM {
            return Err(Error::NonFinite(format!("Newton iterate reached norm {norm:e}")));
        }
        let mut fresh = lu.is_none();
        loop {
            if lu.is_none() {
                lu = Some(jacobian(ctx, &u)?.lu());
            }
            let rhs = DVector::from_iterator(fu.len(), fu.iter().map(|v| -v));
            let step = lu
                .as_ref()
                .and_then(|l| l.solve(&rhs))
                .filter(|s| s.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::Singular("Newton Jacobian".into()))?;
            let mut lambda = 1.0;
            let mut accepted = None;
            while lambda >= 1.0 / 1024.0 {
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x + lambda * s).collect();
                if let Ok(ft) = defect(ctx, &trial) {
                    if sup(&ft) < (1.0 - 1e-4 * lambda) * r {
                        accepted = Some((trial, ft));
                        break;
                    }
                }
                lambda /= 2.0;
            }
            match accepted {
                Some((trial, ft)) => {
                    let contracted = sup(&ft) < 0.5 * r;
                    u = trial;
                    fu = ft;
                    if !contracted {
                        lu = None;
                    }
                    break;
                }
                None if fresh => return Ok(Found::Stalled(u, r)),
                None => {
                    lu = None;
                    fresh = true;
                }
            }
        }
    }
    let r = sup(&fu);
    Ok(Found::Stalled(u, r))
}

fn relative_distance(a: &GridFunction, b: &GridFunction) -> f64 {
    let scale = a.sup_norm().max(b.sup_norm()).max(f64::MIN_POSITIVE);
    a.distance(b) / scale
}

/// Search for fixed points from each start scale.
///
/// Each start runs damped Picard on the fine grid and a Newton probe on a
/// coarse grid; stalled Picard runs and coarse probe results are polished by
/// Newton on the fine grid.
pub fn solve_fixed_points(ctx: &OperatorContext, opts: &SolveOptions) -> Result<SolveOutcome> {
    opts.validate()?;
    let target = ctx.params().mesh(opts.grid_n)?;
    let fine = if *ctx.mesh() == target {
        None
    } else {
        Some(ctx.remeshed(target)?)
    };
    let fine = fine.as_ref().unwrap_or(ctx);
    let coarse = fine.remeshed(fine.params().mesh(PROBE_GRID_N.min(opts.grid_n))?)?;
    let g = gamma(fine.params())?;

    let mut solutions: Vec<GridFunction> = Vec::new();
    let mut candidates: Vec<GridFunction> = Vec::new();
    let mut trivial = false;
    let mut abandoned = 0;
    let mut best_residual = f64::INFINITY;

    for &c in &opts.start_scales {
        match picard(fine, c, opts) {
            Ok(Found::Solution(u)) => solutions.push(gf(fine, u)),
            Ok(Found::Trivial) => trivial = true,
            Ok(Found::Stalled(u, r)) => {
                best_residual = best_residual.min(r);
                candidates.push(gf(fine, u).resample(*coarse.mesh()));
            }
            Err(_) => abandoned += 1,
        }
        match newton(&coarse, vec![c; coarse.mesh().len()], opts.residual_tol) {
            Ok(Found::Solution(u)) => candidates.push(gf(&coarse, u)),
            Ok(Found::Trivial) => trivial = true,
            Ok(Found::Stalled(_, r)) => best_residual = best_residual.min(r),
            Err(_) => abandoned += 1,
        }
    }

    // polish distinct coarse candidates not already covered
    let coarse_known: Vec<GridFunction> = solutions.iter().map(|s| s.resample(*coarse.mesh())).collect();
    let mut distinct: Vec<GridFunction> = Vec::new();
    for cand in candidates {
        if cand.sup_norm() < TRIVIAL_NORM {
            continue;
        }
        let seen = coarse_known
            .iter()
            .chain(&distinct)
            .any(|k| relative_distance(k, &cand) < 1e-2);
        if !seen {
            distinct.push(cand);
        }
    }
    for cand in distinct {
        let start = cand.resample(*fine.mesh()).into_values();
        match newton(fine, start, opts.residual_tol) {
            Ok(Found::Solution(u)) => solutions.push(gf(fine, u)),
            Ok(Found::Trivial) => trivial = true,
            Ok(Found::Stalled(_, r)) => best_residual = best_residual.min(r),
            Err(_) => abandoned += 1,
        }
    }

    let mut positive: Vec<SolveResult> = Vec::new();
    for u in solutions {
        let norm = u.sup_norm();
        if norm < TRIVIAL_NORM {
            trivial = true;
            continue;
        }
        if u.min() < -CHECK_TOL * (1.0 + norm) {
            continue;
        }
        if positive
            .iter()
            .any(|p| relative_distance(&p.u, &u) < opts.dedup_distance)
        {
            continue;
        }
        positive.push(verify_solution(fine, &u, g));
    }
    if positive.is_empty() && !trivial {
        return Err(Error::NoConvergence { best_residual });
    }
    positive.sort_by(|a, b| a.sup_norm.total_cmp(&b.sup_norm));
    Ok(SolveOutcome {
        positive,
        trivial: trivial.then(|| verify_solution(fine, &GridFunction::zeros(*fine.mesh()), g)),
        abandoned_starts: abandoned,
    })
}

/// Residuals of a candidate solution; failures show up as non-finite values.
pub fn verify_solution(ctx: &OperatorContext, u: &GridFunction, gamma: f64) -> SolveResult {
    let params = ctx.params();
    let fixed_point_residual = ctx.apply(u).map(|au| au.value.distance(u)).unwrap_or(f64::INFINITY);

    let mesh = u.mesh();
    let nodes = mesh.nodes();
    let v = u.values();
    let mut ode_residual: f64 = 0.0;
    for i in 1..v.len() - 1 {
        let hl = nodes[i] - nodes[i - 1];
        let hr = nodes[i + 1] - nodes[i];
        let upp = 2.0 * ((v[i + 1] - v[i]) / hr - (v[i] - v[i - 1]) / hl) / (hl + hr);
        let load = match ctx.f().eval(v[i].max(0.0)) {
            Ok(fv) => ctx.a_values()[i] * fv,
            Err(_) => f64::NAN,
        };
        let r = (upp + load).abs();
        ode_residual = if r.is_nan() { f64::INFINITY } else { ode_residual.max(r) };
    }

    let bc0 = (v[0] - params.beta() * u.at_eta()).abs();
    let bc1 = (v[v.len() - 1] - params.alpha() * u.integral_to_eta()).abs();
    let in_cone = u.min() >= -CHECK_TOL * (1.0 + u.sup_norm())
        && check_cone_bound(params, u, gamma).map(|r| r.holds).unwrap_or(false);
    SolveResult {
        u: u.clone(),
        sup_norm: u.sup_norm(),
        fixed_point_residual,
        ode_residual,
        bc_residuals: (bc0, bc1),
        in_cone,
        certificate_bucket: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub theorem: Theorem,
    pub interval: NormInterval,
    /// Indices into the result list.
    pub occupants: Vec<usize>,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.theorem, self.interval)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationReport {
    pub buckets: Vec<Bucket>,
    /// Guaranteed but not found: increase the starts or the grid.
    pub empty: Vec<Bucket>,
    /// Found but not predicted by any certificate.
    pub unpredicted: Vec<usize>,
}

impl ClassificationReport {
    /// Two-solution certificates have both buckets occupied and one-solution
    /// certificates have an occupant.
    pub fn consistent(&self) -> bool {
        self.empty.is_empty()
    }
}

/// Sort solutions into certificate intervals and label each solution with
/// the first bucket containing it.
pub fn classify_against_certificates(results: &mut [SolveResult], certs: &[Certificate]) -> ClassificationReport {
    let mut report = ClassificationReport::default();
    for cert in certs {
        for interval in &cert.intervals {
            let occupants: Vec<usize> = results
                .iter()
                .enumerate()
                .filter(|(_, r)| interval.contains(r.sup_norm))
                .map(|(i, _)| i)
                .collect();
            let bucket = Bucket {
                theorem: cert.theorem,
                interval: *interval,
                occupants,
            };
            if bucket.occupants.is_empty() {
                report.empty.push(bucket.clone());
            }
            report.buckets.push(bucket);
        }
    }
    for (i, r) in results.iter_mut().enumerate() {
        r.certificate_bucket = report
            .buckets
            .iter()
            .find(|b| b.occupants.contains(&i))
            .map(|b| b.to_string());
        if r.certificate_bucket.is_none() {
            report.unpredicted.push(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_constants::ConeConstants;
    use crate::criteria::{certify, estimate_asymptotics, DeclaredRho};
    use crate::expr::parse;
    use crate::linear_kernel::BvpParams;

    fn ctx(params: (f64, f64, f64, f64), a: &str, f: &str, n: usize) -> OperatorContext {
        let p = BvpParams::new(params.0, params.1, params.2, params.3).unwrap();
        OperatorContext::new(p, parse(a, "t").unwrap(), parse(f, "u").unwrap(), n).unwrap()
    }

    fn small_opts(n: usize, rho: f64) -> SolveOptions {
        SolveOptions {
            grid_n: n,
            start_scales: default_start_scales(rho, 12),
            ..SolveOptions::with_rho_ref(rho)
        }
    }

    #[test]
    fn zero_nonlinearity_has_only_the_trivial_solution() {
        let c = ctx((2.0, 1.0 / 30.0, 1.0, 2.0), "5/32*(2-t)^3", "0", 64);
        let out = solve_fixed_points(&c, &small_opts(64, 1.0)).unwrap();
        assert!(out.positive.is_empty());
        let t = out.trivial.unwrap();
        assert_eq!(t.sup_norm, 0.0);
        assert_eq!(t.fixed_point_residual, 0.0);
        assert_eq!(t.ode_residual, 0.0);
        assert_eq!(t.bc_residuals, (0.0, 0.0));
        assert!(t.in_cone);
    }

    #[test]
    fn first_example_has_two_solutions_around_four() {
        let c = ctx((2.0, 1.0 / 30.0, 1.0, 2.0), "5/32*(2-t)^3", "u^(1/2)/2 + u^2/32", 256);
        let out = solve_fixed_points(&c, &small_opts(256, 4.0)).unwrap();
        assert!(out.positive.len() >= 2, "{}", out.positive.len());
        assert!(out.positive[0].sup_norm < 4.0);
        assert!(out.positive.last().unwrap().sup_norm > 4.0);
        for s in &out.positive {
            assert!(s.fixed_point_residual <= 1e-8);
            assert!(s.in_cone);
        }
    }

    #[test]
    fn constant_one_is_not_a_solution() {
        let c = ctx((2.0, 1.0 / 30.0, 1.0, 2.0), "5/32*(2-t)^3", "u^(1/2)/2 + u^2/32", 64);
        let g = gamma(c.params()).unwrap();
        let r = verify_solution(&c, &GridFunction::constant(*c.mesh(), 1.0), g);
        assert!(r.fixed_point_residual > 0.1);
    }

    #[test]
    fn no_fixed_point_reports_no_convergence() {
        // the load is too large for any positive solution to exist
        let c = ctx((2.0, 1.0 / 30.0, 1.0, 2.0), "5/32*(2-t)^3", "100 + 100*u^2", 32);
        let r = solve_fixed_points(&c, &small_opts(32, 1.0));
        assert!(matches!(r, Err(Error::NoConvergence { .. })), "{r:?}");
    }

    #[test]
    fn options_are_validated() {
        let c = ctx((2.0, 1.0 / 30.0, 1.0, 2.0), "5/32*(2-t)^3", "u", 32);
        let bad = SolveOptions {
            start_scales: vec![],
            ..SolveOptions::default()
        };
        assert!(solve_fixed_points(&c, &bad).is_err());
        assert_eq!(default_start_scales(4.0, 24).len(), 24);
        assert!((default_start_scales(4.0, 24)[23] - 4000.0).abs() < 1e-9);
    }

    #[test]
    fn empty_results_flag_every_bucket() {
        let p = BvpParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let a = parse("6/25*t", "t").unwrap();
        let f = parse("u*(1+799/(1+u^2))", "u").unwrap();
        let consts = ConeConstants::compute(&p, &a).unwrap();
        let est = estimate_asymptotics(&f, (None, None)).unwrap();
        let certs: Vec<_> = certify(&f, &consts, &est, DeclaredRho::default())
            .unwrap()
            .into_iter()
            .filter(|c| c.theorem == Theorem::Cor43)
            .collect();
        let report = classify_against_certificates(&mut [], &certs);
        assert_eq!(report.empty.len(), 1);
        assert!(!report.consistent());
    }
}
