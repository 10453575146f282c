//! Closed-form solution of the linear problem
//!
//! ```text
//! u'' + y = 0 on (0, T),   u(0) = beta u(eta),   u(T) = alpha int_0^eta u
//! ```
//!
//! together with an independent finite-difference solver used as an oracle,
//! and the positivity and cone checks that the closed form is expected to
//! satisfy for `y >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Mesh};

/// Absolute slack for sign and cone checks, scaled by `1 + ||u||`.
pub const CHECK_TOL: f64 = 1e-10;

/// Boundary data `(alpha, beta, eta, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpParams {
    alpha: f64,
    beta: f64,
    eta: f64,
    t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissibility {
    /// `0 < alpha < 2T/eta^2` and `0 <= beta < beta_sup`.
    Admissible,
    /// `alpha > 2T/eta^2` with `beta >= 0`: no positive solution exists.
    NoPositiveSolution,
    /// Anything else, including the boundary cases `alpha = 2T/eta^2` and
    /// `beta = beta_sup`.
    Excluded,
}

impl Admissibility {
    pub fn label(self) -> &'static str {
        match self {
            Admissibility::Admissible => "admissible",
            Admissibility::NoPositiveSolution => "no_positive_solution",
            Admissibility::Excluded => "excluded",
        }
    }
}

/// Classify `(alpha, beta, eta, T)` against the positivity window.
pub fn check_nonexistence_region(alpha: f64, beta: f64, eta: f64, t_end: f64) -> Admissibility {
    let all_finite = [alpha, beta, eta, t_end].iter().all(|v| v.is_finite());
    if !all_finite || !(eta > 0.0 && eta < t_end) {
        return Admissibility::Excluded;
    }
    let alpha_sup = 2.0 * t_end / (eta * eta);
    if alpha > alpha_sup && beta >= 0.0 {
        return Admissibility::NoPositiveSolution;
    }
    if !(alpha > 0.0 && alpha < alpha_sup) || beta < 0.0 {
        return Admissibility::Excluded;
    }
    let beta_sup = (2.0 * t_end - alpha * eta * eta) / (alpha * eta * eta - 2.0 * eta + 2.0 * t_end);
    if beta < beta_sup {
        Admissibility::Admissible
    } else {
        Admissibility::Excluded
    }
}

impl BvpParams {
    /// Parameters inside the positivity window; anything else is rejected.
    pub fn new(alpha: f64, beta: f64, eta: f64, t_end: f64) -> Result<Self> {
        match check_nonexistence_region(alpha, beta, eta, t_end) {
            Admissibility::Admissible => {}
            other => {
                return Err(Error::Inadmissible {
                    label: other.label(),
                    detail: format!("alpha = {alpha}, beta = {beta}, eta = {eta}, T = {t_end}"),
                })
            }
        }
        let p = BvpParams {
            alpha,
            beta,
            eta,
            t_end,
        };
        debug_assert!(p.shared_numerator() > 0.0);
        Ok(p)
    }

    /// Parameters for which the linear problem is merely uniquely solvable
    /// (`D != 0`). Positivity results do not apply to them.
    pub fn new_relaxed(alpha: f64, beta: f64, eta: f64, t_end: f64) -> Result<Self> {
        if ![alpha, beta, eta, t_end].iter().all(|v| v.is_finite()) || !(eta > 0.0 && eta < t_end) {
            return Err(Error::InvalidParams(format!(
                "need finite values with 0 < eta < T, got eta = {eta}, T = {t_end}"
            )));
        }
        let p = BvpParams {
            alpha,
            beta,
            eta,
            t_end,
        };
        let scale =
            2.0 * t_end + alpha.abs() * eta * eta + beta.abs() * (alpha.abs() * eta * eta + 2.0 * eta + 2.0 * t_end);
        if p.denominator().abs() <= 1e-12 * scale {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} makes the linear problem singular (D = 0)"
            )));
        }
        Ok(p)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn alpha_sup(&self) -> f64 {
        2.0 * self.t_end / (self.eta * self.eta)
    }

    pub fn beta_sup(&self) -> f64 {
        let (a, e, t) = (self.alpha, self.eta, self.t_end);
        (2.0 * t - a * e * e) / (a * e * e - 2.0 * e + 2.0 * t)
    }

    pub fn is_in_positivity_window(&self) -> bool {
        check_nonexistence_region(self.alpha, self.beta, self.eta, self.t_end) == Admissibility::Admissible
    }

    /// `D = (alpha eta^2 - 2T) - beta (2 eta - alpha eta^2 - 2T)`, the common
    /// denominator of the closed form.
    pub fn denominator(&self) -> f64 {
        let (a, b, e, t) = (self.alpha, self.beta, self.eta, self.t_end);
        (a * e * e - 2.0 * t) - b * (2.0 * e - a * e * e - 2.0 * t)
    }

    /// `(2T - alpha eta^2) - beta (alpha eta^2 - 2 eta + 2T)`, equal to `-D`
    /// and positive inside the window.
    pub fn shared_numerator(&self) -> f64 {
        let (a, b, e, t) = (self.alpha, self.beta, self.eta, self.t_end);
        (2.0 * t - a * e * e) - b * (a * e * e - 2.0 * e + 2.0 * t)
    }

    /// Default mesh for these parameters.
    pub fn mesh(&self, n_target: usize) -> Result<Mesh> {
        Mesh::new(self.eta, self.t_end, n_target)
    }

    fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        let tol = 1e-12 * self.t_end;
        if (mesh.eta() - self.eta).abs() > tol || (mesh.t_end() - self.t_end).abs() > tol {
            return Err(Error::EtaNotOnGrid { eta: self.eta });
        }
        Ok(())
    }
}

/// Closed-form solution on the mesh of `y`.
///
/// The three boundary integrals use Simpson on the two mesh pieces; the
/// Volterra part `int_0^t (t - s) y(s) ds = t P(t) - Q(t)` comes from running
/// integrals of `y` and `s y` in a single sweep.
pub fn solve_linear(params: &BvpParams, y: &GridFunction) -> Result<GridFunction> {
    let mesh = *y.mesh();
    params.check_mesh(&mesh)?;
    if let Some(v) = y.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("right-hand side contains {v}")));
    }
    Ok(GridFunction::from_raw(
        mesh,
        solve_linear_values(params, &mesh, y.values()),
    ))
}

pub(crate) fn solve_linear_values(params: &BvpParams, mesh: &Mesh, y: &[f64]) -> Vec<f64> {
    let (a, b, e, t_end) = (params.alpha, params.beta, params.eta, params.t_end);
    let nodes = mesh.nodes();
    let k = mesh.eta_index();

    let w1: Vec<f64> = nodes[..=k].iter().zip(y).map(|(s, v)| (e - s) * v).collect();
    let w2: Vec<f64> = nodes[..=k].iter().zip(y).map(|(s, v)| (e - s) * (e - s) * v).collect();
    let w3: Vec<f64> = nodes.iter().zip(y).map(|(s, v)| (t_end - s) * v).collect();
    let i1 = mesh.integrate_left(&w1);
    let i2 = mesh.integrate_left(&w2);
    let i3 = mesh.integrate(&w3);

    let sy: Vec<f64> = nodes.iter().zip(y).map(|(s, v)| s * v).collect();
    let p = mesh.cumulative(y);
    let q = mesh.cumulative(&sy);

    let d = params.denominator();
    nodes
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let c1 = b * (2.0 * t_end - a * e * e) - 2.0 * b * (1.0 - a * e) * t;
            let c2 = a * b * e - a * (b - 1.0) * t;
            let c3 = 2.0 * (b - 1.0) * t - 2.0 * b * e;
            (c1 * i1 + c2 * i2 + c3 * i3) / d - (t * p[i] - q[i])
        })
        .collect()
}

/// Second-order finite-difference solution of the same linear problem.
///
/// Central differences for `u'' = -y` at interior nodes, `u_0 = beta u_k`
/// with `k` the node at `eta`, and `u_n = alpha * trapezoid(u on [0, eta])`;
/// solved densely by LU.
pub fn fd_oracle_solve(params: &BvpParams, y: &GridFunction) -> Result<GridFunction> {
    let mesh = *y.mesh();
    params.check_mesh(&mesh)?;
    let nodes = mesh.nodes();
    let n = mesh.n();
    let k = mesh.eta_index();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);

    m[(0, 0)] = 1.0;
    m[(0, k)] -= params.beta;

    for i in 1..n {
        let hl = nodes[i] - nodes[i - 1];
        let hr = nodes[i + 1] - nodes[i];
        let c = 2.0 / (hl + hr);
        m[(i, i - 1)] = c / hl;
        m[(i, i)] = -c / hl - c / hr;
        m[(i, i + 1)] = c / hr;
        rhs[i] = -y.values()[i];
    }

    let h = mesh.h_left();
    m[(n, n)] = 1.0;
    for j in 0..=k {
        let w = if j == 0 || j == k { h / 2.0 } else { h };
        m[(n, j)] -= params.alpha * w;
    }

    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("finite-difference system".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("finite-difference system".into()));
    }
    GridFunction::new(mesh, sol.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeReport {
    pub min_on_tail: f64,
    pub norm: f64,
    /// `min_on_tail - gamma * norm`; negative values are violations.
    pub margin: f64,
    pub holds: bool,
}

/// `min_{[eta, T]} u >= gamma ||u||` up to `CHECK_TOL * (1 + ||u||)`.
pub fn check_cone_bound(params: &BvpParams, u: &GridFunction, gamma: f64) -> Result<ConeReport> {
    params.check_mesh(u.mesh())?;
    let norm = u.sup_norm();
    let min_on_tail = u.min_on_tail();
    let margin = min_on_tail - gamma * norm;
    Ok(ConeReport {
        min_on_tail,
        norm,
        margin,
        holds: margin >= -CHECK_TOL * (1.0 + norm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone_constants::gamma;

    fn example_one() -> BvpParams {
        BvpParams::new(2.0, 1.0 / 30.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn classification() {
        assert_eq!(
            check_nonexistence_region(2.0, 1.0 / 30.0, 1.0, 2.0),
            Admissibility::Admissible
        );
        assert_eq!(
            check_nonexistence_region(5.0, 0.0, 1.0, 2.0),
            Admissibility::NoPositiveSolution
        );
        assert_eq!(check_nonexistence_region(4.0, 0.0, 1.0, 2.0), Admissibility::Excluded);
        // beta at its supremum (1/2 for the first example)
        assert_eq!(check_nonexistence_region(2.0, 0.5, 1.0, 2.0), Admissibility::Excluded);
        assert_eq!(check_nonexistence_region(2.0, -0.1, 1.0, 2.0), Admissibility::Excluded);
        assert_eq!(check_nonexistence_region(2.0, 0.0, 2.0, 2.0), Admissibility::Excluded);
        assert_eq!(check_nonexistence_region(-1.0, 0.0, 1.0, 2.0), Admissibility::Excluded);
    }

    #[test]
    fn denominator_identity() {
        let p = example_one();
        assert!((p.denominator() + p.shared_numerator()).abs() < 1e-15);
        assert!((p.shared_numerator() - 28.0 / 15.0).abs() < 1e-15);
        assert_eq!(p.alpha_sup(), 4.0);
        assert!((p.beta_sup() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn relaxed_params_reject_only_singular_beta() {
        assert!(BvpParams::new(2.0, 0.7, 1.0, 2.0).is_err());
        let p = BvpParams::new_relaxed(2.0, 0.7, 1.0, 2.0).unwrap();
        assert!(!p.is_in_positivity_window());
        assert!(BvpParams::new_relaxed(2.0, 0.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn homogeneous_problem_has_zero_solution() {
        let p = example_one();
        let mesh = p.mesh(64).unwrap();
        let zero = GridFunction::zeros(mesh);
        assert_eq!(solve_linear(&p, &zero).unwrap().sup_norm(), 0.0);
        assert_eq!(fd_oracle_solve(&p, &zero).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn closed_form_satisfies_boundary_conditions() {
        let p = example_one();
        let mesh = p.mesh(1024).unwrap();
        let y = GridFunction::from_fn(mesh, |t| 1.0 + (3.0 * t).sin().powi(2)).unwrap();
        let u = solve_linear(&p, &y).unwrap();
        let scale = 1.0 + u.sup_norm();
        let v = u.values();
        assert!((v[0] - p.beta() * u.at_eta()).abs() <= 1e-8 * scale);
        assert!((v[mesh.n()] - p.alpha() * u.integral_to_eta()).abs() <= 1e-8 * scale);
    }

    #[test]
    fn closed_form_matches_polynomial_solution() {
        // y = 2 gives u = -t^2 + c1 t + c0 with the constants fixed by the
        // boundary conditions; solved by hand below.
        let p = example_one();
        let (a, b, e, t) = (p.alpha(), p.beta(), p.eta(), p.t_end());
        // u(0) = b u(e):        c0 = b(-e^2 + c1 e + c0)
        // u(T) = a int_0^e u:   -T^2 + c1 T + c0 = a(-e^3/3 + c1 e^2/2 + c0 e)
        let m = nalgebra::Matrix2::new(-b * e, 1.0 - b, t - a * e * e / 2.0, 1.0 - a * e);
        let r = nalgebra::Vector2::new(-b * e * e, t * t - a * e.powi(3) / 3.0);
        let c = m.lu().solve(&r).unwrap();
        let mesh = p.mesh(64).unwrap();
        let u = solve_linear(&p, &GridFunction::constant(mesh, 2.0)).unwrap();
        for (s, v) in mesh.nodes().iter().zip(u.values()) {
            assert!((v - (-s * s + c[0] * s + c[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_load_agrees_with_oracle() {
        let p = example_one();
        for n in [64, 128] {
            let mesh = p.mesh(n).unwrap();
            let y = GridFunction::constant(mesh, 1.0);
            let exact = solve_linear(&p, &y).unwrap();
            let fd = fd_oracle_solve(&p, &y).unwrap();
            let h = mesh.max_h();
            assert!(exact.distance(&fd) < 10.0 * h * h, "n = {n}: {}", exact.distance(&fd));
        }
    }

    #[test]
    fn nonnegative_load_gives_cone_element() {
        let p = BvpParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let mesh = p.mesh(256).unwrap();
        let y = GridFunction::from_fn(mesh, |t| (10.0 * t).cos().abs()).unwrap();
        let u = solve_linear(&p, &y).unwrap();
        assert!(u.min() >= 0.0);
        let g = gamma(&p).unwrap();
        assert!(check_cone_bound(&p, &u, g).unwrap().holds);
    }

    #[test]
    fn cone_bound_trivial_cases() {
        let p = example_one();
        let mesh = p.mesh(32).unwrap();
        let g = gamma(&p).unwrap();
        assert!(check_cone_bound(&p, &GridFunction::zeros(mesh), g).unwrap().holds);
        let one = check_cone_bound(&p, &GridFunction::constant(mesh, 1.0), g).unwrap();
        assert!(one.holds && g < 1.0);
        let dip = GridFunction::from_fn(mesh, |t| if t > 1.5 { 0.0 } else { 1.0 }).unwrap();
        assert!(!check_cone_bound(&p, &dip, g).unwrap().holds);
    }

    #[test]
    fn mismatched_mesh_is_rejected() {
        let p = example_one();
        let other = Mesh::new(0.5, 2.0, 32).unwrap();
        let y = GridFunction::zeros(other);
        assert!(matches!(solve_linear(&p, &y), Err(Error::EtaNotOnGrid { .. })));
        assert!(matches!(check_cone_bound(&p, &y, 0.5), Err(Error::EtaNotOnGrid { .. })));
    }
}
