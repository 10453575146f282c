//! Sufficient conditions for one or two positive solutions, checked
//! mechanically, and the certificates they combine into.

use std::fmt;

use crate::cone_constants::ConeConstants;
use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};
use crate::numfmt::g12;

/// Relative slack on every inequality check.
pub const MARGIN: f64 = 1e-9;
pub const SCAN_NODES: usize = 4096;
pub const SCAN_REFINEMENTS: usize = 3;
pub const SEARCH_CANDIDATES: usize = 200;
pub const DEFAULT_RHO_RANGE: (f64, f64) = (1e-3, 1e3);

/// Limit of `f(u)/u` at `0+` or at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Zero,
    Finite(f64),
    Infinite,
}

impl Limit {
    pub fn value(self) -> f64 {
        match self {
            Limit::Zero => 0.0,
            Limit::Finite(v) => v,
            Limit::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Zero => write!(f, "0"),
            Limit::Finite(v) => f.write_str(&g12(*v)),
            Limit::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticEstimate {
    pub f0: Limit,
    pub f_inf: Limit,
    pub f0_declared: bool,
    pub f_inf_declared: bool,
    /// Range of `u` where finite samples of `f(u)/u` were taken, per side.
    pub f0_window: Option<(f64, f64)>,
    pub f_inf_window: Option<(f64, f64)>,
}

impl AsymptoticEstimate {
    pub fn declared(&self) -> bool {
        self.f0_declared && self.f_inf_declared
    }
}

/// Samples per decade when estimating limits.
const PER_DECADE: usize = 4;
const MIN_FINITE_SAMPLES: usize = 3;

#[derive(Debug, Clone, Copy)]
enum Side {
    Zero,
    Infinity,
}

fn sample_ratios(f: &Expr, side: Side) -> Result<Vec<(f64, f64)>> {
    let steps = 6 * PER_DECADE;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let exponent = k as f64 / PER_DECADE as f64;
        let u = match side {
            Side::Zero => 10f64.powf(-2.0 - exponent),
            Side::Infinity => 10f64.powf(2.0 + exponent),
        };
        match f.eval(u) {
            Ok(v) => {
                let r = v / u;
                if !r.is_finite() {
                    break;
                }
                out.push((u, r));
            }
            Err(EvalError::NonFinite) => break,
            Err(source) => {
                return Err(Error::Eval {
                    source,
                    var: "u",
                    at: u,
                })
            }
        }
    }
    Ok(out)
}

fn classify(samples: &[(f64, f64)]) -> Option<Limit> {
    let n = samples.len();
    if n < MIN_FINITE_SAMPLES {
        return None;
    }
    let r: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let last = r[n - 1];
    let tail = &r[n - MIN_FINITE_SAMPLES..];
    let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    let decade_ratio = if n > PER_DECADE && r[n - 1 - PER_DECADE] != 0.0 {
        Some(last / r[n - 1 - PER_DECADE])
    } else {
        None
    };

    if last == 0.0 && tail.windows(2).all(|w| w[1] <= w[0]) {
        return Some(Limit::Zero);
    }
    if decreasing && (last.abs() < 1e-6 || decade_ratio.is_some_and(|q| q.abs() < 1.0 / 1.5)) {
        return Some(Limit::Zero);
    }
    if increasing && (last > 1e6 || decade_ratio.is_some_and(|q| q > 1.5)) {
        return Some(Limit::Infinite);
    }
    if tail.iter().all(|v| (v - last).abs() <= 0.01 * last.abs()) {
        // r(u) ~ L + c*x with x = u or 1/u shrinking by q per step
        let q = 10f64.powf(1.0 / PER_DECADE as f64);
        let prev = r[n - 2];
        return Some(Limit::Finite((q * last - prev) / (q - 1.0)));
    }
    None
}

/// Estimate `f0` and `f_inf`, taking any declared side verbatim.
///
/// Sampled at `u = 10^-2 .. 10^-8` and `10^2 .. 10^8`, four points per
/// decade. Sampling stops at the first overflow.
pub fn estimate_asymptotics(f: &Expr, declared: (Option<Limit>, Option<Limit>)) -> Result<AsymptoticEstimate> {
    let mut est = AsymptoticEstimate {
        f0: Limit::Zero,
        f_inf: Limit::Zero,
        f0_declared: declared.0.is_some(),
        f_inf_declared: declared.1.is_some(),
        f0_window: None,
        f_inf_window: None,
    };
    for (side, decl, which) in [(Side::Zero, declared.0, "f0"), (Side::Infinity, declared.1, "f_inf")] {
        let (limit, window) = match decl {
            Some(l) => (l, None),
            None => {
                let samples = sample_ratios(f, side)?;
                let limit = classify(&samples).ok_or(Error::Inconclusive { which })?;
                let (a, b) = (samples[0].0, samples[samples.len() - 1].0);
                (limit, Some((a.min(b), a.max(b))))
            }
        };
        match side {
            Side::Zero => {
                est.f0 = limit;
                est.f0_window = window;
            }
            Side::Infinity => {
                est.f_inf = limit;
                est.f_inf_window = window;
            }
        }
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
    H8,
    D1,
    D2,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisWitness {
    pub name: Hypothesis,
    pub holds: bool,
    pub rho: Option<f64>,
    pub m: Option<f64>,
    pub theta: Option<f64>,
    pub evidence: String,
    /// Passed only thanks to the relative margin.
    pub marginal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub nodes: usize,
    pub refinements: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            nodes: SCAN_NODES,
            refinements: SCAN_REFINEMENTS,
        }
    }
}

impl ScanOptions {
    pub fn doubled(self) -> Self {
        ScanOptions {
            nodes: self.nodes * 2,
            refinements: self.refinements,
        }
    }
}

fn eval_u(f: &Expr, u: f64) -> Result<f64> {
    f.eval(u).map_err(|source| Error::Eval {
        source,
        var: "u",
        at: u,
    })
}

/// Extremum of `f` over `[lo, hi]`: uniform scan, then repeated rescans of
/// the two cells around the best node.
fn scan_extremum(f: &Expr, lo: f64, hi: f64, maximize: bool, opts: ScanOptions) -> Result<f64> {
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut best = eval_u(f, lo)?;
    let hi_v = eval_u(f, hi)?;
    if better(hi_v, best) {
        best = hi_v;
    }
    let (mut a, mut b, mut cells) = (lo, hi, opts.nodes.max(2));
    for _ in 0..=opts.refinements {
        let h = (b - a) / cells as f64;
        let mut arg = a;
        let mut local = eval_u(f, a)?;
        for i in 1..=cells {
            let u = if i == cells { b } else { a + i as f64 * h };
            let v = eval_u(f, u)?;
            if better(v, local) {
                local = v;
                arg = u;
            }
        }
        if better(local, best) {
            best = local;
        }
        a = (arg - h).max(lo);
        b = (arg + h).min(hi);
        cells = 64;
        if !(b > a) {
            break;
        }
    }
    Ok(best)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParams(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// `f(u) <= M rho` on `[0, rho]` for some `M` in `(0, Lambda_1]`.
pub fn check_h2(f: &Expr, lambda1: f64, rho: f64) -> Result<HypothesisWitness> {
    check_h2_with(f, lambda1, rho, ScanOptions::default())
}

pub fn check_h2_with(f: &Expr, lambda1: f64, rho: f64, scan: ScanOptions) -> Result<HypothesisWitness> {
    check_rho(rho)?;
    let s = scan_extremum(f, 0.0, rho, true, scan)?;
    let bound = lambda1 * rho;
    let holds = s <= bound * (1.0 + MARGIN);
    let m = if holds {
        (s / rho).max(f64::MIN_POSITIVE).min(lambda1)
    } else {
        s / rho
    };
    Ok(HypothesisWitness {
        name: Hypothesis::H2,
        holds,
        rho: Some(rho),
        m: Some(m),
        theta: None,
        evidence: format!("sampled extremum: max f on [0, {}] = {}", g12(rho), g12(s)),
        marginal: holds && s > bound,
    })
}

/// `f(u) >= M rho` on `[gamma rho, rho]` for some `M >= Lambda_2`.
pub fn check_h4(f: &Expr, lambda2: f64, gamma: f64, rho: f64) -> Result<HypothesisWitness> {
    check_h4_with(f, lambda2, gamma, rho, ScanOptions::default())
}

pub fn check_h4_with(f: &Expr, lambda2: f64, gamma: f64, rho: f64, scan: ScanOptions) -> Result<HypothesisWitness> {
    check_rho(rho)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParams(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let m = scan_extremum(f, gamma * rho, rho, false, scan)?;
    let bound = lambda2 * rho;
    let holds = m >= bound * (1.0 - MARGIN);
    Ok(HypothesisWitness {
        name: Hypothesis::H4,
        holds,
        rho: Some(rho),
        m: Some(m / rho),
        theta: None,
        evidence: format!(
            "sampled extremum: min f on [{}, {}] = {}",
            g12(gamma * rho),
            g12(rho),
            g12(m)
        ),
        marginal: holds && m < bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    H2,
    H4,
}

/// First passing `rho` among 200 log-spaced candidates in `[rho_min, rho_max]`.
/// Candidates where `f` cannot be evaluated count as failures.
pub fn search_rho(
    f: &Expr,
    which: Which,
    constants: &ConeConstants,
    rho_min: f64,
    rho_max: f64,
) -> Option<HypothesisWitness> {
    search_rho_excluding(f, which, constants, rho_min, rho_max, None)
}

pub fn search_rho_excluding(
    f: &Expr,
    which: Which,
    constants: &ConeConstants,
    rho_min: f64,
    rho_max: f64,
    exclude: Option<f64>,
) -> Option<HypothesisWitness> {
    if !(rho_min > 0.0 && rho_min < rho_max) {
        return None;
    }
    let (l0, l1) = (rho_min.ln(), rho_max.ln());
    (0..SEARCH_CANDIDATES)
        .map(|i| {
            if i == 0 {
                rho_min
            } else if i == SEARCH_CANDIDATES - 1 {
                rho_max
            } else {
                (l0 + (l1 - l0) * i as f64 / (SEARCH_CANDIDATES - 1) as f64).exp()
            }
        })
        .filter(|rho| exclude.is_none_or(|x| (rho - x).abs() > MARGIN * x))
        .find_map(|rho| {
            let w = match which {
                Which::H2 => check_h2(f, constants.lambda1, rho),
                Which::H4 => check_h4(f, constants.lambda2, constants.gamma, rho),
            };
            w.ok().filter(|w| w.holds)
        })
        .map(|mut w| {
            w.evidence.push_str(" (rho found by search)");
            w
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Theorem {
    Thm31,
    Thm32,
    Thm41,
    Cor42,
    Cor43,
    Cor44,
    Cor45,
    Thm11D1,
    Thm11D2,
}

impl Theorem {
    pub const ALL: [Theorem; 9] = [
        Theorem::Thm31,
        Theorem::Thm32,
        Theorem::Thm41,
        Theorem::Cor42,
        Theorem::Cor43,
        Theorem::Cor44,
        Theorem::Cor45,
        Theorem::Thm11D1,
        Theorem::Thm11D2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Theorem::Thm31 => "Thm3.1",
            Theorem::Thm32 => "Thm3.2",
            Theorem::Thm41 => "Thm4.1",
            Theorem::Cor42 => "Cor4.2",
            Theorem::Cor43 => "Cor4.3",
            Theorem::Cor44 => "Cor4.4",
            Theorem::Cor45 => "Cor4.5",
            Theorem::Thm11D1 => "Thm1.1-D1",
            Theorem::Thm11D2 => "Thm1.1-D2",
        }
    }

    pub fn from_label(s: &str) -> Option<Theorem> {
        Theorem::ALL.into_iter().find(|t| t.label() == s)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Open interval `(lo, hi)` for the sup-norm of a solution; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormInterval {
    pub lo: f64,
    pub hi: f64,
}

impl NormInterval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

impl fmt::Display for NormInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hi.is_infinite() {
            write!(f, "({}, inf)", g12(self.lo))
        } else {
            write!(f, "({}, {})", g12(self.lo), g12(self.hi))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub theorem: Theorem,
    pub solution_count: u8,
    pub intervals: Vec<NormInterval>,
    pub witnesses: Vec<HypothesisWitness>,
}

impl Certificate {
    pub fn marginal(&self) -> bool {
        self.witnesses.iter().any(|w| w.marginal)
    }

    fn searched_witnesses(&self) -> usize {
        self.witnesses.iter().filter(|w| w.rho.is_some()).count()
    }
}

/// The certificate that says most with least: largest solution count, then
/// fewest `rho` witnesses, then theorem order.
pub fn primary(certs: &[Certificate]) -> Option<&Certificate> {
    certs
        .iter()
        .min_by_key(|c| (std::cmp::Reverse(c.solution_count), c.searched_witnesses(), c.theorem))
}

/// `rho` values supplied with the problem; unset ones are searched for.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeclaredRho {
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
}

fn limit_evidence(est: &AsymptoticEstimate, at_zero: bool) -> &'static str {
    let declared = if at_zero { est.f0_declared } else { est.f_inf_declared };
    if declared {
        "declared"
    } else {
        "sampled limit"
    }
}

fn asymptotic_witness(
    name: Hypothesis,
    holds: bool,
    marginal: bool,
    theta: Option<f64>,
    evidence: String,
) -> HypothesisWitness {
    HypothesisWitness {
        name,
        holds,
        rho: None,
        m: None,
        theta,
        evidence,
        marginal: holds && marginal,
    }
}

/// `limit < threshold` up to the margin; returns (holds, marginal).
fn below(limit: Limit, threshold: f64) -> (bool, bool) {
    match limit {
        Limit::Infinite => (false, false),
        l => {
            let v = l.value();
            (v < threshold * (1.0 + MARGIN), v >= threshold)
        }
    }
}

fn above(limit: Limit, threshold: f64) -> (bool, bool) {
    match limit {
        Limit::Infinite => (true, false),
        l => {
            let v = l.value();
            (v > threshold * (1.0 - MARGIN), v <= threshold)
        }
    }
}

fn theta1(limit: Limit, lambda1: f64) -> f64 {
    (limit.value() / lambda1 * (1.0 + 1e-6)).clamp(1e-6, 1.0)
}

fn theta2(limit: Limit, gamma: f64, lambda2: f64) -> f64 {
    match limit {
        Limit::Infinite => 1.0,
        l => (gamma * l.value() / lambda2 * (1.0 - 1e-6)).clamp(1.0, 1e6),
    }
}

/// Every certificate that fires, in theorem order.
pub fn certify(
    f: &Expr,
    constants: &ConeConstants,
    asymptotics: &AsymptoticEstimate,
    declared: DeclaredRho,
) -> Result<Vec<Certificate>> {
    let c = constants;
    let (f0, finf) = (asymptotics.f0, asymptotics.f_inf);
    let ev0 = limit_evidence(asymptotics, true);
    let evi = limit_evidence(asymptotics, false);
    let (lo, hi) = DEFAULT_RHO_RANGE;

    let h2 = match declared.rho1 {
        Some(rho) => Some(check_h2(f, c.lambda1, rho)?).filter(|w| w.holds),
        None => search_rho(f, Which::H2, c, lo, hi),
    };
    let mut h4 = match declared.rho2 {
        Some(rho) => Some(check_h4(f, c.lambda2, c.gamma, rho)?).filter(|w| w.holds),
        None => search_rho(f, Which::H4, c, lo, hi),
    };

    let h1 = asymptotic_witness(
        Hypothesis::H1,
        f0 == Limit::Infinite && finf == Limit::Infinite,
        false,
        None,
        format!("f0 = {f0}, f_inf = {finf} ({ev0}/{evi})"),
    );
    let h3 = asymptotic_witness(
        Hypothesis::H3,
        f0 == Limit::Zero && finf == Limit::Zero,
        false,
        None,
        format!("f0 = {f0}, f_inf = {finf} ({ev0}/{evi})"),
    );
    let (ok, marg) = below(f0, c.lambda1);
    let h5 = asymptotic_witness(
        Hypothesis::H5,
        ok,
        marg,
        ok.then(|| theta1(f0, c.lambda1)),
        format!("f0 = {f0} vs Lambda1 = {} ({ev0})", g12(c.lambda1)),
    );
    let (ok, marg) = above(finf, c.lambda2_over_gamma());
    let h6 = asymptotic_witness(
        Hypothesis::H6,
        ok,
        marg,
        ok.then(|| theta2(finf, c.gamma, c.lambda2)),
        format!(
            "f_inf = {finf} vs Lambda2/gamma = {} ({evi})",
            g12(c.lambda2_over_gamma())
        ),
    );
    let (ok, marg) = above(f0, c.lambda2_over_gamma());
    let h7 = asymptotic_witness(
        Hypothesis::H7,
        ok,
        marg,
        ok.then(|| theta2(f0, c.gamma, c.lambda2)),
        format!("f0 = {f0} vs Lambda2/gamma = {} ({ev0})", g12(c.lambda2_over_gamma())),
    );
    let (ok, marg) = below(finf, c.lambda1);
    let h8 = asymptotic_witness(
        Hypothesis::H8,
        ok,
        marg,
        ok.then(|| theta1(finf, c.lambda1)),
        format!("f_inf = {finf} vs Lambda1 = {} ({evi})", g12(c.lambda1)),
    );
    let d1 = asymptotic_witness(
        Hypothesis::D1,
        f0 == Limit::Zero && finf == Limit::Infinite,
        false,
        None,
        format!("f0 = {f0}, f_inf = {finf} ({ev0}/{evi})"),
    );
    let d2 = asymptotic_witness(
        Hypothesis::D2,
        f0 == Limit::Infinite && finf == Limit::Zero,
        false,
        None,
        format!("f0 = {f0}, f_inf = {finf} ({ev0}/{evi})"),
    );

    let zero_inf = NormInterval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    let split = |rho: f64| {
        vec![
            NormInterval { lo: 0.0, hi: rho },
            NormInterval {
                lo: rho,
                hi: f64::INFINITY,
            },
        ]
    };
    let mut out = Vec::new();
    let mut fire = |theorem, count, intervals, witnesses: Vec<&HypothesisWitness>| {
        out.push(Certificate {
            theorem,
            solution_count: count,
            intervals,
            witnesses: witnesses.into_iter().cloned().collect(),
        })
    };

    if let (true, Some(w2)) = (h1.holds, &h2) {
        fire(Theorem::Thm31, 2, split(w2.rho.unwrap()), vec![&h1, w2]);
    }
    if let (true, Some(w4)) = (h3.holds, &h4) {
        fire(Theorem::Thm32, 2, split(w4.rho.unwrap()), vec![&h3, w4]);
    }
    if let (Some(w2), Some(w4)) = (&h2, &h4) {
        let (r1, r2) = (w2.rho.unwrap(), w4.rho.unwrap());
        if (r1 - r2).abs() <= MARGIN * r1 && declared.rho2.is_none() {
            h4 = search_rho_excluding(f, Which::H4, c, lo, hi, Some(r1));
        }
    }
    if let (Some(w2), Some(w4)) = (&h2, &h4) {
        let (r1, r2) = (w2.rho.unwrap(), w4.rho.unwrap());
        if (r1 - r2).abs() > MARGIN * r1 {
            fire(
                Theorem::Thm41,
                1,
                vec![NormInterval {
                    lo: r1.min(r2),
                    hi: r1.max(r2),
                }],
                vec![w2, w4],
            );
        }
    }
    if h5.holds && h6.holds {
        fire(Theorem::Cor42, 1, vec![zero_inf], vec![&h5, &h6]);
    }
    if h7.holds && h8.holds {
        fire(Theorem::Cor43, 1, vec![zero_inf], vec![&h7, &h8]);
    }
    if let (Some(w2), true, true) = (&h2, h6.holds, h7.holds) {
        fire(Theorem::Cor44, 2, split(w2.rho.unwrap()), vec![w2, &h6, &h7]);
    }
    if let (Some(w4), true, true) = (&h4, h5.holds, h8.holds) {
        fire(Theorem::Cor45, 2, split(w4.rho.unwrap()), vec![w4, &h5, &h8]);
    }
    if d1.holds {
        fire(Theorem::Thm11D1, 1, vec![zero_inf], vec![&d1]);
    }
    if d2.holds {
        fire(Theorem::Thm11D2, 1, vec![zero_inf], vec![&d2]);
    }
    Ok(out)
}
