//! Problem files: a line-oriented, sectioned `key = value` format.
//!
//! ```text
//! # comment
//! [params]
//! alpha = 2
//! beta = 1/30          # decimals or p/q
//! eta = 1
//! T = 2
//!
//! [functions]
//! a = "5/32*(2-t)^3"
//! f = "u^(1/2)/2 + u^2/32"
//!
//! [asymptotics]        # optional; 0, inf or a decimal
//! f0 = inf
//! finf = inf
//!
//! [hypotheses]         # optional
//! rho1 = 4
//!
//! [solver]             # optional
//! n = 1024
//! residual_tol = 1e-8
//! max_iterations = 500
//! start_scales = 0.01, 1, 100
//! ```

use std::collections::HashMap;
use std::path::Path;

use crate::criteria::{DeclaredRho, Limit};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::linear_kernel::{check_nonexistence_region, Admissibility, BvpParams};
use crate::operator::OperatorContext;
use crate::solver::SolveOptions;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverOverrides {
    pub n: Option<usize>,
    pub residual_tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub start_scales: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub t_end: f64,
    pub a: Expr,
    pub f: Expr,
    pub asymptotics: (Option<Limit>, Option<Limit>),
    pub hypotheses: DeclaredRho,
    pub solver: SolverOverrides,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("params", &["alpha", "beta", "eta", "T"]),
    ("functions", &["a", "f"]),
    ("asymptotics", &["f0", "finf"]),
    ("hypotheses", &["rho1", "rho2"]),
    ("solver", &["n", "residual_tol", "max_iterations", "start_scales"]),
];

fn file_err(line: usize, msg: impl Into<String>) -> Error {
    Error::ProblemFile { line, msg: msg.into() }
}

/// Decimal or `p/q`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            if q == 0.0 {
                return None;
            }
            p / q
        }
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

fn parse_limit(s: &str) -> Option<Limit> {
    match s.trim() {
        "inf" => Some(Limit::Infinite),
        other => {
            let v: f64 = other.parse().ok()?;
            if v == 0.0 {
                Some(Limit::Zero)
            } else if v > 0.0 && v.is_finite() {
                Some(Limit::Finite(v))
            } else {
                None
            }
        }
    }
}

/// Drop a trailing `#` comment that is not inside double quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

impl ProblemSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| file_err(0, format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    /// Positivity-window parameters; fails with `Error::Inadmissible` outside it.
    pub fn params(&self) -> Result<BvpParams> {
        BvpParams::new(self.alpha, self.beta, self.eta, self.t_end)
    }

    pub fn admissibility(&self) -> Admissibility {
        check_nonexistence_region(self.alpha, self.beta, self.eta, self.t_end)
    }

    pub fn grid_n(&self, default: usize) -> usize {
        self.solver.n.unwrap_or(default)
    }

    pub fn context(&self, n: usize) -> Result<OperatorContext> {
        OperatorContext::new(self.params()?, self.a.clone(), self.f.clone(), n)
    }

    /// Solver options with this file's overrides applied on top of `base`.
    pub fn solve_options(&self, base: SolveOptions) -> SolveOptions {
        let o = &self.solver;
        SolveOptions {
            grid_n: o.n.unwrap_or(base.grid_n),
            residual_tol: o.residual_tol.unwrap_or(base.residual_tol),
            max_iterations: o.max_iterations.unwrap_or(base.max_iterations),
            start_scales: o.start_scales.clone().unwrap_or(base.start_scales),
            dedup_distance: base.dedup_distance,
        }
    }
}

impl std::str::FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut values: HashMap<(&str, &str), (usize, String)> = HashMap::new();
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                let known = SECTIONS.iter().find(|(s, _)| *s == name);
                section = Some(
                    known
                        .ok_or_else(|| file_err(line_no, format!("unknown section [{name}]")))?
                        .0,
                );
                continue;
            }
            let sec = section.ok_or_else(|| file_err(line_no, "key outside of any section"))?;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| file_err(line_no, format!("expected key = value, got `{line}`")))?;
            let key = key.trim();
            let keys = SECTIONS.iter().find(|(s, _)| *s == sec).unwrap().1;
            let key = *keys
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| file_err(line_no, format!("unknown key `{key}` in [{sec}]")))?;
            if values.insert((sec, key), (line_no, value.trim().to_string())).is_some() {
                return Err(file_err(line_no, format!("duplicate key `{key}` in [{sec}]")));
            }
        }

        let get = |sec: &'static str, key: &'static str| values.get(&(sec, key));
        let required = |sec: &'static str, key: &'static str| {
            get(sec, key).ok_or_else(|| file_err(0, format!("missing required key `{key}` in [{sec}]")))
        };
        let number = |sec, key| -> Result<Option<f64>> {
            get(sec, key)
                .map(|(line, v)| parse_number(v).ok_or_else(|| file_err(*line, format!("`{key}`: not a number: {v}"))))
                .transpose()
        };
        let param = |key| -> Result<f64> {
            required("params", key)?;
            Ok(number("params", key)?.unwrap())
        };
        let function = |key, var| -> Result<Expr> {
            let (line, v) = required("functions", key)?;
            let inner = v
                .strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .ok_or_else(|| file_err(*line, format!("`{key}` must be a double-quoted expression")))?;
            parse(inner, var).map_err(|e| file_err(*line, format!("`{key}`: {e}")))
        };
        let limit = |key| -> Result<Option<Limit>> {
            get("asymptotics", key)
                .map(|(line, v)| {
                    parse_limit(v)
                        .ok_or_else(|| file_err(*line, format!("`{key}` must be 0, inf or a positive decimal")))
                })
                .transpose()
        };
        let positive = |sec, key| -> Result<Option<f64>> {
            match number(sec, key)? {
                Some(v) if v <= 0.0 => Err(file_err(get(sec, key).unwrap().0, format!("`{key}` must be positive"))),
                other => Ok(other),
            }
        };
        let count = |key| -> Result<Option<usize>> {
            get("solver", key)
                .map(|(line, v)| {
                    v.parse::<usize>()
                        .ok()
                        .filter(|n| *n > 0)
                        .ok_or_else(|| file_err(*line, format!("`{key}` must be a positive integer")))
                })
                .transpose()
        };

        let n = count("n")?;
        if let Some(n) = n {
            if n < 2 || n % 2 != 0 {
                return Err(file_err(
                    get("solver", "n").unwrap().0,
                    "`n` must be an even integer >= 2",
                ));
            }
        }
        let start_scales = get("solver", "start_scales")
            .map(|(line, v)| {
                v.split(',')
                    .map(|s| parse_number(s).filter(|x| *x > 0.0))
                    .collect::<Option<Vec<f64>>>()
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| file_err(*line, "`start_scales` must be a comma list of positive numbers"))
            })
            .transpose()?;

        Ok(ProblemSpec {
            alpha: param("alpha")?,
            beta: param("beta")?,
            eta: param("eta")?,
            t_end: param("T")?,
            a: function("a", "t")?,
            f: function("f", "u")?,
            asymptotics: (limit("f0")?, limit("finf")?),
            hypotheses: DeclaredRho {
                rho1: positive("hypotheses", "rho1")?,
                rho2: positive("hypotheses", "rho2")?,
            },
            solver: SolverOverrides {
                n,
                residual_tol: positive("solver", "residual_tol")?,
                max_iterations: count("max_iterations")?,
                start_scales,
            },
        })
    }
}

const BUILTIN: [&str; 4] = [
    include_str!("../problems/example1.bvp"),
    include_str!("../problems/example2.bvp"),
    include_str!("../problems/example3.bvp"),
    include_str!("../problems/example4.bvp"),
];

/// Source text of built-in example `id` (1 to 4).
pub fn builtin_source(id: usize) -> Option<&'static str> {
    id.checked_sub(1).and_then(|i| BUILTIN.get(i)).copied()
}

pub fn builtin(id: usize) -> Option<ProblemSpec> {
    builtin_source(id).map(|s| s.parse().expect("built-in problems parse"))
}
