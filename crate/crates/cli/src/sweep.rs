//! Constants and fired certificates over a grid of boundary parameters.

use std::path::Path;

use nonlocal_bvp::criteria::{certify, estimate_asymptotics};
use nonlocal_bvp::numfmt::g12;
use nonlocal_bvp::problem::{parse_number, ProblemSpec};
use nonlocal_bvp::{Admissibility, ConeConstants, Error};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Key {
    Alpha,
    Beta,
    Eta,
    T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vary {
    pub key: Key,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Vary {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

/// `KEY=LO:HI:STEPS`, bounds as decimals or `p/q`.
pub fn parse_vary(s: &str) -> Result<Vary, String> {
    let (key, range) = s.split_once('=').ok_or("expected KEY=LO:HI:STEPS")?;
    let key = match key.trim() {
        "alpha" => Key::Alpha,
        "beta" => Key::Beta,
        "eta" => Key::Eta,
        "T" => Key::T,
        other => return Err(format!("unknown parameter `{other}`; use alpha, beta, eta or T")),
    };
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err("expected KEY=LO:HI:STEPS".into());
    };
    let lo = parse_number(lo).ok_or(format!("bad lower bound `{lo}`"))?;
    let hi = parse_number(hi).ok_or(format!("bad upper bound `{hi}`"))?;
    let steps: usize = steps.trim().parse().map_err(|_| format!("bad step count `{steps}`"))?;
    if steps == 0 {
        return Err("empty sweep: STEPS must be at least 1".into());
    }
    if lo > hi {
        return Err(format!("lower bound {lo} exceeds upper bound {hi}"));
    }
    Ok(Vary { key, lo, hi, steps })
}

fn set(spec: &mut ProblemSpec, key: Key, v: f64) {
    match key {
        Key::Alpha => spec.alpha = v,
        Key::Beta => spec.beta = v,
        Key::Eta => spec.eta = v,
        Key::T => spec.t_end = v,
    }
}

pub const HEADER: [&str; 9] = [
    "alpha",
    "beta",
    "eta",
    "T",
    "admissible",
    "gamma",
    "lambda1",
    "lambda2",
    "fired_certificates",
];

pub fn run(path: &Path, vary: &[Vary], out: Option<&Path>) -> Result<(), Failure> {
    for (i, v) in vary.iter().enumerate() {
        if vary[..i].iter().any(|w| w.key == v.key) {
            return Err(Failure::Usage(format!("{:?} is varied twice", v.key)));
        }
    }
    let spec = ProblemSpec::from_path(path)?;
    let asymptotics = match estimate_asymptotics(&spec.f, spec.asymptotics) {
        Ok(a) => Some(a),
        Err(Error::Inconclusive { which }) => {
            eprintln!("warning: {which} is inconclusive; certificate column left empty");
            None
        }
        Err(e) => return Err(e.into()),
    };

    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(
            std::fs::File::create(p).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", p.display())))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let io = |e: csv::Error| Failure::Usage(format!("cannot write CSV: {e}"));
    w.write_record(HEADER).map_err(io)?;

    let axes: Vec<Vec<f64>> = vary.iter().map(Vary::points).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    for idx in 0..total {
        let mut point = spec.clone();
        let mut rem = idx;
        for (v, axis) in vary.iter().zip(&axes).rev() {
            set(&mut point, v.key, axis[rem % axis.len()]);
            rem /= axis.len();
        }
        let class = point.admissibility();
        let mut row = vec![
            g12(point.alpha),
            g12(point.beta),
            g12(point.eta),
            g12(point.t_end),
            class.label().to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ];
        if class == Admissibility::Admissible {
            let params = point.params()?;
            if let Ok(c) = ConeConstants::compute(&params, &point.a) {
                row[5] = g12(c.gamma);
                row[6] = g12(c.lambda1);
                row[7] = g12(c.lambda2);
                if let Some(est) = &asymptotics {
                    if let Ok(certs) = certify(&point.f, &c, est, point.hypotheses) {
                        let labels: Vec<&str> = certs.iter().map(|c| c.theorem.label()).collect();
                        row[8] = labels.join(";");
                    }
                }
            }
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::Usage(format!("cannot write CSV: {e}")))
}
