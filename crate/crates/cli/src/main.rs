use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nonlocal_bvp::criteria::{certify, estimate_asymptotics, primary, AsymptoticEstimate, Certificate};
use nonlocal_bvp::numfmt::g12;
use nonlocal_bvp::problem::ProblemSpec;
use nonlocal_bvp::solver::{
    classify_against_certificates, solve_fixed_points, ClassificationReport, SolveOptions, SolveOutcome, DEFAULT_GRID_N,
};
use nonlocal_bvp::{check_coefficients, Admissibility, BvpParams, ConeConstants, Error, OperatorContext};

mod reproduce;
mod sweep;

fn opt(x: Option<f64>) -> String {
    x.map(g12).unwrap_or_else(|| "-".into())
}

#[derive(Parser)]
#[command(
    name = "nlbvp",
    version,
    about = "Positive solutions of u'' + a(t) f(u) = 0, u(0) = beta u(eta), u(T) = alpha int_0^eta u"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the parameters and sample the sign conditions on a and f.
    Validate { spec: PathBuf },
    /// Print gamma, Lambda1, Lambda2 and the gamma branches.
    Constants { spec: PathBuf },
    /// List every existence certificate that fires.
    Certify {
        spec: PathBuf,
        /// Machine-readable key=value output.
        #[arg(long)]
        porcelain: bool,
    },
    /// Compute positive solutions and match them against the certificates.
    Solve {
        spec: PathBuf,
        /// Write each solution as <DIR>/solution_<k>.csv.
        #[arg(long, value_name = "DIR")]
        dump: Option<PathBuf>,
        /// Grid size (default: [solver] n, then BVP_DEFAULT_GRID_N, then 1024).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Check a built-in example against its published constants.
    Reproduce {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
        #[arg(long)]
        n: Option<usize>,
        /// Skip the solver stage.
        #[arg(long)]
        no_solve: bool,
    },
    /// Tabulate constants and certificates over a parameter grid as CSV.
    Sweep {
        spec: PathBuf,
        /// KEY=LO:HI:STEPS with KEY one of alpha, beta, eta, T. Repeatable.
        #[arg(long, required = true, value_parser = sweep::parse_vary)]
        vary: Vec<sweep::Vary>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
    Mismatch,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e {
                Error::Inadmissible { .. } | Error::ConditionB2(_) | Error::Degenerate(_) => 1,
                Error::Inconclusive { .. } => 3,
                Error::NoConvergence { .. } => 4,
                _ => 2,
            },
            Failure::Usage(_) => 2,
            Failure::Mismatch => 5,
        }
    }
}

pub fn default_grid_n() -> Result<usize, Failure> {
    match std::env::var("BVP_DEFAULT_GRID_N") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n >= 2 && n % 2 == 0)
            .ok_or_else(|| Failure::Usage(format!("BVP_DEFAULT_GRID_N must be an even integer >= 2, got `{v}`"))),
        Err(_) => Ok(DEFAULT_GRID_N),
    }
}

fn load(path: &Path) -> Result<ProblemSpec, Failure> {
    Ok(ProblemSpec::from_path(path)?)
}

/// Constants, asymptotics and certificates of an admissible problem.
pub struct Analysis {
    pub params: BvpParams,
    pub constants: ConeConstants,
    pub asymptotics: AsymptoticEstimate,
    pub certificates: Vec<Certificate>,
}

pub fn analyze(spec: &ProblemSpec) -> Result<Analysis, Failure> {
    let params = spec.params()?;
    let constants = ConeConstants::compute(&params, &spec.a)?;
    let asymptotics = estimate_asymptotics(&spec.f, spec.asymptotics)?;
    let certificates = certify(&spec.f, &constants, &asymptotics, spec.hypotheses)?;
    Ok(Analysis {
        params,
        constants,
        asymptotics,
        certificates,
    })
}

pub struct Solved {
    pub options: SolveOptions,
    pub outcome: SolveOutcome,
    pub report: ClassificationReport,
}

pub fn solve(
    spec: &ProblemSpec,
    params: BvpParams,
    certs: &[Certificate],
    n: Option<usize>,
) -> Result<Solved, Failure> {
    let rho_ref = primary(certs)
        .and_then(|c| c.witnesses.iter().find_map(|w| w.rho))
        .unwrap_or(1.0);
    let base = SolveOptions {
        grid_n: default_grid_n()?,
        ..SolveOptions::with_rho_ref(rho_ref)
    };
    let mut options = spec.solve_options(base);
    if let Some(n) = n {
        options.grid_n = n;
    }
    options.validate()?;
    let ctx = OperatorContext::new(params, spec.a.clone(), spec.f.clone(), options.grid_n)?;
    let mut outcome = solve_fixed_points(&ctx, &options)?;
    let report = classify_against_certificates(&mut outcome.positive, certs);
    Ok(Solved {
        options,
        outcome,
        report,
    })
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let spec = load(path)?;
    let class = spec.admissibility();
    println!("admissibility = {}", class.label());
    let relaxed = BvpParams::new_relaxed(spec.alpha, spec.beta, spec.eta, spec.t_end);
    if let Ok(p) = &relaxed {
        println!("alpha = {} (alpha_sup = {})", g12(spec.alpha), g12(p.alpha_sup()));
        println!("beta = {} (beta_sup = {})", g12(spec.beta), g12(p.beta_sup()));
    }
    if class == Admissibility::NoPositiveSolution {
        println!("alpha exceeds 2T/eta^2: the problem has no positive solution");
    }
    let mut ok = class == Admissibility::Admissible;
    if let Ok(p) = &relaxed {
        let check = check_coefficients(&spec.a, &spec.f, p, nonlocal_bvp::cone_constants::DEFAULT_U_PROBE_MAX)?;
        println!("a_nonneg = {}", check.a_nonneg);
        println!("a_positive_on_tail = {}", check.a_positive_somewhere_on_tail);
        println!("f_nonneg = {}", check.f_nonneg);
        if check.f_unevaluated > 0 {
            println!("f_unevaluated = {} (overflow)", check.f_unevaluated);
        }
        ok &= check.all_hold();
    }
    if ok {
        Ok(())
    } else {
        let label = if class == Admissibility::Admissible {
            "sign conditions fail"
        } else {
            class.label()
        };
        Err(Error::Inadmissible {
            label,
            detail: path.display().to_string(),
        }
        .into())
    }
}

fn cmd_constants(path: &Path) -> Result<(), Failure> {
    let spec = load(path)?;
    let params = spec.params()?;
    let c = ConeConstants::compute(&params, &spec.a)?;
    println!("gamma = {}", g12(c.gamma));
    for (i, b) in c.gamma_branches.iter().enumerate() {
        println!("gamma_branch_{} = {}", i + 1, g12(*b));
    }
    println!("lambda1 = {}", g12(c.lambda1));
    println!("lambda2 = {}", g12(c.lambda2));
    println!("lambda2_over_gamma = {}", g12(c.lambda2_over_gamma()));
    println!("alpha_sup = {}", g12(c.alpha_sup));
    println!("beta_sup = {}", g12(c.beta_sup));
    Ok(())
}

fn source(declared: bool) -> &'static str {
    if declared {
        "declared"
    } else {
        "sampled"
    }
}

pub fn headline(c: &Certificate) -> String {
    match (c.solution_count, c.intervals.as_slice()) {
        (2, [first, ..]) => format!("two solutions, 0<|u1|<{}<|u2|", g12(first.hi)),
        (_, [i]) if i.hi.is_finite() => format!("at least one solution, {}<|u|<{}", g12(i.lo), g12(i.hi)),
        _ => "at least one solution".into(),
    }
}

fn interval(i: &nonlocal_bvp::criteria::NormInterval) -> String {
    format!("({},{})", g12(i.lo), g12(i.hi))
}

fn cmd_certify(path: &Path, porcelain: bool) -> Result<(), Failure> {
    let spec = load(path)?;
    let an = analyze(&spec)?;
    let est = &an.asymptotics;
    let certs = &an.certificates;
    if porcelain {
        println!("f0={}", format_limit(est.f0));
        println!("f0_source={}", source(est.f0_declared));
        println!("finf={}", format_limit(est.f_inf));
        println!("finf_source={}", source(est.f_inf_declared));
        let labels: Vec<&str> = certs.iter().map(|c| c.theorem.label()).collect();
        println!("certificates={}", labels.join(";"));
        println!("primary={}", primary(certs).map(|c| c.theorem.label()).unwrap_or(""));
        for (i, c) in certs.iter().enumerate() {
            println!("cert.{i}.theorem={}", c.theorem);
            println!("cert.{i}.solutions={}", c.solution_count);
            let iv: Vec<String> = c.intervals.iter().map(interval).collect();
            println!("cert.{i}.intervals={}", iv.join(";"));
            println!("cert.{i}.marginal={}", c.marginal());
            for (j, w) in c.witnesses.iter().enumerate() {
                println!("cert.{i}.witness.{j}.name={}", w.name);
                println!("cert.{i}.witness.{j}.rho={}", opt(w.rho));
                println!("cert.{i}.witness.{j}.m={}", opt(w.m));
                println!("cert.{i}.witness.{j}.theta={}", opt(w.theta));
            }
        }
        return Ok(());
    }
    println!("f0 = {} ({})", format_limit(est.f0), source(est.f0_declared));
    println!("f_inf = {} ({})", format_limit(est.f_inf), source(est.f_inf_declared));
    if certs.is_empty() {
        println!("no certificate fires");
    }
    for c in certs {
        let marginal = if c.marginal() { " [marginal]" } else { "" };
        println!("{}: {}{marginal}", c.theorem, headline(c));
        for w in &c.witnesses {
            let mut parts = Vec::new();
            if let Some(r) = w.rho {
                parts.push(format!("rho = {}", g12(r)));
            }
            if let Some(m) = w.m {
                parts.push(format!("M = {}", g12(m)));
            }
            if let Some(t) = w.theta {
                parts.push(format!("theta = {}", g12(t)));
            }
            parts.push(w.evidence.clone());
            println!("  {}: {}", w.name, parts.join(", "));
        }
    }
    if let Some(p) = primary(certs) {
        println!("primary: {}", p.theorem);
    }
    Ok(())
}

pub fn format_limit(l: nonlocal_bvp::criteria::Limit) -> String {
    match l {
        nonlocal_bvp::criteria::Limit::Finite(v) => g12(v),
        other => other.to_string(),
    }
}

fn write_solution(path: &Path, u: &nonlocal_bvp::GridFunction) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::Usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(["t", "u"]).map_err(io)?;
    for (t, v) in u.mesh().nodes().into_iter().zip(u.values()) {
        w.write_record([g12(t), g12(*v)]).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_solve(path: &Path, dump: Option<&Path>, n: Option<usize>) -> Result<(), Failure> {
    let spec = load(path)?;
    let params = spec.params()?;
    let certs = match analyze(&spec) {
        Ok(an) => an.certificates,
        Err(Failure::Core(Error::Inconclusive { which })) => {
            eprintln!("warning: {which} is inconclusive; solving without certificates");
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let solved = match solve(&spec, params, &certs, n) {
        Err(Failure::Core(Error::NoConvergence { best_residual })) => {
            println!("no start converged; best residual = {}", g12(best_residual));
            return Err(Error::NoConvergence { best_residual }.into());
        }
        other => other?,
    };
    println!("grid_n = {}", solved.options.grid_n);
    let out = &solved.outcome;
    if out.positive.is_empty() {
        println!("no positive solution found");
    }
    for (i, s) in out.positive.iter().enumerate() {
        println!(
            "solution {}: norm = {}, residual = {}, ode_residual = {}, bc = ({}, {}), in_cone = {}, bucket = {}",
            i + 1,
            g12(s.sup_norm),
            g12(s.fixed_point_residual),
            g12(s.ode_residual),
            g12(s.bc_residuals.0),
            g12(s.bc_residuals.1),
            s.in_cone,
            s.certificate_bucket.as_deref().unwrap_or("-"),
        );
    }
    if out.trivial.is_some() {
        println!("trivial solution u = 0 also found");
    }
    for b in &solved.report.empty {
        println!("guaranteed but not found: {b}; increase the starts or the grid");
    }
    for i in &solved.report.unpredicted {
        println!("found but not predicted: solution {}", i + 1);
    }
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
        for (i, s) in out.positive.iter().enumerate() {
            write_solution(&dir.join(format!("solution_{}.csv", i + 1)), &s.u)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { spec } => cmd_validate(&spec),
        Command::Constants { spec } => cmd_constants(&spec),
        Command::Certify { spec, porcelain } => cmd_certify(&spec, porcelain),
        Command::Solve { spec, dump, n } => cmd_solve(&spec, dump.as_deref(), n),
        Command::Reproduce { id, n, no_solve } => reproduce::run(id as usize, n, !no_solve),
        Command::Sweep { spec, vary, out } => sweep::run(&spec, &vary, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Core(Error::Inconclusive { which }) => eprintln!(
                    "error: {which} could not be classified from samples; declare it in an [asymptotics] section (0, inf or a decimal)"
                ),
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Mismatch => eprintln!("error: reproduction mismatch"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
