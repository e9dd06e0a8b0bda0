//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bregman_qn::{
    invariance_check, is_chordal, minimize, sparse_update, Error as CoreError, LineSearchParams, PDMatrix,
    SolverConfig, SolverStatus, SolverTrace, SparseAlgorithm, SparsityConfig, SparsityPattern, TraceReference,
    UpdateFamily,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ConfigFile;
use crate::error::CliError;
use crate::export::{self, fmt_f64, Format};
use crate::generate;
use crate::problems::{self, ProblemSpec, CATALOG};
use crate::{
    Command, CommonArgs, CompareArgs, InvarianceArgs, SolveArgs, SolverArgs, SparseDemoArgs, DEFAULT_SEED,
    EXIT_NOT_CONVERGED, EXIT_OK,
};

pub const DEFAULT_FAMILIES: &str = "bfgs,dfp,vbfgs:log,vbfgs:power:gamma=0.1,vbfgs:bounded:c=0.3";
pub const DEFAULT_SPARSE_ITERATIONS: usize = 10;
pub const DEFAULT_DEMO_ITERATIONS: usize = 50;
/// Largest dimension for which `sparse-demo` computes the exact reference
/// point of the Algorithm 2 trace.
pub const DEMO_REFERENCE_MAX_N: usize = 6;

pub fn dispatch(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Solve(a) => solve(a, out, err),
        Command::Compare(a) => compare(a, out, err),
        Command::Invariance(a) => invariance(a, out, err),
        Command::SparseDemo(a) => sparse_demo(a, out, err),
        Command::ListProblems => {
            for e in &CATALOG {
                writeln!(out, "{:<26}{}", e.syntax, e.description).map_err(stdout_err)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

/// Summary of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub problem: String,
    pub family: String,
    pub potential: Option<String>,
    pub status: String,
    pub iterations: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl RunRecord {
    fn new(
        problem: &str,
        family: &str,
        parsed: &UpdateFamily,
        trace: &SolverTrace,
        seed: u64,
        wall: Option<f64>,
    ) -> Self {
        let last = trace.last();
        RunRecord {
            problem: problem.to_string(),
            family: family.to_string(),
            potential: parsed.potential().map(|p| p.to_string()),
            status: trace.status.to_string(),
            iterations: trace.iterations(),
            f: last.f,
            grad_norm: last.grad_norm,
            seed,
            wall_time: wall,
        }
    }
}

struct Context {
    config: ConfigFile,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
    timing: bool,
}

impl Context {
    fn new(common: &CommonArgs) -> Result<Self, CliError> {
        let config = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let seed = match config.or(common.seed, "seed")? {
            Some(s) => s,
            None => match std::env::var("BQN_SEED") {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("BQN_SEED: invalid seed `{v}`")))?,
                Err(_) => DEFAULT_SEED,
            },
        };
        let out: Option<PathBuf> = config.or(common.out.clone(), "out")?;
        let format = match config.or(common.format, "format")? {
            Some(f) => f,
            None => match out.as_ref().and_then(|p| p.extension()) {
                Some(ext) if ext == "json" => Format::Json,
                _ => Format::Csv,
            },
        };
        let timing = common.timing || config.get::<bool>("timing")?.unwrap_or(false);
        Ok(Context {
            config,
            seed,
            out,
            format,
            timing,
        })
    }

    fn required(&self, flag: Option<String>, key: &str) -> Result<String, CliError> {
        self.config
            .or(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("--{key} is required")))
    }

    fn solver_config(&self, args: &SolverArgs, default_family: &str) -> Result<(String, SolverConfig), CliError> {
        let name = self
            .config
            .or(args.family.clone(), "family")?
            .unwrap_or_else(|| default_family.into());
        let mut cfg = SolverConfig::new(parse_family(&name)?);
        self.apply_solver_args(args, &mut cfg)?;
        Ok((name, cfg))
    }

    fn apply_solver_args(&self, args: &SolverArgs, cfg: &mut SolverConfig) -> Result<(), CliError> {
        let c = &self.config;
        let defaults = LineSearchParams::default();
        cfg.grad_tol = c.or(args.tol, "tol")?.unwrap_or(cfg.grad_tol);
        cfg.max_iter = c.or(args.max_iter, "max-iter")?.unwrap_or(cfg.max_iter);
        cfg.line_search = LineSearchParams {
            c1: c.or(args.c1, "c1")?.unwrap_or(defaults.c1),
            c2: c.or(args.c2, "c2")?.unwrap_or(defaults.c2),
            alpha_init: c.or(args.alpha_init, "alpha-init")?.unwrap_or(defaults.alpha_init),
            max_trials: c.or(args.max_trials, "max-trials")?.unwrap_or(defaults.max_trials),
        };
        cfg.line_search.validate()?;
        if !(cfg.grad_tol > 0.0) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        Ok(())
    }

    /// Writes `body` to `--out`, or to standard output when no file is given.
    /// Returns whether standard output was used.
    fn emit(&self, body: &str, out: &mut dyn Write) -> Result<bool, CliError> {
        match &self.out {
            Some(p) => {
                export::write_file(p, body)?;
                Ok(false)
            }
            None => {
                out.write_all(body.as_bytes()).map_err(stdout_err)?;
                Ok(true)
            }
        }
    }

    fn wall(&self, start: Instant) -> Option<f64> {
        self.timing.then(|| start.elapsed().as_secs_f64())
    }
}

fn parse_family(name: &str) -> Result<UpdateFamily, CliError> {
    name.parse::<UpdateFamily>()
        .map_err(|e| CliError::Usage(format!("family `{name}`: {e}")))
}

fn load_pattern(path: &Path) -> Result<SparsityPattern, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    SparsityPattern::parse(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn chordal_error(path: &str, e: CoreError) -> CliError {
    match e {
        CoreError::NotChordal { cycle } => {
            let verts: Vec<String> = cycle.iter().map(|v| (v + 1).to_string()).collect();
            CliError::Usage(format!(
                "{path}: pattern is not chordal; chordless cycle {}",
                verts.join(" - ")
            ))
        }
        other => CliError::Core(other),
    }
}

fn sparsity_config(
    pattern: SparsityPattern,
    source: &str,
    algorithm: u8,
    iterations: usize,
) -> Result<SparsityConfig, CliError> {
    let alg = SparseAlgorithm::from_number(algorithm).map_err(|e| CliError::Usage(format!("--algorithm: {e}")))?;
    SparsityConfig::new(pattern, alg, iterations).map_err(|e| chordal_error(source, e))
}

fn ensure_family_fits(name: &str, family: &UpdateFamily, n: usize) -> Result<(), CliError> {
    family
        .ensure_admissible(n)
        .map_err(|e| CliError::Usage(format!("family `{name}`: {e}")))
}

fn exit_for(status: SolverStatus) -> i32 {
    if status == SolverStatus::Converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let ctx = Context::new(&args.common)?;
    let problem_name = ctx.required(args.problem.clone(), "problem")?;
    let problem = problems::build(&problem_name, ctx.seed)?;
    let n = problem.n();
    let (family_name, mut cfg) = ctx.solver_config(&args.solver, "bfgs")?;
    ensure_family_fits(&family_name, &cfg.family, n)?;

    let pattern_file: Option<PathBuf> = ctx.config.or(args.pattern.clone(), "pattern")?;
    let algorithm: Option<u8> = ctx.config.or(args.algorithm, "algorithm")?;
    let iterations = ctx.config.or(args.t, "T")?.unwrap_or(DEFAULT_SPARSE_ITERATIONS);
    if pattern_file.is_some() || algorithm.is_some() {
        let (pattern, source) = match &pattern_file {
            Some(p) => (load_pattern(p)?, p.display().to_string()),
            None => (
                problem.pattern.clone().ok_or_else(|| {
                    CliError::Usage(format!(
                        "problem `{problem_name}` has no built-in pattern; pass --pattern"
                    ))
                })?,
                problem_name.clone(),
            ),
        };
        if pattern.n() != n {
            return Err(CliError::Usage(format!(
                "{source}: pattern has dimension {}, problem has {n}",
                pattern.n()
            )));
        }
        cfg.sparsity = Some(sparsity_config(pattern, &source, algorithm.unwrap_or(2), iterations)?);
    }

    let start = Instant::now();
    let trace = minimize(&problem.objective, &problem.start, &PDMatrix::identity(n), &cfg)?;
    let record = RunRecord::new(
        &problem_name,
        &family_name,
        &cfg.family,
        &trace,
        ctx.seed,
        ctx.wall(start),
    );

    let rows = export::trace_rows(&trace);
    let to_stdout = ctx.emit(&export::render_trace(&rows, ctx.format), out)?;
    if let Some(plot) = ctx.config.or(args.plot.clone(), "plot")? {
        let data: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.iter as f64, r.f, r.grad_norm]).collect();
        export::write_file(&plot, &export::gnuplot_data(&["iter", "f", "grad_norm"], &data))?;
    }
    let line = serde_json::to_string(&record).expect("serializable");
    if to_stdout {
        writeln!(err, "{line}").map_err(|e| CliError::io("<stderr>", e))?;
    } else {
        writeln!(out, "{line}").map_err(stdout_err)?;
    }
    Ok(exit_for(trace.status))
}

/// Problem index, family index, trace and wall time of one comparison run.
type Cell = (usize, usize, SolverTrace, Option<f64>);

/// One cell of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    #[serde(flatten)]
    pub run: RunRecord,
    /// Distance of the final point from the known minimizer.
    pub x_error: Option<f64>,
    /// Distance of the final point from that of the first family.
    pub x_deviation: f64,
    /// Largest iterate difference between BFGS and V-BFGS with the log
    /// potential on the same problem.
    pub log_bfgs_deviation: f64,
}

const COMPARE_HEADER: &str =
    "problem,family,potential,status,iterations,f,grad_norm,x_error,x_deviation,log_bfgs_deviation,seed";

fn compare_csv(rows: &[CompareRow], timing: bool) -> String {
    let mut s = String::from(COMPARE_HEADER);
    s.push_str(if timing { ",wall_time\n" } else { "\n" });
    for r in rows {
        let run = &r.run;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            run.problem,
            run.family,
            run.potential.as_deref().unwrap_or(""),
            run.status,
            run.iterations,
            fmt_f64(run.f),
            fmt_f64(run.grad_norm),
            r.x_error.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.x_deviation),
            fmt_f64(r.log_bfgs_deviation),
            run.seed
        ));
        if timing {
            s.push(',');
            s.push_str(&run.wall_time.map(fmt_f64).unwrap_or_default());
        }
        s.push('\n');
    }
    s
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect()
}

fn compare(args: &CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let ctx = Context::new(&args.common)?;
    let problem_names = split_list(&ctx.required(args.problems.clone(), "problems")?);
    let family_names = split_list(
        &ctx.config
            .or(args.families.clone(), "families")?
            .unwrap_or_else(|| DEFAULT_FAMILIES.into()),
    );
    if problem_names.is_empty() || family_names.is_empty() {
        return Err(CliError::Usage("need at least one problem and one family".into()));
    }
    let problems: Vec<ProblemSpec> = problem_names
        .iter()
        .map(|p| problems::build(p, ctx.seed))
        .collect::<Result<_, _>>()?;

    // The BFGS and log-potential runs feed the deviation column; they are
    // computed even when not listed.
    let mut runs: Vec<String> = family_names.clone();
    for extra in ["bfgs", "vbfgs:log"] {
        if !runs.iter().any(|f| f == extra) {
            runs.push(extra.into());
        }
    }
    let mut cells = Vec::new();
    for (pi, problem) in problems.iter().enumerate() {
        for (fi, name) in runs.iter().enumerate() {
            let mut cfg = SolverConfig::new(parse_family(name)?);
            ctx.apply_solver_args(&args.solver, &mut cfg)?;
            ensure_family_fits(name, &cfg.family, problem.n())?;
            cells.push((pi, fi, cfg));
        }
    }
    let mut results: Vec<Cell> = cells
        .into_par_iter()
        .map(|(pi, fi, cfg)| {
            let p = &problems[pi];
            let start = Instant::now();
            let trace = minimize(&p.objective, &p.start, &PDMatrix::identity(p.n()), &cfg)?;
            Ok((pi, fi, trace, ctx.wall(start)))
        })
        .collect::<Result<_, CoreError>>()?;
    results.sort_by_key(|r| (r.0, r.1));

    let mut rows = Vec::new();
    let mut all_converged = true;
    for (pi, problem) in problems.iter().enumerate() {
        let cell = |name: &str| {
            let fi = runs.iter().position(|f| f == name).expect("listed");
            results.iter().find(|r| r.0 == pi && r.1 == fi).expect("computed")
        };
        let (bfgs, log) = (&cell("bfgs").2, &cell("vbfgs:log").2);
        let log_bfgs = bfgs
            .records
            .iter()
            .zip(&log.records)
            .map(|(a, b)| (&a.x - &b.x).norm())
            .fold(0.0f64, f64::max);
        let first_x = &cell(&family_names[0]).2.last().x;
        for name in &family_names {
            let (_, _, trace, wall) = cell(name);
            all_converged &= trace.converged();
            let x = &trace.last().x;
            rows.push(CompareRow {
                run: RunRecord::new(&problem.name, name, &parse_family(name)?, trace, ctx.seed, *wall),
                x_error: problem.minimizer.as_ref().map(|m| (x - m).norm()),
                x_deviation: (x - first_x).norm(),
                log_bfgs_deviation: log_bfgs,
            });
        }
    }
    let body = match ctx.format {
        Format::Csv => compare_csv(&rows, ctx.timing),
        Format::Json => export::to_json(&rows),
    };
    ctx.emit(&body, out)?;
    if !all_converged {
        writeln!(err, "some runs did not converge").map_err(|e| CliError::io("<stderr>", e))?;
    }
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Clone, Serialize)]
struct InvarianceRow {
    problem: String,
    family: String,
    transform: String,
    det_t: f64,
    x_deviation: f64,
    hessian_deviation: f64,
    compared: usize,
    tol: f64,
    invariant: bool,
    seed: u64,
}

pub const DEFAULT_K_MAX: usize = 20;
pub const DEFAULT_INVARIANCE_TOL: f64 = 1e-6;

fn invariance(args: &InvarianceArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32, CliError> {
    let ctx = Context::new(&args.common)?;
    let problem_name = ctx.required(args.problem.clone(), "problem")?;
    let problem = problems::build(&problem_name, ctx.seed)?;
    let n = problem.n();
    let (family_name, mut cfg) = ctx.solver_config(
        &SolverArgs {
            tol: None,
            ..args.solver.clone()
        },
        "bfgs",
    )?;
    ensure_family_fits(&family_name, &cfg.family, n)?;
    let tol = ctx.config.or(args.solver.tol, "tol")?.unwrap_or(DEFAULT_INVARIANCE_TOL);
    let k_max = ctx.config.or(args.k_max, "k-max")?.unwrap_or(DEFAULT_K_MAX);
    let transform = ctx
        .config
        .or(args.transform.clone(), "transform")?
        .unwrap_or_else(|| "shear".into());
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let t = generate::parse_transform(&transform, n, &mut rng)?;
    cfg.max_iter = k_max;
    let report = invariance_check(
        &problem.objective,
        &problem.start,
        &PDMatrix::identity(n),
        &t,
        &cfg,
        k_max,
        tol,
    )?;
    let row = InvarianceRow {
        problem: problem_name,
        family: family_name,
        transform,
        det_t: t.determinant(),
        x_deviation: report.x_deviation,
        hessian_deviation: report.hessian_deviation,
        compared: report.compared,
        tol,
        invariant: report.invariant,
        seed: ctx.seed,
    };
    let body = match ctx.format {
        Format::Json => export::to_json(&row),
        Format::Csv => format!(
            "problem,family,transform,det_T,x_deviation,hessian_deviation,compared,tol,invariant,seed\n{},{},{},{},{},{},{},{},{},{}\n",
            row.problem,
            row.family,
            row.transform,
            fmt_f64(row.det_t),
            fmt_f64(row.x_deviation),
            fmt_f64(row.hessian_deviation),
            row.compared,
            fmt_f64(row.tol),
            row.invariant,
            row.seed
        ),
    };
    ctx.emit(&body, out)?;
    Ok(if report.invariant { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn sparse_demo(args: &SparseDemoArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let ctx = Context::new(&args.common)?;
    let pattern_file: Option<PathBuf> = ctx.config.or(args.pattern.clone(), "pattern")?;
    let (pattern, source) = match &pattern_file {
        Some(p) => (load_pattern(p)?, p.display().to_string()),
        None => {
            let n = ctx.config.or(args.n, "n")?.unwrap_or(3);
            if n == 0 {
                return Err(CliError::Usage("--n must be positive".into()));
            }
            (SparsityPattern::tridiagonal(n), "tridiagonal".to_string())
        }
    };
    let tree = is_chordal(&pattern).map_err(|e| chordal_error(&source, e))?;
    let family_name = ctx
        .config
        .or(args.family.clone(), "family")?
        .unwrap_or_else(|| "vbfgs:log".into());
    let family = parse_family(&family_name)?;
    let pot = family
        .potential()
        .ok_or_else(|| CliError::Usage(format!("family `{family_name}` has no potential")))?;
    ensure_family_fits(&family_name, &family, pattern.n())?;
    let algorithm = ctx.config.or(args.algorithm, "algorithm")?.unwrap_or(2);
    let alg = SparseAlgorithm::from_number(algorithm).map_err(|e| CliError::Usage(format!("--algorithm: {e}")))?;
    let iterations = ctx.config.or(args.t, "T")?.unwrap_or(DEFAULT_DEMO_ITERATIONS);

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let inst = generate::sparse_instance(&mut rng, &pattern);
    let reference = if alg == SparseAlgorithm::ThetaThenTheta && pattern.n() <= DEMO_REFERENCE_MAX_N {
        bregman_qn::oracle::sparse_secant_projection(
            &inst.start,
            &inst.pair,
            &pattern,
            &pot,
            Some(inst.feasible.matrix()),
        )
        .ok()
    } else {
        None
    };
    let reference_mode = match &reference {
        Some(r) => TraceReference::Fixed(r),
        None => TraceReference::Successive,
    };
    let result = sparse_update(
        &inst.start,
        &inst.pair,
        &pattern,
        &tree,
        &pot,
        alg,
        iterations,
        reference_mode,
    )?;
    let trace = export::DivergenceTrace {
        algorithm,
        potential: pot.to_string(),
        trace_kind: export::trace_kind_name(result.trace_kind).into(),
        seed: ctx.seed,
        divergence: result.trace.clone(),
    };
    let body = match ctx.format {
        Format::Csv => export::divergence_csv(&trace),
        Format::Json => export::to_json(&trace),
    };
    ctx.emit(&body, out)?;
    if let Some(plot) = ctx.config.or(args.plot.clone(), "plot")? {
        let data: Vec<Vec<f64>> = trace
            .divergence
            .iter()
            .enumerate()
            .map(|(t, d)| vec![t as f64, *d])
            .collect();
        export::write_file(&plot, &export::gnuplot_data(&["t", "divergence"], &data))?;
    }
    let secant = (result.matrix.matrix() * inst.pair.s() - inst.pair.y()).norm();
    writeln!(
        err,
        "algorithm {algorithm}, {} trace, final divergence {}, secant residual {}",
        trace.trace_kind,
        trace.divergence.last().map(|d| fmt_f64(*d)).unwrap_or_default(),
        fmt_f64(secant)
    )
    .map_err(|e| CliError::io("<stderr>", e))?;
    Ok(EXIT_OK)
}
