//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;

use bqn_cli::generate::{random_sl, sparse_instance};
use bqn_cli::problems;
use bregman_qn::oracle::sparse_secant_projection;
use bregman_qn::potentials::log_grid;
use bregman_qn::*;
use nalgebra::{DMatrix, DVector};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn builtin_potentials(n: usize) -> Vec<Potential> {
    let mut pots = vec![
        Potential::log(),
        Potential::power(0.05).unwrap(),
        Potential::power(-0.5).unwrap(),
        Potential::bounded(0.5).unwrap(),
    ];
    pots.retain(|p| p.ensure_admissible(n).is_ok());
    pots
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn log_collapse() -> Outcome {
    const TOL: f64 = 1e-12;
    let mut r = common::rng(1001);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = 2 + case % 9;
        let b = common::random_pd(&mut r, n, 1e3);
        let pair = common::random_pair(&mut r, n);
        let v = v_bfgs_update(&b, &pair, &Potential::log()).unwrap();
        let plain = bfgs_update(&b, &pair).unwrap();
        worst = worst.max(rel_frobenius(v.matrix(), plain.matrix()));
    }
    outcome(
        worst <= TOL,
        format!("1000 cases, worst relative difference {worst:.3e} (tol {TOL:e})"),
    )
}

fn all_families(n: usize) -> Vec<UpdateFamily> {
    let mut fams = vec![UpdateFamily::Bfgs, UpdateFamily::Dfp, UpdateFamily::SelfScaling];
    for p in builtin_potentials(n) {
        fams.push(UpdateFamily::VBfgs(p.clone()));
        fams.push(UpdateFamily::VDfp(p));
    }
    fams
}

fn secant_and_pd() -> Outcome {
    const TOL: f64 = 1e-10;
    let labels: Vec<String> = all_families(10).iter().map(|f| f.to_string()).collect();
    let mut worst = vec![0.0f64; labels.len()];
    let mut failures = 0usize;
    let mut r = common::rng(2002);
    for case in 0..1000 {
        let n = 2 + case % 9;
        let b = common::random_pd(&mut r, n, 1e3);
        let pair = common::random_pair(&mut r, n);
        for (k, fam) in all_families(n).iter().enumerate() {
            match fam.apply(&b, &pair) {
                Ok(bp) => {
                    let res = (bp.matrix() * pair.s() - pair.y()).norm() / pair.y().norm();
                    worst[k] = worst[k].max(res);
                    if nalgebra::Cholesky::new(bp.matrix().clone()).is_none() {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let (arg, _) = worst
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (k, &w)| if w > acc.1 { (k, w) } else { acc });
    outcome(
        max <= TOL && failures == 0,
        format!(
            "1000 cases x {} families, worst residual {max:.3e} ({}), {failures} factorization failures",
            labels.len(),
            labels[arg]
        ),
    )
}

fn determinant_equation() -> Outcome {
    const TOL: f64 = 1e-12;
    let grid = log_grid(1e-6, 1e6, 121);
    let mut worst_res: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut errors = 0usize;
    for n in [2usize, 3, 5, 10] {
        for pot in builtin_potentials(n) {
            for &c in &grid {
                let z = match solve_scaling_equation(c, &pot, n) {
                    Ok(z) => z,
                    Err(_) => {
                        errors += 1;
                        continue;
                    }
                };
                let res = (c * pot.nu(z).powi(n as i32 - 1) - z).abs() / z.max(1.0);
                worst_res = worst_res.max(res);
                if let PotentialKind::Power { gamma } = pot.kind() {
                    let closed = c.powf(1.0 / (1.0 - (n as f64 - 1.0) * gamma));
                    worst_closed = worst_closed.max((closed - z).abs() / closed);
                }
            }
        }
    }
    outcome(
        worst_res <= TOL && worst_closed <= TOL && errors == 0,
        format!(
            "worst residual {worst_res:.3e}, worst closed-form mismatch {worst_closed:.3e}, {errors} solver errors"
        ),
    )
}

fn oracle_agreement() -> Outcome {
    const TOL: f64 = 1e-6;
    let mut r = common::rng(4004);
    let mut worst: f64 = 0.0;
    let mut errors = 0usize;
    for n in [2usize, 3] {
        let pots = [
            Potential::log(),
            Potential::power(0.25).unwrap(),
            Potential::power(-0.5).unwrap(),
            Potential::bounded(0.5).unwrap(),
        ];
        for pot in pots.iter().filter(|p| p.ensure_admissible(n).is_ok()) {
            for _ in 0..100 {
                let b = common::random_pd(&mut r, n, 100.0);
                let pair = common::random_pair(&mut r, n);
                let fast = v_bfgs_update(&b, &pair, pot).unwrap();
                match variational_oracle(&b, &pair, pot) {
                    Ok(o) => worst = worst.max(rel_frobenius(fast.matrix(), o.matrix())),
                    Err(_) => errors += 1,
                }
            }
        }
    }
    outcome(
        worst <= TOL && errors == 0,
        format!(
            "n in {{2,3}}, 100 cases per potential, worst relative difference {worst:.3e}, {errors} oracle failures"
        ),
    )
}

fn random_sparse_pd(r: &mut rand_chacha::ChaCha8Rng, pattern: &SparsityPattern) -> PDMatrix {
    bqn_cli::generate::dominant_sparse_pd(r, pattern)
}

fn pythagorean() -> Outcome {
    const TOL: f64 = 1e-8;
    let mut r = common::rng(5005);
    let mut worst_update: f64 = 0.0;
    for case in 0..200 {
        let n = 2 + case % 6;
        let pots = builtin_potentials(n);
        let pot = &pots[case % pots.len()];
        let b = common::random_pd(&mut r, n, 50.0);
        let pair = common::random_pair(&mut r, n);
        let other = common::random_pd(&mut r, n, 50.0);
        let p = bfgs_update(&other, &pair).unwrap();
        let bp = v_bfgs_update(&b, &pair, pot).unwrap();
        worst_update = worst_update.max(pythagorean_gap(&p, &bp, &b, pot).unwrap());
    }
    let mut worst_sparse: f64 = 0.0;
    for case in 0..200 {
        let n = 2 + case % 10;
        let pots = builtin_potentials(n);
        let pot = &pots[case % pots.len()];
        let pattern = common::random_chordal(&mut r, n);
        let tree = is_chordal(&pattern).unwrap();
        let q = common::random_pd(&mut r, n, 50.0);
        let bs = theta_v_project_sparse(&q, &pattern, &tree, pot).unwrap();
        let p = random_sparse_pd(&mut r, &pattern);
        worst_sparse = worst_sparse.max(pythagorean_gap(&p, &bs, &q, pot).unwrap());
    }
    outcome(
        worst_update <= TOL && worst_sparse <= TOL,
        format!("200 + 200 cases, worst relative gap: update {worst_update:.3e}, sparse projection {worst_sparse:.3e}"),
    )
}

fn invariance() -> Outcome {
    const TOL: f64 = 1e-6;
    const K_MAX: usize = 20;
    let obj = common::logistic();
    let x0 = DVector::from_vec(vec![1.5, -2.0, 0.7]);
    let b0 = PDMatrix::identity(3);
    let mut r = common::rng(6006);
    let check = |fam: UpdateFamily, t: &DMatrix<f64>| {
        invariance_check(&obj, &x0, &b0, t, &SolverConfig::new(fam), K_MAX, TOL).unwrap()
    };
    let mut sl_fail = Vec::new();
    let mut sl_worst: f64 = 0.0;
    let sl: Vec<DMatrix<f64>> = (0..10).map(|_| random_sl(&mut r, 3)).collect();
    for t in &sl {
        for pot in builtin_potentials(3) {
            for fam in [UpdateFamily::VBfgs(pot.clone()), UpdateFamily::VDfp(pot.clone())] {
                let rep = check(fam.clone(), t);
                sl_worst = sl_worst.max(rep.x_deviation.max(rep.hessian_deviation));
                if !rep.invariant {
                    sl_fail.push(fam.to_string());
                }
            }
        }
    }
    let mut gl_worst: f64 = 0.0;
    let mut gl_fail = 0;
    for det in [0.5f64, 2.0] {
        for base in &sl[..3] {
            let t = base * det.powf(1.0 / 3.0);
            for g in [0.25, -0.5] {
                let rep = check(UpdateFamily::VBfgs(Potential::power(g).unwrap()), &t);
                gl_worst = gl_worst.max(rep.x_deviation.max(rep.hessian_deviation));
                gl_fail += usize::from(!rep.invariant);
            }
        }
    }
    let t = DMatrix::identity(3, 3) * 2f64.powf(1.0 / 3.0);
    let bounded = check(UpdateFamily::VBfgs(Potential::bounded(0.5).unwrap()), &t);
    let bounded_dev = bounded.x_deviation.max(bounded.hessian_deviation);
    outcome(
        sl_fail.is_empty() && gl_fail == 0 && bounded_dev > TOL,
        format!(
            "SL(3): worst deviation {sl_worst:.3e} ({} failures); GL power: worst {gl_worst:.3e} ({gl_fail} failures); bounded c=0.5, det T=2: deviation {bounded_dev:.3e} (must exceed {TOL:e})",
            sl_fail.len()
        ),
    )
}

fn sparse_algorithm_two() -> Outcome {
    const SLACK: f64 = 1e-9;
    const FINAL: f64 = 1e-8;
    const T: usize = 50;
    let pattern = SparsityPattern::tridiagonal(3);
    let tree = is_chordal(&pattern).unwrap();
    let mut r = common::rng(7007);
    let mut worst_final: f64 = 0.0;
    let mut worst_rise: f64 = f64::NEG_INFINITY;
    let mut errors = 0usize;
    for pot in [Potential::log(), Potential::power(-0.2).unwrap()] {
        for _ in 0..100 {
            let inst = sparse_instance(&mut r, &pattern);
            let bstar =
                match sparse_secant_projection(&inst.start, &inst.pair, &pattern, &pot, Some(inst.feasible.matrix())) {
                    Ok(b) => b,
                    Err(_) => {
                        errors += 1;
                        continue;
                    }
                };
            let run = sparse_update(
                &inst.start,
                &inst.pair,
                &pattern,
                &tree,
                &pot,
                SparseAlgorithm::ThetaThenTheta,
                T,
                TraceReference::Fixed(&bstar),
            )
            .unwrap();
            for w in run.trace.windows(2) {
                worst_rise = worst_rise.max(w[1] - w[0]);
            }
            worst_final = worst_final.max(run.trace[T]);
        }
    }
    outcome(
        worst_rise <= SLACK && worst_final <= FINAL && errors == 0,
        format!("100 instances per potential, worst increase {worst_rise:.3e}, worst D at t={T} {worst_final:.3e}, {errors} oracle failures"),
    )
}

fn sparse_projection() -> Outcome {
    let mut r = common::rng(8008);
    let mut theta_worst: f64 = 0.0;
    let mut off_worst: f64 = 0.0;
    let mut det_gain: f64 = f64::NEG_INFINITY;
    for case in 0..50 {
        let n = 3 + case % 10;
        let pots = builtin_potentials(n);
        let pot = &pots[case % pots.len()];
        let pattern = common::random_chordal(&mut r, n);
        let tree = is_chordal(&pattern).unwrap();
        let q = common::random_pd(&mut r, n, 50.0);
        let bs = theta_v_project_sparse(&q, &pattern, &tree, pot).unwrap();
        let tq = theta_coordinate(&q, pot).matrix;
        let tb = theta_coordinate(&bs, pot).matrix;
        let scale = tq.norm();
        for (i, j) in (0..n).flat_map(|i| (0..n).map(move |j| (i, j))) {
            if pattern.contains(i, j) {
                theta_worst = theta_worst.max((tq[(i, j)] - tb[(i, j)]).abs() / scale);
            }
        }
        off_worst = off_worst.max(pattern.off_pattern_max(bs.matrix()) / bs.matrix().norm());

        // W = −θ(B*) agrees with −θ(Q) on the pattern and must have the
        // largest determinant among PD matrices that do.
        let w = -tb;
        let det_w = w.determinant();
        for (i, j) in (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))) {
            if pattern.contains(i, j) {
                continue;
            }
            let h = (w[(i, i)] * w[(j, j)]).sqrt();
            for k in -20i32..=20 {
                if k == 0 {
                    continue;
                }
                let mut trial = w.clone();
                trial[(i, j)] += 0.025 * k as f64 * h;
                trial[(j, i)] = trial[(i, j)];
                if nalgebra::Cholesky::new(trial.clone()).is_some() {
                    det_gain = det_gain.max((trial.determinant() - det_w) / det_w);
                }
            }
        }
    }
    outcome(
        theta_worst <= 1e-9 && off_worst <= 1e-10 && det_gain <= 1e-8,
        format!("50 chordal instances, theta mismatch {theta_worst:.3e}, off-pattern {off_worst:.3e}, best det gain {det_gain:.3e}"),
    )
}

fn rosenbrock() -> Outcome {
    let families = [
        UpdateFamily::Bfgs,
        UpdateFamily::Dfp,
        UpdateFamily::VBfgs(Potential::log()),
        UpdateFamily::VBfgs(Potential::power(0.1).unwrap()),
        UpdateFamily::VBfgs(Potential::bounded(0.3).unwrap()),
    ];
    let p = problems::rosenbrock();
    let target = DVector::from_element(2, 1.0);
    let mut parts = Vec::new();
    let mut pass = true;
    for fam in families {
        let mut cfg = SolverConfig::new(fam.clone());
        cfg.grad_tol = 1e-6;
        cfg.max_iter = 200;
        let trace = minimize(&p.objective, &p.start, &PDMatrix::identity(2), &cfg).unwrap();
        let last = trace.last();
        let err = (&last.x - &target).norm();
        pass &= trace.converged() && last.grad_norm <= 1e-6 && err <= 1e-5;
        parts.push(format!("{fam}: {} it, |x-x*| {err:.1e}", trace.iterations()));
    }
    outcome(pass, parts.join("; "))
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_bqn"))
        .args(args)
        .current_dir(dir)
        .env_remove("BQN_SEED")
        .output()
        .expect("run bqn");
    (out.status.code().unwrap_or(-1), out.stdout, out.stderr)
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let commands: Vec<Vec<&str>> = vec![
        vec![
            "solve",
            "--problem",
            "rosenbrock",
            "--family",
            "vbfgs:power:gamma=0.1",
            "--out",
            "trace.csv",
            "--plot",
            "trace.dat",
        ],
        vec!["solve", "--problem", "quadratic:100", "--seed", "7", "--format", "json"],
        vec![
            "solve",
            "--problem",
            "broyden-tridiagonal:6",
            "--algorithm",
            "2",
            "--T",
            "3",
            "--out",
            "sparse.json",
        ],
        vec![
            "compare",
            "--problems",
            "rosenbrock,quadratic:1000,broyden-tridiagonal",
            "--out",
            "table.csv",
        ],
        vec![
            "compare",
            "--problems",
            "quadratic:100",
            "--families",
            "bfgs,vbfgs:power:gamma=0.25",
            "--format",
            "json",
        ],
        vec![
            "invariance",
            "--problem",
            "quadratic:50",
            "--family",
            "vbfgs:bounded:c=0.5",
            "--transform",
            "random-gl:2",
        ],
        vec!["sparse-demo", "--n", "4", "--T", "20", "--plot", "demo.dat"],
        vec![
            "sparse-demo",
            "--algorithm",
            "1",
            "--family",
            "vbfgs:power:gamma=-0.2",
            "--format",
            "json",
        ],
        vec!["list-problems"],
    ];
    let mut mismatched = Vec::new();
    let mut usage_errors = Vec::new();
    for cmd in &commands {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_cli(a.path(), cmd);
        let rb = run_cli(b.path(), cmd);
        if ra != rb || dir_contents(a.path()) != dir_contents(b.path()) {
            mismatched.push(cmd[0]);
        }
        if ra.0 == 1 {
            usage_errors.push(cmd[0]);
        }
    }
    outcome(
        mismatched.is_empty() && usage_errors.is_empty(),
        format!(
            "{} commands run twice, mismatches: {mismatched:?}, usage errors: {usage_errors:?}",
            commands.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("log collapse", log_collapse),
        ("secant and positive definiteness", secant_and_pd),
        ("determinant equation", determinant_equation),
        ("variational optimality", oracle_agreement),
        ("pythagorean identities", pythagorean),
        ("linear invariance", invariance),
        ("sparse algorithm 2", sparse_algorithm_two),
        ("sparse projection", sparse_projection),
        ("rosenbrock end to end", rosenbrock),
        ("cli determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let o = check();
        println!(
            "criterion {:>2} {:<34} {}  {} [{:.1}s]",
            k + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
