//! End-to-end acceptance run: ten criteria executed in order, one
//! `PASS`/`FAIL` line each, with the measured numbers and wall time.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! the report.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use sigrecon::cde::{self, CdeProblem, SolverConfig};
use sigrecon::fields::{mixed_partial_via_jets, Activation, FieldKind, VectorFieldModel, VectorFields};
use sigrecon::independence::{self, FieldFamily, IndependenceConfig, Verdict};
use sigrecon::reconstruct::{self, LevelOutcome, ReconstructionConfig};
use sigrecon::rng::stream;
use sigrecon::signature::PiecewiseLinearPath;
use sigrecon::testfn::TestFunction;
use sigrecon::trees;
use sigrecon::word::{shuffle, Word};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_path<R: Rng>(rng: &mut R, d: usize, segments: usize) -> PiecewiseLinearPath {
    let mut t = 0.0;
    let mut times = vec![t];
    for _ in 0..segments {
        t += rng.random_range(0.2..1.5);
        times.push(t);
    }
    let points = (0..=segments).map(|_| common::uniform_point(rng, d, 1.0)).collect();
    PiecewiseLinearPath::new(times, points).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = stream(1, "acceptance", &[1]);
    let (mut chen, mut shuf) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let depth = rng.random_range(1..=4);
        let segments = rng.random_range(2..=6);
        let path = random_path(&mut rng, d, segments);
        let whole = path.signature(depth).unwrap();
        let cut = rng.random_range(1..segments);
        let (a, b) = path.split_at(cut).unwrap();
        let joined = a.signature(depth).unwrap().concat(&b.signature(depth).unwrap()).unwrap();
        chen = chen.max(whole.max_abs_diff(&joined).unwrap());

        for _ in 0..4 {
            let lu = rng.random_range(0..=depth);
            let lv = rng.random_range(0..=depth - lu);
            let u = Word::new((0..lu).map(|_| rng.random_range(1..=d)).collect()).unwrap();
            let v = Word::new((0..lv).map(|_| rng.random_range(1..=d)).collect()).unwrap();
            let lhs = whole.coefficient(&u).unwrap() * whole.coefficient(&v).unwrap();
            let rhs: f64 = shuffle(&u, &v).iter().map(|w| whole.coefficient(w).unwrap()).sum();
            shuf = shuf.max((lhs - rhs).abs());
        }
    }
    outcome(
        chen <= 1e-12 && shuf <= 1e-10,
        format!("max Chen defect {chen:.2e} (<= 1e-12), max shuffle defect {shuf:.2e} (<= 1e-10)"),
    )
}

fn criterion_2() -> Outcome {
    let mut ok = true;
    let mut counts = Vec::new();
    for m in 1..=6usize {
        let w = Word::new(vec![1; m]).unwrap();
        let trees: BTreeSet<Vec<usize>> = trees::enumerate_trees(&w)
            .unwrap()
            .iter()
            .map(|t| t.parents().to_vec())
            .collect();
        let ops: BTreeSet<Vec<usize>> = trees::enumerate_rooted_ops(&w)
            .unwrap()
            .iter()
            .map(|t| t.parents().to_vec())
            .collect();
        let fact = |k: usize| (1..=k).product::<usize>();
        ok &= trees == common::brute_force_increasing_trees(1, m) && trees.len() == fact(m - 1);
        ok &= ops == common::brute_force_increasing_trees(0, m + 1) && ops.len() == fact(m);
        counts.push(format!("{}/{}", trees.len(), ops.len()));
    }
    outcome(ok, format!("(|T_w|/|T_w^0|) for m=1..6: {}", counts.join(" ")))
}

fn criterion_3() -> Outcome {
    let mut rng = stream(3, "acceptance", &[3]);
    let mut worst = 0.0f64;
    for draw in 0..200 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=3);
        let model = common::random_model(&mut rng, draw, d, n);
        let n = model.dim();
        let len = rng.random_range(1..=4);
        let w = Word::new((0..len).map(|_| rng.random_range(1..=d)).collect()).unwrap();
        let g = common::dictionary_test_function(&mut rng, n, draw / 4);
        let x = common::uniform_point(&mut rng, n, 1.0);
        let direct = trees::apply_word_direct(&w, &g, &model, &x).unwrap();
        let via = trees::apply_word_via_trees(&w, &g, &model, &x).unwrap();
        // relative to the size of the summands, which bounds the rounding of either evaluation
        let scale: f64 = trees::enumerate_rooted_ops(&w)
            .unwrap()
            .iter()
            .map(|op| trees::apply_rooted_op(op, &g, &model, &x).unwrap().abs())
            .sum::<f64>()
            .max(direct.abs());
        if scale > 0.0 {
            worst = worst.max((direct - via).abs() / scale);
        } else {
            worst = worst.max((direct - via).abs());
        }
    }
    outcome(worst <= 1e-10, format!("200 draws, max relative disagreement {worst:.2e} (<= 1e-10)"))
}

fn criterion_4() -> Outcome {
    let model = VectorFieldModel::sample(FieldKind::ScalarPolynomial { degree: 3 }, 3, 1, 4).unwrap();
    let mut rng = stream(4, "acceptance", &[4]);
    let points = independence::sample_points(1, 40, &mut rng);
    let tests = [TestFunction::coordinate(1)];
    let r37 = independence::check_remark_3_7(&model, &points, &tests).unwrap();
    let family = FieldFamily::word_operators(3, 3, &tests).unwrap();
    let sampled = independence::sample_matrix(&family, &model, points, true, &mut rng).unwrap();
    let report = independence::numerical_rank(&sampled.matrix, 1e-8).unwrap();
    outcome(
        r37.normalized <= 1e-9 && report.rank <= 26,
        format!(
            "normalized residual {:.2e} (<= 1e-9), rank of {}x{} word matrix {} (<= 26)",
            r37.normalized, report.shape[0], report.shape[1], report.rank
        ),
    )
}

fn criterion_5() -> Outcome {
    let kind = FieldKind::NeuralDepth1 {
        activation: Activation::Tanh,
        shifts: false,
    };
    let mut worst = f64::INFINITY;
    for seed in 0..5 {
        let model = VectorFieldModel::sample(kind, 2, 2, seed).unwrap();
        let mut rng = stream(seed, "acceptance", &[5]);
        let points = independence::sample_points(2, 20, &mut rng);
        for w in Word::all(2, 3) {
            let r = independence::check_remark_3_9(&model, &w, &points).unwrap();
            worst = worst.min(r.vector_cosine.abs()).min(r.min_component_cosine);
        }
    }
    outcome(
        worst >= 1.0 - 1e-10,
        format!("min |cosine| over 5 models x 8 words: 1 - {:.2e} (>= 1 - 1e-10)", 1.0 - worst),
    )
}

/// Column pairs whose sampled vectors agree to rounding.
fn duplicate_columns(matrix: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..matrix.ncols() {
        for b in a + 1..matrix.ncols() {
            let diff = (matrix.column(a) - matrix.column(b)).amax();
            if diff <= 1e-12 * matrix.column(a).amax() {
                out.push((a, b));
            }
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let cfg = IndependenceConfig {
        seed: 6,
        ..IndependenceConfig::default()
    };
    let model = VectorFieldModel::sample(FieldKind::NeuralDepth2Exp, 2, 2, 6).unwrap();
    let cert = independence::independence_certificate(&model, 3, &cfg).unwrap();
    let small = VectorFieldModel::sample(FieldKind::NeuralDepth2Exp, 2, 1, 6).unwrap();
    let cert2 = independence::independence_certificate(&small, 2, &cfg).unwrap();

    let full = |r: &independence::StabilityReport| r.stable && r.report.verdict == Verdict::Independent;
    let pass = full(&cert.trees) && full(&cert.words) && full(&cert2.trees) && full(&cert2.words);

    let family = FieldFamily::trees_of_level(2, 3).unwrap();
    let mut rng = stream(6, "acceptance", &[6]);
    let points = independence::sample_points(2, 16, &mut rng);
    let sampled = independence::sample_matrix(&family, &model, points, false, &mut rng).unwrap();
    let dups: Vec<String> = duplicate_columns(&sampled.matrix)
        .iter()
        .map(|&(a, b)| {
            let name = |c: usize| match &family.members()[c] {
                independence::FamilyMember::Tree { tree } => format!("{}{:?}", tree.labels(), tree.parents()),
                _ => unreachable!(),
            };
            format!("{}={}", name(a), name(b))
        })
        .collect();
    let ranks = |r: &independence::StabilityReport| {
        format!("{}/{} {}", r.report.rank, r.report.shape[1], if r.stable { "stable" } else { "unstable" })
    };
    outcome(
        pass,
        format!(
            "m=3 N=2: trees rank {}, words rank {}; m=2 N=1: trees rank {}, words rank {}; identical tree columns: {}",
            ranks(&cert.trees),
            ranks(&cert.words),
            ranks(&cert2.trees),
            ranks(&cert2.words),
            if dups.is_empty() { "none".to_string() } else { dups.join(", ") }
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = stream(7, "acceptance", &[7]);
    let (mut closed, mut jets) = (0.0f64, 0.0f64);
    let mut resolved_rel = 0.0f64;
    let mut limited = 0;
    for draw in 0..50 {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(1..=3);
        let model = common::random_model(&mut rng, draw, d, n);
        let n = model.dim();
        let letter = rng.random_range(1..=d);
        let order = 1 + (draw / 4) % 4;
        let dirs: Vec<usize> = (0..order).map(|_| rng.random_range(1..=n)).collect();
        let x = common::uniform_point(&mut rng, n, 0.5);
        let f = |y: &[f64]| model.eval(letter, y).unwrap();
        let (fd, h) = common::fd_partial_adaptive(&f, &x, &dirs, 0.04);
        let value_scale = f(&x).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let rounding = common::fd_rounding(value_scale, order, h);
        let a = model.mixed_partial(letter, &dirs, &x).unwrap();
        let b = mixed_partial_via_jets(&model, letter, &dirs, &x).unwrap();
        closed = closed.max(common::fd_agreement(&fd, &a, 1e-6, rounding));
        jets = jets.max(common::fd_agreement(&fd, &b, 1e-6, rounding));
        if a.iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e6 * rounding {
            resolved_rel = resolved_rel.max(common::rel_inf(&fd, &a));
        } else {
            limited += 1;
        }
    }
    outcome(
        closed <= 1.0 && jets <= 1.0,
        format!(
            "50 draws, orders 1..4: error / (1e-6 rel + FD rounding) closed form {closed:.2e}, jets {jets:.2e} (<= 1); \
             max relative error {resolved_rel:.2e} over {} draws above the FD floor",
            50 - limited
        ),
    )
}

fn criterion_8() -> Outcome {
    let model = VectorFieldModel::sample(FieldKind::NeuralDepth2Exp, 2, 2, 8).unwrap();
    let path = PiecewiseLinearPath::random(2, 4, 0.5, 8).unwrap();
    let y0 = vec![0.2, -0.3];
    let problem = CdeProblem::new(&model, &path, y0.clone()).unwrap();
    let run = |steps: usize| cde::solve(&problem, &SolverConfig::fixed(steps), false).unwrap().terminal;
    let reference = run(2048);
    let err = |steps: usize| {
        run(steps)
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let rk_ratio = err(4) / err(16);
    let rk_ok = (128.0..=512.0).contains(&rk_ratio);

    let tight = SolverConfig {
        abs_tol: 1e-15,
        max_halvings: 12,
        ..SolverConfig::default()
    };
    let g = TestFunction::coordinate(1);
    let mut taylor = Vec::new();
    let mut taylor_ok = true;
    for k in [2usize, 3] {
        let taylor_err = |eps: f64| {
            let points = path.points().iter().map(|p| p.iter().map(|v| v * eps).collect()).collect();
            let scaled = PiecewiseLinearPath::new(path.times().to_vec(), points).unwrap();
            let exact = cde::solve(&CdeProblem::new(&model, &scaled, y0.clone()).unwrap(), &tight, false)
                .unwrap()
                .terminal[0];
            let sig = scaled.signature(k).unwrap();
            (exact - cde::taylor_predict(&model, &g, &y0, &sig, k).unwrap()).abs()
        };
        let ratio = taylor_err(0.1) / taylor_err(0.05);
        let target = 2f64.powi(k as i32 + 1);
        taylor_ok &= ratio >= target / 2.0 && ratio <= target * 2.0;
        taylor.push(format!("K={k}: {ratio:.2} (target {target})"));
    }
    outcome(
        rk_ok && taylor_ok,
        format!("step ratio {rk_ratio:.1} (target 256); amplitude ratios {}", taylor.join(", ")),
    )
}

fn criterion_9() -> Outcome {
    let model = VectorFieldModel::sample(FieldKind::NeuralDepth2Exp, 2, 2, 42).unwrap();
    let path = PiecewiseLinearPath::random(2, 5, 1.0, 42).unwrap();
    let cfg = ReconstructionConfig {
        seed: 42,
        ..ReconstructionConfig::default()
    };
    let report = reconstruct::reconstruct(&model, &path, &cfg).unwrap();
    let Some(est) = report.estimated() else {
        let failed: Vec<String> = report
            .levels
            .iter()
            .filter_map(|l| match &l.outcome {
                LevelOutcome::Failed { kind, message } => Some(format!("level {}: {kind} ({message})", l.level)),
                LevelOutcome::Recovered { .. } => None,
            })
            .collect();
        return outcome(false, failed.join("; "));
    };
    let truth = path.signature(3).unwrap();
    let mut worst = 0.0f64;
    for level in 1..=3 {
        for (e, t) in est.level(level).iter().zip(truth.level(level)) {
            let allowed = (1e-3 * t.abs()).max(1e-5);
            worst = worst.max((e - t).abs() / allowed);
        }
    }
    let inc = path.total_increment();
    let lvl1 = est.level(1).iter().zip(&inc).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 1.0 && lvl1 <= 1e-6,
        format!("worst error / tolerance {worst:.2e} (<= 1); level-1 vs increment {lvl1:.2e} (<= 1e-6)"),
    )
}

fn criterion_10() -> Outcome {
    let model = VectorFieldModel::sample(FieldKind::ScalarPolynomial { degree: 3 }, 3, 1, 42).unwrap();
    let path = PiecewiseLinearPath::random(3, 5, 1.0, 42).unwrap();
    let cfg = ReconstructionConfig {
        seed: 42,
        ..ReconstructionConfig::default()
    };
    let report = reconstruct::reconstruct(&model, &path, &cfg).unwrap();
    let level3 = &report.levels[2];
    let detail = match &level3.outcome {
        LevelOutcome::Failed { kind, message } => format!("level 3 {kind}: {message}"),
        LevelOutcome::Recovered { .. } => "level 3 returned values".to_string(),
    };
    outcome(level3.is_singular() && report.estimated().is_none(), detail)
}

/// Criteria that cannot hold as written, with the reason. The run still
/// prints `FAIL` for them; the test only checks that the failure is the
/// documented one.
fn known_failure(id: usize, detail: &str) -> Option<&'static str> {
    match id {
        6 if detail.contains("m=3 N=2: trees rank 14/16 stable, words rank 8/8 stable")
            && detail.contains("m=2 N=1: trees rank 4/4 stable, words rank 4/4 stable")
            && detail.contains("1,1,2[1, 1]=1,2,1[1, 1]")
            && detail.contains("2,1,2[1, 1]=2,2,1[1, 1]") =>
        {
            Some(
                "the cherry trees of words abc and acb both equal D^2 V_a[V_b, V_c]; \
                 two duplicate column pairs cap the tree family at rank 14",
            )
        }
        _ => None,
    }
}

#[test]
fn acceptance() {
    let criteria: [(usize, &str, fn() -> Outcome, u64); 10] = [
        (1, "Chen and shuffle identities", criterion_1, 10),
        (2, "tree counts against brute force", criterion_2, 5),
        (3, "word operator via trees", criterion_3, 30),
        (4, "cyclic dependency on a line", criterion_4, 10),
        (5, "proportional ladder summands", criterion_5, 5),
        (6, "independence certificate", criterion_6, 30),
        (7, "derivatives against finite differences", criterion_7, 20),
        (8, "solver and Taylor orders", criterion_8, 30),
        (9, "end-to-end reconstruction", criterion_9, 60),
        (10, "negative control", criterion_10, 30),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = out.pass && in_time;
        println!(
            "criterion {id:>2} {}: {name} [{:.2}s / {budget}s] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
        if !pass {
            match known_failure(id, &out.detail) {
                Some(reason) if in_time => println!("             known: {reason}"),
                _ => unexpected.push(id),
            }
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
