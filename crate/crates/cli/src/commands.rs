//! One function per subcommand. Each returns the artifacts it produced and
//! whether its verdict passed; writing them out is left to the caller.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};
use sigrecon::cde::{self, CdeProblem};
use sigrecon::fields::VectorFields;
use sigrecon::independence::{self, FieldFamily, Verdict};
use sigrecon::reconstruct::{self, LevelOutcome, ReconstructionReport};
use sigrecon::rng;
use sigrecon::testfn::TestFunction;
use sigrecon::trees;
use sigrecon::word::Word;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Normalized residual below which the cyclic identity counts as reproduced.
const REMARK37_TOL: f64 = 1e-9;
/// Required `|cosine|` of the two ladder summands.
const REMARK39_TOL: f64 = 1e-10;
const REMARK_POINTS: usize = 50;

#[derive(Debug, Default)]
pub struct Outcome {
    pub json: Option<Value>,
    pub csv: Option<String>,
    /// Human-readable text for standard output.
    pub text: Option<String>,
    /// Set when the run completed but its verdict did not pass.
    pub failed: Option<String>,
}

fn envelope<T: Serialize>(cfg: &ExperimentConfig, result: &T) -> Result<Value, CliError> {
    Ok(json!({
        "config": cfg,
        "seed": cfg.seed,
        "result": serde_json::to_value(result).map_err(|e| CliError::Runtime(e.to_string()))?,
    }))
}

fn csv_header(cfg: &impl Serialize) -> String {
    format!("# config: {}\n", serde_json::to_string(cfg).unwrap_or_default())
}

pub fn sig(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let path = cfg.build_path()?;
    let s = path.signature(cfg.level)?;
    Ok(Outcome {
        json: Some(envelope(cfg, &s)?),
        ..Outcome::default()
    })
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = cfg.build_model()?;
    let path = cfg.build_path()?;
    let problem = CdeProblem::new(&model, &path, cfg.initial_value())?.with_r(cfg.r);
    let sol = cde::solve(&problem, &cfg.solver, true)?;
    let csv = csv_header(cfg) + &sol.trajectory_csv();
    let summary = json!({
        "terminal": sol.terminal,
        "steps_per_segment": sol.steps_per_segment,
    });
    Ok(Outcome {
        json: Some(envelope(cfg, &summary)?),
        csv: Some(csv),
        ..Outcome::default()
    })
}

pub fn trees(word: &Word) -> Result<Outcome, CliError> {
    let labeled = trees::enumerate_trees(word)?;
    let rooted = trees::enumerate_rooted_ops(word)?;
    let join = |p: &[usize]| p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    let mut csv = format!(
        "# word: {word}\n# trees: {}\n# rooted_ops: {}\nfamily,index,parents,labels,root_degree\n",
        labeled.len(),
        rooted.len()
    );
    let labels = join(word.letters());
    for (k, t) in labeled.iter().enumerate() {
        let _ = writeln!(csv, "tree,{},{},{labels},", k + 1, join(t.parents()));
    }
    for (k, t) in rooted.iter().enumerate() {
        let _ = writeln!(csv, "rooted_op,{},{},{labels},{}", k + 1, join(t.parents()), t.root_degree());
    }
    Ok(Outcome {
        csv: Some(csv),
        json: Some(json!({
            "word": word,
            "trees": labeled.len(),
            "rooted_ops": rooted.len(),
        })),
        ..Outcome::default()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    Both,
    Trees,
    Words,
}

pub enum IndependenceCheck {
    Certificate(Family),
    Remark37,
    Remark39,
}

pub fn independence(cfg: &ExperimentConfig, check: IndependenceCheck) -> Result<Outcome, CliError> {
    let seed = cfg.require_seed("an independence run")?;
    let model = cfg.build_model()?;
    let icfg = cfg.independence;
    let m = cfg.level;
    let mut points_rng = rng::stream(seed, "cli-points", &[m as u64]);
    match check {
        IndependenceCheck::Certificate(family) => {
            let cert = independence::independence_certificate(&model, m, &icfg)?;
            let mut problems = Vec::new();
            for (name, report, wanted) in [
                ("tree", &cert.trees, family != Family::Words),
                ("word", &cert.words, family != Family::Trees),
            ] {
                if wanted && report.report.verdict != Verdict::Independent {
                    problems.push(format!(
                        "{name} family: rank {} of {} ({:?})",
                        report.report.rank, report.report.shape[1], report.report.verdict
                    ));
                }
            }
            Ok(Outcome {
                json: Some(envelope(cfg, &cert)?),
                failed: (!problems.is_empty()).then(|| problems.join("; ")),
                ..Outcome::default()
            })
        }
        IndependenceCheck::Remark37 => {
            let points = independence::sample_points(model.dim(), REMARK_POINTS, &mut points_rng);
            let tests = TestFunction::projections(model.dim());
            let r37 = independence::check_remark_3_7(&model, &points, &tests)?;
            let family = FieldFamily::word_operators(model.letters(), 3, &tests)?;
            let sampled = independence::sample_matrix(&family, &model, points, icfg.normalize, &mut points_rng)?;
            let rank = independence::numerical_rank(&sampled.matrix, icfg.tol)?;
            let mut failed = Vec::new();
            if r37.normalized > REMARK37_TOL {
                failed.push(format!("normalized residual {:e} > {REMARK37_TOL:e}", r37.normalized));
            }
            if rank.rank >= family.len() {
                failed.push(format!("word operators have full rank {}", rank.rank));
            }
            Ok(Outcome {
                json: Some(envelope(cfg, &json!({ "remark37": r37, "word_operators": rank }))?),
                failed: (!failed.is_empty()).then(|| failed.join("; ")),
                ..Outcome::default()
            })
        }
        IndependenceCheck::Remark39 => {
            let points = independence::sample_points(model.dim(), REMARK_POINTS, &mut points_rng);
            let reports = Word::all(model.letters(), m)
                .map(|w| independence::check_remark_3_9(&model, &w, &points))
                .collect::<sigrecon::error::Result<Vec<_>>>()?;
            let worst = reports.iter().map(|r| r.min_component_cosine).fold(f64::INFINITY, f64::min);
            Ok(Outcome {
                json: Some(envelope(cfg, &json!({ "min_component_cosine": worst, "words": reports }))?),
                failed: (worst < 1.0 - REMARK39_TOL).then(|| format!("min |cosine| {worst} below 1 - {REMARK39_TOL:e}")),
                ..Outcome::default()
            })
        }
    }
}

fn run_reconstruction(cfg: &ExperimentConfig) -> Result<ReconstructionReport, CliError> {
    cfg.require_seed("reconstruction")?;
    let model = cfg.build_model()?;
    let path = cfg.build_path()?;
    Ok(reconstruct::reconstruct(&model, &path, &cfg.reconstruction)?)
}

fn failed_levels(report: &ReconstructionReport) -> Option<String> {
    let failed: Vec<String> = report
        .levels
        .iter()
        .filter_map(|l| match &l.outcome {
            LevelOutcome::Failed { kind, message } => Some(format!("level {}: {kind} ({message})", l.level)),
            LevelOutcome::Recovered { .. } => None,
        })
        .collect();
    (!failed.is_empty()).then(|| failed.join("; "))
}

pub fn reconstruct(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let report = run_reconstruction(cfg)?;
    Ok(Outcome {
        json: Some(envelope(cfg, &report)?),
        csv: Some(csv_header(cfg) + &report.to_csv()),
        failed: failed_levels(&report),
        ..Outcome::default()
    })
}

/// Entry passes when `|e − t| ≤ max(1e-3 |t|, 1e-5)`.
fn within_tolerance(estimated: &[f64], truth: &[f64]) -> bool {
    estimated
        .iter()
        .zip(truth)
        .all(|(e, t)| (e - t).abs() <= (1e-3 * t.abs()).max(1e-5))
}

pub fn demo(seed: u64) -> Result<Outcome, CliError> {
    let cfg = ExperimentConfig::demo(seed);
    let report = run_reconstruction(&cfg)?;
    let mut text = format!(
        "d=2 N=2 L=3 neural_depth2_exp, 5-segment path, seed {seed}\n{:>5}  {:>12}  {:>12}  {:>10}  status\n",
        "level", "max_abs_err", "max_rel_err", "cond"
    );
    let mut failed = failed_levels(&report);
    for l in &report.levels {
        let _ = match &l.outcome {
            LevelOutcome::Recovered {
                estimated,
                truth,
                max_abs_err,
                max_rel_err,
                cond,
                ..
            } => {
                let ok = within_tolerance(estimated, truth);
                if !ok && failed.is_none() {
                    failed = Some(format!("level {} exceeds the error tolerance", l.level));
                }
                writeln!(
                    text,
                    "{:>5}  {max_abs_err:>12.3e}  {max_rel_err:>12.3e}  {cond:>10.3e}  {}",
                    l.level,
                    if ok { "ok" } else { "out of tolerance" }
                )
            }
            LevelOutcome::Failed { kind, .. } => writeln!(text, "{:>5}  {:>12}  {:>12}  {:>10}  {kind}", l.level, "-", "-", "-"),
        };
    }
    Ok(Outcome {
        json: Some(envelope(&cfg, &report)?),
        csv: Some(csv_header(&cfg) + &report.to_csv()),
        text: Some(text),
        failed,
    })
}
