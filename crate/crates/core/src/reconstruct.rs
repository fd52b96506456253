//! Recovering signature coefficients from CDE solutions.
//!
//! For the fields `r V_i` the terminal value satisfies
//! `g(Y_T^{η,r}) = g(η) + Σ_m r^m Σ_{w ∈ 𝒲_m} (V_{w_1}⋯V_{w_m} g)(η) ∫dX^w`
//! to every order, so the coefficient of `r^m` is linear in the level-`m`
//! signature. Sampling it for several `(η, g)` pairs gives a linear system per
//! level whose solution is that level of the signature.
//!
//! The `r^m` coefficient is estimated by a least-squares polynomial fit on a
//! symmetric grid of `r` values; this fit dominates the error budget.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cde::{self, CdeProblem, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{ScaledFields, VectorFields};
use crate::linalg;
use crate::rng;
use crate::signature::{PiecewiseLinearPath, TruncatedTensor};
use crate::testfn::TestFunction;
use crate::trees;
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionConfig {
    /// Highest signature level to recover.
    pub max_level: usize,
    /// Half-width of the `r` grid.
    pub epsilon: f64,
    /// Grid size; `2 · degree − 3` when absent.
    pub nodes: Option<usize>,
    /// Fit degree; `max(12, m + 2)` at level `m` when absent.
    pub degree: Option<usize>,
    /// Initial values beyond the minimum `⌈d^m / N⌉`.
    pub extra_etas: usize,
    pub seed: u64,
    /// Largest acceptable condition number of the scaled Vandermonde matrix.
    pub vandermonde_cap: f64,
    /// Relative singular-value threshold for the level systems.
    pub rank_tol: f64,
    /// Fresh draws of initial values before a level is declared singular.
    pub max_attempts: usize,
    /// When set to `c`, the grid half-width for an initial value `η` shrinks
    /// to `min(ε, c / (κ(η) ℓ))`, where `κ(η)` bounds the fields and their
    /// Jacobians at `η` and `ℓ` is the 1-norm length of the path.
    pub adaptive_radius: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            max_level: 3,
            epsilon: 0.1,
            nodes: None,
            degree: None,
            extra_etas: 2,
            seed: 0,
            vandermonde_cap: 1e8,
            rank_tol: 1e-8,
            max_attempts: 5,
            adaptive_radius: Some(1.0),
            solver: SolverConfig::default(),
        }
    }
}

impl ReconstructionConfig {
    pub fn nodes_for(&self, m: usize) -> usize {
        self.nodes.unwrap_or(2 * self.degree_for(m) - 3)
    }

    pub fn degree_for(&self, m: usize) -> usize {
        self.degree.unwrap_or((m + 2).max(12))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_level == 0 {
            return Err(Error::arg("max_level must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::arg("epsilon must be positive"));
        }
        for m in 1..=self.max_level {
            let (nodes, degree) = (self.nodes_for(m), self.degree_for(m));
            if degree < m + 2 || nodes < degree + 1 || nodes % 2 == 0 {
                return Err(Error::arg(format!(
                    "level {m} needs an odd node count >= degree + 1 and degree >= {}; got {nodes} nodes, degree {degree}",
                    m + 2
                )));
            }
        }
        if self.max_attempts == 0 {
            return Err(Error::arg("max_attempts must be at least 1"));
        }
        self.solver.validate()
    }
}

/// `nodes` equispaced points on `[-ε, ε]`; odd counts include `0`.
pub fn symmetric_grid(epsilon: f64, nodes: usize) -> Vec<f64> {
    if nodes == 1 {
        return vec![0.0];
    }
    let half = (nodes - 1) as f64 / 2.0;
    (0..nodes).map(|k| epsilon * (k as f64 - half) / half).collect()
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Coefficient of `r^m` in a least-squares polynomial fit of the samples.
///
/// The fit runs in the scaled variable `r / max|r|`. When the scaled
/// Vandermonde matrix is worse conditioned than `cap`, the degree is lowered
/// (never below `m`) before giving up.
pub fn r_coefficient(samples: &[(f64, f64)], m: usize, degree: usize, cap: f64) -> Result<f64> {
    if degree < m {
        return Err(Error::arg(format!("fit degree {degree} below derivative order {m}")));
    }
    if samples.len() < degree + 1 {
        return Err(Error::arg(format!("{} samples for a degree-{degree} fit", samples.len())));
    }
    let scale = samples.iter().map(|(r, _)| r.abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || samples.iter().any(|(r, v)| !r.is_finite() || !v.is_finite()) {
        return Err(Error::Fit("samples must be finite with at least one nonzero r".into()));
    }
    let symmetric = samples.iter().any(|(r, _)| *r == 0.0)
        && samples
            .iter()
            .all(|(r, _)| samples.iter().any(|(q, _)| (q + r).abs() <= 1e-12 * scale));
    if !symmetric {
        return Err(Error::arg("the r grid must be symmetric about 0 and contain 0"));
    }
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|(_, v)| *v));
    for deg in (m..=degree).rev() {
        let v = DMatrix::from_fn(samples.len(), deg + 1, |i, p| (samples[i].0 / scale).powi(p as i32));
        let s = linalg::singular_values(&v);
        if linalg::condition_number(&s) > cap {
            continue;
        }
        let fit = linalg::least_squares(&v, &rhs, 1e-14).map_err(|e| Error::Fit(e.to_string()))?;
        return Ok(fit.solution[m] / scale.powi(m as i32));
    }
    Err(Error::Fit(format!(
        "Vandermonde condition exceeds {cap:e} for every degree in {m}..={degree}"
    )))
}

/// `m`-th derivative at `r = 0` of the function sampled at `samples`.
pub fn r_derivative_at_zero(samples: &[(f64, f64)], m: usize, degree: usize, cap: f64) -> Result<f64> {
    Ok(factorial(m) * r_coefficient(samples, m, degree, cap)?)
}

/// Linear system of one level: rows `(η, g)`, columns the words of `𝒲_m` in
/// lexicographic order, entry `(V_{w_1}⋯V_{w_m} g)(η)`.
#[derive(Debug, Clone)]
pub struct LevelSystem {
    pub matrix: DMatrix<f64>,
    /// `(η index, test function index)` of every row.
    pub rows: Vec<(usize, usize)>,
}

pub fn build_system<F: VectorFields + ?Sized>(
    fields: &F,
    m: usize,
    etas: &[Vec<f64>],
    gs: &[TestFunction],
) -> Result<LevelSystem> {
    let (d, n) = (fields.letters(), fields.dim());
    if m == 0 || m > trees::MAX_WORD_LEN {
        return Err(Error::arg(format!("level {m} outside 1..={}", trees::MAX_WORD_LEN)));
    }
    let words: Vec<Word> = Word::all(d, m).collect();
    if etas.len() * gs.len() < words.len() {
        return Err(Error::arg(format!(
            "{} rows cannot determine {} coefficients",
            etas.len() * gs.len(),
            words.len()
        )));
    }
    for g in gs {
        g.dim_compatible(n)?;
    }
    let projections = *gs == TestFunction::projections(n)[..];
    let blocks = etas
        .par_iter()
        .map(|eta| -> Result<Vec<Vec<f64>>> {
            words
                .iter()
                .map(|w| {
                    if projections {
                        trees::sum_tree_field(&w.reversed(), fields, eta)
                    } else {
                        gs.iter().map(|g| trees::taylor_operator(w, g, fields, eta)).collect()
                    }
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let k = gs.len();
    let mut matrix = DMatrix::zeros(etas.len() * k, words.len());
    let mut rows = Vec::with_capacity(etas.len() * k);
    for (e, block) in blocks.iter().enumerate() {
        for gi in 0..k {
            rows.push((e, gi));
        }
        for (c, col) in block.iter().enumerate() {
            for (gi, v) in col.iter().enumerate() {
                matrix[(e * k + gi, c)] = *v;
            }
        }
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("level-{m} system entries")));
    }
    Ok(LevelSystem { matrix, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LevelOutcome {
    Recovered {
        estimated: Vec<f64>,
        truth: Vec<f64>,
        max_abs_err: f64,
        max_rel_err: f64,
        cond: f64,
        residual: f64,
        etas: usize,
        attempts: usize,
    },
    Failed {
        /// `singular_system`, `fit`, `solver` or `other`.
        kind: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    #[serde(flatten)]
    pub outcome: LevelOutcome,
}

impl LevelReport {
    pub fn is_recovered(&self) -> bool {
        matches!(self.outcome, LevelOutcome::Recovered { .. })
    }

    pub fn is_singular(&self) -> bool {
        matches!(&self.outcome, LevelOutcome::Failed { kind, .. } if kind == "singular_system")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub max_level: usize,
    pub levels: Vec<LevelReport>,
}

impl ReconstructionReport {
    pub fn all_recovered(&self) -> bool {
        self.levels.iter().all(LevelReport::is_recovered)
    }

    /// Recovered signature, when every level succeeded.
    pub fn estimated(&self) -> Option<TruncatedTensor> {
        let mut levels = vec![vec![1.0]];
        for l in &self.levels {
            match &l.outcome {
                LevelOutcome::Recovered { estimated, .. } => levels.push(estimated.clone()),
                LevelOutcome::Failed { .. } => return None,
            }
        }
        TruncatedTensor::from_levels(self.d, levels).ok()
    }

    /// `level,max_abs_err,max_rel_err,cond,residual`; failed levels leave the
    /// numeric cells empty and append the failure kind.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,max_abs_err,max_rel_err,cond,residual,status\n");
        for l in &self.levels {
            let _ = match &l.outcome {
                LevelOutcome::Recovered {
                    max_abs_err,
                    max_rel_err,
                    cond,
                    residual,
                    ..
                } => writeln!(out, "{},{max_abs_err:e},{max_rel_err:e},{cond:e},{residual:e},recovered", l.level),
                LevelOutcome::Failed { kind, .. } => writeln!(out, "{},,,,,{kind}", l.level),
            };
        }
        out
    }
}

fn failure(e: &Error) -> LevelOutcome {
    let kind = match e {
        Error::SingularSystem { .. } => "singular_system",
        Error::Fit(_) => "fit",
        Error::Solver(_) | Error::NumericOverflow { .. } | Error::NonFinite(_) => "solver",
        _ => "other",
    };
    LevelOutcome::Failed {
        kind: kind.into(),
        message: e.to_string(),
    }
}

/// Per-level relative error `|e − t| / max(|t|, 1e-12)`.
pub fn relative_error(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth.abs().max(1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelError {
    pub level: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// Word attaining the largest absolute error (empty at level 0).
    pub worst_word: Word,
}

/// Entrywise comparison of two tensors of equal shape, level by level.
pub fn compare(estimated: &TruncatedTensor, truth: &TruncatedTensor) -> Result<Vec<LevelError>> {
    if estimated.d() != truth.d() || estimated.depth() != truth.depth() {
        return Err(Error::Shape(format!(
            "(d, L) = ({}, {}) vs ({}, {})",
            estimated.d(),
            estimated.depth(),
            truth.d(),
            truth.depth()
        )));
    }
    (0..=truth.depth())
        .map(|n| {
            let (e, t) = (estimated.level(n), truth.level(n));
            let mut worst = (0, 0.0);
            let mut rel: f64 = 0.0;
            for (k, (a, b)) in e.iter().zip(t).enumerate() {
                let abs = (a - b).abs();
                if abs > worst.1 {
                    worst = (k, abs);
                }
                rel = rel.max(relative_error(*a, *b));
            }
            Ok(LevelError {
                level: n,
                max_abs_err: worst.1,
                max_rel_err: rel,
                worst_word: Word::from_rank(worst.0, n, truth.d())?,
            })
        })
        .collect()
}

/// `max_i (‖V_i(η)‖_∞ + max_j ‖∂_j V_i(η)‖_∞)`.
fn local_scale<F: VectorFields + ?Sized>(fields: &F, eta: &[f64]) -> Result<f64> {
    let mut kappa: f64 = 0.0;
    for i in 1..=fields.letters() {
        let mut k = fields.eval(i, eta)?.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let mut jac: f64 = 0.0;
        for j in 1..=fields.dim() {
            let col = fields.mixed_partial(i, &[j], eta)?;
            jac = jac.max(col.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
        }
        k += jac;
        kappa = kappa.max(k);
    }
    Ok(kappa)
}

fn path_length(path: &PiecewiseLinearPath) -> f64 {
    (0..path.segments())
        .map(|s| path.increment(s).iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}

/// Grid for one initial value.
fn grid_for<F: VectorFields + ?Sized>(
    fields: &F,
    path: &PiecewiseLinearPath,
    eta: &[f64],
    m: usize,
    cfg: &ReconstructionConfig,
) -> Result<Vec<f64>> {
    let mut eps = cfg.epsilon;
    if let Some(c) = cfg.adaptive_radius {
        let denom = local_scale(fields, eta)? * path_length(path);
        if denom > 0.0 {
            eps = eps.min(c / denom);
        }
    }
    Ok(symmetric_grid(eps, cfg.nodes_for(m)))
}

/// Terminal values over the `r` grid for one initial value.
fn solve_grid<F: VectorFields + ?Sized>(
    fields: &F,
    path: &PiecewiseLinearPath,
    eta: &[f64],
    grid: &[f64],
    solver: &SolverConfig,
) -> Result<Vec<Vec<f64>>> {
    grid.par_iter()
        .map(|&r| -> Result<Vec<f64>> {
            if r == 0.0 {
                return Ok(eta.to_vec());
            }
            let scaled = ScaledFields::new(fields, r);
            let problem = CdeProblem::new(&scaled, path, eta.to_vec())?;
            Ok(cde::solve(&problem, solver, false)?.terminal)
        })
        .collect()
}

/// Draws standard-normal initial values until `count` of them have a
/// successful solve at every grid point. Candidates are drawn in batches of
/// `count` and evaluated in parallel; acceptance follows draw order.
fn accepted_etas<F: VectorFields + ?Sized>(
    fields: &F,
    path: &PiecewiseLinearPath,
    m: usize,
    count: usize,
    stream_tags: [u64; 2],
    cfg: &ReconstructionConfig,
) -> Result<Vec<Accepted>> {
    let n = fields.dim();
    let mut rng = rng::stream(cfg.seed, "etas", &stream_tags);
    let mut accepted = Vec::with_capacity(count);
    let mut last_error = None;
    for _ in 0..MAX_ETA_BATCHES {
        let batch: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let solved: Vec<Result<(Vec<f64>, Vec<Vec<f64>>)>> = batch
            .par_iter()
            .map(|eta| {
                let grid = grid_for(fields, path, eta, m, cfg)?;
                let t = solve_grid(fields, path, eta, &grid, &cfg.solver)?;
                Ok((grid, t))
            })
            .collect();
        for (eta, res) in batch.into_iter().zip(solved) {
            match res {
                Ok((grid, terminals)) if accepted.len() < count => accepted.push(Accepted { eta, grid, terminals }),
                Ok(_) => {}
                Err(e @ (Error::Solver(_) | Error::NumericOverflow { .. } | Error::NonFinite(_))) => {
                    last_error = Some(e)
                }
                Err(e) => return Err(e),
            }
        }
        if accepted.len() == count {
            return Ok(accepted);
        }
    }
    Err(last_error.unwrap_or_else(|| Error::Solver("no admissible initial values".into())))
}

struct Accepted {
    eta: Vec<f64>,
    grid: Vec<f64>,
    terminals: Vec<Vec<f64>>,
}

/// Batches of candidate initial values tried per attempt.
const MAX_ETA_BATCHES: usize = 8;

fn recover_level<F: VectorFields + ?Sized>(
    fields: &F,
    path: &PiecewiseLinearPath,
    truth: &TruncatedTensor,
    m: usize,
    cfg: &ReconstructionConfig,
) -> Result<LevelOutcome> {
    let (d, n) = (fields.letters(), fields.dim());
    let required = d.pow(m as u32);
    let count = required.div_ceil(n) + cfg.extra_etas;
    let gs = TestFunction::projections(n);

    let mut best_rank = 0;
    let mut accepted = None;
    for attempt in 0..cfg.max_attempts {
        let solved = accepted_etas(fields, path, m, count, [m as u64, attempt as u64], cfg)?;
        let etas: Vec<Vec<f64>> = solved.iter().map(|a| a.eta.clone()).collect();
        let system = match build_system(fields, m, &etas, &gs) {
            Ok(s) => s,
            Err(Error::NumericOverflow { .. } | Error::NonFinite(_)) => continue,
            Err(e) => return Err(e),
        };
        let s = linalg::singular_values(&system.matrix);
        let rank = linalg::rank_from_singular_values(&s, cfg.rank_tol);
        best_rank = best_rank.max(rank);
        if rank == required {
            accepted = Some((etas, system, solved, attempt + 1));
            break;
        }
    }
    let Some((etas, system, solved, attempts)) = accepted else {
        return Err(Error::SingularSystem {
            rank: best_rank,
            required,
            attempts: cfg.max_attempts,
        });
    };

    let degree = cfg.degree_for(m);
    let mut rhs = DVector::zeros(system.rows.len());
    for (row, &(e, gi)) in system.rows.iter().enumerate() {
        let samples: Vec<(f64, f64)> = solved[e]
            .grid
            .iter()
            .zip(&solved[e].terminals)
            .map(|(&r, y)| (r, gs[gi].value(y)))
            .collect();
        rhs[row] = r_coefficient(&samples, m, degree, cfg.vandermonde_cap)?;
    }
    let ls = linalg::least_squares(&system.matrix, &rhs, cfg.rank_tol).map_err(|e| match e {
        Error::SingularSystem { rank, required, .. } => Error::SingularSystem {
            rank,
            required,
            attempts,
        },
        other => other,
    })?;
    let estimated: Vec<f64> = ls.solution.iter().copied().collect();
    let truth = truth.level(m).to_vec();
    let max_abs_err = estimated.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let max_rel_err = estimated
        .iter()
        .zip(&truth)
        .map(|(a, b)| relative_error(*a, *b))
        .fold(0.0, f64::max);
    Ok(LevelOutcome::Recovered {
        estimated,
        truth,
        max_abs_err,
        max_rel_err,
        cond: ls.condition,
        residual: ls.residual,
        etas: etas.len(),
        attempts,
    })
}

/// Recovers levels `1..=cfg.max_level` of the signature of `path` from
/// solutions of the CDE driven by it. A failing level is reported and the
/// remaining levels are still attempted.
pub fn reconstruct<F: VectorFields + ?Sized>(
    fields: &F,
    path: &PiecewiseLinearPath,
    cfg: &ReconstructionConfig,
) -> Result<ReconstructionReport> {
    cfg.validate()?;
    if fields.letters() != path.dim() {
        return Err(Error::Shape(format!(
            "{} fields driven by a path in R^{}",
            fields.letters(),
            path.dim()
        )));
    }
    let truth = path.signature(cfg.max_level)?;
    let levels = (1..=cfg.max_level)
        .map(|m| LevelReport {
            level: m,
            outcome: recover_level(fields, path, &truth, m, cfg).unwrap_or_else(|e| failure(&e)),
        })
        .collect();
    Ok(ReconstructionReport {
        d: fields.letters(),
        n: fields.dim(),
        max_level: cfg.max_level,
        levels,
    })
}
