//! Numerical (in)dependence certificates for families of tree-like fields and
//! iterated operators.
//!
//! Function-space independence is probed by evaluating every family member at
//! random points and measuring the numerical rank of the resulting matrix
//! (rows: point × output component, columns: members).

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DirectionTuple, VectorFields};
use crate::linalg;
use crate::rng;
use crate::testfn::TestFunction;
use crate::trees::{self, LabeledRecursiveTree};
use crate::word::Word;

pub const DEFAULT_TOL: f64 = 1e-8;

/// Tolerances scanned by the stability assessment.
pub const STABILITY_TOLS: [f64; 3] = [1e-6, 1e-8, 1e-10];

/// Upper bound on the number of columns a certificate may build.
pub const MAX_FAMILY_SIZE: usize = 4096;

/// Times a point whose evaluation overflows is redrawn before giving up.
const MAX_RESAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "member", rename_all = "snake_case")]
pub enum FamilyMember {
    /// `V_τ`.
    Tree { tree: LabeledRecursiveTree },
    /// `V_τ^𝐣`.
    TreeFixed {
        tree: LabeledRecursiveTree,
        dirs: DirectionTuple,
    },
    /// `x ↦ (V_w g_1(x), …, V_w g_k(x))`.
    WordOperator { word: Word, tests: Vec<TestFunction> },
    /// `Σ_{τ ∈ 𝕋_w} V_τ`.
    SumTree { word: Word },
}

impl FamilyMember {
    fn components(&self, n: usize) -> usize {
        match self {
            FamilyMember::WordOperator { tests, .. } => tests.len(),
            _ => n,
        }
    }

    pub fn evaluate<F: VectorFields + ?Sized>(&self, fields: &F, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FamilyMember::Tree { tree } => trees::eval_tree_vf(tree, fields, x),
            FamilyMember::TreeFixed { tree, dirs } => trees::eval_tree_vf_fixed_directions(tree, dirs, fields, x),
            FamilyMember::WordOperator { word, tests } => tests
                .iter()
                .map(|g| trees::apply_word_direct(word, g, fields, x))
                .collect(),
            FamilyMember::SumTree { word } => trees::sum_tree_field(word, fields, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldFamily {
    members: Vec<FamilyMember>,
}

impl FieldFamily {
    pub fn new(members: Vec<FamilyMember>) -> Self {
        FieldFamily { members }
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn words(d: usize, m: usize) -> Result<Vec<Word>> {
        let count = d.checked_pow(m as u32).unwrap_or(usize::MAX);
        if count > MAX_FAMILY_SIZE {
            return Err(Error::Budget(format!("{count} words of length {m} over {d} letters")));
        }
        Ok(Word::all(d, m).collect())
    }

    fn check_budget(d: usize, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::arg("level must be at least 1"));
        }
        let words = d.checked_pow(m as u32);
        let trees: Option<usize> = (1..m).try_fold(1usize, |acc, k| acc.checked_mul(k));
        match words.zip(trees).and_then(|(w, t)| w.checked_mul(t)) {
            Some(total) if total <= MAX_FAMILY_SIZE && m <= trees::MAX_WORD_LEN => Ok(()),
            _ => Err(Error::Budget(format!(
                "{d}^{m} words x ({m}-1)! trees exceeds {MAX_FAMILY_SIZE} columns"
            ))),
        }
    }

    /// `{V_τ : τ ∈ 𝕋_w, w ∈ 𝒲_m}`, words in lexicographic order.
    pub fn trees_of_level(d: usize, m: usize) -> Result<Self> {
        Self::check_budget(d, m)?;
        let mut members = Vec::new();
        for w in Self::words(d, m)? {
            for tree in trees::enumerate_trees(&w)? {
                members.push(FamilyMember::Tree { tree });
            }
        }
        Ok(FieldFamily { members })
    }

    /// `{V_τ^𝐣}` over trees of level `m` and direction tuples in `{1..n}^{m-1}`,
    /// optionally restricted to tuples with distinct entries.
    pub fn fixed_direction_trees(d: usize, m: usize, n: usize, distinct_only: bool) -> Result<Self> {
        Self::check_budget(d, m)?;
        let dirs: Vec<DirectionTuple> = DirectionTuple::all(n, m - 1)
            .filter(|j| !distinct_only || j.is_distinct())
            .collect();
        let mut members = Vec::new();
        for w in Self::words(d, m)? {
            for tree in trees::enumerate_trees(&w)? {
                for j in &dirs {
                    members.push(FamilyMember::TreeFixed {
                        tree: tree.clone(),
                        dirs: j.clone(),
                    });
                }
                if members.len() > MAX_FAMILY_SIZE {
                    return Err(Error::Budget(format!("more than {MAX_FAMILY_SIZE} fixed-direction fields")));
                }
            }
        }
        Ok(FieldFamily { members })
    }

    /// `{Σ_{τ∈𝕋_w} V_τ : w ∈ 𝒲_m}`, i.e. the word operators on coordinate projections.
    pub fn sum_trees_of_level(d: usize, m: usize) -> Result<Self> {
        if m == 0 || m > trees::MAX_WORD_LEN {
            return Err(Error::Budget(format!("level {m} outside 1..={}", trees::MAX_WORD_LEN)));
        }
        Ok(FieldFamily {
            members: Self::words(d, m)?
                .into_iter()
                .map(|word| FamilyMember::SumTree { word })
                .collect(),
        })
    }

    /// `{V_w restricted to tests : w ∈ 𝒲_m}`.
    pub fn word_operators(d: usize, m: usize, tests: &[TestFunction]) -> Result<Self> {
        if m == 0 || m > trees::MAX_WORD_LEN {
            return Err(Error::Budget(format!("level {m} outside 1..={}", trees::MAX_WORD_LEN)));
        }
        Ok(FieldFamily {
            members: Self::words(d, m)?
                .into_iter()
                .map(|word| FamilyMember::WordOperator {
                    word,
                    tests: tests.to_vec(),
                })
                .collect(),
        })
    }

    /// Output components per point; every member must agree.
    pub fn components(&self, n: usize) -> Result<usize> {
        let first = self
            .members
            .first()
            .ok_or_else(|| Error::arg("empty family"))?
            .components(n);
        if self.members.iter().any(|m| m.components(n) != first) {
            return Err(Error::Shape("family members have different output sizes".into()));
        }
        Ok(first)
    }

    /// Points needed so that rows ≥ `oversample` × columns.
    pub fn points_needed(&self, n: usize, oversample: usize) -> Result<usize> {
        let k = self.components(n)?;
        Ok((oversample * self.len()).div_ceil(k.max(1)).max(1))
    }
}

/// Uniform draws from `[-1, 1]^n`.
pub fn sample_points<R: Rng>(n: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

/// A sampled evaluation matrix together with the points actually used.
#[derive(Debug, Clone)]
pub struct SampledMatrix {
    pub matrix: DMatrix<f64>,
    pub points: Vec<Vec<f64>>,
}

fn evaluate_row_block<F: VectorFields + ?Sized>(family: &FieldFamily, fields: &F, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let cols = family
        .members
        .iter()
        .map(|m| m.evaluate(fields, x))
        .collect::<Result<Vec<_>>>()?;
    if let Some(c) = cols.iter().position(|col| col.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("family member {} at {x:?}", c + 1)));
    }
    Ok(cols)
}

/// Evaluates every member at every point. A point whose evaluation overflows
/// is replaced by a fresh uniform draw from `rng`; after repeated failures the
/// overflow is returned. With `normalize`, columns are scaled to unit length.
pub fn sample_matrix<F: VectorFields + ?Sized, R: Rng>(
    family: &FieldFamily,
    fields: &F,
    points: Vec<Vec<f64>>,
    normalize: bool,
    rng: &mut R,
) -> Result<SampledMatrix> {
    let n = fields.dim();
    let k = family.components(n)?;
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::Shape(format!("sample point of dimension {}, expected {n}", p.len())));
    }
    let mut points = points;
    let mut blocks: Vec<Result<Vec<Vec<f64>>>> =
        points.par_iter().map(|x| evaluate_row_block(family, fields, x)).collect();
    for (p, block) in blocks.iter_mut().enumerate() {
        let mut tries = 0;
        while let Err(Error::NumericOverflow { .. } | Error::NonFinite(_)) = block {
            if tries == MAX_RESAMPLES {
                break;
            }
            tries += 1;
            points[p] = sample_points(n, 1, rng).remove(0);
            *block = evaluate_row_block(family, fields, &points[p]);
        }
    }
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = points.len() * k;
    let mut matrix = DMatrix::zeros(rows, family.len());
    for (p, block) in blocks.iter().enumerate() {
        for (c, col) in block.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                matrix[(p * k + i, c)] = *v;
            }
        }
    }
    if normalize {
        for mut col in matrix.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
    }
    Ok(SampledMatrix { matrix, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Independent,
    Dependent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_points: Vec<Vec<f64>>,
    pub shape: [usize; 2],
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub tol: f64,
    pub verdict: Verdict,
}

/// Rank at relative threshold `tol`. A wide matrix of full row rank says
/// nothing about the columns, so its verdict is inconclusive.
pub fn numerical_rank(matrix: &DMatrix<f64>, tol: f64) -> Result<RankReport> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("matrix has non-finite entries"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::arg(format!("tolerance {tol} must lie in (0, 1)")));
    }
    let s = linalg::singular_values(matrix);
    let rank = linalg::rank_from_singular_values(&s, tol);
    let cols = matrix.ncols();
    let verdict = if rank == cols {
        Verdict::Independent
    } else if matrix.nrows() < cols && rank == matrix.nrows() {
        Verdict::Inconclusive
    } else {
        Verdict::Dependent
    };
    Ok(RankReport {
        sample_points: Vec::new(),
        shape: [matrix.nrows(), cols],
        singular_values: s,
        rank,
        tol,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceConfig {
    pub tol: f64,
    pub normalize: bool,
    /// Rows per column.
    pub oversample: usize,
    /// Number of disjoint point sets in the stability assessment.
    pub point_sets: usize,
    pub seed: u64,
}

impl Default for IndependenceConfig {
    fn default() -> Self {
        IndependenceConfig {
            tol: DEFAULT_TOL,
            normalize: true,
            oversample: 2,
            point_sets: 3,
            seed: 0,
        }
    }
}

/// Rank measured on several independent point sets and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// First point set at the configured tolerance; its verdict is
    /// downgraded to inconclusive when the scan disagrees.
    pub report: RankReport,
    /// `ranks[s][t]`: point set `s`, tolerance `STABILITY_TOLS[t]`.
    pub ranks: Vec<Vec<usize>>,
    pub tols: Vec<f64>,
    pub stable: bool,
}

/// Measures `family` on `cfg.point_sets` disjoint uniform point sets (stream
/// `"points"` tagged by `tag` and the set index) at every tolerance in
/// [`STABILITY_TOLS`] and the configured one.
pub fn assess<F: VectorFields + ?Sized>(
    family: &FieldFamily,
    fields: &F,
    cfg: &IndependenceConfig,
    tag: u64,
) -> Result<StabilityReport> {
    let n = fields.dim();
    let count = family.points_needed(n, cfg.oversample.max(1))?;
    let mut tols = STABILITY_TOLS.to_vec();
    if !tols.contains(&cfg.tol) {
        tols.push(cfg.tol);
    }
    let mut first = None;
    let mut ranks = Vec::new();
    let mut verdicts = Vec::new();
    for set in 0..cfg.point_sets.max(1) {
        let mut rng = rng::stream(cfg.seed, "points", &[tag, set as u64]);
        let points = sample_points(n, count, &mut rng);
        let sampled = sample_matrix(family, fields, points, cfg.normalize, &mut rng)?;
        let mut row = Vec::new();
        for &t in &tols {
            let r = numerical_rank(&sampled.matrix, t)?;
            row.push(r.rank);
            verdicts.push(r.verdict);
        }
        if first.is_none() {
            let mut r = numerical_rank(&sampled.matrix, cfg.tol)?;
            r.sample_points = sampled.points;
            first = Some(r);
        }
        ranks.push(row);
    }
    let mut report = first.expect("at least one point set");
    let stable = verdicts.iter().all(|v| *v == report.verdict) && ranks.iter().flatten().all(|&r| r == ranks[0][0]);
    if !stable {
        report.verdict = Verdict::Inconclusive;
    }
    Ok(StabilityReport {
        report,
        ranks,
        tols,
        stable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remark37Report {
    /// `max |(V_{123}+V_{231}+V_{312}−V_{132}−V_{213}−V_{321}) g(x)|`.
    pub residual: f64,
    /// Largest magnitude among the six individual terms.
    pub max_term: f64,
    /// `residual / max_term` (zero when every term vanishes).
    pub normalized: f64,
}

/// Evaluates the cyclic-word identity for three fields on a line.
pub fn check_remark_3_7<F: VectorFields + ?Sized>(
    fields: &F,
    points: &[Vec<f64>],
    tests: &[TestFunction],
) -> Result<Remark37Report> {
    if fields.dim() != 1 || fields.letters() != 3 {
        return Err(Error::arg(format!(
            "the identity concerns three fields on R^1, got d={} N={}",
            fields.letters(),
            fields.dim()
        )));
    }
    let plus = [[1, 2, 3], [2, 3, 1], [3, 1, 2]];
    let minus = [[1, 3, 2], [2, 1, 3], [3, 2, 1]];
    let mut residual: f64 = 0.0;
    let mut max_term: f64 = 0.0;
    for x in points {
        for g in tests {
            let mut total = 0.0;
            for (sign, words) in [(1.0, &plus), (-1.0, &minus)] {
                for w in words {
                    let v = trees::apply_word_direct(&Word::new(w.to_vec())?, g, fields, x)?;
                    max_term = max_term.max(v.abs());
                    total += sign * v;
                }
            }
            residual = residual.max(total.abs());
        }
    }
    let normalized = if max_term > 0.0 { residual / max_term } else { 0.0 };
    Ok(Remark37Report {
        residual,
        max_term,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remark39Report {
    pub word: Word,
    pub word_prime: Word,
    pub dirs: DirectionTuple,
    pub dirs_prime: DirectionTuple,
    /// Cosine of the two fields stacked over all points and components.
    pub vector_cosine: f64,
    /// Smallest |cosine| over output components, each component vectorized over points.
    pub min_component_cosine: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 1.0 } else { 0.0 };
    }
    dot / (na * nb)
}

/// Compares the two ladder summands `V_τ^𝐣` and `V_{τ'}^{𝐣'}` built from
/// `w = (w_1, …, w_m)`, `w' = (w_1, w_{m-1}, …, w_2, w_m)`, `𝐣 = (1, …, m−1)`
/// and `𝐣' = (m−2, …, 1, m−1)`.
///
/// For `σ(A_i x)` fields every component of the first is a constant multiple
/// of the same component of the second; the constants differ between
/// components unless `m = 3`, where the two summands coincide.
pub fn check_remark_3_9<F: VectorFields + ?Sized>(
    fields: &F,
    w: &Word,
    points: &[Vec<f64>],
) -> Result<Remark39Report> {
    let m = w.len();
    if m < 3 {
        return Err(Error::arg("the ladder comparison needs m >= 3"));
    }
    if m - 1 > fields.dim() {
        return Err(Error::arg(format!(
            "m - 1 = {} distinct directions need N >= {}, got N = {}",
            m - 1,
            m - 1,
            fields.dim()
        )));
    }
    if points.is_empty() {
        return Err(Error::arg("at least one sample point is required"));
    }
    let l = w.letters();
    let mut lp = vec![l[0]];
    lp.extend(l[1..m - 1].iter().rev());
    lp.push(l[m - 1]);
    let word_prime = Word::new(lp)?;
    let dirs = DirectionTuple::new((1..m).collect())?;
    let mut jp: Vec<usize> = (1..m - 1).rev().collect();
    jp.push(m - 1);
    let dirs_prime = DirectionTuple::new(jp)?;

    let tau = LabeledRecursiveTree::ladder(w.clone())?;
    let tau_prime = LabeledRecursiveTree::ladder(word_prime.clone())?;
    let n = fields.dim();
    let mut a = Vec::with_capacity(points.len() * n);
    let mut b = Vec::with_capacity(points.len() * n);
    for x in points {
        a.extend(trees::eval_tree_vf_fixed_directions(&tau, &dirs, fields, x)?);
        b.extend(trees::eval_tree_vf_fixed_directions(&tau_prime, &dirs_prime, fields, x)?);
    }
    let vector_cosine = cosine(&a, &b);
    let min_component_cosine = (0..n)
        .map(|c| {
            let ac: Vec<f64> = a.iter().skip(c).step_by(n).copied().collect();
            let bc: Vec<f64> = b.iter().skip(c).step_by(n).copied().collect();
            cosine(&ac, &bc).abs()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(Remark39Report {
        word: w.clone(),
        word_prime,
        dirs,
        dirs_prime,
        vector_cosine,
        min_component_cosine,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub level: usize,
    /// Tree-like fields `{V_τ : τ ∈ 𝕋_w, w ∈ 𝒲_m}`.
    pub trees: StabilityReport,
    /// Word operators on coordinate projections, `{Σ_τ V_τ : w ∈ 𝒲_m}`.
    pub words: StabilityReport,
}

/// Measures both families at level `m`; the two ranks are computed separately.
pub fn independence_certificate<F: VectorFields + ?Sized>(
    fields: &F,
    m: usize,
    cfg: &IndependenceConfig,
) -> Result<Certificate> {
    let d = fields.letters();
    let tree_family = FieldFamily::trees_of_level(d, m)?;
    let word_family = FieldFamily::sum_trees_of_level(d, m)?;
    Ok(Certificate {
        level: m,
        trees: assess(&tree_family, fields, cfg, 2 * m as u64)?,
        words: assess(&word_family, fields, cfg, 2 * m as u64 + 1)?,
    })
}
