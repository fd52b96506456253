//! Letter-labelled recursive trees and the iterated operators they expand.
//!
//! A recursive tree on vertices `1..=m` is stored as its parent vector
//! `(i_1, …, i_{m-1})`: vertex `k+1` hangs below vertex `i_k ≤ k`. Vertex `l`
//! carries letter `w_l`. Rooted operator trees add a vertex `0` (the test
//! function) below which vertex `1` must hang.
//!
//! Edge `k` (into vertex `k+1`) carries direction `j_k` when the tree-like
//! field is split into its fixed-direction summands.
//!
//! Operator convention: `V_{w i} φ = V_i(V_w φ)`, so the *first* letter is the
//! first derivation applied to `φ` and the one attached directly below the
//! root. [`apply_word_direct`] implements exactly this recursion with nested
//! jets and never looks at trees; [`apply_word_via_trees`] sums rooted tree
//! operators. The two must agree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DirectionTuple, VectorFields};
use crate::jet::Jet;
use crate::testfn::TestFunction;
use crate::word::Word;

/// Enumerations grow like `m!`; longer words are refused.
pub const MAX_WORD_LEN: usize = 8;

fn guard(w: &Word) -> Result<()> {
    if w.is_empty() {
        return Err(Error::arg("the word must have at least one letter"));
    }
    if w.len() > MAX_WORD_LEN {
        return Err(Error::Budget(format!(
            "word length {} exceeds the enumeration guard {MAX_WORD_LEN}",
            w.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct LabeledRecursiveTree {
    parents: Vec<usize>,
    labels: Word,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    parents: Vec<usize>,
    labels: Word,
}

impl TryFrom<TreeRepr> for LabeledRecursiveTree {
    type Error = Error;
    fn try_from(r: TreeRepr) -> Result<Self> {
        LabeledRecursiveTree::new(r.parents, r.labels)
    }
}

impl From<LabeledRecursiveTree> for TreeRepr {
    fn from(t: LabeledRecursiveTree) -> Self {
        TreeRepr {
            parents: t.parents,
            labels: t.labels,
        }
    }
}

impl LabeledRecursiveTree {
    pub fn new(parents: Vec<usize>, labels: Word) -> Result<Self> {
        if labels.is_empty() || parents.len() + 1 != labels.len() {
            return Err(Error::Shape(format!(
                "{} parents for {} labels; need exactly labels - 1",
                parents.len(),
                labels.len()
            )));
        }
        for (k, &p) in parents.iter().enumerate() {
            if p == 0 || p > k + 1 {
                return Err(Error::arg(format!(
                    "vertex {} may attach to 1..={}, got {p}",
                    k + 2,
                    k + 1
                )));
            }
        }
        Ok(LabeledRecursiveTree { parents, labels })
    }

    /// The single vertex `•_i`.
    pub fn leaf(letter: usize) -> Result<Self> {
        LabeledRecursiveTree::new(Vec::new(), Word::new(vec![letter])?)
    }

    /// The ladder `1 ← 2 ← ⋯ ← m`.
    pub fn ladder(labels: Word) -> Result<Self> {
        let parents = (1..labels.len()).collect();
        LabeledRecursiveTree::new(parents, labels)
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn labels(&self) -> &Word {
        &self.labels
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    /// `children[v]` for `v in 1..=m`; index 0 unused.
    fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.order() + 1];
        for (k, &p) in self.parents.iter().enumerate() {
            ch[p].push(k + 2);
        }
        ch
    }

    /// Out-degree of each vertex, `n_1, …, n_m`.
    pub fn out_degrees(&self) -> Vec<usize> {
        self.children()[1..].iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RootedRepr", into = "RootedRepr")]
pub struct RootedOpTree {
    parents: Vec<usize>,
    labels: Word,
}

#[derive(Serialize, Deserialize)]
struct RootedRepr {
    root: usize,
    parents: Vec<usize>,
    labels: Word,
}

impl TryFrom<RootedRepr> for RootedOpTree {
    type Error = Error;
    fn try_from(r: RootedRepr) -> Result<Self> {
        if r.root != 0 {
            return Err(Error::arg("rooted operator trees have root label 0"));
        }
        RootedOpTree::new(r.parents, r.labels)
    }
}

impl From<RootedOpTree> for RootedRepr {
    fn from(t: RootedOpTree) -> Self {
        RootedRepr {
            root: 0,
            parents: t.parents,
            labels: t.labels,
        }
    }
}

impl RootedOpTree {
    /// `parents[k]` is the parent of vertex `k+1` and must lie in `0..=k`.
    pub fn new(parents: Vec<usize>, labels: Word) -> Result<Self> {
        if labels.is_empty() || parents.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} parents for {} labelled vertices",
                parents.len(),
                labels.len()
            )));
        }
        for (k, &p) in parents.iter().enumerate() {
            if p > k {
                return Err(Error::arg(format!("vertex {} may attach to 0..={k}, got {p}", k + 1)));
            }
        }
        Ok(RootedOpTree { parents, labels })
    }

    /// `[τ]_{•_0}`: the root with the single subtree `τ`.
    pub fn graft(tree: &LabeledRecursiveTree) -> Self {
        let mut parents = vec![0];
        parents.extend_from_slice(&tree.parents);
        RootedOpTree {
            parents,
            labels: tree.labels.clone(),
        }
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn labels(&self) -> &Word {
        &self.labels
    }

    /// Number of subtrees hanging from the root, i.e. the order of the
    /// differential operator applied to the test function.
    pub fn root_degree(&self) -> usize {
        self.parents.iter().filter(|&&p| p == 0).count()
    }

    /// `children[v]` for `v in 0..=m`.
    fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.labels.len() + 1];
        for (k, &p) in self.parents.iter().enumerate() {
            ch[p].push(k + 1);
        }
        ch
    }
}

/// Odometer over `bounds[k]`-ary digits with digit `k` ranging over
/// `lo..=lo + k + offset`; lexicographic order.
fn recursive_parent_vectors(len: usize, lo: usize, offset: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![lo; len];
    loop {
        out.push(cur.clone());
        let mut k = len;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] < lo + k + offset {
                cur[k] += 1;
                for c in cur.iter_mut().skip(k + 1) {
                    *c = lo;
                }
                break;
            }
        }
    }
}

/// All trees of `𝕋_w`: `(|w|-1)!` parent vectors in lexicographic order.
pub fn enumerate_trees(w: &Word) -> Result<Vec<LabeledRecursiveTree>> {
    guard(w)?;
    Ok(recursive_parent_vectors(w.len() - 1, 1, 0)
        .into_iter()
        .map(|parents| LabeledRecursiveTree {
            parents,
            labels: w.clone(),
        })
        .collect())
}

/// All rooted operator trees of `𝕋_w^0`: `|w|!` of them.
pub fn enumerate_rooted_ops(w: &Word) -> Result<Vec<RootedOpTree>> {
    guard(w)?;
    Ok(recursive_parent_vectors(w.len(), 0, 0)
        .into_iter()
        .map(|parents| RootedOpTree {
            parents,
            labels: w.clone(),
        })
        .collect())
}

fn check_point<F: VectorFields + ?Sized>(fields: &F, labels: &Word, x: &[f64]) -> Result<()> {
    if x.len() != fields.dim() {
        return Err(Error::Shape(format!(
            "point of dimension {}, fields live on R^{}",
            x.len(),
            fields.dim()
        )));
    }
    labels.check_alphabet(fields.letters())
}

/// `V` at vertex `v` of a tree given by its children lists.
fn eval_vertex<F: VectorFields + ?Sized>(
    children: &[Vec<usize>],
    labels: &Word,
    v: usize,
    fields: &F,
    x: &[f64],
) -> Result<Vec<f64>> {
    let subs = children[v]
        .iter()
        .map(|&c| eval_vertex(children, labels, c, fields, x))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = subs.iter().map(Vec::as_slice).collect();
    fields.multilinear(labels.letters()[v - 1], x, &refs)
}

/// Tree-like vector field `V_τ(x)`.
pub fn eval_tree_vf<F: VectorFields + ?Sized>(
    tree: &LabeledRecursiveTree,
    fields: &F,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_point(fields, &tree.labels, x)?;
    eval_vertex(&tree.children(), &tree.labels, 1, fields, x)
}

/// The summand `V_τ^𝐣` of `V_τ` in which edge `k` carries direction `j_k`.
pub fn eval_tree_vf_fixed_directions<F: VectorFields + ?Sized>(
    tree: &LabeledRecursiveTree,
    dirs: &DirectionTuple,
    fields: &F,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_point(fields, &tree.labels, x)?;
    if dirs.len() + 1 != tree.order() {
        return Err(Error::arg(format!(
            "{} edge directions for a tree with {} edges",
            dirs.len(),
            tree.order() - 1
        )));
    }
    dirs.check_dim(fields.dim())?;
    let j = dirs.as_slice();
    let children = tree.children();
    let letters = tree.labels.letters();
    // out-directions of vertex v are the directions of the edges into its children
    let out_dirs = |v: usize| -> Vec<usize> { children[v].iter().map(|&c| j[c - 2]).collect() };

    let mut root = fields.mixed_partial(letters[0], &out_dirs(1), x)?;
    let mut factor = 1.0;
    for v in 2..=tree.order() {
        let part = fields.mixed_partial(letters[v - 1], &out_dirs(v), x)?;
        factor *= part[j[v - 2] - 1];
    }
    root.iter_mut().for_each(|r| *r *= factor);
    Ok(root)
}

/// `V_{τ^0} g(x)`: `D^k g(x)` applied to the tree-like fields of the root's subtrees.
pub fn apply_rooted_op<F: VectorFields + ?Sized>(
    op: &RootedOpTree,
    g: &TestFunction,
    fields: &F,
    x: &[f64],
) -> Result<f64> {
    check_point(fields, &op.labels, x)?;
    g.dim_compatible(fields.dim())?;
    let children = op.children();
    let subs = children[0]
        .iter()
        .map(|&c| eval_vertex(&children, &op.labels, c, fields, x))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = subs.iter().map(Vec::as_slice).collect();
    g.multilinear(x, &refs)
}

/// `V_w g(x)` by the recursion `V_{w i} g = ∇(V_w g) · V_i`, evaluated with
/// nested jets: each letter gets its own nilpotent slot.
pub fn apply_word_direct<F: VectorFields + ?Sized>(
    w: &Word,
    g: &TestFunction,
    fields: &F,
    x: &[f64],
) -> Result<f64> {
    guard(w)?;
    check_point(fields, w, x)?;
    g.dim_compatible(fields.dim())?;
    let slots = w.len();
    let point: Vec<Jet> = x.iter().map(|&v| Jet::constant(slots, v)).collect();
    Ok(nested_derivation(w.letters(), w.len(), g, fields, &point)?.value())
}

/// `(V_{w_1 ⋯ w_level} g)(X)` at a jet point `X`; level `l` uses slot `l - 1`.
fn nested_derivation<F: VectorFields + ?Sized>(
    letters: &[usize],
    level: usize,
    g: &TestFunction,
    fields: &F,
    x: &[Jet],
) -> Result<Jet> {
    if level == 0 {
        return Ok(g.eval_jet(x));
    }
    let slot = level - 1;
    let v = fields.eval_jet(letters[level - 1], x)?;
    let shifted: Vec<Jet> = x.iter().zip(&v).map(|(xi, vi)| xi + &vi.times_slot(slot)).collect();
    let inner = nested_derivation(letters, level - 1, g, fields, &shifted)?;
    Ok(inner.slot_coefficient(slot))
}

/// `V_w g(x) = Σ_{τ^0 ∈ 𝕋_w^0} V_{τ^0} g(x)`.
pub fn apply_word_via_trees<F: VectorFields + ?Sized>(
    w: &Word,
    g: &TestFunction,
    fields: &F,
    x: &[f64],
) -> Result<f64> {
    let terms = enumerate_rooted_ops(w)?
        .par_iter()
        .map(|op| apply_rooted_op(op, g, fields, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(terms.iter().sum())
}

/// `Σ_{τ ∈ 𝕋_w} V_τ(x)`; component `j` equals `V_w π_j(x)`.
pub fn sum_tree_field<F: VectorFields + ?Sized>(w: &Word, fields: &F, x: &[f64]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; fields.dim()];
    for tree in enumerate_trees(w)? {
        for (a, v) in acc.iter_mut().zip(eval_tree_vf(&tree, fields, x)?) {
            *a += v;
        }
    }
    Ok(acc)
}

/// The operator multiplying `∫ dX^w` in the Taylor expansion of `g(Y_t)`:
/// `V_{w_1}(V_{w_2}(⋯ V_{w_m} g))`, the earliest increment differentiating
/// last. In the convention above this is `V_{reverse(w)} g`.
pub fn taylor_operator<F: VectorFields + ?Sized>(
    w: &Word,
    g: &TestFunction,
    fields: &F,
    x: &[f64],
) -> Result<f64> {
    apply_word_direct(&w.reversed(), g, fields, x)
}
