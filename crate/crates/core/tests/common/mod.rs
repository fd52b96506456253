//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the library's own algorithms for the quantity it
//! checks: iterated integrals come from quadrature, tree counts from raw edge
//! subsets, derivatives from finite differences of plain evaluations.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use sigrecon::fields::{FieldKind, VectorFieldModel};
use sigrecon::signature::PiecewiseLinearPath;
use sigrecon::testfn::TestFunction;

/// `∫_{s_1<…<s_k ≤ t} dX^{w_1}_{s_1} ⋯ dX^{w_k}_{s_k}` by composite Simpson
/// quadrature on `sub` equal pieces of every segment.
///
/// Inside one piece the integrand of level `k` is a polynomial of degree
/// `k − 1`, so Simpson's rule is exact up to rounding for `k ≤ 4`.
pub fn iterated_integral(path: &PiecewiseLinearPath, word: &[usize], sub: usize) -> f64 {
    let (nodes, slopes) = refine(path, sub);
    let t_end = *nodes.last().unwrap();
    integral_at(&nodes, &slopes, word, t_end)
}

fn refine(path: &PiecewiseLinearPath, sub: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let times = path.times();
    let mut nodes = vec![times[0]];
    let mut slopes = Vec::new();
    for s in 0..path.segments() {
        let dt = times[s + 1] - times[s];
        let slope: Vec<f64> = path.increment(s).iter().map(|dx| dx / dt).collect();
        for k in 1..=sub {
            nodes.push(times[s] + dt * k as f64 / sub as f64);
            slopes.push(slope.clone());
        }
    }
    (nodes, slopes)
}

fn integral_at(nodes: &[f64], slopes: &[Vec<f64>], word: &[usize], t: f64) -> f64 {
    if word.is_empty() {
        return 1.0;
    }
    let (head, last) = word.split_at(word.len() - 1);
    let letter = last[0] - 1;
    // piece containing t: the last node strictly below t
    let piece = match nodes.iter().rposition(|&n| n < t) {
        Some(p) => p,
        None => return 0.0,
    };
    let a = nodes[piece];
    let before = if piece == 0 { 0.0 } else { integral_at(nodes, slopes, word, a) };
    let mid = 0.5 * (a + t);
    let simpson = (t - a) / 6.0
        * (integral_at(nodes, slopes, head, a)
            + 4.0 * integral_at(nodes, slopes, head, mid)
            + integral_at(nodes, slopes, head, t));
    before + slopes[piece][letter] * simpson
}

/// Parent vectors of every increasing tree on vertices `first..first+count`
/// where `first` is the root, found by scanning all edge subsets of the
/// complete graph. Each returned vector lists the parent of vertex
/// `first+1, first+2, …`.
pub fn brute_force_increasing_trees(first: usize, count: usize) -> BTreeSet<Vec<usize>> {
    let verts: Vec<usize> = (first..first + count).collect();
    let edges: Vec<(usize, usize)> = verts
        .iter()
        .flat_map(|&a| verts.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
        .collect();
    let need = count - 1;
    let mut out = BTreeSet::new();
    for mask in 0u64..(1u64 << edges.len()) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let chosen: Vec<(usize, usize)> = (0..edges.len()).filter(|e| mask >> e & 1 == 1).map(|e| edges[e]).collect();
        // increasing: every non-root vertex has exactly one smaller neighbour
        let mut parent = vec![None; count];
        let mut ok = true;
        for &(a, b) in &chosen {
            let slot = &mut parent[b - first];
            if slot.is_some() {
                ok = false;
                break;
            }
            *slot = Some(a);
        }
        if ok && parent[1..].iter().all(Option::is_some) {
            out.insert(parent[1..].iter().map(|p| p.unwrap()).collect());
        }
    }
    out
}

/// Sixth-order central difference weights for the first derivative at offsets
/// `-3..=3`, divided by `h` at use.
const STENCIL: [f64; 7] = [
    -1.0 / 60.0,
    9.0 / 60.0,
    -45.0 / 60.0,
    0.0,
    45.0 / 60.0,
    -9.0 / 60.0,
    1.0 / 60.0,
];

/// `∂^k f / ∂x_{j_1} ⋯ ∂x_{j_k}` by nested sixth-order central differences of
/// the plain function values.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], dirs: &[usize], h: f64) -> Vec<f64> {
    let Some((&j, rest)) = dirs.split_first() else {
        return f(x);
    };
    let mut acc: Option<Vec<f64>> = None;
    for (k, w) in STENCIL.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let mut xs = x.to_vec();
        xs[j - 1] += (k as f64 - 3.0) * h;
        let v = fd_partial(f, &xs, rest, h);
        let acc = acc.get_or_insert_with(|| vec![0.0; v.len()]);
        for (a, b) in acc.iter_mut().zip(v) {
            *a += w * b / h;
        }
    }
    acc.unwrap()
}

/// Rounding bound of [`fd_partial`]: every nesting level amplifies the
/// rounding of the values by at most `Σ|w| / h`.
pub fn fd_rounding(value_scale: f64, order: usize, h: f64) -> f64 {
    let amplification: f64 = STENCIL.iter().map(|w| w.abs()).sum::<f64>() / h;
    f64::EPSILON * value_scale * amplification.powi(order as i32)
}

/// [`fd_partial`] with the step picked from `h_max, h_max/2, …`: the step
/// whose estimate changes least on halving, balancing truncation against
/// rounding. Returns the estimate and its step.
pub fn fd_partial_adaptive(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], dirs: &[usize], h_max: f64) -> (Vec<f64>, f64) {
    let steps: Vec<f64> = (0..6).map(|k| h_max / f64::from(1u32 << k)).collect();
    let estimates: Vec<Vec<f64>> = steps.iter().map(|&h| fd_partial(f, x, dirs, h)).collect();
    let value_scale = f(x).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let best = (1..steps.len())
        .min_by(|&a, &b| {
            let score = |k: usize| {
                let change = estimates[k].iter().zip(&estimates[k - 1]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                change + fd_rounding(value_scale, dirs.len(), steps[k])
            };
            score(a).total_cmp(&score(b))
        })
        .unwrap();
    (estimates[best].clone(), steps[best])
}

/// `‖fd − exact‖_∞ / (tol · ‖exact‖_∞ + 10 · rounding)`; at most 1 means
/// the oracle confirms `exact` to relative accuracy `tol` wherever its own
/// rounding allows.
pub fn fd_agreement(fd: &[f64], exact: &[f64], tol: f64, rounding: f64) -> f64 {
    let diff = fd.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = exact.iter().map(|v| v.abs()).fold(0.0, f64::max);
    diff / (tol * scale + 10.0 * rounding)
}

pub fn uniform_point<R: Rng>(rng: &mut R, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

/// One test function from the dictionary, chosen by `which`.
pub fn dictionary_test_function<R: Rng>(rng: &mut R, n: usize, which: usize) -> TestFunction {
    match which % 4 {
        0 => TestFunction::coordinate(rng.random_range(1..=n)),
        1 => {
            let q = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            TestFunction::Quadratic { q: &q + q.transpose() }
        }
        2 => TestFunction::ExpLinear {
            c: nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5)),
        },
        _ => TestFunction::Power {
            index: rng.random_range(1..=n),
            exponent: rng.random_range(2..=4),
        },
    }
}

/// Field families exercised by the randomized suites, with the dimension
/// constraint of the scalar polynomial family applied.
pub fn random_model<R: Rng>(rng: &mut R, which: usize, d: usize, n: usize) -> VectorFieldModel {
    let seed = rng.random();
    let (kind, n) = match which % 4 {
        0 => (FieldKind::Linear, n),
        1 => (
            FieldKind::NeuralDepth1 {
                activation: sigrecon::fields::Activation::Tanh,
                shifts: true,
            },
            n,
        ),
        2 => (FieldKind::NeuralDepth2Exp, n),
        _ => (FieldKind::ScalarPolynomial { degree: 3 }, 1),
    };
    VectorFieldModel::sample(kind, d, n, seed).unwrap()
}

/// `‖a − b‖_∞ / ‖b‖_∞`, or the absolute difference when `b` vanishes.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
