//! Vector-field families `V_1, …, V_d : ℝ^N → ℝ^N`.
//!
//! Four families are supported:
//!
//! * `Linear`: `V_i(x) = A_i x`;
//! * `NeuralDepth1`: `V_i(x) = σ(A_i x + b_i)` for an analytic activation `σ`;
//! * `NeuralDepth2Exp`: `V_i(x) = exp(A_i exp(D_i x))` with diagonal `D_i`;
//! * `ScalarPolynomial`: `N = 1`, each `V_i` a univariate polynomial.
//!
//! Every family evaluates on plain points and on [`Jet`]s. Mixed partial
//! derivatives have closed forms for the linear, nested-exponential and
//! polynomial families; the depth-one family differentiates through jets.
//! [`mixed_partial_via_jets`] is always available as an independent route.
//!
//! Letters and directions are 1-based throughout.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{seed_point, Jet};
use crate::rng;

/// Largest derivative order handed out by [`VectorFields::mixed_partial`].
pub const MAX_DERIVATIVE_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Exp,
    Sin,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Exp => x.exp(),
            Activation::Sin => x.sin(),
        }
    }

    /// `[σ(x), σ'(x), …, σ^{(order)}(x)]`.
    pub fn derivatives(self, x: f64, order: usize) -> Vec<f64> {
        match self {
            Activation::Exp => vec![x.exp(); order + 1],
            Activation::Sin => {
                let (s, c) = x.sin_cos();
                let cycle = [s, c, -s, -c];
                (0..=order).map(|p| cycle[p % 4]).collect()
            }
            Activation::Tanh => {
                // σ^{(p)} = P_p(t) with t = tanh x, P_0(t) = t, P_{p+1} = P_p'(t)(1 - t²)
                let t = x.tanh();
                let mut poly = vec![0.0, 1.0];
                let mut out = Vec::with_capacity(order + 1);
                for p in 0..=order {
                    out.push(poly.iter().rev().fold(0.0, |acc, c| acc * t + c));
                    if p == order {
                        break;
                    }
                    let deriv: Vec<f64> = poly.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
                    let mut next = vec![0.0; deriv.len() + 2];
                    for (k, c) in deriv.iter().enumerate() {
                        next[k] += c;
                        next[k + 2] -= c;
                    }
                    poly = next;
                }
                out
            }
        }
    }

    fn apply_jet(self, x: &Jet) -> Jet {
        x.compose(&self.derivatives(x.value(), x.slots()))
    }
}

/// Ordered list of 1-based coordinate directions `(j_1, …, j_k)`; repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirectionTuple(Vec<usize>);

impl DirectionTuple {
    pub fn new(dirs: Vec<usize>) -> Result<Self> {
        if dirs.contains(&0) {
            return Err(Error::arg("directions are 1-based"));
        }
        Ok(DirectionTuple(dirs))
    }

    pub fn empty() -> Self {
        DirectionTuple(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        check_dirs(&self.0, n)
    }

    pub fn is_distinct(&self) -> bool {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.windows(2).all(|w| w[0] != w[1])
    }

    /// All `n^len` tuples over `{1..n}`, lexicographic.
    pub fn all(n: usize, len: usize) -> impl Iterator<Item = DirectionTuple> {
        let count = n.pow(len as u32);
        (0..count).map(move |mut r| {
            let mut v = vec![0; len];
            for slot in v.iter_mut().rev() {
                *slot = r % n + 1;
                r /= n;
            }
            DirectionTuple(v)
        })
    }
}

fn check_dirs(dirs: &[usize], n: usize) -> Result<()> {
    match dirs.iter().find(|&&j| j == 0 || j > n) {
        Some(j) => Err(Error::arg(format!("direction {j} outside 1..={n}"))),
        None => Ok(()),
    }
}

/// A set of `d` smooth vector fields on `ℝ^N`.
pub trait VectorFields: Sync {
    /// Alphabet size `d`.
    fn letters(&self) -> usize;

    /// State dimension `N`.
    fn dim(&self) -> usize;

    fn eval(&self, letter: usize, x: &[f64]) -> Result<Vec<f64>>;

    fn eval_jet(&self, letter: usize, x: &[Jet]) -> Result<Vec<Jet>>;

    /// `∂^k V_letter / ∂x_{j_k} ⋯ ∂x_{j_1}` at `x`, all components.
    fn mixed_partial(&self, letter: usize, dirs: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        mixed_partial_via_jets(self, letter, dirs, x)
    }

    /// `D^k V_letter(x)[u_1, …, u_k]`.
    fn multilinear(&self, letter: usize, x: &[f64], dirs: &[&[f64]]) -> Result<Vec<f64>> {
        if dirs.len() > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder {
                order: dirs.len(),
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        if dirs.is_empty() {
            return self.eval(letter, x);
        }
        let k = dirs.len();
        let out = self.eval_jet(letter, &seed_point(x, dirs, k))?;
        Ok(out.iter().map(Jet::top).collect())
    }
}

/// Mixed partial through jet arithmetic: slot `l` perturbs along `e_{j_l}`.
pub fn mixed_partial_via_jets<F: VectorFields + ?Sized>(
    fields: &F,
    letter: usize,
    dirs: &[usize],
    x: &[f64],
) -> Result<Vec<f64>> {
    let n = fields.dim();
    check_dirs(dirs, n)?;
    let basis: Vec<Vec<f64>> = dirs
        .iter()
        .map(|&j| {
            let mut e = vec![0.0; n];
            e[j - 1] = 1.0;
            e
        })
        .collect();
    let refs: Vec<&[f64]> = basis.iter().map(|v| v.as_slice()).collect();
    fields.multilinear(letter, x, &refs)
}

/// The sampled parameters of one vector-field family.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Linear {
        a: Vec<DMatrix<f64>>,
    },
    NeuralDepth1 {
        activation: Activation,
        a: Vec<DMatrix<f64>>,
        b: Vec<DVector<f64>>,
    },
    NeuralDepth2Exp {
        a: Vec<DMatrix<f64>>,
        diag: Vec<DVector<f64>>,
    },
    /// `coeffs[i][p]` multiplies `x^p` in `V_{i+1}`.
    ScalarPolynomial {
        coeffs: Vec<Vec<f64>>,
    },
}

/// What to sample in [`VectorFieldModel::sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Linear,
    NeuralDepth1 {
        activation: Activation,
        #[serde(default = "default_true")]
        shifts: bool,
    },
    NeuralDepth2Exp,
    ScalarPolynomial {
        #[serde(default = "default_degree")]
        degree: usize,
    },
}

fn default_true() -> bool {
    true
}

fn default_degree() -> usize {
    3
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Linear => "linear",
            FieldKind::NeuralDepth1 { .. } => "neural_depth1",
            FieldKind::NeuralDepth2Exp => "neural_depth2_exp",
            FieldKind::ScalarPolynomial { .. } => "scalar_polynomial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct VectorFieldModel {
    d: usize,
    n: usize,
    seed: u64,
    kind: ModelKind,
}

impl VectorFieldModel {
    /// Draws all coefficients i.i.d. standard normal from the `model` stream of
    /// `seed`. Nested-exponential coefficients are scaled by `1/N`.
    pub fn sample(kind: FieldKind, d: usize, n: usize, seed: u64) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::arg("d and N must both be at least 1"));
        }
        let mut rng = rng::stream(seed, "model", &[]);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let matrices = |scale: f64, normal: &mut dyn FnMut() -> f64| -> Vec<DMatrix<f64>> {
            (0..d)
                .map(|_| DMatrix::from_row_iterator(n, n, (0..n * n).map(|_| normal() * scale).collect::<Vec<_>>()))
                .collect()
        };
        let kind = match kind {
            FieldKind::Linear => ModelKind::Linear {
                a: matrices(1.0, &mut normal),
            },
            FieldKind::NeuralDepth1 { activation, shifts } => {
                let a = matrices(1.0, &mut normal);
                let b = (0..d)
                    .map(|_| {
                        if shifts {
                            DVector::from_iterator(n, (0..n).map(|_| normal()).collect::<Vec<_>>())
                        } else {
                            DVector::zeros(n)
                        }
                    })
                    .collect();
                ModelKind::NeuralDepth1 { activation, a, b }
            }
            FieldKind::NeuralDepth2Exp => {
                let scale = 1.0 / n as f64;
                let mut a = Vec::with_capacity(d);
                let mut diag = Vec::with_capacity(d);
                for _ in 0..d {
                    a.push(DMatrix::from_row_iterator(
                        n,
                        n,
                        (0..n * n).map(|_| normal() * scale).collect::<Vec<_>>(),
                    ));
                    diag.push(DVector::from_iterator(n, (0..n).map(|_| normal() * scale).collect::<Vec<_>>()));
                }
                ModelKind::NeuralDepth2Exp { a, diag }
            }
            FieldKind::ScalarPolynomial { degree } => {
                if n != 1 {
                    return Err(Error::arg("scalar polynomial fields require N = 1"));
                }
                let coeffs = (0..d).map(|_| (0..=degree).map(|_| normal()).collect()).collect();
                ModelKind::ScalarPolynomial { coeffs }
            }
        };
        Ok(VectorFieldModel { d, n, seed, kind })
    }

    /// Builds a model from explicit parameters, checking dimensions.
    pub fn from_kind(kind: ModelKind, seed: u64) -> Result<Self> {
        let (d, n) = match &kind {
            ModelKind::Linear { a } => (a.len(), square_dim(a)?),
            ModelKind::NeuralDepth1 { a, b, .. } => {
                let n = square_dim(a)?;
                check_vectors(b, a.len(), n, "b")?;
                (a.len(), n)
            }
            ModelKind::NeuralDepth2Exp { a, diag } => {
                let n = square_dim(a)?;
                check_vectors(diag, a.len(), n, "D")?;
                (a.len(), n)
            }
            ModelKind::ScalarPolynomial { coeffs } => {
                if coeffs.iter().any(|c| c.is_empty()) {
                    return Err(Error::arg("each polynomial needs at least a constant term"));
                }
                (coeffs.len(), 1)
            }
        };
        if d == 0 {
            return Err(Error::arg("at least one field is required"));
        }
        Ok(VectorFieldModel { d, n, seed, kind })
    }

    pub fn linear(a: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::from_kind(ModelKind::Linear { a }, 0)
    }

    pub fn scalar_polynomial(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_kind(ModelKind::ScalarPolynomial { coeffs }, 0)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Linear { .. } => "linear",
            ModelKind::NeuralDepth1 { .. } => "neural_depth1",
            ModelKind::NeuralDepth2Exp { .. } => "neural_depth2_exp",
            ModelKind::ScalarPolynomial { .. } => "scalar_polynomial",
        }
    }

    fn check(&self, letter: usize, len: usize) -> Result<usize> {
        if letter == 0 || letter > self.d {
            return Err(Error::arg(format!("letter {letter} outside 1..={}", self.d)));
        }
        if len != self.n {
            return Err(Error::Shape(format!("point of dimension {len}, fields live on R^{}", self.n)));
        }
        Ok(letter - 1)
    }
}

fn square_dim(a: &[DMatrix<f64>]) -> Result<usize> {
    let n = a.first().map(|m| m.nrows()).unwrap_or(0);
    if n == 0 {
        return Err(Error::arg("matrices must be non-empty"));
    }
    if a.iter().any(|m| m.nrows() != n || m.ncols() != n) {
        return Err(Error::Shape(format!("all matrices must be {n}x{n}")));
    }
    Ok(n)
}

fn check_vectors(v: &[DVector<f64>], d: usize, n: usize, name: &str) -> Result<()> {
    if v.len() != d || v.iter().any(|x| x.len() != n) {
        return Err(Error::Shape(format!("{name} must hold {d} vectors of length {n}")));
    }
    Ok(())
}

fn finite_or_overflow(letter: usize, v: Vec<f64>) -> Result<Vec<f64>> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(Error::NumericOverflow {
            letter,
            component: k + 1,
        }),
        None => Ok(v),
    }
}

fn finite_jets_or_overflow(letter: usize, v: Vec<Jet>) -> Result<Vec<Jet>> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(Error::NumericOverflow {
            letter,
            component: k + 1,
        }),
        None => Ok(v),
    }
}

fn mat_jet(a: &DMatrix<f64>, x: &[Jet]) -> Vec<Jet> {
    let slots = x[0].slots();
    (0..a.nrows())
        .map(|r| {
            let mut acc = Jet::zero(slots);
            for (c, xc) in x.iter().enumerate() {
                acc.add_scaled(a[(r, c)], xc);
            }
            acc
        })
        .collect()
}

fn poly_value(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
}

/// `k`-th derivative of `Σ c_p x^p`.
fn poly_derivative(c: &[f64], k: usize, x: f64) -> f64 {
    c.iter().enumerate().skip(k).rev().fold(0.0, |acc, (p, cp)| {
        let falling: f64 = ((p - k + 1)..=p).map(|v| v as f64).product();
        acc * x + cp * falling
    })
}

/// Stirling numbers of the second kind `S(n, p)` for `p = 0..=n`.
fn stirling2_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for m in 1..=n {
        let mut next = vec![0.0; m + 1];
        for p in 1..=m {
            let keep = if p < row.len() { p as f64 * row[p] } else { 0.0 };
            next[p] = keep + row[p - 1];
        }
        row = next;
    }
    row
}

impl VectorFields for VectorFieldModel {
    fn letters(&self) -> usize {
        self.d
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, letter: usize, x: &[f64]) -> Result<Vec<f64>> {
        let i = self.check(letter, x.len())?;
        let xv = DVector::from_column_slice(x);
        let out: Vec<f64> = match &self.kind {
            ModelKind::Linear { a } => (&a[i] * &xv).iter().copied().collect(),
            ModelKind::NeuralDepth1 { activation, a, b } => {
                (&a[i] * &xv + &b[i]).iter().map(|z| activation.apply(*z)).collect()
            }
            ModelKind::NeuralDepth2Exp { a, diag } => {
                let inner = xv.component_mul(&diag[i]).map(f64::exp);
                (&a[i] * inner).iter().map(|z| z.exp()).collect()
            }
            ModelKind::ScalarPolynomial { coeffs } => vec![poly_value(&coeffs[i], x[0])],
        };
        finite_or_overflow(letter, out)
    }

    fn eval_jet(&self, letter: usize, x: &[Jet]) -> Result<Vec<Jet>> {
        let i = self.check(letter, x.len())?;
        let out = match &self.kind {
            ModelKind::Linear { a } => mat_jet(&a[i], x),
            ModelKind::NeuralDepth1 { activation, a, b } => mat_jet(&a[i], x)
                .iter()
                .zip(b[i].iter())
                .map(|(z, bk)| activation.apply_jet(&z.add_constant(*bk)))
                .collect(),
            ModelKind::NeuralDepth2Exp { a, diag } => {
                let inner: Vec<Jet> = x.iter().zip(diag[i].iter()).map(|(xj, dj)| xj.scale(*dj).exp()).collect();
                mat_jet(&a[i], &inner).iter().map(Jet::exp).collect()
            }
            ModelKind::ScalarPolynomial { coeffs } => {
                let slots = x[0].slots();
                let mut acc = Jet::zero(slots);
                for c in coeffs[i].iter().rev() {
                    acc = (&acc * &x[0]).add_constant(*c);
                }
                vec![acc]
            }
        };
        finite_jets_or_overflow(letter, out)
    }

    fn mixed_partial(&self, letter: usize, dirs: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        let i = self.check(letter, x.len())?;
        check_dirs(dirs, self.n)?;
        let k = dirs.len();
        if k > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder {
                order: k,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        if k == 0 {
            return self.eval(letter, x);
        }
        let out = match &self.kind {
            ModelKind::Linear { a } => {
                if k == 1 {
                    a[i].column(dirs[0] - 1).iter().copied().collect()
                } else {
                    vec![0.0; self.n]
                }
            }
            ModelKind::ScalarPolynomial { coeffs } => vec![poly_derivative(&coeffs[i], k, x[0])],
            ModelKind::NeuralDepth1 { .. } => return mixed_partial_via_jets(self, letter, dirs, x),
            ModelKind::NeuralDepth2Exp { a, diag } => {
                // V_i(x)_r = exp(u_r), u_r = Σ_j α_rj exp(d_j x_j). Only same-direction
                // blocks of a set partition survive (u is separable), so
                // ∂_J exp(u_r) = exp(u_r) Π_j d_j^{n_j} T_{n_j}(α_rj e^{d_j x_j})
                // with T_n the Touchard polynomial Σ_p S(n, p) c^p.
                let mut mult = vec![0usize; self.n];
                for &j in dirs {
                    mult[j - 1] += 1;
                }
                let inner: Vec<f64> = (0..self.n).map(|j| (diag[i][j] * x[j]).exp()).collect();
                let u = &a[i] * DVector::from_column_slice(&inner);
                (0..self.n)
                    .map(|r| {
                        let mut v = u[r].exp();
                        for (j, &nj) in mult.iter().enumerate() {
                            if nj == 0 {
                                continue;
                            }
                            let c = a[i][(r, j)] * inner[j];
                            let touchard: f64 = stirling2_row(nj)
                                .iter()
                                .enumerate()
                                .map(|(p, s)| s * c.powi(p as i32))
                                .sum();
                            v *= diag[i][j].powi(nj as i32) * touchard;
                        }
                        v
                    })
                    .collect()
            }
        };
        finite_or_overflow(letter, out)
    }
}

/// `r · V_i`: the fields of the scaled equation `dY = r Σ V_i(Y) dX^i`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledFields<'a, F: VectorFields + ?Sized> {
    inner: &'a F,
    r: f64,
}

impl<'a, F: VectorFields + ?Sized> ScaledFields<'a, F> {
    pub fn new(inner: &'a F, r: f64) -> Self {
        ScaledFields { inner, r }
    }
}

impl<F: VectorFields + ?Sized> VectorFields for ScaledFields<'_, F> {
    fn letters(&self) -> usize {
        self.inner.letters()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, letter: usize, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.inner.eval(letter, x)?.into_iter().map(|v| v * self.r).collect())
    }

    fn eval_jet(&self, letter: usize, x: &[Jet]) -> Result<Vec<Jet>> {
        Ok(self.inner.eval_jet(letter, x)?.iter().map(|v| v.scale(self.r)).collect())
    }

    fn mixed_partial(&self, letter: usize, dirs: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .inner
            .mixed_partial(letter, dirs, x)?
            .into_iter()
            .map(|v| v * self.r)
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    kind: String,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default)]
    seed: u64,
    #[serde(rename = "A", default, skip_serializing_if = "Vec::is_empty")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "D", default, skip_serializing_if = "Vec::is_empty")]
    diag: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    coeffs: Vec<Vec<f64>>,
}

impl From<VectorFieldModel> for ModelRepr {
    fn from(m: VectorFieldModel) -> Self {
        let row_major = |a: &[DMatrix<f64>]| -> Vec<Vec<f64>> { a.iter().map(|m| m.transpose().as_slice().to_vec()).collect() };
        let vecs = |v: &[DVector<f64>]| -> Vec<Vec<f64>> { v.iter().map(|x| x.as_slice().to_vec()).collect() };
        let mut r = ModelRepr {
            kind: m.kind_name().to_string(),
            d: m.d,
            n: m.n,
            seed: m.seed,
            a: Vec::new(),
            diag: Vec::new(),
            b: Vec::new(),
            activation: None,
            coeffs: Vec::new(),
        };
        match &m.kind {
            ModelKind::Linear { a } => r.a = row_major(a),
            ModelKind::NeuralDepth1 { activation, a, b } => {
                r.a = row_major(a);
                r.b = vecs(b);
                r.activation = Some(*activation);
            }
            ModelKind::NeuralDepth2Exp { a, diag } => {
                r.a = row_major(a);
                r.diag = vecs(diag);
            }
            ModelKind::ScalarPolynomial { coeffs } => r.coeffs = coeffs.clone(),
        }
        r
    }
}

impl TryFrom<ModelRepr> for VectorFieldModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let n = r.n;
        let mats = |a: &[Vec<f64>]| -> Result<Vec<DMatrix<f64>>> {
            a.iter()
                .map(|flat| {
                    if flat.len() != n * n {
                        return Err(Error::Shape(format!("matrix with {} entries, expected {}", flat.len(), n * n)));
                    }
                    Ok(DMatrix::from_row_slice(n, n, flat))
                })
                .collect()
        };
        let vecs = |v: &[Vec<f64>]| -> Vec<DVector<f64>> { v.iter().map(|x| DVector::from_column_slice(x)).collect() };
        let kind = match r.kind.as_str() {
            "linear" => ModelKind::Linear { a: mats(&r.a)? },
            "neural_depth1" => {
                let a = mats(&r.a)?;
                let b = if r.b.is_empty() {
                    vec![DVector::zeros(n); a.len()]
                } else {
                    vecs(&r.b)
                };
                ModelKind::NeuralDepth1 {
                    activation: r.activation.ok_or_else(|| Error::arg("neural_depth1 needs an activation"))?,
                    a,
                    b,
                }
            }
            "neural_depth2_exp" => ModelKind::NeuralDepth2Exp {
                a: mats(&r.a)?,
                diag: vecs(&r.diag),
            },
            "scalar_polynomial" => ModelKind::ScalarPolynomial { coeffs: r.coeffs },
            other => return Err(Error::arg(format!("unknown model kind {other:?}"))),
        };
        let m = VectorFieldModel::from_kind(kind, r.seed)?;
        if m.d != r.d || m.n != n {
            return Err(Error::Shape(format!(
                "declared d={}, N={} but parameters give d={}, N={}",
                r.d, n, m.d, m.n
            )));
        }
        Ok(m)
    }
}
