//! Scalar test functions `g: ℝ^N → ℝ` with exact derivatives of every order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::MAX_DERIVATIVE_ORDER;
use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestFunction {
    /// `π_j(x) = x_j` (1-based).
    Coordinate { index: usize },
    /// `xᵀ Q x`.
    Quadratic { q: DMatrix<f64> },
    /// `exp(cᵀ x)`.
    ExpLinear { c: DVector<f64> },
    /// `x_j^p` (1-based `j`).
    Power { index: usize, exponent: u32 },
}

impl TestFunction {
    pub fn coordinate(index: usize) -> Self {
        TestFunction::Coordinate { index }
    }

    /// Every coordinate projection of `ℝ^n`.
    pub fn projections(n: usize) -> Vec<TestFunction> {
        (1..=n).map(TestFunction::coordinate).collect()
    }

    pub fn dim_compatible(&self, n: usize) -> Result<()> {
        let ok = match self {
            TestFunction::Coordinate { index } | TestFunction::Power { index, .. } => (1..=n).contains(index),
            TestFunction::Quadratic { q } => q.nrows() == n && q.ncols() == n,
            TestFunction::ExpLinear { c } => c.len() == n,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("test function incompatible with R^{n}")))
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Coordinate { index } => x[index - 1],
            TestFunction::Quadratic { q } => {
                let xv = DVector::from_column_slice(x);
                xv.dot(&(q * &xv))
            }
            TestFunction::ExpLinear { c } => c.dot(&DVector::from_column_slice(x)).exp(),
            TestFunction::Power { index, exponent } => x[index - 1].powi(*exponent as i32),
        }
    }

    pub fn eval_jet(&self, x: &[Jet]) -> Jet {
        let slots = x[0].slots();
        match self {
            TestFunction::Coordinate { index } => x[index - 1].clone(),
            TestFunction::Quadratic { q } => {
                let mut acc = Jet::zero(slots);
                for (r, xr) in x.iter().enumerate() {
                    let mut row = Jet::zero(slots);
                    for (c, xc) in x.iter().enumerate() {
                        row.add_scaled(q[(r, c)], xc);
                    }
                    acc = acc + xr * &row;
                }
                acc
            }
            TestFunction::ExpLinear { c } => {
                let mut acc = Jet::zero(slots);
                for (ci, xi) in c.iter().zip(x) {
                    acc.add_scaled(*ci, xi);
                }
                acc.exp()
            }
            TestFunction::Power { index, exponent } => {
                let mut acc = Jet::constant(slots, 1.0);
                for _ in 0..*exponent {
                    acc = &acc * &x[index - 1];
                }
                acc
            }
        }
    }

    /// `D^k g(x)[u_1, …, u_k]`.
    pub fn multilinear(&self, x: &[f64], dirs: &[&[f64]]) -> Result<f64> {
        let k = dirs.len();
        if k > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder {
                order: k,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        if k == 0 {
            return Ok(self.value(x));
        }
        Ok(match self {
            TestFunction::Coordinate { index } => {
                if k == 1 {
                    dirs[0][index - 1]
                } else {
                    0.0
                }
            }
            TestFunction::Quadratic { q } => {
                let sym = q + q.transpose();
                let u0 = DVector::from_column_slice(dirs[0]);
                match k {
                    1 => u0.dot(&(sym * DVector::from_column_slice(x))),
                    2 => u0.dot(&(sym * DVector::from_column_slice(dirs[1]))),
                    _ => 0.0,
                }
            }
            TestFunction::ExpLinear { c } => {
                let base = c.dot(&DVector::from_column_slice(x)).exp();
                dirs.iter().fold(base, |acc, u| acc * c.dot(&DVector::from_column_slice(u)))
            }
            TestFunction::Power { index, exponent } => {
                let p = *exponent as usize;
                if k > p {
                    0.0
                } else {
                    let j = index - 1;
                    let falling: f64 = ((p - k + 1)..=p).map(|v| v as f64).product();
                    dirs.iter()
                        .fold(falling * x[j].powi((p - k) as i32), |acc, u| acc * u[j])
                }
            }
        })
    }

    /// `∂^k g / ∂x_{j_k} ⋯ ∂x_{j_1}` (1-based directions).
    pub fn mixed_partial(&self, x: &[f64], dirs: &[usize]) -> Result<f64> {
        let n = x.len();
        let basis: Vec<Vec<f64>> = dirs
            .iter()
            .map(|&j| {
                let mut e = vec![0.0; n];
                e[j - 1] = 1.0;
                e
            })
            .collect();
        let refs: Vec<&[f64]> = basis.iter().map(|v| v.as_slice()).collect();
        self.multilinear(x, &refs)
    }
}
