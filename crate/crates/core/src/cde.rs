//! Controlled differential equations driven by piecewise-linear paths.
//!
//! On a segment with increment `ΔX` the equation `dY = r Σ_i V_i(Y) dX^i`
//! becomes the autonomous ODE `dY/du = r Σ_i V_i(Y) ΔX^i` for `u ∈ [0, 1]`,
//! which is integrated with the classical fourth-order Runge–Kutta method.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScaledFields, VectorFields};
use crate::signature::{PiecewiseLinearPath, TruncatedTensor};
use crate::testfn::TestFunction;
use crate::trees;
use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub steps_per_segment: usize,
    /// Keep halving the step until two successive terminal values agree.
    pub error_control: bool,
    pub abs_tol: f64,
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            steps_per_segment: 16,
            error_control: true,
            abs_tol: 1e-12,
            max_halvings: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_segment == 0 {
            return Err(Error::arg("steps_per_segment must be at least 1"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::arg("abs_tol must be positive"));
        }
        Ok(())
    }

    /// A single pass at a fixed step count, no refinement.
    pub fn fixed(steps_per_segment: usize) -> Self {
        SolverConfig {
            steps_per_segment,
            error_control: false,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CdeProblem<'a, F: ?Sized> {
    pub fields: &'a F,
    pub path: &'a PiecewiseLinearPath,
    pub y0: Vec<f64>,
    pub r: f64,
}

impl<'a, F: VectorFields + ?Sized> CdeProblem<'a, F> {
    pub fn new(fields: &'a F, path: &'a PiecewiseLinearPath, y0: Vec<f64>) -> Result<Self> {
        if fields.dim() != y0.len() {
            return Err(Error::Shape(format!(
                "initial value in R^{}, fields on R^{}",
                y0.len(),
                fields.dim()
            )));
        }
        if fields.letters() != path.dim() {
            return Err(Error::Shape(format!(
                "{} fields driven by a path in R^{}",
                fields.letters(),
                path.dim()
            )));
        }
        Ok(CdeProblem { fields, path, y0, r: 1.0 })
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub terminal: Vec<f64>,
    /// Steps per segment of the accepted pass.
    pub steps_per_segment: usize,
    /// `(t, Y_t)` at every step of the accepted pass, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<(f64, Vec<f64>)>>,
}

impl Solution {
    /// CSV with header `t,Y_1,…,Y_N`; empty when no trajectory was recorded.
    pub fn trajectory_csv(&self) -> String {
        let Some(traj) = &self.trajectory else {
            return String::new();
        };
        let n = self.terminal.len();
        let mut out = String::from("t");
        for k in 1..=n {
            let _ = write!(out, ",Y_{k}");
        }
        out.push('\n');
        for (t, y) in traj {
            let _ = write!(out, "{t}");
            for v in y {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn drift<F: VectorFields + ?Sized>(fields: &F, r: f64, dx: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; y.len()];
    for (i, &di) in dx.iter().enumerate() {
        if di == 0.0 {
            continue;
        }
        let v = fields.eval(i + 1, y)?;
        for (o, vk) in out.iter_mut().zip(v) {
            *o += r * di * vk;
        }
    }
    Ok(out)
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn integrate<F: VectorFields + ?Sized>(
    problem: &CdeProblem<'_, F>,
    steps: usize,
    record: bool,
) -> Result<(Vec<f64>, Option<Vec<(f64, Vec<f64>)>>)> {
    let path = problem.path;
    let times = path.times();
    let mut y = problem.y0.clone();
    let mut traj = record.then(|| vec![(times[0], y.clone())]);
    if problem.r == 0.0 {
        if let Some(t) = traj.as_mut() {
            t.extend(times[1..].iter().map(|&s| (s, y.clone())));
        }
        return Ok((y, traj));
    }
    let h = 1.0 / steps as f64;
    for s in 0..path.segments() {
        let dx = path.increment(s);
        let f = |y: &[f64]| drift(problem.fields, problem.r, &dx, y);
        for step in 0..steps {
            let k1 = f(&y)?;
            let k2 = f(&axpy(&y, h / 2.0, &k1))?;
            let k3 = f(&axpy(&y, h / 2.0, &k2))?;
            let k4 = f(&axpy(&y, h, &k3))?;
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("state component {} on segment {}", bad + 1, s + 1)));
            }
            if let Some(t) = traj.as_mut() {
                let u = (step + 1) as f64 / steps as f64;
                t.push((times[s] + u * (times[s + 1] - times[s]), y.clone()));
            }
        }
    }
    Ok((y, traj))
}

fn is_step_failure(e: &Error) -> bool {
    matches!(e, Error::NumericOverflow { .. } | Error::NonFinite(_))
}

/// Terminal value `Y_T` (and the trajectory when `record` is set).
///
/// With error control the step count doubles until two successive terminal
/// values differ by less than `abs_tol` in every component; the finer pass is
/// returned. Overflow in a pass counts as a failed step and also halves the
/// step. After `max_halvings` halvings the solve is abandoned.
pub fn solve<F: VectorFields + ?Sized>(problem: &CdeProblem<'_, F>, cfg: &SolverConfig, record: bool) -> Result<Solution> {
    cfg.validate()?;
    let mut steps = cfg.steps_per_segment;
    let mut previous: Option<Vec<f64>> = None;
    let mut last_diff = f64::NAN;
    let mut last_failure: Option<Error> = None;
    for halvings in 0..=cfg.max_halvings {
        if halvings > 0 {
            steps = steps
                .checked_mul(2)
                .ok_or_else(|| Error::Solver("step count overflow".into()))?;
        }
        match integrate(problem, steps, record) {
            Ok((y, traj)) => {
                let accept = match &previous {
                    _ if !cfg.error_control => true,
                    None => false,
                    Some(p) => {
                        last_diff = p.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        last_diff < cfg.abs_tol
                    }
                };
                if accept {
                    return Ok(Solution {
                        terminal: y,
                        steps_per_segment: steps,
                        trajectory: traj,
                    });
                }
                previous = Some(y);
            }
            Err(e) if is_step_failure(&e) => {
                previous = None;
                last_failure = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Solver(match last_failure {
        Some(e) if previous.is_none() => format!(
            "step failed after {} halvings ({steps} steps per segment): {e}",
            cfg.max_halvings
        ),
        _ => format!(
            "no convergence to {:e} after {} halvings ({steps} steps per segment), last difference {last_diff:e}",
            cfg.abs_tol, cfg.max_halvings
        ),
    }))
}

fn check_taylor_inputs<F: VectorFields + ?Sized>(fields: &F, g: &TestFunction, y: &[f64], s: &TruncatedTensor, k: usize) -> Result<()> {
    if k > s.depth() {
        return Err(Error::arg(format!("truncation {k} exceeds signature depth {}", s.depth())));
    }
    if s.d() != fields.letters() {
        return Err(Error::Shape(format!("signature over {} letters, {} fields", s.d(), fields.letters())));
    }
    if y.len() != fields.dim() {
        return Err(Error::Shape(format!("point in R^{}, fields on R^{}", y.len(), fields.dim())));
    }
    g.dim_compatible(fields.dim())
}

/// `Σ_{w ∈ 𝒲_k} (V_{w_1} ⋯ V_{w_k} g)(y) · ∫ dX^w` for each `k = 1..=K`.
fn taylor_levels<F: VectorFields + ?Sized>(
    fields: &F,
    g: &TestFunction,
    y: &[f64],
    s: &TruncatedTensor,
    k_max: usize,
) -> Result<Vec<f64>> {
    (1..=k_max)
        .map(|k| {
            Word::all(fields.letters(), k)
                .zip(s.level(k))
                .try_fold(0.0, |acc, (w, &sw)| -> Result<f64> {
                    if sw == 0.0 {
                        return Ok(acc);
                    }
                    Ok(acc + trees::taylor_operator(&w, g, fields, y)? * sw)
                })
        })
        .collect()
}

/// Truncated Taylor expansion of `g(Y_T)` for `Y_0 = y` from the signature `s`.
pub fn taylor_predict<F: VectorFields + ?Sized>(
    fields: &F,
    g: &TestFunction,
    y: &[f64],
    s: &TruncatedTensor,
    k: usize,
) -> Result<f64> {
    check_taylor_inputs(fields, g, y, s, k)?;
    Ok(g.value(y) + taylor_levels(fields, g, y, s, k)?.iter().sum::<f64>())
}

/// `|P_r − Q_r|` where `P_r` is the prediction for the fields `r V_i` and
/// `Q_r = g(y) + Σ_k r^k (level-k term of the unscaled prediction)`.
pub fn r_scaling_taylor_check<F: VectorFields + ?Sized>(
    fields: &F,
    g: &TestFunction,
    y: &[f64],
    s: &TruncatedTensor,
    k: usize,
    r: f64,
) -> Result<f64> {
    let scaled = taylor_predict(&ScaledFields::new(fields, r), g, y, s, k)?;
    let rescaled = g.value(y)
        + taylor_levels(fields, g, y, s, k)?
            .iter()
            .enumerate()
            .map(|(i, t)| r.powi(i as i32 + 1) * t)
            .sum::<f64>();
    Ok((scaled - rescaled).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldKind, VectorFieldModel};

    fn path() -> PiecewiseLinearPath {
        PiecewiseLinearPath::from_points(vec![vec![0.0, 0.0], vec![0.3, -0.1], vec![0.1, 0.4]]).unwrap()
    }

    #[test]
    fn zero_scale_and_constant_path_are_exact() {
        let m = VectorFieldModel::sample(FieldKind::NeuralDepth2Exp, 2, 2, 1).unwrap();
        let p = path();
        let y0 = vec![0.2, -0.7];
        let sol = solve(&CdeProblem::new(&m, &p, y0.clone()).unwrap().with_r(0.0), &SolverConfig::default(), false).unwrap();
        assert_eq!(sol.terminal, y0);
        let flat = PiecewiseLinearPath::from_points(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let sol = solve(&CdeProblem::new(&m, &flat, y0.clone()).unwrap(), &SolverConfig::default(), false).unwrap();
        assert_eq!(sol.terminal, y0);
    }

    #[test]
    fn determinism_and_trajectory() {
        let m = VectorFieldModel::sample(FieldKind::NeuralDepth2Exp, 2, 2, 4).unwrap();
        let p = path();
        let prob = CdeProblem::new(&m, &p, vec![0.1, 0.1]).unwrap();
        let a = solve(&prob, &SolverConfig::default(), true).unwrap();
        let b = solve(&prob, &SolverConfig::default(), true).unwrap();
        assert_eq!(a, b);
        let traj = a.trajectory.as_ref().unwrap();
        assert_eq!(traj.len(), 1 + 2 * a.steps_per_segment);
        assert_eq!(traj.last().unwrap().1, a.terminal);
        let csv = a.trajectory_csv();
        assert!(csv.starts_with("t,Y_1,Y_2\n0,0.1,0.1\n"));
        assert_eq!(csv.lines().count(), traj.len() + 1);
    }

    #[test]
    fn shape_errors() {
        let m = VectorFieldModel::sample(FieldKind::Linear, 2, 3, 0).unwrap();
        let p = path();
        assert!(CdeProblem::new(&m, &p, vec![0.0; 2]).is_err());
        let m1 = VectorFieldModel::sample(FieldKind::Linear, 3, 2, 0).unwrap();
        assert!(CdeProblem::new(&m1, &p, vec![0.0; 2]).is_err());
        assert!(SolverConfig::fixed(0).validate().is_err());
    }

    #[test]
    fn divergence_is_reported() {
        // y' = y^3 blows up before u = 1 from y = 2
        let m = VectorFieldModel::scalar_polynomial(vec![vec![0.0, 0.0, 0.0, 1.0]]).unwrap();
        let p = PiecewiseLinearPath::from_points(vec![vec![0.0], vec![1.0]]).unwrap();
        let prob = CdeProblem::new(&m, &p, vec![2.0]).unwrap();
        let cfg = SolverConfig {
            max_halvings: 3,
            ..SolverConfig::default()
        };
        assert!(matches!(solve(&prob, &cfg, false), Err(Error::Solver(_))));
    }

    #[test]
    fn taylor_level_zero_and_scaling() {
        let m = VectorFieldModel::sample(FieldKind::NeuralDepth2Exp, 2, 2, 7).unwrap();
        let s = path().signature(3).unwrap();
        let g = TestFunction::coordinate(1);
        let y = [0.3, 0.1];
        assert_eq!(taylor_predict(&m, &g, &y, &s, 0).unwrap(), 0.3);
        assert!(taylor_predict(&m, &g, &y, &s, 4).is_err());
        for r in [0.0, 1.0, 0.3] {
            assert!(r_scaling_taylor_check(&m, &g, &y, &s, 3, r).unwrap() <= 1e-12);
        }
    }
}
