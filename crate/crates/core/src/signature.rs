//! Truncated signatures of piecewise-linear paths.
//!
//! A [`TruncatedTensor`] stores levels `0..=L` densely, level `n` holding the
//! `d^n` coefficients in lexicographic word order. The signature of a straight
//! segment with increment `Δ` has level `n` equal to `Δ^{⊗n}/n!`; whole paths
//! are folded segment by segment with [`TruncatedTensor::concat`] (Chen).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::word::Word;

/// Factorials are accumulated in `f64`; beyond this level the dense storage
/// is impractical anyway.
pub const MAX_LEVEL: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct TruncatedTensor {
    d: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    d: usize,
    #[serde(rename = "L")]
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl TryFrom<TensorRepr> for TruncatedTensor {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        let t = TruncatedTensor::from_levels(r.d, r.levels)?;
        if t.depth != r.depth {
            return Err(Error::Shape(format!(
                "declared L = {} but {} levels supplied",
                r.depth,
                t.depth + 1
            )));
        }
        Ok(t)
    }
}

impl From<TruncatedTensor> for TensorRepr {
    fn from(t: TruncatedTensor) -> Self {
        TensorRepr {
            d: t.d,
            depth: t.depth,
            levels: t.levels,
        }
    }
}

fn check_shape(d: usize, depth: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::arg("alphabet size d must be at least 1"));
    }
    if depth > MAX_LEVEL {
        return Err(Error::Budget(format!("truncation level {depth} > {MAX_LEVEL}")));
    }
    d.checked_pow(depth as u32)
        .ok_or_else(|| Error::Budget(format!("{d}^{depth} coefficients overflow usize")))?;
    Ok(())
}

impl TruncatedTensor {
    /// Unit of the truncated tensor algebra: `(1, 0, …, 0)`.
    pub fn identity(d: usize, depth: usize) -> Result<Self> {
        check_shape(d, depth)?;
        let levels = (0..=depth)
            .map(|n| {
                let mut v = vec![0.0; d.pow(n as u32)];
                if n == 0 {
                    v[0] = 1.0;
                }
                v
            })
            .collect();
        Ok(TruncatedTensor { d, depth, levels })
    }

    pub fn from_levels(d: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Shape("a tensor needs at least level 0".into()));
        }
        let depth = levels.len() - 1;
        check_shape(d, depth)?;
        for (n, lvl) in levels.iter().enumerate() {
            let want = d.pow(n as u32);
            if lvl.len() != want {
                return Err(Error::Shape(format!(
                    "level {n} has {} entries, expected {want}",
                    lvl.len()
                )));
            }
            if let Some(x) = lvl.iter().find(|x| !x.is_finite()) {
                return Err(Error::arg(format!("non-finite entry {x} at level {n}")));
            }
        }
        Ok(TruncatedTensor { d, depth, levels })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Truncation level `L`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Coefficient of `w`, i.e. the iterated integral `∫ dX^w` for a signature.
    pub fn coefficient(&self, w: &Word) -> Result<f64> {
        if w.len() > self.depth {
            return Err(Error::Index(format!(
                "word of length {} beyond truncation level {}",
                w.len(),
                self.depth
            )));
        }
        Ok(self.levels[w.len()][w.rank(self.d)?])
    }

    /// Signature of the straight segment with the given increment.
    pub fn segment(increment: &[f64], depth: usize) -> Result<Self> {
        let d = increment.len();
        let mut t = TruncatedTensor::identity(d, depth)?;
        for n in 1..=depth {
            let (lower, upper) = t.levels.split_at_mut(n);
            let prev = &lower[n - 1];
            let cur = &mut upper[0];
            let inv_n = 1.0 / n as f64;
            // Δ^{⊗n}/n! = (Δ^{⊗(n-1)}/(n-1)!) ⊗ Δ / n
            for (i, p) in prev.iter().enumerate() {
                for (k, dx) in increment.iter().enumerate() {
                    cur[i * d + k] = p * dx * inv_n;
                }
            }
        }
        Ok(t)
    }

    /// Truncated tensor product `self ⊗ other`.
    pub fn concat(&self, other: &TruncatedTensor) -> Result<Self> {
        if self.d != other.d || self.depth != other.depth {
            return Err(Error::Shape(format!(
                "cannot concatenate (d={}, L={}) with (d={}, L={})",
                self.d, self.depth, other.d, other.depth
            )));
        }
        let d = self.d;
        let mut levels = Vec::with_capacity(self.depth + 1);
        for n in 0..=self.depth {
            let mut out = vec![0.0; d.pow(n as u32)];
            for p in 0..=n {
                let a = &self.levels[p];
                let b = &other.levels[n - p];
                let stride = b.len();
                for (i, ai) in a.iter().enumerate() {
                    if *ai == 0.0 {
                        continue;
                    }
                    let row = &mut out[i * stride..(i + 1) * stride];
                    for (o, bj) in row.iter_mut().zip(b) {
                        *o += ai * bj;
                    }
                }
            }
            levels.push(out);
        }
        Ok(TruncatedTensor {
            d,
            depth: self.depth,
            levels,
        })
    }

    /// Largest entrywise absolute difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &TruncatedTensor) -> Result<f64> {
        if self.d != other.d || self.depth != other.depth {
            return Err(Error::Shape("tensors differ in d or L".into()));
        }
        Ok(self
            .levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// A path that is linear between consecutive sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct PiecewiseLinearPath {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl TryFrom<PathRepr> for PiecewiseLinearPath {
    type Error = Error;

    fn try_from(r: PathRepr) -> Result<Self> {
        PiecewiseLinearPath::new(r.times, r.points)
    }
}

impl From<PiecewiseLinearPath> for PathRepr {
    fn from(p: PiecewiseLinearPath) -> Self {
        PathRepr {
            times: p.times,
            points: p.points,
        }
    }
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::arg("a path needs at least two points (one segment)"));
        }
        if times.len() != points.len() {
            return Err(Error::Shape(format!(
                "{} times for {} points",
                times.len(),
                points.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::arg("points must have dimension at least 1"));
        }
        for (k, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Shape(format!("point {k} has dimension {}, expected {d}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::arg(format!("point {k} has a non-finite coordinate")));
            }
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("times must be finite and strictly increasing"));
        }
        Ok(PiecewiseLinearPath { times, points })
    }

    /// Points at unit time spacing `0, 1, 2, …`.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let times = (0..points.len()).map(|k| k as f64).collect();
        PiecewiseLinearPath::new(times, points)
    }

    /// `segments + 1` points drawn uniformly from `[-amplitude, amplitude]^d`
    /// (stream `"path"` of `seed`), at unit time spacing.
    pub fn random(d: usize, segments: usize, amplitude: f64, seed: u64) -> Result<Self> {
        if segments == 0 || d == 0 {
            return Err(Error::arg("a random path needs d >= 1 and at least one segment"));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::arg("amplitude must be positive"));
        }
        let mut rng = crate::rng::stream(seed, "path", &[d as u64, segments as u64]);
        let points = (0..=segments)
            .map(|_| (0..d).map(|_| rng.random_range(-amplitude..=amplitude)).collect())
            .collect();
        PiecewiseLinearPath::from_points(points)
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn increment(&self, segment: usize) -> Vec<f64> {
        self.points[segment + 1]
            .iter()
            .zip(&self.points[segment])
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn total_increment(&self) -> Vec<f64> {
        let last = self.points.len() - 1;
        self.points[last]
            .iter()
            .zip(&self.points[0])
            .map(|(b, a)| b - a)
            .collect()
    }

    /// Splits at interior sample `index` (`0 < index < points - 1`); the split
    /// point belongs to both halves.
    pub fn split_at(&self, index: usize) -> Result<(Self, Self)> {
        if index == 0 || index >= self.points.len() - 1 {
            return Err(Error::Index(format!(
                "split index {index} is not interior to {} points",
                self.points.len()
            )));
        }
        let left = PiecewiseLinearPath {
            times: self.times[..=index].to_vec(),
            points: self.points[..=index].to_vec(),
        };
        let right = PiecewiseLinearPath {
            times: self.times[index..].to_vec(),
            points: self.points[index..].to_vec(),
        };
        Ok((left, right))
    }

    /// Same geometric path with new sample times.
    pub fn with_times(&self, times: Vec<f64>) -> Result<Self> {
        PiecewiseLinearPath::new(times, self.points.clone())
    }

    /// Truncated signature over the whole time interval.
    pub fn signature(&self, depth: usize) -> Result<TruncatedTensor> {
        let mut acc = TruncatedTensor::identity(self.dim(), depth)?;
        for s in 0..self.segments() {
            acc = acc.concat(&TruncatedTensor::segment(&self.increment(s), depth)?)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(l: &[usize]) -> Word {
        Word::new(l.to_vec()).unwrap()
    }

    #[test]
    fn zero_increment_gives_identity() {
        let t = TruncatedTensor::segment(&[0.0, 0.0], 3).unwrap();
        assert_eq!(t, TruncatedTensor::identity(2, 3).unwrap());
    }

    #[test]
    fn concat_shape_mismatch() {
        let a = TruncatedTensor::identity(2, 3).unwrap();
        let b = TruncatedTensor::identity(2, 2).unwrap();
        let c = TruncatedTensor::identity(3, 3).unwrap();
        assert!(matches!(a.concat(&b), Err(Error::Shape(_))));
        assert!(matches!(a.concat(&c), Err(Error::Shape(_))));
    }

    #[test]
    fn coefficient_errors_and_empty_word() {
        let t = TruncatedTensor::segment(&[1.0, 2.0], 2).unwrap();
        assert_eq!(t.coefficient(&Word::empty()).unwrap(), 1.0);
        assert!(matches!(t.coefficient(&word(&[1, 1, 1])), Err(Error::Index(_))));
        assert!(matches!(t.coefficient(&word(&[3])), Err(Error::Index(_))));
    }

    #[test]
    fn path_validation() {
        assert!(PiecewiseLinearPath::new(vec![0.0], vec![vec![0.0]]).is_err());
        assert!(PiecewiseLinearPath::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(PiecewiseLinearPath::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(PiecewiseLinearPath::new(vec![1.0, 0.5], vec![vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn json_layout() {
        let t = TruncatedTensor::segment(&[2.0], 2).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"d":1,"L":2,"levels":[[1.0],[2.0],[2.0]]}"#);
        let back: TruncatedTensor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"d":2,"L":1,"levels":[[1.0],[2.0]]}"#;
        assert!(serde_json::from_str::<TruncatedTensor>(bad).is_err());

        let p: PiecewiseLinearPath =
            serde_json::from_str(r#"{"times":[0,1],"points":[[0,0],[1,1]]}"#).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(serde_json::from_str::<PiecewiseLinearPath>(r#"{"times":[0,0],"points":[[0],[1]]}"#).is_err());
    }
}
