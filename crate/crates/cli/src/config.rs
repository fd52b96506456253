//! The experiment description shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sigrecon::cde::SolverConfig;
use sigrecon::fields::{FieldKind, VectorFieldModel};
use sigrecon::independence::IndependenceConfig;
use sigrecon::reconstruct::ReconstructionConfig;
use sigrecon::signature::PiecewiseLinearPath;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PathSpec {
    /// `segments + 1` uniform points in `[-amplitude, amplitude]^d`.
    Random { segments: usize, amplitude: f64 },
    /// Explicit samples; unit time spacing when `times` is absent.
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        times: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Signature truncation level, or the word length for independence runs.
    #[serde(default = "default_level")]
    pub level: usize,
    pub model: FieldKind,
    #[serde(default)]
    pub seed: Option<u64>,
    pub path: PathSpec,
    /// Initial value of the CDE; the origin when absent.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub reconstruction: ReconstructionConfig,
    #[serde(default)]
    pub independence: IndependenceConfig,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_level() -> usize {
    3
}

fn default_r() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// The configuration of the demo run.
    pub fn demo(seed: u64) -> Self {
        let mut cfg = ExperimentConfig {
            d: 2,
            n: 2,
            level: 3,
            model: FieldKind::NeuralDepth2Exp,
            seed: Some(seed),
            path: PathSpec::Random {
                segments: 5,
                amplitude: 1.0,
            },
            y0: None,
            r: 1.0,
            solver: SolverConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            independence: IndependenceConfig::default(),
            output: OutputPaths::default(),
        };
        cfg.resolve();
        cfg
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.d == 0 || self.n == 0 {
            return usage("d and N must be at least 1".into());
        }
        if self.level == 0 {
            return usage("level must be at least 1".into());
        }
        if let FieldKind::ScalarPolynomial { .. } = self.model {
            if self.n != 1 {
                return usage(format!("scalar_polynomial fields need N = 1, got N = {}", self.n));
            }
        }
        if let Some(y0) = &self.y0 {
            if y0.len() != self.n {
                return usage(format!("y0 has {} entries, N = {}", y0.len(), self.n));
            }
        }
        match &self.path {
            PathSpec::Random { segments, amplitude } => {
                if *segments == 0 || !(*amplitude > 0.0) {
                    return usage("a random path needs segments >= 1 and amplitude > 0".into());
                }
            }
            PathSpec::Points { points, .. } => {
                if let Some(p) = points.iter().find(|p| p.len() != self.d) {
                    return usage(format!("path point of dimension {}, d = {}", p.len(), self.d));
                }
            }
        }
        if !self.r.is_finite() {
            return usage("r must be finite".into());
        }
        self.solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.reconstruction
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    /// Copies the top-level seed and level into the stage configurations, so
    /// that an embedded config states exactly what ran.
    pub fn resolve(&mut self) {
        if let Some(seed) = self.seed {
            self.reconstruction.seed = seed;
            self.independence.seed = seed;
        }
        self.reconstruction.max_level = self.level;
    }

    /// The seed of a randomized run; refusing to invent one.
    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{what} is randomized and needs a \"seed\" in the config or --seed")))
    }

    pub fn build_path(&self) -> Result<PiecewiseLinearPath, CliError> {
        let path = match &self.path {
            PathSpec::Random { segments, amplitude } => {
                PiecewiseLinearPath::random(self.d, *segments, *amplitude, self.require_seed("a random path")?)
            }
            PathSpec::Points { points, times: None } => PiecewiseLinearPath::from_points(points.clone()),
            PathSpec::Points {
                points,
                times: Some(times),
            } => PiecewiseLinearPath::new(times.clone(), points.clone()),
        };
        path.map_err(|e| CliError::Usage(format!("path: {e}")))
    }

    pub fn build_model(&self) -> Result<VectorFieldModel, CliError> {
        let seed = self.require_seed("model sampling")?;
        VectorFieldModel::sample(self.model, self.d, self.n, seed).map_err(|e| CliError::Usage(format!("model: {e}")))
    }

    pub fn initial_value(&self) -> Vec<f64> {
        self.y0.clone().unwrap_or_else(|| vec![0.0; self.n])
    }
}
