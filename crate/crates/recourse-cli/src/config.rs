//! Run configuration: a single JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use recourse_core::interpolate::{LinearParams, Selector, SelectorParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        n: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        schema: PathBuf,
        label: String,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic { n: 1000, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSettings {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        SplitSettings {
            train_fraction: 0.8,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSettings {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2_penalty: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            hidden: vec![20, 50, 20],
            learning_rate: 0.5,
            epochs: 200,
            batch_size: 32,
            seed: 1,
            l2_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphSettings {
    /// Explicit threshold; when absent the quantile rule applies.
    pub epsilon: Option<f64>,
    pub quantile: f64,
}

impl Default for GraphSettings {
    fn default() -> Self {
        GraphSettings {
            epsilon: None,
            quantile: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpolationSettings {
    pub grid: usize,
    pub tol: f64,
}

impl Default for InterpolationSettings {
    fn default() -> Self {
        InterpolationSettings {
            grid: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    Graph,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSource,
    pub split: SplitSettings,
    pub classifier: ClassifierSettings,
    pub method: String,
    pub k: usize,
    pub weight: f64,
    pub bandwidth: f64,
    pub rank: Option<usize>,
    pub iterations: usize,
    pub window: usize,
    pub step: f64,
    pub mode: Mode,
    pub graph: GraphSettings,
    pub interpolation: InterpolationSettings,
    pub max_instances: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataSource::default(),
            split: SplitSettings::default(),
            classifier: ClassifierSettings::default(),
            method: "dpp-ls".into(),
            k: 3,
            weight: 0.9,
            bandwidth: 1.0,
            rank: None,
            iterations: 50,
            window: 10,
            step: 0.1,
            mode: Mode::Linear,
            graph: GraphSettings::default(),
            interpolation: InterpolationSettings::default(),
            max_instances: 100,
            out: PathBuf::from("runs/out"),
        }
    }
}

/// Overrides shared by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Selection method: dpp-greedy | dpp-ls | quad-br | quad-da |
    /// quad-greedy | quad-ls | exact.
    #[arg(long)]
    pub method: Option<String>,
    /// Number of recourses per plan.
    #[arg(long)]
    pub k: Option<usize>,
    /// Diversity/proximity trade-off weight (theta and vartheta).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Locality bandwidth of the DPP kernel.
    #[arg(long)]
    pub h: Option<f64>,
    /// Interpolation mode: linear | graph.
    #[arg(long)]
    pub mode: Option<String>,
    /// Output directory (fresh files per run).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(overrides: &Overrides) -> Result<RunConfig> {
        let mut config = match &overrides.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(m) = &overrides.method {
            config.method = m.clone();
        }
        if let Some(k) = overrides.k {
            config.k = k;
        }
        if let Some(w) = overrides.theta {
            config.weight = w;
        }
        if let Some(h) = overrides.h {
            config.bandwidth = h;
        }
        if let Some(mode) = &overrides.mode {
            config.mode = match mode.as_str() {
                "linear" => Mode::Linear,
                "graph" => Mode::Graph,
                other => anyhow::bail!("unknown mode {other:?} (expected linear or graph)"),
            };
        }
        if let Some(out) = &overrides.out {
            config.out = out.clone();
        }
        Ok(config)
    }

    pub fn selector(&self) -> Result<Selector> {
        Selector::parse(&self.method)
            .with_context(|| format!("unknown method {:?}", self.method))
    }

    pub fn selector_params(&self) -> SelectorParams {
        SelectorParams {
            k: self.k,
            weight: self.weight,
            bandwidth: self.bandwidth,
            rank: self.rank,
            iterations: self.iterations,
            window: self.window,
            step: self.step,
        }
    }

    pub fn linear_params(&self) -> LinearParams {
        LinearParams {
            grid: self.interpolation.grid,
            tol: self.interpolation.tol,
        }
    }

    /// Short dataset tag for CSV rows.
    pub fn dataset_name(&self) -> String {
        match &self.data {
            DataSource::Synthetic { .. } => "synthetic".into(),
            DataSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
        }
    }

    pub fn model_path(&self) -> PathBuf {
        self.out.join("model.json")
    }

    pub fn graph_path(&self) -> PathBuf {
        self.out.join("graph.txt")
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))
    }
}

pub fn path_str(path: &Path) -> String {
    path.display().to_string()
}
