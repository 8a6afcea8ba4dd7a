//! Experiment configuration: a JSON file with a parameter block per command,
//! overridable seed and output directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use modeconn::rng::RngSeed;
use modeconn::train::{find_mnist, load_mnist_idx, synthetic_digits, teacher_student_data, Dataset};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    trials: Option<usize>,
    #[serde(default)]
    params: serde_json::Value,
}

/// Fully resolved configuration, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig<P> {
    pub experiment: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub trials: usize,
    pub params: P,
}

impl<P> ExperimentConfig<P> {
    pub fn rng_seed(&self) -> RngSeed {
        RngSeed(self.seed)
    }

    /// Independent seed for a named stage of the run.
    pub fn stage_seed(&self, stage: u64) -> RngSeed {
        self.rng_seed().derive(stage)
    }
}

/// Overrides taken from the command line.
pub struct Overrides<'a> {
    pub config: Option<&'a Path>,
    pub seed: Option<u64>,
    pub out_dir: Option<&'a Path>,
}

pub fn resolve<P: DeserializeOwned + Default>(experiment: &str, default_trials: usize, o: &Overrides) -> Result<ExperimentConfig<P>> {
    let file = match o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ConfigFile>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    let params = if file.params.is_null() {
        P::default()
    } else {
        serde_json::from_value(file.params).with_context(|| format!("parameter block for {experiment}"))?
    };
    Ok(ExperimentConfig {
        experiment: experiment.to_string(),
        seed: o.seed.or(file.seed).unwrap_or(0),
        out_dir: o
            .out_dir
            .map(Path::to_path_buf)
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        trials: file.trials.unwrap_or(default_trials),
        params,
    })
}

/// Training data for the network commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Synthetic 28×28 ten-class digits.
    Synthetic { n: usize, seed: u64 },
    /// MNIST IDX files in `dir`; falls back to synthetic digits when they
    /// are missing.
    Mnist { dir: PathBuf, n: usize },
    TeacherStudent { teachers: usize, d: usize, n: usize, seed: u64 },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Synthetic { n: 8192, seed: 80 }
    }
}

impl DataSpec {
    pub fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DataSpec::Synthetic { n, seed } => synthetic_digits(*n, RngSeed(*seed))?,
            DataSpec::Mnist { dir, n } => match find_mnist(dir) {
                Some((images, labels)) => {
                    let data = load_mnist_idx(&images, &labels)?;
                    let idx: Vec<usize> = (0..(*n).min(data.len())).collect();
                    data.subset(&idx)
                }
                None => {
                    log::warn!("no MNIST files in {}; using synthetic digits", dir.display());
                    synthetic_digits(*n, RngSeed(0))?
                }
            },
            DataSpec::TeacherStudent { teachers, d, n, seed } => teacher_student_data(*teachers, *d, *n, RngSeed(*seed))?,
        })
    }
}
