use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::graph::GraphSpec;
use crate::learning::TrainConfig;
use crate::tasks::{OutputGroup, TwoLayerSpec};

fn default_alphabet() -> usize {
    2
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_bin_width() -> f64 {
    0.05
}

/// One experiment: model, data, training and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream; overrides `train.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alphabet")]
    pub alphabet: usize,
    /// Required unless `task` is set, in which case it must be absent.
    #[serde(default)]
    pub graphs: Option<GraphSpec>,
    pub basis: BasisSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub task: Option<TaskConfig>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
    #[serde(default = "default_bin_width")]
    pub histogram_bin_width: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Time series file (model mode) or image CSV (task mode).
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Model mode only: sample the data from a random teacher model.
    #[serde(default)]
    pub generate: Option<GenerateConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub n_train: usize,
    #[serde(default)]
    pub n_test: usize,
    pub t_len: usize,
}

fn default_true() -> bool {
    true
}
fn default_digit_classes() -> usize {
    2
}
fn default_rotation() -> [f64; 2] {
    [30.0, 150.0]
}

/// Digit and orientation classification with a two-layer network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub image_height: usize,
    pub image_width: usize,
    #[serde(default = "default_digit_classes")]
    pub digit_classes: usize,
    pub t_len: usize,
    #[serde(default = "default_true")]
    pub lateral: bool,
    /// Add a rotated copy of every image.
    #[serde(default = "default_true")]
    pub augment: bool,
    #[serde(default = "default_rotation")]
    pub rotation_range: [f64; 2],
    /// Generate stroke images instead of reading `data`.
    #[serde(default)]
    pub synthetic: Option<SyntheticTask>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTask {
    pub train_per_class: usize,
    pub test_per_class: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    0.15
}

impl TaskConfig {
    pub fn spec(&self) -> TwoLayerSpec {
        TwoLayerSpec {
            n_inputs: self.image_height * self.image_width,
            groups: vec![
                OutputGroup {
                    name: "digit".into(),
                    classes: self.digit_classes,
                },
                OutputGroup {
                    name: "orientation".into(),
                    classes: 2,
                },
            ],
            t_len: self.t_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub t_len: usize,
    pub n_sequences: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            t_len: 100,
            n_sequences: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub t_len: usize,
    pub h: f64,
    pub threshold: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            t_len: 5,
            h: 1e-5,
            threshold: 1e-4,
        }
    }
}

impl ExperimentConfig {
    /// Parse a config file. Relative data paths and the output directory
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        for p in [&mut cfg.data.train, &mut cfg.data.test].into_iter().flatten() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphabet < 2 {
            return Err(Error::Config("alphabet must be >= 2".into()));
        }
        self.basis.build()?;
        self.train.validate()?;
        if !(self.histogram_bin_width > 0.0) {
            return Err(Error::Config("histogram_bin_width must be > 0".into()));
        }
        if !(self.gradcheck.h > 0.0) {
            return Err(Error::Config("gradcheck.h must be > 0".into()));
        }
        match (&self.task, &self.graphs) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("`graphs` must be omitted when `task` is set".into()));
            }
            (None, None) => return Err(Error::Config("either `graphs` or `task` is required".into())),
            (None, Some(g)) => {
                g.build()?;
            }
            (Some(task), None) => {
                task.spec().validate()?;
                if self.alphabet != 2 {
                    return Err(Error::Config("task mode needs a binary alphabet".into()));
                }
                let [lo, hi] = task.rotation_range;
                if !(lo <= hi) {
                    return Err(Error::Config("rotation_range must be [low, high]".into()));
                }
                if task.synthetic.is_none() && self.data.train.is_none() {
                    return Err(Error::Config("task mode needs `data.train` or `task.synthetic`".into()));
                }
                if task.synthetic.is_some() && task.digit_classes != 2 {
                    return Err(Error::Config("synthetic images have 2 digit classes".into()));
                }
                if self.data.generate.is_some() {
                    return Err(Error::Config("`data.generate` is for model mode only".into()));
                }
            }
        }
        if self.task.is_none() && self.data.generate.is_some() && self.data.train.is_some() {
            return Err(Error::Config("give either `data.train` or `data.generate`".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{
        "seed": 3,
        "graphs": {"n_units": 3, "causal": [[0, 1], [1, 2]], "lateral": [[0, 2]]},
        "basis": {"kind": "raised_cosine", "K": 2, "tau": 3},
        "train": {"learning_rate": 0.000625, "epochs": 10},
        "data": {"generate": {"n_train": 4, "t_len": 5}}
    }"#;

    #[test]
    fn toy_config_parses() {
        let cfg: ExperimentConfig = serde_json::from_str(TOY).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.train.learning_rate, 0.000625);
        assert_eq!(cfg.alphabet, 2);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = TOY.replace("\"seed\"", "\"sede\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
        let bad = TOY.replace("\"epochs\"", "\"epoch\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn mode_rules() {
        let mut cfg: ExperimentConfig = serde_json::from_str(TOY).unwrap();
        cfg.graphs = None;
        assert!(cfg.validate().is_err());
        cfg.task = Some(TaskConfig {
            image_height: 4,
            image_width: 4,
            digit_classes: 2,
            t_len: 8,
            lateral: true,
            augment: true,
            rotation_range: [30.0, 150.0],
            synthetic: None,
        });
        // needs data and no generate section
        assert!(cfg.validate().is_err());
        cfg.data.generate = None;
        cfg.data.train = Some("x.csv".into());
        cfg.validate().unwrap();
    }
}
