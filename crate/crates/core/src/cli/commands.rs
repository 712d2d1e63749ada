use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::Failure;
use crate::error::{Error, Result};
use crate::io::{self, Checkpoint};
use crate::learning::{gradient_check, train_bayes_observed, train_ml_observed, EpochReport, Prior};
use crate::model::{
    sample_sequence, sequence_log_likelihood, Alphabet, Architecture, Block, ModelParams, TimeSeries,
};
use crate::rng;
use crate::tasks::{
    self, augment_rotations, build_two_layer_graphs, encode_dataset, load_dataset, synthetic_digits,
    ImageExample, SyntheticConfig, TwoLayerSpec,
};

struct Data {
    train: Vec<TimeSeries>,
    test: Vec<TimeSeries>,
    train_labels: Vec<Vec<usize>>,
    test_labels: Vec<Vec<usize>>,
}

pub(super) struct Run {
    name: &'static str,
    cfg: ExperimentConfig,
    arch: Architecture,
    spec: Option<TwoLayerSpec>,
    outputs: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn prior_name(p: &Prior) -> &'static str {
    match p {
        Prior::Uniform => "uniform",
        Prior::Gaussian { .. } => "gaussian",
        Prior::GaussianMixture { .. } => "gmm",
    }
}

impl Run {
    pub(super) fn new(name: &'static str, cfg: ExperimentConfig) -> Result<Self> {
        let alphabet = Alphabet::new(cfg.alphabet)?;
        let bank = cfg.basis.build()?;
        let (spec, (causal, lateral)) = match (&cfg.task, &cfg.graphs) {
            (Some(task), _) => {
                let spec = task.spec();
                let graphs = build_two_layer_graphs(&spec, task.lateral)?;
                (Some(spec), graphs)
            }
            (None, Some(g)) => (None, g.build()?),
            (None, None) => return Err(Error::Config("either `graphs` or `task` is required".into())),
        };
        let arch = Architecture::new(alphabet, causal, lateral, bank)?;
        std::fs::create_dir_all(&cfg.output_dir)?;
        Ok(Self {
            name,
            cfg,
            arch,
            spec,
            outputs: Vec::new(),
        })
    }

    fn path(&mut self, file: &str) -> PathBuf {
        self.outputs.push(file.to_string());
        self.cfg.output_dir.join(file)
    }

    fn images(&self, split: &str) -> Result<Vec<ImageExample>> {
        let task = self.cfg.task.as_ref().expect("task mode");
        let seed = self.cfg.seed;
        let base = if let Some(syn) = task.synthetic {
            let per_class = if split == "train" {
                syn.train_per_class
            } else {
                syn.test_per_class
            };
            synthetic_digits(&SyntheticConfig {
                size: task.image_height,
                per_class,
                noise: syn.noise,
                seed: rng::derive_seed(seed, &format!("synthetic-{split}"), 0),
            })
        } else {
            let path = if split == "train" {
                self.cfg.data.train.as_ref()
            } else {
                self.cfg.data.test.as_ref()
            };
            match path {
                Some(p) => load_dataset(p, task.image_height, task.image_width)?,
                None => Vec::new(),
            }
        };
        if task.synthetic.is_some() && task.image_height != task.image_width {
            return Err(Error::Config("synthetic images are square".into()));
        }
        if !task.augment {
            return Ok(base);
        }
        let [lo, hi] = task.rotation_range;
        augment_rotations(&base, (lo, hi), rng::derive_seed(seed, &format!("rotate-{split}"), 0))
    }

    fn load_data(&self) -> Result<Data> {
        let seed = self.cfg.seed;
        if let Some(spec) = &self.spec {
            let mut out = Data {
                train: Vec::new(),
                test: Vec::new(),
                train_labels: Vec::new(),
                test_labels: Vec::new(),
            };
            for split in ["train", "test"] {
                let images = self.images(split)?;
                let encoded = encode_dataset(spec, &images, rng::derive_seed(seed, &format!("encode-{split}"), 0))?;
                let labels = images.iter().map(ImageExample::labels).collect();
                if split == "train" {
                    (out.train, out.train_labels) = (encoded, labels);
                } else {
                    (out.test, out.test_labels) = (encoded, labels);
                }
            }
            return Ok(out);
        }
        let (train, test) = if let Some(g) = self.cfg.data.generate {
            let mut r = rng::stream(seed, "teacher", 0);
            let teacher = ModelParams::random(
                self.arch.param_shape(),
                self.cfg.train.init_range,
                self.cfg.train.lateral_init_range,
                &mut r,
            );
            let gen = |tag: &str, n: usize| -> Result<Vec<TimeSeries>> {
                (0..n)
                    .map(|i| {
                        let s = rng::derive_seed(seed, tag, i as u64);
                        sample_sequence(&self.arch, &teacher, g.t_len, s, &self.cfg.train.gibbs)
                    })
                    .collect()
            };
            (gen("teacher-train", g.n_train)?, gen("teacher-test", g.n_test)?)
        } else {
            let read = |p: Option<&PathBuf>| -> Result<Vec<TimeSeries>> {
                match p {
                    Some(p) => io::read_series(p),
                    None => Ok(Vec::new()),
                }
            };
            (read(self.cfg.data.train.as_ref())?, read(self.cfg.data.test.as_ref())?)
        };
        for x in train.iter().chain(&test) {
            self.arch.check_series(x)?;
        }
        Ok(Data {
            train,
            test,
            train_labels: Vec::new(),
            test_labels: Vec::new(),
        })
    }

    /// Mean log-likelihood per sequence (outputs given inputs in task mode);
    /// `None` when there is no data or a component is too large to enumerate.
    fn mean_loglik(&self, arch: &Architecture, params: &ModelParams, data: &[TimeSeries]) -> Result<Option<f64>> {
        if data.is_empty() {
            return Ok(None);
        }
        let res = match &self.spec {
            Some(spec) => tasks::mean_output_log_likelihood(arch, params, spec, data),
            None => data
                .iter()
                .map(|x| sequence_log_likelihood(arch, params, x))
                .sum::<Result<f64>>()
                .map(|s| s / data.len() as f64),
        };
        match res {
            Ok(v) => Ok(Some(v)),
            Err(Error::ComponentTooLarge { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn checkpoint(&self, params: &ModelParams) -> Result<Checkpoint> {
        Checkpoint::new(&self.arch, &self.cfg.basis, params)
    }

    fn load_checkpoint(&self, path: Option<&Path>) -> Result<Option<(Architecture, ModelParams)>> {
        let Some(path) = path else { return Ok(None) };
        let ck = Checkpoint::load(path).map_err(|e| Error::Config(format!("checkpoint {}: {e}", path.display())))?;
        let (arch, params) = ck.restore()?;
        if let Some(spec) = &self.spec {
            if arch.n_units() != spec.n_units() {
                return Err(Error::Config(format!(
                    "checkpoint has {} units, the task needs {}",
                    arch.n_units(),
                    spec.n_units()
                )));
            }
        }
        Ok(Some((arch, params)))
    }

    fn write_manifest(&mut self) -> Result<()> {
        let config = serde_json::to_value(&self.cfg)?;
        let canonical = serde_json::to_string(&config)?;
        let path = self.path("manifest.json");
        let manifest = json!({
            "command": self.name,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.cfg.seed,
            "config_sha256": sha256_hex(canonical.as_bytes()),
            "config": config,
            "threads": rayon::current_num_threads(),
            "outputs": self.outputs,
        });
        std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    fn metrics_writer(&mut self) -> Result<csv::Writer<File>> {
        let mut w = csv::Writer::from_path(self.path("metrics.csv"))?;
        w.write_record(["epoch", "train_loglik", "test_loglik", "wall_ms"])?;
        w.flush()?;
        Ok(w)
    }

    fn epoch_row(
        &self,
        w: &mut csv::Writer<File>,
        data: &Data,
        report: &EpochReport,
        params: &ModelParams,
        start: Instant,
    ) -> Result<()> {
        let train = self.mean_loglik(&self.arch, params, &data.train)?;
        let test = self.mean_loglik(&self.arch, params, &data.test)?;
        w.write_record([
            report.epoch.to_string(),
            fmt_opt(train),
            fmt_opt(test),
            start.elapsed().as_millis().to_string(),
        ])?;
        w.flush()?;
        log::info!("epoch {} train {} test {}", report.epoch, fmt_opt(train), fmt_opt(test));
        Ok(())
    }

    fn finish(mut self, result: Result<()>) -> std::result::Result<(), Failure> {
        result.and_then(|()| self.write_manifest()).map_err(Failure::runtime)
    }

    pub(super) fn train_ml(mut self) -> std::result::Result<(), Failure> {
        let result = (|| -> Result<()> {
            let data = self.load_data()?;
            let mut metrics = self.metrics_writer()?;
            let start = Instant::now();
            let mut failed = None;
            let init = self.cfg.train.initial_params(&self.arch);
            let out = train_ml_observed(&self.arch, &data.train, &self.cfg.train, init, |rep, p| {
                if failed.is_none() {
                    failed = self.epoch_row(&mut metrics, &data, rep, p, start).err();
                }
            })?;
            if let Some(e) = failed {
                return Err(e);
            }
            let ck = self.checkpoint(&out.params)?;
            ck.save(&self.path("checkpoint.json"))
        })();
        self.finish(result)
    }

    pub(super) fn train_bayes(mut self) -> std::result::Result<(), Failure> {
        let result = (|| -> Result<()> {
            let data = self.load_data()?;
            let mut metrics = self.metrics_writer()?;
            let snap_dir = self.cfg.output_dir.join("snapshots");
            std::fs::create_dir_all(&snap_dir)?;
            self.outputs.push("snapshots/".into());
            let width = self.cfg.histogram_bin_width;
            let mut hist: BTreeMap<(Block, i64), u64> = BTreeMap::new();
            let start = Instant::now();
            let mut failed: Option<Error> = None;
            let mut snap_failed: Option<Error> = None;
            let init = self.cfg.train.initial_params(&self.arch);
            let this = &self;
            let out = train_bayes_observed(
                &self.arch,
                &data.train,
                &self.cfg.train,
                init,
                |rep, p| {
                    if failed.is_none() {
                        failed = this.epoch_row(&mut metrics, &data, rep, p, start).err();
                    }
                },
                |index, _, p| {
                    if snap_failed.is_some() {
                        return;
                    }
                    for (idx, &w) in p.as_slice().iter().enumerate() {
                        let bin = (w / width).floor() as i64;
                        *hist.entry((p.shape().block_of(idx), bin)).or_insert(0) += 1;
                    }
                    let res = this
                        .checkpoint(p)
                        .and_then(|ck| ck.save(&snap_dir.join(format!("snapshot_{index:06}.json"))));
                    snap_failed = res.err();
                },
            )?;
            if let Some(e) = failed.or(snap_failed) {
                return Err(e);
            }
            let hist_name = format!("histogram_{}.csv", prior_name(&self.cfg.train.prior));
            let mut w = csv::Writer::from_path(self.path(&hist_name))?;
            w.write_record(["block", "bin_lo", "bin_hi", "count"])?;
            for ((block, bin), count) in &hist {
                w.write_record([
                    block.name().to_string(),
                    (*bin as f64 * width).to_string(),
                    ((*bin + 1) as f64 * width).to_string(),
                    count.to_string(),
                ])?;
            }
            w.flush()?;
            let ck = self.checkpoint(&out.params)?;
            ck.save(&self.path("checkpoint.json"))
        })();
        self.finish(result)
    }

    pub(super) fn sample(mut self, checkpoint: Option<&Path>) -> std::result::Result<(), Failure> {
        let result = (|| -> Result<()> {
            let (arch, params) = match self.load_checkpoint(checkpoint)? {
                Some(m) => m,
                None => (self.arch.clone(), self.cfg.train.initial_params(&self.arch)),
            };
            let sc = self.cfg.sample;
            let series = (0..sc.n_sequences)
                .map(|n| {
                    let s = rng::derive_seed(self.cfg.seed, "sample", n as u64);
                    sample_sequence(&arch, &params, sc.t_len, s, &self.cfg.train.gibbs)
                })
                .collect::<Result<Vec<_>>>()?;
            io::save_series_long(&self.path("samples.csv"), &series)
        })();
        self.finish(result)
    }

    pub(super) fn eval(mut self, checkpoint: Option<&Path>) -> std::result::Result<(), Failure> {
        if checkpoint.is_none() {
            return Err(Failure::Config("eval needs --checkpoint".into()));
        }
        let result = (|| -> Result<()> {
            let (arch, params) = self.load_checkpoint(checkpoint)?.expect("checked above");
            let data = self.load_data()?;
            let report = if let Some(spec) = &self.spec {
                let (split, enc, labels) = if data.test.is_empty() {
                    ("train", &data.train, &data.train_labels)
                } else {
                    ("test", &data.test, &data.test_labels)
                };
                let seed = rng::derive_seed(self.cfg.seed, "eval", 0);
                let acc = tasks::accuracy(&arch, &params, spec, enc, labels, seed, &self.cfg.train.gibbs)?;
                let per_task: serde_json::Map<String, serde_json::Value> =
                    spec.groups.iter().zip(&acc).map(|(g, a)| (g.name.clone(), json!(a))).collect();
                json!({ "split": split, "n_examples": enc.len(), "accuracy": per_task })
            } else {
                json!({
                    "train_loglik": self.mean_loglik(&arch, &params, &data.train)?,
                    "test_loglik": self.mean_loglik(&arch, &params, &data.test)?,
                    "n_train": data.train.len(),
                    "n_test": data.test.len(),
                })
            };
            let name = if self.spec.is_some() { "accuracy.json" } else { "eval.json" };
            std::fs::write(self.path(name), serde_json::to_string_pretty(&report)? + "\n")?;
            Ok(())
        })();
        self.finish(result)
    }

    pub(super) fn gradcheck(mut self, checkpoint: Option<&Path>) -> std::result::Result<(), Failure> {
        let mut passed = true;
        let result = (|| -> Result<()> {
            let (arch, params) = match self.load_checkpoint(checkpoint)? {
                Some(m) => m,
                None => (self.arch.clone(), self.cfg.train.initial_params(&self.arch)),
            };
            let gc = self.cfg.gradcheck;
            let s = rng::derive_seed(self.cfg.seed, "gradcheck", 0);
            let x = sample_sequence(&arch, &params, gc.t_len, s, &self.cfg.train.gibbs)?;
            let rep = gradient_check(&arch, &params, &x, gc.h)?;
            passed = rep.max() <= gc.threshold;
            let blocks: serde_json::Map<String, serde_json::Value> =
                rep.blocks.iter().map(|(b, e)| (b.name().to_string(), json!(e))).collect();
            let report = json!({
                "max_relative_error": blocks,
                "max": rep.max(),
                "threshold": gc.threshold,
                "pass": passed,
            });
            std::fs::write(self.path("gradcheck.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            Ok(())
        })();
        self.finish(result)?;
        if passed {
            Ok(())
        } else {
            Err(Failure::Runtime("gradient check above threshold".into()))
        }
    }

    pub(super) fn encode(mut self) -> std::result::Result<(), Failure> {
        if self.spec.is_none() {
            return Err(Failure::Config("encode needs a task config".into()));
        }
        let result = (|| -> Result<()> {
            let data = self.load_data()?;
            for (split, enc, labels) in [
                ("train", &data.train, &data.train_labels),
                ("test", &data.test, &data.test_labels),
            ] {
                if enc.is_empty() {
                    continue;
                }
                io::save_series_long(&self.path(&format!("encoded_{split}.csv")), enc)?;
                let mut w = csv::Writer::from_path(self.path(&format!("labels_{split}.csv")))?;
                w.write_record(["sequence", "digit", "orientation"])?;
                for (n, l) in labels.iter().enumerate() {
                    w.write_record([n.to_string(), l[0].to_string(), l[1].to_string()])?;
                }
                w.flush()?;
            }
            Ok(())
        })();
        self.finish(result)
    }
}
