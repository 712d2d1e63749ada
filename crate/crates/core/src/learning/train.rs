use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{GibbsConfig, NegPhase};
use crate::learning::gradient::GradientWorkspace;
use crate::learning::prior::Prior;
use crate::model::{Architecture, GradientBundle, ModelParams, TimeSeries};
use crate::rng;

fn default_lr() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    1
}
fn default_init_range() -> f64 {
    1.0
}
fn default_lateral_range() -> f64 {
    2.0
}
fn default_stride() -> usize {
    10
}
fn default_burn_in_fraction() -> f64 {
    0.1
}
fn default_true() -> bool {
    true
}

/// Hyperparameters shared by maximum-likelihood and Langevin training.
///
/// One epoch is `|D|` updates, each on a sequence drawn uniformly with
/// replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub neg_phase: NegPhase,
    #[serde(default)]
    pub gibbs: GibbsConfig,
    /// `theta` and `V` start uniform in `[-init_range, init_range]`.
    #[serde(default = "default_init_range")]
    pub init_range: f64,
    /// `U` starts uniform in `[-lateral_init_range, lateral_init_range]`.
    #[serde(default = "default_lateral_range")]
    pub lateral_init_range: f64,
    #[serde(default)]
    pub prior: Prior,
    /// `|D|` in the Langevin update; defaults to the dataset length.
    #[serde(default)]
    pub dataset_size: Option<usize>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Fraction of all Langevin updates discarded before snapshots start.
    #[serde(default = "default_burn_in_fraction")]
    pub burn_in_fraction: f64,
    /// Langevin noise; disabling it turns the update into MAP ascent.
    #[serde(default = "default_true")]
    pub langevin_noise: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_lr(),
            epochs: default_epochs(),
            seed: 0,
            neg_phase: NegPhase::default(),
            gibbs: GibbsConfig::default(),
            init_range: default_init_range(),
            lateral_init_range: default_lateral_range(),
            prior: Prior::default(),
            dataset_size: None,
            snapshot_stride: default_stride(),
            burn_in_fraction: default_burn_in_fraction(),
            langevin_noise: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config("burn_in_fraction must be in [0, 1)".into()));
        }
        if self.init_range < 0.0 || self.lateral_init_range < 0.0 {
            return Err(Error::Config("init ranges must be >= 0".into()));
        }
        self.gibbs.validate()?;
        self.prior.validate()
    }

    /// Random initial parameters from the `(seed, "init")` stream.
    pub fn initial_params(&self, arch: &Architecture) -> ModelParams {
        let mut rng = rng::stream(self.seed, "init", 0);
        ModelParams::random(arch.param_shape(), self.init_range, self.lateral_init_range, &mut rng)
    }

    fn gibbs_for_update(&self, update: usize) -> GibbsConfig {
        GibbsConfig {
            seed: rng::derive_seed(self.seed, "gibbs", update as u64),
            ..self.gibbs
        }
    }
}

/// Summary of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Mean log-likelihood of the sequences drawn in this epoch, each
    /// evaluated just before its update; `None` if any step was sampled.
    pub train_loglik: Option<f64>,
    pub updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub epochs: Vec<EpochReport>,
}

#[derive(Debug, Clone)]
pub struct BayesOutcome {
    pub params: ModelParams,
    pub samples: Vec<ModelParams>,
    pub epochs: Vec<EpochReport>,
}

struct EpochAccumulator {
    sum: Option<f64>,
    count: usize,
}

impl EpochAccumulator {
    fn new() -> Self {
        Self {
            sum: Some(0.0),
            count: 0,
        }
    }

    fn add(&mut self, ll: Option<f64>) {
        self.sum = self.sum.zip(ll).map(|(a, b)| a + b);
        self.count += 1;
    }

    fn report(&self, epoch: usize) -> EpochReport {
        EpochReport {
            epoch,
            train_loglik: self.sum.map(|s| s / self.count.max(1) as f64),
            updates: self.count,
        }
    }
}

fn check_dataset(arch: &Architecture, dataset: &[TimeSeries]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dataset.iter().try_for_each(|x| arch.check_series(x))
}

/// Maximum-likelihood stochastic gradient ascent:
/// draw `x ~ D`, then `Θ ← Θ + η ∇ log p(x)`.
pub fn train_ml(arch: &Architecture, dataset: &[TimeSeries], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_ml_observed(arch, dataset, cfg, cfg.initial_params(arch), |_, _| {})
}

/// [`train_ml`] from given initial parameters, calling `on_epoch` after
/// every epoch with the current parameters.
pub fn train_ml_observed(
    arch: &Architecture,
    dataset: &[TimeSeries],
    cfg: &TrainConfig,
    init: ModelParams,
    mut on_epoch: impl FnMut(&EpochReport, &ModelParams),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(arch, dataset)?;
    arch.check_params(&init)?;
    let mut params = init;
    let mut draw = rng::stream(cfg.seed, "draw", 0);
    let mut ws = GradientWorkspace::new(arch);
    let mut grad = GradientBundle::zeros(*params.shape());
    let mut reports = Vec::with_capacity(cfg.epochs);
    let mut update = 0;
    for epoch in 1..=cfg.epochs {
        let mut acc = EpochAccumulator::new();
        for _ in 0..dataset.len() {
            let x = &dataset[draw.random_range(0..dataset.len())];
            grad.as_mut_slice().fill(0.0);
            let ll = ws.accumulate(&params, x, cfg.neg_phase, &cfg.gibbs_for_update(update), &mut grad)?;
            acc.add(ll);
            params.add_scaled(&grad, cfg.learning_rate);
            update += 1;
        }
        let report = acc.report(epoch);
        on_epoch(&report, &params);
        reports.push(report);
    }
    Ok(TrainOutcome {
        params,
        epochs: reports,
    })
}

/// Stochastic gradient Langevin dynamics:
/// `Θ ← Θ + η (∇ ln p(Θ) + |D| ∇ log p(x)) + sqrt(2η) ν`, `ν ~ N(0, I)`.
///
/// Snapshots are taken every `snapshot_stride` updates once the burn-in
/// fraction of all updates has passed.
pub fn train_bayes(arch: &Architecture, dataset: &[TimeSeries], cfg: &TrainConfig) -> Result<BayesOutcome> {
    let mut samples = Vec::new();
    let out = train_bayes_observed(
        arch,
        dataset,
        cfg,
        cfg.initial_params(arch),
        |_, _| {},
        |_, _, p| samples.push(p.clone()),
    )?;
    Ok(BayesOutcome {
        params: out.params,
        samples,
        epochs: out.epochs,
    })
}

/// Number of updates before the first snapshot.
pub fn burn_in_updates(cfg: &TrainConfig, dataset_len: usize) -> usize {
    let total = cfg.epochs * dataset_len;
    (total as f64 * cfg.burn_in_fraction).ceil() as usize
}

/// [`train_bayes`] with callbacks: `on_epoch(report, params)` and
/// `on_snapshot(index, update, params)`, with 0-based snapshot index and
/// 1-based update count.
pub fn train_bayes_observed(
    arch: &Architecture,
    dataset: &[TimeSeries],
    cfg: &TrainConfig,
    init: ModelParams,
    mut on_epoch: impl FnMut(&EpochReport, &ModelParams),
    mut on_snapshot: impl FnMut(usize, usize, &ModelParams),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(arch, dataset)?;
    arch.check_params(&init)?;
    let scale = cfg.dataset_size.unwrap_or(dataset.len()) as f64;
    let eta = cfg.learning_rate;
    let noise_scale = (2.0 * eta).sqrt();
    let burn_in = burn_in_updates(cfg, dataset.len());

    let mut params = init;
    let mut draw = rng::stream(cfg.seed, "draw", 0);
    let mut noise = rng::stream(cfg.seed, "noise", 0);
    let mut ws = GradientWorkspace::new(arch);
    let mut grad = GradientBundle::zeros(*params.shape());
    let mut reports = Vec::with_capacity(cfg.epochs);
    let mut update = 0;
    let mut snapshot = 0;
    for epoch in 1..=cfg.epochs {
        let mut acc = EpochAccumulator::new();
        for _ in 0..dataset.len() {
            let x = &dataset[draw.random_range(0..dataset.len())];
            grad.as_mut_slice().fill(0.0);
            let ll = ws.accumulate(&params, x, cfg.neg_phase, &cfg.gibbs_for_update(update), &mut grad)?;
            acc.add(ll);
            for (w, g) in params.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                let mut step = eta * (cfg.prior.grad(*w) + scale * g);
                if cfg.langevin_noise {
                    let nu: f64 = StandardNormal.sample(&mut noise);
                    step += noise_scale * nu;
                }
                *w += step;
            }
            update += 1;
            if update > burn_in && (update - burn_in).is_multiple_of(cfg.snapshot_stride) {
                on_snapshot(snapshot, update, &params);
                snapshot += 1;
            }
        }
        let report = acc.report(epoch);
        on_epoch(&report, &params);
        reports.push(report);
    }
    Ok(TrainOutcome {
        params,
        epochs: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisBank;
    use crate::graph::{CausalGraph, LateralGraph};
    use crate::model::{sequence_log_likelihood, Alphabet};

    fn single_unit() -> Architecture {
        Architecture::new(
            Alphabet::binary(),
            CausalGraph::empty(1),
            LateralGraph::empty(1),
            BasisBank::custom(vec![vec![1.0]]).unwrap(),
        )
        .unwrap()
    }

    fn small_arch() -> Architecture {
        Architecture::new(
            Alphabet::binary(),
            CausalGraph::new(3, [(0, 1), (1, 2), (2, 2), (2, 0)]).unwrap(),
            LateralGraph::new(3, [(0, 1)]).unwrap(),
            BasisBank::raised_cosine(2, 3).unwrap(),
        )
        .unwrap()
    }

    fn small_data() -> Vec<TimeSeries> {
        (0..4)
            .map(|s| {
                TimeSeries::from_rows(&[
                    vec![1, 0, s % 2, 1, 0],
                    vec![0, 1, 1, 0, s / 2],
                    vec![1, 1, 0, 0, 1],
                ])
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let a = small_arch();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            seed: 3,
            ..Default::default()
        };
        let out = train_ml(&a, &small_data(), &cfg).unwrap();
        assert_eq!(out.params, cfg.initial_params(&a));
        assert_eq!(out.epochs.len(), 5);

        let bayes = TrainConfig {
            langevin_noise: true,
            prior: Prior::gmm(vec![0.0, -1.0], 0.15),
            ..cfg
        };
        let out = train_bayes(&a, &small_data(), &bayes).unwrap();
        assert_eq!(out.params, bayes.initial_params(&a));
    }

    #[test]
    fn empty_dataset_rejected() {
        let a = small_arch();
        assert!(matches!(train_ml(&a, &[], &TrainConfig::default()), Err(Error::EmptyDataset)));
        assert!(matches!(train_bayes(&a, &[], &TrainConfig::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn all_ones_drives_rate_up() {
        let a = single_unit();
        let data = vec![TimeSeries::from_rows(&[vec![1; 10]]).unwrap()];
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 2000,
            seed: 1,
            ..Default::default()
        };
        let mut thetas = Vec::new();
        let out = train_ml_observed(&a, &data, &cfg, cfg.initial_params(&a), |_, p| thetas.push(p.theta(0)[0])).unwrap();
        assert!(thetas.windows(2).all(|w| w[1] > w[0]));
        let p1 = 1.0 / (1.0 + (-out.params.theta(0)[0]).exp());
        assert!(p1 > 0.95);
    }

    #[test]
    fn training_is_reproducible() {
        let a = small_arch();
        let cfg = TrainConfig {
            epochs: 20,
            seed: 11,
            neg_phase: NegPhase::Exact,
            ..Default::default()
        };
        let one = train_ml(&a, &small_data(), &cfg).unwrap();
        let two = train_ml(&a, &small_data(), &cfg).unwrap();
        assert_eq!(one.params.as_slice(), two.params.as_slice());
        let b1 = train_bayes(&a, &small_data(), &TrainConfig { learning_rate: 1e-3, ..cfg.clone() }).unwrap();
        let b2 = train_bayes(&a, &small_data(), &TrainConfig { learning_rate: 1e-3, ..cfg }).unwrap();
        assert_eq!(b1.samples, b2.samples);
        assert!(!b1.samples.is_empty());
    }

    #[test]
    fn small_step_does_not_decrease_likelihood() {
        let a = small_arch();
        let x = &small_data()[0];
        let cfg = TrainConfig::default();
        let p = cfg.initial_params(&a);
        let g = crate::learning::grad_log_likelihood(&a, &p, x, NegPhase::Exact, &cfg.gibbs).unwrap();
        let mut q = p.clone();
        q.add_scaled(&g, 1e-4);
        let before = sequence_log_likelihood(&a, &p, x).unwrap();
        let after = sequence_log_likelihood(&a, &q, x).unwrap();
        assert!(after >= before - 1e-12);
    }

    #[test]
    fn snapshot_schedule() {
        let a = single_unit();
        let data = vec![TimeSeries::from_rows(&[vec![1]]).unwrap(); 10];
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 10,
            snapshot_stride: 5,
            burn_in_fraction: 0.1,
            ..Default::default()
        };
        let mut seen = Vec::new();
        train_bayes_observed(&a, &data, &cfg, cfg.initial_params(&a), |_, _| {}, |i, u, _| seen.push((i, u))).unwrap();
        // 100 updates, burn-in 10, then every 5th update
        assert_eq!(seen.first(), Some(&(0, 15)));
        assert_eq!(seen.last(), Some(&(17, 100)));
        assert!(seen.windows(2).all(|w| w[1].0 == w[0].0 + 1));
    }
}
