//! Supervised multi-task classification with a two-layer spiking network.
//!
//! Unit layout: inputs occupy `0..n_inputs`, followed by the output groups
//! in order, one unit per class.

mod dataset;

pub use dataset::{
    augment_rotations, load_dataset, rotate_image, synthetic_digits, ImageExample, Orientation,
    SyntheticConfig,
};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, LateralGraph};
use crate::inference::GibbsConfig;
use crate::model::{sample_clamped, sequence_log_likelihood_of, Architecture, ModelParams, TimeSeries};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputGroup {
    pub name: String,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLayerSpec {
    pub n_inputs: usize,
    pub groups: Vec<OutputGroup>,
    /// Encoding length `T`.
    pub t_len: usize,
}

impl TwoLayerSpec {
    /// Digit and orientation groups of two classes each.
    pub fn digits_and_orientation(n_inputs: usize, t_len: usize) -> Self {
        Self {
            n_inputs,
            groups: vec![
                OutputGroup {
                    name: "digit".into(),
                    classes: 2,
                },
                OutputGroup {
                    name: "orientation".into(),
                    classes: 2,
                },
            ],
            t_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 {
            return Err(Error::Config("a two-layer network needs at least one input".into()));
        }
        if let Some(g) = self.groups.iter().find(|g| g.classes < 2) {
            return Err(Error::Config(format!("output group `{}` needs at least 2 classes", g.name)));
        }
        Ok(())
    }

    pub fn n_outputs(&self) -> usize {
        self.groups.iter().map(|g| g.classes).sum()
    }

    pub fn n_units(&self) -> usize {
        self.n_inputs + self.n_outputs()
    }

    /// Unit indices of group `g`.
    pub fn group_units(&self, g: usize) -> std::ops::Range<usize> {
        let start = self.n_inputs + self.groups[..g].iter().map(|g| g.classes).sum::<usize>();
        start..start + self.groups[g].classes
    }

    /// `true` for output units.
    pub fn output_mask(&self) -> Vec<bool> {
        (0..self.n_units()).map(|u| u >= self.n_inputs).collect()
    }

    pub fn input_mask(&self) -> Vec<bool> {
        (0..self.n_units()).map(|u| u < self.n_inputs).collect()
    }
}

/// Input-to-output causal edges, output self-loops, and (when `lateral`)
/// a lateral clique inside each output group.
pub fn build_two_layer_graphs(spec: &TwoLayerSpec, lateral: bool) -> Result<(CausalGraph, LateralGraph)> {
    spec.validate()?;
    let n = spec.n_units();
    let outputs = spec.n_inputs..n;
    let causal = outputs
        .clone()
        .flat_map(|o| (0..spec.n_inputs).map(move |i| (i, o)).chain(std::iter::once((o, o))));
    let causal = CausalGraph::new(n, causal)?;
    let mut edges = Vec::new();
    if lateral {
        for g in 0..spec.groups.len() {
            let units = spec.group_units(g);
            for a in units.clone() {
                for b in a + 1..units.end {
                    edges.push((a, b));
                }
            }
        }
    }
    Ok((causal, LateralGraph::new(n, edges)?))
}

/// I.i.d. Bernoulli spike trains with rate `0.5 * p` per pixel, one row per
/// pixel.
pub fn rate_encode(pixels: &[f64], t_len: usize, seed: u64) -> Result<Vec<Vec<u32>>> {
    if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(Error::PixelOutOfRange { index, value });
    }
    let mut rng = rng::stream(seed, "encode", 0);
    Ok(pixels
        .iter()
        .map(|&p| {
            let q = 0.5 * p;
            (0..t_len).map(|_| u32::from(rng.random::<f64>() < q)).collect()
        })
        .collect())
}

/// Target trains of one output group: the neuron of `class` spikes on steps
/// 1, 5, 9, ... (1-based) and every other neuron stays silent.
pub fn label_encode(class: usize, group_size: usize, t_len: usize) -> Result<Vec<Vec<u32>>> {
    if class >= group_size {
        return Err(Error::ClassOutOfRange { class, group_size });
    }
    Ok((0..group_size)
        .map(|n| (0..t_len).map(|t| u32::from(n == class && t % 4 == 0)).collect())
        .collect())
}

/// Index of the largest count, lowest index on ties.
pub fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Predicted class of every group from its output spike counts.
pub fn rate_decode(counts: &[Vec<usize>]) -> Vec<usize> {
    counts.iter().map(|c| argmax_lowest(c)).collect()
}

/// Full training sequence: encoded inputs followed by the label trains of
/// every group.
pub fn encode_example(spec: &TwoLayerSpec, pixels: &[f64], labels: &[usize], seed: u64) -> Result<TimeSeries> {
    if pixels.len() != spec.n_inputs {
        return Err(Error::ShapeMismatch(format!(
            "{} pixels for {} inputs",
            pixels.len(),
            spec.n_inputs
        )));
    }
    if labels.len() != spec.groups.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} output groups",
            labels.len(),
            spec.groups.len()
        )));
    }
    let mut rows = rate_encode(pixels, spec.t_len, seed)?;
    for (g, &class) in spec.groups.iter().zip(labels) {
        rows.extend(label_encode(class, g.classes, spec.t_len)?);
    }
    let mut x = TimeSeries::zeros(spec.n_units(), spec.t_len);
    for (u, row) in rows.iter().enumerate() {
        for (t, &s) in row.iter().enumerate() {
            x.set(u, t, s);
        }
    }
    Ok(x)
}

/// Encode every example, each with its own `(seed, "example", index)` stream.
pub fn encode_dataset(spec: &TwoLayerSpec, examples: &[ImageExample], seed: u64) -> Result<Vec<TimeSeries>> {
    examples
        .iter()
        .enumerate()
        .map(|(n, ex)| encode_example(spec, &ex.pixels, &ex.labels(), rng::derive_seed(seed, "example", n as u64)))
        .collect()
}

/// Clamp the input units to `x` and sample the outputs forward in time;
/// return the output spike counts of every group.
pub fn output_counts(
    arch: &Architecture,
    params: &ModelParams,
    spec: &TwoLayerSpec,
    x: &TimeSeries,
    seed: u64,
    gibbs: &GibbsConfig,
) -> Result<Vec<Vec<usize>>> {
    if arch.n_units() != spec.n_units() {
        return Err(Error::ShapeMismatch("architecture does not match the task layout".into()));
    }
    let y = sample_clamped(arch, params, x, &spec.input_mask(), seed, gibbs)?;
    Ok((0..spec.groups.len())
        .map(|g| spec.group_units(g).map(|u| y.spike_count(u)).collect())
        .collect())
}

/// Predicted class per group for an input sequence; output rows of `x` are
/// ignored.
pub fn classify(
    arch: &Architecture,
    params: &ModelParams,
    spec: &TwoLayerSpec,
    x: &TimeSeries,
    seed: u64,
    gibbs: &GibbsConfig,
) -> Result<Vec<usize>> {
    Ok(rate_decode(&output_counts(arch, params, spec, x, seed, gibbs)?))
}

/// Fraction of correctly classified examples per group. Example `n` is
/// classified with seed `(seed, "classify", n)`.
pub fn accuracy(
    arch: &Architecture,
    params: &ModelParams,
    spec: &TwoLayerSpec,
    encoded: &[TimeSeries],
    labels: &[Vec<usize>],
    seed: u64,
    gibbs: &GibbsConfig,
) -> Result<Vec<f64>> {
    if encoded.len() != labels.len() {
        return Err(Error::ShapeMismatch("one label vector per example required".into()));
    }
    if encoded.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predictions: Vec<Vec<usize>> = encoded
        .par_iter()
        .enumerate()
        .map(|(n, x)| classify(arch, params, spec, x, rng::derive_seed(seed, "classify", n as u64), gibbs))
        .collect::<Result<_>>()?;
    Ok((0..spec.groups.len())
        .map(|g| {
            let hits = predictions.iter().zip(labels).filter(|(p, l)| p[g] == l[g]).count();
            hits as f64 / encoded.len() as f64
        })
        .collect())
}

/// Mean log-likelihood of the output trains given the inputs.
pub fn mean_output_log_likelihood(
    arch: &Architecture,
    params: &ModelParams,
    spec: &TwoLayerSpec,
    encoded: &[TimeSeries],
) -> Result<f64> {
    if encoded.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mask = spec.output_mask();
    let total: f64 = encoded
        .par_iter()
        .map(|x| sequence_log_likelihood_of(arch, params, x, Some(&mask)))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(total / encoded.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisBank;
    use crate::graph::reachable_sets;
    use crate::learning::{train_ml, TrainConfig};
    use crate::model::Alphabet;
    use std::collections::BTreeSet;

    fn spec(groups: &[(&str, usize)], n_inputs: usize, t_len: usize) -> TwoLayerSpec {
        TwoLayerSpec {
            n_inputs,
            groups: groups
                .iter()
                .map(|&(name, classes)| OutputGroup {
                    name: name.into(),
                    classes,
                })
                .collect(),
            t_len,
        }
    }

    #[test]
    fn two_input_single_group_graph() {
        let s = spec(&[("digit", 2)], 2, 4);
        let (c, l) = build_two_layer_graphs(&s, true).unwrap();
        let got: BTreeSet<_> = c.edges().iter().copied().collect();
        let want: BTreeSet<_> = [(0, 2), (0, 3), (1, 2), (1, 3), (2, 2), (3, 3)].into_iter().collect();
        assert_eq!(got, want);
        assert_eq!(l.edges(), &[(2, 3)]);
    }

    #[test]
    fn one_lateral_edge_per_binary_group() {
        let s = TwoLayerSpec::digits_and_orientation(5, 4);
        let (c, l) = build_two_layer_graphs(&s, true).unwrap();
        assert_eq!(l.edges(), &[(5, 6), (7, 8)]);
        let (c2, l2) = build_two_layer_graphs(&s, false).unwrap();
        assert_eq!(c, c2);
        assert_eq!(l2.n_edges(), 0);
        // no input self-loops, no edges into inputs
        assert!(c.edges().iter().all(|&(_, to)| to >= 5));
    }

    #[test]
    fn lateral_components_are_output_groups() {
        let s = spec(&[("a", 3), ("b", 2), ("c", 4)], 3, 4);
        let (_, l) = build_two_layer_graphs(&s, true).unwrap();
        let reach = reachable_sets(&l);
        for g in 0..3 {
            let units: Vec<usize> = s.group_units(g).collect();
            assert_eq!(reach.components()[reach.component_of(units[0])], units);
        }
        for i in 0..3 {
            assert!(reach.reachable(i).is_empty());
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(&[("a", 1)], 2, 4).validate().is_err());
        assert!(spec(&[("a", 2)], 0, 4).validate().is_err());
    }

    #[test]
    fn rate_encoding() {
        assert!(rate_encode(&[0.0], 100, 1).unwrap()[0].iter().all(|&s| s == 0));
        let n = 100_000;
        let rows = rate_encode(&[1.0, 0.4], n, 7).unwrap();
        let rate = |r: &Vec<u32>| r.iter().sum::<u32>() as f64 / n as f64;
        assert!((rate(&rows[0]) - 0.5).abs() < 0.005);
        // 3 sigma of Binomial(n, 0.2)
        assert!((rate(&rows[1]) - 0.2).abs() < 3.0 * (0.2f64 * 0.8 / n as f64).sqrt());
        assert_eq!(rows, rate_encode(&[1.0, 0.4], n, 7).unwrap());
        assert!(matches!(
            rate_encode(&[0.2, 1.5], 3, 0),
            Err(Error::PixelOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn label_encoding() {
        let t = label_encode(0, 2, 8).unwrap();
        assert_eq!(t[0], vec![1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(t[1], vec![0; 8]);
        assert_eq!(label_encode(1, 2, 3).unwrap()[1], vec![1, 0, 0]);
        assert!(label_encode(0, 2, 0).unwrap().iter().all(Vec::is_empty));
        assert!(matches!(label_encode(2, 2, 4), Err(Error::ClassOutOfRange { .. })));
    }

    #[test]
    fn decoding() {
        assert_eq!(rate_decode(&[vec![5, 2]]), vec![0]);
        assert_eq!(rate_decode(&[vec![3, 3]]), vec![0]);
        assert_eq!(rate_decode(&[vec![1, 4], vec![7, 0]]), vec![1, 0]);
    }

    #[test]
    fn decode_inverts_label_encoding() {
        for t_len in 1..20 {
            for size in 2..5 {
                for class in 0..size {
                    let trains = label_encode(class, size, t_len).unwrap();
                    let counts: Vec<usize> = trains.iter().map(|r| r.iter().sum::<u32>() as usize).collect();
                    assert_eq!(counts[class], t_len.div_ceil(4));
                    assert_eq!(counts.iter().sum::<usize>(), t_len.div_ceil(4));
                    assert_eq!(argmax_lowest(&counts), class);
                }
            }
        }
    }

    fn task_arch(s: &TwoLayerSpec, lateral: bool) -> Architecture {
        let (c, l) = build_two_layer_graphs(s, lateral).unwrap();
        Architecture::new(Alphabet::binary(), c, l, BasisBank::raised_cosine(2, 3).unwrap()).unwrap()
    }

    #[test]
    fn saturated_output_always_wins() {
        let s = spec(&[("digit", 2)], 2, 12);
        let a = task_arch(&s, true);
        let mut p = ModelParams::zeros(a.param_shape());
        p.theta_mut(2)[0] = -30.0;
        p.theta_mut(3)[0] = 30.0;
        for seed in 0..5 {
            let x = encode_example(&s, &[0.3, 0.9], &[0], seed).unwrap();
            assert_eq!(classify(&a, &p, &s, &x, seed, &GibbsConfig::default()).unwrap(), vec![1]);
        }
    }

    #[test]
    fn inhibition_excludes_joint_output_spikes() {
        let s = spec(&[("digit", 3)], 2, 200);
        let a = task_arch(&s, true);
        let mut p = ModelParams::zeros(a.param_shape());
        for u in 2..5 {
            p.theta_mut(u)[0] = 2.0;
        }
        for e in 0..a.lateral().n_edges() {
            p.u_mut(e)[0] = -50.0;
        }
        let x = encode_example(&s, &[1.0, 1.0], &[0], 3).unwrap();
        let y = sample_clamped(&a, &p, &x, &s.input_mask(), 4, &GibbsConfig::default()).unwrap();
        for t in 0..y.len() {
            assert!(y.step(t)[2..].iter().sum::<u32>() <= 1);
        }
        assert_eq!(y.row(0), x.row(0));
    }

    #[test]
    fn classification_is_deterministic() {
        let s = spec(&[("digit", 2)], 3, 20);
        let a = task_arch(&s, true);
        let mut r = rng::stream(2, "t", 0);
        let p = ModelParams::random(a.param_shape(), 1.0, 2.0, &mut r);
        let x = encode_example(&s, &[0.1, 0.5, 1.0], &[1], 9).unwrap();
        let g = GibbsConfig::default();
        assert_eq!(output_counts(&a, &p, &s, &x, 5, &g).unwrap(), output_counts(&a, &p, &s, &x, 5, &g).unwrap());
    }

    #[test]
    fn separable_two_pixel_task_is_learned() {
        let s = spec(&[("class", 2)], 2, 16);
        let a = task_arch(&s, true);
        let examples: Vec<(Vec<f64>, usize)> = (0..20)
            .map(|n| if n % 2 == 0 { (vec![1.0, 0.0], 0) } else { (vec![0.0, 1.0], 1) })
            .collect();
        let encoded: Vec<TimeSeries> = examples
            .iter()
            .enumerate()
            .map(|(n, (px, c))| encode_example(&s, px, &[*c], n as u64).unwrap())
            .collect();
        let labels: Vec<Vec<usize>> = examples.iter().map(|(_, c)| vec![*c]).collect();
        let cfg = TrainConfig {
            epochs: 200,
            seed: 1,
            ..Default::default()
        };
        let out = train_ml(&a, &encoded, &cfg).unwrap();
        let acc = accuracy(&a, &out.params, &s, &encoded, &labels, 3, &GibbsConfig::default()).unwrap();
        assert!(acc[0] >= 0.95, "{acc:?}");
        let before = mean_output_log_likelihood(&a, &cfg.initial_params(&a), &s, &encoded).unwrap();
        let after = mean_output_log_likelihood(&a, &out.params, &s, &encoded).unwrap();
        assert!(after > before);
    }
}
