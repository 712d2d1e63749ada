//! Negative-phase expectations: node and lateral-pair statistics under the
//! per-step conditional, computed exactly by enumerating each lateral
//! component or estimated by systematic-scan Gibbs sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    enumerate_component, Architecture, ComponentEnumeration, ModelParams, Potentials,
    ENUMERATION_BUDGET,
};
use crate::rng;

/// How the model expectations are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegPhase {
    /// Enumerate every component; fail if one is over budget.
    Exact,
    /// Gibbs sampling on every component.
    Gibbs,
    /// Exact within budget, Gibbs otherwise.
    #[default]
    Auto,
    /// Reserved, not implemented.
    ContrastiveDivergence,
}

impl std::str::FromStr for NegPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(NegPhase::Exact),
            "gibbs" => Ok(NegPhase::Gibbs),
            "auto" => Ok(NegPhase::Auto),
            "cd" | "contrastive_divergence" => Ok(NegPhase::ContrastiveDivergence),
            other => Err(Error::Config(format!("unknown negative phase `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            burn_in: 200,
            thin: 1,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.thin == 0 {
            return Err(Error::Config("gibbs n_samples and thin must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Gibbs,
}

/// Model expectations for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepExpectations {
    na: usize,
    node: Vec<f64>,
    pair: Vec<f64>,
    methods: Vec<Method>,
    log_z: Vec<Option<f64>>,
}

impl StepExpectations {
    pub fn new(arch: &Architecture) -> Self {
        let na = arch.alphabet().na();
        let n_comp = arch.reach().components().len();
        Self {
            na,
            node: vec![0.0; arch.n_units() * na],
            pair: vec![0.0; arch.lateral().n_edges() * na * na],
            methods: vec![Method::Exact; n_comp],
            log_z: vec![None; n_comp],
        }
    }

    /// `E[s_i]`.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.node[i * self.na..(i + 1) * self.na]
    }

    /// `E[s_a s_b^T]` for canonical lateral edge `e = (a, b)`, row-major.
    pub fn pair(&self, e: usize) -> &[f64] {
        let m = self.na * self.na;
        &self.pair[e * m..(e + 1) * m]
    }

    pub fn method(&self, component: usize) -> Method {
        self.methods[component]
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    /// Log-partition function of a component when it was enumerated.
    pub fn log_z(&self, component: usize) -> Option<f64> {
        self.log_z[component]
    }

    fn clear_component(&mut self, arch: &Architecture, c: usize) {
        let na = self.na;
        for &u in &arch.reach().components()[c] {
            self.node[u * na..(u + 1) * na].fill(0.0);
        }
        for &e in arch.reach().component_edges(c) {
            self.pair[e * na * na..(e + 1) * na * na].fill(0.0);
        }
    }

    fn accumulate(&mut self, arch: &Architecture, c: usize, x: &[u32], w: f64) {
        let na = self.na;
        for &u in &arch.reach().components()[c] {
            if x[u] > 0 {
                self.node[u * na + x[u] as usize - 1] += w;
            }
        }
        for &e in arch.reach().component_edges(c) {
            let (a, b) = arch.lateral().edges()[e];
            if x[a] > 0 && x[b] > 0 {
                self.pair[e * na * na + (x[a] as usize - 1) * na + x[b] as usize - 1] += w;
            }
        }
    }

    fn fill_exact(&mut self, arch: &Architecture, en: &ComponentEnumeration, scratch: &mut [u32]) {
        let c = en.component;
        self.clear_component(arch, c);
        for n in 0..en.len() {
            let p = en.prob(n);
            if p == 0.0 {
                continue;
            }
            en.write(n, scratch);
            self.accumulate(arch, c, scratch, p);
        }
        self.methods[c] = Method::Exact;
        self.log_z[c] = Some(en.log_z);
    }

    /// Closed-form softmax for a unit without lateral neighbours.
    fn fill_singleton(&mut self, c: usize, u: usize, r: &[f64]) {
        let m = r.iter().copied().fold(0.0f64, f64::max);
        let z: f64 = (-m).exp() + r.iter().map(|&v| (v - m).exp()).sum::<f64>();
        let na = self.na;
        for (a, &v) in r.iter().enumerate() {
            self.node[u * na + a] = (v - m).exp() / z;
        }
        self.methods[c] = Method::Exact;
        self.log_z[c] = Some(m + z.ln());
    }
}

fn probabilities(en: &ComponentEnumeration) -> impl Iterator<Item = (usize, f64)> + '_ {
    (0..en.len()).map(|n| (n, en.prob(n)))
}

/// `p(x_i = c | r)` for every symbol `c`, by summing the enumerated joint of
/// `i`'s lateral component over the other members.
pub fn exact_node_marginal(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    i: usize,
) -> Result<Vec<f64>> {
    if i >= arch.n_units() {
        return Err(Error::UnitOutOfRange {
            unit: i,
            n_units: arch.n_units(),
        });
    }
    let c = arch.reach().component_of(i);
    let en = enumerate_component(arch, params, r, c, &vec![0; arch.n_units()], None)?;
    let m = en.free.iter().position(|&u| u == i).expect("unit in its component");
    let mut out = vec![0.0; arch.alphabet().size()];
    for (n, p) in probabilities(&en) {
        out[en.symbol(n, m) as usize] += p;
    }
    Ok(out)
}

/// Joint table `p(x_j = a, x_i = b | r)` indexed `[a][b]` for a lateral edge.
pub fn exact_pair_marginal(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    j: usize,
    i: usize,
) -> Result<Vec<Vec<f64>>> {
    if arch.lateral().edge_index(j, i).is_none() {
        return Err(Error::NotLateralEdge(j, i));
    }
    let c = arch.reach().component_of(i);
    let en = enumerate_component(arch, params, r, c, &vec![0; arch.n_units()], None)?;
    let mj = en.free.iter().position(|&u| u == j).expect("unit in component");
    let mi = en.free.iter().position(|&u| u == i).expect("unit in component");
    let cs = arch.alphabet().size();
    let mut out = vec![vec![0.0; cs]; cs];
    for (n, p) in probabilities(&en) {
        out[en.symbol(n, mj) as usize][en.symbol(n, mi) as usize] += p;
    }
    Ok(out)
}

/// Sample from `p(x_i | x_{L_i}, r_i)` in place.
fn resample_unit(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    i: usize,
    x: &mut [u32],
    field: &mut [f64],
    rng: &mut ChaCha8Rng,
) {
    let na = arch.alphabet().na();
    field.copy_from_slice(r.unit(i));
    for &(e, nb) in arch.lateral().adjacency(i) {
        let s = x[nb] as usize;
        if s == 0 {
            continue;
        }
        let u = params.u(e);
        if nb < i {
            // energy s_nb^T U s_i: row s-1 of U
            for (f, &w) in field.iter_mut().zip(&u[(s - 1) * na..s * na]) {
                *f += w;
            }
        } else {
            // energy s_i^T U s_nb: column s-1 of U
            for (a, f) in field.iter_mut().enumerate() {
                *f += u[a * na + s - 1];
            }
        }
    }
    let m = field.iter().copied().fold(0.0f64, f64::max);
    let z = (-m).exp() + field.iter().map(|&v| (v - m).exp()).sum::<f64>();
    let mut u = rng.random::<f64>() * z;
    u -= (-m).exp();
    if u < 0.0 {
        x[i] = 0;
        return;
    }
    let mut last = 0;
    for (a, &v) in field.iter().enumerate() {
        let w = (v - m).exp();
        if w > 0.0 {
            last = a + 1;
        }
        u -= w;
        if u < 0.0 {
            x[i] = a as u32 + 1;
            return;
        }
    }
    x[i] = last as u32;
}

fn sweep(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    free: &[usize],
    x: &mut [u32],
    field: &mut [f64],
    rng: &mut ChaCha8Rng,
) {
    for &i in free {
        resample_unit(arch, params, r, i, x, field, rng);
    }
}

fn free_units(arch: &Architecture, c: usize, clamped: Option<&[bool]>) -> Vec<usize> {
    arch.reach().components()[c]
        .iter()
        .copied()
        .filter(|&u| clamped.is_none_or(|m| !m[u]))
        .collect()
}

/// Run `sweeps` Gibbs sweeps over component `c` from a uniformly random
/// start, leaving the final state in `x`. Clamped units are held fixed.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_draw(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    c: usize,
    x: &mut [u32],
    clamped: Option<&[bool]>,
    sweeps: usize,
    rng: &mut ChaCha8Rng,
) {
    let free = free_units(arch, c, clamped);
    let cs = arch.alphabet().size() as u32;
    for &u in &free {
        x[u] = rng.random_range(0..cs);
    }
    let mut field = vec![0.0; arch.alphabet().na()];
    for _ in 0..sweeps {
        sweep(arch, params, r, &free, x, &mut field, rng);
    }
}

fn gibbs_into(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    c: usize,
    cfg: &GibbsConfig,
    rng: &mut ChaCha8Rng,
    out: &mut StepExpectations,
) {
    let mut x = vec![0u32; arch.n_units()];
    gibbs_draw(arch, params, r, c, &mut x, None, cfg.burn_in, rng);
    let free = free_units(arch, c, None);
    let mut field = vec![0.0; arch.alphabet().na()];
    out.clear_component(arch, c);
    let w = 1.0 / cfg.n_samples as f64;
    for _ in 0..cfg.n_samples {
        for _ in 0..cfg.thin {
            sweep(arch, params, r, &free, &mut x, &mut field, rng);
        }
        out.accumulate(arch, c, &x, w);
    }
    out.methods[c] = Method::Gibbs;
    out.log_z[c] = None;
}

/// Gibbs estimate of the expectations of component `c`; other entries of the
/// result are zero. The chain is seeded from `(cfg.seed, c)`.
pub fn gibbs_expectations(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    c: usize,
    cfg: &GibbsConfig,
) -> StepExpectations {
    let mut out = StepExpectations::new(arch);
    let mut rng = rng::stream(cfg.seed, "gibbs", c as u64);
    gibbs_into(arch, params, r, c, cfg, &mut rng, &mut out);
    out
}

/// Expectations of every component for one step, dispatched per `mode`.
/// Gibbs chains for step `t` use the stream `(cfg.seed, t, component)`.
pub fn step_expectations(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    mode: NegPhase,
    cfg: &GibbsConfig,
    t: u64,
) -> Result<StepExpectations> {
    let mut out = StepExpectations::new(arch);
    step_expectations_into(arch, params, r, mode, cfg, t, &mut out)?;
    Ok(out)
}

pub fn step_expectations_into(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    mode: NegPhase,
    cfg: &GibbsConfig,
    t: u64,
    out: &mut StepExpectations,
) -> Result<()> {
    if mode == NegPhase::ContrastiveDivergence {
        return Err(Error::Unsupported("contrastive divergence negative phase".into()));
    }
    let mut scratch = vec![0u32; arch.n_units()];
    let step_seed = rng::derive_seed(cfg.seed, "gibbs-step", t);
    for (c, units) in arch.reach().components().iter().enumerate() {
        let fits = arch
            .configurations(units.len())
            .is_some_and(|n| n <= ENUMERATION_BUDGET);
        let exact = match mode {
            NegPhase::Exact => true,
            NegPhase::Gibbs => false,
            _ => fits,
        };
        if exact {
            if units.len() == 1 {
                out.fill_singleton(c, units[0], r.unit(units[0]));
            } else {
                let en = enumerate_component(arch, params, r, c, &scratch, None)?;
                out.fill_exact(arch, &en, &mut scratch);
            }
        } else {
            let mut rng = rng::stream(step_seed, "component", c as u64);
            gibbs_into(arch, params, r, c, cfg, &mut rng, out);
        }
    }
    Ok(())
}
