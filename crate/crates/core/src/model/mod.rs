//! Parameters, traces, per-step conditionals, likelihood and sampling.
//!
//! At every step the units are jointly drawn from
//! `p(x_t | r_t) ∝ exp{ Σ_i r_i·s_i + Σ_{a<b lateral} s_a^T U_ab s_b }`
//! where `s_i` is the one-hot sufficient statistic of unit `i` (symbol 0 maps
//! to the zero vector) and `r_i` is its membrane potential, an affine function
//! of the filtered traces of the unit's causal parents. The joint factorizes
//! over the connected components of the lateral graph, so normalizers are
//! computed per component.

mod params;
mod sampling;
mod series;
mod traces;

pub use params::{transpose, Block, GradientBundle, ModelParams, ParamShape};
pub use sampling::{sample_clamped, sample_sequence};
pub use series::TimeSeries;
pub use traces::{membrane_potentials, Potentials, TraceState};

use crate::basis::BasisBank;
use crate::error::{Error, Result};
use crate::graph::{reachable_sets, CausalGraph, LateralGraph, ReachableSets};

/// Components with more than this many joint configurations are not
/// enumerated.
pub const ENUMERATION_BUDGET: usize = 4096;

/// Shared alphabet `{0, .., C-1}`; statistics have `C - 1` entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Config(format!("alphabet size must be >= 2, got {size}")));
        }
        Ok(Self { size })
    }

    pub fn binary() -> Self {
        Self { size: 2 }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn na(&self) -> usize {
        self.size - 1
    }
}

/// One-hot sufficient statistic of `x`.
pub fn sufficient_stats(x: usize, alphabet: Alphabet) -> Result<Vec<f64>> {
    if x >= alphabet.size() {
        return Err(Error::SymbolOutOfRange {
            symbol: x,
            alphabet: alphabet.size(),
        });
    }
    let mut s = vec![0.0; alphabet.na()];
    if x > 0 {
        s[x - 1] = 1.0;
    }
    Ok(s)
}

/// Everything about a model except its parameters: alphabet, both graphs,
/// the lateral components and the basis bank.
#[derive(Debug, Clone)]
pub struct Architecture {
    alphabet: Alphabet,
    causal: CausalGraph,
    lateral: LateralGraph,
    reach: ReachableSets,
    basis: BasisBank,
}

impl Architecture {
    pub fn new(
        alphabet: Alphabet,
        causal: CausalGraph,
        lateral: LateralGraph,
        basis: BasisBank,
    ) -> Result<Self> {
        if causal.n_units() != lateral.n_units() {
            return Err(Error::ShapeMismatch(format!(
                "causal graph has {} units, lateral graph {}",
                causal.n_units(),
                lateral.n_units()
            )));
        }
        let reach = reachable_sets(&lateral);
        Ok(Self {
            alphabet,
            causal,
            lateral,
            reach,
            basis,
        })
    }

    pub fn n_units(&self) -> usize {
        self.causal.n_units()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn causal(&self) -> &CausalGraph {
        &self.causal
    }

    pub fn lateral(&self) -> &LateralGraph {
        &self.lateral
    }

    pub fn reach(&self) -> &ReachableSets {
        &self.reach
    }

    pub fn basis(&self) -> &BasisBank {
        &self.basis
    }

    pub fn param_shape(&self) -> ParamShape {
        ParamShape {
            n_units: self.n_units(),
            na: self.alphabet.na(),
            n_causal: self.causal.n_edges(),
            k: self.basis.k(),
            n_lateral: self.lateral.n_edges(),
        }
    }

    pub fn check_params(&self, params: &ModelParams) -> Result<()> {
        if *params.shape() != self.param_shape() {
            return Err(Error::ShapeMismatch(format!(
                "parameters {:?} do not fit architecture {:?}",
                params.shape(),
                self.param_shape()
            )));
        }
        Ok(())
    }

    pub fn check_series(&self, x: &TimeSeries) -> Result<()> {
        if x.n_units() != self.n_units() {
            return Err(Error::ShapeMismatch(format!(
                "series has {} units, model {}",
                x.n_units(),
                self.n_units()
            )));
        }
        x.check_alphabet(self.alphabet.size())
    }

    /// Joint configuration count of component `c` restricted to `free_units`
    /// of its members, or `None` on overflow.
    pub fn configurations(&self, free_units: usize) -> Option<usize> {
        self.alphabet.size().checked_pow(free_units as u32)
    }

    /// Set `U` for the lateral edge `{a, b}` given as it enters the energy,
    /// `s_a^T m s_b`. Stored canonically, transposing when `a > b`.
    pub fn set_lateral(&self, params: &mut ModelParams, a: usize, b: usize, m: &[f64]) -> Result<()> {
        let e = self
            .lateral
            .edge_index(a, b)
            .ok_or(Error::NotLateralEdge(a, b))?;
        let na = self.alphabet.na();
        if m.len() != na * na {
            return Err(Error::ShapeMismatch(format!("lateral matrix needs {} entries", na * na)));
        }
        let stored = if a < b { m.to_vec() } else { transpose(m, na) };
        params.u_mut(e).copy_from_slice(&stored);
        Ok(())
    }

    /// `U` for `{a, b}` oriented so that the energy is `s_a^T U s_b`.
    pub fn lateral_matrix(&self, params: &ModelParams, a: usize, b: usize) -> Result<Vec<f64>> {
        let e = self
            .lateral
            .edge_index(a, b)
            .ok_or(Error::NotLateralEdge(a, b))?;
        let u = params.u(e);
        Ok(if a < b {
            u.to_vec()
        } else {
            transpose(u, self.alphabet.na())
        })
    }
}

/// `U_e[x_a - 1, x_b - 1]`, or 0 when either symbol is 0.
#[inline]
pub(crate) fn lateral_term(u: &[f64], na: usize, xa: u32, xb: u32) -> f64 {
    if xa == 0 || xb == 0 {
        0.0
    } else {
        u[(xa as usize - 1) * na + xb as usize - 1]
    }
}

#[inline]
pub(crate) fn potential_term(r: &[f64], x: u32) -> f64 {
    if x == 0 {
        0.0
    } else {
        r[x as usize - 1]
    }
}

/// Unnormalized log-probability of `x_t`:
/// `Σ_i r_i·s_i + Σ_{canonical (a,b)} s_a^T U_ab s_b`.
pub fn step_energy(arch: &Architecture, params: &ModelParams, r: &Potentials, x_t: &[u32]) -> f64 {
    let na = arch.alphabet.na();
    let mut e: f64 = x_t
        .iter()
        .enumerate()
        .map(|(i, &x)| potential_term(r.unit(i), x))
        .sum();
    for (idx, &(a, b)) in arch.lateral.edges().iter().enumerate() {
        e += lateral_term(params.u(idx), na, x_t[a], x_t[b]);
    }
    e
}

/// Energy of component `c` alone under the full step assignment `x_t`.
pub fn component_energy(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    c: usize,
    x_t: &[u32],
) -> f64 {
    let na = arch.alphabet.na();
    let mut e: f64 = arch.reach.components()[c]
        .iter()
        .map(|&i| potential_term(r.unit(i), x_t[i]))
        .sum();
    for &idx in arch.reach.component_edges(c) {
        let (a, b) = arch.lateral.edges()[idx];
        e += lateral_term(params.u(idx), na, x_t[a], x_t[b]);
    }
    e
}

/// All joint configurations of one lateral component and their log-weights.
///
/// Configuration `n` assigns `free[m]` the symbol `(n / C^m) mod C`. Units of
/// the component that are clamped keep the symbol from the step vector they
/// were enumerated with.
#[derive(Debug, Clone)]
pub struct ComponentEnumeration {
    pub component: usize,
    pub free: Vec<usize>,
    pub log_weights: Vec<f64>,
    pub log_z: f64,
    alphabet: usize,
}

impl ComponentEnumeration {
    #[inline]
    pub fn symbol(&self, config: usize, free_index: usize) -> u32 {
        ((config / self.alphabet.pow(free_index as u32)) % self.alphabet) as u32
    }

    /// Probability of configuration `n`.
    #[inline]
    pub fn prob(&self, config: usize) -> f64 {
        (self.log_weights[config] - self.log_z).exp()
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Write configuration `n` into a full step vector.
    pub fn write(&self, config: usize, x_t: &mut [u32]) {
        for (m, &u) in self.free.iter().enumerate() {
            x_t[u] = self.symbol(config, m);
        }
    }
}

/// Enumerate component `c`. With `clamped = Some(mask)`, units whose mask is
/// set are held at their value in `base`; otherwise `base` is only used as
/// scratch.
pub fn enumerate_component(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    c: usize,
    base: &[u32],
    clamped: Option<&[bool]>,
) -> Result<ComponentEnumeration> {
    let units = &arch.reach.components()[c];
    let free: Vec<usize> = units
        .iter()
        .copied()
        .filter(|&u| clamped.is_none_or(|m| !m[u]))
        .collect();
    let cs = arch.alphabet.size();
    let n_conf = match arch.configurations(free.len()) {
        Some(n) if n <= ENUMERATION_BUDGET => n,
        _ => {
            return Err(Error::ComponentTooLarge {
                size: free.len(),
                configurations: (cs as f64).powi(free.len() as i32),
                budget: ENUMERATION_BUDGET,
            })
        }
    };
    let mut x = base.to_vec();
    let mut log_weights = Vec::with_capacity(n_conf);
    for n in 0..n_conf {
        let mut rem = n;
        for &u in &free {
            x[u] = (rem % cs) as u32;
            rem /= cs;
        }
        log_weights.push(component_energy(arch, params, r, c, &x));
    }
    let log_z = log_sum_exp(&log_weights);
    Ok(ComponentEnumeration {
        component: c,
        free,
        log_weights,
        log_z,
        alphabet: cs,
    })
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// `log p(x_t restricted to component c | r_t)`. Units without lateral
/// neighbours use the closed-form log-softmax.
pub fn component_log_prob(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    c: usize,
    x_t: &[u32],
) -> Result<f64> {
    let units = &arch.reach.components()[c];
    if let [u] = units[..] {
        let ru = r.unit(u);
        let m = ru.iter().copied().fold(0.0f64, f64::max);
        let z = (-m).exp() + ru.iter().map(|&v| (v - m).exp()).sum::<f64>();
        return Ok(potential_term(ru, x_t[u]) - m - z.ln());
    }
    let en = enumerate_component(arch, params, r, c, x_t, None)?;
    Ok(component_energy(arch, params, r, c, x_t) - en.log_z)
}

/// `log p(x_t restricted to component c | r_t)` for every component.
pub fn component_log_probs(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    x_t: &[u32],
) -> Result<Vec<f64>> {
    (0..arch.reach.components().len())
        .map(|c| component_log_prob(arch, params, r, c, x_t))
        .collect()
}

/// `log p(x_t | r_t)`, normalized per lateral component.
pub fn step_log_prob(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    x_t: &[u32],
) -> Result<f64> {
    Ok(component_log_probs(arch, params, r, x_t)?.iter().sum())
}

/// `Σ_t log p(x_t | r_t)` with potentials driven by the observed history.
pub fn sequence_log_likelihood(arch: &Architecture, params: &ModelParams, x: &TimeSeries) -> Result<f64> {
    sequence_log_likelihood_of(arch, params, x, None)
}

/// Log-likelihood restricted to the lateral components whose units all lie
/// in `units` (every component when `None`). Because components are
/// conditionally independent given the potentials, this is the conditional
/// log-likelihood of those units given the full history.
pub fn sequence_log_likelihood_of(
    arch: &Architecture,
    params: &ModelParams,
    x: &TimeSeries,
    units: Option<&[bool]>,
) -> Result<f64> {
    arch.check_params(params)?;
    arch.check_series(x)?;
    let comps: Vec<usize> = (0..arch.reach.components().len())
        .filter(|&c| units.is_none_or(|m| arch.reach.components()[c].iter().all(|&u| m[u])))
        .collect();
    let mut traces = TraceState::for_arch(arch);
    let mut r = Potentials::zeros(arch.n_units(), arch.alphabet.na());
    let mut total = 0.0;
    for t in 0..x.len() {
        membrane_potentials(arch, params, &traces, &mut r);
        let x_t = x.step(t);
        for &c in &comps {
            let en = enumerate_component(arch, params, &r, c, x_t, None)?;
            total += component_energy(arch, params, &r, c, x_t) - en.log_z;
        }
        traces.push(&arch.basis, x_t);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisBank;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn arch(n: usize, c: usize, causal: &[(usize, usize)], lateral: &[(usize, usize)], bank: BasisBank) -> Architecture {
        Architecture::new(
            Alphabet::new(c).unwrap(),
            CausalGraph::new(n, causal.iter().copied()).unwrap(),
            LateralGraph::new(n, lateral.iter().copied()).unwrap(),
            bank,
        )
        .unwrap()
    }

    fn unit_bank() -> BasisBank {
        BasisBank::custom(vec![vec![1.0]]).unwrap()
    }

    #[test]
    fn one_hot_statistics() {
        assert_eq!(sufficient_stats(1, Alphabet::binary()).unwrap(), vec![1.0]);
        let c4 = Alphabet::new(4).unwrap();
        assert_eq!(sufficient_stats(0, c4).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(sufficient_stats(2, c4).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(matches!(
            sufficient_stats(4, c4),
            Err(Error::SymbolOutOfRange { symbol: 4, alphabet: 4 })
        ));
        assert!(Alphabet::new(1).is_err());
    }

    #[test]
    fn potentials_without_causal_input_equal_theta() {
        let a = arch(2, 2, &[(0, 1)], &[], unit_bank());
        let mut p = ModelParams::zeros(a.param_shape());
        p.theta_mut(0)[0] = 0.3;
        p.theta_mut(1)[0] = -0.7;
        let x = TimeSeries::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        let tr = TraceState::at(&x, 1, a.basis(), 1);
        let mut r = Potentials::zeros(2, 1);
        membrane_potentials(&a, &p, &tr, &mut r);
        assert_eq!(r.unit(0), &[0.3]);
        assert_eq!(r.unit(1), &[-0.7]);

        let empty = arch(2, 2, &[], &[], unit_bank());
        membrane_potentials(&empty, &p_for(&empty, &[0.3, -0.7]), &tr, &mut r);
        assert_eq!(r.unit(1), &[-0.7]);
    }

    fn p_for(a: &Architecture, theta: &[f64]) -> ModelParams {
        let mut p = ModelParams::zeros(a.param_shape());
        for (i, &t) in theta.iter().enumerate() {
            p.theta_mut(i)[0] = t;
        }
        p
    }

    #[test]
    fn potential_with_one_causal_edge() {
        let bank = BasisBank::custom(vec![vec![0.5, 0.25]]).unwrap();
        let a = arch(2, 2, &[(0, 1)], &[], bank);
        let mut p = ModelParams::zeros(a.param_shape());
        p.theta_mut(1)[0] = 0.1;
        p.v_mut(0, 0)[0] = 2.0;
        let x = TimeSeries::from_rows(&[vec![1, 1, 0], vec![0, 0, 0]]).unwrap();
        let tr = TraceState::at(&x, 1, a.basis(), 1);
        assert_eq!(tr.alpha(0, 0), &[0.75]);
        let mut r = Potentials::zeros(2, 1);
        membrane_potentials(&a, &p, &tr, &mut r);
        assert_abs_diff_eq!(r.unit(1)[0], 1.6, epsilon = 1e-15);
    }

    #[test]
    fn energies() {
        let a = arch(2, 2, &[], &[(0, 1)], unit_bank());
        let mut p = ModelParams::zeros(a.param_shape());
        p.u_mut(0)[0] = 2f64.ln();
        let r = Potentials::zeros(2, 1);
        assert_eq!(step_energy(&a, &p, &r, &[0, 0]), 0.0);
        assert_abs_diff_eq!(step_energy(&a, &p, &r, &[1, 1]), 2f64.ln());

        let b = arch(3, 2, &[], &[], unit_bank());
        let pb = ModelParams::zeros(b.param_shape());
        let r = Potentials::from_rows(&[vec![0.5], vec![-1.0], vec![2.0]]);
        assert_abs_diff_eq!(step_energy(&b, &pb, &r, &[1, 0, 1]), 2.5);
    }

    #[test]
    fn step_log_prob_examples() {
        let a = arch(1, 2, &[], &[], unit_bank());
        let p = ModelParams::zeros(a.param_shape());
        let r = Potentials::from_rows(&[vec![0.0]]);
        for x in [0, 1] {
            assert_abs_diff_eq!(step_log_prob(&a, &p, &r, &[x]).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
        }
        let r = Potentials::from_rows(&[vec![3f64.ln()]]);
        assert_abs_diff_eq!(step_log_prob(&a, &p, &r, &[1]).unwrap(), 0.75f64.ln(), epsilon = 1e-15);

        let a = arch(2, 2, &[], &[(0, 1)], unit_bank());
        let mut p = ModelParams::zeros(a.param_shape());
        p.u_mut(0)[0] = 2f64.ln();
        let r = Potentials::zeros(2, 1);
        let pr = |x: [u32; 2]| step_log_prob(&a, &p, &r, &x).unwrap().exp();
        assert_abs_diff_eq!(pr([1, 1]), 0.4, epsilon = 1e-15);
        for x in [[0, 0], [0, 1], [1, 0]] {
            assert_abs_diff_eq!(pr(x), 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn oversized_component_is_rejected() {
        let edges: Vec<(usize, usize)> = (0..12).map(|i| (i, i + 1)).collect();
        let a = arch(13, 2, &[], &edges, unit_bank());
        let p = ModelParams::zeros(a.param_shape());
        let r = Potentials::zeros(13, 1);
        assert!(matches!(
            step_log_prob(&a, &p, &r, &[0; 13]),
            Err(Error::ComponentTooLarge { size: 13, .. })
        ));
        // 12 binary units = 4096 configurations, still exact
        let a = arch(12, 2, &[], &edges[..11], unit_bank());
        let p = ModelParams::zeros(a.param_shape());
        assert!(step_log_prob(&a, &p, &Potentials::zeros(12, 1), &[0; 12]).is_ok());
    }

    #[test]
    fn empty_and_uniform_sequences() {
        let a = arch(1, 2, &[], &[], unit_bank());
        let p = ModelParams::zeros(a.param_shape());
        assert_eq!(sequence_log_likelihood(&a, &p, &TimeSeries::zeros(1, 0)).unwrap(), 0.0);
        let x = TimeSeries::from_rows(&[vec![1, 0, 1, 1, 0, 0, 1]]).unwrap();
        assert_abs_diff_eq!(
            sequence_log_likelihood(&a, &p, &x).unwrap(),
            7.0 * 0.5f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lateral_orientation_is_transposed() {
        let bank = unit_bank();
        let a = arch(2, 3, &[], &[(0, 1)], bank.clone());
        let b = arch(2, 3, &[], &[(1, 0)], bank);
        let m = [0.3, -1.2, 0.7, 2.0];
        let mut pa = ModelParams::zeros(a.param_shape());
        a.set_lateral(&mut pa, 0, 1, &m).unwrap();
        let mut pb = ModelParams::zeros(b.param_shape());
        b.set_lateral(&mut pb, 1, 0, &transpose(&m, 2)).unwrap();
        let r = Potentials::from_rows(&[vec![0.1, 0.2], vec![-0.3, 0.4]]);
        for x0 in 0..3 {
            for x1 in 0..3 {
                assert_eq!(
                    step_energy(&a, &pa, &r, &[x0, x1]),
                    step_energy(&b, &pb, &r, &[x0, x1])
                );
            }
        }
        assert_eq!(a.lateral_matrix(&pa, 1, 0).unwrap(), transpose(&m, 2));
    }

    fn random_model(n: usize, c: usize, seed: u64) -> (Architecture, ModelParams, Potentials) {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, "test", 0);
        let mut lateral = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.5) {
                    lateral.push((a, b));
                }
            }
        }
        let arch = arch(n, c, &[], &lateral, unit_bank());
        let p = ModelParams::random(arch.param_shape(), 1.0, 2.0, &mut rng);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..c - 1).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        (arch, p, Potentials::from_rows(&rows))
    }

    fn all_configs(n: usize, c: usize) -> Vec<Vec<u32>> {
        let total = c.pow(n as u32);
        (0..total)
            .map(|mut k| {
                (0..n)
                    .map(|_| {
                        let s = (k % c) as u32;
                        k /= c;
                        s
                    })
                    .collect()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn conditional_is_normalized(n in 1usize..5, c in 2usize..4, seed in any::<u64>()) {
            let (a, p, r) = random_model(n, c, seed);
            let total: f64 = all_configs(n, c)
                .iter()
                .map(|x| step_log_prob(&a, &p, &r, x).unwrap().exp())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn components_do_not_interact(n in 2usize..5, c in 2usize..4, seed in any::<u64>()) {
            let (a, p, r) = random_model(n, c, seed);
            let configs = all_configs(n, c);
            let base = component_log_probs(&a, &p, &r, &configs[0]).unwrap();
            for x in &configs {
                let lp = component_log_probs(&a, &p, &r, x).unwrap();
                for (ci, comp) in a.reach().components().iter().enumerate() {
                    if comp.iter().all(|&u| x[u] == configs[0][u]) {
                        prop_assert_eq!(lp[ci], base[ci]);
                    }
                }
            }
        }

        #[test]
        fn binary_isolated_unit_is_logistic(r0 in -6.0f64..6.0) {
            let a = arch(1, 2, &[], &[], unit_bank());
            let p = ModelParams::zeros(a.param_shape());
            let r = Potentials::from_rows(&[vec![r0]]);
            let p1 = step_log_prob(&a, &p, &r, &[1]).unwrap().exp();
            prop_assert!((p1 - 1.0 / (1.0 + (-r0).exp())).abs() < 1e-12);
        }
    }
}
