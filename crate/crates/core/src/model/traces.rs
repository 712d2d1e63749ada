use crate::basis::BasisBank;
use crate::model::{Architecture, ModelParams, TimeSeries};

/// Filtered traces `alpha_{j,k}` of every unit, with the ring buffer of the
/// last `tau` symbols they are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    n_units: usize,
    k: usize,
    na: usize,
    tau: usize,
    history: Vec<u32>,
    head: usize,
    alpha: Vec<f64>,
}

impl TraceState {
    /// Traces of the all-zero history (before the first step).
    pub fn new(n_units: usize, bank: &BasisBank, na: usize) -> Self {
        Self {
            n_units,
            k: bank.k(),
            na,
            tau: bank.tau(),
            history: vec![0; n_units * bank.tau()],
            head: 0,
            alpha: vec![0.0; n_units * bank.k() * na],
        }
    }

    pub fn for_arch(arch: &Architecture) -> Self {
        Self::new(arch.n_units(), arch.basis(), arch.alphabet().na())
    }

    /// Traces at step `t` (0-based), i.e. after the symbols of steps
    /// `0..=t` of `x` have been observed.
    pub fn at(x: &TimeSeries, t: usize, bank: &BasisBank, na: usize) -> Self {
        let mut s = Self::new(x.n_units(), bank, na);
        let first = (t + 1).saturating_sub(bank.tau());
        for step in first..=t {
            s.shift_in(x.step(step));
        }
        s.recompute(bank);
        s
    }

    /// Observe one more step and refresh every trace.
    pub fn push(&mut self, bank: &BasisBank, symbols: &[u32]) {
        self.shift_in(symbols);
        self.recompute(bank);
    }

    fn shift_in(&mut self, symbols: &[u32]) {
        debug_assert_eq!(symbols.len(), self.n_units);
        self.head += 1;
        if self.head == self.tau {
            self.head = 0;
        }
        for (j, &x) in symbols.iter().enumerate() {
            self.history[j * self.tau + self.head] = x;
        }
    }

    /// Symbol of unit `j` observed `lag` steps before the most recent one.
    #[inline]
    fn lagged(&self, j: usize, lag: usize) -> u32 {
        let slot = if lag <= self.head {
            self.head - lag
        } else {
            self.head + self.tau - lag
        };
        self.history[j * self.tau + slot]
    }

    fn recompute(&mut self, bank: &BasisBank) {
        let mut alpha = std::mem::take(&mut self.alpha);
        self.convolve_into(bank, &mut alpha);
        self.alpha = alpha;
    }

    /// Convolve the ring buffer with the basis bank, summing lags in
    /// ascending order.
    fn convolve_into(&self, bank: &BasisBank, alpha: &mut [f64]) {
        alpha.fill(0.0);
        for j in 0..self.n_units {
            for lag in 0..self.tau {
                let x = self.lagged(j, lag) as usize;
                if x == 0 {
                    continue;
                }
                for k in 0..self.k {
                    alpha[(j * self.k + k) * self.na + x - 1] += bank.value(k, lag + 1);
                }
            }
        }
    }

    /// Return to the all-zero history.
    pub fn reset(&mut self) {
        self.history.fill(0);
        self.alpha.fill(0.0);
        self.head = 0;
    }

    /// Fresh convolution of the buffer, for comparing against the maintained
    /// traces.
    pub fn recomputed(&self, bank: &BasisBank) -> Vec<f64> {
        let mut alpha = vec![0.0; self.alpha.len()];
        self.convolve_into(bank, &mut alpha);
        alpha
    }

    /// `alpha_{j,k}` as an `na`-vector.
    #[inline]
    pub fn alpha(&self, j: usize, k: usize) -> &[f64] {
        let s = (j * self.k + k) * self.na;
        &self.alpha[s..s + self.na]
    }

    /// Every `alpha_{j,k}` of unit `j`, `k` major.
    #[inline]
    pub fn unit_alpha(&self, j: usize) -> &[f64] {
        let m = self.k * self.na;
        &self.alpha[j * m..(j + 1) * m]
    }

    pub fn all(&self) -> &[f64] {
        &self.alpha
    }
}

/// Generalized membrane potentials `r_i`, one `na`-vector per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    na: usize,
    data: Vec<f64>,
}

impl Potentials {
    pub fn zeros(n_units: usize, na: usize) -> Self {
        Self {
            na,
            data: vec![0.0; n_units * na],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let na = rows.first().map_or(0, Vec::len);
        Self {
            na,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    #[inline]
    pub fn unit(&self, i: usize) -> &[f64] {
        &self.data[i * self.na..(i + 1) * self.na]
    }

    pub fn unit_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.na..(i + 1) * self.na]
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn n_units(&self) -> usize {
        self.data.len().checked_div(self.na).unwrap_or(0)
    }
}

/// `r_i = theta_i + sum_{j in P_i} sum_k V_{j,i,k}^T alpha_{j,k}`, with
/// `traces` holding the state up to the previous step.
pub fn membrane_potentials(
    arch: &Architecture,
    params: &ModelParams,
    traces: &TraceState,
    out: &mut Potentials,
) {
    let na = arch.alphabet().na();
    for i in 0..arch.n_units() {
        let r = out.unit_mut(i);
        r.copy_from_slice(params.theta(i));
        for &(e, j) in arch.causal().incoming(i) {
            let alpha = traces.unit_alpha(j);
            let v = params.v_edge(e);
            if na == 1 {
                r[0] += alpha.iter().zip(v).map(|(a, w)| a * w).sum::<f64>();
                continue;
            }
            // alpha is (k, a') and v is (k, a', a), so they share the
            // leading (k, a') index
            for (&al, row) in alpha.iter().zip(v.chunks_exact(na)) {
                if al == 0.0 {
                    continue;
                }
                for (ra, &w) in r.iter_mut().zip(row) {
                    *ra += w * al;
                }
            }
        }
    }
}
