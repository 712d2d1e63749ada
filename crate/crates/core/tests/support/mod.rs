//! Brute-force reference implementation used by the acceptance checks.
//!
//! Everything here works from the definitions directly: traces are summed
//! over lags instead of kept in a ring buffer, and every step is normalized
//! over the full joint of all units rather than per lateral component.
#![allow(dead_code)]

use dynef::model::{Architecture, ModelParams, TimeSeries};

/// One-hot statistic over symbols `1..C`.
pub fn stat(x: u32, na: usize) -> Vec<f64> {
    let mut s = vec![0.0; na];
    if x > 0 {
        s[x as usize - 1] = 1.0;
    }
    s
}

/// `r_i(t)` for every unit, from the raw history of `x` before step `t`.
pub fn potentials(arch: &Architecture, p: &ModelParams, x: &TimeSeries, t: usize) -> Vec<Vec<f64>> {
    let na = arch.alphabet().na();
    let basis = arch.basis();
    let mut r: Vec<Vec<f64>> = (0..arch.n_units()).map(|i| p.theta(i).to_vec()).collect();
    for (e, &(j, i)) in arch.causal().edges().iter().enumerate() {
        for k in 0..basis.k() {
            let mut alpha = vec![0.0; na];
            for lag in 1..=basis.tau() {
                if lag > t {
                    break;
                }
                let s = stat(x.get(j, t - lag), na);
                for a in 0..na {
                    alpha[a] += basis.value(k, lag) * s[a];
                }
            }
            let v = p.v(e, k);
            for a in 0..na {
                for b in 0..na {
                    r[i][a] += v[b * na + a] * alpha[b];
                }
            }
        }
    }
    r
}

/// Unnormalized log-probability of a full step configuration.
pub fn energy(arch: &Architecture, p: &ModelParams, r: &[Vec<f64>], y: &[u32]) -> f64 {
    let na = arch.alphabet().na();
    let mut e = 0.0;
    for (i, ri) in r.iter().enumerate() {
        if y[i] > 0 {
            e += ri[y[i] as usize - 1];
        }
    }
    for (l, &(a, b)) in arch.lateral().edges().iter().enumerate() {
        if y[a] > 0 && y[b] > 0 {
            e += p.u(l)[(y[a] as usize - 1) * na + (y[b] as usize - 1)];
        }
    }
    e
}

/// Every configuration of `n` units over `c` symbols.
pub fn configurations(n: usize, c: usize) -> Vec<Vec<u32>> {
    let total = c.pow(n as u32);
    (0..total)
        .map(|mut m| {
            (0..n)
                .map(|_| {
                    let s = (m % c) as u32;
                    m /= c;
                    s
                })
                .collect()
        })
        .collect()
}

/// Joint distribution over all units for one step, in the order of
/// [`configurations`].
pub fn joint(arch: &Architecture, p: &ModelParams, r: &[Vec<f64>]) -> Vec<(Vec<u32>, f64)> {
    let confs = configurations(arch.n_units(), arch.alphabet().size());
    let es: Vec<f64> = confs.iter().map(|y| energy(arch, p, r, y)).collect();
    let m = es.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = es.iter().map(|e| (e - m).exp()).sum();
    confs
        .into_iter()
        .zip(es)
        .map(|(y, e)| (y, (e - m).exp() / z))
        .collect()
}

pub fn log_z(arch: &Architecture, p: &ModelParams, r: &[Vec<f64>]) -> f64 {
    let es: Vec<f64> = configurations(arch.n_units(), arch.alphabet().size())
        .iter()
        .map(|y| energy(arch, p, r, y))
        .collect();
    let m = es.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + es.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}

pub fn log_likelihood(arch: &Architecture, p: &ModelParams, x: &TimeSeries) -> f64 {
    (0..x.len())
        .map(|t| {
            let r = potentials(arch, p, x, t);
            energy(arch, p, &r, x.step(t)) - log_z(arch, p, &r)
        })
        .sum()
}

/// Central finite differences of [`log_likelihood`] in every coordinate.
pub fn fd_gradient(arch: &Architecture, p: &ModelParams, x: &TimeSeries, h: f64) -> Vec<f64> {
    let mut q = p.clone();
    (0..p.as_slice().len())
        .map(|n| {
            let w = p.as_slice()[n];
            q.as_mut_slice()[n] = w + h;
            let up = log_likelihood(arch, &q, x);
            q.as_mut_slice()[n] = w - h;
            let down = log_likelihood(arch, &q, x);
            q.as_mut_slice()[n] = w;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Posterior density of a Bernoulli log-odds under a standard normal prior,
/// tabulated on a grid and integrated to a CDF by the trapezoid rule.
pub struct GridCdf {
    pub x: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl GridCdf {
    pub fn new(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Self {
        let dx = (hi - lo) / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|i| lo + i as f64 * dx).collect();
        let ld: Vec<f64> = x.iter().map(|&v| log_density(v)).collect();
        let m = ld.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d: Vec<f64> = ld.iter().map(|v| (v - m).exp()).collect();
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + 0.5 * (d[i] + d[i - 1]) * dx;
        }
        let total = cdf[n - 1];
        for c in &mut cdf {
            *c /= total;
        }
        Self { x, cdf }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v <= self.x[0] {
            return 0.0;
        }
        if v >= self.x[n - 1] {
            return 1.0;
        }
        let dx = self.x[1] - self.x[0];
        let i = ((v - self.x[0]) / dx) as usize;
        let f = (v - self.x[i]) / dx;
        self.cdf[i] * (1.0 - f) + self.cdf[(i + 1).min(n - 1)] * f
    }

    /// Kolmogorov-Smirnov distance to an empirical sample.
    pub fn ks(&self, samples: &[f64]) -> f64 {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        s.iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = self.eval(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}
