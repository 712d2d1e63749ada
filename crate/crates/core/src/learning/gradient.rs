use crate::error::{Error, Result};
use crate::inference::{step_expectations_into, GibbsConfig, NegPhase, StepExpectations};
use crate::model::{
    membrane_potentials, sequence_log_likelihood, step_energy, Architecture, Block,
    GradientBundle, ModelParams, Potentials, TimeSeries, TraceState,
};

/// Reusable buffers for repeated gradient evaluations on one architecture.
pub struct GradientWorkspace<'a> {
    arch: &'a Architecture,
    traces: TraceState,
    r: Potentials,
    expect: StepExpectations,
    diff: Vec<f64>,
}

impl<'a> GradientWorkspace<'a> {
    pub fn new(arch: &'a Architecture) -> Self {
        let na = arch.alphabet().na();
        Self {
            arch,
            traces: TraceState::for_arch(arch),
            r: Potentials::zeros(arch.n_units(), na),
            expect: StepExpectations::new(arch),
            diff: vec![0.0; na],
        }
    }

    /// Add `∇ log p(x)` to `grad` and return `log p(x)` when every step was
    /// normalized exactly.
    ///
    /// Per step: `dθ_i += s_i - E[s_i]`,
    /// `dV_{e,k} += alpha_{j,k}(t-1) (s_i - E[s_i])^T`,
    /// `dU_e += s_a s_b^T - E[s_a s_b^T]`.
    pub fn accumulate(
        &mut self,
        params: &ModelParams,
        x: &TimeSeries,
        mode: NegPhase,
        gibbs: &GibbsConfig,
        grad: &mut GradientBundle,
    ) -> Result<Option<f64>> {
        let arch = self.arch;
        arch.check_params(params)?;
        arch.check_series(x)?;
        if grad.shape() != params.shape() {
            return Err(Error::ShapeMismatch("gradient and parameter shapes differ".into()));
        }
        let na = arch.alphabet().na();
        self.traces.reset();
        let mut loglik = Some(0.0);
        for t in 0..x.len() {
            membrane_potentials(arch, params, &self.traces, &mut self.r);
            step_expectations_into(arch, params, &self.r, mode, gibbs, t as u64, &mut self.expect)?;
            let x_t = x.step(t);

            if loglik.is_some() {
                let log_z: Option<f64> = (0..arch.reach().components().len())
                    .map(|c| self.expect.log_z(c))
                    .sum();
                loglik = loglik
                    .zip(log_z)
                    .map(|(ll, z)| ll + step_energy(arch, params, &self.r, x_t) - z);
            }

            for i in 0..arch.n_units() {
                self.diff.copy_from_slice(self.expect.node(i));
                for d in self.diff.iter_mut() {
                    *d = -*d;
                }
                if x_t[i] > 0 {
                    self.diff[x_t[i] as usize - 1] += 1.0;
                }
                for (g, d) in grad.theta_mut(i).iter_mut().zip(&self.diff) {
                    *g += d;
                }
                for &(e, j) in arch.causal().incoming(i) {
                    let alpha = self.traces.unit_alpha(j);
                    let gv = grad.v_edge_mut(e);
                    for (&al, row) in alpha.iter().zip(gv.chunks_exact_mut(na)) {
                        if al == 0.0 {
                            continue;
                        }
                        for (g, d) in row.iter_mut().zip(&self.diff) {
                            *g += al * d;
                        }
                    }
                }
            }

            for (e, &(a, b)) in arch.lateral().edges().iter().enumerate() {
                let gu = grad.u_mut(e);
                for (g, m) in gu.iter_mut().zip(self.expect.pair(e)) {
                    *g -= m;
                }
                if x_t[a] > 0 && x_t[b] > 0 {
                    gu[(x_t[a] as usize - 1) * na + x_t[b] as usize - 1] += 1.0;
                }
            }

            self.traces.push(arch.basis(), x_t);
        }
        Ok(loglik)
    }
}

/// Gradient of the sequence log-likelihood, summed over time.
pub fn grad_log_likelihood(
    arch: &Architecture,
    params: &ModelParams,
    x: &TimeSeries,
    mode: NegPhase,
    gibbs: &GibbsConfig,
) -> Result<GradientBundle> {
    let mut grad = GradientBundle::zeros(*params.shape());
    GradientWorkspace::new(arch).accumulate(params, x, mode, gibbs, &mut grad)?;
    Ok(grad)
}

/// Largest relative error between an analytic gradient and central finite
/// differences, per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<(Block, f64)>,
}

impl GradCheckReport {
    pub fn max(&self) -> f64 {
        self.blocks.iter().map(|&(_, e)| e).fold(0.0, f64::max)
    }
}

/// Denominator floor for relative errors of near-zero gradient entries.
pub const GRADCHECK_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, GRADCHECK_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRADCHECK_FLOOR)
}

/// Compare the exact-negative-phase gradient against central differences of
/// the exact log-likelihood with step `h`.
pub fn gradient_check(
    arch: &Architecture,
    params: &ModelParams,
    x: &TimeSeries,
    h: f64,
) -> Result<GradCheckReport> {
    let analytic = grad_log_likelihood(arch, params, x, NegPhase::Exact, &GibbsConfig::default())?;
    let mut probe = params.clone();
    let mut worst = [(Block::Theta, 0.0), (Block::Causal, 0.0), (Block::Lateral, 0.0)];
    for idx in 0..params.as_slice().len() {
        let w = params.as_slice()[idx];
        probe.as_mut_slice()[idx] = w + h;
        let up = sequence_log_likelihood(arch, &probe, x)?;
        probe.as_mut_slice()[idx] = w - h;
        let down = sequence_log_likelihood(arch, &probe, x)?;
        probe.as_mut_slice()[idx] = w;
        let fd = (up - down) / (2.0 * h);
        let err = relative_error(analytic.as_slice()[idx], fd);
        let slot = &mut worst[params.shape().block_of(idx) as usize];
        slot.1 = f64::max(slot.1, err);
    }
    Ok(GradCheckReport {
        blocks: worst.to_vec(),
    })
}
