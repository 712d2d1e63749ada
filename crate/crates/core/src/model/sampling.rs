use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inference::{gibbs_draw, GibbsConfig};
use crate::model::{
    enumerate_component, membrane_potentials, Architecture, ModelParams, Potentials, TimeSeries,
    TraceState,
};
use crate::rng;

/// Ancestral sampling of `t_len` steps from the zero history.
///
/// Each lateral component is drawn exactly (enumeration plus a categorical
/// draw) when it fits the enumeration budget, otherwise by a Gibbs chain run
/// for `gibbs.burn_in` sweeps.
pub fn sample_sequence(
    arch: &Architecture,
    params: &ModelParams,
    t_len: usize,
    seed: u64,
    gibbs: &GibbsConfig,
) -> Result<TimeSeries> {
    sample_inner(arch, params, t_len, None, seed, gibbs)
}

/// Like [`sample_sequence`] but units with `clamped[i]` set copy their
/// symbols from `fixed` instead of being sampled. The free units are drawn
/// from their conditional given the clamped ones.
pub fn sample_clamped(
    arch: &Architecture,
    params: &ModelParams,
    fixed: &TimeSeries,
    clamped: &[bool],
    seed: u64,
    gibbs: &GibbsConfig,
) -> Result<TimeSeries> {
    if clamped.len() != arch.n_units() {
        return Err(Error::ShapeMismatch("clamp mask length differs from unit count".into()));
    }
    arch.check_series(fixed)?;
    sample_inner(arch, params, fixed.len(), Some((fixed, clamped)), seed, gibbs)
}

fn sample_inner(
    arch: &Architecture,
    params: &ModelParams,
    t_len: usize,
    clamp: Option<(&TimeSeries, &[bool])>,
    seed: u64,
    gibbs: &GibbsConfig,
) -> Result<TimeSeries> {
    arch.check_params(params)?;
    let n = arch.n_units();
    let mut out = TimeSeries::zeros(n, t_len);
    let mut traces = TraceState::for_arch(arch);
    let mut r = Potentials::zeros(n, arch.alphabet().na());
    let mut rng = rng::stream(seed, "sample", 0);
    let mask = clamp.map(|(_, m)| m);
    for t in 0..t_len {
        membrane_potentials(arch, params, &traces, &mut r);
        let mut x_t = match clamp {
            Some((fixed, _)) => fixed.step(t).to_vec(),
            None => vec![0; n],
        };
        for c in 0..arch.reach().components().len() {
            draw_component(arch, params, &r, c, &mut x_t, mask, &mut rng, gibbs)?;
        }
        out.step_mut(t).copy_from_slice(&x_t);
        traces.push(arch.basis(), &x_t);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn draw_component(
    arch: &Architecture,
    params: &ModelParams,
    r: &Potentials,
    c: usize,
    x_t: &mut [u32],
    clamped: Option<&[bool]>,
    rng: &mut ChaCha8Rng,
    gibbs: &GibbsConfig,
) -> Result<()> {
    match enumerate_component(arch, params, r, c, x_t, clamped) {
        Ok(en) => {
            if en.free.is_empty() {
                return Ok(());
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = None;
            for n in 0..en.len() {
                let p = en.prob(n);
                if p > 0.0 {
                    pick = Some(n);
                }
                acc += p;
                if u < acc {
                    break;
                }
            }
            en.write(pick.unwrap_or(0), x_t);
            Ok(())
        }
        Err(Error::ComponentTooLarge { .. }) => {
            gibbs_draw(arch, params, r, c, x_t, clamped, gibbs.burn_in.max(1), rng);
            Ok(())
        }
        Err(e) => Err(e),
    }
}
