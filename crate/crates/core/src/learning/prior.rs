use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GradientBundle, ModelParams};

/// Prior over every scalar parameter, applied coordinate-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prior {
    /// Improper flat prior; its gradient is zero.
    #[default]
    Uniform,
    Gaussian { mean: f64, std: f64 },
    /// Mixture of Gaussians with a shared standard deviation. Empty `weights`
    /// means equal weights.
    #[serde(alias = "gmm")]
    GaussianMixture {
        means: Vec<f64>,
        std: f64,
        #[serde(default)]
        weights: Vec<f64>,
    },
}

impl Prior {
    pub fn gmm(means: Vec<f64>, std: f64) -> Self {
        let m = means.len();
        Prior::GaussianMixture {
            means,
            std,
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Prior::Uniform => Ok(()),
            Prior::Gaussian { std, .. } if *std > 0.0 => Ok(()),
            Prior::Gaussian { .. } => Err(Error::Config("prior std must be > 0".into())),
            Prior::GaussianMixture { means, std, weights } => {
                if means.is_empty() || *std <= 0.0 {
                    return Err(Error::Config("mixture prior needs means and std > 0".into()));
                }
                if !weights.is_empty() {
                    if weights.len() != means.len() || weights.iter().any(|&w| w <= 0.0) {
                        return Err(Error::Config("mixture weights must be positive, one per mean".into()));
                    }
                    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(Error::Config("mixture weights must sum to 1".into()));
                    }
                }
                Ok(())
            }
        }
    }

    fn weight(weights: &[f64], m: usize, n: usize) -> f64 {
        weights.get(m).copied().unwrap_or(1.0 / n as f64)
    }

    /// `ln p(w)` of one coordinate, up to the constant of the flat prior.
    pub fn log_density(&self, w: f64) -> f64 {
        match self {
            Prior::Uniform => 0.0,
            Prior::Gaussian { mean, std } => {
                let z = (w - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Prior::GaussianMixture { means, std, weights } => {
                let terms: Vec<f64> = means
                    .iter()
                    .enumerate()
                    .map(|(m, mu)| {
                        let z = (w - mu) / std;
                        Self::weight(weights, m, means.len()).ln() - 0.5 * z * z
                    })
                    .collect();
                crate::model::log_sum_exp(&terms) - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    /// `d ln p(w) / dw`; for the mixture `Σ_m γ_m(w) (μ_m - w) / σ²`.
    pub fn grad(&self, w: f64) -> f64 {
        match self {
            Prior::Uniform => 0.0,
            Prior::Gaussian { mean, std } => (mean - w) / (std * std),
            Prior::GaussianMixture { means, std, weights } => {
                let var = std * std;
                let logits: Vec<f64> = means
                    .iter()
                    .enumerate()
                    .map(|(m, mu)| Self::weight(weights, m, means.len()).ln() - 0.5 * (w - mu).powi(2) / var)
                    .collect();
                let lse = crate::model::log_sum_exp(&logits);
                means
                    .iter()
                    .zip(&logits)
                    .map(|(mu, l)| (l - lse).exp() * (mu - w) / var)
                    .sum()
            }
        }
    }
}

/// `∇ ln p(Θ)`, coordinate-wise.
pub fn log_prior_grad(params: &ModelParams, prior: &Prior) -> GradientBundle {
    let data = params.as_slice().iter().map(|&w| prior.grad(w)).collect();
    GradientBundle::from_flat(*params.shape(), data).expect("same shape")
}
