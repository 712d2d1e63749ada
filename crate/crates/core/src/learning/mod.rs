//! Likelihood gradients, priors, maximum-likelihood training and Langevin
//! posterior sampling.

mod gradient;
mod prior;
mod train;

pub use gradient::{
    grad_log_likelihood, gradient_check, relative_error, GradCheckReport, GradientWorkspace,
    GRADCHECK_FLOOR,
};
pub use prior::{log_prior_grad, Prior};
pub use train::{
    burn_in_updates, train_bayes, train_bayes_observed, train_ml, train_ml_observed, BayesOutcome,
    EpochReport, TrainConfig, TrainOutcome,
};
