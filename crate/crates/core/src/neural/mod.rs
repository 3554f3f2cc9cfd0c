//! Neural baselines and residual adapters.

mod ensemble;
mod mlp;
mod residual;
mod train;

pub use ensemble::{train_ensemble, train_ensemble_detailed, EnsembleConfig, EnsembleFit, EnsembleNN};
pub use mlp::{Grads, Mlp, Tape};
pub use residual::{residual_predict, train_residual, BaseModel, Residual, ResidualFit, ResidualModel, ResidualNet};
pub use train::{gradient_check, residual_objective, Adam, Standardizer, TrainConfig};

/// Convenience for [`Mlp::forward`].
pub fn mlp_forward(m: &Mlp, input: &[f64]) -> crate::Result<Vec<f64>> {
    m.forward(input)
}
