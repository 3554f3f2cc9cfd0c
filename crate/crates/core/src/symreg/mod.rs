//! Genetic-programming symbolic regression for per-dimension dynamics.

mod batch;
mod expr;
mod gp;
mod model;

pub use batch::{eval_columns, mae_columns, EvalWorkspace};
pub use expr::{Expr, Node};
pub use gp::{fit_expression, ExprFit, SrSearchConfig};
pub use model::{fit_columns, fit_sr_model, fit_sr_model_detailed, SrFitReport, SrModel};

/// Node count of an expression.
pub fn complexity(e: &Expr) -> usize {
    e.complexity()
}
