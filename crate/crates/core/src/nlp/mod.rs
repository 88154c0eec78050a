//! Smooth constrained optimization: problem interface, quadratic model
//! builder and an interior-point solver.

pub mod check;
pub mod ipm;
pub mod ldl;
pub mod problem;

pub use check::{check_gradients, check_hessian};
pub use ipm::{solve_nlp, KktResiduals, NlpError, NlpOptions, NlpSolution, NlpStatus};
pub use problem::{NlpProblem, QcqpModel, QuadExpr, VarId};
