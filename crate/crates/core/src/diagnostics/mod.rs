//! Model checking: leave-one-out prediction of held-out reference studies,
//! normal QQ data for standardized residuals, and MCMC convergence summaries.

mod convergence;
mod loo;

pub use convergence::{rhat_ess, ConvergenceDiagnostics};
pub use loo::{loo_cross_validate, qq_data, LooRecord, QQData};
