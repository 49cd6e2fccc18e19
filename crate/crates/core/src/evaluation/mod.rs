//! Bootstrap intervals, the FeeBee protocol, rank agreement and slope fitting.

pub mod bootstrap;
pub mod feebee;
pub mod kendall;
pub mod slope;

pub use bootstrap::{
    bootstrap_ci, bootstrap_hard, bootstrap_paired, bootstrap_soft, quantile_sorted, BootstrapCi,
    BootstrapOptions, CiMethod,
};
pub use feebee::{
    feebee_bounds, feebee_penalty, feebee_score, feebee_score_with, inject_label_noise,
    FeeBeeReport,
};
pub use kendall::{kendall_tau, order_break_probability};
pub use slope::{fit_loglog_slope, SlopeFit};
