//! Synthetic data, contamination, error metrics and the benchmark runners.

mod accuracy;
mod convergence;
mod generate;
mod metrics;
mod outliers;
mod par;
mod robustness;

pub use accuracy::{accuracy_study, AccuracyConfig, AccuracyTable};
pub use convergence::{convergence_study, ConvergenceConfig, Trace};
pub use generate::{
    generate, linspace, random_orthonormal, sample_from, truth, GeneratorKind, GeneratorSpec, Overrides,
};
pub use metrics::{dense_rel_error, kron_rel_error, quantile, rel_cov_error, rmse, sample_std};
pub use outliers::{
    contaminated_draws, inject_outliers, orthogonal_complement, OutlierFamily, OutlierSpec, Situation,
};
pub use par::map_indexed;
pub use robustness::{fit_method, robustness_study, Method, RobustnessCell, RobustnessConfig};
