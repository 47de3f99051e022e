//! Train-on-real and train-on-synthetic evaluation with capped utility ratios.

pub mod metrics;
pub mod protocol;

pub use metrics::{generator_utility, importance_alignment, regression_metrics, utility_scores, RegressionMetrics, Utility};
pub use protocol::{
    evaluate_generator, noise_targets, run_protocol, trtr_baseline, GeneratorResult, ModelResult, ProtocolSettings,
    TaskResult, TrtrBaseline, UtilityReport,
};
