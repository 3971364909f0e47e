//! Evaluation: accuracy, feature density, bias/variance, shape fidelity,
//! rank aggregation and subgroup fairness.

pub mod accuracy;
pub mod biasvar;
pub mod density;
pub mod fairness;
pub mod fidelity;
pub mod rank;

pub use accuracy::{auc, cross_entropy};
pub use biasvar::{bias_variance, BiasVarianceConfig, BiasVarianceEstimate, LossMode};
pub use density::{density_from_errors, feature_density, DensityCurve};
pub use fairness::{ablate_and_retrain, subgroup_report, SubgroupReport};
pub use fidelity::{
    generator_distances, make_semisynthetic, shape_distance, worst_case_fidelity, FidelityTable, LabelMode,
};
pub use rank::{average_ranks, rank_gap};
