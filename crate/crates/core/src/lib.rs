//! Composite networks built from pre-trained and trainable components.
//!
//! Component outputs are glued by affine layers, optionally followed by an
//! activation. The optimal linear glue has a closed form ([`stack`]); a
//! non-linear glue is built from it so that it keeps the strict gain over the
//! best component ([`scaled`]). Networks are grown layer by layer
//! ([`growth`]), trained by SGD with frozen components held fixed
//! ([`trainer`]), and the probabilistic guarantees behind these steps are
//! checked by seeded Monte Carlo ([`verifier`]).

pub mod activation;
pub mod components;
pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod growth;
pub mod report;
pub mod scaled;
pub mod stacker;
pub mod synthetic;
pub mod trainer;
pub mod verifier;

pub use activation::Activation;
pub use components::{Component, ComponentKind, TableSource};
pub use data::{check_assumptions, rmse, total_loss, AssumptionReport, Dataset, FeatureMatrix, OutputVector};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
pub use graph::{evaluate_graph, CompositeGraph, GlueNode, Node, OuterAffine};
pub use growth::{add_depth, add_width, fuse, grow_greedy, GrowthStep, GrowthTrace};
pub use report::{emit_report, parse_report, Format, Report, ReportRow};
pub use scaled::{build_scaled_plan, select_epsilon, ActivationProfile, ScaledPlan};
pub use stacker::{solve_optimal_theta, stack, StackSolution};
pub use synthetic::{generate_synthetic, Rule, SyntheticSpec};
pub use trainer::{backprop_gradients, sgd_train, TrainConfig, TrainTrace};
pub use verifier::{angle_concentration, multilayer_bound, no_worse_frequency, BoundReport, Sampler, TrialConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/stacking.md")]
    mod stacking {}
    #[doc = include_str!("../../../book/src/scaled_activation.md")]
    mod scaled_activation {}
    #[doc = include_str!("../../../book/src/growth.md")]
    mod growth {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
