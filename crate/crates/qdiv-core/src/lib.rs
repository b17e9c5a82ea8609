//! Group-robust training at desk scale.
//!
//! The crate provides synthetic spurious-correlation datasets, minimal
//! differentiable classifiers with analytic gradients, a parameterized group
//! assigner with label-balance regularization, cross-group mixing, a zoo of
//! robust optimizers (ERM, oracle group DRO, CVaR-DRO, JTT, Q-Diversity), and
//! an experiment harness with seeded, reproducible CSV reporting.

pub mod assigner;
pub mod data;
pub mod dro;
pub mod error;
pub mod mixing;
pub mod model;
pub mod rng;

pub use assigner::{assign, assigner_loss, balance_loss, conditional_label_marginals};
pub use assigner::{AssignerInput, GroupAssignment, LabelMarginals};
pub use data::{generate_biased, group_counts, inject_label_noise, load_csv, shift_testset, write_csv};
pub use data::{ColumnRoles, CountTable, Dataset, GeneratorSpec, ShiftKind};
pub use dro::{evaluate, group_losses, soft_group_losses, update_q, update_q_active};
pub use dro::{minority_mask_from_groups, train, train_cvar, train_erm, train_jtt, train_oracle_dro, train_qdiversity};
pub use dro::{EpochStats, EvalReport, GroupLossReport, GroupMode, GroupWeights, Method, TrainConfig, TrainResult};
pub use error::{Error, Result};
pub use mixing::{build_mixed_groups, mix_pair, sample_lambda};
pub use mixing::{MixSpec, MixedBatch, PairKind};
pub use model::{forward, grad, grad_from_dlogits, sgd_step, weighted_soft_ce_loss};
pub use model::{Architecture, Layer, ModelParams, PredictionBatch, SoftLabels};
