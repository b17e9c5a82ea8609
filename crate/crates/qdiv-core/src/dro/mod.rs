//! Group-reweighted robust optimization.
//!
//! The two-player machinery: per-group losses (hard ids or soft memberships),
//! the multiplicative-weights update of the adversarial group distribution q,
//! ground-truth evaluation, and the trainer zoo in [`train`].

mod train;

pub use train::{train, train_cvar, train_erm, train_jtt, train_oracle_dro, train_qdiversity};
pub use train::{cvar_topk_weights, minority_mask_from_groups};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::assigner::GroupAssignment;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mixing::MixSpec;
use crate::model::{forward, weighted_soft_ce_loss, Architecture, ModelParams, SoftLabels};

/// Soft membership mass below which a group counts as empty.
pub const EMPTY_GROUP_MASS: f64 = 1e-9;

/// The adversarial player: a distribution over m groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub q: Vec<f64>,
}

impl GroupWeights {
    pub fn uniform(m: usize) -> Self {
        GroupWeights {
            q: vec![1.0 / m as f64; m],
        }
    }

    pub fn new(q: Vec<f64>) -> Result<Self> {
        let w = GroupWeights { q };
        w.validate()?;
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() {
            return Err(Error::invalid("q", "must have at least one group"));
        }
        if self.q.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("q", "entries must be nonnegative"));
        }
        let sum: f64 = self.q.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("q", format!("sums to {sum}, expected 1 within 1e-9")));
        }
        Ok(())
    }
}

/// Training method tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Erm,
    OracleDro,
    Cvar,
    Jtt,
    QDiversity,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erm" => Ok(Method::Erm),
            "oracle_dro" => Ok(Method::OracleDro),
            "cvar" => Ok(Method::Cvar),
            "jtt" => Ok(Method::Jtt),
            "qdiv" => Ok(Method::QDiversity),
            other => Err(Error::invalid(
                "method",
                format!("unknown method {other:?}; expected erm, oracle_dro, cvar, jtt or qdiv"),
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            Method::Erm => "erm",
            Method::OracleDro => "oracle_dro",
            Method::Cvar => "cvar",
            Method::Jtt => "jtt",
            Method::QDiversity => "qdiv",
        };
        write!(f, "{tag}")
    }
}

/// How reweighting groups are formed during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupMode {
    /// Estimated membership crossed with the class label: m = 2C.
    AssignerByLabel,
    /// Estimated membership alone: m = 2.
    AssignerOnly,
    /// Ground-truth group ids from the dataset.
    Oracle,
}

impl std::str::FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "assigner_by_label" => Ok(GroupMode::AssignerByLabel),
            "assigner" => Ok(GroupMode::AssignerOnly),
            "oracle" => Ok(GroupMode::Oracle),
            other => Err(Error::invalid(
                "group_mode",
                format!("unknown group mode {other:?}; expected assigner_by_label, assigner or oracle"),
            )),
        }
    }
}

impl std::fmt::Display for GroupMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            GroupMode::AssignerByLabel => "assigner_by_label",
            GroupMode::AssignerOnly => "assigner",
            GroupMode::Oracle => "oracle",
        };
        write!(f, "{tag}")
    }
}

/// Every knob a trainer reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub predictor_lr: f64,
    pub assigner_lr: f64,
    /// Step size in the exponent of the q update; 1 recovers the plain
    /// multiplicative-weights rule.
    pub q_step: f64,
    /// Weight of the label-balance regularizer in the assigner objective.
    pub balance_weight: f64,
    pub mix: MixSpec,
    pub group_mode: GroupMode,
    pub seed: u64,
    /// Fraction of the batch upweighted by CVaR.
    pub cvar_alpha: f64,
    /// Identification-phase epochs for JTT.
    pub jtt_id_epochs: usize,
    /// Weight placed on the identification model's error set.
    pub jtt_upweight: f64,
    pub predictor_arch: Architecture,
    pub assigner_arch: Architecture,
    /// Assigner gradient steps per modeling round.
    pub assigner_steps: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Erm,
            epochs: 60,
            batch_size: 128,
            predictor_lr: 0.1,
            assigner_lr: 0.1,
            q_step: 0.1,
            balance_weight: 1.0,
            mix: MixSpec::default(),
            group_mode: GroupMode::AssignerByLabel,
            seed: 0,
            cvar_alpha: 0.2,
            jtt_id_epochs: 10,
            jtt_upweight: 6.0,
            predictor_arch: Architecture::Linear,
            assigner_arch: Architecture::OneHidden { hidden: 16 },
            assigner_steps: 5,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        for (key, v) in [
            ("predictor_lr", self.predictor_lr),
            ("assigner_lr", self.assigner_lr),
            ("q_step", self.q_step),
            ("init_scale", self.init_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(key, "must be finite and > 0"));
            }
        }
        if !(self.balance_weight >= 0.0) {
            return Err(Error::invalid("balance_weight", "must be >= 0"));
        }
        if !(self.cvar_alpha > 0.0 && self.cvar_alpha <= 1.0) {
            return Err(Error::invalid("cvar_alpha", "must lie in (0, 1]"));
        }
        if !(self.jtt_upweight >= 1.0) {
            return Err(Error::invalid("jtt_upweight", "must be >= 1"));
        }
        if self.method == Method::Jtt && self.jtt_id_epochs >= self.epochs {
            return Err(Error::invalid("jtt_id_epochs", "must be < epochs"));
        }
        if self.assigner_steps == 0 {
            return Err(Error::invalid("assigner_steps", "must be >= 1"));
        }
        self.mix.validate()
    }
}

/// One epoch of training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub avg_acc: f64,
    /// Worst-group accuracy over ground-truth groups; absent when the
    /// training data carries no group labels.
    pub robust_acc: Option<f64>,
    /// Full-data per-group losses that drove this epoch's q update
    /// (empty for methods without group structure).
    pub group_losses: Vec<f64>,
    /// q after this epoch's update (empty for methods without q).
    pub q: Vec<f64>,
}

/// Output of a trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub theta: ModelParams,
    /// Trained assigner, when the method has one.
    pub phi: Option<ModelParams>,
    pub history: Vec<EpochStats>,
    /// Indices of the identification model's misclassified examples (JTT).
    pub jtt_error_set: Option<Vec<usize>>,
    /// Times the assigner was reinitialized after collapsing.
    pub assigner_reinits: usize,
    /// Epochs where mixing was skipped because no minority example existed.
    pub mixing_skips: usize,
}

/// Per-group mean losses plus the membership mass behind each mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLossReport {
    /// Mean per-example loss within each group; 0.0 for empty groups.
    pub losses: Vec<f64>,
    /// Total (possibly soft) membership mass per group.
    pub mass: Vec<f64>,
    pub empty: Vec<bool>,
}

/// Group means from hard group ids.
pub(crate) fn group_parts(per_example: &[f64], group_ids: &[usize], m: usize) -> Result<GroupLossReport> {
    if per_example.len() != group_ids.len() {
        return Err(Error::dim("group losses", per_example.len(), group_ids.len()));
    }
    let mut sums = vec![0.0; m];
    let mut mass = vec![0.0; m];
    for (&l, &g) in per_example.iter().zip(group_ids) {
        if g >= m {
            return Err(Error::invalid("group id", format!("{g} out of range for m={m}")));
        }
        sums[g] += l;
        mass[g] += 1.0;
    }
    finish_parts(sums, mass)
}

/// Group means from soft minority probabilities.
///
/// `m = 2` treats membership alone as the group; `m = 2C` crosses membership
/// with the label (minority cells first: `g = membership * C + label` with
/// membership 0 = minority).
pub(crate) fn soft_group_parts(
    per_example: &[f64],
    p_minority: &[f64],
    labels: &[usize],
    num_classes: usize,
    m: usize,
) -> Result<GroupLossReport> {
    let n = per_example.len();
    if p_minority.len() != n || labels.len() != n {
        return Err(Error::dim("soft group losses", n, p_minority.len().min(labels.len())));
    }
    let by_label = if m == 2 {
        false
    } else if m == 2 * num_classes && num_classes >= 2 {
        true
    } else {
        return Err(Error::invalid(
            "m",
            format!("expected 2 or 2*num_classes={} groups, got {m}", 2 * num_classes),
        ));
    };
    let mut sums = vec![0.0; m];
    let mut mass = vec![0.0; m];
    for i in 0..n {
        let (g_min, g_maj) = if by_label {
            (labels[i], num_classes + labels[i])
        } else {
            (0, 1)
        };
        let p = p_minority[i];
        sums[g_min] += p * per_example[i];
        mass[g_min] += p;
        sums[g_maj] += (1.0 - p) * per_example[i];
        mass[g_maj] += 1.0 - p;
    }
    finish_parts(sums, mass)
}

fn finish_parts(sums: Vec<f64>, mass: Vec<f64>) -> Result<GroupLossReport> {
    let mut losses = vec![0.0; sums.len()];
    let mut empty = vec![false; sums.len()];
    for g in 0..sums.len() {
        if mass[g] < EMPTY_GROUP_MASS {
            empty[g] = true;
        } else {
            losses[g] = sums[g] / mass[g];
        }
    }
    Ok(GroupLossReport { losses, mass, empty })
}

fn per_example_losses(theta: &ModelParams, features: ArrayView2<f64>, targets: &SoftLabels) -> Result<Vec<f64>> {
    let pred = forward(theta, features)?;
    let n = features.nrows();
    let (_, per) = weighted_soft_ce_loss(&pred, targets, &vec![1.0; n])?;
    Ok(per)
}

/// Mean cross-entropy within each group under hard group ids.
pub fn group_losses(
    theta: &ModelParams,
    data: &Dataset,
    group_ids: &[usize],
    m: usize,
) -> Result<GroupLossReport> {
    let targets = SoftLabels::from_hard(&data.labels, data.num_classes)?;
    let per = per_example_losses(theta, data.features.view(), &targets)?;
    group_parts(&per, group_ids, m)
}

/// Mean cross-entropy per group under soft memberships from an assignment.
pub fn soft_group_losses(
    theta: &ModelParams,
    data: &Dataset,
    assignment: &GroupAssignment,
    m: usize,
) -> Result<GroupLossReport> {
    if assignment.len() != data.len() {
        return Err(Error::dim("assignment", data.len(), assignment.len()));
    }
    let targets = SoftLabels::from_hard(&data.labels, data.num_classes)?;
    let per = per_example_losses(theta, data.features.view(), &targets)?;
    soft_group_parts(&per, &assignment.p_minority, &data.labels, data.num_classes, m)
}

/// Multiplicative-weights update: `q'_j` proportional to `q_j * exp(q_step * L_j)`.
pub fn update_q(q: &GroupWeights, losses: &[f64], q_step: f64) -> Result<GroupWeights> {
    update_q_active(q, losses, q_step, &vec![true; q.len()])
}

/// As [`update_q`], but entries with `active[j] = false` keep their current
/// mass unchanged; only the active portion is reweighted and renormalized.
pub fn update_q_active(
    q: &GroupWeights,
    losses: &[f64],
    q_step: f64,
    active: &[bool],
) -> Result<GroupWeights> {
    q.validate()?;
    if losses.len() != q.len() || active.len() != q.len() {
        return Err(Error::dim("update_q losses", q.len(), losses.len().min(active.len())));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite {
            what: "group losses".into(),
            context: "update_q".into(),
        });
    }
    if !q_step.is_finite() || q_step < 0.0 {
        return Err(Error::invalid("q_step", "must be finite and >= 0"));
    }
    let frozen_mass: f64 = q
        .q
        .iter()
        .zip(active)
        .filter(|(_, &a)| !a)
        .map(|(&v, _)| v)
        .sum();
    // Subtract the max exponent before exponentiation to avoid overflow.
    let max_exp = losses
        .iter()
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|(&l, _)| q_step * l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_exp == f64::NEG_INFINITY {
        // Nothing active; q is unchanged.
        return Ok(q.clone());
    }
    let mut next = q.q.clone();
    let mut active_sum = 0.0;
    for j in 0..q.len() {
        if active[j] {
            next[j] = q.q[j] * (q_step * losses[j] - max_exp).exp();
            active_sum += next[j];
        }
    }
    if active_sum <= 0.0 {
        return Err(Error::NonFinite {
            what: "renormalization".into(),
            context: "update_q".into(),
        });
    }
    let scale = (1.0 - frozen_mass) / active_sum;
    for j in 0..q.len() {
        if active[j] {
            next[j] *= scale;
        }
    }
    Ok(GroupWeights { q: next })
}

/// Ground-truth evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub avg_acc: f64,
    /// Minimum per-group accuracy over nonempty groups.
    pub robust_acc: f64,
    /// Accuracy per group; NaN-free, empty groups reported as 1.0 with
    /// `group_counts[g] = 0`.
    pub per_group_acc: Vec<f64>,
    pub group_counts: Vec<usize>,
}

/// Average and worst-group accuracy against the dataset's true groups.
pub fn evaluate(theta: &ModelParams, data: &Dataset) -> Result<EvalReport> {
    let groups = data.true_group.as_ref().ok_or(Error::MissingGroups)?;
    let m = data.group_count;
    let pred = forward(theta, data.features.view())?;
    let predicted = pred.argmax();
    let mut correct = vec![0usize; m];
    let mut counts = vec![0usize; m];
    let mut total_correct = 0usize;
    for i in 0..data.len() {
        let g = groups[i];
        counts[g] += 1;
        if predicted[i] == data.labels[i] {
            correct[g] += 1;
            total_correct += 1;
        }
    }
    let per_group_acc: Vec<f64> = (0..m)
        .map(|g| {
            if counts[g] == 0 {
                1.0
            } else {
                correct[g] as f64 / counts[g] as f64
            }
        })
        .collect();
    let robust_acc = (0..m)
        .filter(|&g| counts[g] > 0)
        .map(|g| per_group_acc[g])
        .fold(f64::INFINITY, f64::min);
    Ok(EvalReport {
        avg_acc: total_correct as f64 / data.len() as f64,
        robust_acc: if robust_acc.is_finite() { robust_acc } else { 0.0 },
        per_group_acc,
        group_counts: counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_biased, GeneratorSpec};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_dataset(seed: u64, n: usize, c: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.5..1.5));
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        Dataset::new(features, labels, None, None, c, 0).unwrap()
    }

    fn seeded_model(seed: u64, d: usize, c: usize) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::init(Architecture::Linear, d, c, 0.1, &mut rng).unwrap()
    }

    #[test]
    fn single_group_loss_is_the_mean_loss() {
        let data = tiny_dataset(1, 12, 2);
        let theta = seeded_model(2, 3, 2);
        let report = group_losses(&theta, &data, &vec![0; 12], 1).unwrap();
        let targets = SoftLabels::from_hard(&data.labels, 2).unwrap();
        let pred = forward(&theta, data.features.view()).unwrap();
        let (mean, _) = weighted_soft_ce_loss(&pred, &targets, &vec![1.0; 12]).unwrap();
        assert!((report.losses[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn perfect_vs_uniform_group_losses() {
        // Group 0 perfectly classified (huge margin), group 1 at uniform.
        let features = array![[1.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let labels = vec![1, 1, 0, 1];
        let data = Dataset::new(features, labels, None, None, 2, 0).unwrap();
        let mut theta = ModelParams::zeros(Architecture::Linear, 2, 2);
        theta.layers[0].weight[(1, 0)] = 60.0;
        theta.layers[0].weight[(0, 0)] = -60.0;
        let report = group_losses(&theta, &data, &[0, 0, 1, 1], 2).unwrap();
        assert!(report.losses[0].abs() < 1e-9);
        assert!((report.losses[1] - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn group_losses_match_scalar_oracle() {
        let data = tiny_dataset(3, 30, 3);
        let theta = seeded_model(4, 3, 3);
        let ids: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let report = group_losses(&theta, &data, &ids, 4).unwrap();
        // Scalar-loop oracle.
        let pred = forward(&theta, data.features.view()).unwrap();
        for g in 0..4 {
            let mut sum = 0.0;
            let mut count = 0.0;
            for i in 0..30 {
                if ids[i] == g {
                    sum += -pred.probabilities[(i, data.labels[i])].max(1e-12).ln();
                    count += 1.0;
                }
            }
            assert!((report.losses[g] - sum / count).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_groups_are_flagged_not_fatal() {
        let data = tiny_dataset(5, 8, 2);
        let theta = seeded_model(6, 3, 2);
        let report = group_losses(&theta, &data, &vec![0; 8], 3).unwrap();
        assert!(!report.empty[0]);
        assert!(report.empty[1] && report.empty[2]);
        assert_eq!(report.losses[1], 0.0);
    }

    #[test]
    fn hard_soft_memberships_reduce_to_group_losses() {
        let data = tiny_dataset(7, 20, 2);
        let theta = seeded_model(8, 3, 2);
        let p: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let assignment = GroupAssignment::new(p.clone()).unwrap();
        let soft = soft_group_losses(&theta, &data, &assignment, 4).unwrap();
        let ids: Vec<usize> = (0..20)
            .map(|i| if p[i] == 1.0 { data.labels[i] } else { 2 + data.labels[i] })
            .collect();
        let hard = group_losses(&theta, &data, &ids, 4).unwrap();
        for g in 0..4 {
            assert!((soft.losses[g] - hard.losses[g]).abs() < 1e-12);
        }
    }

    #[test]
    fn uninformative_soft_membership_gives_global_mean_in_binary_mode() {
        let data = tiny_dataset(9, 16, 2);
        let theta = seeded_model(10, 3, 2);
        let assignment = GroupAssignment::new(vec![0.5; 16]).unwrap();
        let report = soft_group_losses(&theta, &data, &assignment, 2).unwrap();
        let all = group_losses(&theta, &data, &vec![0; 16], 1).unwrap();
        assert!((report.losses[0] - all.losses[0]).abs() < 1e-12);
        assert!((report.losses[1] - all.losses[0]).abs() < 1e-12);
    }

    #[test]
    fn soft_group_losses_match_scalar_oracle() {
        let data = tiny_dataset(11, 25, 2);
        let theta = seeded_model(12, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
        let assignment = GroupAssignment::new(p.clone()).unwrap();
        let report = soft_group_losses(&theta, &data, &assignment, 4).unwrap();
        let pred = forward(&theta, data.features.view()).unwrap();
        for g in 0..4 {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..25 {
                let w = if g < 2 {
                    if data.labels[i] == g { p[i] } else { 0.0 }
                } else if data.labels[i] == g - 2 {
                    1.0 - p[i]
                } else {
                    0.0
                };
                num += w * -pred.probabilities[(i, data.labels[i])].max(1e-12).ln();
                den += w;
            }
            if den >= EMPTY_GROUP_MASS {
                assert!((report.losses[g] - num / den).abs() < 1e-12, "group {g}");
            }
        }
    }

    #[test]
    fn equal_losses_leave_q_unchanged() {
        let q = GroupWeights::new(vec![0.3, 0.5, 0.2]).unwrap();
        let next = update_q(&q, &[1.7, 1.7, 1.7], 0.4).unwrap();
        for (a, b) in q.q.iter().zip(&next.q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_computed_q_update() {
        let q = GroupWeights::new(vec![0.5, 0.5]).unwrap();
        let next = update_q(&q, &[2f64.ln(), 0.0], 1.0).unwrap();
        assert!((next.q[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((next.q[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn worst_group_weight_never_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let q = GroupWeights::new(raw.iter().map(|v| v / sum).collect()).unwrap();
            let losses: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
            let next = update_q(&q, &losses, 0.7).unwrap();
            let worst = losses
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(next.q[worst] >= q.q[worst] - 1e-12);
        }
    }

    #[test]
    fn q_update_is_shift_invariant() {
        let q = GroupWeights::new(vec![0.25, 0.35, 0.4]).unwrap();
        let losses = [0.3, 1.2, 0.8];
        let shifted: Vec<f64> = losses.iter().map(|l| l + 57.0).collect();
        let a = update_q(&q, &losses, 0.6).unwrap();
        let b = update_q(&q, &shifted, 0.6).unwrap();
        for (x, y) in a.q.iter().zip(&b.q) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_groups_keep_their_mass() {
        let q = GroupWeights::new(vec![0.25, 0.25, 0.5]).unwrap();
        let next = update_q_active(&q, &[5.0, 1.0, 0.0], 1.0, &[true, true, false]).unwrap();
        assert!((next.q[2] - 0.5).abs() < 1e-15);
        assert!((next.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(next.q[0] > next.q[1]);
    }

    #[test]
    fn q_stays_on_simplex_after_long_random_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut q = GroupWeights::uniform(5);
        for _ in 0..1000 {
            let losses: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..30.0)).collect();
            let step = rng.random_range(0.01..2.0);
            q = update_q(&q, &losses, step).unwrap();
            let sum: f64 = q.q.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(q.q.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn perfect_classifier_evaluates_to_ones() {
        let spec = GeneratorSpec { n_per_class: 50, ..GeneratorSpec::default() };
        let mut data = generate_biased(&spec).unwrap();
        // Make the labels recoverable exactly from one feature.
        for i in 0..data.len() {
            data.features[(i, 0)] = if data.labels[i] == 1 { 1.0 } else { -1.0 };
        }
        let mut theta = ModelParams::zeros(Architecture::Linear, data.dim(), 2);
        theta.layers[0].weight[(1, 0)] = 10.0;
        theta.layers[0].weight[(0, 0)] = -10.0;
        let report = evaluate(&theta, &data).unwrap();
        assert_eq!(report.avg_acc, 1.0);
        assert_eq!(report.robust_acc, 1.0);
        assert!(report.per_group_acc.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn majority_label_classifier_has_zero_robust_accuracy() {
        let spec = GeneratorSpec { n_per_class: 200, ..GeneratorSpec::default() };
        let data = generate_biased(&spec).unwrap();
        let mut theta = ModelParams::zeros(Architecture::Linear, data.dim(), 2);
        theta.layers[0].bias[0] = 5.0; // always predict class 0
        let report = evaluate(&theta, &data).unwrap();
        assert_eq!(report.robust_acc, 0.0);
        assert!((report.avg_acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evaluate_matches_confusion_count_oracle() {
        let spec = GeneratorSpec { n_per_class: 40, seed: 5, ..GeneratorSpec::default() };
        let data = generate_biased(&spec).unwrap();
        let theta = seeded_model(50, data.dim(), 2);
        let report = evaluate(&theta, &data).unwrap();
        let pred = forward(&theta, data.features.view()).unwrap();
        let hard = pred.argmax();
        let groups = data.true_group.as_ref().unwrap();
        let mut per_group = vec![(0usize, 0usize); 4];
        for i in 0..data.len() {
            per_group[groups[i]].1 += 1;
            if hard[i] == data.labels[i] {
                per_group[groups[i]].0 += 1;
            }
        }
        let mut worst = f64::INFINITY;
        let mut total = 0usize;
        for g in 0..4 {
            let (c, n) = per_group[g];
            total += c;
            if n > 0 {
                let acc = c as f64 / n as f64;
                worst = worst.min(acc);
                assert!((report.per_group_acc[g] - acc).abs() < 1e-12);
            }
        }
        assert!((report.avg_acc - total as f64 / data.len() as f64).abs() < 1e-12);
        assert!((report.robust_acc - worst).abs() < 1e-12);
    }

    #[test]
    fn evaluate_requires_true_groups() {
        let data = tiny_dataset(60, 6, 2);
        let theta = seeded_model(61, 3, 2);
        assert!(matches!(evaluate(&theta, &data).unwrap_err(), Error::MissingGroups));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn update_q_preserves_the_simplex(
                seed in 0u64..500,
                m in 2usize..8,
                step in 0.0f64..3.0,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.001..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                let q = GroupWeights::new(raw.iter().map(|v| v / sum).collect()).unwrap();
                let losses: Vec<f64> = (0..m).map(|_| rng.random_range(-10.0..30.0)).collect();
                let next = update_q(&q, &losses, step).unwrap();
                prop_assert!((next.q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(next.q.iter().all(|&v| v >= 0.0));
            }
        }
    }
}
