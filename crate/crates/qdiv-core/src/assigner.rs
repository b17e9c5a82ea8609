//! Parameterized group assigner.
//!
//! A two-class classifier over (features, one-hot label) predicts whether an
//! example sits in the minority or majority group. Its training objective is
//! the q-weighted soft-group predictor loss plus a label-balance regularizer:
//! the KL divergence of each estimated group's label marginal from the
//! overall label marginal. Soft memberships keep the objective differentiable;
//! hard argmax labels are used only for mixing and bookkeeping.

use ndarray::{Array2, ArrayView2};

use crate::data::Dataset;
use crate::dro::{soft_group_parts, GroupWeights, EMPTY_GROUP_MASS};
use crate::error::{Error, Result};
use crate::model::{
    forward, grad_from_dlogits, weighted_soft_ce_loss, ModelParams, SoftLabels,
};

/// Soft and hard group membership for every example.
///
/// `p_minority[i]` is the probability that example i belongs to the minority
/// group; `hard[i]` is the argmax with ties resolved to majority (1).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    pub p_minority: Vec<f64>,
    pub hard: Vec<u8>,
}

impl GroupAssignment {
    pub fn new(p_minority: Vec<f64>) -> Result<Self> {
        if p_minority.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("p_minority", "entries must lie in [0, 1]"));
        }
        let hard = p_minority.iter().map(|&p| u8::from(p <= 0.5)).collect();
        Ok(GroupAssignment { p_minority, hard })
    }

    /// Hard assignment from a minority mask (no soft information).
    pub fn from_minority_mask(mask: &[bool]) -> Self {
        GroupAssignment {
            p_minority: mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
            hard: mask.iter().map(|&m| u8::from(!m)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.p_minority.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_minority.is_empty()
    }

    pub fn minority_indices(&self) -> Vec<usize> {
        self.hard
            .iter()
            .enumerate()
            .filter(|(_, &h)| h == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Assigner input rows: features concatenated with the one-hot label.
#[derive(Debug, Clone)]
pub struct AssignerInput(Array2<f64>);

impl AssignerInput {
    pub fn build(data: &Dataset) -> Result<Self> {
        let n = data.len();
        let d = data.dim();
        let c = data.num_classes;
        let mut rows = Array2::zeros((n, d + c));
        for i in 0..n {
            for j in 0..d {
                rows[(i, j)] = data.features[(i, j)];
            }
            rows[(i, d + data.labels[i])] = 1.0;
        }
        Ok(AssignerInput(rows))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn width(&self) -> usize {
        self.0.ncols()
    }
}

/// Run the assigner over a dataset: soft minority probabilities and hard labels.
pub fn assign(phi: &ModelParams, data: &Dataset) -> Result<GroupAssignment> {
    let input = AssignerInput::build(data)?;
    if phi.input_dim() != input.width() {
        return Err(Error::dim(
            "assign",
            format!("{} assigner inputs (features + one-hot label)", input.width()),
            format!("{}", phi.input_dim()),
        ));
    }
    if phi.num_classes() != 2 {
        return Err(Error::dim("assign", "2 assigner outputs", phi.num_classes()));
    }
    let pred = forward(phi, input.view())?;
    let p_minority = pred.probabilities.column(0).to_vec();
    GroupAssignment::new(p_minority)
}

/// Label marginals conditioned on the soft assignment, plus the overall one.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMarginals {
    /// P(y | estimated majority), length C.
    pub majority: Vec<f64>,
    /// P(y | estimated minority), length C.
    pub minority: Vec<f64>,
    /// Empirical P(y), length C.
    pub overall: Vec<f64>,
}

/// Bayes-rule conditional label marginals from soft memberships:
/// `P(y=c | majority) = sum_i 1{y_i=c} (1-p_i) / sum_i (1-p_i)`, and
/// symmetrically for the minority side.
pub fn conditional_label_marginals(
    assignment: &GroupAssignment,
    labels: &[usize],
    num_classes: usize,
) -> Result<LabelMarginals> {
    let n = labels.len();
    if assignment.len() != n || n == 0 {
        return Err(Error::dim("marginals", n.max(1), assignment.len()));
    }
    let mut maj = vec![0.0; num_classes];
    let mut min = vec![0.0; num_classes];
    let mut overall = vec![0.0; num_classes];
    let mut maj_mass = 0.0;
    let mut min_mass = 0.0;
    for (&y, &p) in labels.iter().zip(&assignment.p_minority) {
        if y >= num_classes {
            return Err(Error::invalid("label", format!("label {y} out of range")));
        }
        min[y] += p;
        min_mass += p;
        maj[y] += 1.0 - p;
        maj_mass += 1.0 - p;
        overall[y] += 1.0;
    }
    if maj_mass < EMPTY_GROUP_MASS || min_mass < EMPTY_GROUP_MASS {
        return Err(Error::DegenerateAssignment);
    }
    for c in 0..num_classes {
        maj[c] /= maj_mass;
        min[c] /= min_mass;
        overall[c] /= n as f64;
    }
    Ok(LabelMarginals {
        majority: maj,
        minority: min,
        overall,
    })
}

fn kl(p: &[f64], r: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (c, (&pc, &rc)) in p.iter().zip(r).enumerate() {
        if pc == 0.0 {
            continue; // 0 ln 0 = 0 convention
        }
        if rc == 0.0 {
            return Err(Error::KlUndefined { class: c });
        }
        sum += pc * (pc / rc).ln();
    }
    Ok(sum)
}

/// Label-balance regularizer:
/// `KL(P(y|majority) || P(y)) + KL(P(y|minority) || P(y))`.
pub fn balance_loss(marginals: &LabelMarginals) -> Result<f64> {
    Ok(kl(&marginals.majority, &marginals.overall)? + kl(&marginals.minority, &marginals.overall)?)
}

/// Scalar objective and analytic gradient of the assigner.
///
/// `loss = sum_g q_g * Lhat_g + beta * balance`, where `Lhat_g` is the
/// soft-membership-weighted mean predictor loss of group g with the predictor
/// frozen. `q.len()` selects the grouping: 2 for membership alone, 2C for
/// membership crossed with the label.
pub fn assigner_loss(
    phi: &ModelParams,
    theta: &ModelParams,
    data: &Dataset,
    q: &GroupWeights,
    beta: f64,
) -> Result<(f64, ModelParams)> {
    let targets = SoftLabels::from_hard(&data.labels, data.num_classes)?;
    let pred = forward(theta, data.features.view())?;
    let (_, per_example) = weighted_soft_ce_loss(&pred, &targets, &vec![1.0; data.len()])?;
    assigner_objective(phi, data, &per_example, q, beta, 1.0)
}

/// Fit objective for the interactive modeling round: class-balanced
/// cross-entropy of the assigner against a pseudo-labeling of the data
/// (minority = examples the predictor persistently struggles with), plus the
/// label-balance regularizer.
///
/// `objective = sum_i w_i CE(phi(x_i, y_i), g*_i) / sum_i w_i + beta * balance`
/// with `g*_i = minority` where `minority_target[i]` holds.
pub(crate) fn assigner_fit_objective(
    phi: &ModelParams,
    data: &Dataset,
    minority_target: &[bool],
    sample_weights: &[f64],
    beta: f64,
) -> Result<(f64, ModelParams)> {
    let n = data.len();
    if minority_target.len() != n || sample_weights.len() != n {
        return Err(Error::dim("assigner fit", n, minority_target.len().min(sample_weights.len())));
    }
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta", "must be >= 0"));
    }
    let input = AssignerInput::build(data)?;
    if phi.input_dim() != input.width() || phi.num_classes() != 2 {
        return Err(Error::dim("assigner fit", input.width(), phi.input_dim()));
    }
    let pred = forward(phi, input.view())?;
    let group_targets: Vec<usize> = minority_target.iter().map(|&m| usize::from(!m)).collect();
    let targets = SoftLabels::from_hard(&group_targets, 2)?;
    let (ce, _) = weighted_soft_ce_loss(&pred, &targets, sample_weights)?;
    let wsum: f64 = sample_weights.iter().sum();
    let mut dlogits = &pred.probabilities - targets.as_array();
    for (mut row, &w) in dlogits.rows_mut().into_iter().zip(sample_weights) {
        row *= w / wsum;
    }
    let mut loss = ce;

    if beta > 0.0 {
        let p: Vec<f64> = pred.probabilities.column(0).to_vec();
        let min_mass: f64 = p.iter().sum();
        let maj_mass: f64 = n as f64 - min_mass;
        if min_mass < EMPTY_GROUP_MASS || maj_mass < EMPTY_GROUP_MASS {
            return Err(Error::DegenerateAssignment);
        }
        let assignment = GroupAssignment::new(p.clone())?;
        let marginals = conditional_label_marginals(&assignment, &data.labels, data.num_classes)?;
        let kl_maj = kl(&marginals.majority, &marginals.overall)?;
        let kl_min = kl(&marginals.minority, &marginals.overall)?;
        loss += beta * (kl_maj + kl_min);
        for i in 0..n {
            let y = data.labels[i];
            let r = marginals.overall[y];
            let vm = (marginals.minority[y].max(1e-300) / r).ln();
            let vj = (marginals.majority[y].max(1e-300) / r).ln();
            let dp = beta * ((vm - kl_min) / min_mass - (vj - kl_maj) / maj_mass);
            let s = dp * p[i] * (1.0 - p[i]);
            dlogits[(i, 0)] += s;
            dlogits[(i, 1)] -= s;
        }
    }

    let gradient = grad_from_dlogits(phi, input.view(), &dlogits)?;
    Ok((loss, gradient))
}

/// Generalized form of [`assigner_loss`] with the per-example predictor
/// losses precomputed and a sign on the group-loss term:
/// `objective = direction * sum_g q_g Lhat_g + beta * balance`.
///
/// The interactive trainer descends this with `direction = -1`, i.e. it
/// raises the q-weighted group loss while keeping labels balanced. Under that
/// sign, examples the predictor struggles with drain into the upweighted
/// cells, which is what turns the predictor's loss into supervision for
/// group discovery. `direction = +1` recovers [`assigner_loss`].
pub(crate) fn assigner_objective(
    phi: &ModelParams,
    data: &Dataset,
    per_example: &[f64],
    q: &GroupWeights,
    beta: f64,
    direction: f64,
) -> Result<(f64, ModelParams)> {
    q.validate()?;
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta", "must be >= 0"));
    }
    let n = data.len();
    if per_example.len() != n {
        return Err(Error::dim("assigner loss", n, per_example.len()));
    }
    let c = data.num_classes;
    let m = q.len();
    let by_label = m == 2 * c && c >= 2;
    if !by_label && m != 2 {
        return Err(Error::invalid(
            "q",
            format!("expected 2 or {} groups, got {m}", 2 * c),
        ));
    }

    let input = AssignerInput::build(data)?;
    let assignment = assign(phi, data)?;
    let p = &assignment.p_minority;

    let min_mass: f64 = p.iter().sum();
    let maj_mass: f64 = n as f64 - min_mass;
    if min_mass < EMPTY_GROUP_MASS || maj_mass < EMPTY_GROUP_MASS {
        return Err(Error::DegenerateAssignment);
    }

    let parts = soft_group_parts(per_example, p, &data.labels, c, m)?;
    let weighted: f64 = (0..m)
        .filter(|&g| !parts.empty[g])
        .map(|g| q.q[g] * parts.losses[g])
        .sum();
    let mut loss = direction * weighted;

    // Balance term and its per-example derivative pieces.
    let marginals = conditional_label_marginals(&assignment, &data.labels, c)?;
    let (kl_maj, kl_min) = (
        kl(&marginals.majority, &marginals.overall)?,
        kl(&marginals.minority, &marginals.overall)?,
    );
    if beta > 0.0 {
        loss += beta * (kl_maj + kl_min);
    }

    // d loss / d p_i, accumulated over the group-loss and balance terms.
    let mut dp = vec![0.0; n];
    for i in 0..n {
        let (g_min, g_maj) = if by_label {
            (data.labels[i], c + data.labels[i])
        } else {
            (0, 1)
        };
        if !parts.empty[g_min] {
            dp[i] += direction * q.q[g_min] * (per_example[i] - parts.losses[g_min]) / parts.mass[g_min];
        }
        if !parts.empty[g_maj] {
            dp[i] -= direction * q.q[g_maj] * (per_example[i] - parts.losses[g_maj]) / parts.mass[g_maj];
        }
        if beta > 0.0 {
            let y = data.labels[i];
            let r = marginals.overall[y];
            let vm = (marginals.minority[y].max(1e-300) / r).ln();
            let vj = (marginals.majority[y].max(1e-300) / r).ln();
            dp[i] += beta * ((vm - kl_min) / min_mass - (vj - kl_maj) / maj_mass);
        }
    }

    // Through the two-class softmax: dz0 = dp * p(1-p), dz1 = -dz0.
    let mut dlogits = Array2::zeros((n, 2));
    for i in 0..n {
        let s = dp[i] * p[i] * (1.0 - p[i]);
        dlogits[(i, 0)] = s;
        dlogits[(i, 1)] = -s;
    }
    let gradient = grad_from_dlogits(phi, input.view(), &dlogits)?;
    Ok((loss, gradient))
}
