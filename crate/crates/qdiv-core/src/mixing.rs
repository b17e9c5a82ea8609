//! Cross-group mixing.
//!
//! Synthetic examples are convex combinations of two source rows where the
//! second row always comes from the estimated minority group. For
//! majority-minority pairs the minority row always receives the larger
//! coefficient (the sampled ratio is folded below 0.5 before it hits the
//! majority side), so mixed points diversify the minority region instead of
//! reinforcing the spurious one.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::assigner::GroupAssignment;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::SoftLabels;

/// Mixing hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    /// Concentration of the symmetric Beta distribution the ratio is drawn from.
    pub alpha: f64,
    /// Mixed examples per epoch as a fraction of n.
    pub fraction: f64,
    /// Seed for standalone batch construction (trainers use their own stream).
    pub seed: u64,
}

impl Default for MixSpec {
    fn default() -> Self {
        MixSpec {
            alpha: 9.0,
            fraction: 0.5,
            seed: 0,
        }
    }
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid("mix alpha", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::invalid("mix_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Which side of the pair the first element comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// First element from the majority group, second from the minority.
    MajMin,
    /// Both elements from the minority group.
    MinMin,
}

/// Draw a mixing ratio from Beta(alpha, alpha), strictly inside (0, 1).
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("alpha", "must be finite and > 0"));
    }
    let beta = Beta::new(alpha, alpha).expect("alpha validated");
    // Resample boundary hits so downstream convexity stays strict.
    loop {
        let lambda = beta.sample(rng);
        if lambda > 0.0 && lambda < 1.0 {
            return Ok(lambda);
        }
    }
}

/// Convex combination of two (feature row, soft label) pairs.
///
/// For `MinMin` the coefficient on the first element is exactly `lambda`.
/// For `MajMin` it is `min(lambda, 1 - lambda)`, so the minority element's
/// coefficient is always at least 0.5.
pub fn mix_pair(
    xi: ArrayView1<f64>,
    yi: ArrayView1<f64>,
    xj: ArrayView1<f64>,
    yj: ArrayView1<f64>,
    lambda: f64,
    kind: PairKind,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid("lambda", "must lie strictly inside (0, 1)"));
    }
    if xi.len() != xj.len() || yi.len() != yj.len() {
        return Err(Error::dim("mix_pair", xi.len(), xj.len()));
    }
    let coeff_i = match kind {
        PairKind::MinMin => lambda,
        PairKind::MajMin => lambda.min(1.0 - lambda),
    };
    let x = &xi.to_owned() * coeff_i + &xj.to_owned() * (1.0 - coeff_i);
    let y = &yi.to_owned() * coeff_i + &yj.to_owned() * (1.0 - coeff_i);
    Ok((x, y))
}

/// Provenance of one mixed example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixSource {
    /// Index of the first element (drawn from the whole dataset).
    pub i: usize,
    /// Index of the second element (always minority).
    pub j: usize,
    /// Effective coefficient applied to element i.
    pub coeff_i: f64,
    pub kind: PairKind,
}

/// A batch of mixed examples.
#[derive(Debug, Clone)]
pub struct MixedBatch {
    pub features: Array2<f64>,
    pub labels: SoftLabels,
    /// Reweighting cell per mixed example under the membership-by-label
    /// convention: minority side, class = argmax of the mixed label.
    pub group_ids: Vec<usize>,
    pub sources: Vec<MixSource>,
}

impl MixedBatch {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    fn empty(d: usize, c: usize) -> Self {
        MixedBatch {
            features: Array2::zeros((0, d)),
            labels: SoftLabels::new(Array2::zeros((0, c))).expect("no rows to validate"),
            group_ids: Vec::new(),
            sources: Vec::new(),
        }
    }
}

/// Build `round(fraction * n)` mixed examples from a dataset and an assignment.
pub fn build_mixed_groups(
    data: &Dataset,
    assignment: &GroupAssignment,
    spec: &MixSpec,
) -> Result<MixedBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    build_mixed_groups_with_rng(data, assignment, spec, &mut rng)
}

/// As [`build_mixed_groups`] but drawing from a caller-owned stream, so a
/// trainer gets fresh pairs every epoch under one seed.
pub fn build_mixed_groups_with_rng(
    data: &Dataset,
    assignment: &GroupAssignment,
    spec: &MixSpec,
    rng: &mut ChaCha8Rng,
) -> Result<MixedBatch> {
    spec.validate()?;
    if assignment.len() != data.len() {
        return Err(Error::dim("mixing assignment", data.len(), assignment.len()));
    }
    let n = data.len();
    let c = data.num_classes;
    let k = (spec.fraction * n as f64).round() as usize;
    if k == 0 {
        return Ok(MixedBatch::empty(data.dim(), c));
    }
    let minority = assignment.minority_indices();
    if minority.is_empty() {
        return Err(Error::EmptyMinority);
    }
    let one_hot = SoftLabels::from_hard(&data.labels, c)?;
    let mut features = Array2::zeros((k, data.dim()));
    let mut labels = Array2::zeros((k, c));
    let mut group_ids = Vec::with_capacity(k);
    let mut sources = Vec::with_capacity(k);
    for row in 0..k {
        // First element uniform over everything (with replacement), second
        // uniform over the minority pool: both mixing kinds arise naturally.
        let i = rng.random_range(0..n);
        let j = minority[rng.random_range(0..minority.len())];
        let kind = if assignment.hard[i] == 1 {
            PairKind::MajMin
        } else {
            PairKind::MinMin
        };
        let lambda = sample_lambda(spec.alpha, rng)?;
        let (x, y) = mix_pair(
            data.features.row(i),
            one_hot.as_array().row(i),
            data.features.row(j),
            one_hot.as_array().row(j),
            lambda,
            kind,
        )?;
        let coeff_i = match kind {
            PairKind::MinMin => lambda,
            PairKind::MajMin => lambda.min(1.0 - lambda),
        };
        let mut argmax = 0usize;
        for cidx in 1..c {
            if y[cidx] > y[argmax] {
                argmax = cidx;
            }
        }
        features.row_mut(row).assign(&x);
        labels.row_mut(row).assign(&y);
        group_ids.push(argmax); // minority cell: 0 * C + argmax
        sources.push(MixSource { i, j, coeff_i, kind });
    }
    Ok(MixedBatch {
        features,
        labels: SoftLabels::new(labels)?,
        group_ids,
        sources,
    })
}
