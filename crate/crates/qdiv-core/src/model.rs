//! Differentiable classifiers with exact analytic gradients.
//!
//! Two architectures are supported: multinomial logistic regression and a
//! one-hidden-layer tanh network. The loss is per-example weighted
//! cross-entropy over soft targets; gradients are computed by hand (no
//! autodiff) and are checked against finite differences in the tests.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities inside logarithms so a confident
/// misprediction yields a large finite loss instead of -inf.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Linear,
    OneHidden { hidden: usize },
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    /// Accepts `linear` or `hidden:<units>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "linear" {
            return Ok(Architecture::Linear);
        }
        if let Some(h) = s.strip_prefix("hidden:") {
            let hidden: usize = h
                .parse()
                .map_err(|_| Error::invalid("architecture", format!("bad hidden size {h:?}")))?;
            if hidden == 0 {
                return Err(Error::invalid("architecture", "hidden size must be >= 1"));
            }
            return Ok(Architecture::OneHidden { hidden });
        }
        Err(Error::invalid(
            "architecture",
            format!("expected `linear` or `hidden:<units>`, got {s:?}"),
        ))
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Linear => write!(f, "linear"),
            Architecture::OneHidden { hidden } => write!(f, "hidden:{hidden}"),
        }
    }
}

/// One dense layer: `weight` is [out x in], `bias` is [out].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameters of a classifier (or of a gradient, which shares the shape).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: Architecture,
    pub layers: Vec<Layer>,
}

impl ModelParams {
    /// Fresh parameters with entries drawn uniformly from [-init_scale, init_scale).
    /// Entry order is fixed (row-major weights, then bias, layer by layer) so a
    /// seeded generator yields reproducible models.
    pub fn init<R: Rng + ?Sized>(
        arch: Architecture,
        input_dim: usize,
        num_classes: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 {
            return Err(Error::invalid("model dims", "input_dim and num_classes must be >= 1"));
        }
        if !(init_scale > 0.0) || !init_scale.is_finite() {
            return Err(Error::invalid("init_scale", "must be finite and > 0"));
        }
        let mut dense = |rows: usize, cols: usize| -> Layer {
            let w: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(-init_scale..init_scale))
                .collect();
            let b: Vec<f64> = (0..rows).map(|_| rng.random_range(-init_scale..init_scale)).collect();
            Layer {
                weight: Array2::from_shape_vec((rows, cols), w).expect("shape from counts"),
                bias: Array1::from_vec(b),
            }
        };
        let layers = match arch {
            Architecture::Linear => vec![dense(num_classes, input_dim)],
            Architecture::OneHidden { hidden } => {
                vec![dense(hidden, input_dim), dense(num_classes, hidden)]
            }
        };
        Ok(ModelParams { arch, layers })
    }

    /// All-zero parameters of the given shape.
    pub fn zeros(arch: Architecture, input_dim: usize, num_classes: usize) -> Self {
        let dense = |rows: usize, cols: usize| Layer {
            weight: Array2::zeros((rows, cols)),
            bias: Array1::zeros(rows),
        };
        let layers = match arch {
            Architecture::Linear => vec![dense(num_classes, input_dim)],
            Architecture::OneHidden { hidden } => {
                vec![dense(hidden, input_dim), dense(num_classes, hidden)]
            }
        };
        ModelParams { arch, layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").weight.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    fn same_shape(&self, other: &ModelParams) -> bool {
        self.arch == other.arch
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.dim() == b.weight.dim() && a.bias.dim() == b.bias.dim())
    }
}

/// Logits and row-normalized probabilities for a batch.
#[derive(Debug, Clone)]
pub struct PredictionBatch {
    pub logits: Array2<f64>,
    pub probabilities: Array2<f64>,
}

impl PredictionBatch {
    /// Argmax class per row; ties resolve to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        self.logits
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0usize;
                let mut best_v = row[0];
                for (c, &v) in row.iter().enumerate().skip(1) {
                    if v > best_v {
                        best = c;
                        best_v = v;
                    }
                }
                best
            })
            .collect()
    }
}

/// A batch of target distributions, one row per example, each on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabels(Array2<f64>);

impl SoftLabels {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        for (i, row) in rows.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &v in row.iter() {
                if !(v >= 0.0) {
                    return Err(Error::invalid(
                        "soft label",
                        format!("row {i} has a negative or NaN entry"),
                    ));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(
                    "soft label",
                    format!("row {i} sums to {sum}, expected 1 within 1e-9"),
                ));
            }
        }
        Ok(SoftLabels(rows))
    }

    /// One-hot rows from hard class labels.
    pub fn from_hard(labels: &[usize], num_classes: usize) -> Result<Self> {
        let mut rows = Array2::zeros((labels.len(), num_classes));
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::invalid(
                    "label",
                    format!("label {y} at row {i} out of range for {num_classes} classes"),
                ));
            }
            rows[(i, y)] = 1.0;
        }
        Ok(SoftLabels(rows))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    /// Gather rows by index. Rows of a valid batch stay valid.
    pub fn select(&self, indices: &[usize]) -> SoftLabels {
        SoftLabels(self.0.select(Axis(0), indices))
    }

    /// Stack two batches vertically.
    pub fn vstack(&self, other: &SoftLabels) -> Result<SoftLabels> {
        if self.num_classes() != other.num_classes() {
            return Err(Error::dim("soft label vstack", self.num_classes(), other.num_classes()));
        }
        let stacked = ndarray::concatenate(Axis(0), &[self.0.view(), other.0.view()])
            .expect("widths checked");
        Ok(SoftLabels(stacked))
    }
}

/// Row-wise softmax via the log-sum-exp shift.
fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut probs = logits.clone();
    for mut row in probs.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    probs
}

fn check_feature_width(params: &ModelParams, features: &ArrayView2<f64>, context: &str) -> Result<()> {
    if features.ncols() != params.input_dim() {
        return Err(Error::dim(
            context,
            format!("{} feature columns", params.input_dim()),
            format!("{}", features.ncols()),
        ));
    }
    Ok(())
}

/// Forward pass plus the hidden activations needed for backprop.
fn forward_cached(
    params: &ModelParams,
    features: &ArrayView2<f64>,
) -> Result<(PredictionBatch, Option<Array2<f64>>)> {
    check_feature_width(params, features, "forward")?;
    let (logits, hidden) = match params.arch {
        Architecture::Linear => {
            let l = &params.layers[0];
            (features.dot(&l.weight.t()) + &l.bias, None)
        }
        Architecture::OneHidden { .. } => {
            let l1 = &params.layers[0];
            let l2 = &params.layers[1];
            let hidden = (features.dot(&l1.weight.t()) + &l1.bias).mapv(f64::tanh);
            let logits = hidden.dot(&l2.weight.t()) + &l2.bias;
            (logits, Some(hidden))
        }
    };
    let probabilities = softmax_rows(&logits);
    Ok((PredictionBatch { logits, probabilities }, hidden))
}

/// Forward pass: logits and row-normalized probabilities.
pub fn forward(params: &ModelParams, features: ArrayView2<f64>) -> Result<PredictionBatch> {
    forward_cached(params, &features).map(|(pred, _)| pred)
}

fn check_weights(weights: &[f64], n: usize) -> Result<f64> {
    if weights.len() != n {
        return Err(Error::dim("sample weights", n, weights.len()));
    }
    let mut sum = 0.0;
    for &w in weights {
        if !(w >= 0.0) {
            return Err(Error::invalid("sample weight", "weights must be nonnegative"));
        }
        sum += w;
    }
    if sum <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    Ok(sum)
}

/// Weighted cross-entropy over soft targets.
///
/// `per_example[i] = -sum_c targets[i][c] * ln(prob[i][c])`, and the total is
/// the weight-normalized mean `sum_i w_i * per_example[i] / sum_i w_i`.
pub fn weighted_soft_ce_loss(
    pred: &PredictionBatch,
    targets: &SoftLabels,
    sample_weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = pred.probabilities.nrows();
    if targets.nrows() != n || targets.num_classes() != pred.probabilities.ncols() {
        return Err(Error::dim(
            "loss targets",
            format!("{}x{}", n, pred.probabilities.ncols()),
            format!("{}x{}", targets.nrows(), targets.num_classes()),
        ));
    }
    let wsum = check_weights(sample_weights, n)?;
    let per_example = per_example_ce(&pred.probabilities, targets);
    let total = per_example
        .iter()
        .zip(sample_weights)
        .map(|(l, w)| l * w)
        .sum::<f64>()
        / wsum;
    Ok((total, per_example))
}

fn per_example_ce(probs: &Array2<f64>, targets: &SoftLabels) -> Vec<f64> {
    probs
        .rows()
        .into_iter()
        .zip(targets.as_array().rows())
        .map(|(p, t)| {
            let mut loss = 0.0;
            for (&pc, &tc) in p.iter().zip(t.iter()) {
                if tc != 0.0 {
                    loss -= tc * pc.clamp(PROB_FLOOR, 1.0).ln();
                }
            }
            loss
        })
        .collect()
}

/// Backprop through the network given `d(loss)/d(logits)` per example.
///
/// This is the shared entry point for every loss in the crate: softmax
/// cross-entropy supplies `w_i/sum(w) * (p_i - t_i)`, and the assigner
/// objective supplies its own upstream term.
pub fn grad_from_dlogits(
    params: &ModelParams,
    features: ArrayView2<f64>,
    dlogits: &Array2<f64>,
) -> Result<ModelParams> {
    check_feature_width(params, &features, "grad")?;
    if dlogits.nrows() != features.nrows() || dlogits.ncols() != params.num_classes() {
        return Err(Error::dim(
            "grad dlogits",
            format!("{}x{}", features.nrows(), params.num_classes()),
            format!("{}x{}", dlogits.nrows(), dlogits.ncols()),
        ));
    }
    let layers = match params.arch {
        Architecture::Linear => {
            vec![Layer {
                weight: dlogits.t().dot(&features),
                bias: dlogits.sum_axis(Axis(0)),
            }]
        }
        Architecture::OneHidden { .. } => {
            let l1 = &params.layers[0];
            let l2 = &params.layers[1];
            let hidden = (features.dot(&l1.weight.t()) + &l1.bias).mapv(f64::tanh);
            let g2 = Layer {
                weight: dlogits.t().dot(&hidden),
                bias: dlogits.sum_axis(Axis(0)),
            };
            // d tanh(z) = 1 - tanh(z)^2
            let dhidden = dlogits.dot(&l2.weight) * hidden.mapv(|a| 1.0 - a * a);
            let g1 = Layer {
                weight: dhidden.t().dot(&features),
                bias: dhidden.sum_axis(Axis(0)),
            };
            vec![g1, g2]
        }
    };
    Ok(ModelParams { arch: params.arch, layers })
}

/// Analytic gradient of [`weighted_soft_ce_loss`] with respect to every parameter.
pub fn grad(
    params: &ModelParams,
    features: ArrayView2<f64>,
    targets: &SoftLabels,
    sample_weights: &[f64],
) -> Result<ModelParams> {
    let (pred, _) = forward_cached(params, &features)?;
    let n = features.nrows();
    if targets.nrows() != n || targets.num_classes() != params.num_classes() {
        return Err(Error::dim(
            "grad targets",
            format!("{}x{}", n, params.num_classes()),
            format!("{}x{}", targets.nrows(), targets.num_classes()),
        ));
    }
    let wsum = check_weights(sample_weights, n)?;
    let mut dlogits = &pred.probabilities - targets.as_array();
    for (mut row, &w) in dlogits.rows_mut().into_iter().zip(sample_weights) {
        row *= w / wsum;
    }
    grad_from_dlogits(params, features, &dlogits)
}

/// One gradient-descent update: `params - lr * gradient`.
pub fn sgd_step(params: &ModelParams, gradient: &ModelParams, lr: f64) -> Result<ModelParams> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::invalid("lr", "learning rate must be finite and > 0"));
    }
    if !params.same_shape(gradient) {
        return Err(Error::dim("sgd_step", "gradient with the parameter shape", "mismatched shape"));
    }
    if !gradient.is_finite() {
        return Err(Error::NonFinite {
            what: "gradient".into(),
            context: "sgd_step".into(),
        });
    }
    let layers = params
        .layers
        .iter()
        .zip(&gradient.layers)
        .map(|(p, g)| Layer {
            weight: &p.weight - &(lr * &g.weight),
            bias: &p.bias - &(lr * &g.bias),
        })
        .collect();
    let next = ModelParams { arch: params.arch, layers };
    if !next.is_finite() {
        return Err(Error::NonFinite {
            what: "parameters".into(),
            context: "sgd_step".into(),
        });
    }
    Ok(next)
}
