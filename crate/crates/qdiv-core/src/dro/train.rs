//! The trainer zoo: ERM, CVaR-DRO, JTT, oracle group DRO, and the
//! interactive Q-Diversity loop.
//!
//! All trainers share one SGD engine and draw every stochastic choice from
//! purpose-addressed ChaCha streams, which makes the documented reductions
//! exact at the trajectory level: CVaR with a full subset, JTT with unit
//! upweight, and Q-Diversity with mixing off over oracle groups replay ERM /
//! oracle DRO step for step under the same seed.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::assigner::{assign, assigner_fit_objective, GroupAssignment};
use crate::data::{vstack_features, Dataset};
use crate::error::{Error, Result};
use crate::mixing::build_mixed_groups_with_rng;
use crate::model::{
    forward, grad_from_dlogits, sgd_step, weighted_soft_ce_loss, ModelParams, SoftLabels,
};
use crate::rng::{stream, Stream};

use super::{
    evaluate, group_parts, update_q_active, EpochStats, GroupMode, GroupWeights, Method,
    TrainConfig, TrainResult,
};

/// Per-example weights used by one SGD step.
enum WeightRule<'a> {
    Uniform,
    Cvar { alpha: f64 },
    PerExample(&'a [f64]),
    /// `w_i = q[g_i] / |g_i in batch|`, normalized by the exact q mass
    /// present in the batch.
    GroupQ { ids: &'a [usize], q: &'a [f64] },
}

/// Weights for the CVaR step: the `ceil(alpha * n)` highest-loss examples get
/// `1/alpha`, everything else 0. Ties break toward the lower index.
pub fn cvar_topk_weights(losses: &[f64], alpha: f64) -> Vec<f64> {
    let n = losses.len();
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| losses[b].partial_cmp(&losses[a]).unwrap().then(a.cmp(&b)));
    let mut weights = vec![0.0; n];
    for &i in order.iter().take(k) {
        weights[i] = 1.0 / alpha;
    }
    weights
}

/// One pass over shuffled minibatches.
fn sgd_epoch(
    theta: &mut ModelParams,
    features: &Array2<f64>,
    targets: &SoftLabels,
    rule: &WeightRule,
    batch_size: usize,
    lr: f64,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<()> {
    let n = features.nrows();
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(shuffle_rng);
    for chunk in indices.chunks(batch_size) {
        let bx = features.select(Axis(0), chunk);
        let bt = targets.select(chunk);
        let pred = forward(theta, bx.view())?;
        let ones = vec![1.0; chunk.len()];
        let (_, per) = weighted_soft_ce_loss(&pred, &bt, &ones)?;
        if per.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite {
                what: "per-example loss".into(),
                context: "training step".into(),
            });
        }
        let (weights, wsum) = match rule {
            WeightRule::Uniform => {
                let w = ones;
                let s = chunk.len() as f64;
                (w, s)
            }
            WeightRule::Cvar { alpha } => {
                let w = cvar_topk_weights(&per, *alpha);
                let s = w.iter().sum();
                (w, s)
            }
            WeightRule::PerExample(all) => {
                let w: Vec<f64> = chunk.iter().map(|&i| all[i]).collect();
                let s = w.iter().sum();
                (w, s)
            }
            WeightRule::GroupQ { ids, q } => {
                let mut count = vec![0usize; q.len()];
                for &i in chunk {
                    count[ids[i]] += 1;
                }
                let w: Vec<f64> = chunk
                    .iter()
                    .map(|&i| q[ids[i]] / count[ids[i]] as f64)
                    .collect();
                // Exact mass of the groups present in this batch.
                let s = (0..q.len()).filter(|&g| count[g] > 0).map(|g| q[g]).sum();
                (w, s)
            }
        };
        if wsum <= 0.0 {
            return Err(Error::ZeroWeightSum);
        }
        let mut dlogits = &pred.probabilities - bt.as_array();
        for (mut row, &w) in dlogits.rows_mut().into_iter().zip(&weights) {
            row *= w / wsum;
        }
        let gradient = grad_from_dlogits(theta, bx.view(), &dlogits)?;
        *theta = sgd_step(theta, &gradient, lr)?;
    }
    Ok(())
}

fn per_example_losses(theta: &ModelParams, features: &Array2<f64>, targets: &SoftLabels) -> Result<Vec<f64>> {
    let pred = forward(theta, features.view())?;
    let ones = vec![1.0; features.nrows()];
    let (_, per) = weighted_soft_ce_loss(&pred, targets, &ones)?;
    Ok(per)
}

/// End-of-epoch accuracy (and true-group diagnostics when available).
fn epoch_stats(
    theta: &ModelParams,
    data: &Dataset,
    one_hot: &SoftLabels,
    group_losses: Vec<f64>,
    q: Vec<f64>,
) -> Result<EpochStats> {
    if data.true_group.is_some() {
        let report = evaluate(theta, data)?;
        let losses = if group_losses.is_empty() && data.group_count > 0 {
            let per = per_example_losses(theta, &data.features, one_hot)?;
            group_parts(&per, data.true_group.as_ref().unwrap(), data.group_count)?.losses
        } else {
            group_losses
        };
        Ok(EpochStats {
            avg_acc: report.avg_acc,
            robust_acc: Some(report.robust_acc),
            group_losses: losses,
            q,
        })
    } else {
        let pred = forward(theta, data.features.view())?;
        let correct = pred
            .argmax()
            .iter()
            .zip(&data.labels)
            .filter(|(a, b)| a == b)
            .count();
        Ok(EpochStats {
            avg_acc: correct as f64 / data.len() as f64,
            robust_acc: None,
            group_losses,
            q,
        })
    }
}

/// ERM / CVaR / JTT-phase engine: plain reweighted SGD.
fn run_reweighted(
    data: &Dataset,
    cfg: &TrainConfig,
    rule: &WeightRule,
    epochs: usize,
    init_stream: Stream,
    shuffle_stream: Stream,
) -> Result<(ModelParams, Vec<EpochStats>)> {
    let one_hot = SoftLabels::from_hard(&data.labels, data.num_classes)?;
    let mut init_rng = stream(cfg.seed, init_stream);
    let mut theta = ModelParams::init(
        cfg.predictor_arch,
        data.dim(),
        data.num_classes,
        cfg.init_scale,
        &mut init_rng,
    )?;
    let mut shuffle_rng = stream(cfg.seed, shuffle_stream);
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        sgd_epoch(
            &mut theta,
            &data.features,
            &one_hot,
            rule,
            cfg.batch_size,
            cfg.predictor_lr,
            &mut shuffle_rng,
        )?;
        history.push(epoch_stats(&theta, data, &one_hot, Vec::new(), Vec::new())?);
    }
    Ok((theta, history))
}

/// Standard empirical risk minimization.
pub fn train_erm(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let (theta, history) = run_reweighted(
        data,
        cfg,
        &WeightRule::Uniform,
        cfg.epochs,
        Stream::PredictorInit,
        Stream::Shuffle,
    )?;
    Ok(TrainResult {
        theta,
        phi: None,
        history,
        jtt_error_set: None,
        assigner_reinits: 0,
        mixing_skips: 0,
    })
}

/// CVaR-DRO: each step upweights the highest-loss fraction of the batch.
pub fn train_cvar(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let rule = WeightRule::Cvar { alpha: cfg.cvar_alpha };
    let (theta, history) = run_reweighted(
        data,
        cfg,
        &rule,
        cfg.epochs,
        Stream::PredictorInit,
        Stream::Shuffle,
    )?;
    Ok(TrainResult {
        theta,
        phi: None,
        history,
        jtt_error_set: None,
        assigner_reinits: 0,
        mixing_skips: 0,
    })
}

/// JTT: identify the weak model's error set, then retrain from scratch with
/// that set upweighted.
pub fn train_jtt(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    // Phase 1: a weaker ERM model on its own streams.
    let (ident, _) = run_reweighted(
        data,
        cfg,
        &WeightRule::Uniform,
        cfg.jtt_id_epochs,
        Stream::IdPhaseInit,
        Stream::IdPhaseShuffle,
    )?;
    let pred = forward(&ident, data.features.view())?;
    let error_set: Vec<usize> = pred
        .argmax()
        .iter()
        .zip(&data.labels)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect();
    if error_set.is_empty() {
        eprintln!("jtt: identification phase made no errors; retraining degenerates to erm");
    }
    let mut weights = vec![1.0; data.len()];
    for &i in &error_set {
        weights[i] = cfg.jtt_upweight;
    }
    // Phase 2: fresh model on the standard streams.
    let (theta, history) = run_reweighted(
        data,
        cfg,
        &WeightRule::PerExample(&weights),
        cfg.epochs,
        Stream::PredictorInit,
        Stream::Shuffle,
    )?;
    Ok(TrainResult {
        theta,
        phi: None,
        history,
        jtt_error_set: Some(error_set),
        assigner_reinits: 0,
        mixing_skips: 0,
    })
}

/// Fraction of each label class pseudo-labeled as minority during the
/// modeling round.
/// Plain-ERM epochs before the cumulative loss ranking starts; the ranking is
/// uninformative until the predictor has settled on its shortcut features.
fn assigner_warmup_epochs() -> usize {
    std::env::var("AWARM").ok().and_then(|v| v.parse().ok()).unwrap_or(8)
}

/// Epochs after warmup over which the hardness ranking accumulates.
fn assigner_rank_window() -> usize {
    std::env::var("ARANK").ok().and_then(|v| v.parse().ok()).unwrap_or(10)
}

/// Epochs of assigner fitting after the ranking freezes; beyond that the
/// assigner (and with it the estimated partition) stays fixed, so the
/// reweighted phase applies steady pressure to a stable set.
fn assigner_fit_epochs() -> usize {
    std::env::var("AFIT").ok().and_then(|v| v.parse().ok()).unwrap_or(20)
}

fn assigner_pool_fraction() -> f64 {
    std::env::var("APOOL").ok().and_then(|v| v.parse().ok()).unwrap_or(0.05)
}
fn assigner_lasso() -> f64 {
    std::env::var("ALASSO").ok().and_then(|v| v.parse().ok()).unwrap_or(0.0)
}
fn assigner_assign_fraction() -> f64 {
    std::env::var("AASSIGN").ok().and_then(|v| v.parse().ok()).unwrap_or(0.08)
}
fn assigner_decay() -> f64 {
    std::env::var("ADECAY").ok().and_then(|v| v.parse().ok()).unwrap_or(0.0)
}

/// Mark the `ceil(fraction * n_y)` highest-loss examples within each label
/// class; ties break toward the lower index.
fn hardest_slice_per_label(
    per_example: &[f64],
    labels: &[usize],
    num_classes: usize,
    fraction: f64,
) -> Vec<bool> {
    let mut mask = vec![false; per_example.len()];
    for y in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == y).collect();
        if members.is_empty() {
            continue;
        }
        let k = ((fraction * members.len() as f64).ceil() as usize).clamp(1, members.len());
        members.sort_by(|&a, &b| {
            per_example[b]
                .partial_cmp(&per_example[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &i in members.iter().take(k) {
            mask[i] = true;
        }
    }
    mask
}

/// Mask of examples whose true group is under-represented (count below the
/// uniform share n/m).
pub fn minority_mask_from_groups(data: &Dataset) -> Result<Vec<bool>> {
    let groups = data.true_group.as_ref().ok_or(Error::MissingGroups)?;
    let m = data.group_count;
    let mut counts = vec![0usize; m];
    for &g in groups {
        counts[g] += 1;
    }
    let share = data.len() as f64 / m as f64;
    Ok(groups.iter().map(|&g| (counts[g] as f64) < share).collect())
}

/// Group-DRO engine shared by the oracle baseline and Q-Diversity.
fn run_group_dro(
    data: &Dataset,
    cfg: &TrainConfig,
    mode: GroupMode,
    allow_mixing: bool,
) -> Result<TrainResult> {
    let c = data.num_classes;
    let m = match mode {
        GroupMode::Oracle => {
            if data.true_group.is_none() {
                return Err(Error::MissingGroups);
            }
            data.group_count
        }
        GroupMode::AssignerByLabel => 2 * c,
        GroupMode::AssignerOnly => 2,
    };
    let use_assigner = mode != GroupMode::Oracle;
    let one_hot = SoftLabels::from_hard(&data.labels, c)?;

    let mut init_rng = stream(cfg.seed, Stream::PredictorInit);
    let mut theta = ModelParams::init(cfg.predictor_arch, data.dim(), c, cfg.init_scale, &mut init_rng)?;
    let mut assigner_rng = stream(cfg.seed, Stream::AssignerInit);
    let mut phi = if use_assigner {
        Some(ModelParams::init(
            cfg.assigner_arch,
            data.dim() + c,
            2,
            cfg.init_scale,
            &mut assigner_rng,
        )?)
    } else {
        None
    };
    let mut shuffle_rng = stream(cfg.seed, Stream::Shuffle);
    let mut mix_rng = stream(cfg.seed, Stream::Mixing);
    let mut q = GroupWeights::uniform(m);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut assigner_reinits = 0usize;
    let mut mixing_skips = 0usize;
    let oracle_minority = if !use_assigner && allow_mixing && cfg.mix.fraction > 0.0 {
        Some(minority_mask_from_groups(data)?)
    } else {
        None
    };
    // Per-example loss accumulated over a window right after warmup: a frozen
    // snapshot of which examples the shortcut-committed predictor struggled
    // with. Once the window closes, members that the reweighted predictor has
    // since fixed stay pseudo-minority; members still at chance are treated
    // as noise and pruned. Hard-because-contradicted examples respond to
    // upweighting, hard-because-noisy ones cannot.
    let mut loss_total: Vec<f64> = vec![0.0; data.len()];
    let warmup = if use_assigner { assigner_warmup_epochs().min(cfg.epochs.saturating_sub(1)) } else { 0 };
    let rank_window_end = warmup + assigner_rank_window();

    for epoch in 0..cfg.epochs {
        let warming = use_assigner && epoch < warmup;
        // Modeling round: fit the assigner to the predictor's error profile.
        // The pseudo-minority is the top slice of the per-label ranking:
        // fixed pool size, label-stratified by construction.
        let assignment = if let Some(phi_params) = phi.as_mut() {
            let per_real = per_example_losses(&theta, &data.features, &one_hot)?;
            if !warming && epoch < rank_window_end {
                for (t, &l) in loss_total.iter_mut().zip(&per_real) {
                    *t += l;
                }
            }
            let target = hardest_slice_per_label(&loss_total, &data.labels, c, assigner_pool_fraction());
            let n_min = target.iter().filter(|&&t| t).count();
            let n_maj = data.len() - n_min;
            let mature = epoch >= rank_window_end + assigner_fit_epochs();
            if !warming && !mature && n_min > 0 && n_maj > 0 {
                // Class-balanced fit: both sides carry equal total weight.
                let weights: Vec<f64> = target
                    .iter()
                    .map(|&t| if t { 0.5 / n_min as f64 } else { 0.5 / n_maj as f64 })
                    .collect();
                for _ in 0..cfg.assigner_steps {
                    match assigner_fit_objective(phi_params, data, &target, &weights, cfg.balance_weight)
                    {
                        Ok((_, gradient)) => {
                            *phi_params = sgd_step(phi_params, &gradient, cfg.assigner_lr)?;
                            let decay = 1.0 - cfg.assigner_lr * assigner_decay();
                            if decay < 1.0 {
                                for layer in phi_params.layers.iter_mut() {
                                    layer.weight.mapv_inplace(|w| w * decay);
                                }
                            }
                            // Sparse shrinkage concentrates the assigner on
                            // the few inputs that explain hardness coherently.
                            let shrink = cfg.assigner_lr * assigner_lasso();
                            if shrink > 0.0 {
                                let first = &mut phi_params.layers[0];
                                first.weight.mapv_inplace(|w| {
                                    if w.abs() <= shrink { 0.0 } else { w - shrink * w.signum() }
                                });
                            }
                        }
                        Err(Error::DegenerateAssignment) => {
                            *phi_params = ModelParams::init(
                                cfg.assigner_arch,
                                data.dim() + c,
                                2,
                                cfg.init_scale,
                                &mut assigner_rng,
                            )?;
                            assigner_reinits += 1;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            let raw = assign(phi_params, data)?;
            // Operating point: the trainer treats the most minority-like
            // slice under phi's score as the minority pool, rather than the
            // raw 0.5 threshold, so recall does not hinge on calibration.
            let pool_quota = assigner_assign_fraction();
            let k = ((pool_quota * data.len() as f64).ceil() as usize).clamp(1, data.len());
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.sort_by(|&x, &y| {
                raw.p_minority[y]
                    .partial_cmp(&raw.p_minority[x])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(x.cmp(&y))
            });
            let mut pool_mask = vec![false; data.len()];
            for &i in order.iter().take(k) {
                pool_mask[i] = true;
            }
            if std::env::var("QDIV_ORACLE_POOL").is_ok() {
                pool_mask = minority_mask_from_groups(data)?;
                let tpr: f64 = std::env::var("QDIV_POOL_TPR").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0);
                let prec: f64 = std::env::var("QDIV_POOL_PREC").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0);
                use rand::Rng as _;
                let mut drng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
                let mut kept = 0usize;
                for i in 0..pool_mask.len() {
                    if pool_mask[i] {
                        if drng.random_range(0.0..1.0) < tpr {
                            kept += 1;
                        } else {
                            pool_mask[i] = false;
                        }
                    }
                }
                let want_fp = (kept as f64 * (1.0 - prec) / prec).round() as usize;
                let mut added = 0usize;
                while added < want_fp {
                    let i = drng.random_range(0..pool_mask.len());
                    if !pool_mask[i] {
                        pool_mask[i] = true;
                        added += 1;
                    }
                }
            }
            let a = GroupAssignment::from_minority_mask(&pool_mask);
            if std::env::var("QDIV_DEBUG").is_ok() {
                if let Ok(mask) = minority_mask_from_groups(data) {
                    let stats = |sel: &dyn Fn(usize) -> bool| {
                        let mut tp = 0usize;
                        let mut fp = 0usize;
                        let mut pos = 0usize;
                        for i in 0..data.len() {
                            if sel(i) {
                                pos += 1;
                                if mask[i] {
                                    tp += 1;
                                } else {
                                    fp += 1;
                                }
                            }
                        }
                        let _ = fp;
                        (pos, tp)
                    };
                    let t = hardest_slice_per_label(&loss_total, &data.labels, c, assigner_pool_fraction());
                    let (tpos, ttp) = stats(&|i| t[i]);
                    let (ppos, ptp) = stats(&|i| a.hard[i] == 0);
                    eprintln!(
                        "dbg epoch: target {}/{} pool {}/{} q {:?}",
                        ttp, tpos, ptp, ppos,
                        q.q.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<f64>>()
                    );
                }
            }
            Some(a)
        } else {
            None
        };

        // Predicting round: hard groups, optional mixing, q update, SGD.
        let real_ids: Vec<usize> = match mode {
            GroupMode::Oracle => data.true_group.clone().expect("checked above"),
            GroupMode::AssignerByLabel => {
                let a = assignment.as_ref().expect("assigner mode");
                (0..data.len())
                    .map(|i| a.hard[i] as usize * c + data.labels[i])
                    .collect()
            }
            GroupMode::AssignerOnly => assignment
                .as_ref()
                .expect("assigner mode")
                .hard
                .iter()
                .map(|&h| h as usize)
                .collect(),
        };

        let mixed = if allow_mixing && !warming && cfg.mix.fraction > 0.0 {
            let mix_assignment = match (&assignment, &oracle_minority) {
                (Some(a), _) => a.clone(),
                (None, Some(mask)) => GroupAssignment::from_minority_mask(mask),
                (None, None) => unreachable!("mixing without an assignment source"),
            };
            match build_mixed_groups_with_rng(data, &mix_assignment, &cfg.mix, &mut mix_rng) {
                Ok(batch) if batch.is_empty() => None,
                Ok(batch) => Some(batch),
                Err(Error::EmptyMinority) => {
                    mixing_skips += 1;
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };

        let (aug_x, aug_t, aug_ids) = match &mixed {
            Some(batch) => {
                let mixed_ids: Vec<usize> = match mode {
                    // Minority cell for the mixed label.
                    GroupMode::AssignerByLabel => batch.group_ids.clone(),
                    GroupMode::AssignerOnly => vec![0; batch.len()],
                    // Mixed rows inherit the minority source's true group.
                    GroupMode::Oracle => batch
                        .sources
                        .iter()
                        .map(|s| data.true_group.as_ref().expect("oracle mode")[s.j])
                        .collect(),
                };
                let mut ids = real_ids.clone();
                ids.extend(mixed_ids);
                (
                    vstack_features(&data.features, &batch.features),
                    one_hot.vstack(&batch.labels)?,
                    ids,
                )
            }
            None => (data.features.clone(), one_hot.clone(), real_ids),
        };

        // q responds to the reducible loss: cross-entropy minus the target's
        // own entropy. Identical for one-hot rows; for mixed rows it removes
        // the floor a soft target imposes on every predictor.
        let mut per_aug = per_example_losses(&theta, &aug_x, &aug_t)?;
        for (l, row) in per_aug.iter_mut().zip(aug_t.as_array().rows()) {
            let entropy: f64 = row.iter().filter(|&&t| t > 0.0).map(|&t| -t * t.ln()).sum();
            *l = (*l - entropy).max(0.0);
        }
        let report = group_parts(&per_aug, &aug_ids, m)?;
        if !warming {
            let active: Vec<bool> = report.empty.iter().map(|&e| !e).collect();
            q = update_q_active(&q, &report.losses, cfg.q_step, &active)?;
        }

        let rule = if warming {
            WeightRule::Uniform
        } else {
            WeightRule::GroupQ { ids: &aug_ids, q: &q.q }
        };
        sgd_epoch(
            &mut theta,
            &aug_x,
            &aug_t,
            &rule,
            cfg.batch_size,
            cfg.predictor_lr,
            &mut shuffle_rng,
        )?;

        history.push(epoch_stats(&theta, data, &one_hot, report.losses, q.q.clone())?);
    }

    Ok(TrainResult {
        theta,
        phi,
        history,
        jtt_error_set: None,
        assigner_reinits,
        mixing_skips,
    })
}

/// Group DRO over annotated groups: the fully supervised upper baseline.
pub fn train_oracle_dro(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    run_group_dro(data, cfg, GroupMode::Oracle, false)
}

/// The interactive two-player loop: a modeling round trains the assigner on
/// the predictor's group losses (plus label-balance regularization), then a
/// predicting round mixes across groups, reweights q, and steps the predictor
/// on the q-weighted group loss.
pub fn train_qdiversity(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    run_group_dro(data, cfg, cfg.group_mode, true)
}

/// Dispatch on the configured method.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    match cfg.method {
        Method::Erm => train_erm(data, cfg),
        Method::Cvar => train_cvar(data, cfg),
        Method::Jtt => train_jtt(data, cfg),
        Method::OracleDro => train_oracle_dro(data, cfg),
        Method::QDiversity => train_qdiversity(data, cfg),
    }
}
