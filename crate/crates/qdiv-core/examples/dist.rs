// Scratch: per-example loss distributions by true group under plain ERM.

use ndarray::ArrayView2;
use qdiv_core::*;

fn quantiles(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| v[((p * (v.len() - 1) as f64) as usize).min(v.len() - 1)];
    (q(0.25), q(0.5), q(0.9))
}

fn main() {
    let gen = GeneratorSpec { seed: 0, ..GeneratorSpec::default() };
    let data = generate_biased(&gen).unwrap();
    let mask = minority_mask_from_groups(&data).unwrap();
    for epochs in [2usize, 4, 8, 16, 32, 64] {
        let cfg = TrainConfig { epochs, ..TrainConfig::default() };
        let erm = train_erm(&data, &cfg).unwrap();
        let pred = forward(&erm.theta, ArrayView2::from(&data.features.view())).unwrap();
        let targets = SoftLabels::from_hard(&data.labels, 2).unwrap();
        let (_, per) = weighted_soft_ce_loss(&pred, &targets, &vec![1.0; data.len()]).unwrap();
        let min_losses: Vec<f64> = (0..data.len()).filter(|&i| mask[i]).map(|i| per[i]).collect();
        let maj_losses: Vec<f64> = (0..data.len()).filter(|&i| !mask[i]).map(|i| per[i]).collect();
        // Top-5%-per-label purity of a single-epoch ranking.
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| per[b].partial_cmp(&per[a]).unwrap());
        let k = (0.05 * data.len() as f64) as usize;
        let purity = order.iter().take(k).filter(|&&i| mask[i]).count() as f64 / k as f64;
        let (a1, a2, a3) = quantiles(min_losses);
        let (b1, b2, b3) = quantiles(maj_losses);
        println!(
            "epochs {epochs:>3}: minority q25/50/90 {a1:.2}/{a2:.2}/{a3:.2}  majority {b1:.2}/{b2:.2}/{b3:.2}  top5% purity {purity:.2}"
        );
    }
}
