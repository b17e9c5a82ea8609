// Scratch: per-epoch trace of one Q-Diversity run.

use qdiv_core::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn envf(key: &str, default: f64) -> f64 {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(1);
    let gen = GeneratorSpec { seed, ..GeneratorSpec::default() };
    let data = generate_biased(&gen).unwrap();
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    idx.shuffle(&mut rng);
    let n_train = (0.8 * n as f64).round() as usize;
    let train_d = data.subset(&idx[..n_train]);

    let cfg = TrainConfig {
        method: Method::QDiversity,
        epochs: 60,
        seed,
        assigner_lr: envf("ALR", TrainConfig::default().assigner_lr),
        q_step: envf("QSTEP", TrainConfig::default().q_step),
        mix: MixSpec { fraction: envf("MIXFRAC", 0.0), ..MixSpec::default() },
        ..TrainConfig::default()
    };
    let result = train_qdiversity(&train_d, &cfg).unwrap();
    for (e, row) in result.history.iter().enumerate() {
        if e % 3 == 0 || e == result.history.len() - 1 {
            println!(
                "epoch {e:>3} avg {:.3} robust {:.3} q {:?} losses {:?}",
                row.avg_acc,
                row.robust_acc.unwrap(),
                row.q.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                row.group_losses.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            );
        }
    }
    let a = assign(result.phi.as_ref().unwrap(), &train_d).unwrap();
    println!("final minority pool: {}", a.minority_indices().len());
    println!("assigner reinits: {}, mixing skips: {}", result.assigner_reinits, result.mixing_skips);
}
