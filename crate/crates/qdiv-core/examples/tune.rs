// Scratch harness for tuning defaults; not part of the deliverable surface.

use qdiv_core::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn split(data: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    idx.shuffle(&mut rng);
    let n_train = (0.8 * n as f64).round() as usize;
    let n_val = (0.1 * n as f64).round() as usize;
    (
        data.subset(&idx[..n_train]),
        data.subset(&idx[n_train + n_val..]),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn envf(key: &str, default: f64) -> f64 {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(60);
    let methods = [
        Method::Erm,
        Method::Cvar,
        Method::Jtt,
        Method::OracleDro,
        Method::QDiversity,
    ];
    for method in methods {
        let mut avg = vec![];
        let mut rob = vec![];
        let mut balacc = vec![];
        let t0 = std::time::Instant::now();
        for seed in 0..5u64 {
            let gen = GeneratorSpec {
                seed,
                core_strength: envf("CORE", GeneratorSpec::default().core_strength),
                spurious_strength: envf("SP", GeneratorSpec::default().spurious_strength),
                core_dim: envf("DCORE", GeneratorSpec::default().core_dim as f64) as usize,
                spurious_dim: envf("DSP", GeneratorSpec::default().spurious_dim as f64) as usize,
                noise_sigma: envf("SIGMA", GeneratorSpec::default().noise_sigma),
                ..GeneratorSpec::default()
            };
            let data = generate_biased(&gen).unwrap();
            let (train_d, _) = split(&data, seed);
            let test_d = generate_biased(&GeneratorSpec { seed: seed + 7000, ..gen }).unwrap();
            let cfg = TrainConfig {
                method,
                epochs,
                seed,
                predictor_lr: envf("PLR", TrainConfig::default().predictor_lr),
                assigner_lr: envf("ALR", TrainConfig::default().assigner_lr),
                balance_weight: envf("BETA", TrainConfig::default().balance_weight),
                cvar_alpha: envf("CVARA", TrainConfig::default().cvar_alpha),
                q_step: envf("QSTEP", TrainConfig::default().q_step),
                assigner_steps: envf("ASTEPS", TrainConfig::default().assigner_steps as f64) as usize,
                assigner_arch: Architecture::OneHidden { hidden: envf("AH", 16.0) as usize },
                mix: MixSpec {
                    fraction: envf("MIXFRAC", MixSpec::default().fraction),
                    alpha: envf("MIXALPHA", MixSpec::default().alpha),
                    ..MixSpec::default()
                },
                ..TrainConfig::default()
            };
            let result = train(&train_d, &cfg).unwrap();
            let report = evaluate(&result.theta, &test_d).unwrap();
            avg.push(report.avg_acc);
            rob.push(report.robust_acc);
            if let Some(phi) = &result.phi {
                let a = assign(phi, &train_d).unwrap();
                let mask = minority_mask_from_groups(&train_d).unwrap();
                let (mut tp, mut fn_, mut tn, mut fp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
                for i in 0..train_d.len() {
                    let est_min = a.hard[i] == 0;
                    match (mask[i], est_min) {
                        (true, true) => tp += 1.0,
                        (true, false) => fn_ += 1.0,
                        (false, false) => tn += 1.0,
                        (false, true) => fp += 1.0,
                    }
                }
                let bal = 0.5 * (tp / (tp + fn_) + tn / (tn + fp));
                balacc.push(bal);
                if seed == 0 {
                    print!(
                        "[pool {} tpr {:.2} prec {:.2}] ",
                        (tp + fp) as usize,
                        tp / (tp + fn_),
                        tp / (tp + fp).max(1.0)
                    );
                }
            }
        }
        let secs = t0.elapsed().as_secs_f64();
        print!(
            "{:<11} avg median {:.3} [{:.3}] robust median {:.3} {:?}",
            method.to_string(),
            median(avg.clone()),
            avg.iter().cloned().fold(f64::INFINITY, f64::min),
            median(rob.clone()),
            rob.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        );
        if !balacc.is_empty() {
            print!(
                "  balacc {:?}",
                balacc.iter().map(|b| (b * 100.0).round() / 100.0).collect::<Vec<_>>()
            );
        }
        println!("  ({secs:.1}s)");
    }
}
