// Scratch harness for picking training hyperparameters; not part of the
// test suite.

use senslab_core::attention::{
    train, AttnActivation, DiagnosticsConfig, ModelConfig, TrainConfig,
};
use senslab_core::synth::{generate_dataset, DatasetKind, SyntheticParams};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let case: &str = args.get(1).map(|s| s.as_str()).unwrap_or("case1");
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1);

    let p = match case {
        "case1" => SyntheticParams::with_defaults(50, 16, 3, 5, 1).unwrap(),
        "case2" => SyntheticParams::with_defaults(50, 20, 1, 17, 7).unwrap(),
        "small" => SyntheticParams::with_defaults(20, 8, 1, 5, 1).unwrap(),
        other => panic!("unknown case {other}"),
    };
    eprintln!("params: {p:?}");

    let train_data = generate_dataset::<f64>(p, 1000, DatasetKind::Train, seed).unwrap();
    let test_id = generate_dataset::<f64>(p, 500, DatasetKind::TestId, seed + 1).unwrap();
    let test_ood = generate_dataset::<f64>(p, 500, DatasetKind::TestOod, seed + 2).unwrap();

    let model = ModelConfig::square(p.d_tok, AttnActivation::Softmax);
    let cfg = TrainConfig {
        learning_rate: lr,
        batch_size: 100,
        epochs,
        init_scale: 1e-2,
        seed,
        ..TrainConfig::default()
    };
    let diag = DiagnosticsConfig {
        sens_examples: 25,
        sens_repeats: 4,
    };

    let t0 = std::time::Instant::now();
    let out = train(&train_data, &test_id, &test_ood, &model, &cfg, &diag).unwrap();
    let dt = t0.elapsed().as_secs_f64();

    for rec in out.history.iter().step_by(5.max(epochs / 20)) {
        eprintln!(
            "epoch {:3}  train {:.3}  id {:.3}  ood {:.3}  al_sp {:+.3}  al_fq {:+.3}  mass s/f/i {:.2}/{:.2}/{:.2}  sens {:.4}",
            rec.epoch, rec.train_acc, rec.test_id_acc, rec.test_ood_acc,
            rec.align_sp, rec.align_freq, rec.mass_sp, rec.mass_freq, rec.mass_irrel,
            rec.sensitivity
        );
    }
    let last = out.history.last().unwrap();
    eprintln!(
        "FINAL train {:.3} id {:.3} ood {:.3} al_sp {:+.3} al_fq {:+.3} sens {:.4}  ({dt:.1}s)",
        last.train_acc, last.test_id_acc, last.test_ood_acc, last.align_sp, last.align_freq,
        last.sensitivity
    );
}
