//! Scratch calibration harness (not part of the public surface): prints the
//! empirical numbers the acceptance thresholds depend on.

use ares_core::attack::{run_attack, AttackMethod, AttackSpec, Norm};
use ares_core::corruption::ALL_KINDS;
use ares_core::curve::{accuracy_parallel, severity_curve};
use ares_core::data::{generate_dataset, DatasetSpec};
use ares_core::freq::{frequency_bias, full_grid};
use ares_core::model::{build_model, ModelSpec};
use ares_core::train::{train, TrainConfig};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let data_spec = DatasetSpec {
        class_count: 8,
        image_shape: (3, 32, 32),
        train_size: 512,
        test_size: 256,
        seed: 7,
    };
    let data = generate_dataset(&data_spec).unwrap();
    println!("[{:?}] dataset generated", t0.elapsed());

    let model_spec = ModelSpec::small_cnn((3, 32, 32), 8, 1, 1);
    let init = build_model(&model_spec).unwrap();

    let normal_cfg = TrainConfig {
        epochs: 20,
        batch_size: 32,
        lr: 0.1,
        seed: 11,
        ..TrainConfig::default()
    };
    let normal = train(&init, &data, &normal_cfg).unwrap();
    for m in &normal.history {
        println!(
            "normal epoch {:2} loss {:.4} clean {:.3}",
            m.epoch, m.train_loss, m.clean_acc
        );
    }
    println!("[{:?}] normal training done", t0.elapsed());

    let at_cfg = TrainConfig {
        adversarial: true,
        ..normal_cfg
    };
    let at = train(&init, &data, &at_cfg).unwrap();
    for m in at.history.iter().filter(|m| m.epoch % 4 == 0 || m.epoch == 19) {
        println!(
            "at epoch {:2} loss {:.4} clean {:.3} robust(pgd10) {:.3}",
            m.epoch,
            m.train_loss,
            m.clean_acc,
            m.robust_acc.unwrap_or(f64::NAN)
        );
    }
    println!("[{:?}] adversarial training done", t0.elapsed());

    let normal_layers = normal.weights.to_layers();
    let at_layers = at.weights.to_layers();
    let clean_normal = accuracy_parallel(&normal_layers, &data.test.images, &data.test.labels).unwrap();
    let clean_at = accuracy_parallel(&at_layers, &data.test.images, &data.test.labels).unwrap();

    let pgd100 = AttackSpec::preset("whitebox-linf", AttackMethod::Pgd, 3).unwrap();
    let fgsm = AttackSpec::preset("whitebox-linf", AttackMethod::Fgsm, 3).unwrap();
    let t = Instant::now();
    let normal_pgd = run_attack(&normal_layers, &data.test.images, &data.test.labels, &pgd100)
        .unwrap()
        .robust_accuracy();
    println!("pgd100 on normal took {:?}", t.elapsed());
    let normal_fgsm = run_attack(&normal_layers, &data.test.images, &data.test.labels, &fgsm)
        .unwrap()
        .robust_accuracy();
    let at_pgd = run_attack(&at_layers, &data.test.images, &data.test.labels, &pgd100)
        .unwrap()
        .robust_accuracy();
    let at_fgsm = run_attack(&at_layers, &data.test.images, &data.test.labels, &fgsm)
        .unwrap()
        .robust_accuracy();
    println!("normal: clean {clean_normal:.3} fgsm {normal_fgsm:.3} pgd100 {normal_pgd:.3}");
    println!("at:     clean {clean_at:.3} fgsm {at_fgsm:.3} pgd100 {at_pgd:.3}");
    println!(
        "AT robust gap {:.1} points; clean drop {:.1} points",
        (at_pgd - normal_pgd) * 100.0,
        (clean_normal - clean_at) * 100.0
    );
    println!("[{:?}] white-box evals done", t0.elapsed());

    let grid = full_grid(32, 32);
    let fb_normal = frequency_bias(&normal_layers, &data.test, &grid).unwrap();
    let fb_at = frequency_bias(&at_layers, &data.test, &grid).unwrap();
    println!(
        "f_bias normal {:.2} (n'={}) vs at {:.2} (n'={})",
        fb_normal.f_bias, fb_normal.n_prime, fb_at.f_bias, fb_at.n_prime
    );
    println!("[{:?}] freq done", t0.elapsed());

    // Corruption monotonicity on the normal model (BaselineRef stand-in).
    for kind in ALL_KINDS {
        let curve = severity_curve(&normal_layers, &data.test, &[kind], 99).unwrap();
        println!(
            "severity curve {:14} {:?}",
            kind.name(),
            curve.iter().map(|a| (a * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
    println!("[{:?}] severity sweeps done", t0.elapsed());

    // Transfer directions: two SmallCNN seeds + one PatchMLP, normal recipes.
    let cnn_b = train(
        &build_model(&ModelSpec::small_cnn((3, 32, 32), 8, 1, 2)).unwrap(),
        &data,
        &TrainConfig { seed: 12, ..normal_cfg },
    )
    .unwrap();
    let mlp = train(
        &build_model(&ModelSpec::patch_mlp((3, 32, 32), 8, 1, 3)).unwrap(),
        &data,
        &TrainConfig { seed: 13, epochs: 30, ..normal_cfg },
    )
    .unwrap();
    let mlp_clean = accuracy_parallel(&mlp.weights.to_layers(), &data.test.images, &data.test.labels).unwrap();
    println!("patch-mlp clean {mlp_clean:.3}, cnn_b clean {:.3}", cnn_b.history.last().unwrap().clean_acc);

    let mim = AttackSpec::preset("blackbox-linf", AttackMethod::Mim, 5).unwrap();
    let panel = [normal.weights.clone(), cnn_b.weights.clone(), mlp.weights.clone()];
    let matrix = ares_core::transfer::transfer_matrix(&panel, &data.test, &mim).unwrap();
    println!("transfer matrix (rows=sources cnnA,cnnB,mlp):");
    for row in &matrix.robust_accuracy {
        println!("  {:?}", row.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }
    let within = (matrix.entry(0, 1) + matrix.entry(1, 0)) / 2.0;
    let cross = (matrix.entry(0, 2) + matrix.entry(2, 0) + matrix.entry(1, 2) + matrix.entry(2, 1)) / 4.0;
    println!("within-family target acc {within:.3}; cross-family {cross:.3} (want cross > within)");
    println!("[{:?}] all done", t0.elapsed());
}
