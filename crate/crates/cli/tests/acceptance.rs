//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Expensive shared work (the reference trainings and
//! their white-box evaluations) happens once in a process-wide fixture.

use ares_core::attack::{
    run_attack, AttackMethod, AttackSpec, Norm, ALL_METHODS,
};
use ares_core::curve::{
    accuracy_parallel, build_curve, ce_from_error_counts, mce_from_components,
    mean_corruption_error, min_epsilon_records, MinEps, MinEpsRecord,
};
use ares_core::data::{generate_dataset, Dataset, DatasetSpec, LabeledDataset};
use ares_core::freq::{dft2, frequency_bias, full_grid, idft2, lowpass, max_bandwidth};
use ares_core::layers::Layer;
use ares_core::model::{build_model, predict_with_layers, ModelSpec, ModelWeights};
use ares_core::rng;
use ares_core::tensor::Tensor;
use ares_core::train::{train, TrainConfig};
use ares_core::transfer::transfer_matrix;
use rand::Rng;
use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

const EPS_WB: f64 = 4.0 / 255.0;

/// Shared reference models: one SmallCnn trained normally and one trained
/// adversarially on the standard dataset, plus their white-box evaluations.
struct Fixture {
    data: Dataset,
    normal_layers: Vec<Layer>,
    at_layers: Vec<Layer>,
    clean_normal: f64,
    clean_at: f64,
    fgsm_at: f64,
    pgd100_normal: f64,
    pgd100_at: f64,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let data = generate_dataset(&DatasetSpec {
            class_count: 8,
            image_shape: (3, 32, 32),
            train_size: 1024,
            test_size: 256,
            seed: 7,
        })
        .unwrap();
        let init = build_model(&ModelSpec::small_cnn((3, 32, 32), 8, 1, 1)).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 16,
            lr: 0.07,
            seed: 101,
            ..TrainConfig::default()
        };
        let normal = train(&init, &data, &cfg).unwrap();
        let at = train(&init, &data, &TrainConfig { adversarial: true, ..cfg }).unwrap();
        let normal_layers = normal.weights.to_layers();
        let at_layers = at.weights.to_layers();

        let clean_normal =
            accuracy_parallel(&normal_layers, &data.test.images, &data.test.labels).unwrap();
        let clean_at =
            accuracy_parallel(&at_layers, &data.test.images, &data.test.labels).unwrap();
        let pgd = AttackSpec::preset("whitebox-linf", AttackMethod::Pgd, 3).unwrap();
        let fgsm = AttackSpec::preset("whitebox-linf", AttackMethod::Fgsm, 3).unwrap();
        let pgd100_normal = run_attack(&normal_layers, &data.test.images, &data.test.labels, &pgd)
            .unwrap()
            .robust_accuracy();
        let pgd100_at = run_attack(&at_layers, &data.test.images, &data.test.labels, &pgd)
            .unwrap()
            .robust_accuracy();
        let fgsm_at = run_attack(&at_layers, &data.test.images, &data.test.labels, &fgsm)
            .unwrap()
            .robust_accuracy();
        Fixture {
            data,
            normal_layers,
            at_layers,
            clean_normal,
            clean_at,
            fgsm_at,
            pgd100_normal,
            pgd100_at,
        }
    })
}

/// Short training budget used where several models are needed.
fn quick_dataset(seed: u64) -> Dataset {
    generate_dataset(&DatasetSpec {
        class_count: 8,
        image_shape: (3, 32, 32),
        train_size: 512,
        test_size: 128,
        seed,
    })
    .unwrap()
}

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 12,
        batch_size: 16,
        lr: 0.07,
        seed,
        robust_eval_cap: 32,
        ..TrainConfig::default()
    }
}

fn train_quick(data: &Dataset, spec: ModelSpec, cfg: TrainConfig) -> ModelWeights {
    let init = build_model(&spec).unwrap();
    train(&init, data, &cfg).unwrap().weights
}

#[test]
fn criterion_01_gradient_correctness() {
    // Layer-level oracles live in the core gradcheck suite; here both full
    // families are checked end to end within the runtime budget.
    let started = Instant::now();
    let h = 1e-5;
    for i in 0..20u64 {
        for spec in [
            ModelSpec::small_cnn((3, 8, 8), 4, 1, 3000 + i),
            ModelSpec::patch_mlp((3, 8, 8), 4, 1, 4000 + i),
        ] {
            let layers = build_model(&spec).unwrap().to_layers();
            let mut rng = rng::stream(0xACC1, 0x01, i);
            let mut batch = Tensor::from_vec(
                &[1, 3, 8, 8],
                (0..192).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap();
            // Nudge pre-activations away from ReLU kinks.
            for attempt in 0..64 {
                if !kink_risk(&layers, &batch, 10.0 * h) {
                    break;
                }
                let mut rng = rng::stream(0xACC1, 0x02 + attempt, i);
                batch = Tensor::from_vec(
                    &[1, 3, 8, 8],
                    (0..192).map(|_| rng.gen_range(0.0..1.0)).collect(),
                )
                .unwrap();
            }
            let targets = ares_core::layers::one_hot(&[i as usize % 4], 4);
            let err = ares_core::layers::finite_diff_check(&layers, &batch, &targets, h).unwrap();
            assert!(err < 1e-6, "{spec:?} instance {i}: rel err {err}");
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 1 min");
    println!("ACCEPTANCE PASS criterion 1: gradient correctness (<1e-6 over 2x20 instances, {elapsed:?})");
}

fn kink_risk(layers: &[Layer], batch: &Tensor, margin: f64) -> bool {
    let mut current = batch.clone();
    for layer in layers {
        if matches!(layer, Layer::Relu) && current.data().iter().any(|v| v.abs() < margin) {
            return true;
        }
        current = layer.forward(&current);
    }
    false
}

#[test]
fn criterion_02_attack_constraint_suite() {
    let started = Instant::now();
    let layers = build_model(&ModelSpec::small_cnn((3, 32, 32), 8, 1, 77))
        .unwrap()
        .to_layers();
    let mut rng = rng::stream(0xACC2, 0x01, 0);
    let batch = Tensor::from_vec(
        &[4, 3, 32, 32],
        (0..4 * 3 * 32 * 32).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let labels = vec![0usize, 1, 2, 3];
    for preset in ["whitebox-linf", "whitebox-l2", "blackbox-linf"] {
        for method in ALL_METHODS {
            let spec = AttackSpec::preset(preset, method, 5).unwrap();
            let result = run_attack(&layers, &batch, &labels, &spec).unwrap();
            result
                .check_constraints(&batch, &spec)
                .unwrap_or_else(|e| panic!("{preset}/{method:?}: {e}"));
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    println!("ACCEPTANCE PASS criterion 2: ball and box constraints for 7 methods x 3 presets ({elapsed:?})");
}

#[test]
fn criterion_03_attack_strength_ordering() {
    let started = Instant::now();
    let f = fixture();
    // Ordering on the adversarially trained model (the Table-4 row shape):
    // PGD100 <= FGSM - 2pts and FGSM <= clean - 2pts.
    assert!(
        f.pgd100_at <= f.fgsm_at - 0.02,
        "PGD100 {} vs FGSM {}",
        f.pgd100_at,
        f.fgsm_at
    );
    assert!(
        f.fgsm_at - 0.02 <= f.clean_at - 0.04,
        "FGSM {} vs clean {}",
        f.fgsm_at,
        f.clean_at
    );
    let elapsed = started.elapsed();
    println!(
        "ACCEPTANCE PASS criterion 3: clean {:.3} > FGSM {:.3} > PGD100 {:.3} at eps 4/255 ({elapsed:?})",
        f.clean_at, f.fgsm_at, f.pgd100_at
    );
}

/// Linear-scan oracle over the grid {0, tol, 2 tol, ..., eps_max}: the first
/// grid budget whose attack succeeds. Uses the same probe the search uses.
fn linear_scan_oracle(
    layers: &[Layer],
    x: &Tensor,
    label: usize,
    template: &AttackSpec,
    eps_max: f64,
    tol: f64,
) -> MinEps {
    if predict_with_layers(layers, x).unwrap()[0] != label {
        return MinEps::Value(0.0);
    }
    let steps = (eps_max / tol).round() as usize;
    for k in 1..=steps {
        let eps = k as f64 * tol;
        let mut spec = *template;
        spec.random_start = false;
        spec.epsilon = eps;
        spec.step_size = template.step_size / template.epsilon * eps;
        let result = run_attack(layers, x, &[label], &spec).unwrap();
        if result.success[0] {
            return MinEps::Value(eps);
        }
    }
    MinEps::NotFooled
}

#[test]
fn criterion_04_binary_search_vs_linear_scan() {
    let started = Instant::now();
    let f = fixture();
    let n = 200;
    let tol = 1.0 / 510.0;
    let eps_max = 32.0 / 255.0;
    let mut template = AttackSpec::new(AttackMethod::Pgd, Norm::Linf, EPS_WB, 13);
    template.steps = 10;
    template.random_start = false;

    let subset = Tensor::stack(
        &(0..n).map(|i| f.data.test.images.sample_tensor(i)).collect::<Vec<_>>(),
    )
    .unwrap();
    let labels = &f.data.test.labels[..n];
    let records =
        min_epsilon_records(&f.normal_layers, &subset, labels, &template, eps_max, tol).unwrap();

    let mut agree = 0;
    for (i, record) in records.iter().enumerate() {
        let oracle = linear_scan_oracle(
            &f.normal_layers,
            &subset.sample_tensor(i),
            labels[i],
            &template,
            eps_max,
            tol,
        );
        let ok = match (record.min_epsilon, oracle) {
            (MinEps::NotFooled, MinEps::NotFooled) => true,
            (MinEps::Value(a), MinEps::Value(b)) => (a - b).abs() <= tol + 1e-12,
            _ => false,
        };
        if ok {
            agree += 1;
        }
    }
    let rate = agree as f64 / n as f64;
    let elapsed = started.elapsed();
    assert!(rate >= 0.95, "agreement {rate} below 0.95");
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}, budget 10 min");
    println!(
        "ACCEPTANCE PASS criterion 4: bisection agrees with linear scan on {agree}/{n} samples ({elapsed:?})"
    );
}

#[test]
fn criterion_05_curve_invariants() {
    let started = Instant::now();
    // Hand case.
    let records = vec![
        MinEpsRecord { sample_index: 0, min_epsilon: MinEps::Value(0.0), clean_correct: false },
        MinEpsRecord { sample_index: 1, min_epsilon: MinEps::Value(2.0 / 255.0), clean_correct: true },
        MinEpsRecord { sample_index: 2, min_epsilon: MinEps::Value(10.0 / 255.0), clean_correct: true },
        MinEpsRecord { sample_index: 3, min_epsilon: MinEps::NotFooled, clean_correct: true },
    ];
    let curve = build_curve(&records, &[0.0, 4.0 / 255.0, 16.0 / 255.0], "hand".into()).unwrap();
    assert_eq!(curve.accuracy, vec![0.75, 0.50, 0.25]);

    // Real records: accuracy(0) equals clean accuracy bit-exactly and the
    // curve never increases.
    let f = fixture();
    let n = 64;
    let subset = Tensor::stack(
        &(0..n).map(|i| f.data.test.images.sample_tensor(i)).collect::<Vec<_>>(),
    )
    .unwrap();
    let labels = &f.data.test.labels[..n];
    let mut template = AttackSpec::new(AttackMethod::Fgsm, Norm::Linf, EPS_WB, 17);
    template.step_size = EPS_WB;
    let records = min_epsilon_records(
        &f.normal_layers,
        &subset,
        labels,
        &template,
        32.0 / 255.0,
        1.0 / 510.0,
    )
    .unwrap();
    let grid: Vec<f64> = (0..33).map(|i| 32.0 / 255.0 * i as f64 / 32.0).collect();
    let curve = build_curve(&records, &grid, "fgsm".into()).unwrap();
    let clean = accuracy_parallel(&f.normal_layers, &subset, labels).unwrap();
    assert_eq!(curve.accuracy[0], clean, "accuracy(0) must equal clean accuracy bit-exactly");
    assert!(curve.accuracy.windows(2).all(|w| w[1] <= w[0]));
    let elapsed = started.elapsed();
    println!("ACCEPTANCE PASS criterion 5: curve invariants and hand case (0.75/0.50/0.25) ({elapsed:?})");
}

#[test]
fn criterion_06_mce_identity_and_hand_ce() {
    let started = Instant::now();
    // Untrained BaselineRef misclassifies plenty, so every per-kind CE is
    // positive and the self-normalized report is exactly 1.
    let baseline = build_model(&ModelSpec::baseline_ref((3, 32, 32), 8)).unwrap();
    let data = quick_dataset(23);
    let report = mean_corruption_error(
        &baseline,
        &data.test,
        &baseline,
        &ares_core::corruption::ALL_KINDS,
        5,
    )
    .unwrap();
    assert!((report.mce - 1.0).abs() < 1e-12, "self-mCE {}", report.mce);

    assert_eq!(ce_from_error_counts(&[1, 2], 2).unwrap(), 0.75);

    // The aggregation is exact for scaled components too.
    let model: BTreeMap<String, f64> =
        [("a".to_string(), 0.1), ("b".to_string(), 0.3)].into_iter().collect();
    let double: BTreeMap<String, f64> =
        [("a".to_string(), 0.2), ("b".to_string(), 0.6)].into_iter().collect();
    assert!((mce_from_components(&model, &double).unwrap() - 0.5).abs() < 1e-12);
    let elapsed = started.elapsed();
    println!("ACCEPTANCE PASS criterion 6: self-mCE = 1 within 1e-12, hand CE = 0.75 ({elapsed:?})");
}

#[test]
fn criterion_07_adversarial_training_effectiveness() {
    let started = Instant::now();
    let f = fixture();
    let gap = f.pgd100_at - f.pgd100_normal;
    assert!(
        gap >= 0.20,
        "robust-accuracy gap {:.3} below 20 points (AT {:.3}, normal {:.3})",
        gap,
        f.pgd100_at,
        f.pgd100_normal
    );
    assert!(
        f.clean_at < f.clean_normal,
        "clean accuracy did not drop (AT {:.3} vs normal {:.3})",
        f.clean_at,
        f.clean_normal
    );
    let elapsed = started.elapsed();
    println!(
        "ACCEPTANCE PASS criterion 7: AT robust {:.3} vs normal {:.3} (gap {:.1} pts), clean {:.3} -> {:.3} ({elapsed:?})",
        f.pgd100_at,
        f.pgd100_normal,
        gap * 100.0,
        f.clean_normal,
        f.clean_at
    );
}

/// Robust accuracy under a deterministic PGD-20 probe.
fn robust_acc_pgd20(layers: &[Layer], data: &LabeledDataset, seed: u64) -> f64 {
    let mut spec = AttackSpec::new(AttackMethod::Pgd, Norm::Linf, EPS_WB, seed);
    spec.steps = 20;
    spec.step_size = 1.0 / 255.0;
    run_attack(layers, &data.images, &data.labels, &spec)
        .unwrap()
        .robust_accuracy()
}

#[test]
fn criterion_08_trick_ablation_directions() {
    let started = Instant::now();
    let mut mixup_wins = 0;
    let mut wd_wins = 0;
    for seed in 0..3u64 {
        let data = quick_dataset(40 + seed);
        let spec = ModelSpec::small_cnn((3, 32, 32), 8, 1, 60 + seed);
        let base_cfg = TrainConfig {
            adversarial: true,
            ..quick_config(200 + seed)
        };
        let base = train_quick(&data, spec, base_cfg);
        let mixup = train_quick(
            &data,
            spec,
            TrainConfig { mixup_alpha: 1.0, ..base_cfg },
        );
        let wd = train_quick(
            &data,
            spec,
            TrainConfig { weight_decay: 0.1, ..base_cfg },
        );
        let r_base = robust_acc_pgd20(&base.to_layers(), &data.test, 7);
        let r_mixup = robust_acc_pgd20(&mixup.to_layers(), &data.test, 7);
        let r_wd = robust_acc_pgd20(&wd.to_layers(), &data.test, 7);
        println!(
            "  seed {seed}: robust base {r_base:.3}, +mixup {r_mixup:.3}, wd 0.1 {r_wd:.3}"
        );
        if r_mixup >= r_base - 1e-9 {
            mixup_wins += 1;
        }
        if r_wd <= r_base + 1e-9 {
            wd_wins += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(mixup_wins >= 2, "mixup did not preserve robustness ({mixup_wins}/3)");
    assert!(wd_wins >= 2, "weight decay 0.1 did not reduce robustness ({wd_wins}/3)");
    println!(
        "ACCEPTANCE PASS criterion 8: mixup non-reducing {mixup_wins}/3, wd 0.1 non-improving {wd_wins}/3 ({elapsed:?})"
    );
}

#[test]
fn criterion_09_frequency_suite() {
    let started = Instant::now();
    // DFT round trip.
    let mut rng = rng::stream(0xACC9, 0x01, 0);
    let channel = Tensor::from_vec(
        &[32, 32],
        (0..1024).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let spectrum = dft2(&channel).unwrap();
    let back = idft2(&spectrum, 32, 32).unwrap();
    let worst = channel
        .data()
        .iter()
        .zip(&back)
        .map(|(o, z)| (o - z.re).abs().max(z.im.abs()))
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-10, "round trip error {worst}");

    // Low-pass identity at b_max.
    let image = Tensor::from_vec(
        &[3, 32, 32],
        (0..3 * 1024).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap();
    assert_eq!(lowpass(&image, max_bandwidth(32, 32)).unwrap(), image);

    // Directional f_bias over 3 seeds plus ACC-LPB terminal value.
    let grid = full_grid(32, 32);
    let mut at_lower = 0;
    for seed in 0..3u64 {
        let data = quick_dataset(50 + seed);
        let spec = ModelSpec::small_cnn((3, 32, 32), 8, 1, 70 + seed);
        let normal = train_quick(&data, spec, quick_config(300 + seed));
        let at = train_quick(
            &data,
            spec,
            TrainConfig { adversarial: true, ..quick_config(300 + seed) },
        );
        let fb_normal = frequency_bias(&normal.to_layers(), &data.test, &grid).unwrap();
        let fb_at = frequency_bias(&at.to_layers(), &data.test, &grid).unwrap();
        assert_eq!(*fb_normal.acc_lpb.last().unwrap(), 1.0);
        assert_eq!(*fb_at.acc_lpb.last().unwrap(), 1.0);
        println!(
            "  seed {seed}: f_bias normal {:.2} vs AT {:.2}",
            fb_normal.f_bias, fb_at.f_bias
        );
        if fb_at.f_bias < fb_normal.f_bias {
            at_lower += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(at_lower >= 2, "AT lower f_bias in only {at_lower}/3 seeds");
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}, budget 10 min");
    println!(
        "ACCEPTANCE PASS criterion 9: DFT/lowpass exact, AT f_bias lower in {at_lower}/3 seeds ({elapsed:?})"
    );
}

#[test]
fn criterion_10_transfer_suite() {
    let started = Instant::now();
    let mut cross_higher = 0;
    for seed in 0..3u64 {
        let data = quick_dataset(80 + seed);
        let cfg = quick_config(400 + seed);
        let cnn_a = train_quick(&data, ModelSpec::small_cnn((3, 32, 32), 8, 1, 90 + seed), cfg);
        let cnn_b = train_quick(
            &data,
            ModelSpec::small_cnn((3, 32, 32), 8, 1, 95 + seed),
            TrainConfig { seed: 500 + seed, ..cfg },
        );
        let mlp = train_quick(
            &data,
            ModelSpec::patch_mlp((3, 32, 32), 8, 1, 98 + seed),
            TrainConfig { seed: 600 + seed, ..cfg },
        );
        let attack = AttackSpec::preset("blackbox-linf", AttackMethod::Mim, 9).unwrap();
        let panel = [cnn_a.clone(), cnn_b.clone(), mlp.clone()];
        let matrix = transfer_matrix(&panel, &data.test, &attack).unwrap();

        // Diagonal must equal direct white-box evaluation bit-exactly.
        for (i, model) in panel.iter().enumerate() {
            let direct = run_attack(&model.to_layers(), &data.test.images, &data.test.labels, &attack)
                .unwrap()
                .robust_accuracy();
            assert_eq!(matrix.entry(i, i), direct, "diagonal {i} mismatch");
        }

        let within = (matrix.entry(0, 1) + matrix.entry(1, 0)) / 2.0;
        let cross = (matrix.entry(0, 2)
            + matrix.entry(2, 0)
            + matrix.entry(1, 2)
            + matrix.entry(2, 1))
            / 4.0;
        println!("  seed {seed}: within-family {within:.3}, cross-family {cross:.3}");
        if cross > within {
            cross_higher += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(cross_higher >= 2, "cross-family higher in only {cross_higher}/3 seeds");
    assert!(elapsed.as_secs() < 900, "took {elapsed:?}, budget 15 min");
    println!(
        "ACCEPTANCE PASS criterion 10: transfer diag bit-exact, cross > within in {cross_higher}/3 seeds ({elapsed:?})"
    );
}

#[test]
fn criterion_11_subcommand_determinism() {
    let started = Instant::now();
    use std::path::{Path, PathBuf};
    use std::process::Command;

    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let write = |name: &str, text: &str| -> PathBuf {
        let path = root.join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let run = |cmd: &str, config: &Path, out: &Path, threads: &str| {
        let output = Command::new(env!("CARGO_BIN_EXE_ares"))
            .arg(cmd)
            .arg("--config")
            .arg(config)
            .arg("--out")
            .arg(out)
            .arg("--threads")
            .arg(threads)
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "{cmd} failed:\n{}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    // Rerun every subcommand from the manifest-resolved config at a
    // different thread count; all metric files must be byte-identical.
    let rerun_and_compare = |cmd: &str, config: &Path, out_a: &Path| {
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out_a.join("manifest.json")).unwrap(),
        )
        .unwrap();
        let resolved = write(
            &format!("{cmd}-resolved.toml"),
            manifest["config"].as_str().unwrap(),
        );
        let out_b = out_a.with_file_name(format!(
            "{}-rerun",
            out_a.file_name().unwrap().to_string_lossy()
        ));
        run(cmd, &resolved, &out_b, "2");
        for entry in manifest["outputs"].as_array().unwrap() {
            let name = entry.as_str().unwrap();
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{cmd}: artifact {name} differs across reruns");
        }
        assert!(config.exists());
    };

    let data_dir = root.join("data");
    let gen = write(
        "gen.toml",
        "seed = 7\n[dataset]\nclass_count = 4\ntrain_size = 48\ntest_size = 16\n",
    );
    run("gen-data", &gen, &data_dir, "1");
    rerun_and_compare("gen-data", &gen, &data_dir);

    let model_dir = root.join("model");
    let train_cfg = write(
        "train.toml",
        &format!(
            "seed = 11\n[model]\nfamily = \"small_cnn\"\nseed = 1\n\n[train]\ndataset_dir = \"{}\"\nepochs = 2\nbatch_size = 16\nlr = 0.05\nadversarial = true\nat_steps = 2\nrobust_eval_cap = 4\nema_beta = 0.99\nmixup_alpha = 0.5\nlabel_smoothing = 0.1\naugment = true\n",
            data_dir.display()
        ),
    );
    run("train", &train_cfg, &model_dir, "1");
    rerun_and_compare("train", &train_cfg, &model_dir);
    let model = model_dir.join("model.ares");

    let attack_cfg = write(
        "attack.toml",
        &format!(
            "seed = 3\n[attack]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nmethods = [\"fgsm\", \"pgd\", \"vmifgsm\"]\nmax_samples = 4\n\n[attack.params]\npreset = \"whitebox-linf\"\nsteps = 4\n",
            data_dir.display(),
            model.display()
        ),
    );
    run("attack", &attack_cfg, &root.join("attack"), "1");
    rerun_and_compare("attack", &attack_cfg, &root.join("attack"));

    let curve_cfg = write(
        "curve.toml",
        &format!(
            "seed = 3\n[curve]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nmax_samples = 4\ngrid_points = 5\n\n[curve.params]\npreset = \"whitebox-linf\"\nsteps = 3\n",
            data_dir.display(),
            model.display()
        ),
    );
    run("curve", &curve_cfg, &root.join("curve"), "1");
    rerun_and_compare("curve", &curve_cfg, &root.join("curve"));

    let corrupt_cfg = write(
        "corrupt.toml",
        &format!(
            "seed = 5\n[corrupt]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nkinds = [\"shot_noise\", \"contrast\"]\n",
            data_dir.display(),
            model.display()
        ),
    );
    run("corrupt", &corrupt_cfg, &root.join("corrupt"), "1");
    rerun_and_compare("corrupt", &corrupt_cfg, &root.join("corrupt"));

    let mce_cfg = write(
        "mce.toml",
        &format!(
            "seed = 5\n[mce]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nbaseline = \"{}\"\nkinds = [\"impulse_noise\"]\n",
            data_dir.display(),
            model.display(),
            model.display()
        ),
    );
    run("mce", &mce_cfg, &root.join("mce"), "1");
    rerun_and_compare("mce", &mce_cfg, &root.join("mce"));

    let transfer_cfg = write(
        "transfer.toml",
        &format!(
            "seed = 5\n[transfer]\ndataset_dir = \"{}\"\nmodels = [\"{}\", \"{}\"]\nmax_samples = 4\n\n[transfer.params]\npreset = \"blackbox-linf\"\nsteps = 3\n",
            data_dir.display(),
            model.display(),
            model.display()
        ),
    );
    run("transfer", &transfer_cfg, &root.join("transfer"), "1");
    rerun_and_compare("transfer", &transfer_cfg, &root.join("transfer"));

    let freq_cfg = write(
        "freq.toml",
        &format!(
            "seed = 5\n[freq]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nmax_samples = 4\n",
            data_dir.display(),
            model.display()
        ),
    );
    run("freq", &freq_cfg, &root.join("freq"), "1");
    rerun_and_compare("freq", &freq_cfg, &root.join("freq"));

    let report_cfg = write(
        "report.toml",
        &format!(
            "seed = 0\n[report]\nruns = [\"{}\", \"{}\", \"{}\"]\n",
            model_dir.display(),
            root.join("attack").display(),
            root.join("freq").display()
        ),
    );
    run("report", &report_cfg, &root.join("report"), "1");
    rerun_and_compare("report", &report_cfg, &root.join("report"));

    let elapsed = started.elapsed();
    println!(
        "ACCEPTANCE PASS criterion 11: all 9 subcommands byte-identical across manifest reruns and thread counts ({elapsed:?})"
    );
}

#[test]
fn dataset_learnability_and_corruption_monotonicity() {
    // Companion checks: the normal recipe reaches 95% within 20 epochs, and
    // the reference model's accuracy is non-increasing in severity for at
    // least 5 of 6 corruption kinds (2-point noise tolerance).
    let f = fixture();
    assert!(
        f.clean_normal >= 0.95,
        "normal recipe reached only {:.3}",
        f.clean_normal
    );
    let mut monotone = 0;
    for kind in ares_core::corruption::ALL_KINDS {
        let curve =
            ares_core::curve::severity_curve(&f.normal_layers, &f.data.test, &[kind], 99).unwrap();
        let ok = curve.windows(2).all(|w| w[1] <= w[0] + 0.02);
        println!("  {}: {:?} monotone: {ok}", kind.name(), curve);
        if ok {
            monotone += 1;
        }
    }
    assert!(monotone >= 5, "only {monotone}/6 kinds severity-monotone");
    println!(
        "ACCEPTANCE PASS companion: learnability {:.3} >= 0.95 and {monotone}/6 kinds monotone",
        f.clean_normal
    );
}
