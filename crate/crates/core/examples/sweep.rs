//! Scratch: diagnose the AT start plateau at the 512-sample budget.

use ares_core::data::{generate_dataset, DatasetSpec};
use ares_core::layers::{backward, one_hot, Layer};
use ares_core::model::{build_model, ModelSpec};
use ares_core::tensor::Tensor;
use ares_core::train::{adversarial_batch, train, SgdOptimizer, TrainConfig};

fn stats(layers: &[Layer], images: &Tensor) {
    // Fraction of conv1 outputs that are dead (<= 0) over the batch.
    let conv1 = layers[0].forward(images);
    let dead = conv1.data().iter().filter(|&&v| v <= 0.0).count() as f64 / conv1.len() as f64;
    let wnorm: f64 = layers
        .iter()
        .flat_map(|l| l.params())
        .map(|p| p.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    println!("  dead conv1 fraction {dead:.3}, total weight norm {wnorm:.3}");
}

fn main() {
    let data = generate_dataset(&DatasetSpec {
        class_count: 8,
        image_shape: (3, 32, 32),
        train_size: 512,
        test_size: 128,
        seed: 50,
    })
    .unwrap();
    let spec = ModelSpec::small_cnn((3, 32, 32), 8, 1, 70);
    let init = build_model(&spec).unwrap();
    let mut layers = init.to_layers();
    let mut opt = SgdOptimizer::new(&layers);
    let test_batch = Tensor::stack(
        &(0..32).map(|i| data.test.images.sample_tensor(i)).collect::<Vec<_>>(),
    )
    .unwrap();

    // Manual AT loop with diagnostics, batch 8, lr ramp like train().
    let (eps, steps) = (4.0 / 255.0, 3);
    let lr_full = 0.05;
    for epoch in 0..12 {
        let lr = if epoch < 5 { lr_full * (epoch + 1) as f64 / 6.0 } else { lr_full };
        let mut loss_sum = 0.0;
        let mut grad_norm_max = 0.0f64;
        let mut batches = 0;
        for start in (0..512).step_by(8) {
            let idx: Vec<usize> = (start..(start + 8).min(512)).collect();
            let batch = Tensor::stack(&idx.iter().map(|&i| data.train.images.sample_tensor(i)).collect::<Vec<_>>()).unwrap();
            let labels: Vec<usize> = idx.iter().map(|&i| data.train.labels[i]).collect();
            let targets = one_hot(&labels, 8);
            let adv = adversarial_batch(&layers, &batch, &targets, eps, steps, 1234 + start as u64).unwrap();
            let (loss, grads) = backward(&layers, &adv, &targets).unwrap();
            let gn: f64 = grads
                .param_grads
                .iter()
                .flatten()
                .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            grad_norm_max = grad_norm_max.max(gn);
            loss_sum += loss;
            batches += 1;
            opt.step(&mut layers, &grads, lr, 0.9, 0.0);
        }
        println!("epoch {epoch}: lr {lr:.4} mean loss {:.4} max grad norm {grad_norm_max:.4}", loss_sum / batches as f64);
        stats(&layers, &test_batch);
    }

    // Reference: the same config through train() for comparison.
    let cfg = TrainConfig {
        epochs: 12,
        batch_size: 8,
        lr: 0.05,
        seed: 300,
        adversarial: true,
        robust_eval_cap: 16,
        ..TrainConfig::default()
    };
    let out = train(&init, &data, &cfg).unwrap();
    println!(
        "train() reference: clean {:.3}",
        out.history.last().unwrap().clean_acc
    );
}
