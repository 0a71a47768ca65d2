//! End-to-end runs of the `ares` binary over a miniature pipeline.

use std::path::{Path, PathBuf};
use std::process::Command;

fn ares() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ares"))
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) {
    let output = ares()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("spawning ares");
    assert!(
        output.status.success(),
        "{cmd} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

struct Pipeline {
    root: PathBuf,
}

impl Pipeline {
    fn config(&self, name: &str, text: &str) -> PathBuf {
        let path = self.root.join(name);
        write(&path, text);
        path
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn mini_pipeline(root: &Path) -> Pipeline {
    let p = Pipeline { root: root.to_path_buf() };

    let gen = p.config(
        "gen.toml",
        "seed = 7\n[dataset]\nclass_count = 4\ntrain_size = 48\ntest_size = 16\npng_dump = 2\n",
    );
    run_ok("gen-data", &gen, &p.dir("data"), &[]);

    let data_dir = p.dir("data");
    let train = p.config(
        "train.toml",
        &format!(
            "seed = 11\n[model]\nfamily = \"small_cnn\"\nseed = 1\n\n[train]\ndataset_dir = \"{}\"\nepochs = 2\nbatch_size = 16\nlr = 0.05\nrobust_eval_cap = 8\n",
            data_dir.display()
        ),
    );
    run_ok("train", &train, &p.dir("model"), &[]);
    p
}

#[test]
fn pipeline_commands_produce_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let p = mini_pipeline(tmp.path());
    let data_dir = p.dir("data");
    let model = p.dir("model").join("model.ares");

    for name in ["train.ares", "test.ares", "manifest.json"] {
        assert!(data_dir.join(name).exists(), "missing {name}");
    }
    assert!(model.exists());
    assert!(p.dir("model").join("history.csv").exists());

    let attack = p.config(
        "attack.toml",
        &format!(
            "seed = 3\n[attack]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nmethods = [\"fgsm\", \"pgd\"]\nmax_samples = 6\n\n[attack.params]\npreset = \"whitebox-linf\"\nsteps = 5\n",
            data_dir.display(),
            model.display()
        ),
    );
    run_ok("attack", &attack, &p.dir("attack"), &[]);
    assert!(p.dir("attack").join("attack-report.json").exists());

    let curve = p.config(
        "curve.toml",
        &format!(
            "seed = 3\n[curve]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nmethod = \"pgd\"\nmax_samples = 5\ngrid_points = 9\n\n[curve.params]\npreset = \"whitebox-linf\"\nsteps = 4\nrandom_start = false\n",
            data_dir.display(),
            model.display()
        ),
    );
    run_ok("curve", &curve, &p.dir("curve"), &[]);
    assert!(p.dir("curve").join("curve.csv").exists());
    assert!(p.dir("curve").join("curve.svg").exists());

    let corrupt = p.config(
        "corrupt.toml",
        &format!(
            "seed = 9\n[corrupt]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nkinds = [\"gaussian_noise\", \"brightness\"]\n",
            data_dir.display(),
            model.display()
        ),
    );
    run_ok("corrupt", &corrupt, &p.dir("corrupt"), &[]);
    assert!(p.dir("corrupt").join("severity.csv").exists());

    let mce = p.config(
        "mce.toml",
        &format!(
            "seed = 9\n[mce]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nbaseline = \"{}\"\nkinds = [\"brightness\"]\n",
            data_dir.display(),
            model.display(),
            model.display()
        ),
    );
    run_ok("mce", &mce, &p.dir("mce"), &[]);
    let mce_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.dir("mce").join("mce.json")).unwrap())
            .unwrap();
    // Model normalized by itself: mCE is exactly 1.
    assert_eq!(mce_json["report"]["mce"].as_f64().unwrap(), 1.0);

    let freq = p.config(
        "freq.toml",
        &format!(
            "seed = 9\n[freq]\ndataset_dir = \"{}\"\nmodel = \"{}\"\nmax_samples = 6\n",
            data_dir.display(),
            model.display()
        ),
    );
    run_ok("freq", &freq, &p.dir("freq"), &[]);
    assert!(p.dir("freq").join("acc_lpb.csv").exists());

    let transfer = p.config(
        "transfer.toml",
        &format!(
            "seed = 9\n[transfer]\ndataset_dir = \"{}\"\nmodels = [\"{}\", \"{}\"]\nmethod = \"mim\"\nmax_samples = 5\n\n[transfer.params]\npreset = \"blackbox-linf\"\nsteps = 4\n",
            data_dir.display(),
            model.display(),
            model.display()
        ),
    );
    run_ok("transfer", &transfer, &p.dir("transfer"), &[]);
    assert!(p.dir("transfer").join("transfer.svg").exists());

    let report = p.config(
        "report.toml",
        &format!(
            "seed = 0\n[report]\nruns = [\"{}\", \"{}\", \"{}\", \"{}\", \"{}\", \"{}\"]\n",
            p.dir("model").display(),
            p.dir("attack").display(),
            p.dir("curve").display(),
            p.dir("corrupt").display(),
            p.dir("mce").display(),
            p.dir("freq").display(),
        ),
    );
    run_ok("report", &report, &p.dir("report"), &[]);
    let html = std::fs::read_to_string(p.dir("report").join("report.html")).unwrap();
    assert!(html.contains("Clean Acc"));
    assert!(html.contains("FGSM"));
    assert!(html.contains("PGD5"));
    assert!(html.contains("<svg"));
}

#[test]
fn outputs_are_append_only() {
    let tmp = tempfile::tempdir().unwrap();
    let p = mini_pipeline(tmp.path());
    // A second run into the same directory must refuse to overwrite.
    let gen = p.root.join("gen.toml");
    let output = ares()
        .arg("gen-data")
        .arg("--config")
        .arg(&gen)
        .arg("--out")
        .arg(p.dir("data"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("append-only"), "stderr: {stderr}");
}

#[test]
fn reruns_reproduce_byte_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let p = mini_pipeline(tmp.path());
    let gen = p.root.join("gen.toml");
    run_ok("gen-data", &gen, &p.dir("data2"), &["--threads", "2"]);
    for name in ["train.ares", "test.ares"] {
        let a = std::fs::read(p.dir("data").join(name)).unwrap();
        let b = std::fs::read(p.dir("data2").join(name)).unwrap();
        assert_eq!(a, b, "split {name} differs between reruns");
    }

    let train = p.root.join("train.toml");
    run_ok("train", &train, &p.dir("model2"), &["--threads", "2"]);
    for name in ["model.ares", "history.csv", "summary.json"] {
        let a = std::fs::read(p.dir("model").join(name)).unwrap();
        let b = std::fs::read(p.dir("model2").join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between reruns");
    }
}

#[test]
fn missing_report_inputs_name_expected_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty-run");
    std::fs::create_dir_all(&empty).unwrap();
    let config = tmp.path().join("report.toml");
    write(
        &config,
        &format!("seed = 0\n[report]\nruns = [\"{}\"]\n", empty.display()),
    );
    let output = ares()
        .arg("report")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("report"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("manifest.json"), "stderr: {stderr}");
}

#[test]
fn seed_override_changes_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("gen.toml");
    write(
        &config,
        "seed = 7\n[dataset]\nclass_count = 4\ntrain_size = 16\ntest_size = 8\n",
    );
    run_ok("gen-data", &config, &tmp.path().join("a"), &[]);
    run_ok("gen-data", &config, &tmp.path().join("b"), &["--seed", "8"]);
    let a = std::fs::read(tmp.path().join("a/train.ares")).unwrap();
    let b = std::fs::read(tmp.path().join("b/train.ares")).unwrap();
    assert_ne!(a, b);
}
