use critrep::datasets::{load_idx, Manifest};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_critrep");

fn mnist_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/manifest.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CRITREP_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small critical-temperature Ising set under `dir`, returning its manifest.
fn tiny_ising(dir: &Path, n: usize) -> PathBuf {
    let n = n.to_string();
    ok(&[
        "--threads",
        "1",
        "ising",
        "--preset",
        "critical",
        "--n",
        &n,
        "--sweeps-equilibrate",
        "200",
        "--out",
        s(dir),
    ]);
    dir.join("manifest.json")
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn assert_same_tree(a: &Path, b: &Path) {
    let (fa, fb) = (files_under(a), files_under(b));
    assert_eq!(fa, fb);
    assert!(!fa.is_empty());
    for f in fa {
        assert!(
            fs::read(a.join(&f)).unwrap() == fs::read(b.join(&f)).unwrap(),
            "{} differs",
            f.display()
        );
    }
}

#[test]
fn missing_dataset_file_exits_two_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.json");
    fs::write(
        &manifest,
        r#"{"ghost": {"images": "nowhere/ghost-images-idx3-ubyte"}}"#,
    )
    .unwrap();
    let out = run(&[
        "train",
        "--preset",
        "rbm-mnist",
        "--dataset",
        "ghost",
        "--manifest",
        s(&manifest),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere/ghost-images-idx3-ubyte"), "{err}");

    let out = run(&["train", "--dataset", "absent", "--manifest", s(&manifest)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["--threads", "0", "maxent", "--beta", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["train", "--config", s(&dir.path().join("none.json"))])
            .status
            .code(),
        Some(2)
    );
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"model": {"preset": "rbm"}}"#).unwrap();
    assert_eq!(run(&["train", "--config", s(&bad)]).status.code(), Some(2));
    let out = run(&["analyze", "--checkpoint", s(&dir.path().join("none.ckpt"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn print_config_applies_overrides() {
    let text = ok(&[
        "train",
        "--preset",
        "mlp-mnist",
        "--epochs",
        "3",
        "--lr",
        "0.25",
        "--print-config",
    ]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["train"]["epochs"], 3);
    assert_eq!(v["train"]["learning_rate"], 0.25);
    assert_eq!(v["model"]["preset"], "supervised");
    assert_eq!(v["train"]["stop_at_accuracy"], 0.85);
}

#[test]
fn ising_smoke_output_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_ising(dir.path(), 10);
    let ds = load_idx(&dir.path().join("ising-critical-images-idx3-ubyte"), None).unwrap();
    assert_eq!(ds.samples.shape(), (10, 100));
    assert!(ds.samples.as_slice().iter().all(|&x| x == 0.0 || x == 1.0));
    let via_manifest = Manifest::load(&manifest)
        .unwrap()
        .load_dataset("ising-critical")
        .unwrap();
    assert_eq!(via_manifest.samples, ds.samples);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ising-critical.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["params"]["temperature"], 2.26);
    assert_eq!(sidecar["seed"], 7);
    assert!(dir.path().join("run_manifest.json").exists());
}

fn maxent_json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let mut all = vec!["maxent", "--out", s(dir)];
    all.extend_from_slice(args);
    ok(&all);
    serde_json::from_str(&fs::read_to_string(dir.join("maxent.json")).unwrap()).unwrap()
}

#[test]
fn maxent_slopes_and_resolution_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let one = maxent_json(&dir.path().join("b1"), &["--beta", "1"]);
    assert!((one["loglog_slope"].as_f64().unwrap() + 2.0).abs() < 0.01);
    let zero = maxent_json(&dir.path().join("b0"), &["--beta", "0"]);
    assert!((zero["loglog_slope"].as_f64().unwrap() + 1.0).abs() < 0.01);

    let r = one["resolution"].as_f64().unwrap().to_string();
    let back = maxent_json(&dir.path().join("r"), &["--resolution", &r]);
    assert!((back["beta"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(back["mode"], "resolution");

    let spectrum = fs::read_to_string(dir.path().join("b1/maxent_spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("k,m_k\n1,"));
    assert_eq!(spectrum.lines().count(), 1001);
}

#[test]
fn kmeans_single_cluster_and_too_many() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_ising(&dir.path().join("data"), 50);
    let out = dir.path().join("k1");
    ok(&[
        "kmeans",
        "--manifest",
        s(&manifest),
        "--dataset",
        "ising-critical",
        "--k",
        "1",
        "--out",
        s(&out),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("kmeans.json")).unwrap()).unwrap();
    assert_eq!(v["cluster_sizes"], serde_json::json!([50]));
    assert_eq!(
        fs::read_to_string(out.join("kmeans_spectrum.csv")).unwrap(),
        "k,m_k\n50,1\n"
    );

    let code = run(&[
        "kmeans",
        "--manifest",
        s(&manifest),
        "--dataset",
        "ising-critical",
        "--k",
        "51",
        "--out",
        s(&out),
    ])
    .status
    .code();
    assert_eq!(code, Some(2));
}

#[test]
fn train_snapshots_then_analyze_layers_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = tiny_ising(&dir.path().join("data"), 300);
    let run_dir = dir.path().join("ae");
    ok(&[
        "train",
        "--preset",
        "ising-ae-critical",
        "--manifest",
        s(&manifest),
        "--epochs",
        "2",
        "--snapshots",
        "0,1,2",
        "--out",
        s(&run_dir),
    ]);
    for f in [
        "checkpoints/epoch-0000.ckpt",
        "checkpoints/epoch-0001.ckpt",
        "checkpoints/epoch-0002.ckpt",
        "final.ckpt",
    ] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let metrics = fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);

    let an = run_dir.join("an");
    ok(&[
        "analyze",
        "--preset",
        "ising-ae-critical",
        "--manifest",
        s(&manifest),
        "--checkpoint",
        s(&run_dir.join("final.ckpt")),
        "--layer",
        "0,1",
        "--threshold-sweep",
        "--out",
        s(&an),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(an.join("analysis.json")).unwrap()).unwrap();
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 10);
    assert_eq!(reports[0]["layer"], 0);
    assert_eq!(reports[0]["summary"]["M"], 300);
    assert!(an.join("spectrum_x_t0.30.csv").exists());
    assert!(an.join("binned_z1_t0.70.csv").exists());

    let report = ok(&["report", s(&run_dir), s(&an)]);
    assert!(report.contains("z1 t=0.50"), "{report}");
}

#[test]
fn subcommands_are_deterministic_single_threaded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_ising(&d.join("data-a"), 400);
    let manifest = tiny_ising(&d.join("data-b"), 400);
    assert_same_tree(&d.join("data-a"), &d.join("data-b"));

    // identical command lines, so each run writes to the same paths; the
    // first run is moved aside before the second
    let t = d.join("run");
    for tag in ["a", "b"] {
        ok(&[
            "--threads",
            "1",
            "train",
            "--preset",
            "ising-ae-critical",
            "--manifest",
            s(&manifest),
            "--epochs",
            "2",
            "--snapshots",
            "0,2",
            "--out",
            s(&t.join("train")),
        ]);
        ok(&[
            "--threads",
            "1",
            "analyze",
            "--preset",
            "ising-ae-critical",
            "--manifest",
            s(&manifest),
            "--checkpoint",
            s(&t.join("train/final.ckpt")),
            "--threshold-sweep",
            "--out",
            s(&t.join("analyze")),
        ]);
        ok(&[
            "--threads",
            "1",
            "kmeans",
            "--manifest",
            s(&manifest),
            "--dataset",
            "ising-critical",
            "--k",
            "20",
            "--seed",
            "5",
            "--out",
            s(&t.join("kmeans")),
        ]);
        ok(&[
            "--threads",
            "1",
            "maxent",
            "--beta",
            "0.5",
            "--k-max",
            "300",
            "--out",
            s(&t.join("maxent")),
        ]);
        fs::rename(&t, d.join(tag)).unwrap();
    }
    assert_same_tree(&d.join("a"), &d.join("b"));
}

#[test]
fn shipped_presets_train_and_analyze_their_own_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mnist = mnist_manifest();
    let ising = d.join("ising");
    ok(&[
        "ising",
        "--n",
        "500",
        "--sweeps-equilibrate",
        "200",
        "--out",
        s(&ising),
    ]);
    let ising_manifest = ising.join("manifest.json");
    for (name, _) in critrep::cli::PRESETS {
        let manifest = if name.starts_with("ising") {
            &ising_manifest
        } else {
            &mnist
        };
        let out = d.join(name);
        ok(&[
            "train",
            "--preset",
            name,
            "--manifest",
            s(manifest),
            "--epochs",
            "1",
            "--out",
            s(&out),
        ]);
        let text = ok(&[
            "analyze",
            "--preset",
            name,
            "--manifest",
            s(manifest),
            "--checkpoint",
            s(&out.join("final.ckpt")),
            "--out",
            s(&out.join("analysis")),
        ]);
        assert!(text.contains("H_Z"), "{name}: {text}");
    }
}
