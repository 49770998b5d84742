use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cwgan::autograd::Tensor;
use cwgan::data::{load_tensor, save_tensor};

const SMALL: &str = r#"
[prior]
kind = "rectangular"

[forward]
model = "heat"
kappa = 0.64
steps = 20

[data]
samples = 40
grid = 8
noise = { sigma = 0.5 }
seed = 3

[network]
channels = 2
depth = 1
leaky_slope = 0.1

[train]
epochs = 2
batch_size = 10
n_critic = 2
latent_dim = 2
rng_seed = 3

[output]
checkpoint_every = 1

[infer]
draws = 20
oracle_draws = 2000
oracle_min_ess = 5.0

[probe]
measurements = 5
latents = 2
grid = 12
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cwgan"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path to contents for every file below `dir`.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// The training log without its wall-clock column.
fn log_without_time(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

#[test]
fn missing_config_exits_with_status_2() {
    let out = run(&["generate", "--config", "/no/such/config.toml", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/config.toml"));
}

#[test]
fn bad_override_exits_with_status_2() {
    let (dir, cfg) = setup();
    let out_dir = dir.path().join("run");
    for o in ["no_such_key=1", "kappa=0.1", "epochs"] {
        let out = run(&["generate", "--config", s(&cfg), "--out", s(&out_dir), "--override", o]);
        assert_eq!(out.status.code(), Some(2), "override {o}");
    }
}

#[test]
fn generate_is_deterministic_and_writes_previews() {
    let (dir, cfg) = setup();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", "--config", s(&cfg), "--out", s(&a), "--seed", "7"]);
    ok(&["generate", "--config", s(&cfg), "--out", s(&b), "--seed", "7"]);
    assert_eq!(snapshot(&a), snapshot(&b));
    for i in 0..4 {
        for v in ["x", "y"] {
            assert!(a.join(format!("preview/pair-{i}-{v}.pgm")).is_file());
        }
    }
    assert!(!a.join("preview/pair-4-x.pgm").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("dataset/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["count"], 40);

    let c = dir.path().join("c");
    ok(&["generate", "--config", s(&cfg), "--out", s(&c), "--seed", "8"]);
    assert_ne!(snapshot(&a.join("dataset")), snapshot(&c.join("dataset")));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let (dir, cfg) = setup();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", "--config", s(&cfg), "--out", s(&a)]);
    let out = bin()
        .args(["generate", "--config", s(&cfg), "--out", s(&b)])
        .env("CWGAN_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(snapshot(&a), snapshot(&b));
}

#[test]
fn train_infer_probe_eval_pipeline() {
    let (dir, cfg) = setup();
    let run_dir = dir.path().join("run");
    let r = s(&run_dir);
    ok(&["generate", "--config", s(&cfg), "--out", r]);

    // One epoch: 4 batches, a generator update every 2.
    ok(&["train", "--config", s(&cfg), "--out", r, "--override", "epochs=1"]);
    let log = log_without_time(&run_dir.join("train.csv"));
    assert_eq!(log.len(), 1 + 2);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(run_dir.join("final.json")).unwrap()).unwrap();
    assert_eq!(meta["epoch"], 1);

    // Resuming continues the step numbering and matches a straight run.
    ok(&["train", "--config", s(&cfg), "--out", r, "--resume", s(&run_dir.join("final.cwpm"))]);
    let resumed = log_without_time(&run_dir.join("train.csv"));
    let steps: Vec<&str> = resumed[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["1", "2", "3", "4"]);
    let straight = dir.path().join("straight");
    ok(&["generate", "--config", s(&cfg), "--out", s(&straight)]);
    ok(&["train", "--config", s(&cfg), "--out", s(&straight)]);
    assert_eq!(log_without_time(&straight.join("train.csv")), resumed);
    assert_eq!(fs::read(straight.join("final.cwpm")).unwrap(), fs::read(run_dir.join("final.cwpm")).unwrap());
    let finite = resumed.last().unwrap().split(',').skip(1).all(|v| v.parse::<f64>().unwrap().is_finite());
    assert!(finite);

    // Inference from a dataset record, twice, plus the reference oracle.
    let ds = run_dir.join("dataset");
    let infer = |into: &Path, extra: &[&str]| {
        let mut args = vec!["infer", "--out", r, "--dataset", s(&ds), "--index", "3", "--into", s(into)];
        args.extend_from_slice(extra);
        ok(&args);
    };
    let (i1, i2) = (dir.path().join("i1"), dir.path().join("i2"));
    infer(&i1, &["--oracle"]);
    infer(&i2, &["--oracle"]);
    assert_eq!(snapshot(&i1), snapshot(&i2));
    for name in ["mean", "sd", "truth", "measurement", "important-0", "important-3"] {
        assert!(i1.join(format!("{name}.cwt")).is_file() && i1.join(format!("{name}.pgm")).is_file(), "{name}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(i1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["draws"], 20);
    assert_eq!(summary["pivots"].as_array().unwrap().len(), 4);
    let oracle: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(i1.join("oracle/summary.json")).unwrap()).unwrap();
    assert!(oracle["ess"].as_f64().unwrap() >= 5.0);

    // K = 1 gives an identically zero SD.
    let k1 = dir.path().join("k1");
    infer(&k1, &["--draws", "1", "--important", "1"]);
    assert!(load_tensor(&k1.join("sd.cwt")).unwrap().data().iter().all(|&v| v == 0.0));

    // A measurement file of the wrong shape names both shapes.
    let bad = dir.path().join("bad.cwt");
    save_tensor(&bad, &Tensor::zeros(&[5, 7])).unwrap();
    let out = run(&["infer", "--out", r, "--measurement", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[5, 7]") && err.contains("[8, 8]"), "{err}");

    // The measurement written by infer can be fed back in.
    let again = dir.path().join("again");
    ok(&["infer", "--out", r, "--measurement", s(&i1.join("measurement.cwt")), "--index", "3", "--into", s(&again), "--seed", "3"]);
    assert_eq!(fs::read(again.join("mean.cwt")).unwrap(), {
        let t = dir.path().join("t");
        infer(&t, &["--seed", "3"]);
        fs::read(t.join("mean.cwt")).unwrap()
    });

    // Gradient probes: one map per pixel, ratios in [0, 1].
    ok(&["probe", "--out", r, "--grad", "--pixels", "6"]);
    let maps = fs::read_dir(run_dir.join("grad"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".pgm"))
        .count();
    assert_eq!(maps, 6);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("grad/report.json")).unwrap()).unwrap();
    for p in report["probes"].as_array().unwrap() {
        let (ratio, base) = (p["ratio"].as_f64().unwrap(), p["baseline"].as_f64().unwrap());
        assert!((0.0..=1.0).contains(&ratio) && (0.0..=1.0).contains(&base));
    }
    let first = fs::read(run_dir.join("grad/report.json")).unwrap();
    ok(&["probe", "--out", r, "--grad", "--pixels", "6"]);
    assert_eq!(fs::read(run_dir.join("grad/report.json")).unwrap(), first);

    // Eval: identical summaries give zeros.
    let ev = dir.path().join("eval");
    ok(&["eval", s(&i1), s(&i2), "--out", s(&ev)]);
    assert_eq!(fs::read_to_string(ev.join("metrics.csv")).unwrap(), "statistic,l1\nmean,0\nsd,0\n");
}

#[test]
fn probe_fft_needs_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    ok(&["probe", "--fft", "--out", s(&out), "--pixels", "2"]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fft/report.json")).unwrap()).unwrap();
    assert_eq!(report["probes"].as_array().unwrap().len(), 2);
    assert_eq!(report["rings"].as_array().unwrap().len(), 2);
    assert!(out.join("fft/response-9-7.pgm").is_file());
    assert_eq!(run(&["probe", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(run(&["probe", "--fft", "--out", s(&out), "--pixels", "7"]).status.code(), Some(2));
}

#[test]
fn eval_reports_constant_offsets_and_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for d in [&a, &b, &c] {
        fs::create_dir_all(d).unwrap();
    }
    let field = |v: f32, shape: &[usize]| Tensor::full(shape, v);
    save_tensor(&a.join("mean.cwt"), &field(1.0, &[3, 4])).unwrap();
    save_tensor(&a.join("sd.cwt"), &field(0.5, &[3, 4])).unwrap();
    save_tensor(&b.join("mean.cwt"), &field(1.25, &[3, 4])).unwrap();
    save_tensor(&b.join("sd.cwt"), &field(0.0, &[3, 4])).unwrap();
    save_tensor(&c.join("mean.cwt"), &field(1.0, &[4, 4])).unwrap();
    save_tensor(&c.join("sd.cwt"), &field(1.0, &[4, 4])).unwrap();
    let ev = dir.path().join("ev");
    ok(&["eval", s(&a), s(&b), "--out", s(&ev)]);
    assert_eq!(fs::read_to_string(ev.join("metrics.csv")).unwrap(), "statistic,l1\nmean,0.25\nsd,0.5\n");
    let out = run(&["eval", s(&a), s(&c), "--out", s(&ev)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grids differ"));
}
