use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qwp_core::embedding_io::{load_map, save_embeddings, save_map};
use qwp_core::procrustes::OrthogonalMap;
use qwp_core::synthetic::{harness, Harness, HarnessConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
    harness: Harness,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let cfg = HarnessConfig {
            clusters: 20,
            ..HarnessConfig::new(300, 8, 0.01)
        };
        let harness = harness(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        save_embeddings(&harness.src, dir.path().join("src.vec")).unwrap();
        save_embeddings(&harness.tgt, dir.path().join("tgt.vec")).unwrap();
        let dict: String = harness
            .gold
            .iter()
            .flat_map(|(s, ts)| ts.iter().map(move |t| format!("{s} {t}\n")))
            .collect();
        fs::write(dir.path().join("gold.txt"), dict).unwrap();
        Self { dir, harness }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn align_args(&self, out: &str) -> Vec<String> {
        let mut args: Vec<String> = vec!["align".into(), "--src".into(), self.p("src.vec"), "--tgt".into(), self.p("tgt.vec")];
        args.extend(["--out".into(), self.p(out)]);
        for (k, v) in [
            ("--k", "30"),
            ("--epochs", "2"),
            ("--iters", "5"),
            ("--train-vocab", "300"),
            ("--init-vocab", "60"),
            ("--init-iters", "5"),
            ("--threads", "1"),
        ] {
            args.extend([k.to_string(), v.to_string()]);
        }
        args
    }
}

fn qwp(args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qwp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("qwp runs")
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn read_kv(path: &Path) -> BTreeMap<String, String> {
    key_values(&fs::read_to_string(path).unwrap())
}

#[test]
fn align_writes_map_and_complete_manifest() {
    let f = Fixture::new();
    let out = qwp(&f.align_args("w.map"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map = load_map(f.path("w.map")).unwrap();
    assert!(map.is_orthogonal());
    let m = read_kv(&f.path("w.map.manifest"));
    for key in [
        "command", "k", "epochs", "iters", "train_vocab", "init_vocab", "init_iters", "epsilon", "sinkhorn_iters",
        "sinkhorn_tol", "sampling", "lloyd", "ot", "tau", "lr0", "requantize", "seed", "max_vocab", "threads",
        "input.src.sha256", "input.tgt.sha256", "output.out.sha256", "time.load_seconds", "time.align_seconds",
    ] {
        assert!(m.contains_key(key), "manifest lacks {key}");
    }
    assert_eq!(m["command"], "align");
    assert_eq!(m["k"], "30");
    assert_eq!(m["epsilon"], "0.05");
    assert_eq!(m["input.src.sha256"], qwp_core::cli::sha256_file(&f.path("src.vec")).unwrap());
}

#[test]
fn manifest_replays_to_identical_map() {
    let f = Fixture::new();
    assert!(qwp(&f.align_args("first.map")).status.success());
    let replay = strings(&["align", "--config", &f.p("first.map.manifest"), "--out", &f.p("second.map")]);
    let out = qwp(&replay);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(f.path("first.map")).unwrap(), fs::read(f.path("second.map")).unwrap());
    let second = read_kv(&f.path("second.map.manifest"));
    assert_eq!(second["k"], "30");
    assert_eq!(second["out"], f.p("second.map"));
}

#[test]
fn explicit_flags_override_config_file() {
    let f = Fixture::new();
    fs::write(f.path("run.cfg"), "# smaller run\nk=12\nseed=3\n").unwrap();
    let mut args = f.align_args("w.map");
    args.extend(strings(&["--config", &f.p("run.cfg"), "--seed", "9"]));
    let out = qwp(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_kv(&f.path("w.map.manifest"));
    // `--k 30` precedes the file in argv but flags always beat file values.
    assert_eq!(m["k"], "30");
    assert_eq!(m["seed"], "9");
}

#[test]
fn zero_epoch_align_matches_convex_initialization() {
    let f = Fixture::new();
    let mut zero = f.align_args("zero.map");
    zero.extend(strings(&["--epochs", "0"]));
    assert!(qwp(&zero).status.success());
    let mut other_k = f.align_args("zero_k.map");
    other_k.extend(strings(&["--epochs", "0", "--k", "7", "--sampling", "random"]));
    assert!(qwp(&other_k).status.success());
    // Nothing after the initialization runs, so anchor settings cannot matter.
    assert_eq!(fs::read(f.path("zero.map")).unwrap(), fs::read(f.path("zero_k.map")).unwrap());
}

#[test]
fn refine_requires_map_in_and_zero_epochs_is_identity() {
    let f = Fixture::new();
    let missing = strings(&["refine", "--src", &f.p("src.vec"), "--tgt", &f.p("tgt.vec"), "--out", &f.p("r.map")]);
    assert_eq!(qwp(&missing).status.code(), Some(2));

    save_map(&OrthogonalMap::new(f.harness.rotation.clone()).unwrap(), f.path("truth.map")).unwrap();
    let args = strings(&[
        "refine", "--src", &f.p("src.vec"), "--tgt", &f.p("tgt.vec"), "--map-in", &f.p("truth.map"), "--out", &f.p("r.map"),
        "--epochs", "0",
    ]);
    let out = qwp(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_map(f.path("r.map")).unwrap().map, load_map(f.path("truth.map")).unwrap().map);
    assert!(read_kv(&f.path("r.map.manifest")).contains_key("input.map_in.sha256"));
}

#[test]
fn pipeline_align_refine_evaluate() {
    let f = Fixture::new();
    assert!(qwp(&f.align_args("a.map")).status.success());
    let refine = strings(&[
        "refine", "--src", &f.p("src.vec"), "--tgt", &f.p("tgt.vec"), "--map-in", &f.p("a.map"), "--out", &f.p("r.map"),
        "--dict-vocab", "100,200,300", "--epochs", "3",
    ]);
    let out = qwp(&refine);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval = strings(&[
        "evaluate", "--src", &f.p("src.vec"), "--tgt", &f.p("tgt.vec"), "--map", &f.p("r.map"), "--dict", &f.p("gold.txt"),
        "--retrieval", "csls",
    ]);
    let out = qwp(&eval);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = key_values(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(report["retrieval"], "csls");
    assert_eq!(report["n_queries"], "300");
    let p1: f64 = report["p_at_1"].parse().unwrap();
    let mrr: f64 = report["mrr"].parse().unwrap();
    assert!(mrr >= p1);
}

#[test]
fn evaluate_identity_on_identical_spaces_is_perfect() {
    let f = Fixture::new();
    save_map(&OrthogonalMap::identity(8), f.path("id.map")).unwrap();
    let self_dict: String = f.harness.src.vocab().iter().map(|w| format!("{w} {w}\n")).collect();
    fs::write(f.path("self.txt"), self_dict).unwrap();
    let args = strings(&[
        "evaluate", "--src", &f.p("src.vec"), "--tgt", &f.p("src.vec"), "--map", &f.p("id.map"), "--dict", &f.p("self.txt"),
        "--manifest", &f.p("eval.manifest"),
    ]);
    let out = qwp(&args);
    assert!(out.status.success());
    let report = key_values(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(report["p_at_1"], "1");
    assert_eq!(report["retrieval"], "nn");
    assert_eq!(read_kv(&f.path("eval.manifest"))["result.p_at_1"], "1");
}

#[test]
fn evaluate_out_of_vocabulary_dictionary_reports_zeros() {
    let f = Fixture::new();
    save_map(&OrthogonalMap::identity(8), f.path("id.map")).unwrap();
    fs::write(f.path("oov.txt"), "nope nada\nzilch t3\n").unwrap();
    let args = strings(&[
        "evaluate", "--src", &f.p("src.vec"), "--tgt", &f.p("tgt.vec"), "--map", &f.p("id.map"), "--dict", &f.p("oov.txt"),
    ]);
    let out = qwp(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = key_values(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(report["n_queries"], "2");
    assert_eq!(report["n_skipped"], "2");
    assert_eq!(report["p_at_1"], "0");
    assert_eq!(report["mrr"], "0");
}

#[test]
fn bench_is_reproducible_and_exact_at_full_size() {
    let args = strings(&["bench-quantize", "--n", "150", "--d", "3", "--k", "10", "--trials", "1", "--seed", "4"]);
    let a = qwp(&args);
    let b = qwp(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let table = String::from_utf8(a.stdout).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("0\t")).count(), 1);

    let full = qwp(&strings(&["bench-quantize", "--n", "60", "--d", "2", "--k", "60", "--trials", "2"]));
    let report = key_values(&String::from_utf8(full.stdout).unwrap());
    assert!(report["mean_err_quantized"].parse::<f64>().unwrap() < 1e-9);
    assert!(report["mean_err_random"].parse::<f64>().unwrap() < 1e-9);
}

#[test]
fn failures_and_misuse_use_distinct_exit_codes() {
    let f = Fixture::new();
    let missing_file = strings(&["align", "--src", &f.p("absent.vec"), "--tgt", &f.p("tgt.vec"), "--out", &f.p("w.map")]);
    let out = qwp(&missing_file);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.vec"));

    let bad_value = strings(&["align", "--src", "a", "--tgt", "b", "--out", "c", "--sampling", "uniform"]);
    assert_eq!(qwp(&bad_value).status.code(), Some(2));
    assert_eq!(qwp(&strings(&["frobnicate"])).status.code(), Some(2));

    fs::write(f.path("bad.cfg"), "k 30\n").unwrap();
    let bad_cfg = strings(&["bench-quantize", "--n", "5", "--d", "1", "--k", "2", "--trials", "1", "--config", &f.p("bad.cfg")]);
    assert_eq!(qwp(&bad_cfg).status.code(), Some(2));

    let too_big = strings(&["bench-quantize", "--n", "6000", "--d", "2", "--k", "3", "--trials", "1"]);
    assert_eq!(qwp(&too_big).status.code(), Some(1));
    let invalid = strings(&["bench-quantize", "--n", "5", "--d", "2", "--k", "9", "--trials", "1"]);
    assert_eq!(qwp(&invalid).status.code(), Some(1));
}
