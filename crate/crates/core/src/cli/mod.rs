//! The `qwp` command-line front end.
//!
//! Exit status is 0 on success, 1 when a command fails, and 2 when the
//! arguments or the `--config` file are malformed.

mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

pub use manifest::{sha256_file, Manifest};

use crate::align::{self, AlignConfig, OtKind, SamplingMode};
use crate::bench::{self, BenchConfig};
use crate::embedding_io::{self, EmbeddingMatrix};
use crate::eval::{self, Retrieval, DEFAULT_CSLS_KNN, DEFAULT_RANK_CAP};
use crate::ot::SinkhornConfig;
use crate::preprocess;
use crate::refine::{self, RefineConfig};

/// Vocabulary kept from each embedding file unless `--max-vocab` says otherwise.
pub const DEFAULT_MAX_VOCAB: usize = 200_000;

#[derive(Debug, Parser)]
#[command(name = "qwp", version, about = "Unsupervised word-embedding alignment with quantized Wasserstein Procrustes")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn an orthogonal map from the source space to the target space.
    Align(AlignArgs),
    /// Refine a map on a dictionary induced by mutual nearest neighbors.
    Refine(RefineArgs),
    /// Score a map on a bilingual lexicon.
    Evaluate(EvaluateArgs),
    /// Compare quantized and subsampled transport cost estimates on synthetic clouds.
    BenchQuantize(BenchArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Align(_) => "align",
            Command::Refine(_) => "refine",
            Command::Evaluate(_) => "evaluate",
            Command::BenchQuantize(_) => "bench-quantize",
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// File of `key=value` lines supplying flag values; explicit flags win.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads for parallel retrieval (0 uses every core). 1 is bitwise deterministic.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Where to write the run manifest.
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Output map path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Iterations per epoch.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 20_000)]
    train_vocab: usize,
    #[arg(long, default_value_t = 2500)]
    init_vocab: usize,
    /// Frank-Wolfe iterations of the convex initialization.
    #[arg(long, default_value_t = 50)]
    init_iters: usize,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Sinkhorn iteration budget per transport plan.
    #[arg(long, default_value_t = align::ALIGN_SINKHORN_ITERS)]
    sinkhorn_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    sinkhorn_tol: f64,
    #[arg(long, default_value_t = SamplingMode::KMeansPP)]
    sampling: SamplingMode,
    /// Lloyd steps applied after k-means++ seeding.
    #[arg(long, default_value_t = 0)]
    lloyd: usize,
    #[arg(long, default_value_t = OtKind::Balanced)]
    ot: OtKind,
    /// KL relaxation strength for `--ot unbalanced`.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Initial step size of the map update.
    #[arg(long, default_value_t = 0.5)]
    lr0: f64,
    /// Re-quantize at every iteration instead of once per epoch.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    requantize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_VOCAB)]
    max_vocab: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RefineArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    map_in: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = Retrieval::Csls)]
    retrieval: Retrieval,
    #[arg(long, default_value_t = DEFAULT_CSLS_KNN)]
    csls_knn: usize,
    /// Comma-separated frequency window per epoch.
    #[arg(long, value_delimiter = ',', default_value = "5000,7500,10000,12500,15000")]
    dict_vocab: Vec<usize>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    mutual_only: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_VOCAB)]
    max_vocab: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    map: PathBuf,
    /// Gold lexicon, one `source target` pair per line.
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = Retrieval::Nn)]
    retrieval: Retrieval,
    /// Reciprocal ranks beyond this depth count as zero.
    #[arg(long, default_value_t = DEFAULT_RANK_CAP)]
    cap: usize,
    #[arg(long, default_value_t = DEFAULT_CSLS_KNN)]
    csls_knn: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_VOCAB)]
    max_vocab: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mixture components per synthetic cloud.
    #[arg(long, default_value_t = 10)]
    components: usize,
    /// Scale of the component means.
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    lloyd: usize,
    #[command(flatten)]
    common: Common,
}

/// Parses `argv` (program name first), runs one command and returns its exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match splice_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Expands `--config PATH` into flags placed right after the subcommand, ahead
/// of the user's own flags, so that explicit flags override file values.
fn splice_config(argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut path = None;
    for (i, arg) in argv.iter().enumerate().skip(2) {
        let Some(s) = arg.to_str() else { continue };
        if s == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let (Some(path), Some(command)) = (path, argv.get(1).and_then(|c| c.to_str()).map(str::to_owned)) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let mut spliced: Vec<OsString> = argv[..2].to_vec();
    for (key, value) in parse_config(&text).with_context(|| format!("in config {}", path.display()))? {
        match key.as_str() {
            "command" if value != command => bail!("config was written for `{value}`, not `{command}`"),
            "command" | "version" => {}
            "config" => bail!("config files cannot include other config files"),
            _ => {
                spliced.push(format!("--{}", key.replace('_', "-")).into());
                spliced.push(value.into());
            }
        }
    }
    spliced.extend(argv.into_iter().skip(2));
    Ok(spliced)
}

/// `key=value` lines; blank lines, `#` comments and dotted provenance keys are skipped.
fn parse_config(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got `{line}`", n + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            bail!("line {}: empty key", n + 1);
        }
        if !key.contains('.') {
            out.push((key.to_string(), value.to_string()));
        }
    }
    Ok(out)
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    let name = command.name();
    match command {
        Command::Align(a) => {
            configure_threads(a.common.threads);
            cmd_align(name, a)
        }
        Command::Refine(a) => {
            configure_threads(a.common.threads);
            cmd_refine(name, a)
        }
        Command::Evaluate(a) => {
            configure_threads(a.common.threads);
            cmd_evaluate(name, a)
        }
        Command::BenchQuantize(a) => {
            configure_threads(a.common.threads);
            cmd_bench(name, a)
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) {
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: usize) {
    if threads > 1 {
        log::warn!("built without the `parallel` feature; --threads {threads} has no effect");
    }
}

fn manifest_path(explicit: &Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest");
        PathBuf::from(s)
    })
}

fn load_normalized(path: &Path, max_vocab: usize, manifest: &mut Manifest, key: &str) -> anyhow::Result<EmbeddingMatrix> {
    manifest.digest(&format!("input.{key}"), path)?;
    let raw = embedding_io::load_embeddings(path, max_vocab)?;
    log::info!("{key}: {} words, dimension {}", raw.len(), raw.dim());
    manifest.set(&format!("input.{key}.rows"), raw.len());
    Ok(preprocess::normalize(&raw)?)
}

fn load_pair(
    src: &Path,
    tgt: &Path,
    max_vocab: usize,
    manifest: &mut Manifest,
) -> anyhow::Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let t = Instant::now();
    let x = load_normalized(src, max_vocab, manifest, "src")?;
    let y = load_normalized(tgt, max_vocab, manifest, "tgt")?;
    if x.dim() != y.dim() {
        bail!("source dimension {} differs from target dimension {}", x.dim(), y.dim());
    }
    manifest.timing("load", t.elapsed());
    Ok((x, y))
}

/// A manifest path derived from `--out` is provenance only, so replaying the
/// manifest with a new `--out` also moves the new manifest.
fn record_common(m: &mut Manifest, c: &Common, manifest_path: Option<&Path>) {
    m.set("threads", c.threads);
    match (&c.manifest, manifest_path) {
        (Some(explicit), _) => m.set("manifest", explicit.display()),
        (None, Some(derived)) => m.set("output.manifest", derived.display()),
        (None, None) => {}
    }
}

fn cmd_align(name: &str, a: AlignArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = AlignConfig {
        epochs: a.epochs,
        iters_per_epoch: a.iters,
        k: a.k,
        train_vocab: a.train_vocab,
        init_vocab: a.init_vocab,
        init_iters: a.init_iters,
        sampling: a.sampling,
        lloyd_steps: a.lloyd,
        ot: a.ot,
        sinkhorn: SinkhornConfig {
            epsilon: a.epsilon,
            max_iters: a.sinkhorn_iters,
            tol: a.sinkhorn_tol,
            tau: a.tau,
        },
        lr0: a.lr0,
        requantize: a.requantize,
        seed: a.seed,
    };
    cfg.validate()?;
    let manifest_out = manifest_path(&a.common.manifest, &a.out);
    let mut m = Manifest::new(name);
    m.set("src", a.src.display());
    m.set("tgt", a.tgt.display());
    m.set("out", a.out.display());
    m.set("k", cfg.k);
    m.set("epochs", cfg.epochs);
    m.set("iters", cfg.iters_per_epoch);
    m.set("train_vocab", cfg.train_vocab);
    m.set("init_vocab", cfg.init_vocab);
    m.set("init_iters", cfg.init_iters);
    m.set("epsilon", cfg.sinkhorn.epsilon);
    m.set("sinkhorn_iters", cfg.sinkhorn.max_iters);
    m.set("sinkhorn_tol", cfg.sinkhorn.tol);
    m.set("sampling", cfg.sampling);
    m.set("lloyd", cfg.lloyd_steps);
    m.set("ot", cfg.ot);
    m.set("tau", cfg.sinkhorn.tau);
    m.set("lr0", cfg.lr0);
    m.set("requantize", cfg.requantize);
    m.set("seed", cfg.seed);
    m.set("max_vocab", a.max_vocab);
    record_common(&mut m, &a.common, Some(&manifest_out));

    let (x, y) = load_pair(&a.src, &a.tgt, a.max_vocab, &mut m)?;
    let t = Instant::now();
    let result = align::align(&x, &y, &cfg)?;
    m.timing("align", t.elapsed());
    let report = &result.report;
    m.set("result.init_objective", report.init_objective);
    m.set(
        "result.epoch_costs",
        report.epoch_costs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
    );
    m.set("result.max_orthogonality_error", report.max_orthogonality_error);
    m.set("result.max_weight_sum_error", report.max_weight_sum_error);
    m.set("result.sinkhorn_calls", report.stats.sinkhorn_calls);
    m.set("result.sinkhorn_unconverged", report.stats.sinkhorn_unconverged);
    m.set("result.quantize_calls", report.stats.quantize_calls);

    embedding_io::save_map(&result.map, &a.out)?;
    m.digest("output.out", &a.out)?;
    m.timing("total", started.elapsed());
    m.write(&manifest_out)?;
    println!("wrote {} and {}", a.out.display(), manifest_out.display());
    Ok(())
}

fn cmd_refine(name: &str, a: RefineArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = RefineConfig {
        epochs: a.epochs,
        retrieval: a.retrieval,
        csls_knn: a.csls_knn,
        dict_vocab_schedule: a.dict_vocab.clone(),
        mutual_only: a.mutual_only,
    };
    cfg.validate()?;
    let manifest_out = manifest_path(&a.common.manifest, &a.out);
    let mut m = Manifest::new(name);
    m.set("src", a.src.display());
    m.set("tgt", a.tgt.display());
    m.set("map_in", a.map_in.display());
    m.set("out", a.out.display());
    m.set("epochs", cfg.epochs);
    m.set("retrieval", cfg.retrieval);
    m.set("csls_knn", cfg.csls_knn);
    m.set(
        "dict_vocab",
        cfg.dict_vocab_schedule.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    );
    m.set("mutual_only", cfg.mutual_only);
    m.set("max_vocab", a.max_vocab);
    record_common(&mut m, &a.common, Some(&manifest_out));

    let (x, y) = load_pair(&a.src, &a.tgt, a.max_vocab, &mut m)?;
    m.digest("input.map_in", &a.map_in)?;
    let w0 = embedding_io::load_map(&a.map_in)?.map;
    let t = Instant::now();
    let result = refine::refine(x.vectors(), y.vectors(), &w0, &cfg)?;
    m.timing("refine", t.elapsed());
    m.set(
        "result.dictionary_sizes",
        result.dictionary_sizes.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
    );
    m.set("result.orthogonality_error", result.map.orthogonality_error());

    embedding_io::save_map(&result.map, &a.out)?;
    m.digest("output.out", &a.out)?;
    m.timing("total", started.elapsed());
    m.write(&manifest_out)?;
    println!("wrote {} and {}", a.out.display(), manifest_out.display());
    Ok(())
}

fn cmd_evaluate(name: &str, a: EvaluateArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let mut m = Manifest::new(name);
    m.set("src", a.src.display());
    m.set("tgt", a.tgt.display());
    m.set("map", a.map.display());
    m.set("dict", a.dict.display());
    m.set("retrieval", a.retrieval);
    m.set("cap", a.cap);
    m.set("csls_knn", a.csls_knn);
    m.set("max_vocab", a.max_vocab);
    record_common(&mut m, &a.common, a.common.manifest.as_deref());

    let (x, y) = load_pair(&a.src, &a.tgt, a.max_vocab, &mut m)?;
    m.digest("input.map", &a.map)?;
    m.digest("input.dict", &a.dict)?;
    let w = embedding_io::load_map(&a.map)?.map;
    if w.dim() != x.dim() {
        bail!("map dimension {} differs from embedding dimension {}", w.dim(), x.dim());
    }
    // Out-of-vocabulary pairs stay in the lexicon so that they count as skipped queries.
    let lexicon = embedding_io::read_lexicon_file(&a.dict)?;
    let usable = embedding_io::filter_lexicon(&lexicon, &x, &y);
    log::info!("dictionary: {} pairs usable, {} out of vocabulary", usable.kept, usable.dropped);
    let t = Instant::now();
    let report = eval::evaluate_with_knn(&x, &y, &w, &lexicon, a.retrieval, a.cap, a.csls_knn)?;
    m.timing("evaluate", t.elapsed());
    print!("{}{}", report.to_text(), report.to_key_values());
    for line in report.to_key_values().lines() {
        if let Some((k, v)) = line.split_once('=') {
            m.set(&format!("result.{k}"), v);
        }
    }
    m.timing("total", started.elapsed());
    if let Some(path) = &a.common.manifest {
        m.write(path)?;
    }
    Ok(())
}

fn cmd_bench(name: &str, a: BenchArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = BenchConfig {
        seed: a.seed,
        components: a.components,
        separation: a.separation,
        lloyd_steps: a.lloyd,
        ..BenchConfig::new(a.n, a.d, a.k, a.trials)
    };
    let report = bench::bench_quantize(&cfg)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.common.manifest {
        let mut m = Manifest::new(name);
        m.set("n", cfg.n);
        m.set("d", cfg.d);
        m.set("k", cfg.k);
        m.set("trials", cfg.trials);
        m.set("seed", cfg.seed);
        m.set("components", cfg.components);
        m.set("separation", cfg.separation);
        m.set("lloyd", cfg.lloyd_steps);
        record_common(&mut m, &a.common, Some(path));
        m.set("result.win_rate", report.win_rate());
        m.set("result.mean_err_quantized", report.mean_quantized_error());
        m.set("result.mean_err_random", report.mean_random_error());
        m.timing("total", started.elapsed());
        m.write(path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_parsing_skips_comments_and_provenance() {
        let pairs = parse_config("# run\nk = 30\n\ninput.src.sha256=abc\ntime.total_seconds=1\nseed=4\n").unwrap();
        assert_eq!(pairs, vec![("k".into(), "30".into()), ("seed".into(), "4".into())]);
        assert!(parse_config("k 30").is_err());
        assert!(parse_config("=3").is_err());
    }

    #[test]
    fn config_values_precede_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "command=align\nk=30\ntrain_vocab=100\n").unwrap();
        let argv = os(&["qwp", "align", "--k", "7", "--config", cfg.to_str().unwrap()]);
        let spliced = splice_config(argv).unwrap();
        let text: Vec<_> = spliced.iter().map(|s| s.to_str().unwrap()).collect();
        assert_eq!(&text[..6], &["qwp", "align", "--k", "30", "--train-vocab", "100"]);
        assert_eq!(&text[6..8], &["--k", "7"]);
    }

    #[test]
    fn config_for_another_command_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "command=refine\n").unwrap();
        assert!(splice_config(os(&["qwp", "align", "--config", cfg.to_str().unwrap()])).is_err());
    }

    #[test]
    fn later_flags_override_earlier_ones() {
        let cli = Cli::try_parse_from(os(&["qwp", "bench-quantize", "--n", "5", "--d", "2", "--k", "3", "--trials", "1", "--k", "4"]))
            .unwrap();
        match cli.command {
            Command::BenchQuantize(b) => assert_eq!(b.k, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flag_defaults_match_the_library() {
        let cli = Cli::try_parse_from(os(&["qwp", "align", "--src", "a", "--tgt", "b", "--out", "c"])).unwrap();
        let Command::Align(a) = cli.command else { unreachable!() };
        let d = AlignConfig::default();
        assert_eq!(
            (a.k, a.epochs, a.iters, a.train_vocab, a.init_vocab, a.init_iters),
            (d.k, d.epochs, d.iters_per_epoch, d.train_vocab, d.init_vocab, d.init_iters)
        );
        assert_eq!((a.epsilon, a.sinkhorn_iters, a.sinkhorn_tol, a.tau), (d.sinkhorn.epsilon, d.sinkhorn.max_iters, d.sinkhorn.tol, d.sinkhorn.tau));
        assert_eq!((a.sampling, a.lloyd, a.ot, a.lr0, a.requantize, a.seed), (d.sampling, d.lloyd_steps, d.ot, d.lr0, d.requantize, d.seed));

        let cli = Cli::try_parse_from(os(&["qwp", "refine", "--src", "a", "--tgt", "b", "--map-in", "m", "--out", "c"])).unwrap();
        let Command::Refine(r) = cli.command else { unreachable!() };
        let d = RefineConfig::default();
        assert_eq!((r.epochs, r.retrieval, r.csls_knn, r.mutual_only), (d.epochs, d.retrieval, d.csls_knn, d.mutual_only));
        assert_eq!(r.dict_vocab, d.dict_vocab_schedule);
    }
}
