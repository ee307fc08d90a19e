//! Acceptance criteria, run in order in a single test so that the wall-clock
//! budgets are measured without other tests competing for the CPU.
//!
//! `cargo test --release -p qwp-core --test acceptance -- --nocapture`
//!
//! Each criterion prints one `PASS` or `FAIL` line; the test fails at the end if
//! any criterion failed. The full-scale criterion runs only when
//! `QWP_FULLSCALE_DIR` names a directory holding the pretrained vectors and
//! dictionaries (see `full_scale` below); otherwise it prints `SKIP`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use qwp_core::align::{align, AlignConfig, Alignment, SamplingMode};
use qwp_core::bench::{bench_quantize, BenchConfig};
use qwp_core::embedding_io::{self, EmbeddingMatrix};
use qwp_core::eval::{evaluate, EvalReport, Retrieval, DEFAULT_RANK_CAP};
use qwp_core::ot::{self, CostMatrix, SinkhornConfig};
use qwp_core::preprocess;
use qwp_core::procrustes::procrustes_closed_form;
use qwp_core::quantize::{quantize, QuantizeConfig};
use qwp_core::refine::{refine, RefineConfig};
use qwp_core::synthetic::{self, harness, Harness, HarnessConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

#[derive(Default)]
struct Ledger {
    outcomes: Vec<Outcome>,
}

impl Ledger {
    fn record(&mut self, id: &'static str, title: &'static str, started: Instant, budget: Option<Duration>, checks: Checks) {
        let elapsed = started.elapsed();
        let mut checks = checks;
        if let Some(budget) = budget {
            checks.expect(elapsed <= budget, format!("runtime {:.1}s within {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()));
        }
        let outcome = Outcome {
            id,
            title,
            pass: checks.failed.is_empty(),
            detail: if checks.failed.is_empty() { checks.notes.join("; ") } else { checks.failed.join("; ") },
            elapsed,
        };
        println!(
            "{} criterion {}: {} ({:.1}s) {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.id,
            outcome.title,
            outcome.elapsed.as_secs_f64(),
            outcome.detail
        );
        self.outcomes.push(outcome);
    }

    fn skip(&self, id: &str, title: &str, why: &str) {
        println!("SKIP criterion {id}: {title} ({why})");
    }
}

/// Named boolean checks collected for one criterion.
#[derive(Default)]
struct Checks {
    notes: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    fn expect(&mut self, ok: bool, what: String) {
        if ok {
            self.notes.push(what);
        } else {
            self.failed.push(format!("NOT {what}"));
        }
    }

    fn note(&mut self, what: String) {
        self.notes.push(what);
    }
}

fn random_instance(rng: &mut ChaCha8Rng, na: usize, nb: usize) -> (CostMatrix, Vec<f64>, Vec<f64>) {
    let c = CostMatrix::new(DMatrix::from_fn(na, nb, |_, _| rng.random_range(0.0..=4.0))).unwrap();
    let simplex = |rng: &mut ChaCha8Rng, n: usize| {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let a = simplex(rng, na);
    let b = simplex(rng, nb);
    (c, a, b)
}

fn sinkhorn_correctness() -> Checks {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = SinkhornConfig {
        epsilon: 0.05,
        ..SinkhornConfig::default()
    };
    let (mut worst_violation, mut worst_gap) = (0.0f64, f64::INFINITY);
    let mut all_converged = true;
    for _ in 0..100 {
        let na = rng.random_range(1..=32);
        let nb = rng.random_range(1..=32);
        let (c, a, b) = random_instance(&mut rng, na, nb);
        let plan = ot::sinkhorn(&c, &a, &b, &cfg).unwrap();
        let exact = ot::exact_ot(&c, &a, &b).unwrap();
        let violation = plan.src_marginal_error.max(plan.tgt_marginal_error);
        worst_violation = worst_violation.max(violation);
        all_converged &= plan.converged;
        let gap = ot::transport_cost(&c, &plan.matrix).unwrap() - ot::transport_cost(&c, &exact.matrix).unwrap();
        worst_gap = worst_gap.min(gap);
    }
    let mut checks = Checks::default();
    checks.expect(all_converged, "all 100 solves terminated by tolerance".into());
    checks.expect(worst_violation <= 1e-9, format!("max L1 marginal violation {worst_violation:.2e} <= 1e-9"));
    checks.expect(worst_gap >= -1e-9, format!("min (sinkhorn - exact) cost {worst_gap:.3e} >= -1e-9"));
    checks
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..n {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

fn row_order_sum(c: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum()
}

fn oracle_equivalence() -> Checks {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut worst_cost_gap = 0.0f64;
    let mut instances = 0;
    for n in [4usize, 5] {
        let perms = permutations(n);
        let uniform = vec![1.0 / n as f64; n];
        for _ in 0..50 {
            let c = CostMatrix::new(DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..4.0))).unwrap();
            let brute = perms.iter().map(|p| row_order_sum(c.matrix(), p)).fold(f64::INFINITY, f64::min);
            let plan = ot::exact_ot(&c, &uniform, &uniform).unwrap().matrix;
            // The optimum of a uniform square instance is a scaled permutation.
            let perm: Vec<usize> = (0..n).map(|i| plan.row(i).transpose().iamax()).collect();
            if row_order_sum(c.matrix(), &perm) != brute {
                mismatches += 1;
            }
            let cost = ot::transport_cost(&c, &plan).unwrap();
            worst_cost_gap = worst_cost_gap.max((cost - brute / n as f64).abs());
            instances += 1;
        }
    }
    let mut checks = Checks::default();
    checks.expect(mismatches == 0, format!("optimal permutation cost equal bit-for-bit on {instances} instances ({mismatches} mismatches)"));
    checks.expect(worst_cost_gap <= 1e-15, format!("plan cost vs brute/n max gap {worst_cost_gap:.1e} (rounding only)"));
    checks
}

fn procrustes_recovery() -> Checks {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = synthetic::gaussian(100, 20, &mut rng);
        let r = synthetic::random_orthogonal(20, &mut rng);
        let w = procrustes_closed_form(&x, &(&x * &r), None).unwrap();
        worst = worst.max((w.matrix() - &r).norm());
    }
    let mut checks = Checks::default();
    checks.expect(worst <= 1e-9, format!("max ||W - R||_F {worst:.2e} <= 1e-9 over 100 seeds"));
    checks
}

fn quantization_equivariance() -> Checks {
    let mut worst_center = 0.0f64;
    let mut worst_weight = 0.0f64;
    for pair in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + pair);
        let n = rng.random_range(200..600);
        let d = rng.random_range(2..12);
        let x = synthetic::gaussian_mixture(n, d, 4, 2.0, &mut rng);
        let r = synthetic::random_orthogonal(d, &mut rng);
        let cfg = QuantizeConfig {
            seed: pair,
            ..QuantizeConfig::new(rng.random_range(5..40))
        };
        let plain = quantize(&x, &cfg, &mut cfg.rng()).unwrap();
        let rotated = quantize(&(&x * &r), &cfg, &mut cfg.rng()).unwrap();
        worst_center = worst_center.max((&plain.centers * &r - &rotated.centers).abs().max());
        let wgap = plain.weights.iter().zip(&rotated.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_weight = worst_weight.max(wgap);
    }
    let mut checks = Checks::default();
    checks.expect(worst_center <= 1e-9, format!("max center deviation {worst_center:.2e} <= 1e-9"));
    checks.expect(worst_weight <= 1e-9, format!("max weight deviation {worst_weight:.2e} <= 1e-9"));
    checks
}

fn estimator_quality() -> Checks {
    let report = bench_quantize(&BenchConfig::new(2000, 3, 32, 50)).unwrap();
    let mut checks = Checks::default();
    checks.expect(report.win_rate() >= 0.70, format!("quantized wins {:.0}% of 50 trials (>= 70%)", 100.0 * report.win_rate()));
    checks.expect(
        report.mean_quantized_error() < report.mean_random_error(),
        format!("mean error {:.4} (quantized) < {:.4} (random)", report.mean_quantized_error(), report.mean_random_error()),
    );
    checks
}

/// Invariants gathered while the end-to-end criteria run.
#[derive(Debug, Default)]
struct Invariants {
    max_orthogonality_error: f64,
    max_idempotence_error: f64,
    max_weight_sum_error: f64,
    mrr_below_p1: usize,
    evaluations: usize,
}

impl Invariants {
    fn score(&mut self, h: &Harness, map: &qwp_core::OrthogonalMap) -> EvalReport {
        self.max_orthogonality_error = self.max_orthogonality_error.max(map.orthogonality_error());
        let r = evaluate(&h.src, &h.tgt, map, &h.gold, Retrieval::Nn, DEFAULT_RANK_CAP).unwrap();
        self.evaluations += 1;
        if r.map_mrr < r.p_at_1 {
            self.mrr_below_p1 += 1;
        }
        r
    }

    fn observe_alignment(&mut self, a: &Alignment) {
        self.max_orthogonality_error = self.max_orthogonality_error.max(a.report.max_orthogonality_error);
        self.max_weight_sum_error = self.max_weight_sum_error.max(a.report.max_weight_sum_error);
    }

    fn observe_spaces(&mut self, h: &Harness) {
        for space in [&h.src, &h.tgt] {
            let again = preprocess::normalize(space).unwrap();
            let gap = (again.vectors() - space.vectors()).abs().max();
            self.max_idempotence_error = self.max_idempotence_error.max(gap);
        }
    }
}

const HARNESS_N: usize = 3000;
const HARNESS_D: usize = 50;
const HARNESS_NOISE: f64 = 0.01;
/// Convex-initialization head used at desk scale; the CLI default is 2500.
const DESK_INIT_VOCAB: usize = 200;

fn harness_for(seed: u64) -> Harness {
    let cfg = HarnessConfig::new(HARNESS_N, HARNESS_D, HARNESS_NOISE);
    harness(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn desk_align_config(k: usize, sampling: SamplingMode, seed: u64) -> AlignConfig {
    AlignConfig {
        epochs: 5,
        iters_per_epoch: 50,
        k,
        train_vocab: HARNESS_N,
        init_vocab: DESK_INIT_VOCAB,
        sampling,
        seed,
        ..AlignConfig::default()
    }
}

fn end_to_end_recovery(inv: &mut Invariants) -> Checks {
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut worst_drop = f64::NEG_INFINITY;
    for seed in 0..10 {
        let h = harness_for(seed);
        inv.observe_spaces(&h);
        let a = align(&h.src, &h.tgt, &desk_align_config(300, SamplingMode::KMeansPP, seed)).unwrap();
        inv.observe_alignment(&a);
        let r = refine(h.src.vectors(), h.tgt.vectors(), &a.map, &RefineConfig::default()).unwrap();
        let p_align = inv.score(&h, &a.map).p_at_1;
        let p_refine = inv.score(&h, &r.map).p_at_1;
        worst_drop = worst_drop.max(p_align - p_refine);
        before.push(p_align);
        after.push(p_refine);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let fmt = |v: &[f64]| v.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(",");
    let mut checks = Checks::default();
    checks.expect(mean(&after) >= 0.95, format!("mean P@1 with refine {:.4} >= 0.95", mean(&after)));
    checks.expect(mean(&before) >= 0.90, format!("mean P@1 without refine {:.4} >= 0.90", mean(&before)));
    checks.expect(worst_drop <= 0.005, format!("largest per-seed drop from refine {:.4} <= 0.005", worst_drop.max(0.0)));
    checks.note(format!("per seed align [{}] refine [{}]", fmt(&before), fmt(&after)));
    checks
}

fn coreset_trend(inv: &mut Invariants) -> Checks {
    let ks = [50usize, 100, 200];
    let seeds = 0..5u64;
    let harnesses: Vec<Harness> = seeds.clone().map(harness_for).collect();
    let mut means = Vec::new();
    for mode in [SamplingMode::KMeansPP, SamplingMode::Random] {
        let mut row = Vec::new();
        for &k in &ks {
            let mut total = 0.0;
            for (seed, h) in seeds.clone().zip(&harnesses) {
                let a = align(&h.src, &h.tgt, &desk_align_config(k, mode, seed)).unwrap();
                inv.observe_alignment(&a);
                total += inv.score(h, &a.map).p_at_1;
            }
            row.push(total / harnesses.len() as f64);
        }
        means.push((mode, row));
    }
    let mut checks = Checks::default();
    let (kpp, random) = (&means[0].1, &means[1].1);
    for (i, k) in ks.iter().enumerate() {
        checks.expect(kpp[i] >= random[i], format!("k={k}: kmeanspp {:.3} >= random {:.3}", kpp[i], random[i]));
    }
    for (mode, row) in &means {
        let increasing = row.windows(2).all(|w| w[1] > w[0]);
        let shown = row.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(" < ");
        checks.expect(increasing, format!("{mode} increases with k: {shown}"));
    }
    checks
}

fn numerical_invariants(inv: &Invariants) -> Checks {
    let mut checks = Checks::default();
    checks.expect(
        inv.max_orthogonality_error <= 1e-6,
        format!("max ||W^T W - I||_F {:.2e} <= 1e-6", inv.max_orthogonality_error),
    );
    checks.expect(inv.max_idempotence_error <= 1e-9, format!("normalize idempotence {:.2e} <= 1e-9", inv.max_idempotence_error));
    checks.expect(inv.max_weight_sum_error <= 1e-12, format!("anchor weight sum error {:.2e} <= 1e-12", inv.max_weight_sum_error));
    checks.expect(inv.mrr_below_p1 == 0, format!("MRR >= P@1 on all {} evaluations", inv.evaluations));
    checks
}

const LANGUAGES: [&str; 5] = ["es", "fr", "de", "ru", "it"];

/// Expects `wiki.<lang>.vec` for en and the five languages, and the test
/// dictionaries `<src>-<tgt>.5000-6500.txt` in both directions.
fn full_scale(dir: &Path) -> Checks {
    let load = |lang: &str| -> EmbeddingMatrix {
        let raw = embedding_io::load_embeddings(dir.join(format!("wiki.{lang}.vec")), 200_000).unwrap();
        preprocess::normalize(&raw).unwrap()
    };
    let dict = |s: &str, t: &str| -> PathBuf { dir.join(format!("{s}-{t}.5000-6500.txt")) };
    let en = load("en");
    let mut p_at_1 = Vec::new();
    let mut checks = Checks::default();
    for lang in LANGUAGES {
        let other = load(lang);
        for (src, tgt, s, t) in [(&en, &other, "en", lang), (&other, &en, lang, "en")] {
            let a = align(src, tgt, &AlignConfig::default()).unwrap();
            let r = refine(src.vectors(), tgt.vectors(), &a.map, &RefineConfig::default()).unwrap();
            let lexicon = embedding_io::read_lexicon_file(dict(s, t)).unwrap();
            let refined = evaluate(src, tgt, &r.map, &lexicon, Retrieval::Csls, DEFAULT_RANK_CAP).unwrap();
            println!("  {s}->{t}: P@1 {:.2}", 100.0 * refined.p_at_1);
            if (s, t) == ("en", "es") {
                let p = 100.0 * refined.p_at_1;
                checks.expect((p - 83.5).abs() <= 1.5, format!("EN-ES P@1 {p:.2} in 83.5 +/- 1.5"));
                let raw = evaluate(src, tgt, &a.map, &lexicon, Retrieval::Csls, DEFAULT_RANK_CAP).unwrap();
                let map = 100.0 * raw.map_mrr;
                checks.expect((map - 49.7).abs() <= 1.5, format!("EN-ES MAP without refine {map:.2} in 49.7 +/- 1.5"));
            }
            p_at_1.push(100.0 * refined.p_at_1);
        }
    }
    let avg = p_at_1.iter().sum::<f64>() / p_at_1.len() as f64;
    checks.expect(avg >= 74.0, format!("ten-direction average P@1 {avg:.2} >= 74"));
    checks
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger::default();
    let secs = Duration::from_secs;

    let t = Instant::now();
    let c = sinkhorn_correctness();
    ledger.record("1", "Sinkhorn correctness", t, Some(secs(5)), c);

    let t = Instant::now();
    let c = oracle_equivalence();
    ledger.record("2", "exact OT equals permutation enumeration", t, Some(secs(1)), c);

    let t = Instant::now();
    let c = procrustes_recovery();
    ledger.record("3", "Procrustes recovery", t, Some(secs(1)), c);

    let t = Instant::now();
    let c = quantization_equivariance();
    ledger.record("4", "quantization rotation equivariance", t, Some(secs(5)), c);

    let t = Instant::now();
    let c = estimator_quality();
    ledger.record("5", "quantized vs subsampled OT estimate", t, Some(secs(120)), c);

    let mut inv = Invariants::default();
    let t = Instant::now();
    let c = end_to_end_recovery(&mut inv);
    ledger.record("6", "end-to-end synthetic recovery", t, Some(secs(300)), c);

    let t = Instant::now();
    let c = coreset_trend(&mut inv);
    ledger.record("7", "k-means++ vs random coreset trend", t, Some(secs(600)), c);

    let t = Instant::now();
    ledger.record("8", "numerical invariants across criteria 6-7", t, None, numerical_invariants(&inv));

    match std::env::var_os("QWP_FULLSCALE_DIR") {
        Some(dir) => {
            let t = Instant::now();
            let c = full_scale(Path::new(&dir));
            ledger.record("9", "full-scale bilingual lexicon induction", t, None, c);
        }
        None => ledger.skip("9", "full-scale bilingual lexicon induction", "set QWP_FULLSCALE_DIR to run; multi-hour"),
    }

    let failed: Vec<&str> = ledger.outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
