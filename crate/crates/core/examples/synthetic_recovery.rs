//! Plants a rotation between two synthetic spaces, aligns them without
//! supervision and reports precision before and after refinement.
//!
//! `cargo run --release --example synthetic_recovery -- [seed] [k]`

use std::time::Instant;

use qwp_core::align::{align, AlignConfig};
use qwp_core::eval::{evaluate, Retrieval};
use qwp_core::refine::{refine, RefineConfig};
use qwp_core::synthetic::{harness, HarnessConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let k: usize = args.get(1).map_or(300, |s| s.parse().expect("k must be an integer"));

    let h = harness(&HarnessConfig::new(3000, 50, 0.01), &mut ChaCha8Rng::seed_from_u64(seed)).expect("harness");
    let cfg = AlignConfig {
        iters_per_epoch: 50,
        k,
        train_vocab: 3000,
        init_vocab: 200,
        seed,
        ..AlignConfig::default()
    };
    let t = Instant::now();
    let a = align(&h.src, &h.tgt, &cfg).expect("align");
    let aligned = evaluate(&h.src, &h.tgt, &a.map, &h.gold, Retrieval::Nn, 10).expect("evaluate");
    let r = refine(h.src.vectors(), h.tgt.vectors(), &a.map, &RefineConfig::default()).expect("refine");
    let refined = evaluate(&h.src, &h.tgt, &r.map, &h.gold, Retrieval::Nn, 10).expect("evaluate");

    let dist = |m: &nalgebra::DMatrix<f64>| (m - &h.rotation).norm();
    println!("||W - R||_F  init {:.3}  align {:.3}  refine {:.3}", dist(a.init_map.matrix()), dist(a.map.matrix()), dist(r.map.matrix()));
    println!("P@1          align {:.4}  refine {:.4}", aligned.p_at_1, refined.p_at_1);
    println!("elapsed      {:.1}s", t.elapsed().as_secs_f64());
}
