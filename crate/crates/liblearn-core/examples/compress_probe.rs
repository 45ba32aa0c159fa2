//! Scratch probe: compression behavior on the bundled stringrw train corpus.

use liblearn_core::compress::{compress, CompressionConfig};
use liblearn_core::domains::load_domain;
use liblearn_core::expr;

fn main() {
    let spec = load_domain("stringrw").unwrap();
    let programs: Vec<_> = spec
        .train
        .iter()
        .map(|t| spec.ground_truth[&t.id].clone())
        .collect();
    let before: usize = programs.iter().map(|p| p.size()).sum();
    let start = std::time::Instant::now();
    let out = compress(&programs, &CompressionConfig::default());
    let elapsed = start.elapsed();
    let after: usize = out.rewritten.iter().map(|p| p.size()).sum();
    println!(
        "programs={} before={} after={} ratio={:.3} elapsed={:.2?}",
        programs.len(),
        before,
        after,
        out.ratio,
        elapsed
    );
    for (i, (cand, body)) in out.accepted.iter().zip(&out.bodies).enumerate() {
        println!(
            "fn_{i}: utility={} sites={} arity={} body={}",
            cand.utility,
            cand.sites,
            cand.pattern.arity,
            expr::print(body).unwrap()
        );
    }
}
