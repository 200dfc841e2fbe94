//! Per-iteration EM cost scales with the sketch size Q, not the ambient
//! dimension P.
//!
//! Times single EM cycles on one dataset (N = 4000 points, P = 512) at several
//! sketch sizes, then fits a line to median seconds versus Q. The linearity shows
//! up as an R-squared near one; the dense reference at Q = P (enabled here) gives
//! the cost the sketches avoid.
//!
//! Run with `cargo run --release --example timing_sweep`.

use skmix::eval::{linear_fit, summarize_timings, timing_benchmark, TimingConfig};
use skmix::CovarianceKind;

fn main() -> skmix::Result<()> {
    let config = TimingConfig {
        n: 4000,
        p: 512,
        k: 5,
        q_list: vec![8, 16, 32, 64, 128],
        covariance: CovarianceKind::Diagonal,
        iters: 5,
        seed: 0,
        include_dense: true,
    };
    println!(
        "n={} p={} k={} ({} timed cycles per point, single-threaded)",
        config.n, config.p, config.k, config.iters
    );
    println!();

    let rows = timing_benchmark(&config)?;
    let summaries = summarize_timings(&rows);
    println!("method      q   median s/iter      iqr");
    for s in &summaries {
        println!("{:<9} {:>4}   {:>12.5}  {:>8.5}", s.method, s.q, s.median_seconds, s.iqr_seconds);
    }

    let sketched: Vec<_> = summaries.iter().filter(|s| s.method == "sgmm").collect();
    let q: Vec<f64> = sketched.iter().map(|s| s.q as f64).collect();
    let t: Vec<f64> = sketched.iter().map(|s| s.median_seconds).collect();
    let (slope, intercept, r2) = linear_fit(&q, &t);
    println!();
    println!("seconds/iter ~= {slope:.2e} * q + {intercept:.2e}   (r^2 = {r2:.4})");
    if let Some(dense) = summaries.iter().find(|s| s.method == "dense") {
        let largest = sketched.last().expect("sweep is non-empty");
        println!(
            "dense at q=p={}: {:.5} s/iter, {:.1}x the largest sketch",
            dense.q,
            dense.median_seconds,
            dense.median_seconds / largest.median_seconds
        );
    }
    Ok(())
}
