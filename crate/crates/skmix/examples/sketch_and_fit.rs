//! The whole pipeline end to end: raw rows -> sketch file -> mixture fit ->
//! saved model -> predictions from the reloaded model.
//!
//! Every stage round-trips through the on-disk formats (`.skmx` sketches, model
//! JSON), so this is also the integration pattern for a service that sketches
//! data in one process and fits or scores in another.
//!
//! Run with `cargo run --release --example sketch_and_fit`.

use skmix::eval::{cluster_accuracy, make_synthetic, SynthSpec};
use skmix::gmm::e_step;
use skmix::model::{Basis, ModelFile};
use skmix::sketch::file::{read_sketch_file, write_sketch_file};
use skmix::sketch::sketch_matrix;
use skmix::{fit_restarts, CovarianceKind, FitConfig, SketchSpec};

fn main() -> skmix::Result<()> {
    let dir = std::env::temp_dir().join("skmix_sketch_and_fit");
    std::fs::create_dir_all(&dir)?;

    // 850 points in 100 dimensions, five clusters of two very different scales.
    let data = make_synthetic(&SynthSpec::default())?;
    let k = data.spec.k_total();
    println!("data: n={} p={} k={}", data.rows.len(), data.spec.p, k);

    // Keep 20 random coordinates per row (after preconditioning, so every
    // coordinate carries a slice of the full signal) and persist the sketch.
    let spec = SketchSpec { p: data.spec.p, q: 20, q_shared: 0, seed: 42 };
    let mut ds = sketch_matrix(&data.rows, &spec)?;
    ds.labels = Some(data.labels.clone());
    let sketch_path = dir.join("synth.skmx");
    write_sketch_file(&sketch_path, &ds)?;
    let on_disk = std::fs::metadata(&sketch_path)?.len();
    println!(
        "sketch: q={} of p={} per row, {} bytes on disk ({:.0}% of dense f64)",
        spec.q,
        spec.p,
        on_disk,
        100.0 * on_disk as f64 / (data.rows.len() * data.spec.p * 8) as f64
    );

    // Fit from the file alone -- the raw matrix is no longer needed.
    let ds = read_sketch_file(&sketch_path)?;
    let cfg = FitConfig::new(k, CovarianceKind::Spherical, 7);
    let report = fit_restarts(&ds, &cfg, 3)?;
    println!(
        "fit: loglik {:.2} after {} iterations (converged: {})",
        report.final_loglik(),
        report.iterations,
        report.converged
    );

    let truth = ds.labels.clone().expect("sketch was written with labels");
    let acc = cluster_accuracy(&report.responsibilities.hard_labels(), &truth)?;
    println!("accuracy against generating labels: {:.3}", acc.accuracy);

    // Persist the model, reload it, and score the sketch with the reloaded copy.
    let model_path = dir.join("model.json");
    ModelFile::from_fit(&report, &ds, &cfg, Basis::Preconditioned)?.save(&model_path)?;
    let model = ModelFile::load(&model_path)?;
    model.check_compatible(&ds)?;
    let (resp, _) = e_step(&ds, &model.preconditioned_params()?)?;
    let same =
        resp.hard_labels().iter().zip(&report.responsibilities.hard_labels()).all(|(a, b)| a == b);
    println!("reloaded model reproduces the fit's assignments: {same}");
    println!("artifacts in {}", dir.display());
    Ok(())
}
