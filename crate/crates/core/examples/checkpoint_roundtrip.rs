//! Trains briefly, saves a checkpoint, reloads it and checks that every
//! coefficient survived bit for bit.
//!
//! cargo run --release --example checkpoint_roundtrip [dir]

use ccsc::csc::{train, TrainConfig};
use ccsc::io::{load_checkpoint, save_checkpoint, Checkpoint};
use ccsc::tensor::{Grid2, Shape};

fn main() -> ccsc::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "checkpoint_demo".into());
    let y = Grid2::from_fn(Shape::new(20, 20), |i, j| {
        ((i as f64) * 0.7).sin() * 40.0 + ((j as f64) * 1.3).cos() * 25.0
    });

    let config = TrainConfig::builder()
        .filters(4)
        .filter_shape(3, 3)
        .max_outer_iterations(10)
        .seed(3)
        .build()?;
    let report = train(std::slice::from_ref(&y), &config)?;
    let ckpt = Checkpoint::new(
        config,
        report.gamma_used,
        report.final_filters.clone(),
        vec![("waves".to_string(), report.final_maps[0].clone())],
    );
    save_checkpoint(&ckpt, &dir)?;

    let back = load_checkpoint(&dir)?;
    let bits = |c: &Checkpoint| -> Vec<u64> {
        c.filters
            .coefficients()
            .chain(c.maps.iter().flat_map(|(_, m)| m.coefficients()))
            .map(f64::to_bits)
            .collect()
    };
    let same = bits(&ckpt) == bits(&back) && back.config == ckpt.config;
    println!(
        "saved {} coefficients to {dir}/, format version {}, identical after reload: {same}",
        bits(&ckpt).len(),
        back.format_version
    );
    Ok(())
}
