//! Learns filters on one half of a Lena crop, then encodes the other half
//! with them frozen and reports the reconstruction quality.
//!
//! cargo run --release --example encode_reconstruct

use ccsc::csc::{encode, reconstruct, train, TrainConfig};
use ccsc::experiment::preprocess_zero_mean;
use ccsc::io::load_image;
use ccsc::metrics::{evaluate, NEAR_ZERO_TOLERANCE};
use ccsc::tensor::{Grid2, Shape};

fn main() -> ccsc::Result<()> {
    let lena = load_image(concat!(env!("CARGO_MANIFEST_DIR"), "/data/lena.png"))?.grid;
    let crop = lena.center_crop(Shape::new(64, 128))?;
    let half = |offset: usize| Grid2::from_fn(Shape::new(64, 64), |i, j| crop.get(i, j + offset));
    let (left, _) = preprocess_zero_mean(&half(0));
    let (right, _) = preprocess_zero_mean(&half(64));

    let config = TrainConfig::builder()
        .filters(8)
        .filter_shape(5, 5)
        .max_outer_iterations(20)
        .build()?;
    let report = train(std::slice::from_ref(&left), &config)?;
    println!(
        "trained on the left half, gamma {:.3}",
        report.gamma_used.unwrap_or(f64::NAN)
    );

    let maps = encode(&right, &report.final_filters, &config)?;
    let recon = reconstruct(&report.final_filters, &maps)?;
    let eval = evaluate(&right, &recon, 255.0, &maps, NEAR_ZERO_TOLERANCE, 21)?;
    println!(
        "right half: PSNR {:.2} dB, nonzero {:.4}, near zero {:.4}",
        eval.psnr, eval.sparsity.nonzero_fraction, eval.sparsity.near_zero_fraction
    );
    Ok(())
}
