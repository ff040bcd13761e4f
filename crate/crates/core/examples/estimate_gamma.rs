//! Fits the Cauchy scale to seeded synthetic draws and to the centered pixels
//! of an image.
//!
//! cargo run --release --example estimate_gamma [image]

use ccsc::estimate::{estimate_gamma, DEFAULT_EPSILON};
use ccsc::experiment::preprocess_zero_mean;
use ccsc::io::load_image;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};

fn main() -> ccsc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for gamma in [0.5, 2.0, 10.0] {
        let dist = Cauchy::new(0.0, gamma).expect("positive scale");
        let draws: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let est = estimate_gamma(&draws, DEFAULT_EPSILON)?;
        println!("true gamma {gamma:>5}: estimate {:.4}", est.gamma);
    }

    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/lena.png").to_string());
    let (centered, mean) = preprocess_zero_mean(&load_image(&path)?.grid);
    let est = estimate_gamma(centered.values(), DEFAULT_EPSILON)?;
    println!(
        "{path}: mean {mean:.2}, gamma {:.4} (8 gamma^2 = {:.2}), degenerate {}",
        est.gamma,
        8.0 * est.gamma * est.gamma,
        est.degenerate
    );
    Ok(())
}
