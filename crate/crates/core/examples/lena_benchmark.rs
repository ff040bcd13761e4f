//! Runs the three penalties on a center crop of Lena and prints the summary
//! table. Artifacts land in the output directory.
//!
//! cargo run --release --example lena_benchmark [out_dir] [crop] [runs] [iterations]

use ccsc::csc::{PenaltySpec, TrainConfig};
use ccsc::experiment::ExperimentSummary;
use ccsc::experiment::{run_benchmark, ExperimentSpec, SampleCount, DEFAULT_IHT_LAMBDA, DEFAULT_IST_LAMBDA};
use ccsc::tensor::Shape;

fn main() -> ccsc::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "lena_benchmark".into());
    let crop: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(64);
    let runs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let iterations: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);

    let mut spec = ExperimentSpec::new("lena", concat!(env!("CARGO_MANIFEST_DIR"), "/data/lena.png"), &out);
    spec.crop = Some(Shape::new(crop, crop));
    spec.sample_count = SampleCount::All;
    spec.runs = runs;
    spec.train = TrainConfig::builder()
        .filters(25)
        .filter_shape(5, 5)
        .max_outer_iterations(iterations)
        .build()?;
    let penalties = [
        PenaltySpec::Cauchy {
            lambda: 1.0,
            gamma: None,
        },
        PenaltySpec::Soft {
            lambda: DEFAULT_IST_LAMBDA,
        },
        PenaltySpec::Hard {
            lambda: DEFAULT_IHT_LAMBDA,
        },
    ];
    let summaries = run_benchmark(&spec, &penalties)?;
    print!("{}", ExperimentSummary::summary_header());
    for s in &summaries {
        print!("{}", s.summary_row());
    }
    println!("artifacts in {out}/");
    Ok(())
}
