//! Tabulates the Cauchy, soft and hard thresholding operators side by side
//! as CSV on stdout, for a few scales.
//!
//! cargo run --example prox_curves > curves.csv

use ccsc::penalty::{prox_curve, PenaltyKind};

fn main() -> ccsc::Result<()> {
    let lambda = 0.5;
    let mut columns = vec![
        ("ist".to_string(), PenaltyKind::soft(lambda)?),
        ("iht".to_string(), PenaltyKind::hard(lambda)?),
    ];
    for gamma in [0.25, 0.5, 1.0, 2.0] {
        columns.push((format!("ict_gamma_{gamma}"), PenaltyKind::cauchy(gamma, lambda)?));
    }
    let curves = columns
        .iter()
        .map(|(_, k)| prox_curve(k, -3.0, 3.0, 121))
        .collect::<ccsc::Result<Vec<_>>>()?;

    let names: Vec<&str> = columns.iter().map(|(n, _)| n.as_str()).collect();
    println!("x,{}", names.join(","));
    for i in 0..curves[0].len() {
        let row: Vec<String> = curves.iter().map(|c| c[i].1.to_string()).collect();
        println!("{},{}", curves[0][i].0, row.join(","));
    }
    Ok(())
}
