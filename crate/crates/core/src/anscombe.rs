//! Anscombe's quartet: four small datasets with near-identical summary
//! statistics and very different shapes.

use crate::stats::DataPair;

/// The quartet as bundled CSV: columns `x1,y1,…,x4,y4`.
pub const ANSCOMBE_CSV: &str = include_str!("../fixtures/anscombe.csv");

pub const LABELS: [&str; 4] = ["A", "B", "C", "D"];

/// Datasets A–D in order.
pub fn quartet() -> [DataPair; 4] {
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 8];
    for line in ANSCOMBE_CSV.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        for (col, cell) in cols.iter_mut().zip(line.split(',')) {
            col.push(cell.trim().parse().expect("bundled fixture is numeric"));
        }
    }
    let mut it = cols.into_iter();
    std::array::from_fn(|_| {
        let x = it.next().expect("eight columns");
        let y = it.next().expect("eight columns");
        DataPair::new(x, y).expect("bundled fixture is valid")
    })
}
