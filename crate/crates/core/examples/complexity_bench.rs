//! Per-iteration cost against the number of observed entries.

use trace_completion::pipeline::{bench, BenchConfig};
use trace_completion::Formulation;

fn main() -> trace_completion::Result<()> {
    for formulation in [Formulation::Dual, Formulation::LeastSquares] {
        let report = bench(&BenchConfig {
            formulation,
            repeats: 5,
            ..BenchConfig::default()
        })?;
        println!("{formulation}:");
        for p in &report.points {
            println!("  nnz {:>6}  {:.3} ms", p.nnz, 1e3 * p.seconds);
        }
        println!("  fitted exponent {:.3}", report.exponent);
    }
    Ok(())
}
