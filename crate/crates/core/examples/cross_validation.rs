//! Chooses lambda by 5-fold cross-validation and prints the score table.

use trace_completion::pipeline::{cross_validate, parse_grid, synth_generate, CvConfig, SynthConfig};
use trace_completion::{Formulation, TrainConfig};

fn main() -> trace_completion::Result<()> {
    let mut sc = SynthConfig::new(vec![10, 10, 10], vec![2, 2, 2], 0.5, 3);
    sc.noise_sigma = 0.1;
    let data = synth_generate(&sc)?;
    let cfg = TrainConfig::new(Formulation::Dual, vec![2, 2, 2]);
    let cv = CvConfig {
        grid: parse_grid("1e-2:1e2:0.5")?,
        ..CvConfig::default()
    };
    let result = cross_validate(&data.train, &cfg, &cv)?;
    result.table.write_csv(std::io::stdout().lock())?;
    println!("best lambda {:e}", result.best_lambda);
    Ok(())
}
