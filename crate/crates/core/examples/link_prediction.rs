//! Link prediction on a binary tensor scored by AUC.
//!
//! Entries of a planted tensor above its median become links (1), the rest
//! non-links (0); the model ranks held-out pairs by predicted score.

use std::sync::Arc;

use trace_completion::pipeline::{evaluate, synth_generate, SynthConfig};
use trace_completion::{train, Formulation, SparseTensor, Task, TrainConfig};

fn binarize(t: &SparseTensor, cut: f64) -> trace_completion::Result<SparseTensor> {
    let values = t.values().iter().map(|&v| if v > cut { 1.0 } else { 0.0 }).collect();
    SparseTensor::new(Arc::clone(t.support()), values)
}

fn main() -> trace_completion::Result<()> {
    let data = synth_generate(&SynthConfig::new(vec![12, 10, 8], vec![2, 2, 2], 0.5, 5))?;
    let mut sorted = data.train.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[sorted.len() / 2];
    let (train_links, test_links) = (binarize(&data.train, cut)?, binarize(&data.test, cut)?);

    let cfg = TrainConfig::new(Formulation::Dual, vec![2, 2, 2]);
    for lambda in [0.1, 1.0, 10.0] {
        let out = train(&train_links, lambda, &cfg)?;
        println!("lambda {lambda:>5}: test auc {:.4}", evaluate(&out.model, &test_links, Task::Auc)?);
    }
    Ok(())
}
