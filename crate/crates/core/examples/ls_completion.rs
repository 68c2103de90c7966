//! The least-squares formulation on the same kind of problem, fitting the
//! factors and the sparse core jointly.

use trace_completion::metrics::rmse;
use trace_completion::pipeline::{evaluate, synth_generate, SynthConfig};
use trace_completion::{train, Formulation, Task, TrainConfig};

fn main() -> trace_completion::Result<()> {
    let data = synth_generate(&SynthConfig::new(vec![12, 12, 12], vec![2, 2, 2], 0.6, 1))?;
    let mut cfg = TrainConfig::new(Formulation::LeastSquares, vec![2, 2, 2]);
    cfg.tr.max_outer_iters = 100;
    let out = train(&data.train, 0.1, &cfg)?;

    let zero = rmse(&vec![0.0; data.test.nnz()], data.test.values())?;
    let test = evaluate(&out.model, &data.test, Task::Rmse)?;
    println!(
        "{} iterations, {} accepted, final cost {:.3e}",
        out.trace.iterations.len() - 1,
        out.trace.num_accepted(),
        out.cost
    );
    println!("test rmse {test:.4} (zero predictor {zero:.4})");
    println!("component shares {:?}", out.model.relative_sparsity()?);
    Ok(())
}
