//! Completes a planted low-rank tensor with the dual formulation at a fixed lambda.

use trace_completion::metrics::rmse;
use trace_completion::pipeline::{evaluate, synth_generate, SynthConfig};
use trace_completion::{train, Formulation, Task, TrainConfig};

fn main() -> trace_completion::Result<()> {
    let data = synth_generate(&SynthConfig::new(vec![12, 12, 12], vec![2, 2, 2], 0.6, 1))?;
    let cfg = TrainConfig::new(Formulation::Dual, vec![2, 2, 2]);
    let out = train(&data.train, 10.0, &cfg)?;

    for it in out.trace.iterations.iter().step_by(10) {
        println!("iter {:>3}  cost {:>12.5e}  gradnorm {:.2e}", it.iter, it.cost, it.grad_norm);
    }
    let zero = rmse(&vec![0.0; data.test.nnz()], data.test.values())?;
    let test = evaluate(&out.model, &data.test, Task::Rmse)?;
    println!("stop {:?}, test rmse {test:.4} (zero predictor {zero:.4})", out.stop);
    Ok(())
}
