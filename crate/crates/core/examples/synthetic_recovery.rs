use std::time::Instant;

use trace_completion::metrics::rmse;
use trace_completion::pipeline::{cross_validate, evaluate, synth_generate, CvConfig, SynthConfig};
use trace_completion::{Formulation, Task, TrainConfig};

fn main() -> trace_completion::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let formulation: Formulation = args.get(1).map_or("dual", String::as_str).parse()?;
    let mut sc = SynthConfig::new(vec![15, 15, 15], vec![2, 2, 2], 0.5, 7);
    sc.test_fraction = 0.4;
    let data = synth_generate(&sc)?;
    let zero = rmse(&vec![0.0; data.test.nnz()], data.test.values())?;
    println!("train {} test {} zero-predictor rmse {zero:.4}", data.train.nnz(), data.test.nnz());

    let mut cfg = TrainConfig::new(formulation, vec![2, 2, 2]);
    cfg.tr.max_outer_iters = 200;
    let start = Instant::now();
    let cv = cross_validate(&data.train, &cfg, &CvConfig::default())?;
    for (i, lam) in cv.table.lambdas.iter().enumerate() {
        println!("lambda {lam:>8.0e}  cv rmse {:.4}", cv.table.mean(i));
    }
    let out = trace_completion::train(&data.train, cv.best_lambda, &cfg)?;
    let test = evaluate(&out.model, &data.test, Task::Rmse)?;
    println!(
        "{formulation}: lambda {:.0e} test rmse {test:.3e} ({:.1}x below zero) iters {} stop {:?} in {:.1}s",
        cv.best_lambda,
        zero / test,
        out.trace.iterations.len() - 1,
        out.stop,
        start.elapsed().as_secs_f64()
    );
    println!("relative sparsity {:?}", out.model.relative_sparsity()?);
    Ok(())
}
