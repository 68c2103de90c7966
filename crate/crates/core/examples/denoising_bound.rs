//! Fully observed denoising against the reconstruction error bound
//! `||W_hat - W*||_F <= (2 / lambda) sqrt(min_k n_k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use trace_completion::pipeline::{reconstruction_bound_check, synth_generate, SynthConfig};
use trace_completion::tensor::DenseTensor;
use trace_completion::{Formulation, TrainConfig};

fn main() -> trace_completion::Result<()> {
    let truth = synth_generate(&SynthConfig::new(vec![5, 5, 5], vec![2, 2, 2], 0.5, 0))?.truth;
    let w_star = truth.to_dense();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = TrainConfig::new(Formulation::Dual, vec![5, 5, 5]);

    for sigma in [0.01, 0.05, 0.2] {
        let noise = DenseTensor::from_fn(w_star.dims().clone(), |_| sigma * rng.sample::<f64, _>(StandardNormal));
        // largest lambda the noise assumption allows
        let probe = reconstruction_bound_check(&w_star, &noise, 1.0, &cfg)?;
        let report = reconstruction_bound_check(&w_star, &noise, probe.lambda_max, &cfg)?;
        println!(
            "sigma {sigma:<5} lambda {:.3}  error {:.4}  bound {:.4}  holds {}",
            report.lambda, report.raw.discrepancy, report.bound, report.raw.holds
        );
    }
    Ok(())
}
