//! Training, evaluation and experiment drivers built on the two formulations.

mod bench;
mod bound;
mod cv;
mod synth;

pub use bench::{bench, fit_exponent, BenchConfig, BenchPoint, BenchReport};
pub use bound::{reconstruction_bound_check, spectral_norm, BoundReport, LambdaMapping, MappingResult};
pub use cv::{cross_validate, default_grid, fold_assignment, parse_grid, CvConfig, CvResult, CvTable};
pub use synth::{synth_generate, PlantedTensor, SynthConfig, SynthData};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::dual::DualCost;
use crate::error::{Error, Result};
use crate::least_squares::LsCost;
use crate::metrics;
use crate::model::{mode_scaled_lambdas, CompletionModel, Formulation};
use crate::product::{random_factors, ProductPoint};
use crate::tensor::SparseTensor;
use crate::trust_region::{self, TrConfig, TrStop, TrTrace};

/// Everything except the data and the regularization weight.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub formulation: Formulation,
    pub ranks: Vec<usize>,
    pub tr: TrConfig,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Seeds the initial factors.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(formulation: Formulation, ranks: Vec<usize>) -> Self {
        TrainConfig {
            formulation,
            ranks,
            tr: TrConfig::default(),
            inner_tol: 1e-10,
            inner_max_iters: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tr.validate()?;
        if !(self.inner_tol > 0.0) {
            return Err(Error::Config(format!("inner_tol must be > 0, got {}", self.inner_tol)));
        }
        if self.inner_max_iters == 0 {
            return Err(Error::Config("inner_max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: CompletionModel,
    pub trace: TrTrace,
    pub stop: TrStop,
    pub cost: f64,
    pub grad_norm: f64,
}

/// Trains with the per-mode weights `lambda_k = lambda * n_k`.
pub fn train(y: &SparseTensor, lambda: f64, cfg: &TrainConfig) -> Result<TrainOutput> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be finite and > 0, got {lambda}")));
    }
    train_with_lambdas(y, lambda, mode_scaled_lambdas(lambda, y.dims()), cfg)
}

/// Trains with explicit per-mode weights; `lambda` is only recorded in the model.
pub fn train_with_lambdas(
    y: &SparseTensor,
    lambda: f64,
    lambdas: Vec<f64>,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if y.nnz() == 0 {
        return Err(Error::Config("training tensor has no observed entries".into()));
    }
    match cfg.formulation {
        Formulation::Dual => {
            let mut cost = DualCost::new(y.clone(), lambdas, cfg.ranks.clone())?
                .with_inner(cfg.inner_tol, cfg.inner_max_iters);
            let manifold = cost.manifold()?;
            let x0 = ProductPoint {
                factors: random_factors(&cost.shapes(), cfg.seed),
                z: None,
            };
            let out = trust_region::solve(&manifold, &mut cost, x0, &cfg.tr)?;
            let model = cost.recover_model(&out.point.factor_matrices(), lambda)?;
            Ok(TrainOutput {
                model,
                trace: out.trace,
                stop: out.stop,
                cost: out.cost,
                grad_norm: out.grad_norm,
            })
        }
        Formulation::LeastSquares => {
            let mut cost = LsCost::new(y.clone(), lambdas, cfg.ranks.clone())?;
            let manifold = cost.manifold()?;
            let x0 = cost.initial_point(cfg.seed);
            let out = trust_region::solve(&manifold, &mut cost, x0, &cfg.tr)?;
            let z = out.point.z.as_ref().expect("least-squares point carries Z");
            let model = cost.recover_model(&out.point.factor_matrices(), z, lambda)?;
            Ok(TrainOutput {
                model,
                trace: out.trace,
                stop: out.stop,
                cost: out.cost,
                grad_norm: out.grad_norm,
            })
        }
    }
}

/// Held-out metric used for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Rmse,
    /// Entries are 0/1 link indicators; scores are ranked by AUC.
    Auc,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Rmse => "rmse",
            Task::Auc => "auc",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(Task::Rmse),
            "auc" => Ok(Task::Auc),
            other => Err(Error::Config(format!("unknown task '{other}' (expected rmse or auc)"))),
        }
    }
}

/// Scores `model` on the entries of `test`.
pub fn evaluate(model: &CompletionModel, test: &SparseTensor, task: Task) -> Result<f64> {
    let pred = model.predict(test.support())?;
    match task {
        Task::Rmse => metrics::rmse(pred.values(), test.values()),
        Task::Auc => metrics::auc(pred.values(), &metrics::binarize(test.values(), 0.5)),
    }
}

/// A metric over several splits with its mean and sample standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl EvalReport {
    pub fn from_values(metric: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::UndefinedMetric("report over zero splits".into()));
        }
        let (mean, std) = mean_std(&values);
        Ok(EvalReport {
            metric: metric.into(),
            values,
            mean,
            std,
        })
    }

    /// `metric,split,value` rows, then `mean` and `std` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,split,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{v}", self.metric, i + 1)?;
        }
        writeln!(w, "{},mean,{}", self.metric, self.mean)?;
        writeln!(w, "{},std,{}", self.metric, self.std)?;
        Ok(())
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Dims, Support};

    #[test]
    fn report_statistics() {
        let r = EvalReport::from_values("rmse", vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.mean, 2.0);
        assert_eq!(r.std, 1.0);
        let single = EvalReport::from_values("auc", vec![0.7]).unwrap();
        assert_eq!(single.std, 0.0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("metric,split,value\nrmse,1,1\n"));
        assert!(text.ends_with("rmse,std,1\n"));
    }

    #[test]
    fn train_rejects_bad_inputs() {
        let dims = Dims::new(vec![3, 3]).unwrap();
        let y = SparseTensor::from_entries(dims.clone(), vec![(vec![0, 0], 1.0)]).unwrap();
        let cfg = TrainConfig::new(Formulation::Dual, vec![1, 1]);
        assert!(matches!(train(&y, 0.0, &cfg), Err(Error::Config(_))));
        assert!(matches!(train(&y, 1.0, &TrainConfig::new(Formulation::Dual, vec![4, 1])), Err(Error::Config(_))));
        let empty = SparseTensor::zeros(Support::empty(dims));
        assert!(matches!(train(&empty, 1.0, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn tiny_training_runs_for_both_formulations() {
        let dims = Dims::new(vec![4, 3, 2]).unwrap();
        let entries = Support::full(dims.clone())
            .iter()
            .enumerate()
            .filter(|(e, _)| e % 2 == 0)
            .map(|(e, idx)| (idx.to_vec(), (e as f64 * 0.37).sin()))
            .collect();
        let y = SparseTensor::from_entries(dims, entries).unwrap();
        for f in [Formulation::Dual, Formulation::LeastSquares] {
            let mut cfg = TrainConfig::new(f, vec![2, 2, 1]);
            cfg.tr.max_outer_iters = 5;
            let out = train(&y, 0.1, &cfg).unwrap();
            out.model.validate().unwrap();
            let costs = out.trace.accepted_costs();
            assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{f}: {costs:?}");
        }
    }
}
