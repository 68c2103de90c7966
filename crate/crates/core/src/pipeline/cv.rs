use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{mean_std, train, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics;
use crate::tensor::SparseTensor;

/// `{1e-3, 1e-2, ..., 1e3}`.
pub fn default_grid() -> Vec<f64> {
    (-3..=3).map(|e| 10f64.powi(e)).collect()
}

/// Parses `lo:hi:step`, where `step` is the spacing in decades, so
/// `1e-3:1e3:1` gives the default grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid '{spec}' is not lo:hi:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(lo > 0.0 && hi >= lo && step > 0.0) || !hi.is_finite() {
        return Err(Error::Config(format!(
            "grid '{spec}' needs 0 < lo <= hi and step > 0"
        )));
    }
    let (a, b) = (lo.log10(), hi.log10());
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 1000 {
        return Err(Error::Config(format!("grid '{spec}' has {count} points")));
    }
    Ok((0..count).map(|i| 10f64.powf(a + i as f64 * step)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvConfig {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            grid: default_grid(),
            folds: 5,
            seed: 0,
        }
    }
}

/// Validation RMSE for every `(lambda, fold)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CvTable {
    pub lambdas: Vec<f64>,
    /// `rmse[i][f]` for grid point `i` and fold `f`.
    pub rmse: Vec<Vec<f64>>,
}

impl CvTable {
    pub fn mean(&self, i: usize) -> f64 {
        mean_std(&self.rmse[i]).0
    }

    pub fn std(&self, i: usize) -> f64 {
        mean_std(&self.rmse[i]).1
    }

    /// Grid index with the smallest mean RMSE; the first (smallest lambda)
    /// wins ties.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.lambdas.len() {
            if self.mean(i) < self.mean(best) {
                best = i;
            }
        }
        best
    }

    /// `lambda,mean_rmse,std_rmse,fold1,...` with one row per grid point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "lambda,mean_rmse,std_rmse")?;
        let folds = self.rmse.first().map_or(0, Vec::len);
        for f in 0..folds {
            write!(w, ",fold{}", f + 1)?;
        }
        writeln!(w)?;
        for (i, lam) in self.lambdas.iter().enumerate() {
            write!(w, "{lam:e},{},{}", self.mean(i), self.std(i))?;
            for v in &self.rmse[i] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    pub table: CvTable,
}

/// Seeded assignment of `nnz` entries to `folds` near-equal folds.
pub fn fold_assignment(nnz: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..nnz).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; nnz];
    for (pos, &e) in order.iter().enumerate() {
        fold[e] = pos % folds;
    }
    fold
}

/// k-fold cross-validation of `lambda` over `cv.grid`, one fresh solve per
/// cell; cells run in parallel and are merged in grid order.
pub fn cross_validate(y: &SparseTensor, cfg: &TrainConfig, cv: &CvConfig) -> Result<CvResult> {
    if cv.grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if cv.folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {}", cv.folds)));
    }
    if y.nnz() < cv.folds {
        return Err(Error::Config(format!(
            "{} observed entries cannot fill {} folds",
            y.nnz(),
            cv.folds
        )));
    }
    let assignment = fold_assignment(y.nnz(), cv.folds, cv.seed);
    let splits: Vec<(SparseTensor, SparseTensor)> = (0..cv.folds)
        .map(|f| {
            let (val, fit): (Vec<usize>, Vec<usize>) =
                (0..y.nnz()).partition(|&e| assignment[e] == f);
            let pick = |entries: &[usize]| {
                let support = y.support().select(entries);
                let values = entries.iter().map(|&e| y.values()[e]).collect();
                SparseTensor::new(support, values)
            };
            Ok((pick(&fit)?, pick(&val)?))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..cv.grid.len())
        .flat_map(|i| (0..cv.folds).map(move |f| (i, f)))
        .collect();
    let scores = cells
        .par_iter()
        .map(|&(i, f)| {
            let (fit, val) = &splits[f];
            let out = train(fit, cv.grid[i], cfg)?;
            let pred = out.model.predict(val.support())?;
            metrics::rmse(pred.values(), val.values())
        })
        .collect::<Result<Vec<f64>>>()?;

    let rmse = scores.chunks(cv.folds).map(<[f64]>::to_vec).collect();
    let table = CvTable {
        lambdas: cv.grid.clone(),
        rmse,
    };
    Ok(CvResult {
        best_lambda: table.lambdas[table.best_index()],
        table,
    })
}
