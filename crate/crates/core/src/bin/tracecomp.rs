use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trace_completion::diagnostics::selftest;
use trace_completion::io::{load_model, load_tensor, save_model, save_tensor};
use trace_completion::pipeline::{
    bench, cross_validate, default_grid, evaluate, parse_grid, BenchConfig, CvConfig, Task,
};
use trace_completion::{train, Error, Formulation, Result, TrainConfig};

#[derive(Parser)]
#[command(name = "tracecomp", version, about = "Low-rank tensor completion with the squared latent trace norm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model, optionally choosing lambda by cross-validation first.
    Train(TrainArgs),
    /// Predict the entries listed in a query file.
    Predict(PredictArgs),
    /// Cross-validate lambda and write the score table.
    Cv(CvArgs),
    /// Run the built-in derivative, geometry and oracle checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time one cost/gradient/Hessian evaluation against the number of observations.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "dual")]
    formulation: Formulation,
    /// Per-mode ranks, e.g. `2,2,2`.
    #[arg(long, value_delimiter = ',', required = true)]
    rank: Vec<usize>,
    /// Gradient-norm tolerance of the trust-region solver.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    inner_tol: f64,
    #[arg(long, default_value_t = 100)]
    inner_max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> TrainConfig {
        let mut cfg = TrainConfig::new(self.formulation, self.rank.clone());
        cfg.tr.grad_tol = self.tol;
        cfg.tr.max_outer_iters = self.max_iters;
        cfg.tr.seed = self.seed;
        cfg.inner_tol = self.inner_tol;
        cfg.inner_max_iters = self.inner_max_iters;
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("reg").required(true).args(["lambda", "cv_grid"]))]
struct TrainArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    lambda: Option<f64>,
    /// `lo:hi:step` with `step` in decades.
    #[arg(long)]
    cv_grid: Option<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    train: PathBuf,
    /// Held-out entries scored after training.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value = "rmse")]
    task: Task,
    /// Model path; the trace goes to `<out>.trace.csv` and a CV table to `<out>.cv.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query entries; their values are only used when `--task` is given.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    task: Option<Task>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    cv_grid: Option<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "dual")]
    formulation: Formulation,
    #[arg(long, value_delimiter = ',', default_value = "100,100,100")]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5,5,5")]
    rank: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1000,4000,16000,64000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional CSV of `nnz,seconds`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Predict(a) => run_predict(a),
        Command::Cv(a) => run_cv(a),
        Command::Selftest { seed } => run_selftest(seed),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cv_config(grid: Option<&str>, folds: usize, seed: u64) -> Result<CvConfig> {
    Ok(CvConfig {
        grid: grid.map_or_else(|| Ok(default_grid()), parse_grid)?,
        folds,
        seed,
    })
}

fn run_train(a: TrainArgs) -> Result<()> {
    let cfg = a.solver.config();
    cfg.validate()?;
    let y = load_tensor(&a.train)?;
    let lambda = match (a.lambda, a.cv_grid.as_deref()) {
        (Some(l), _) => l,
        (None, grid) => {
            let cv = cross_validate(&y, &cfg, &cv_config(grid, a.folds, a.solver.seed)?)?;
            cv.table.write_csv(create(&with_suffix(&a.out, ".cv.csv"))?)?;
            println!("cv selected lambda {:e}", cv.best_lambda);
            cv.best_lambda
        }
    };
    let out = train(&y, lambda, &cfg)?;
    save_model(&a.out, &out.model)?;
    out.trace.write_csv(create(&with_suffix(&a.out, ".trace.csv"))?)?;
    println!(
        "trained {} lambda {lambda:e}: cost {:.6e} gradnorm {:.3e} after {} iterations ({:?})",
        cfg.formulation,
        out.cost,
        out.grad_norm,
        out.trace.iterations.len().saturating_sub(1),
        out.stop
    );
    if let Some(test) = &a.test {
        let test = load_tensor(test)?;
        println!("test {} {}", a.task, evaluate(&out.model, &test, a.task)?);
    }
    Ok(())
}

fn run_predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let query = load_tensor(&a.test)?;
    let pred = model.predict(query.support())?;
    save_tensor(&a.out, &pred)?;
    if let Some(task) = a.task {
        println!("{task} {}", evaluate(&model, &query, task)?);
    }
    Ok(())
}

fn run_cv(a: CvArgs) -> Result<()> {
    let cfg = a.solver.config();
    cfg.validate()?;
    let y = load_tensor(&a.train)?;
    let cv = cross_validate(&y, &cfg, &cv_config(a.cv_grid.as_deref(), a.folds, a.solver.seed)?)?;
    cv.table.write_csv(create(&a.out)?)?;
    println!("best lambda {:e}", cv.best_lambda);
    Ok(())
}

fn run_selftest(seed: u64) -> Result<()> {
    let checks = selftest(seed)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(Error::Solver(format!("{failed} of {} self-checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        formulation: a.formulation,
        dims: a.dims,
        ranks: a.rank,
        sizes: a.sizes,
        repeats: a.repeats,
        seed: a.seed,
        ..BenchConfig::default()
    };
    let report = bench(&cfg)?;
    println!("{:>8}  {:>12}", "nnz", "seconds");
    for p in &report.points {
        println!("{:>8}  {:>12.6e}", p.nnz, p.seconds);
    }
    println!("fitted exponent {:.3}", report.exponent);
    if let Some(path) = &a.out {
        use std::io::Write;
        let mut w = create(path)?;
        writeln!(w, "nnz,seconds")?;
        for p in &report.points {
            writeln!(w, "{},{:e}", p.nnz, p.seconds)?;
        }
    }
    Ok(())
}
