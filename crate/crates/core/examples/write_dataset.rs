//! Writes a synthetic train/test pair in the coordinate text format, for use
//! with the `tracecomp` command line tool.
//!
//! ```text
//! cargo run --example write_dataset -- data
//! tracecomp train --train data/train.txt --test data/test.txt --rank 2,2,2 --cv-grid 1e-2:1e2:1 --out data/model.txt
//! ```

use std::path::PathBuf;

use trace_completion::io::save_tensor;
use trace_completion::pipeline::{synth_generate, SynthConfig};

fn main() -> trace_completion::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;
    let mut cfg = SynthConfig::new(vec![12, 12, 12], vec![2, 2, 2], 0.5, 0);
    cfg.noise_sigma = 0.05;
    let data = synth_generate(&cfg)?;
    save_tensor(dir.join("train.txt"), &data.train)?;
    save_tensor(dir.join("test.txt"), &data.test)?;
    println!("wrote {} training and {} test entries to {}", data.train.nnz(), data.test.nnz(), dir.display());
    Ok(())
}
