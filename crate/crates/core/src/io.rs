//! Text formats: coordinate tensors, model files and CSV reports.
//!
//! Tensor files hold optional `#` comment lines, a `dims n1 ... nK` header and
//! one `i1 ... iK value` line per entry with 1-based indices:
//!
//! ```text
//! # observed ratings
//! dims 2 2 2
//! 1 1 1 3.5
//! 2 1 2 -1.0
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{CompletionModel, Formulation};
use crate::tensor::{Dims, SparseTensor};

pub const MODEL_MAGIC: &str = "tracecomp-model";
pub const MODEL_VERSION: u32 = 1;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Lines with their 1-based numbers, skipping blanks and `#` comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_dims(line: usize, rest: &str) -> Result<Dims> {
    let sizes = rest
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| parse_err(line, format!("bad dimension '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Dims::new(sizes).map_err(|e| parse_err(line, e.to_string()))
}

fn parse_entry(line: usize, text: &str, dims: &Dims) -> Result<(Vec<usize>, f64)> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != dims.order() + 1 {
        return Err(parse_err(
            line,
            format!("expected {} indices and a value, got {} fields", dims.order(), tokens.len()),
        ));
    }
    let mut index = Vec::with_capacity(dims.order());
    for (mode, t) in tokens[..dims.order()].iter().enumerate() {
        let i: usize = t
            .parse()
            .map_err(|_| parse_err(line, format!("bad index '{t}'")))?;
        if i == 0 || i > dims.size(mode) {
            return Err(parse_err(
                line,
                format!("index {i} outside 1..={} in mode {}", dims.size(mode), mode + 1),
            ));
        }
        index.push(i - 1);
    }
    let last = tokens[dims.order()];
    let value: f64 = last
        .parse()
        .map_err(|_| parse_err(line, format!("bad value '{last}'")))?;
    if !value.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{last}'")));
    }
    Ok((index, value))
}

pub fn parse_tensor(text: &str) -> Result<SparseTensor> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing 'dims' header"))?;
    let dims = match header.strip_prefix("dims") {
        Some(rest) if rest.starts_with(char::is_whitespace) => parse_dims(hline, rest)?,
        _ => return Err(parse_err(hline, "expected 'dims n1 ... nK'")),
    };
    let mut entries = Vec::new();
    let mut first_line = std::collections::HashMap::new();
    for (line, text) in lines {
        let (index, value) = parse_entry(line, text, &dims)?;
        if let Some(prev) = first_line.insert(index.clone(), line) {
            return Err(parse_err(
                line,
                format!("duplicate index (first seen on line {prev})"),
            ));
        }
        entries.push((index, value));
    }
    SparseTensor::from_entries(dims, entries)
}

pub fn read_tensor<R: Read>(mut reader: R) -> Result<SparseTensor> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_tensor(&text)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<SparseTensor> {
    parse_tensor(&fs::read_to_string(path)?)
}

pub fn write_tensor<W: Write>(mut w: W, t: &SparseTensor) -> Result<()> {
    write_dims(&mut w, "dims", t.dims().sizes())?;
    write_entries(&mut w, t)?;
    Ok(())
}

pub fn save_tensor(path: impl AsRef<Path>, t: &SparseTensor) -> Result<()> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, t)?;
    fs::write(path, buf)?;
    Ok(())
}

fn write_dims<W: Write>(w: &mut W, tag: &str, values: &[usize]) -> Result<()> {
    write!(w, "{tag}")?;
    for v in values {
        write!(w, " {v}")?;
    }
    writeln!(w)?;
    Ok(())
}

fn write_entries<W: Write>(w: &mut W, t: &SparseTensor) -> Result<()> {
    for (index, v) in t.iter() {
        for i in index {
            write!(w, "{} ", i + 1)?;
        }
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn write_model<W: Write>(mut w: W, m: &CompletionModel) -> Result<()> {
    m.validate()?;
    writeln!(w, "{MODEL_MAGIC} {MODEL_VERSION}")?;
    writeln!(w, "formulation {}", m.formulation)?;
    write_dims(&mut w, "dims", m.dims.sizes())?;
    write_dims(&mut w, "ranks", &m.ranks)?;
    writeln!(w, "lambda {:.16e}", m.lambda)?;
    write!(w, "lambdas")?;
    for l in &m.lambdas {
        write!(w, " {l:.16e}")?;
    }
    writeln!(w)?;
    for (k, u) in m.factors.iter().enumerate() {
        writeln!(w, "factor {} {} {}", k + 1, u.nrows(), u.ncols())?;
        for i in 0..u.nrows() {
            let row: Vec<String> = (0..u.ncols()).map(|j| format!("{:.16e}", u[(i, j)])).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    writeln!(w, "z {}", m.z.nnz())?;
    write_entries(&mut w, &m.z)?;
    Ok(())
}

pub fn save_model(path: impl AsRef<Path>, m: &CompletionModel) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, m)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Sequential reader over numbered, non-comment lines.
struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self
            .inner
            .next()
            .ok_or_else(|| parse_err(self.last + 1, format!("unexpected end of file, expected {what}")))?;
        self.last = n;
        Ok((n, l))
    }

    fn tagged(&mut self, tag: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self.next(tag)?;
        let rest = l
            .strip_prefix(tag)
            .filter(|r| r.is_empty() || r.starts_with(char::is_whitespace))
            .ok_or_else(|| parse_err(n, format!("expected '{tag}'")))?;
        Ok((n, rest.trim()))
    }
}

fn parse_f64(line: usize, t: &str) -> Result<f64> {
    t.parse()
        .map_err(|_| parse_err(line, format!("bad number '{t}'")))
}

fn parse_usizes(line: usize, rest: &str) -> Result<Vec<usize>> {
    rest.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(line, format!("bad count '{t}'")))
        })
        .collect()
}

pub fn parse_model(text: &str) -> Result<CompletionModel> {
    let mut lines = Lines {
        inner: content_lines(text),
        last: 0,
    };
    let (n, rest) = lines.tagged(MODEL_MAGIC)?;
    if rest != MODEL_VERSION.to_string() {
        return Err(parse_err(n, format!("unsupported model version '{rest}'")));
    }
    let (n, rest) = lines.tagged("formulation")?;
    let formulation: Formulation = rest.parse().map_err(|e: Error| parse_err(n, e.to_string()))?;
    let (n, rest) = lines.tagged("dims")?;
    let dims = parse_dims(n, rest)?;
    let (n, rest) = lines.tagged("ranks")?;
    let ranks = parse_usizes(n, rest)?;
    if ranks.len() != dims.order() {
        return Err(parse_err(n, format!("{} ranks for {} modes", ranks.len(), dims.order())));
    }
    let (n, rest) = lines.tagged("lambda")?;
    let lambda = parse_f64(n, rest)?;
    let (n, rest) = lines.tagged("lambdas")?;
    let lambdas = rest
        .split_whitespace()
        .map(|t| parse_f64(n, t))
        .collect::<Result<Vec<_>>>()?;
    if lambdas.len() != dims.order() {
        return Err(parse_err(n, format!("{} weights for {} modes", lambdas.len(), dims.order())));
    }
    let mut factors = Vec::with_capacity(dims.order());
    for k in 0..dims.order() {
        let (n, rest) = lines.tagged("factor")?;
        let head = parse_usizes(n, rest)?;
        if head != [k + 1, dims.size(k), ranks[k]] {
            return Err(parse_err(
                n,
                format!("expected 'factor {} {} {}'", k + 1, dims.size(k), ranks[k]),
            ));
        }
        let mut data = Vec::with_capacity(dims.size(k) * ranks[k]);
        for _ in 0..dims.size(k) {
            let (n, row) = lines.next("factor row")?;
            let vals = row
                .split_whitespace()
                .map(|t| parse_f64(n, t))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != ranks[k] {
                return Err(parse_err(n, format!("expected {} values", ranks[k])));
            }
            data.extend(vals);
        }
        factors.push(DMatrix::from_row_slice(dims.size(k), ranks[k], &data));
    }
    let (n, rest) = lines.tagged("z")?;
    let nnz: usize = rest
        .parse()
        .map_err(|_| parse_err(n, format!("bad entry count '{rest}'")))?;
    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (n, l) = lines.next("z entry")?;
        entries.push(parse_entry(n, l, &dims)?);
    }
    if let Some((n, _)) = lines.inner.next() {
        return Err(parse_err(n, "trailing content after z entries"));
    }
    let model = CompletionModel {
        formulation,
        dims: dims.clone(),
        ranks,
        lambda,
        lambdas,
        factors,
        z: SparseTensor::from_entries(dims, entries)?,
    };
    model.validate()?;
    Ok(model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CompletionModel> {
    parse_model(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrahedron::random_point;
    use crate::tensor::Support;

    #[test]
    fn single_entry_file() {
        let t = parse_tensor("dims 2 2 2\n1 1 1 3.5\n").unwrap();
        assert_eq!(t.nnz(), 1);
        assert_eq!(t.get(&[0, 0, 0]), 3.5);
    }

    #[test]
    fn empty_body_is_valid() {
        let t = parse_tensor("# queries\ndims 3 4\n").unwrap();
        assert_eq!(t.nnz(), 0);
        assert_eq!(t.dims().sizes(), &[3, 4]);
    }

    #[test]
    fn malformed_line_is_reported() {
        let err = parse_tensor("dims 2 2\n1 1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_tensor("dims 2 2\n1 1 1.0\n3 1 2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_tensor("dims 2 2\n1 1 1.0\n1 1 2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_tensor("").is_err());
        assert!(parse_tensor("dimensions 2 2\n").is_err());
    }

    #[test]
    fn tensor_roundtrip_is_exact() {
        let dims = Dims::new(vec![3, 2, 2]).unwrap();
        let t = SparseTensor::from_entries(
            dims,
            vec![(vec![2, 1, 0], 0.1 + 0.2), (vec![0, 0, 1], -1e-300), (vec![1, 1, 1], 1.0 / 3.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = parse_tensor(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.values(), t.values());
        assert!(back.support().same_as(t.support()));
    }

    #[test]
    fn model_roundtrip_is_bit_exact() {
        let dims = Dims::new(vec![3, 3, 2]).unwrap();
        let support =
            Support::new(dims.clone(), vec![vec![0, 0, 0], vec![1, 2, 1], vec![2, 1, 0]]).unwrap();
        let ranks = vec![2, 1, 2];
        let m = CompletionModel {
            formulation: Formulation::LeastSquares,
            dims: dims.clone(),
            ranks: ranks.clone(),
            lambda: 0.1,
            lambdas: vec![0.3, 0.30000000000000004, 0.2],
            factors: (0..3)
                .map(|k| random_point(dims.size(k), ranks[k], k as u64).into_matrix())
                .collect(),
            z: SparseTensor::new(support, vec![1.0 / 7.0, -2.5, 1e-17]).unwrap(),
        };
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let back = parse_model(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.factors, m.factors);
        assert_eq!(back.lambdas, m.lambdas);
        assert_eq!(back.z.values(), m.z.values());
        let q = Support::full(dims);
        assert_eq!(back.predict(&q).unwrap().values(), m.predict(&q).unwrap().values());
        let mut again = Vec::new();
        write_model(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn truncated_model_is_rejected() {
        let text = "tracecomp-model 1\nformulation dual\ndims 2 2\nranks 1 1\n";
        assert!(matches!(parse_model(text), Err(Error::Parse { .. })));
        assert!(parse_model("tracecomp-model 9\n").is_err());
    }
}
