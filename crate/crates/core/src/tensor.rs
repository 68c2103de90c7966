//! Sparse coordinate tensors and the mode-k kernels built on top of them.
//!
//! A [`SparseTensor`] is a value vector attached to a shared, immutable
//! [`Support`] (the index set Ω). Tensors that live on the same support share
//! one `Arc<Support>`, so the per-mode fiber groupings are built once and
//! reused by every kernel call during a solve.
//!
//! The mode-k unfolding follows the Kolda convention: row `i_k`, column given
//! by the colexicographic index over the remaining modes in increasing order.
//! No kernel in this module ever materializes an unfolding; all of them walk
//! the fibers of the support and cost `O(|Ω| r)`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense `n x r` factor matrix (column-major).
pub type DenseFactor = DMatrix<f64>;

/// Mode sizes `(n_1, ..., n_K)` of a tensor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dims(Vec<usize>);

impl Dims {
    /// Requires at least two modes, each of size at least one.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidDims(format!(
                "need at least 2 modes, got {}",
                sizes.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidDims(format!("zero-length mode in {sizes:?}")));
        }
        Ok(Dims(sizes))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self, mode: usize) -> usize {
        self.0[mode]
    }

    /// Total number of entries, as `u128` so that huge sparse shapes never overflow.
    pub fn total(&self) -> u128 {
        self.0.iter().map(|&n| n as u128).product()
    }

    pub fn min_size(&self) -> usize {
        *self.0.iter().min().expect("dims are non-empty")
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    pub fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.order() || index.iter().zip(&self.0).any(|(&i, &n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                dims: self.0.clone(),
            });
        }
        Ok(())
    }

    /// Position of `index` in the mode-`mode` unfolding, as `(row, col)`.
    pub fn unfold_index(&self, index: &[usize], mode: usize) -> Result<(usize, u128)> {
        self.check_mode(mode)?;
        self.check_index(index)?;
        Ok((index[mode], self.fiber_col(index, mode)))
    }

    /// Inverse of [`Dims::unfold_index`].
    pub fn fold_index(&self, mode: usize, row: usize, col: u128) -> Result<Vec<usize>> {
        self.check_mode(mode)?;
        let mut out = vec![0; self.order()];
        out[mode] = row;
        let mut rest = col;
        for (j, &n) in self.0.iter().enumerate() {
            if j == mode {
                continue;
            }
            out[j] = (rest % n as u128) as usize;
            rest /= n as u128;
        }
        if rest != 0 {
            return Err(Error::IndexOutOfRange {
                index: out,
                dims: self.0.clone(),
            });
        }
        self.check_index(&out)?;
        Ok(out)
    }

    /// Colexicographic column of an (already validated) index in the mode-`mode` unfolding.
    fn fiber_col(&self, index: &[usize], mode: usize) -> u128 {
        let mut col = 0u128;
        let mut stride = 1u128;
        for (j, (&i, &n)) in index.iter().zip(&self.0).enumerate() {
            if j == mode {
                continue;
            }
            col += i as u128 * stride;
            stride *= n as u128;
        }
        col
    }
}

/// Entries of a support grouped by their mode-k fiber.
#[derive(Debug)]
struct FiberIndex {
    /// Unfolding column of each fiber, strictly increasing.
    cols: Vec<u128>,
    /// `entries[starts[f]..starts[f + 1]]` are the entry ids of fiber `f`.
    starts: Vec<usize>,
    entries: Vec<usize>,
    /// Mode-k coordinate of each entry of `entries`.
    rows: Vec<usize>,
}

impl FiberIndex {
    fn build(support: &Support, mode: usize) -> Self {
        let mut keyed: Vec<(u128, usize)> = (0..support.nnz())
            .map(|e| (support.dims.fiber_col(support.index(e), mode), e))
            .collect();
        // entry ids are sorted lexicographically already, so a stable sort by
        // column keeps a fixed order inside every fiber
        keyed.sort_by_key(|&(c, _)| c);
        let mut cols = Vec::new();
        let mut starts = Vec::new();
        let mut entries = Vec::with_capacity(keyed.len());
        for (pos, &(c, e)) in keyed.iter().enumerate() {
            if cols.last() != Some(&c) {
                cols.push(c);
                starts.push(pos);
            }
            entries.push(e);
        }
        starts.push(keyed.len());
        let rows = entries.iter().map(|&e| support.index(e)[mode]).collect();
        FiberIndex {
            cols,
            starts,
            entries,
            rows,
        }
    }

    fn num_fibers(&self) -> usize {
        self.cols.len()
    }

    fn fiber(&self, f: usize) -> &[usize] {
        &self.entries[self.starts[f]..self.starts[f + 1]]
    }
}

/// A fixed index set Ω: sorted, duplicate-free coordinates within `dims`.
#[derive(Debug)]
pub struct Support {
    dims: Dims,
    coords: Vec<usize>,
    fibers: Vec<OnceLock<FiberIndex>>,
}

impl Support {
    /// Builds a support from arbitrary-order coordinates; duplicates are rejected.
    pub fn new(dims: Dims, mut indices: Vec<Vec<usize>>) -> Result<Arc<Self>> {
        for idx in &indices {
            dims.check_index(idx)?;
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateIndex(w[0].clone()));
        }
        Ok(Arc::new(Self::from_sorted_unchecked(dims, indices.concat())))
    }

    /// Every entry of `dims`, in lexicographic order. Only sensible for small shapes.
    pub fn full(dims: Dims) -> Arc<Self> {
        let total = dims.total() as usize;
        let k = dims.order();
        let mut coords = vec![0usize; total * k];
        let mut cur = vec![0usize; k];
        for e in 0..total {
            coords[e * k..(e + 1) * k].copy_from_slice(&cur);
            for j in (0..k).rev() {
                cur[j] += 1;
                if cur[j] < dims.size(j) {
                    break;
                }
                cur[j] = 0;
            }
        }
        Arc::new(Self::from_sorted_unchecked(dims, coords))
    }

    pub fn empty(dims: Dims) -> Arc<Self> {
        Arc::new(Self::from_sorted_unchecked(dims, Vec::new()))
    }

    fn from_sorted_unchecked(dims: Dims, coords: Vec<usize>) -> Self {
        let fibers = (0..dims.order()).map(|_| OnceLock::new()).collect();
        Support {
            dims,
            coords,
            fibers,
        }
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn nnz(&self) -> usize {
        self.coords.len() / self.dims.order()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinates of entry `e` (0-based).
    pub fn index(&self, e: usize) -> &[usize] {
        let k = self.dims.order();
        &self.coords[e * k..(e + 1) * k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.coords.chunks_exact(self.dims.order())
    }

    /// Position of `index` in the entry list, if present.
    pub fn position(&self, index: &[usize]) -> Option<usize> {
        let k = self.dims.order();
        let (mut lo, mut hi) = (0, self.nnz());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.coords[mid * k..(mid + 1) * k].cmp(index) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Sub-support made of the given entry ids (any order, no repeats).
    pub fn select(&self, entries: &[usize]) -> Arc<Self> {
        let mut ids = entries.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let coords = ids.iter().flat_map(|&e| self.index(e).iter().copied()).collect();
        Arc::new(Self::from_sorted_unchecked(self.dims.clone(), coords))
    }

    fn fiber_index(&self, mode: usize) -> &FiberIndex {
        self.fibers[mode].get_or_init(|| FiberIndex::build(self, mode))
    }

    /// Number of distinct mode-`mode` fibers touched by the support.
    pub fn num_fibers(&self, mode: usize) -> Result<usize> {
        self.dims.check_mode(mode)?;
        Ok(self.fiber_index(mode).num_fibers())
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other) || (self.dims == other.dims && self.coords == other.coords)
    }
}

/// Values attached to a [`Support`].
#[derive(Clone, Debug)]
pub struct SparseTensor {
    support: Arc<Support>,
    values: Vec<f64>,
}

impl SparseTensor {
    /// Builds a tensor from `(index, value)` pairs in any order.
    pub fn from_entries(dims: Dims, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        for (idx, v) in &entries {
            dims.check_index(idx)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("value at {idx:?}")));
            }
        }
        let mut entries = entries;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateIndex(w[0].0.clone()));
        }
        let values = entries.iter().map(|(_, v)| *v).collect();
        let coords = entries.into_iter().flat_map(|(i, _)| i).collect();
        Ok(SparseTensor {
            support: Arc::new(Support::from_sorted_unchecked(dims, coords)),
            values,
        })
    }

    pub fn new(support: Arc<Support>, values: Vec<f64>) -> Result<Self> {
        if values.len() != support.nnz() {
            return Err(Error::Shape(format!(
                "{} values for a support of {} entries",
                values.len(),
                support.nnz()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor value".into()));
        }
        Ok(SparseTensor { support, values })
    }

    pub fn zeros(support: Arc<Support>) -> Self {
        let values = vec![0.0; support.nnz()];
        SparseTensor { support, values }
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn dims(&self) -> &Dims {
        self.support.dims()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Iterates `(index, value)` pairs in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.support.iter().zip(self.values.iter().copied())
    }

    /// Value at `index`, zero if it is not in the support.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.support
            .position(index)
            .map_or(0.0, |e| self.values[e])
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.nnz());
        SparseTensor {
            support: Arc::clone(&self.support),
            values,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.with_values(self.values.iter().map(|v| a * v).collect())
    }

    fn check_aligned(&self, other: &Self) -> Result<()> {
        if self.support.same_as(&other.support) {
            Ok(())
        } else {
            Err(Error::SupportMismatch)
        }
    }

    /// `a * self + b * other` on a shared support.
    pub fn lincomb(&self, a: f64, b: f64, other: &Self) -> Result<Self> {
        self.check_aligned(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// `a * x + y`, both on the same support.
pub fn axpy(a: f64, x: &SparseTensor, y: &SparseTensor) -> Result<SparseTensor> {
    x.lincomb(a, 1.0, y)
}

/// Entrywise inner product of two tensors on the same support.
pub fn inner(x: &SparseTensor, y: &SparseTensor) -> Result<f64> {
    x.check_aligned(y)?;
    Ok(x.values.iter().zip(&y.values).map(|(a, b)| a * b).sum())
}

pub fn frob_norm(x: &SparseTensor) -> f64 {
    x.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_factor(dims: &Dims, mode: usize, u: &DenseFactor) -> Result<()> {
    dims.check_mode(mode)?;
    if u.nrows() != dims.size(mode) {
        return Err(Error::Shape(format!(
            "factor has {} rows, mode {} has size {}",
            u.nrows(),
            mode,
            dims.size(mode)
        )));
    }
    Ok(())
}

/// Row-major copy of `u`: row `i` is `out[i * r..(i + 1) * r]`.
fn row_major(u: &DenseFactor) -> Vec<f64> {
    let (n, r) = u.shape();
    let mut out = vec![0.0; n * r];
    for (j, col) in u.column_iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            out[i * r + j] = x;
        }
    }
    out
}

/// `||U^T Z_(k)||_F^2`, accumulated fiber by fiber.
pub fn gram_norm(z: &SparseTensor, mode: usize, u: &DenseFactor) -> Result<f64> {
    check_factor(z.dims(), mode, u)?;
    let r = u.ncols();
    let ut = row_major(u);
    let fi = z.support.fiber_index(mode);
    let mut w = vec![0.0; r];
    let mut total = 0.0;
    for f in 0..fi.num_fibers() {
        w.iter_mut().for_each(|x| *x = 0.0);
        for &e in fi.fiber(f) {
            let row = &ut[z.support.index(e)[mode] * r..][..r];
            let v = z.values[e];
            w.iter_mut().zip(row).for_each(|(acc, &x)| *acc += v * x);
        }
        total += w.iter().map(|x| x * x).sum::<f64>();
    }
    Ok(total)
}

/// `A_(k) (B_(k)^T U)` for two tensors on the same support.
///
/// With `a = b = z` this is the `Z_(k) Z_(k)^T U` term of the dual gradient;
/// the mixed form provides the `symm(R Z^T) U` products of the least-squares
/// formulation.
pub fn cross_unfold_u(
    a: &SparseTensor,
    b: &SparseTensor,
    mode: usize,
    u: &DenseFactor,
) -> Result<DenseFactor> {
    cross_unfold_sum(&[(a, b, u)], mode)
}

/// `sum_t A_t(k) (B_t(k)^T U_t)` in a single sweep over the fibers.
///
/// All tensors share one support and all `U_t` have the same shape.
pub fn cross_unfold_sum(
    terms: &[(&SparseTensor, &SparseTensor, &DenseFactor)],
    mode: usize,
) -> Result<DenseFactor> {
    let Some(&(first, _, u0)) = terms.first() else {
        return Err(Error::Shape("empty term list".into()));
    };
    check_factor(first.dims(), mode, u0)?;
    for &(a, b, u) in terms {
        first.check_aligned(a)?;
        first.check_aligned(b)?;
        if u.shape() != u0.shape() {
            return Err(Error::Shape(format!("factor shapes differ: {:?} vs {:?}", u.shape(), u0.shape())));
        }
    }
    let (n, r) = u0.shape();
    let sweep = Sweep {
        fibers: first.support.fiber_index(mode),
        reduce: terms.iter().map(|t| t.1.values()).collect(),
        reduce_by: terms.iter().map(|t| row_major(t.2)).collect(),
        expand: terms.iter().map(|t| t.0.values()).collect(),
        expand_by: Vec::new(),
    };
    let out = match r {
        1 => sweep.cross::<1>(n, r),
        2 => sweep.cross::<2>(n, r),
        3 => sweep.cross::<3>(n, r),
        4 => sweep.cross::<4>(n, r),
        5 => sweep.cross::<5>(n, r),
        _ => sweep.cross::<0>(n, r),
    };
    Ok(DMatrix::from_row_slice(n, r, &out))
}

/// Per-term inputs of a fused fiber sweep. Each fiber of term `t` is reduced
/// to `w_t = reduce_by[t]^T reduce[t]_f`, then expanded by either a tensor
/// (`expand`) or a factor (`expand_by`). Factors are row-major.
struct Sweep<'a> {
    fibers: &'a FiberIndex,
    reduce: Vec<&'a [f64]>,
    reduce_by: Vec<Vec<f64>>,
    expand: Vec<&'a [f64]>,
    expand_by: Vec<Vec<f64>>,
}

impl Sweep<'_> {
    /// `w_t = reduce_by[t]^T reduce[t]_f` for one non-empty fiber.
    #[inline(always)]
    fn reduce_fiber<const R: usize>(&self, entries: &[usize], rows: &[usize], w: &mut [f64], r: usize) {
        let r = if R == 0 { r } else { R };
        for ((z, rt), wt) in self.reduce.iter().zip(&self.reduce_by).zip(w.chunks_exact_mut(r)) {
            let (v, i) = (z[entries[0]], rows[0]);
            let row = &rt[i * r..i * r + r];
            for c in 0..r {
                wt[c] = v * row[c];
            }
            for (&e, &i) in entries[1..].iter().zip(&rows[1..]) {
                let v = z[e];
                let row = &rt[i * r..i * r + r];
                for c in 0..r {
                    wt[c] += v * row[c];
                }
            }
        }
    }

    /// Row-major `sum_t A_t B_t^T U_t`; `R` fixes the width at compile
    /// time, `R = 0` reads it from `r`.
    fn cross<const R: usize>(&self, n: usize, r: usize) -> Vec<f64> {
        let r = if R == 0 { r } else { R };
        let fi = self.fibers;
        let mut out = vec![0.0; n * r];
        let mut w = vec![0.0; self.reduce.len() * r];
        for f in 0..fi.num_fibers() {
            let entries = &fi.entries[fi.starts[f]..fi.starts[f + 1]];
            let rows = &fi.rows[fi.starts[f]..fi.starts[f + 1]];
            self.reduce_fiber::<R>(entries, rows, &mut w, r);
            for (&e, &i) in entries.iter().zip(rows) {
                let o = &mut out[i * r..i * r + r];
                for (a, wt) in self.expand.iter().zip(w.chunks_exact(r)) {
                    let v = a[e];
                    for c in 0..r {
                        o[c] += v * wt[c];
                    }
                }
            }
        }
        out
    }

    /// `sum_t (Z_t x_k L_t Rt_t^T)` on the fibers of `out`.
    fn multiply<const R: usize>(&self, out: &FiberIndex, nnz: usize, r: usize) -> Vec<f64> {
        let r = if R == 0 { r } else { R };
        let (fz, fo) = (self.fibers, out);
        let mut values = vec![0.0; nnz];
        let mut w = vec![0.0; self.reduce.len() * r];
        let (mut p, mut q) = (0, 0);
        while p < fz.num_fibers() && q < fo.num_fibers() {
            match fz.cols[p].cmp(&fo.cols[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    let span = fz.starts[p]..fz.starts[p + 1];
                    let (entries, rows) = (&fz.entries[span.clone()], &fz.rows[span]);
                    self.reduce_fiber::<R>(entries, rows, &mut w, r);
                    let span = fo.starts[q]..fo.starts[q + 1];
                    for (&e, &i) in fo.entries[span.clone()].iter().zip(&fo.rows[span]) {
                        let mut s = 0.0;
                        for (lt, wt) in self.expand_by.iter().zip(w.chunks_exact(r)) {
                            let row = &lt[i * r..i * r + r];
                            for c in 0..r {
                                s += row[c] * wt[c];
                            }
                        }
                        values[e] = s;
                    }
                    p += 1;
                    q += 1;
                }
            }
        }
        values
    }
}

/// `Z_(k) Z_(k)^T U`.
pub fn zzt_u(z: &SparseTensor, mode: usize, u: &DenseFactor) -> Result<DenseFactor> {
    cross_unfold_u(z, z, mode, u)
}

/// `(Z x_k L Rt^T)` evaluated at the entries of `out`.
///
/// The `n_k x n_k` matrix `L Rt^T` is never formed: each fiber of `z` is
/// reduced to `w = Rt^T z_f` and the requested rows of the matching output
/// fiber receive `L[i, :] . w`.
pub fn mode_multiply_on_support(
    z: &SparseTensor,
    mode: usize,
    l: &DenseFactor,
    rt: &DenseFactor,
    out: &Arc<Support>,
) -> Result<SparseTensor> {
    mode_multiply_sum(&[(z, l, rt)], mode, out)
}

/// `sum_t (Z_t x_k L_t Rt_t^T)` on `out`, with all `Z_t` on one support and
/// all factors of the same width.
pub fn mode_multiply_sum(
    terms: &[(&SparseTensor, &DenseFactor, &DenseFactor)],
    mode: usize,
    out: &Arc<Support>,
) -> Result<SparseTensor> {
    let Some(&(first, l0, _)) = terms.first() else {
        return Err(Error::Shape("empty term list".into()));
    };
    let r = l0.ncols();
    for &(z, l, rt) in terms {
        first.check_aligned(z)?;
        check_factor(z.dims(), mode, l)?;
        check_factor(z.dims(), mode, rt)?;
        if l.ncols() != r || rt.ncols() != r {
            return Err(Error::Shape(format!(
                "factor widths differ: {}, {} vs {r}",
                l.ncols(),
                rt.ncols()
            )));
        }
    }
    if out.dims() != first.dims() {
        return Err(Error::Shape(format!(
            "output dims {:?} differ from input dims {:?}",
            out.dims().sizes(),
            first.dims().sizes()
        )));
    }
    let sweep = Sweep {
        fibers: first.support.fiber_index(mode),
        reduce: terms.iter().map(|t| t.0.values()).collect(),
        reduce_by: terms.iter().map(|t| row_major(t.2)).collect(),
        expand: Vec::new(),
        expand_by: terms.iter().map(|t| row_major(t.1)).collect(),
    };
    let fo = out.fiber_index(mode);
    let values = match r {
        1 => sweep.multiply::<1>(fo, out.nnz(), r),
        2 => sweep.multiply::<2>(fo, out.nnz(), r),
        3 => sweep.multiply::<3>(fo, out.nnz(), r),
        4 => sweep.multiply::<4>(fo, out.nnz(), r),
        5 => sweep.multiply::<5>(fo, out.nnz(), r),
        _ => sweep.multiply::<0>(fo, out.nnz(), r),
    };
    Ok(SparseTensor {
        support: Arc::clone(out),
        values,
    })
}

/// Small dense tensor stored with the first index varying fastest.
///
/// Used for fully observed denoising problems and as an oracle in tests;
/// the solvers themselves never densify.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Dims,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: Dims) -> Self {
        let total = usize::try_from(dims.total()).expect("dense tensor too large");
        DenseTensor {
            dims,
            data: vec![0.0; total],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        let support = Support::full(t.dims.clone());
        for idx in support.iter() {
            let p = t.offset(idx);
            t.data[p] = f(idx);
        }
        t
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, index: &[usize]) -> usize {
        let mut p = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(self.dims.sizes()) {
            p += i * stride;
            stride *= n;
        }
        p
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], v: f64) {
        let p = self.offset(index);
        self.data[p] = v;
    }

    pub fn from_sparse(t: &SparseTensor) -> Self {
        let mut d = Self::zeros(t.dims().clone());
        for (idx, v) in t.iter() {
            d.set(idx, v);
        }
        d
    }

    /// Samples this tensor on `support`.
    pub fn restrict(&self, support: &Arc<Support>) -> SparseTensor {
        let values = support.iter().map(|idx| self.get(idx)).collect();
        SparseTensor {
            support: Arc::clone(support),
            values,
        }
    }

    /// Mode-`mode` unfolding as an `n_k x prod_{j != k} n_j` matrix.
    pub fn unfold(&self, mode: usize) -> DMatrix<f64> {
        let n = self.dims.size(mode);
        let cols = self.data.len() / n;
        let mut m = DMatrix::zeros(n, cols);
        for idx in Support::full(self.dims.clone()).iter() {
            let (row, col) = self.dims.unfold_index(idx, mode).expect("valid index");
            m[(row, col as usize)] = self.get(idx);
        }
        m
    }

    pub fn fold(dims: Dims, mode: usize, m: &DMatrix<f64>) -> Result<Self> {
        let n = dims.size(mode);
        let total = dims.total() as usize;
        if m.nrows() != n || m.ncols() * n != total {
            return Err(Error::Shape(format!(
                "cannot fold a {}x{} matrix into {:?}",
                m.nrows(),
                m.ncols(),
                dims.sizes()
            )));
        }
        let mut t = Self::zeros(dims);
        for row in 0..m.nrows() {
            for col in 0..m.ncols() {
                let idx = t.dims.fold_index(mode, row, col as u128)?;
                t.set(&idx, m[(row, col)]);
            }
        }
        Ok(t)
    }

    /// `T x_k M` for an `m x n_k` matrix `M` with `m = n_k`.
    pub fn mode_multiply(&self, mode: usize, m: &DMatrix<f64>) -> Self {
        let prod = m * self.unfold(mode);
        Self::fold(self.dims.clone(), mode, &prod).expect("square mode product keeps dims")
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims, other.dims);
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims, other.dims);
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| a * v).collect(),
        }
    }
}
