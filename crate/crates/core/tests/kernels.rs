mod common;

use std::sync::Arc;

use common::suites::kernel_suite;
use common::*;
use proptest::prelude::*;
use trace_completion::tensor::{self, DenseTensor, Dims};
use trace_completion::{Error, SparseTensor, Support};

#[test]
fn exhaustive_small_shapes_match_dense_unfoldings() {
    let rep = kernel_suite(&[5, 4, 3], 11);
    assert_eq!(rep.shapes, 60);
    assert!(rep.unfold == 0.0, "{rep:?}");
    assert!(rep.cross < 1e-12, "{rep:?}");
    assert!(rep.gram < 1e-12, "{rep:?}");
    assert!(rep.mode_product < 1e-12, "{rep:?}");
    assert!(rep.fused < 1e-12, "{rep:?}");
}

#[test]
fn matrices_and_four_mode_tensors() {
    for max in [vec![6, 5], vec![3, 2, 3, 2]] {
        let rep = kernel_suite(&max, 5);
        assert!(rep.cross.max(rep.gram).max(rep.mode_product).max(rep.fused) < 1e-12, "{max:?}: {rep:?}");
    }
}

#[test]
fn unfolding_example_from_definition() {
    // 2x2x2 with T[i,j,k] = 1 + i + 2j + 4k, mode-1 columns ordered by (j, k) with j fastest
    let dims = Dims::new(vec![2, 2, 2]).unwrap();
    let t = DenseTensor::from_fn(dims, |idx| (1 + idx[0] + 2 * idx[1] + 4 * idx[2]) as f64);
    let m = t.unfold(0);
    assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.0, 5.0, 7.0]);
    let m = t.unfold(2);
    assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![5.0, 6.0, 7.0, 8.0]);
}

#[test]
fn mode_product_onto_disjoint_support_is_zero_where_fibers_miss() {
    let dims = Dims::new(vec![3, 3]).unwrap();
    let z = SparseTensor::from_entries(dims.clone(), vec![(vec![0, 0], 2.0)]).unwrap();
    let out = Support::new(dims, vec![vec![1, 0], vec![2, 1]]).unwrap();
    let u = nalgebra::DMatrix::from_element(3, 1, 1.0);
    let w = tensor::mode_multiply_on_support(&z, 0, &u, &u, &out).unwrap();
    // (1,0) shares the mode-0 fiber of (0,0); (2,1) does not
    assert_eq!(w.values(), &[2.0, 0.0]);
}

#[test]
fn kernels_reject_mismatched_inputs() {
    let dims = Dims::new(vec![3, 2]).unwrap();
    let mut rng = rng(0);
    let a = random_sparse(&dims, 0.6, &mut rng);
    let other = random_sparse(&dims, 0.6, &mut rng);
    let u = gaussian_matrix(3, 2, &mut rng);
    assert!(matches!(tensor::cross_unfold_u(&a, &a, 0, &gaussian_matrix(2, 2, &mut rng)), Err(Error::Shape(_))));
    assert!(matches!(tensor::cross_unfold_u(&a, &a, 2, &u), Err(Error::ModeOutOfRange { .. })));
    if !a.support().same_as(other.support()) {
        assert!(matches!(tensor::cross_unfold_u(&a, &other, 0, &u), Err(Error::SupportMismatch)));
    }
    let out = Support::full(Dims::new(vec![3, 3]).unwrap());
    assert!(tensor::mode_multiply_on_support(&a, 0, &u, &u, &out).is_err());
    assert!(tensor::mode_multiply_sum(&[], 0, a.support()).is_err());
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 2..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_unfold(sizes in dims_strategy(), seed in any::<u64>()) {
        let dims = Dims::new(sizes).unwrap();
        let mut rng = rng(seed);
        let t = DenseTensor::from_fn(dims.clone(), |_| gaussian(&mut rng));
        for k in 0..dims.order() {
            let back = DenseTensor::fold(dims.clone(), k, &t.unfold(k)).unwrap();
            prop_assert_eq!(back.data(), t.data());
        }
    }

    #[test]
    fn index_maps_round_trip(sizes in dims_strategy(), seed in any::<u64>()) {
        let dims = Dims::new(sizes.clone()).unwrap();
        let mut r = rng(seed);
        let idx: Vec<usize> = sizes.iter().map(|&n| rand::Rng::random_range(&mut r, 0..n)).collect();
        for k in 0..dims.order() {
            let (row, col) = dims.unfold_index(&idx, k).unwrap();
            prop_assert_eq!(row, idx[k]);
            prop_assert_eq!(col as usize, suites::unfolding_column(&sizes, &idx, k));
            prop_assert_eq!(dims.fold_index(k, row, col).unwrap(), idx.clone());
        }
    }

    #[test]
    fn mode_product_is_linear(sizes in dims_strategy(), seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let dims = Dims::new(sizes).unwrap();
        let mut rng = rng(seed);
        let s = random_support(&dims, 0.5, &mut rng);
        let (a, b) = (random_values(&s, &mut rng), random_values(&s, &mut rng));
        let k = dims.order() - 1;
        let n = dims.size(k);
        let (l, r) = (gaussian_matrix(n, 2, &mut rng), gaussian_matrix(n, 2, &mut rng));
        let comb = a.lincomb(alpha, 1.0, &b).unwrap();
        let lhs = tensor::mode_multiply_on_support(&comb, k, &l, &r, &s).unwrap();
        let pa = tensor::mode_multiply_on_support(&a, k, &l, &r, &s).unwrap();
        let pb = tensor::mode_multiply_on_support(&b, k, &l, &r, &s).unwrap();
        let rhs = pa.lincomb(alpha, 1.0, &pb).unwrap();
        prop_assert!(max_abs_diff(lhs.values(), rhs.values()) < 1e-10);
    }

    #[test]
    fn gram_norm_is_trace_of_cross(sizes in dims_strategy(), seed in any::<u64>()) {
        let dims = Dims::new(sizes).unwrap();
        let mut rng = rng(seed);
        let z = random_sparse(&dims, 0.6, &mut rng);
        for k in 0..dims.order() {
            let u = gaussian_matrix(dims.size(k), 2, &mut rng);
            let g = tensor::gram_norm(&z, k, &u).unwrap();
            let t = (u.transpose() * tensor::zzt_u(&z, k, &u).unwrap()).trace();
            prop_assert!((g - t).abs() <= 1e-10 * g.abs().max(1.0));
        }
    }
}

#[test]
fn supports_share_fiber_caches_across_clones() {
    let dims = Dims::new(vec![4, 3, 2]).unwrap();
    let s = Support::full(dims);
    let t = SparseTensor::zeros(Arc::clone(&s));
    let c = t.clone();
    assert!(Arc::ptr_eq(t.support(), c.support()));
    assert_eq!(s.num_fibers(1).unwrap(), 8);
}
