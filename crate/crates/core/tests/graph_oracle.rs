//! Dense oracles for the implicit graph: the full (n+k) random-walk
//! construction, the truncated series, and the structural propositions.

mod common;

use common::*;
use hidegl::graph::{anchor_graph_equivalence_check, spectral_diagnostics, GraphFactor, DENSE_CAP};
use hidegl::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

#[test]
fn exact_graph_matches_block_of_full_system() {
    for (i, f) in fixtures().iter().enumerate() {
        let n = f.z.nrows();
        let g = adjacency(&f.tree);
        let p = transition(&f.z, &g, f.eta);
        let dim = p.nrows();
        let resolvent = inverse(&(DMatrix::identity(dim, dim) - &p * f.alpha));
        let full = &p * &p * resolvent;
        let block = full.view((0, 0), (n, n)).into_owned();

        let w = GraphFactor::exact(f.z.clone(), &f.tree, f.alpha, f.eta).unwrap().dense_w().unwrap();
        let err = rel_frobenius(&w, &block);
        assert!(err <= 1e-10, "fixture {i}: relative error {err:e}");
    }
}

#[test]
fn approx_graph_is_three_term_sum() {
    for (i, f) in fixtures().iter().enumerate() {
        let g = adjacency(&f.tree);
        let e_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            f.z.ncols(),
            e_vec(&f.z, &g, f.eta).into_iter().map(|v| 1.0 / v),
        ));
        let z = &f.z;
        let zt = z.transpose();
        let t0 = z * &e_inv * &zt;
        let t1 = z * &e_inv * &g * &e_inv * &zt * (f.alpha * f.eta);
        let t2 = z * &e_inv * &zt * z * &e_inv * &zt * (f.alpha * f.alpha);
        let expected = t0 + t1 + t2;

        let w = GraphFactor::approx(f.z.clone(), &f.tree, f.alpha, f.eta).unwrap().dense_w().unwrap();
        let err = rel_frobenius(&w, &expected);
        assert!(err <= 1e-12, "fixture {i}: relative error {err:e}");
        assert!(w.min() >= 0.0);
    }
}

#[test]
fn proposition_suite() {
    for (i, f) in fixtures().iter().enumerate() {
        let g = adjacency(&f.tree);
        let n = f.z.nrows();
        let p = transition(&f.z, &g, f.eta);
        let dim = p.nrows();

        let eig = p.complex_eigenvalues();
        for c in eig.iter() {
            assert!(c.im.abs() <= 1e-8, "fixture {i}: eig(P) imaginary part {}", c.im);
            assert!(c.re >= -1.0 - 1e-8 && c.re <= 1.0 + 1e-8, "fixture {i}: eig(P) = {}", c.re);
        }
        let ones = nalgebra::DVector::from_element(dim, 1.0);
        assert!((&p * &ones - &ones).amax() <= 1e-12);

        let e = e_vec(&f.z, &g, f.eta);
        let ptilde = DMatrix::from_fn(f.z.ncols(), f.z.ncols(), |r, s| {
            (f.alpha * f.eta * g[(r, s)] + f.alpha * f.alpha * (f.z.column(r).dot(&f.z.column(s)))) / e[r]
        });
        for c in ptilde.complex_eigenvalues().iter() {
            assert!(c.im.abs() <= 1e-8 && c.re.abs() < 1.0, "fixture {i}: eig(P~) = {c}");
        }

        let resolvent = inverse(&(DMatrix::identity(dim, dim) - &p * f.alpha));
        let p2 = &p * &p;
        let left = &p2 * &resolvent;
        let right = &resolvent * &p2;
        assert!(rel_frobenius(&right, &left) <= 1e-10, "fixture {i}: commutation");

        for (variant, factor) in [
            ("exact", GraphFactor::exact(f.z.clone(), &f.tree, f.alpha, f.eta).unwrap()),
            ("approx", GraphFactor::approx(f.z.clone(), &f.tree, f.alpha, f.eta).unwrap()),
        ] {
            let w = factor.dense_w().unwrap();
            assert!((&w - w.transpose()).amax() <= 1e-10, "fixture {i} {variant}: symmetry");
            assert!(w.min() >= -1e-12, "fixture {i} {variant}: min entry {}", w.min());
            let bound = if variant == "exact" { 1.0 / (1.0 - f.alpha) } else { 1.0 + f.alpha };
            for r in 0..n {
                let s = w.row(r).sum();
                assert!((-1e-8..=bound + 1e-8).contains(&s), "fixture {i} {variant}: row sum {s} > {bound}");
            }
            let lap = SymmetricEigen::new(laplacian(&w)).eigenvalues;
            assert!(lap.min() >= -1e-8 && lap.max() <= 2.0 * bound + 1e-8);

            let report = spectral_diagnostics(&factor).unwrap();
            assert!(report.all_pass, "fixture {i} {variant}: {report:?}");
        }

        // α = 0, η = 0: ZΛ⁻¹Zᵀ
        let check = anchor_graph_equivalence_check(&f.z).unwrap();
        assert!(check.max_abs_diff <= 1e-13, "fixture {i}: {}", check.max_abs_diff);
        let lambda: Vec<f64> = (0..f.z.ncols()).map(|s| f.z.column(s).sum()).collect();
        let anchor = DMatrix::from_fn(n, n, |a, b| {
            (0..f.z.ncols()).map(|s| f.z[(a, s)] * f.z[(b, s)] / lambda[s]).sum::<f64>()
        });
        let w = GraphFactor::anchor(f.z.clone()).unwrap().dense_w().unwrap();
        assert!((&w - &anchor).amax() <= 1e-13);
    }
}

#[test]
fn identity_assignment_gives_identity_anchor_graph() {
    let z = DMatrix::<f64>::identity(5, 5);
    assert_eq!(anchor_graph_equivalence_check(&z).unwrap().max_abs_diff, 0.0);
    let w = GraphFactor::anchor(z).unwrap().dense_w().unwrap();
    assert_eq!(w, DMatrix::identity(5, 5));
}

#[test]
fn anchor_row_sums_are_one() {
    let mut r = rng(3);
    let z = random_z(40, 6, &mut r);
    let f = GraphFactor::anchor(z).unwrap();
    assert!(f.row_sums().iter().all(|&d| (d - 1.0).abs() <= 1e-12));
}

#[test]
fn single_vertex_tree_scalar_ptilde() {
    let mut r = rng(4);
    let z = random_z(12, 1, &mut r);
    let tree = random_tree(1, &mut r);
    let f = GraphFactor::exact(z.clone(), &tree, 0.7, 0.5).unwrap();
    let report = spectral_diagnostics(&f).unwrap();
    let expected = 0.49 * z.column(0).norm_squared() / z.column(0).sum();
    assert!((report.ptilde_max_real - expected).abs() < 1e-12);
    assert!(expected > 0.0 && expected < 1.0);
    assert!((report.p_max_real - 1.0).abs() < 1e-10);
}

#[test]
fn row_sum_bounds_at_half() {
    let mut r = rng(5);
    let z = random_z(30, 5, &mut r);
    let tree = random_tree(5, &mut r);
    let exact = GraphFactor::exact(z.clone(), &tree, 0.5, 1.0).unwrap();
    assert!(exact.row_sums().iter().all(|&d| (0.0..=2.0).contains(&d)));
    let approx = GraphFactor::approx(z, &tree, 0.5, 1.0).unwrap();
    assert!(approx.row_sums().iter().all(|&d| (0.0..=1.5).contains(&d)));
}

#[test]
fn dense_path_is_capped() {
    let n = DENSE_CAP + 1;
    let z = DMatrix::from_element(n, 2, 0.5);
    let f = GraphFactor::anchor(z).unwrap();
    assert!(matches!(f.dense_w(), Err(Error::DenseCapExceeded { .. })));
    assert!(anchor_graph_equivalence_check(&DMatrix::from_element(n, 2, 0.5)).is_err());
    // matrix-free products still work
    assert_eq!(f.apply_w(&vec![1.0; n]).unwrap().len(), n);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn apply_matches_dense_and_is_symmetric(
        seed in 0u64..10_000,
        n in 3usize..30,
        k in 1usize..6,
        alpha in 0.05f64..0.95,
        eta in 0.0f64..2.0,
        exact in any::<bool>(),
    ) {
        let k = k.min(n);
        let mut r = rng(seed);
        let z = random_z(n, k, &mut r);
        let tree = random_tree(k, &mut r);
        let f = if exact {
            GraphFactor::exact(z, &tree, alpha, eta).unwrap()
        } else {
            GraphFactor::approx(z, &tree, alpha, eta).unwrap()
        };
        let w = f.dense_w().unwrap();
        let v: Vec<f64> = (0..n).map(|i| ((i * 37 + seed as usize) % 11) as f64 - 5.0).collect();
        let dense = &w * nalgebra::DVector::from_column_slice(&v);
        let fast = f.apply_w(&v).unwrap();
        for (a, b) in fast.iter().zip(dense.iter()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        let scale = w.amax();
        for i in 0..n.min(6) {
            let mut ei = vec![0.0; n];
            ei[i] = 1.0;
            let wi = f.apply_w(&ei).unwrap();
            prop_assert!(wi.iter().all(|&x| x >= -1e-10));
            for j in 0..n.min(6) {
                let mut ej = vec![0.0; n];
                ej[j] = 1.0;
                let wj = f.apply_w(&ej).unwrap();
                prop_assert!((wi[j] - wj[i]).abs() <= 1e-10 * scale);
            }
        }
        let bound = f.row_sum_bound();
        prop_assert!(f.row_sums().iter().all(|&d| d >= -1e-10 && d <= bound + 1e-8));
    }
}
