use approx::assert_abs_diff_eq;
use ndarray::{array, Array1, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn spec(kernel: KernelRef, theta: Array1<f64>) -> KernelSpec {
    KernelSpec::new(kernel, theta).unwrap()
}

#[test]
fn rbf_with_zero_weights_is_one() {
    let s = spec(KernelRef::rbf(), array![0.0, 0.0, 0.0]);
    let v = kernel_value(&[1.0, -3.0, 2.0], &[0.5, 7.0, -1.0], &s).unwrap();
    assert_eq!(v, 1.0);
}

#[test]
fn hand_evaluated_kernel_values() {
    let rbf = spec(KernelRef::rbf(), array![1.0, 1.0]);
    assert_abs_diff_eq!(
        kernel_value(&[0.0, 0.0], &[1.0, 1.0], &rbf).unwrap(),
        (-2.0f64).exp(),
        epsilon = 1e-15
    );
    let poly = spec(KernelRef::polynomial(2).unwrap(), array![1.0]);
    assert_eq!(kernel_value(&[1.0], &[1.0], &poly).unwrap(), 4.0);
    let lin = spec(KernelRef::linear(), array![2.0]);
    assert_eq!(kernel_value(&[3.0], &[1.0], &lin).unwrap(), 6.0);
}

#[test]
fn kernel_value_rejects_bad_input() {
    let s = spec(KernelRef::rbf(), array![1.0, 1.0]);
    assert!(matches!(
        kernel_value(&[0.0], &[1.0, 1.0], &s),
        Err(Error::Dimension(_))
    ));
    let bad = KernelSpec {
        kernel: KernelRef::rbf(),
        theta: array![1.0, -0.5],
    };
    assert!(matches!(
        kernel_value(&[0.0, 0.0], &[1.0, 1.0], &bad),
        Err(Error::Domain(_))
    ));
    assert!(KernelSpec::new(KernelRef::rbf(), array![-1.0]).is_err());
    assert!(KernelRef::parse("poly:0").is_err());
    assert!(KernelRef::parse("poly").is_err());
    assert!(KernelRef::parse("sigmoid").is_err());
}

#[test]
fn registry_ids_round_trip() {
    for id in ["rbf", "linear", "poly:1", "poly:3"] {
        assert_eq!(KernelRef::parse(id).unwrap().id(), id);
    }
    let json = serde_json::to_string(&KernelRef::polynomial(4).unwrap()).unwrap();
    assert_eq!(json, "\"poly:4\"");
    let back: KernelRef = serde_json::from_str(&json).unwrap();
    assert_eq!(back.id(), "poly:4");
}

#[test]
fn single_sample_basis_matrices() {
    let s = spec(KernelRef::rbf(), array![0.0]);
    let x = array![[0.3]];
    let phi = basis_matrix(x.view(), array![1.0].view(), &s, &[0]).unwrap();
    assert_eq!(phi.values(), &array![[1.0, 1.0]]);
    let phi = basis_matrix(x.view(), array![-1.0].view(), &s, &[0]).unwrap();
    assert_eq!(phi.values(), &array![[1.0, -1.0]]);
}

#[test]
fn two_sample_linear_basis_matrix() {
    let s = spec(KernelRef::linear(), array![1.0]);
    let x = array![[1.0], [2.0]];
    let phi = basis_matrix(x.view(), array![1.0, -1.0].view(), &s, &[0, 1]).unwrap();
    assert_eq!(phi.values(), &array![[1.0, 1.0, -2.0], [1.0, 2.0, -4.0]]);
}

#[test]
fn empty_active_set_is_degenerate() {
    let s = spec(KernelRef::rbf(), array![1.0]);
    let x = array![[1.0], [2.0]];
    assert!(matches!(
        basis_matrix(x.view(), array![1.0, -1.0].view(), &s, &[]),
        Err(Error::DegenerateModel(_))
    ));
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
) -> (Array2<f64>, Array1<f64>, Array1<f64>, Array1<f64>) {
    let x = Array2::from_shape_fn((n, m), |_| rng.random_range(-1.5..1.5));
    let y = Array1::from_shape_fn(n, |_| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let mut w = Array1::from_shape_fn(n + 1, |_| rng.random_range(0.0..1.0));
    w[0] = rng.random_range(-1.0..1.0);
    let theta = Array1::from_shape_fn(m, |_| rng.random_range(0.1..1.0));
    (x, y, w, theta)
}

fn outputs(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>, kernel: &KernelRef, theta: &Array1<f64>) -> Array1<f64> {
    let s = KernelSpec {
        kernel: kernel.clone(),
        theta: theta.clone(),
    };
    let all: Vec<usize> = (0..x.nrows()).collect();
    basis_matrix(x.view(), y.view(), &s, &all).unwrap().dot(w)
}

fn max_rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}

fn fd_d(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>, kernel: &KernelRef, theta: &Array1<f64>) -> Array2<f64> {
    let mut d = Array2::zeros((x.nrows(), theta.len()));
    for k in 0..theta.len() {
        let h = 1e-5 * theta[k].abs().max(1.0);
        let mut up = theta.clone();
        up[k] += h;
        let mut dn = theta.clone();
        dn[k] -= h;
        let col = (outputs(x, y, w, kernel, &up) - outputs(x, y, w, kernel, &dn)) / (2.0 * h);
        d.column_mut(k).assign(&col);
    }
    d
}

fn analytic_d(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>, kernel: &KernelRef, theta: &Array1<f64>) -> Array2<f64> {
    let s = KernelSpec {
        kernel: kernel.clone(),
        theta: theta.clone(),
    };
    let all: Vec<usize> = (0..x.nrows()).collect();
    let phi = basis_matrix(x.view(), y.view(), &s, &all).unwrap();
    d_matrix(x.view(), x.view(), y.view(), w.view(), &s, &phi).unwrap()
}

#[test]
fn d_matrix_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kernel in [
        KernelRef::rbf(),
        KernelRef::polynomial(2).unwrap(),
        KernelRef::polynomial(3).unwrap(),
        KernelRef::linear(),
    ] {
        for _ in 0..5 {
            let (x, y, w, theta) = random_instance(&mut rng, 6, 3);
            let err = max_rel_err(&analytic_d(&x, &y, &w, &kernel, &theta), &fd_d(&x, &y, &w, &kernel, &theta));
            assert!(err < 1e-6, "{kernel:?}: relative error {err}");
        }
    }
}

#[test]
fn e_matrix_matches_finite_differences_of_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for kernel in [KernelRef::rbf(), KernelRef::polynomial(3).unwrap()] {
        for _ in 0..5 {
            let (x, y, w, theta) = random_instance(&mut rng, 7, 4);
            let r = Array1::from_shape_fn(x.nrows(), |_| rng.random_range(-1.0..1.0));
            let s = KernelSpec {
                kernel: kernel.clone(),
                theta: theta.clone(),
            };
            let all: Vec<usize> = (0..x.nrows()).collect();
            let phi = basis_matrix(x.view(), y.view(), &s, &all).unwrap();
            let e = e_matrix(x.view(), x.view(), y.view(), w.view(), &s, &phi, r.view()).unwrap();
            let mut fd = Array2::zeros((theta.len(), theta.len()));
            for k in 0..theta.len() {
                let h = 1e-5 * theta[k].abs().max(1.0);
                let mut up = theta.clone();
                up[k] += h;
                let mut dn = theta.clone();
                dn[k] -= h;
                let g_up = analytic_d(&x, &y, &w, &kernel, &up).t().dot(&r);
                let g_dn = analytic_d(&x, &y, &w, &kernel, &dn).t().dot(&r);
                fd.column_mut(k).assign(&((g_up - g_dn) / (2.0 * h)));
            }
            let err = max_rel_err(&e, &fd);
            assert!(err < 1e-5, "{kernel:?}: relative error {err}");
        }
    }
}

#[test]
fn d_vanishes_for_zero_sample_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y, mut w, theta) = random_instance(&mut rng, 5, 2);
    w.slice_mut(ndarray::s![1..]).fill(0.0);
    w[0] = 0.7;
    let d = analytic_d(&x, &y, &w, &KernelRef::rbf(), &theta);
    assert!(d.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_d_for_single_center() {
    let x = array![[1.0, 2.0], [3.0, -1.0]];
    let centers = array![[0.5, 4.0]];
    let s = spec(KernelRef::linear(), array![0.3, 0.7]);
    let phi = design_matrix(x.view(), centers.view(), array![1.0].view(), &s).unwrap();
    let d = d_matrix(x.view(), centers.view(), array![1.0].view(), array![0.2, 1.0].view(), &s, &phi).unwrap();
    for i in 0..2 {
        for k in 0..2 {
            assert_abs_diff_eq!(d[[i, k]], x[[i, k]] * centers[[0, k]], epsilon = 1e-15);
        }
    }
}

#[test]
fn e_is_zero_for_linear_kernel_and_zero_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (x, y, w, theta) = random_instance(&mut rng, 5, 3);
    let all: Vec<usize> = (0..5).collect();
    let r = Array1::from_elem(5, 0.3);
    let lin = spec(KernelRef::linear(), theta.clone());
    let phi = basis_matrix(x.view(), y.view(), &lin, &all).unwrap();
    let e = e_matrix(x.view(), x.view(), y.view(), w.view(), &lin, &phi, r.view()).unwrap();
    assert!(e.iter().all(|&v| v == 0.0));

    let rbf = spec(KernelRef::rbf(), theta);
    let phi = basis_matrix(x.view(), y.view(), &rbf, &all).unwrap();
    let zero = Array1::zeros(5);
    let e = e_matrix(x.view(), x.view(), y.view(), w.view(), &rbf, &phi, zero.view()).unwrap();
    assert!(e.iter().all(|&v| v == 0.0));
}

#[test]
fn dropping_a_feature_equals_zeroing_its_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (x, y, _, mut theta) = random_instance(&mut rng, 6, 4);
    theta[2] = 0.0;
    let all: Vec<usize> = (0..6).collect();
    let full = basis_matrix(x.view(), y.view(), &spec(KernelRef::rbf(), theta.clone()), &all).unwrap();
    let keep = [0usize, 1, 3];
    let xs = x.select(Axis(1), &keep);
    let reduced = basis_matrix(
        xs.view(),
        y.view(),
        &spec(KernelRef::rbf(), theta.select(Axis(0), &keep)),
        &all,
    )
    .unwrap();
    assert_eq!(full, reduced);
}

proptest! {
    #[test]
    fn kernels_are_symmetric(
        x in prop::collection::vec(-3.0f64..3.0, 4),
        z in prop::collection::vec(-3.0f64..3.0, 4),
        theta in prop::collection::vec(0.0f64..2.0, 4),
    ) {
        for kernel in [KernelRef::rbf(), KernelRef::linear(), KernelRef::polynomial(3).unwrap()] {
            let s = KernelSpec::new(kernel, Array1::from(theta.clone())).unwrap();
            let a = kernel_value(&x, &z, &s).unwrap();
            let b = kernel_value(&z, &x, &s).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let s = KernelSpec::new(KernelRef::rbf(), Array1::from(theta)).unwrap();
        prop_assert_eq!(kernel_value(&x, &x, &s).unwrap(), 1.0);
    }

    #[test]
    fn bias_column_is_ones(seed in 0u64..1000, n in 1usize..6, m in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, _, theta) = random_instance(&mut rng, n, m);
        let all: Vec<usize> = (0..n).collect();
        let phi = basis_matrix(x.view(), y.view(), &spec(KernelRef::rbf(), theta), &all).unwrap();
        prop_assert!(phi.column(0).iter().all(|&v| v == 1.0));
        prop_assert_eq!(phi.ncols(), n + 1);
    }
}
