use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vgcritic_core::analysis::{
    assemble_m, bound_report, gamma_factor, gamma_prime_factor, tanh_diff_bound, BoundInputs,
    GAMMA1_MAX,
};
use vgcritic_core::linalg::Matrix;

#[test]
fn gamma_factor_shape() {
    assert_eq!(gamma_factor(0.0).unwrap(), 1.0);
    let top = gamma_factor(GAMMA1_MAX).unwrap();
    assert!((top - (2f64.sqrt() - 1.0)).abs() <= 1e-12);
    let mut prev = f64::INFINITY;
    for i in 0..100 {
        let g = GAMMA1_MAX * i as f64 / 99.0;
        let v = gamma_factor(g).unwrap();
        assert!(v > 0.0 && v <= 1.0);
        assert!(v < prev, "not decreasing at {g}");
        prev = v;
    }
    assert!(gamma_factor(GAMMA1_MAX + 1e-9).is_err());
    assert!(gamma_factor(f64::NAN).is_err());
}

#[test]
fn gamma_prime_is_root_of_its_quadratic() {
    let (g1, a2) = (0.1, 0.2);
    let x = gamma_prime_factor(g1, a2).unwrap();
    // positive root of x² - (1 - γ₁ + α₂)x - γ₁ = 0
    let b = 1.0 - g1 + a2;
    let root = (b + (b * b + 4.0 * g1).sqrt()) / 2.0;
    assert!((x - root).abs() <= 1e-15);
    assert!((x * x - b * x - g1).abs() <= 1e-14);
    for g in [0.0, 0.01, 0.3, 1.0, 7.5] {
        assert!((gamma_prime_factor(g, 0.0).unwrap() - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn tanh_difference_bound_holds() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let m = r.gen_range(1..=4);
        let t1: Vec<f64> = (0..m).map(|_| r.gen_range(-5.0..5.0)).collect();
        let t2: Vec<f64> = (0..m).map(|_| r.gen_range(-5.0..5.0)).collect();
        let bound = tanh_diff_bound(&t1, &t2).unwrap();
        let actual = t1
            .iter()
            .zip(&t2)
            .map(|(a, b)| (a.tanh() - b.tanh()).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(actual <= bound);
        assert!(bound <= 2.0 * (m as f64).sqrt());
    }
}

fn schur_pd(k1: &[f64], k2: &Matrix) -> bool {
    let n = k1.len();
    let s = DMatrix::from_fn(n, n, |i, j| k2[(i, j)] - 0.25 * k1[i] * k1[j]);
    SymmetricEigen::new(s).eigenvalues.min() > 0.0
}

#[test]
fn pd_verdict_matches_schur_complement() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let mut agree_pd = 0;
    for _ in 0..100 {
        let n = r.gen_range(1..=10);
        let k1: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..n * n).map(|_| r.gen_range(-0.5..0.5)).collect();
        let shift = r.gen_range(-0.5..1.5);
        let mut k2 = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k2.as_mut_slice()[i * n + j] =
                    0.5 * (a[i * n + j] + a[j * n + i]) + if i == j { shift } else { 0.0 };
            }
        }
        let gm = assemble_m(&k1, &k2).unwrap();
        assert!(gm.matrix.is_symmetric());
        assert_eq!(gm.pd_ok, schur_pd(&k1, &k2));
        let oracle =
            SymmetricEigen::new(DMatrix::from_row_slice(n + 1, n + 1, gm.matrix.as_slice()))
                .eigenvalues
                .min();
        assert!((gm.lambda_min - oracle).abs() <= 1e-10);
        agree_pd += gm.pd_ok as usize;
    }
    // the sample must exercise both verdicts
    assert!(agree_pd > 5 && agree_pd < 95);
}

#[test]
fn default_gains_are_admissible() {
    let k1 = vec![0.1; 10];
    let k2 = Matrix::from_diagonal(&[0.1; 10]);
    let gm = assemble_m(&k1, &k2).unwrap();
    assert!(gm.pd_ok && schur_pd(&k1, &k2));
    let rep = bound_report(&k1, &k2, BoundInputs::default(), &[0.0; 10], 1).unwrap();
    assert_eq!(rep.lambda_min_m, gm.lambda_min);
    assert!(rep.weight_bound.unwrap() < rep.weight_bound_constant.unwrap());
}
