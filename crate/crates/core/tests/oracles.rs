//! Values fixed independently of the implementation: closed forms and
//! textbook results.

use injective_mps::families::{aklt_path, k_tilde, psi2_family, Mesh2};
use injective_mps::homotopy::*;
use injective_mps::invariants::{chern_number, frozen_theta_chern, pump_boundary_chern};
use injective_mps::linalg::{self, c, CMat};
use injective_mps::mps_core::*;
use injective_mps::tolerances::Tolerances;
use injective_mps::transfer::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sz() -> CMat {
    // Physical slots 2..4 of K(g) carry S_z = +1, 0, −1.
    CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        c(0.0, 0.0),
        c(1.0, 0.0),
        c(0.0, 0.0),
        c(-1.0, 0.0),
    ]))
}

/// Spin-1 AKLT chain (g = 1): ⟨S^z_0 S^z_r⟩ = (4/3)(−1/3)^r, ⟨(S^z)²⟩ = 2/3.
#[test]
fn aklt_spin_correlations() {
    let tol = Tolerances::default();
    let a = aklt_path(1.0).unwrap();
    let fp = fixed_point(a.mats(), &tol).unwrap();
    let one = linalg::identity(4);
    let sq = WindowObservable::single(sz() * sz()).unwrap();
    assert!((expectation(a.mats(), &fp, &sq).unwrap() - c(2.0 / 3.0, 0.0)).norm() < 1e-12);
    for r in 1..=4usize {
        let mut factors = vec![sz()];
        factors.extend(std::iter::repeat_n(one.clone(), r - 1));
        factors.push(sz());
        let obs = WindowObservable::new(factors).unwrap();
        let want = 4.0 / 3.0 * (-1.0f64 / 3.0).powi(r as i32);
        assert!(
            (expectation(a.mats(), &fp, &obs).unwrap() - c(want, 0.0)).norm() < 1e-12,
            "r = {r}"
        );
    }
    // ξ = 1 / ln 3 at the AKLT point.
    assert!((correlation_length(a.mats(), &tol).unwrap() - 1.0 / 3f64.ln()).abs() < 1e-12);
}

#[test]
fn aklt_half_closed_forms() {
    let tol = Tolerances::default();
    let a = aklt_path(0.5).unwrap();
    // L(K(1/2)) = 1, so K(1/2) is not in N.
    assert!((l_matrix(&a) - linalg::identity(2)).norm() < 1e-15);
    assert!(!in_n(&a, &tol).unwrap());
    assert!((correlation_length(a.mats(), &tol).unwrap() - 1.0 / 1.5f64.ln()).abs() < 1e-12);
    assert!((trace_invariant(&aklt_path(0.6).unwrap()) - 1.6).abs() < 1e-15);
    assert_eq!(trace_invariant(&k_tilde()), 1.0);
}

#[test]
fn shift_example_matrix() {
    let path = IsometryPath::shift();
    let t = 0.3;
    let (s, co) = (t * std::f64::consts::FRAC_PI_2).sin_cos();
    let m = path.matrix(t, 4, 2);
    let want = [[co, -s * co], [s, co * co], [0.0, s], [0.0, 0.0]];
    for (i, row) in want.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            assert!((m[(i, j)] - w).abs() < 1e-15, "({i}, {j})");
        }
    }
}

#[test]
fn cantor_pairing_values() {
    let table = [
        ((1, 1), 1),
        ((2, 1), 2),
        ((1, 2), 3),
        ((3, 1), 4),
        ((2, 2), 5),
        ((1, 3), 6),
    ];
    for ((j, g), want) in table {
        assert_eq!(cantor_pair(j, g), want);
    }
    assert_eq!(contraction_dims(1, 1), (4, 2));
    assert_eq!(contraction_dims(4, 3), (54, 4));
}

#[test]
fn f_func_values() {
    assert!((f_func(2.0, 1.0, 1.0) - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(f_func(1.0, 1.0, 1.0), 0.0);
    assert_eq!(f_func(1e-300, 0.0, 1.0), 1.0);
    assert_eq!(f_func(0.0, 0.0, 1.0), 0.0);
}

#[test]
fn contraction_of_the_unit_tensor() {
    let tol = Tolerances::default();
    let unit = MpsTensor::unit();
    let start = contraction_path(&unit, 0.0, &tol).unwrap();
    let (d, bond) = contraction_dims(1, 1);
    assert!(start.distance(&unit.pad(d, bond).unwrap()) < 1e-15);
    let end = contraction_endpoint(d, bond);
    assert!(contraction_path(&unit, 1.0, &tol).unwrap().distance(&end) < 1e-15);
    let mut e11 = linalg::zeros(bond, bond);
    e11[(0, 0)] = c(1.0, 0.0);
    assert_eq!(end.mats()[0], e11);
    assert!(end.mats()[1..].iter().all(|m| m.norm() == 0.0));
}

/// The concatenated path is continuous and its step size decays linearly in
/// `h`. With the four stages squeezed into quarters, the isometry stage alone
/// moves `A = (1)` by about `2π√3 h`, so `1e−2` is met at `h = 1e−4`.
#[test]
fn contraction_continuity() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tensors = vec![
        MpsTensor::unit(),
        aklt_path(0.5).unwrap(),
        random_in_e(4, 3, 2, &tol, &mut rng).unwrap(),
        random_in_e(2, 2, 1, &tol, &mut rng).unwrap(),
    ];
    let max_step = |a: &MpsTensor, h: f64, points: usize| {
        (0..points)
            .map(|k| {
                let s = (k as f64 + 0.5) / points as f64 * (1.0 - h);
                contraction_path(a, s, &tol)
                    .unwrap()
                    .distance(&contraction_path(a, s + h, &tol).unwrap())
            })
            .fold(0.0, f64::max)
    };
    for a in &tensors {
        let a = right_normalize(a, &tol).unwrap_or_else(|_| a.clone());
        let coarse = max_step(&a, 1e-3, 400);
        let fine = max_step(&a, 1e-4, 400);
        assert!(fine < 1e-2, "step {fine} at h = 1e-4");
        assert!(fine < 0.2 * coarse, "no linear decay: {coarse} -> {fine}");
    }
}

#[test]
fn chern_oracles() {
    let tol = Tolerances::default();
    let mesh = Mesh2::sphere(32, 32).unwrap();
    assert_eq!(chern_number(&psi2_family(), &mesh, &tol).unwrap(), 1);
    assert_eq!(chern_number(&psi2_family(), &mesh.reversed(), &tol).unwrap(), -1);
    assert_eq!(pump_boundary_chern(16, 16).unwrap(), 1);
    assert_eq!(pump_boundary_chern(32, 32).unwrap(), 1);
    assert_eq!(frozen_theta_chern(0.8, 16, 16, &tol).unwrap(), 0);
}
