use injective_mps::families::{custom_family, psi2_family, psi2_tensor, pump_slice_family, sphere_state, Mesh2};
use injective_mps::homotopy::{contraction_path, f_func, in_n, retract, IsometryPath};
use injective_mps::invariants::{curvature_report, link_variable};
use injective_mps::linalg::{self, c, CMat};
use injective_mps::mps_core::*;
use injective_mps::tolerances::Tolerances;
use injective_mps::transfer::{expectation, fixed_point, transfer_matrix, WindowObservable};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

/// `(d, D, χ)` with an injective core available (`d ≥ χ²`).
fn dims(max_chi: usize) -> impl Strategy<Value = (usize, usize, usize)> {
    (1..=max_chi)
        .prop_flat_map(|chi| (Just(chi), (chi * chi).max(2)..=(chi * chi).max(2) + 1, chi..=chi + 2))
        .prop_map(|(chi, d, bond)| (d, bond, chi))
}

fn sample(d: usize, bond: usize, chi: usize, seed: u64) -> (MpsTensor, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_in_e(d, bond, chi, &tol(), &mut rng).unwrap();
    (a, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_form_invariants((d, bond, chi) in dims(3), seed in any::<u64>()) {
        let t = tol();
        let (a, _) = sample(d, bond, chi, seed);
        let dec = canonical_decompose(&a, &t).unwrap();
        prop_assert_eq!(dec.chi, chi);
        prop_assert!(right_normalization_residual(&dec.k) <= t.tol_norm);
        prop_assert!(dec.reassemble().distance(&a) <= t.tol_recon);
        // Upper-right block of the canonical form is forbidden.
        let q = range_projection(&a, &t).unwrap();
        let comp = linalg::identity(bond) - &q;
        for m in a.mats() {
            prop_assert!((&q * m * &comp).norm() <= t.tol_norm);
        }
    }

    #[test]
    fn gauge_moves_preserve_rank_and_state((d, bond, chi) in dims(3), seed in any::<u64>()) {
        let t = tol();
        let (a, mut rng) = sample(d, bond, chi, seed);
        let g = GaugeMove::random(&a, &t, &mut rng).unwrap();
        let b = apply_gauge(&a, &g, &t).unwrap();
        prop_assert_eq!(essential_rank(&a, &t).unwrap(), essential_rank(&b, &t).unwrap());
        prop_assert!(gauge_equivalent(&a, &a, &t).unwrap());
        prop_assert!(gauge_equivalent(&a, &b, &t).unwrap());
        prop_assert!(gauge_equivalent(&b, &a, &t).unwrap());
    }

    #[test]
    fn gauge_equivalence_is_symmetric_on_unrelated_pairs((d, bond, chi) in dims(2), s1 in any::<u64>(), s2 in any::<u64>()) {
        let t = tol();
        let (a, _) = sample(d, bond, chi, s1);
        let (b, _) = sample(d, bond, chi, s2);
        prop_assert_eq!(gauge_equivalent(&a, &b, &t).unwrap(), gauge_equivalent(&b, &a, &t).unwrap());
    }

    #[test]
    fn fixed_point_is_a_trace_one_fixed_point((d, _bond, chi) in dims(3), seed in any::<u64>()) {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_core(d, chi, &t, &mut rng).unwrap();
        let fp = fixed_point(&k, &t).unwrap();
        let e1 = transfer_matrix(&k, &linalg::identity(d)).unwrap();
        let image = linalg::unvectorize(&(&e1 * linalg::vectorize(&fp.t)), chi);
        prop_assert!((image - &fp.t).norm() <= 1e-10);
        prop_assert!((fp.t.trace() - c(1.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn identity_padding_leaves_expectations_unchanged(
        (d, _bond, chi) in dims(2), seed in any::<u64>(), n in 1usize..=3, left in 0usize..=2, right in 0usize..=2,
    ) {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_core(d, chi, &t, &mut rng).unwrap();
        let fp = fixed_point(&k, &t).unwrap();
        let obs = WindowObservable::new((0..n).map(|_| linalg::random_gaussian(d, d, &mut rng)).collect()).unwrap();
        let base = expectation(&k, &fp, &obs).unwrap();
        let padded = expectation(&k, &fp, &obs.padded(left, right)).unwrap();
        prop_assert!((base - padded).norm() <= 1e-10);
    }

    #[test]
    fn isometry_paths_are_isometries(scale in 1usize..=4, offset in 0usize..=3, t in 0.0f64..=1.0, cols in 1usize..=64) {
        let path = IsometryPath::new(scale, offset).unwrap();
        prop_assert!(path.isometry_defect(t, cols) <= 1e-12);
    }

    #[test]
    fn f_func_is_bounded_and_monotone(x in 0.0f64..10.0, dx in 0.0f64..1.0, t in 0.0f64..=1.0, delta in 0.0f64..5.0) {
        let (lo, hi) = (f_func(x, t, delta), f_func(x + dx, t, delta));
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo);
    }

    #[test]
    fn links_are_conjugate_symmetric(a in (0.0f64..3.1, 0.0f64..std::f64::consts::TAU), b in (0.0f64..3.1, 0.0f64..std::f64::consts::TAU)) {
        let t = tol();
        let (p, q) = sphere_state(a.0, a.1);
        let (r, s) = sphere_state(b.0, b.1);
        let x = psi2_tensor(p, q, &t).unwrap();
        let y = psi2_tensor(r, s, &t).unwrap();
        match (link_variable(&x, &y, &t), link_variable(&y, &x, &t)) {
            (Ok(u), Ok(v)) => {
                prop_assert!((u - v.conj()).norm() <= 1e-12);
                prop_assert!((u.norm() - 1.0).abs() <= 1e-12);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "link defined in one direction only"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn retraction_lowers_rank(chi in 2usize..=3, seed in any::<u64>()) {
        let t = tol();
        let (a, mut rng) = sample(chi * chi, chi + 1, chi, seed);
        prop_assert!(in_n(&a, &t).unwrap());
        prop_assert!(retract(&a, 0.0, &t).unwrap().tensor.distance(&a) <= 1e-12);
        let end = retract(&a, 1.0, &t).unwrap().tensor;
        prop_assert!(canonical_decompose(&end, &t).unwrap().chi < chi);
        let g = GaugeMove::random(&a, &t, &mut rng).unwrap();
        let b = apply_gauge(&a, &g, &t).unwrap();
        let s = 0.6;
        let (ha, hb) = (retract(&a, s, &t).unwrap().tensor, retract(&b, s, &t).unwrap().tensor);
        prop_assert!(gauge_equivalent(&ha, &hb, &t).unwrap());
    }

    #[test]
    fn contraction_stays_in_e((d, bond, chi) in dims(2), seed in any::<u64>(), s in 0.0f64..=1.0) {
        let t = tol();
        let (a, _) = sample(d, bond, chi, seed);
        let h = contraction_path(&a, s, &t).unwrap();
        prop_assert!(canonical_decompose(&h, &t).is_ok());
    }

    #[test]
    fn vertex_phases_leave_curvature_unchanged(seed in any::<u64>()) {
        let t = tol();
        let mesh = Mesh2::sphere(8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base: Vec<MpsTensor> = mesh.vertices.iter().map(|p| {
            let (x, y) = sphere_state(p.theta, p.phi);
            psi2_tensor(x, y, &t).unwrap()
        }).collect();
        let phased: Vec<MpsTensor> = base.iter().map(|a| {
            let z = linalg::random_phase(&mut rng);
            a.map(|m| m * z)
        }).collect();
        let labels = vec!["all".to_string(); base.len()];
        let f0 = curvature_report(&custom_family(base, labels.clone()).unwrap(), &mesh, &t).unwrap();
        let f1 = curvature_report(&custom_family(phased, labels).unwrap(), &mesh, &t).unwrap();
        for (p, q) in f0.plaquettes.iter().zip(&f1.plaquettes) {
            prop_assert!((p.curvature - q.curvature).abs() <= 1e-12);
        }
    }

    #[test]
    fn reversing_orientation_negates_curvature(w4 in -0.45f64..0.45) {
        let t = tol();
        let mesh = Mesh2::sphere(10, 10).unwrap();
        let fam = pump_slice_family(w4).unwrap();
        let f = curvature_report(&fam, &mesh, &t).unwrap();
        let r = curvature_report(&fam, &mesh.reversed(), &t).unwrap();
        prop_assert!((f.total + r.total).abs() <= 1e-12);
    }
}

/// Perturbing an element of `E(d, D, χ₀)` by `1e-3` keeps `σ(L(Ā))` inside
/// `[0, ε) ∪ (λ_{χ₀}(L(Ā₀)) − ε, ∞)` with `ε = 0.1`.
#[test]
fn spectral_gap_witness() {
    let t = tol();
    let eps = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (d, bond, chi0) in [(4, 3, 2), (4, 4, 2), (9, 4, 3), (2, 3, 1)] {
        for _ in 0..10 {
            let a0 = random_in_e(d, bond, chi0, &t, &mut rng).unwrap();
            let lower = |a: &MpsTensor| {
                let q = range_projection(a, &t).unwrap();
                linalg::eigh_desc(&l_matrix(&a.map(|m| &q * m))).0
            };
            let lam_chi0 = lower(&a0)[chi0 - 1];
            let noise: Vec<CMat> = (0..d).map(|_| linalg::random_gaussian(bond, bond, &mut rng)).collect();
            let scale = 1e-3 / noise.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
            let a = MpsTensor::new(
                a0.mats()
                    .iter()
                    .zip(&noise)
                    .map(|(m, e)| m + e * c(scale, 0.0))
                    .collect(),
            )
            .unwrap();
            for x in lower(&a) {
                assert!(
                    x < eps || x > lam_chi0 - eps,
                    "eigenvalue {x} inside the gap (λ_χ₀ = {lam_chi0})"
                );
            }
        }
    }
}

#[test]
fn psi2_chern_is_mesh_independent() {
    let t = tol();
    for n in [16, 32, 64] {
        let f = curvature_report(&psi2_family(), &Mesh2::sphere(n, n).unwrap(), &t).unwrap();
        assert_eq!(f.nearest_integer().0, 1);
        assert!(f.flagged.is_empty());
        assert!((f.total_curvature() / std::f64::consts::TAU - f.total).abs() < 1e-15);
    }
}

#[test]
fn link_phase_covariance() {
    let t = tol();
    let (p, q) = sphere_state(1.0, 2.0);
    let (r, s) = sphere_state(1.2, 2.3);
    let a = psi2_tensor(p, q, &t).unwrap();
    let b = psi2_tensor(r, s, &t).unwrap();
    let base = link_variable(&a, &b, &t).unwrap();
    for alpha in [0.3, 1.7, -2.9] {
        let z = C64::from_polar(1.0, alpha);
        assert!((link_variable(&a.map(|m| m * z), &b, &t).unwrap() - base * z).norm() < 1e-13);
        assert!((link_variable(&a, &b.map(|m| m * z), &t).unwrap() - base * z.conj()).norm() < 1e-13);
    }
}
