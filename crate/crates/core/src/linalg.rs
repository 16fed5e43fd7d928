//! Dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn hermitian_part(h: &CMat) -> CMat {
    (h + h.adjoint()) * c(0.5, 0.0)
}

/// Multiplies `v` by the unit phase that makes its largest-modulus entry real
/// and positive. Ties go to the lowest index.
pub fn fix_phase(v: &mut CVec) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    *v *= phase;
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order. Columns of the returned matrix are the phase-fixed eigenvectors.
pub fn eigh_desc(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(hermitian_part(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v: CVec = eig.eigenvectors.column(k).into_owned();
        fix_phase(&mut v);
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Applies `f` to a Hermitian matrix through its eigendecomposition.
pub fn herm_apply(h: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = eigh_desc(h);
    herm_from_parts(&values.into_iter().map(f).collect::<Vec<_>>(), &vectors)
}

/// `V diag(values) V*`.
pub fn herm_from_parts(values: &[f64], vectors: &CMat) -> CMat {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (k, &lam) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(lam);
    }
    let out = &scaled * vectors.adjoint();
    debug_assert_eq!(out.nrows(), n);
    out
}

/// All eigenvalues of a general complex matrix, sorted by descending modulus
/// (ties broken by argument for determinism).
pub fn eigvals_by_modulus(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    let mut values: Vec<C64> = (0..t.nrows()).map(|k| t[(k, k)]).collect();
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.arg().total_cmp(&a.arg())));
    values
}

/// Smallest singular value of `m` and the matching right singular vector.
pub fn null_vector(m: &CMat) -> (f64, CVec) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (k, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, s)| (k, *s))
        .expect("non-empty matrix");
    let v: CVec = v_t.row(k).adjoint();
    (sigma, v)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Column-major vectorization.
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVec, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// `‖M* M − 1‖_F`.
pub fn unitarity_defect(m: &CMat) -> f64 {
    (m.adjoint() * m - identity(m.ncols())).norm()
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    m.is_square() && unitarity_defect(m) <= tol
}

pub fn random_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let qr = random_gaussian(n, n, rng).qr();
    let (q, r) = qr.unpack();
    let mut q = q;
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

pub fn random_phase(rng: &mut impl Rng) -> C64 {
    let alpha: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    C64::from_polar(1.0, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_is_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_gaussian(5, 5, &mut rng);
        let h = &g * g.adjoint();
        let (vals, vecs) = eigh_desc(&h);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        assert!((herm_from_parts(&vals, &vecs) - &h).norm() < 1e-12);
        for k in 0..5 {
            let col = vecs.column(k);
            let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pivot = col.iter().find(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap();
            assert!(pivot.im.abs() < 1e-14 && pivot.re > 0.0);
        }
    }

    #[test]
    fn square_root_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_gaussian(4, 4, &mut rng);
        let h = &g * g.adjoint();
        let s = herm_apply(&h, f64::sqrt);
        assert!((&s * &s - &h).norm() < 1e-12);
    }

    #[test]
    fn schur_eigenvalues_match_trace_and_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_gaussian(6, 6, &mut rng);
        let ev = eigvals_by_modulus(&m);
        let tr: C64 = ev.iter().sum();
        assert!((tr - m.trace()).norm() < 1e-10);
        let det: C64 = ev.iter().product();
        assert!((det - m.determinant()).norm() < 1e-9);
        assert!(ev.windows(2).all(|w| w[0].norm() >= w[1].norm()));
    }

    #[test]
    fn null_vector_of_singular_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_gaussian(4, 3, &mut rng);
        let m = &a * a.adjoint();
        let (sigma, v) = null_vector(&m);
        assert!(sigma < 1e-12);
        assert!((&m * &v).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..6 {
            assert!(unitarity_defect(&random_unitary(n, &mut rng)) < 1e-13);
        }
    }

    #[test]
    fn kron_matches_vec_identity() {
        // vec(P B Q) = (Q^T ⊗ P) vec(B) in column-major order.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_gaussian(3, 3, &mut rng);
        let b = random_gaussian(3, 3, &mut rng);
        let q = random_gaussian(3, 3, &mut rng);
        let lhs = vectorize(&(&p * &b * &q));
        let rhs = kron(&q.transpose(), &p) * vectorize(&b);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
