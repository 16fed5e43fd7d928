//! MPS tensors, canonical forms, essential rank and gauge equivalence.
//!
//! A tensor `A = (A^1, …, A^d)` of `D×D` matrices lies in `E(d, D, χ)` when a
//! unitary `X` brings it to the block form `X [[K, 0], [M, 0]] X*` with an
//! injective, right-normalized `χ×χ` core `K`. Everything here decides those
//! properties numerically under the thresholds in [`Tolerances`].

use rand::Rng;

use crate::error::{MpsError, Result};
use crate::linalg::{self, c, CMat};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct MpsTensor {
    mats: Vec<CMat>,
}

impl MpsTensor {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| MpsError::InvalidTensor("physical dimension must be at least 1".into()))?;
        let bond = first.nrows();
        if bond == 0 {
            return Err(MpsError::InvalidTensor("bond dimension must be at least 1".into()));
        }
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != bond || m.ncols() != bond {
                return Err(MpsError::InvalidTensor(format!(
                    "matrix {i} is {}x{}, expected {bond}x{bond}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(MpsError::InvalidTensor(format!("matrix {i} has non-finite entries")));
            }
        }
        Ok(Self { mats })
    }

    pub fn zeros(d: usize, bond: usize) -> Self {
        assert!(d >= 1 && bond >= 1, "dimensions must be positive");
        Self {
            mats: vec![linalg::zeros(bond, bond); d],
        }
    }

    /// The scalar tensor `(1)` with `d = D = 1`.
    pub fn unit() -> Self {
        Self {
            mats: vec![linalg::identity(1)],
        }
    }

    pub fn d(&self) -> usize {
        self.mats.len()
    }

    pub fn bond(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn into_mats(self) -> Vec<CMat> {
        self.mats
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self {
            mats: self.mats.iter().map(f).collect(),
        }
    }

    /// `U A^i U*` for every `i`.
    pub fn conjugate_by(&self, u: &CMat) -> Self {
        let ud = u.adjoint();
        self.map(|m| u * m * &ud)
    }

    /// Embeds into larger dimensions by appending zero matrices and zero
    /// trailing rows/columns.
    pub fn pad(&self, d: usize, bond: usize) -> Result<Self> {
        if d < self.d() || bond < self.bond() {
            return Err(MpsError::DimensionMismatch(format!(
                "cannot pad ({}, {}) down to ({d}, {bond})",
                self.d(),
                self.bond()
            )));
        }
        let old = self.bond();
        let mut mats: Vec<CMat> = self
            .mats
            .iter()
            .map(|m| {
                let mut big = linalg::zeros(bond, bond);
                big.view_mut((0, 0), (old, old)).copy_from(m);
                big
            })
            .collect();
        mats.resize(d, linalg::zeros(bond, bond));
        Ok(Self { mats })
    }

    /// Frobenius distance after padding both tensors to common dimensions.
    pub fn distance(&self, other: &Self) -> f64 {
        let d = self.d().max(other.d());
        let bond = self.bond().max(other.bond());
        let a = self.pad(d, bond).expect("padding up never fails");
        let b = other.pad(d, bond).expect("padding up never fails");
        a.mats
            .iter()
            .zip(&b.mats)
            .map(|(x, y)| (x - y).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.mats.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalDecomposition {
    pub x: CMat,
    pub k: Vec<CMat>,
    pub m: Vec<CMat>,
    pub chi: usize,
}

impl CanonicalDecomposition {
    /// `X [[K, 0], [M, 0]] X*`.
    pub fn reassemble(&self) -> MpsTensor {
        let bond = self.x.nrows();
        let chi = self.chi;
        let xd = self.x.adjoint();
        let mats = self
            .k
            .iter()
            .zip(&self.m)
            .map(|(k, m)| {
                let mut block = linalg::zeros(bond, bond);
                block.view_mut((0, 0), (chi, chi)).copy_from(k);
                if bond > chi {
                    block.view_mut((chi, 0), (bond - chi, chi)).copy_from(m);
                }
                &self.x * block * &xd
            })
            .collect();
        MpsTensor { mats }
    }

    pub fn core(&self) -> MpsTensor {
        MpsTensor { mats: self.k.clone() }
    }
}

/// `λ Z (A + Ã) Z*`; `Ã` must live in the lower-left block relative to `Q(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeMove {
    pub lambda: num_complex::Complex64,
    pub z: CMat,
    pub atilde: MpsTensor,
}

impl GaugeMove {
    pub fn identity(d: usize, bond: usize) -> Self {
        Self {
            lambda: c(1.0, 0.0),
            z: linalg::identity(bond),
            atilde: MpsTensor::zeros(d, bond),
        }
    }

    /// A random move compatible with `a`: Haar `Z`, uniform phase, Gaussian
    /// filler projected to `(1 − Q) · Q`.
    pub fn random(a: &MpsTensor, tol: &Tolerances, rng: &mut impl Rng) -> Result<Self> {
        let q = range_projection(a, tol)?;
        let bond = a.bond();
        let comp = linalg::identity(bond) - &q;
        let mats = (0..a.d())
            .map(|_| &comp * linalg::random_gaussian(bond, bond, rng) * &q)
            .collect();
        Ok(Self {
            lambda: linalg::random_phase(rng),
            z: linalg::random_unitary(bond, rng),
            atilde: MpsTensor { mats },
        })
    }
}

pub fn l_matrix(a: &MpsTensor) -> CMat {
    a.mats
        .iter()
        .fold(linalg::zeros(a.bond(), a.bond()), |acc, m| acc + m.adjoint() * m)
}

pub fn r_matrix(a: &MpsTensor) -> CMat {
    a.mats
        .iter()
        .fold(linalg::zeros(a.bond(), a.bond()), |acc, m| acc + m * m.adjoint())
}

/// Numerical rank of a descending PSD spectrum under the relative cutoff.
pub(crate) fn spectral_rank(values: &[f64], eps_rank: f64) -> Result<usize> {
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(0);
    }
    let cutoff = eps_rank * top;
    for &v in values {
        if v > 0.5 * cutoff && v < 2.0 * cutoff {
            return Err(MpsError::AmbiguousRank { eigenvalue: v, cutoff });
        }
    }
    Ok(values.iter().filter(|&&v| v > cutoff).count())
}

pub fn range_projection(a: &MpsTensor, tol: &Tolerances) -> Result<CMat> {
    let (values, vectors) = linalg::eigh_desc(&l_matrix(a));
    let rank = spectral_rank(&values, tol.eps_rank)?;
    let v = vectors.columns(0, rank);
    Ok(v * v.adjoint())
}

pub fn essential_rank(a: &MpsTensor, tol: &Tolerances) -> Result<usize> {
    Ok(canonical_decompose(a, tol)?.chi)
}

/// The `K^i` span `M_χ(ℂ)`: the `d × χ²` matrix of vectorized `K^i` has full
/// column rank.
pub fn is_injective(k: &[CMat], tol: &Tolerances) -> bool {
    let Some(first) = k.first() else { return false };
    let chi = first.nrows();
    if chi == 0 || k.iter().any(|m| m.nrows() != chi || m.ncols() != chi) || k.len() < chi * chi {
        return false;
    }
    let mut stacked = linalg::zeros(k.len(), chi * chi);
    for (i, m) in k.iter().enumerate() {
        for (col, z) in m.iter().enumerate() {
            stacked[(i, col)] = *z;
        }
    }
    let s = linalg::singular_values(&stacked);
    let top = s[0];
    top > 0.0 && s.iter().filter(|&&x| x * x > tol.eps_rank * top * top).count() == chi * chi
}

pub fn right_normalization_residual(k: &[CMat]) -> f64 {
    let chi = k[0].nrows();
    let sum = k.iter().fold(linalg::zeros(chi, chi), |acc, m| acc + m * m.adjoint());
    (sum - linalg::identity(chi)).norm()
}

/// Range-first eigenbasis of `L(A)` and the blocks of `X* A X`, without any
/// membership checks.
fn split_blocks(a: &MpsTensor, tol: &Tolerances) -> Result<CanonicalDecomposition> {
    let (values, x) = linalg::eigh_desc(&l_matrix(a));
    let chi = spectral_rank(&values, tol.eps_rank)?;
    if chi == 0 {
        return Err(MpsError::NotInE("tensor is zero".into()));
    }
    let bond = a.bond();
    let xd = x.adjoint();
    let (mut k, mut m) = (Vec::with_capacity(a.d()), Vec::with_capacity(a.d()));
    for mat in &a.mats {
        let b = &xd * mat * &x;
        k.push(b.view((0, 0), (chi, chi)).into_owned());
        m.push(b.view((chi, 0), (bond - chi, chi)).into_owned());
    }
    Ok(CanonicalDecomposition { x, k, m, chi })
}

pub fn canonical_decompose(a: &MpsTensor, tol: &Tolerances) -> Result<CanonicalDecomposition> {
    let dec = split_blocks(a, tol)?;
    let recon = dec.reassemble().distance(a);
    if recon > tol.tol_recon {
        return Err(MpsError::NotInE(format!(
            "block form reproduces the tensor only to {recon:e}"
        )));
    }
    if !is_injective(&dec.k, tol) {
        return Err(MpsError::NotInE(format!("core of rank {} is not injective", dec.chi)));
    }
    let residual = right_normalization_residual(&dec.k);
    if residual > tol.tol_norm {
        return Err(MpsError::NotInE(format!(
            "core is not right-normalized (residual {residual:e})"
        )));
    }
    Ok(dec)
}

/// Leading eigenvalue (largest modulus) of `B ↦ Σ K_a^i B K_b^{i*}`; missing
/// physical slots count as zero matrices.
pub fn mixed_leading_eigenvalue(ka: &[CMat], kb: &[CMat]) -> Result<num_complex::Complex64> {
    let (ca, cb) = (ka[0].nrows(), kb[0].nrows());
    if ca != cb {
        return Err(MpsError::RankMismatch { left: ca, right: cb });
    }
    let mut mixed = linalg::zeros(ca * ca, ca * ca);
    for (x, y) in ka.iter().zip(kb) {
        mixed += linalg::kron(&y.map(|z| z.conj()), x);
    }
    Ok(linalg::eigvals_by_modulus(&mixed)[0])
}

/// Modulus of [`mixed_leading_eigenvalue`]: 1 for gauge-related cores,
/// strictly smaller otherwise.
pub fn fidelity_per_site(ka: &[CMat], kb: &[CMat]) -> Result<f64> {
    Ok(mixed_leading_eigenvalue(ka, kb)?.norm())
}

/// Rescales and conjugates the core so that `Σ K K* = 1`, keeping the block
/// form. The physical state is unchanged up to normalization.
pub fn right_normalize(a: &MpsTensor, tol: &Tolerances) -> Result<MpsTensor> {
    let dec = split_blocks(a, tol)?;
    if !is_injective(&dec.k, tol) {
        return Err(MpsError::NotInE(format!("core of rank {} is not injective", dec.chi)));
    }
    let chi = dec.chi;
    let mut map = linalg::zeros(chi * chi, chi * chi);
    for k in &dec.k {
        map += linalg::kron(&k.map(|z| z.conj()), k);
    }
    let spectrum = linalg::eigvals_by_modulus(&map);
    let lead = spectrum[0];
    if let Some(second) = spectrum.get(1) {
        let ratio = second.norm() / lead.norm();
        if ratio > 1.0 - tol.tol_gap {
            return Err(MpsError::DegenerateLeadingEigenvalue { ratio });
        }
    }
    let (_, v) = linalg::null_vector(&(map - linalg::identity(chi * chi) * lead));
    let mut rho = linalg::hermitian_part(&linalg::unvectorize(&v, chi));
    if rho.trace().re < 0.0 {
        rho = -rho;
    }
    let (values, vectors) = linalg::eigh_desc(&rho);
    let (top, bottom) = (values[0], values[chi - 1]);
    if bottom <= tol.eps_rank * top {
        return Err(MpsError::NotInE(format!(
            "Frobenius–Perron eigenvector is singular (min eigenvalue {bottom:e})"
        )));
    }
    let sqrt_rho = linalg::herm_from_parts(&values.iter().map(|x| x.sqrt()).collect::<Vec<_>>(), &vectors);
    let inv_sqrt = linalg::herm_from_parts(&values.iter().map(|x| x.sqrt().recip()).collect::<Vec<_>>(), &vectors);
    let scale = c(lead.re.recip().sqrt(), 0.0);
    let k = dec.k.iter().map(|k| &inv_sqrt * k * &sqrt_rho * scale).collect();
    let m = dec.m.iter().map(|m| m * &sqrt_rho * scale).collect();
    Ok(CanonicalDecomposition { k, m, ..dec }.reassemble())
}

pub fn apply_gauge(a: &MpsTensor, g: &GaugeMove, tol: &Tolerances) -> Result<MpsTensor> {
    if (g.lambda.norm() - 1.0).abs() > tol.tol_unitary {
        return Err(MpsError::InvalidParameter(format!(
            "gauge phase has modulus {}",
            g.lambda.norm()
        )));
    }
    if !linalg::is_unitary(&g.z, tol.tol_unitary) || g.z.nrows() != a.bond() {
        return Err(MpsError::InvalidParameter("Z must be a D×D unitary".into()));
    }
    if g.atilde.d() != a.d() || g.atilde.bond() != a.bond() {
        return Err(MpsError::DimensionMismatch(format!(
            "filler is ({}, {}), tensor is ({}, {})",
            g.atilde.d(),
            g.atilde.bond(),
            a.d(),
            a.bond()
        )));
    }
    let q = range_projection(a, tol)?;
    let residual = g
        .atilde
        .mats
        .iter()
        .map(|t| (&q * t).norm().max((t * &q - t).norm()))
        .fold(0.0, f64::max);
    if residual > tol.tol_norm {
        return Err(MpsError::IncompatibleGaugeMove { residual });
    }
    let zd = g.z.adjoint();
    let mats = a
        .mats
        .iter()
        .zip(&g.atilde.mats)
        .map(|(m, t)| &g.z * (m + t) * &zd * g.lambda)
        .collect();
    Ok(MpsTensor { mats })
}

/// Equal essential ranks and unit fidelity per site between the cores.
pub fn gauge_equivalent(a: &MpsTensor, b: &MpsTensor, tol: &Tolerances) -> Result<bool> {
    let da = canonical_decompose(a, tol)?;
    let db = canonical_decompose(b, tol)?;
    if da.chi != db.chi {
        return Ok(false);
    }
    Ok(fidelity_per_site(&da.k, &db.k)? >= 1.0 - tol.tol_fid)
}

/// A Haar-random injective, right-normalized `χ×χ` core with `d` matrices.
pub fn random_core(d: usize, chi: usize, tol: &Tolerances, rng: &mut impl Rng) -> Result<Vec<CMat>> {
    if d < chi * chi {
        return Err(MpsError::InvalidParameter(format!(
            "an injective core of rank {chi} needs d ≥ {}",
            chi * chi
        )));
    }
    let raw = MpsTensor::new((0..d).map(|_| linalg::random_gaussian(chi, chi, rng)).collect())?;
    Ok(right_normalize(&raw, tol)?.into_mats())
}

/// `X [[K, 0], [M, 0]] X*` with a random core, Gaussian filler and Haar `X`.
pub fn random_in_e(d: usize, bond: usize, chi: usize, tol: &Tolerances, rng: &mut impl Rng) -> Result<MpsTensor> {
    if chi == 0 || chi > bond {
        return Err(MpsError::InvalidParameter(format!(
            "need 1 ≤ χ ≤ D, got χ={chi}, D={bond}"
        )));
    }
    let k = random_core(d, chi, tol, rng)?;
    let m = (0..d).map(|_| linalg::random_gaussian(bond - chi, chi, rng)).collect();
    let x = linalg::random_unitary(bond, rng);
    Ok(CanonicalDecomposition { x, k, m, chi }.reassemble())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m2(a: [[f64; 2]; 2]) -> CMat {
        CMat::from_fn(2, 2, |i, j| c(a[i][j], 0.0))
    }

    /// AKLT interpolation at parameter g, built locally so the tests are
    /// independent of the families module.
    fn aklt_at(g: f64) -> MpsTensor {
        let r23 = (2.0f64 / 3.0).sqrt() * g;
        let r13 = (1.0f64 / 3.0).sqrt() * g;
        let one = (1.0 - g * g).sqrt();
        MpsTensor::new(vec![
            m2([[one, 0.0], [0.0, one]]),
            m2([[0.0, r23], [0.0, 0.0]]),
            m2([[-r13, 0.0], [0.0, r13]]),
            m2([[0.0, 0.0], [-r23, 0.0]]),
        ])
        .unwrap()
    }

    fn aklt() -> MpsTensor {
        aklt_at(0.5)
    }

    fn ktilde() -> MpsTensor {
        let z = linalg::zeros(2, 2);
        MpsTensor::new(vec![m2([[1.0, 0.0], [0.0, 0.0]]), z.clone(), z.clone(), z]).unwrap()
    }

    #[test]
    fn rejects_bad_tensors() {
        assert!(MpsTensor::new(vec![]).is_err());
        assert!(MpsTensor::new(vec![linalg::zeros(2, 3)]).is_err());
        assert!(MpsTensor::new(vec![linalg::zeros(2, 2), linalg::zeros(3, 3)]).is_err());
        let mut bad = linalg::zeros(1, 1);
        bad[(0, 0)] = c(f64::NAN, 0.0);
        assert!(MpsTensor::new(vec![bad]).is_err());
    }

    #[test]
    fn l_and_r_examples() {
        assert_eq!(l_matrix(&MpsTensor::unit()), linalg::identity(1));
        assert!((l_matrix(&aklt()) - linalg::identity(2)).norm() < 1e-15);
        assert!((r_matrix(&aklt()) - linalg::identity(2)).norm() < 1e-15);
        let diag = m2([[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(l_matrix(&ktilde()), diag);
        assert_eq!(r_matrix(&ktilde()), diag);
    }

    #[test]
    fn ranks() {
        let tol = Tolerances::default();
        assert_eq!(essential_rank(&aklt(), &tol).unwrap(), 2);
        assert_eq!(essential_rank(&ktilde(), &tol).unwrap(), 1);
        assert_eq!(essential_rank(&MpsTensor::unit(), &tol).unwrap(), 1);
        let q = range_projection(&ktilde(), &tol).unwrap();
        assert!((q - m2([[1.0, 0.0], [0.0, 0.0]])).norm() < 1e-15);
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        let tol = Tolerances::default();
        let mut a = linalg::zeros(2, 2);
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(tol.eps_rank.sqrt(), 0.0);
        let t = MpsTensor::new(vec![a]).unwrap();
        assert!(matches!(
            range_projection(&t, &tol),
            Err(MpsError::AmbiguousRank { .. })
        ));
    }

    #[test]
    fn injectivity() {
        let tol = Tolerances::default();
        assert!(is_injective(&[linalg::identity(1)], &tol));
        assert!(is_injective(aklt().mats(), &tol));
        // At g = 1 the first matrix vanishes and the other three span only
        // a 3-dimensional subspace of M_2.
        assert!(!is_injective(aklt_at(1.0).mats(), &tol));
        assert!(!is_injective(&[m2([[1.0, 0.0], [0.0, -1.0]])], &tol));
    }

    #[test]
    fn decomposition_round_trip() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_in_e(4, 3, 2, &tol, &mut rng).unwrap();
        let dec = canonical_decompose(&a, &tol).unwrap();
        assert_eq!(dec.chi, 2);
        assert!(linalg::unitarity_defect(&dec.x) < 1e-12);
        assert!(dec.reassemble().distance(&a) < 1e-12);
        assert!(right_normalization_residual(&dec.k) < 1e-12);
        let q = range_projection(&a, &tol).unwrap();
        assert!((q.trace() - c(2.0, 0.0)).norm() < 1e-12);
        let unit = canonical_decompose(&MpsTensor::unit(), &tol).unwrap();
        assert_eq!(unit.chi, 1);
        assert!(unit.m[0].is_empty());
    }

    #[test]
    fn unnormalized_tensor_is_not_in_e() {
        let tol = Tolerances::default();
        let doubled = aklt().map(|m| m * c(2.0, 0.0));
        assert!(matches!(canonical_decompose(&doubled, &tol), Err(MpsError::NotInE(_))));
        let fixed = right_normalize(&doubled, &tol).unwrap();
        assert!(gauge_equivalent(&fixed, &aklt(), &tol).unwrap());
        assert!(right_normalize(&aklt(), &tol).unwrap().distance(&aklt()) < 1e-10);
    }

    #[test]
    fn right_normalize_random_perturbation() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_in_e(5, 3, 2, &tol, &mut rng).unwrap();
        let dec = canonical_decompose(&a, &tol).unwrap();
        let k = dec
            .k
            .iter()
            .map(|k| k + linalg::random_gaussian(2, 2, &mut rng) * c(0.1, 0.0));
        let perturbed = CanonicalDecomposition {
            k: k.map(|k| k * c(1.7, 0.0)).collect(),
            ..dec
        }
        .reassemble();
        let fixed = right_normalize(&perturbed, &tol).unwrap();
        assert_eq!(canonical_decompose(&fixed, &tol).unwrap().chi, 2);
    }

    #[test]
    fn gauge_moves() {
        let tol = Tolerances::default();
        let a = aklt();
        let id = GaugeMove::identity(4, 2);
        assert_eq!(apply_gauge(&a, &id, &tol).unwrap(), a);
        let phase = GaugeMove {
            lambda: c(0.0, 1.0),
            ..id
        };
        let b = apply_gauge(&a, &phase, &tol).unwrap();
        assert!(b.distance(&a.map(|m| m * c(0.0, 1.0))) < 1e-15);
        assert!(gauge_equivalent(&a, &b, &tol).unwrap());
    }

    #[test]
    fn filler_replacement() {
        // χ = 1, D = 2: replace M by N through the filler.
        let tol = Tolerances::default();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let block = |k: f64, m: f64| m2([[k, 0.0], [m, 0.0]]);
        let a = MpsTensor::new(vec![block(s, 0.3), block(s, -0.2)]).unwrap();
        let target = MpsTensor::new(vec![block(s, 1.1), block(s, 0.5)]).unwrap();
        let atilde = MpsTensor::new(vec![block(0.0, 0.8), block(0.0, 0.7)]).unwrap();
        let g = GaugeMove {
            atilde,
            ..GaugeMove::identity(2, 2)
        };
        let b = apply_gauge(&a, &g, &tol).unwrap();
        assert!(b.distance(&target) < 1e-15);
        assert!(gauge_equivalent(&a, &b, &tol).unwrap());
        let bad = GaugeMove {
            atilde: MpsTensor::new(vec![m2([[0.0, 1.0], [0.0, 0.0]]), linalg::zeros(2, 2)]).unwrap(),
            ..GaugeMove::identity(2, 2)
        };
        assert!(matches!(
            apply_gauge(&a, &bad, &tol),
            Err(MpsError::IncompatibleGaugeMove { .. })
        ));
    }

    #[test]
    fn random_gauge_moves_preserve_rank_and_equivalence() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (d, bond, chi) in [(2, 3, 1), (4, 3, 2), (9, 4, 3)] {
            let a = random_in_e(d, bond, chi, &tol, &mut rng).unwrap();
            let g = GaugeMove::random(&a, &tol, &mut rng).unwrap();
            let b = apply_gauge(&a, &g, &tol).unwrap();
            assert_eq!(essential_rank(&b, &tol).unwrap(), chi);
            assert!(gauge_equivalent(&a, &b, &tol).unwrap());
            assert!(gauge_equivalent(&b, &a, &tol).unwrap());
            let qa = range_projection(&a, &tol).unwrap();
            let qb = range_projection(&b, &tol).unwrap();
            assert!((qb - &g.z * qa * g.z.adjoint()).norm() < 1e-10);
        }
    }

    #[test]
    fn different_cores_are_not_equivalent() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_in_e(4, 2, 2, &tol, &mut rng).unwrap();
        let b = random_in_e(4, 2, 2, &tol, &mut rng).unwrap();
        assert!(!gauge_equivalent(&a, &b, &tol).unwrap());
        assert!(!gauge_equivalent(&a, &ktilde(), &tol).unwrap());
    }

    #[test]
    fn padding_preserves_membership() {
        let tol = Tolerances::default();
        let p = aklt().pad(6, 3).unwrap();
        assert_eq!((p.d(), p.bond()), (6, 3));
        assert_eq!(essential_rank(&p, &tol).unwrap(), 2);
        assert!(gauge_equivalent(&p, &aklt(), &tol).unwrap());
        assert!(aklt().pad(3, 2).is_err());
    }
}
