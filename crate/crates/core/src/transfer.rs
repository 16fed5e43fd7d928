//! Transfer operators of a right-normalized core and the translation-invariant
//! state they generate.
//!
//! Matrices of maps on `M_χ` act on column-major vectorizations, so
//! `B ↦ P B Q` is `Qᵀ ⊗ P`.

use num_complex::Complex64 as C64;

use crate::error::{MpsError, Result};
use crate::linalg::{self, c, CMat};
use crate::mps_core::{right_normalization_residual, MpsTensor};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFixedPoint {
    pub t: CMat,
    /// Eigenvalues of `E_1`, descending modulus.
    pub spectrum: Vec<C64>,
}

/// A product observable `C_1 ⊗ ⋯ ⊗ C_n` on `n` consecutive sites.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowObservable {
    factors: Vec<CMat>,
}

impl WindowObservable {
    pub fn new(factors: Vec<CMat>) -> Result<Self> {
        let d = factors
            .first()
            .ok_or_else(|| MpsError::InvalidParameter("window must contain at least one site".into()))?
            .nrows();
        for (k, f) in factors.iter().enumerate() {
            if f.nrows() != d || f.ncols() != d {
                return Err(MpsError::DimensionMismatch(format!(
                    "factor {k} is {}x{}, expected {d}x{d}",
                    f.nrows(),
                    f.ncols()
                )));
            }
            if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(MpsError::InvalidParameter(format!("factor {k} has non-finite entries")));
            }
        }
        Ok(Self { factors })
    }

    pub fn single(c: CMat) -> Result<Self> {
        Self::new(vec![c])
    }

    pub fn identity(d: usize, n: usize) -> Self {
        Self {
            factors: vec![linalg::identity(d); n],
        }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn d(&self) -> usize {
        self.factors[0].nrows()
    }

    pub fn factors(&self) -> &[CMat] {
        &self.factors
    }

    /// Identities on `left` sites before and `right` sites after.
    pub fn padded(&self, left: usize, right: usize) -> Self {
        let id = linalg::identity(self.d());
        let mut factors = vec![id.clone(); left];
        factors.extend(self.factors.iter().cloned());
        factors.extend(std::iter::repeat_n(id, right));
        Self { factors }
    }
}

fn core_dims(k: &[CMat]) -> Result<usize> {
    let chi = k
        .first()
        .ok_or_else(|| MpsError::InvalidTensor("core has no matrices".into()))?
        .nrows();
    if chi == 0 || k.iter().any(|m| m.nrows() != chi || m.ncols() != chi) {
        return Err(MpsError::InvalidTensor(
            "core matrices must be square of equal size".into(),
        ));
    }
    Ok(chi)
}

/// Matrix of `B ↦ Σ_{ij} C_ij K^{i*} B K^j`.
pub fn transfer_matrix(k: &[CMat], cobs: &CMat) -> Result<CMat> {
    let chi = core_dims(k)?;
    let d = k.len();
    if cobs.nrows() != d || cobs.ncols() != d {
        return Err(MpsError::DimensionMismatch(format!(
            "observable is {}x{}, core has d = {d}",
            cobs.nrows(),
            cobs.ncols()
        )));
    }
    let mut out = linalg::zeros(chi * chi, chi * chi);
    for (i, ki) in k.iter().enumerate() {
        let ki_star = ki.adjoint();
        for (j, kj) in k.iter().enumerate() {
            let cij = cobs[(i, j)];
            if cij != c(0.0, 0.0) {
                out += linalg::kron(&kj.transpose(), &ki_star) * cij;
            }
        }
    }
    Ok(out)
}

pub fn transfer_spectrum(k: &[CMat]) -> Result<Vec<C64>> {
    let e1 = transfer_matrix(k, &linalg::identity(k.len()))?;
    Ok(linalg::eigvals_by_modulus(&e1))
}

fn check_normalized(k: &[CMat], tol: &Tolerances) -> Result<()> {
    let residual = right_normalization_residual(k);
    if residual > tol.tol_norm {
        return Err(MpsError::NotRightNormalized { residual });
    }
    Ok(())
}

/// The unique positive trace-one `T` with `E_1(T) = T`.
pub fn fixed_point(k: &[CMat], tol: &Tolerances) -> Result<TransferFixedPoint> {
    let chi = core_dims(k)?;
    check_normalized(k, tol)?;
    let e1 = transfer_matrix(k, &linalg::identity(k.len()))?;
    let spectrum = linalg::eigvals_by_modulus(&e1);
    if let Some(second) = spectrum.get(1) {
        let ratio = second.norm() / spectrum[0].norm();
        if ratio > 1.0 - tol.tol_gap {
            return Err(MpsError::DegenerateLeadingEigenvalue { ratio });
        }
    }
    let (_, v) = linalg::null_vector(&(e1 - linalg::identity(chi * chi)));
    let mut t = linalg::hermitian_part(&linalg::unvectorize(&v, chi));
    let tr = t.trace().re;
    t /= c(tr, 0.0);
    let (values, vectors) = linalg::eigh_desc(&t);
    let min = values[chi - 1];
    if min < -tol.tol_norm {
        return Err(MpsError::NotPositive { min_eigenvalue: min });
    }
    let clipped: Vec<f64> = values.iter().map(|&x| x.max(0.0)).collect();
    let mut t = linalg::herm_from_parts(&clipped, &vectors);
    let tr = t.trace().re;
    t /= c(tr, 0.0);
    Ok(TransferFixedPoint { t, spectrum })
}

/// `ω(C_1 ⊗ ⋯ ⊗ C_n) = tr (E_{C_n} ∘ ⋯ ∘ E_{C_1})(T)`.
pub fn expectation(k: &[CMat], fp: &TransferFixedPoint, obs: &WindowObservable) -> Result<C64> {
    let chi = core_dims(k)?;
    if obs.d() != k.len() {
        return Err(MpsError::DimensionMismatch(format!(
            "observable acts on d = {}, core has d = {}",
            obs.d(),
            k.len()
        )));
    }
    if fp.t.nrows() != chi {
        return Err(MpsError::DimensionMismatch(
            "fixed point does not match the core".into(),
        ));
    }
    let mut b = fp.t.clone();
    for cobs in obs.factors() {
        let mut next = linalg::zeros(chi, chi);
        for (j, kj) in k.iter().enumerate() {
            let left = k.iter().enumerate().fold(linalg::zeros(chi, chi), |acc, (i, ki)| {
                acc + ki.adjoint() * cobs[(i, j)]
            });
            next += left * &b * kj;
        }
        b = next;
    }
    Ok(b.trace())
}

/// Brute-force density matrix of the state restricted to `n` sites, with the
/// first site as the most significant index.
pub fn window_density_matrix(k: &[CMat], fp: &TransferFixedPoint, n: usize, tol: &Tolerances) -> Result<CMat> {
    let chi = core_dims(k)?;
    let d = k.len();
    let rows = (0..n)
        .try_fold(1usize, |acc, _| acc.checked_mul(d))
        .unwrap_or(usize::MAX);
    if rows > tol.window_cap {
        return Err(MpsError::WindowTooLarge {
            rows,
            cap: tol.window_cap,
        });
    }
    let (mu, v) = linalg::eigh_desc(&fp.t);
    let mut rho = linalg::zeros(rows, rows);
    for (alpha, &weight) in mu.iter().enumerate().take(chi) {
        if weight <= 0.0 {
            continue;
        }
        // rows_of[idx] = ⟨v_α| K^{j1} ⋯ K^{jn}
        let mut prefixes = vec![v.column(alpha).adjoint()];
        for _ in 0..n {
            prefixes = prefixes.iter().flat_map(|r| k.iter().map(move |kj| r * kj)).collect();
        }
        for beta in 0..chi {
            let vb = v.column(beta);
            let psi = linalg::CVec::from_iterator(rows, prefixes.iter().map(|r| (r * vb)[(0, 0)]));
            rho += &psi * psi.adjoint() * c(weight, 0.0);
        }
    }
    Ok(rho)
}

/// `tr(ρ · C_1 ⊗ ⋯ ⊗ C_n)` entry by entry, without materializing the
/// Kronecker product.
pub fn trace_with_product(rho: &CMat, obs: &WindowObservable) -> C64 {
    let d = obs.d();
    let n = obs.len();
    let rows = rho.nrows();
    let digits = |mut idx: usize| {
        let mut out = vec![0usize; n];
        for slot in out.iter_mut().rev() {
            *slot = idx % d;
            idx /= d;
        }
        out
    };
    let all: Vec<Vec<usize>> = (0..rows).map(digits).collect();
    let mut total = c(0.0, 0.0);
    for (i, di) in all.iter().enumerate() {
        for (j, dj) in all.iter().enumerate() {
            let r = rho[(j, i)];
            if r == c(0.0, 0.0) {
                continue;
            }
            let cij = obs
                .factors()
                .iter()
                .zip(di.iter().zip(dj))
                .fold(c(1.0, 0.0), |acc, (f, (&a, &b))| acc * f[(a, b)]);
            total += r * cij;
        }
    }
    total
}

/// `ξ = −1/ln|λ₂|` of `E_1`; 0 for `χ = 1`, infinite without a gap.
pub fn correlation_length(k: &[CMat], tol: &Tolerances) -> Result<f64> {
    let chi = core_dims(k)?;
    check_normalized(k, tol)?;
    if chi == 1 {
        return Ok(0.0);
    }
    let spectrum = transfer_spectrum(k)?;
    let lead = spectrum[0].norm();
    if (lead - 1.0).abs() > tol.tol_norm {
        return Err(MpsError::NotRightNormalized {
            residual: (lead - 1.0).abs(),
        });
    }
    let second = spectrum[1].norm();
    if second >= 1.0 - tol.tol_gap {
        return Ok(f64::INFINITY);
    }
    if second == 0.0 {
        return Ok(0.0);
    }
    Ok(-1.0 / second.ln())
}

/// `f(A) = |Σ_i tr A^i|`, invariant under gauge transformations.
pub fn trace_invariant(a: &MpsTensor) -> f64 {
    a.mats().iter().map(|m| m.trace()).sum::<C64>().norm()
}
