//! Isometry paths, the contraction of `E` to a point, and the rank-lowering
//! deformation retraction.
//!
//! Physical and bond indices are 1-based in the formulas and in
//! [`IsometryPath::entry`]; storage is 0-based as usual.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use crate::error::{MpsError, Result};
use crate::linalg::{self, c, CMat};
use crate::mps_core::{canonical_decompose, l_matrix, r_matrix, spectral_rank, MpsTensor};
use crate::tolerances::Tolerances;

/// `s = sin(πt/2)`, `c = cos(πt/2)`, exact at the endpoints.
fn sin_cos(t: f64) -> (f64, f64) {
    if t == 0.0 {
        (0.0, 1.0)
    } else if t == 1.0 {
        (1.0, 0.0)
    } else {
        (FRAC_PI_2 * t).sin_cos()
    }
}

/// The isometry path `Γ(t)` attached to a strictly increasing affine map
/// `φ(n) = scale·n + offset` on the positive integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsometryPath {
    scale: usize,
    offset: usize,
}

impl IsometryPath {
    pub fn new(scale: usize, offset: usize) -> Result<Self> {
        if scale == 0 {
            return Err(MpsError::InvalidParameter("φ must be strictly increasing".into()));
        }
        Ok(Self { scale, offset })
    }

    /// `φ(n) = n + 1`.
    pub fn shift() -> Self {
        Self { scale: 1, offset: 1 }
    }

    /// `φ(n) = 3n + 1`.
    pub fn triple_shift() -> Self {
        Self { scale: 3, offset: 1 }
    }

    pub fn phi(&self, n: usize) -> usize {
        self.scale * n + self.offset
    }

    fn preimage(&self, a: usize) -> Option<usize> {
        if a <= self.offset || !(a - self.offset).is_multiple_of(self.scale) {
            return None;
        }
        Some((a - self.offset) / self.scale)
    }

    /// `b = φ^k(l)` with `l ∉ φ(ℕ)`.
    fn orbit_root(&self, b: usize) -> (usize, usize) {
        let (mut l, mut k) = (b, 0);
        while let Some(prev) = self.preimage(l) {
            l = prev;
            k += 1;
        }
        (k, l)
    }

    pub fn entry(&self, t: f64, a: usize, b: usize) -> f64 {
        assert!(a >= 1 && b >= 1, "indices are 1-based");
        if self.phi(b) == b {
            return if a == b { 1.0 } else { 0.0 };
        }
        let (s, cs) = sin_cos(t);
        let (k, l) = self.orbit_root(b);
        if a == l {
            return (-s).powi(k as i32) * cs;
        }
        let mut node = l;
        for j in 1..=k {
            node = self.phi(node);
            if a == node {
                return (-s).powi((k - j) as i32) * cs * cs;
            }
        }
        if a == self.phi(b) {
            return s;
        }
        0.0
    }

    /// The leading `rows × cols` block of `Γ(t)`.
    pub fn matrix(&self, t: f64, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |i, j| self.entry(t, i + 1, j + 1))
    }

    /// `‖Γ*Γ − 1‖_F` over the first `cols` columns. Rows up to `φ(cols)`
    /// carry the whole support of those columns, so nothing is truncated.
    pub fn isometry_defect(&self, t: f64, cols: usize) -> f64 {
        let g = self.matrix(t, self.phi(cols), cols);
        (g.transpose() * &g - DMatrix::identity(cols, cols)).norm()
    }
}

fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

fn unchecked_physical(a: &MpsTensor, path: &IsometryPath, t: f64) -> MpsTensor {
    let d = a.d();
    let gamma = path.matrix(t, path.phi(d), d);
    let bond = a.bond();
    let mats = (0..gamma.nrows())
        .map(|i| {
            a.mats()
                .iter()
                .enumerate()
                .fold(linalg::zeros(bond, bond), |acc, (j, m)| acc + m * c(gamma[(i, j)], 0.0))
        })
        .collect();
    MpsTensor::new(mats).expect("linear combinations of valid matrices")
}

fn unchecked_bond(a: &MpsTensor, path: &IsometryPath, t: f64) -> MpsTensor {
    let bond = a.bond();
    let delta = real_to_complex(&path.matrix(t, path.phi(bond), bond));
    let dt = delta.transpose();
    a.map(|m| &delta * m * &dt)
}

/// `B^i = Σ_j Γ_ij(t) A^j`, an element of `E(φ(d), D)`.
pub fn physical_isometry_apply(a: &MpsTensor, path: &IsometryPath, t: f64, tol: &Tolerances) -> Result<MpsTensor> {
    check_time(t)?;
    canonical_decompose(a, tol)?;
    Ok(unchecked_physical(a, path, t))
}

/// `Δ_D A^i Δ_D*` with `Δ_D` the `φ(D) × D` leading block, an element of
/// `E(d, φ(D))`.
pub fn bond_isometry_apply(a: &MpsTensor, path: &IsometryPath, t: f64, tol: &Tolerances) -> Result<MpsTensor> {
    check_time(t)?;
    canonical_decompose(a, tol)?;
    Ok(unchecked_bond(a, path, t))
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(MpsError::InvalidParameter(format!("time {t} is outside [0, 1]")));
    }
    Ok(())
}

/// `ψ(j, γ) = (j+γ−1)(j+γ−2)/2 + γ`, a bijection `ℕ×ℕ → ℕ`.
pub fn cantor_pair(j: usize, gamma: usize) -> usize {
    (j + gamma - 1) * (j + gamma - 2) / 2 + gamma
}

/// Physical dimension `max(3d+1, 3ψ(d, D))` of every tensor on the
/// contraction path (ψ is increasing in both arguments).
pub fn contraction_dims(d: usize, bond: usize) -> (usize, usize) {
    ((3 * d + 1).max(3 * cantor_pair(d, bond)), bond + 1)
}

/// Which stage of the concatenated contraction a path time falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionStage {
    /// Isometry homotopy from the identity to `E`.
    Isometry,
    /// Growing the row-one filler.
    Filler,
    /// Transfer to the rank-one core `E11`.
    Exchange,
    /// Scaling the remaining filler to zero.
    Collapse,
}

/// Stage and local time of path time `s`. The exchange stage uses
/// `t = sin²(πu/2)` so that `√t` and `√(1−t)` are smooth in `s`.
pub fn contraction_stage(s: f64) -> (ContractionStage, f64) {
    if s <= 0.25 {
        (ContractionStage::Isometry, 4.0 * s)
    } else if s <= 0.5 {
        (ContractionStage::Filler, 4.0 * s - 1.0)
    } else if s <= 0.75 {
        let u = 4.0 * s - 2.0;
        let (sn, _) = sin_cos(u);
        (ContractionStage::Exchange, sn * sn)
    } else {
        (ContractionStage::Collapse, 4.0 * s - 3.0)
    }
}

struct Contraction<'a> {
    a: &'a MpsTensor,
    d_out: usize,
    bond_out: usize,
    inv_sqrt_tr_r: f64,
}

impl<'a> Contraction<'a> {
    fn new(a: &'a MpsTensor) -> Self {
        let (d_out, bond_out) = contraction_dims(a.d(), a.bond());
        let tr_r = r_matrix(a).trace().re;
        Self {
            a,
            d_out,
            bond_out,
            inv_sqrt_tr_r: tr_r.sqrt().recip(),
        }
    }

    fn empty(&self) -> Vec<CMat> {
        vec![linalg::zeros(self.bond_out, self.bond_out); self.d_out]
    }

    /// `[[0, 0], [0, A^j]]` in slot `3j+1`.
    fn shifted(&self, j: usize) -> CMat {
        let mut m = linalg::zeros(self.bond_out, self.bond_out);
        m.view_mut((1, 1), (self.a.bond(), self.a.bond()))
            .copy_from(&self.a.mats()[j - 1]);
        m
    }

    /// Row one `(0, row γ of A^j) · scale`.
    fn row_filler(&self, j: usize, gamma: usize, scale: f64) -> CMat {
        let mut m = linalg::zeros(self.bond_out, self.bond_out);
        let row = self.a.mats()[j - 1].row(gamma - 1) * c(scale, 0.0);
        m.view_mut((0, 1), (1, self.a.bond())).copy_from(&row);
        m
    }

    /// Column one `(0; column γ of A^j) · scale`.
    fn col_filler(&self, j: usize, gamma: usize, scale: f64) -> CMat {
        let mut m = linalg::zeros(self.bond_out, self.bond_out);
        let col = self.a.mats()[j - 1].column(gamma - 1) * c(scale, 0.0);
        m.view_mut((1, 0), (self.a.bond(), 1)).copy_from(&col);
        m
    }

    fn e11(&self, scale: f64) -> CMat {
        let mut m = linalg::zeros(self.bond_out, self.bond_out);
        m[(0, 0)] = c(scale, 0.0);
        m
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let bond = self.a.bond();
        (1..=self.a.d()).flat_map(move |j| (1..=bond).map(move |g| (j, g)))
    }

    fn finish(&self, mats: Vec<CMat>) -> MpsTensor {
        MpsTensor::new(mats).expect("contraction stages produce valid tensors")
    }

    fn isometry(&self, t: f64) -> MpsTensor {
        let phys = unchecked_physical(self.a, &IsometryPath::triple_shift(), t);
        unchecked_bond(&phys, &IsometryPath::shift(), t)
            .pad(self.d_out, self.bond_out)
            .expect("stage dimensions fit the common shape")
    }

    fn filler(&self, t: f64) -> MpsTensor {
        let mut mats = self.empty();
        for j in 1..=self.a.d() {
            mats[3 * j] = self.shifted(j);
        }
        for (j, g) in self.pairs() {
            mats[3 * cantor_pair(j, g) - 1] = self.row_filler(j, g, t * self.inv_sqrt_tr_r);
        }
        self.finish(mats)
    }

    fn exchange(&self, t: f64) -> MpsTensor {
        let grow = t.sqrt();
        let shrink = (1.0 - t).sqrt();
        let mut mats = self.empty();
        mats[0] = self.e11(grow);
        for j in 1..=self.a.d() {
            mats[3 * j] = self.shifted(j) * c(shrink, 0.0);
        }
        for (j, g) in self.pairs() {
            let slot = 3 * cantor_pair(j, g);
            mats[slot - 1] = self.row_filler(j, g, shrink * self.inv_sqrt_tr_r);
            mats[slot - 2] = self.col_filler(j, g, grow);
        }
        self.finish(mats)
    }

    fn collapse(&self, t: f64) -> MpsTensor {
        let mut mats = self.empty();
        mats[0] = self.e11(1.0);
        for (j, g) in self.pairs() {
            mats[3 * cantor_pair(j, g) - 2] = self.col_filler(j, g, 1.0 - t);
        }
        self.finish(mats)
    }

    fn at(&self, s: f64) -> MpsTensor {
        match contraction_stage(s) {
            (ContractionStage::Isometry, t) => self.isometry(t),
            (ContractionStage::Filler, t) => self.filler(t),
            (ContractionStage::Exchange, t) => self.exchange(t),
            (ContractionStage::Collapse, t) => self.collapse(t),
        }
    }
}

/// The contraction of `E` to the constant tensor `δ_{1i} E11`, evaluated at
/// path time `s ∈ [0, 1]` and padded to the common shape
/// [`contraction_dims`].
pub fn contraction_path(a: &MpsTensor, s: f64, tol: &Tolerances) -> Result<MpsTensor> {
    check_time(s)?;
    canonical_decompose(a, tol)?;
    Ok(Contraction::new(a).at(s))
}

/// The endpoint `δ_{1i} diag(1, 0, …, 0)` in shape `(d, D)`.
pub fn contraction_endpoint(d: usize, bond: usize) -> MpsTensor {
    let mut mats = vec![linalg::zeros(bond, bond); d];
    mats[0][(0, 0)] = c(1.0, 0.0);
    MpsTensor::new(mats).expect("endpoint is a valid tensor")
}

/// `f_{t,δ}(x)`: 0 for `x ≤ tδ`, otherwise `√(1 − tδ/x)`.
pub fn f_func(x: f64, t: f64, delta: f64) -> f64 {
    if x <= t * delta {
        0.0
    } else {
        (1.0 - t * delta / x).sqrt()
    }
}

/// Descending spectrum and eigenvectors of `L(Ā)`, `Ā = Q(A)A`, with the
/// numerical rank.
fn underline_spectrum(a: &MpsTensor, tol: &Tolerances) -> Result<(Vec<f64>, CMat, usize, CMat)> {
    let q = crate::mps_core::range_projection(a, tol)?;
    let under = a.map(|m| &q * m);
    let (values, vectors) = linalg::eigh_desc(&l_matrix(&under));
    let rank = spectral_rank(&values, tol.eps_rank)?;
    Ok((values, vectors, rank, q))
}

/// `L(Ā)` has at least two distinct nonzero eigenvalues (requires `χ ≥ 2`).
pub fn in_n(a: &MpsTensor, tol: &Tolerances) -> Result<bool> {
    canonical_decompose(a, tol)?;
    let (values, _, rank, _) = underline_spectrum(a, tol)?;
    Ok(rank >= 2 && values[0] - values[rank - 1] > tol.tol_distinct * values[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetractionState {
    pub t: f64,
    /// `λ_χ(L(Ā))`, or 0 on the branch where nothing moves.
    pub delta: f64,
    pub tensor: MpsTensor,
}

/// `H(A, t) = S^{-1/2} G` on `O(≤ level) = E(≤ level−1) ∪ N(level)`.
pub fn retract_at_level(a: &MpsTensor, level: usize, t: f64, tol: &Tolerances) -> Result<RetractionState> {
    check_time(t)?;
    if level < 2 {
        return Err(MpsError::InvalidParameter("retraction level must be at least 2".into()));
    }
    let chi = canonical_decompose(a, tol)?.chi;
    if chi < level {
        return Ok(RetractionState {
            t,
            delta: 0.0,
            tensor: a.clone(),
        });
    }
    if chi > level {
        return Err(MpsError::NotInO(format!("essential rank {chi} exceeds level {level}")));
    }
    let (values, vectors, rank, q) = underline_spectrum(a, tol)?;
    debug_assert_eq!(rank, chi);
    if values[0] - values[rank - 1] <= tol.tol_distinct * values[0] {
        return Err(MpsError::NotInO(format!(
            "L(QA) is a multiple of a rank-{chi} projection"
        )));
    }
    let delta = values[rank - 1];
    let f_values: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(k, &x)| if k < rank { f_func(x, t, delta) } else { 0.0 })
        .collect();
    let f = linalg::herm_from_parts(&f_values, &vectors);
    let g = a.map(|m| m * &f);
    let bond = a.bond();
    let s = r_matrix(&g.map(|m| &q * m)) + linalg::identity(bond) - &q;
    let inv_sqrt = linalg::herm_apply(&s, |x| x.max(tol.tol_norm).sqrt().recip());
    let tensor = g.map(|m| &inv_sqrt * m);
    Ok(RetractionState { t, delta, tensor })
}

/// [`retract_at_level`] at level `max(χ, 2)`: lowers the essential rank of
/// tensors in `N(χ)` and leaves rank-one tensors fixed.
pub fn retract(a: &MpsTensor, t: f64, tol: &Tolerances) -> Result<RetractionState> {
    let chi = canonical_decompose(a, tol)?.chi;
    retract_at_level(a, chi.max(2), t, tol)
}
