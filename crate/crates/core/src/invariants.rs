//! Chern number per unit cell from plaquette holonomies of overlap links.
//!
//! Conventions: the link `u → v` is the unit phase of the leading eigenvalue
//! of `B ↦ Σᵢ K_uⁱ B K_vⁱ*` (for `χ = 1`, `Σᵢ K_uⁱ conj(K_vⁱ)`); plaquettes
//! carry the outward orientation of [`Mesh2`].

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{MpsError, Result};
use crate::families::{
    berry_rotation, frozen_theta_family, psi2_family, pump_boundary_family, pump_lift, rank_one_range, Mesh2,
    ParamFamily, SpherePoint,
};
use crate::linalg::CMat;
use crate::mps_core::{canonical_decompose, mixed_leading_eigenvalue, MpsTensor};
use crate::tolerances::Tolerances;

/// Plaquettes whose curvature lies this close to ±π are flagged.
pub const BRANCH_MARGIN: f64 = 0.1;
/// Largest accepted distance of the total curvature from an integer.
pub const INTEGER_RESIDUAL_MAX: f64 = 1e-3;

fn overlap_phase(ku: &[CMat], kv: &[CMat], tol: &Tolerances) -> Result<C64> {
    let lambda = mixed_leading_eigenvalue(ku, kv)?;
    let modulus = lambda.norm();
    if modulus < tol.overlap_min {
        return Err(MpsError::VanishingOverlap { modulus });
    }
    Ok(lambda / modulus)
}

/// Unit link variable between the states of `a` (at `u`) and `b` (at `v`).
pub fn link_variable(a: &MpsTensor, b: &MpsTensor, tol: &Tolerances) -> Result<C64> {
    let ka = canonical_decompose(a, tol)?.k;
    let kb = canonical_decompose(b, tol)?.k;
    overlap_phase(&ka, &kb, tol)
}

/// Links on every directed edge of a mesh, keyed `(u, v)`.
#[derive(Debug, Clone)]
pub struct LinkField {
    links: BTreeMap<(usize, usize), C64>,
}

impl LinkField {
    /// Evaluates `family` once per vertex and every mesh edge once.
    pub fn compute(family: &ParamFamily<SpherePoint>, mesh: &Mesh2, tol: &Tolerances) -> Result<Self> {
        let mut cores: Vec<Vec<CMat>> = Vec::with_capacity(mesh.vertices.len());
        let mut chi = None;
        for p in &mesh.vertices {
            let (_, a) = family.eval_any(p)?;
            let k = canonical_decompose(&a, tol)?.k;
            let this = k[0].nrows();
            match chi {
                None => chi = Some(this),
                Some(c) if c != this => return Err(MpsError::RankMismatch { left: c, right: this }),
                _ => {}
            }
            cores.push(k);
        }
        let mut links = BTreeMap::new();
        for plaq in &mesh.plaquettes {
            for k in 0..4 {
                let (u, v) = (plaq.vertices[k], plaq.vertices[(k + 1) % 4]);
                if u == v || links.contains_key(&(u, v)) {
                    continue;
                }
                let z = overlap_phase(&cores[u], &cores[v], tol)?;
                links.insert((u, v), z);
                links.insert((v, u), z.conj());
            }
        }
        Ok(Self { links })
    }

    /// The link `u → v`; a degenerate edge `u → u` is exactly 1.
    pub fn get(&self, u: usize, v: usize) -> Option<C64> {
        if u == v {
            return Some(C64::new(1.0, 0.0));
        }
        self.links.get(&(u, v)).copied()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &C64)> {
        self.links.iter()
    }

    pub fn holonomy(&self, vertices: &[usize; 4]) -> C64 {
        (0..4)
            .map(|k| self.get(vertices[k], vertices[(k + 1) % 4]).expect("edge of the mesh"))
            .product()
    }
}

fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    // `arg` returns [−π, π]; fold −π onto π.
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaquetteCurvature {
    pub id: usize,
    pub theta_lo: f64,
    pub phi_lo: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub plaquettes: Vec<PlaquetteCurvature>,
    /// `Σ F_p / 2π`.
    pub total: f64,
    /// Ids of plaquettes with `|F_p| > π − 0.1`.
    pub flagged: Vec<usize>,
}

impl CurvatureField {
    pub fn total_curvature(&self) -> f64 {
        self.plaquettes.iter().map(|p| p.curvature).sum()
    }

    pub fn nearest_integer(&self) -> (i64, f64) {
        let n = self.total.round();
        (n as i64, (self.total - n).abs())
    }
}

pub fn curvature_report(family: &ParamFamily<SpherePoint>, mesh: &Mesh2, tol: &Tolerances) -> Result<CurvatureField> {
    let links = LinkField::compute(family, mesh, tol)?;
    let mut plaquettes = Vec::with_capacity(mesh.plaquettes.len());
    let mut flagged = Vec::new();
    for (id, plaq) in mesh.plaquettes.iter().enumerate() {
        let curvature = principal_arg(links.holonomy(&plaq.vertices));
        if curvature.abs() > PI - BRANCH_MARGIN {
            flagged.push(id);
        }
        plaquettes.push(PlaquetteCurvature {
            id,
            theta_lo: plaq.theta_lo,
            phi_lo: plaq.phi_lo,
            curvature,
        });
    }
    let total = plaquettes.iter().map(|p| p.curvature).sum::<f64>() / TAU;
    Ok(CurvatureField {
        plaquettes,
        total,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernSummary {
    pub chern: i64,
    pub residual: f64,
    pub flagged_plaquettes: Vec<usize>,
}

impl CurvatureField {
    pub fn summary(&self) -> Result<ChernSummary> {
        let (chern, residual) = self.nearest_integer();
        if residual >= INTEGER_RESIDUAL_MAX {
            return Err(MpsError::NonIntegerTotal {
                total: self.total,
                residual,
            });
        }
        Ok(ChernSummary {
            chern,
            residual,
            flagged_plaquettes: self.flagged.clone(),
        })
    }
}

pub fn chern_summary(family: &ParamFamily<SpherePoint>, mesh: &Mesh2, tol: &Tolerances) -> Result<ChernSummary> {
    curvature_report(family, mesh, tol)?.summary()
}

pub fn chern_number(family: &ParamFamily<SpherePoint>, mesh: &Mesh2, tol: &Tolerances) -> Result<i64> {
    Ok(chern_summary(family, mesh, tol)?.chern)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PumpBoundaryReport {
    pub chern: i64,
    pub residual: f64,
    pub flagged_plaquettes: Vec<usize>,
    /// Largest `1 − |⟨x, X̄e₁⟩|` over mesh vertices, where `x` spans the
    /// range of `Q` of the lifted tensor.
    pub frame_defect: f64,
}

fn check_boundary_mesh(n_theta: usize, n_phi: usize) -> Result<Mesh2> {
    if n_theta < 8 || n_phi < 8 {
        return Err(MpsError::InvalidParameter(format!(
            "boundary mesh must be at least 8x8, got {n_theta}x{n_phi}"
        )));
    }
    Mesh2::sphere(n_theta, n_phi)
}

/// Chern number of the boundary map `S² → CP¹` of the pump lift, with the
/// range of `Q` compared against the first column of `X̄(θ, φ)` at every
/// vertex.
pub fn pump_boundary_report(n_theta: usize, n_phi: usize, tol: &Tolerances) -> Result<PumpBoundaryReport> {
    let mesh = check_boundary_mesh(n_theta, n_phi)?;
    let mut frame_defect: f64 = 0.0;
    for p in &mesh.vertices {
        let x = rank_one_range(&pump_lift(p.n)?, tol)?;
        let col = berry_rotation(p.theta, p.phi).map(|z| z.conj());
        let overlap = x[0].conj() * col[(0, 0)] + x[1].conj() * col[(1, 0)];
        frame_defect = frame_defect.max(1.0 - overlap.norm());
    }
    let s = chern_summary(&pump_boundary_family(), &mesh, tol)?;
    Ok(PumpBoundaryReport {
        chern: s.chern,
        residual: s.residual,
        flagged_plaquettes: s.flagged_plaquettes,
        frame_defect,
    })
}

pub fn pump_boundary_chern(n_theta: usize, n_phi: usize) -> Result<i64> {
    Ok(pump_boundary_report(n_theta, n_phi, &Tolerances::default())?.chern)
}

/// The same machinery on the map with `θ` frozen at `theta0`.
pub fn frozen_theta_chern(theta0: f64, n_theta: usize, n_phi: usize, tol: &Tolerances) -> Result<i64> {
    let mesh = check_boundary_mesh(n_theta, n_phi)?;
    chern_number(&frozen_theta_family(theta0), &mesh, tol)
}

pub fn psi2_chern(n_theta: usize, n_phi: usize, tol: &Tolerances) -> Result<ChernSummary> {
    chern_summary(&psi2_family(), &Mesh2::sphere(n_theta, n_phi)?, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{constant_family, psi2_tensor, sphere_state};
    use crate::linalg::c;

    #[test]
    fn self_link_and_real_overlap() {
        let tol = Tolerances::default();
        let a = psi2_tensor(c(1.0, 0.0), c(0.0, 0.0), &tol).unwrap();
        assert!((link_variable(&a, &a, &tol).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        let e = 0.3f64;
        let b = psi2_tensor(c(e.cos(), 0.0), c(e.sin(), 0.0), &tol).unwrap();
        assert!((link_variable(&a, &b, &tol).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn orthogonal_states_have_no_link() {
        let tol = Tolerances::default();
        let a = psi2_tensor(c(1.0, 0.0), c(0.0, 0.0), &tol).unwrap();
        let b = psi2_tensor(c(0.0, 0.0), c(1.0, 0.0), &tol).unwrap();
        assert!(matches!(
            link_variable(&a, &b, &tol),
            Err(MpsError::VanishingOverlap { .. })
        ));
    }

    #[test]
    fn link_phase_covariance() {
        let tol = Tolerances::default();
        let (p, q) = sphere_state(0.4, 1.0);
        let (r, s) = sphere_state(0.6, 1.2);
        let a = psi2_tensor(p, q, &tol).unwrap();
        let b = psi2_tensor(r, s, &tol).unwrap();
        let alpha = 0.7;
        let ph = C64::from_polar(1.0, alpha);
        let a2 = a.map(|m| m * ph);
        let base = link_variable(&a, &b, &tol).unwrap();
        assert!((link_variable(&a2, &b, &tol).unwrap() - base * ph).norm() < 1e-13);
        assert!((link_variable(&b, &a, &tol).unwrap() - base.conj()).norm() < 1e-13);
    }

    #[test]
    fn constant_family_is_flat() {
        let tol = Tolerances::default();
        let mesh = Mesh2::sphere(8, 8).unwrap();
        let a = crate::families::aklt_path(0.5).unwrap();
        let field = curvature_report(&constant_family(a), &mesh, &tol).unwrap();
        assert!(field.plaquettes.iter().all(|p| p.curvature.abs() < 1e-12));
        assert_eq!(field.summary().unwrap().chern, 0);
    }

    #[test]
    fn psi2_generator() {
        let tol = Tolerances::default();
        for n in [16, 32] {
            let s = psi2_chern(n, n, &tol).unwrap();
            assert_eq!(s.chern, 1);
            assert!(s.residual < 1e-9);
        }
        let mesh = Mesh2::sphere(16, 16).unwrap();
        let field = curvature_report(&psi2_family(), &mesh, &tol).unwrap();
        assert!((field.total_curvature() - TAU).abs() < 1e-9);
        assert_eq!(chern_number(&psi2_family(), &mesh.reversed(), &tol).unwrap(), -1);
    }

    #[test]
    fn pump_boundary_is_generator() {
        let tol = Tolerances::default();
        let rep = pump_boundary_report(16, 16, &tol).unwrap();
        assert_eq!(rep.chern, 1);
        assert!(rep.frame_defect < 1e-12);
        assert_eq!(frozen_theta_chern(1.0, 8, 8, &tol).unwrap(), 0);
        assert!(pump_boundary_chern(6, 8).is_err());
    }

    #[test]
    fn principal_arg_range() {
        assert_eq!(principal_arg(c(-1.0, -0.0)), PI);
        assert_eq!(principal_arg(c(-1.0, 0.0)), PI);
    }
}
