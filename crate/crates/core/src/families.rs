//! Built-in parametrized families and sphere meshes.
//!
//! Physical index pairs `ij ∈ {↑,↓}²` are flattened as `2i + j`, i.e.
//! ↑↑, ↑↓, ↓↑, ↓↓.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{MpsError, Result};
use crate::linalg::{self, c, CMat};
use crate::mps_core::{canonical_decompose, fidelity_per_site, MpsTensor};
use crate::tolerances::Tolerances;

/// AKLT interpolation `K(g)`; the `g = 0` endpoint is represented by `K̃`
/// (rank one), not by the formula.
pub fn aklt_path(g: f64) -> Result<MpsTensor> {
    if !(0.0..=1.0).contains(&g) {
        return Err(MpsError::InvalidParameter(format!("g = {g} is outside [0, 1]")));
    }
    if g == 0.0 {
        return Ok(k_tilde());
    }
    let one = (1.0 - g * g).sqrt();
    let up = (2.0f64 / 3.0).sqrt() * g;
    let mid = (1.0f64 / 3.0).sqrt() * g;
    let m = |v: [f64; 4]| CMat::from_row_slice(2, 2, &v.map(|x| c(x, 0.0)));
    MpsTensor::new(vec![
        m([one, 0.0, 0.0, one]),
        m([0.0, up, 0.0, 0.0]),
        m([-mid, 0.0, 0.0, mid]),
        m([0.0, 0.0, -up, 0.0]),
    ])
}

/// `K̃ = (E11, 0, 0, 0)`, the product state of the first basis vector.
pub fn k_tilde() -> MpsTensor {
    let mut e11 = linalg::zeros(2, 2);
    e11[(0, 0)] = c(1.0, 0.0);
    let z = linalg::zeros(2, 2);
    MpsTensor::new(vec![e11, z.clone(), z.clone(), z]).expect("valid tensor")
}

/// The `χ = 1, d = 2` tensor `(K¹, K²)` of a unit vector.
pub fn psi2_tensor(k1: C64, k2: C64, tol: &Tolerances) -> Result<MpsTensor> {
    let norm_sq = k1.norm_sqr() + k2.norm_sqr();
    if (norm_sq - 1.0).abs() > tol.tol_norm {
        return Err(MpsError::NotNormalizedPoint { norm_sq });
    }
    MpsTensor::new(vec![CMat::from_element(1, 1, k1), CMat::from_element(1, 1, k2)])
}

/// The point `[cos θ/2 : e^{−iφ} sin θ/2]` of `CP¹` attached to a direction.
pub fn sphere_state(theta: f64, phi: f64) -> (C64, C64) {
    let half = 0.5 * theta;
    (c(half.cos(), 0.0), C64::from_polar(half.sin(), -phi))
}

/// `X(θ, φ) = [[cos θ/2, −e^{−iφ} sin θ/2], [e^{iφ} sin θ/2, cos θ/2]]`.
pub fn berry_rotation(theta: f64, phi: f64) -> CMat {
    let (s, co) = (0.5 * theta).sin_cos();
    CMat::from_row_slice(
        2,
        2,
        &[
            c(co, 0.0),
            -C64::from_polar(s, -phi),
            C64::from_polar(s, phi),
            c(co, 0.0),
        ],
    )
}

fn polar_angles(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
    let mut phi = v[1].atan2(v[0]);
    if phi < 0.0 {
        phi += TAU;
    }
    if phi >= TAU {
        phi -= TAU;
    }
    (theta, phi)
}

/// A point `(w, w₄)` of `S³` with the polar angles of `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpPoint {
    pub w: [f64; 3],
    pub w4: f64,
    pub theta: f64,
    pub phi: f64,
}

impl PumpPoint {
    pub fn new(w: [f64; 3], w4: f64) -> Result<Self> {
        let norm_sq = w.iter().map(|x| x * x).sum::<f64>() + w4 * w4;
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(MpsError::NotNormalizedPoint { norm_sq });
        }
        let (theta, phi) = polar_angles(w);
        Ok(Self { w, w4, theta, phi })
    }

    /// The point with `‖w‖ = √(1 − w₄²)` along the direction `(θ, φ)`.
    pub fn from_angles(theta: f64, phi: f64, w4: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&w4) {
            return Err(MpsError::InvalidParameter(format!("w4 = {w4} is outside [-1, 1]")));
        }
        let r = (1.0 - w4 * w4).max(0.0).sqrt();
        let w = [
            r * theta.sin() * phi.cos(),
            r * theta.sin() * phi.sin(),
            r * theta.cos(),
        ];
        Ok(Self { w, w4, theta, phi })
    }

    pub fn w_norm(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn real2(v: [f64; 4]) -> CMat {
    CMat::from_row_slice(2, 2, &v.map(|x| c(x, 0.0)))
}

/// `(√(½ − ‖w‖/√3), √(½ + ‖w‖/√3))`.
fn lambda_entries(w_norm: f64) -> (f64, f64) {
    let x = w_norm / 3f64.sqrt();
    ((0.5 - x).max(0.0).sqrt(), (0.5 + x).sqrt())
}

pub fn lambda_north(pt: &PumpPoint) -> Result<CMat> {
    if pt.w4 <= -0.5 {
        return Err(MpsError::OutOfChart {
            chart: "N".into(),
            reason: format!("w4 = {} ≤ -1/2", pt.w4),
        });
    }
    if pt.w4 >= 0.5 {
        let (a, b) = lambda_entries(pt.w_norm());
        Ok(real2([0.0, -a, b, 0.0]))
    } else {
        Ok(real2([0.0, 0.0, 1.0, 0.0]))
    }
}

pub fn lambda_south(pt: &PumpPoint) -> Result<CMat> {
    if pt.w4 >= 0.5 {
        return Err(MpsError::OutOfChart {
            chart: "S".into(),
            reason: format!("w4 = {} ≥ 1/2", pt.w4),
        });
    }
    if pt.w4 <= -0.5 {
        let (a, b) = lambda_entries(pt.w_norm());
        Ok(real2([0.0, b, -a, 0.0]))
    } else {
        Ok(real2([0.0, 1.0, 0.0, 0.0]))
    }
}

/// `A_N^{ij} = |i⟩⟨j| X Λ^N Xᵀ`, `d = 4`, `D = 2`.
pub fn pump_north(pt: &PumpPoint) -> Result<MpsTensor> {
    let x = berry_rotation(pt.theta, pt.phi);
    let p = &x * lambda_north(pt)? * x.transpose();
    let mut mats = Vec::with_capacity(4);
    for i in 0..2 {
        for j in 0..2 {
            let mut m = linalg::zeros(2, 2);
            m.row_mut(i).copy_from(&p.row(j));
            mats.push(m);
        }
    }
    MpsTensor::new(mats)
}

/// `A_S^{ij} = ⟨i| X Λ^S Xᵀ |j⟩`, `d = 4`, `D = 1`.
pub fn pump_south(pt: &PumpPoint) -> Result<MpsTensor> {
    let x = berry_rotation(pt.theta, pt.phi);
    let p = &x * lambda_south(pt)? * x.transpose();
    MpsTensor::new((0..4).map(|k| CMat::from_element(1, 1, p[(k / 2, k % 2)])).collect())
}

/// `f(v) = (2√(1−‖v‖²) v, 1 − 2‖v‖²)` from the closed ball to `S³`.
pub fn ball_to_sphere(v: [f64; 3]) -> Result<PumpPoint> {
    let r2: f64 = v.iter().map(|x| x * x).sum();
    if r2 > 1.0 + 1e-12 {
        return Err(MpsError::InvalidParameter(format!("|v|² = {r2} exceeds 1")));
    }
    let scale = 2.0 * (1.0 - r2).max(0.0).sqrt();
    let (theta, phi) = polar_angles(v);
    Ok(PumpPoint {
        w: v.map(|x| scale * x),
        w4: 1.0 - 2.0 * r2,
        theta,
        phi,
    })
}

/// Lower-left filler of the south extension in the `X̄ · Xᵀ` frame.
fn south_filler(pt: &PumpPoint) -> Vec<C64> {
    let (theta, phi) = (pt.theta, pt.phi);
    if pt.w4 > -0.5 {
        // Lower-left corner of Xᵀ|i⟩⟨j|X Λ with the band value of Λ^N.
        let x = berry_rotation(theta, phi);
        let lam = real2([0.0, 0.0, 1.0, 0.0]);
        (0..4)
            .map(|k| {
                let mut e = linalg::zeros(2, 2);
                e[(k / 2, k % 2)] = c(1.0, 0.0);
                (x.transpose() * e * &x * &lam)[(1, 0)]
            })
            .collect()
    } else {
        let (a, b) = lambda_entries(pt.w_norm());
        let gap = b - a;
        let off = -0.5 * C64::from_polar(theta.sin(), -phi);
        vec![
            C64::from_polar(0.5 * (1.0 - theta.cos()) * gap, -2.0 * phi),
            off,
            off,
            c(0.5 * (1.0 + theta.cos()) * gap, 0.0),
        ]
    }
}

/// North branch of the lift, valid for `‖v‖ < √3/2`.
pub fn pump_lift_north(v: [f64; 3]) -> Result<MpsTensor> {
    pump_north(&ball_to_sphere(v)?)
}

/// South branch `X̄ [[A_S, 0], [M, 0]] Xᵀ`, valid for `‖v‖ > ½`.
pub fn pump_lift_south(v: [f64; 3]) -> Result<MpsTensor> {
    let pt = ball_to_sphere(v)?;
    let a_s = pump_south(&pt)?;
    let m = south_filler(&pt);
    let x = berry_rotation(pt.theta, pt.phi);
    let xbar = x.map(|z| z.conj());
    let xt = x.transpose();
    let mats = (0..4)
        .map(|k| {
            let block = CMat::from_row_slice(2, 2, &[a_s.mats()[k][(0, 0)], c(0.0, 0.0), m[k], c(0.0, 0.0)]);
            &xbar * block * &xt
        })
        .collect();
    MpsTensor::new(mats)
}

/// The lift of the pump over the closed 3-ball; north branch inside
/// `‖v‖ < √3/2`, south extension outside.
pub fn pump_lift(v: [f64; 3]) -> Result<MpsTensor> {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r < 3f64.sqrt() / 2.0 {
        pump_lift_north(v)
    } else {
        pump_lift_south(v)
    }
}

/// A vertex of a sphere mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub index: usize,
    pub theta: f64,
    pub phi: f64,
    pub n: [f64; 3],
}

impl SpherePoint {
    fn new(index: usize, theta: f64, phi: f64) -> Self {
        let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        Self { index, theta, phi, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plaquette {
    pub vertices: [usize; 4],
    pub theta_lo: f64,
    pub phi_lo: f64,
}

/// θ–φ quad mesh of `S²`: `n_θ − 1` rings of `n_φ` vertices plus one vertex
/// at each pole (with the convention `φ = 0`). The first and last rows of
/// plaquettes touch a pole and repeat it, closing the caps with triangle
/// fans. Vertex order `(θ_lo, φ_lo) → (θ_hi, φ_lo) → (θ_hi, φ_hi) →
/// (θ_lo, φ_hi)` is positive with respect to the outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2 {
    pub n_theta: usize,
    pub n_phi: usize,
    pub vertices: Vec<SpherePoint>,
    pub plaquettes: Vec<Plaquette>,
}

impl Mesh2 {
    pub fn sphere(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 4 || n_phi < 4 {
            return Err(MpsError::InvalidParameter(format!(
                "mesh must be at least 4x4, got {n_theta}x{n_phi}"
            )));
        }
        let mut vertices = vec![SpherePoint::new(0, 0.0, 0.0)];
        let phi_at = |l: usize| TAU * l as f64 / n_phi as f64;
        let theta_at = |k: usize| PI * k as f64 / n_theta as f64;
        for k in 1..n_theta {
            for l in 0..n_phi {
                vertices.push(SpherePoint::new(vertices.len(), theta_at(k), phi_at(l)));
            }
        }
        let south = vertices.len();
        vertices.push(SpherePoint::new(south, PI, 0.0));
        let vertex = |k: usize, l: usize| -> usize {
            if k == 0 {
                0
            } else if k == n_theta {
                south
            } else {
                1 + (k - 1) * n_phi + l % n_phi
            }
        };
        let mut plaquettes = Vec::with_capacity(n_theta * n_phi);
        for k in 0..n_theta {
            for l in 0..n_phi {
                plaquettes.push(Plaquette {
                    vertices: [vertex(k, l), vertex(k + 1, l), vertex(k + 1, l + 1), vertex(k, l + 1)],
                    theta_lo: theta_at(k),
                    phi_lo: phi_at(l),
                });
            }
        }
        Ok(Self {
            n_theta,
            n_phi,
            vertices,
            plaquettes,
        })
    }

    /// The same mesh with every plaquette traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.plaquettes {
            p.vertices.reverse();
        }
        out
    }
}

type Membership<P> = dyn Fn(&P) -> bool + Send + Sync;
type Evaluation<P> = dyn Fn(&P) -> Result<MpsTensor> + Send + Sync;

#[derive(Clone)]
pub struct Chart<P> {
    pub name: String,
    contains: Arc<Membership<P>>,
    eval: Arc<Evaluation<P>>,
}

impl<P> Chart<P> {
    pub fn new(
        name: impl Into<String>,
        contains: impl Fn(&P) -> bool + Send + Sync + 'static,
        eval: impl Fn(&P) -> Result<MpsTensor> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            contains: Arc::new(contains),
            eval: Arc::new(eval),
        }
    }

    pub fn contains(&self, p: &P) -> bool {
        (self.contains)(p)
    }
}

/// A map from parameter points to tensors, given chart by chart.
#[derive(Clone)]
pub struct ParamFamily<P> {
    pub name: String,
    pub charts: Vec<Chart<P>>,
    /// Pairs of chart indices whose domains intersect.
    pub overlaps: Vec<(usize, usize)>,
}

impl<P: std::fmt::Debug> ParamFamily<P> {
    pub fn single(name: impl Into<String>, eval: impl Fn(&P) -> Result<MpsTensor> + Send + Sync + 'static) -> Self {
        let name = name.into();
        Self {
            charts: vec![Chart::new(name.clone(), |_| true, eval)],
            name,
            overlaps: Vec::new(),
        }
    }

    pub fn eval(&self, chart: usize, p: &P) -> Result<MpsTensor> {
        let ch = &self.charts[chart];
        if !ch.contains(p) {
            return Err(MpsError::OutOfChart {
                chart: ch.name.clone(),
                reason: format!("{p:?}"),
            });
        }
        (ch.eval)(p)
    }

    /// Evaluates in the first chart containing `p`.
    pub fn eval_any(&self, p: &P) -> Result<(usize, MpsTensor)> {
        let idx = self
            .charts
            .iter()
            .position(|ch| ch.contains(p))
            .ok_or_else(|| MpsError::OutOfChart {
                chart: self.name.clone(),
                reason: format!("{p:?} is in no chart"),
            })?;
        Ok((idx, (self.charts[idx].eval)(p)?))
    }

    /// Smallest fidelity per site between the charts of every overlap pair
    /// containing `p`, or `None` if `p` lies in no overlap.
    pub fn overlap_fidelity(&self, p: &P, tol: &Tolerances) -> Result<Option<f64>> {
        let mut worst: Option<f64> = None;
        for &(a, b) in &self.overlaps {
            if self.charts[a].contains(p) && self.charts[b].contains(p) {
                let da = canonical_decompose(&self.eval(a, p)?, tol)?;
                let db = canonical_decompose(&self.eval(b, p)?, tol)?;
                let f = if da.chi == db.chi {
                    fidelity_per_site(&da.k, &db.k)?
                } else {
                    0.0
                };
                worst = Some(worst.map_or(f, |w: f64| w.min(f)));
            }
        }
        Ok(worst)
    }
}

/// `n ↦ [cos θ/2 : e^{−iφ} sin θ/2]`, the generator of `π₂`.
pub fn psi2_family() -> ParamFamily<SpherePoint> {
    ParamFamily::single("psi2", |p: &SpherePoint| {
        let (a, b) = sphere_state(p.theta, p.phi);
        psi2_tensor(a, b, &Tolerances::default())
    })
}

pub fn constant_family(a: MpsTensor) -> ParamFamily<SpherePoint> {
    ParamFamily::single("constant", move |_: &SpherePoint| Ok(a.clone()))
}

/// Per-vertex tensors, one chart per distinct label.
pub fn custom_family(tensors: Vec<MpsTensor>, labels: Vec<String>) -> Result<ParamFamily<SpherePoint>> {
    if tensors.len() != labels.len() {
        return Err(MpsError::DimensionMismatch(format!(
            "{} tensors but {} chart labels",
            tensors.len(),
            labels.len()
        )));
    }
    let tensors = Arc::new(tensors);
    let labels = Arc::new(labels);
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    let charts = names
        .iter()
        .map(|name| {
            let (t, l, own) = (tensors.clone(), labels.clone(), name.clone());
            let (l2, own2) = (labels.clone(), name.clone());
            Chart::new(
                name.clone(),
                move |p: &SpherePoint| l2.get(p.index) == Some(&own2),
                move |p: &SpherePoint| {
                    if l.get(p.index) != Some(&own) {
                        return Err(MpsError::OutOfChart {
                            chart: own.clone(),
                            reason: format!("vertex {}", p.index),
                        });
                    }
                    Ok(t[p.index].clone())
                },
            )
        })
        .collect();
    Ok(ParamFamily {
        name: "custom".into(),
        charts,
        overlaps: Vec::new(),
    })
}

/// The pump restricted to the 2-sphere `w₄ = const`, with charts N and S.
pub fn pump_slice_family(w4: f64) -> Result<ParamFamily<SpherePoint>> {
    if !(-1.0..=1.0).contains(&w4) {
        return Err(MpsError::InvalidParameter(format!("w4 = {w4} is outside [-1, 1]")));
    }
    let north = Chart::new(
        "N",
        move |_: &SpherePoint| w4 > -0.5,
        move |p: &SpherePoint| pump_north(&PumpPoint::from_angles(p.theta, p.phi, w4)?),
    );
    let south = Chart::new(
        "S",
        move |_: &SpherePoint| w4 < 0.5,
        move |p: &SpherePoint| pump_south(&PumpPoint::from_angles(p.theta, p.phi, w4)?),
    );
    Ok(ParamFamily {
        name: "pump".into(),
        charts: vec![north, south],
        overlaps: vec![(0, 1)],
    })
}

/// Unit range vector of `Q(A)` for a rank-one tensor.
pub fn rank_one_range(a: &MpsTensor, tol: &Tolerances) -> Result<linalg::CVec> {
    let dec = canonical_decompose(a, tol)?;
    if dec.chi != 1 {
        return Err(MpsError::InvalidParameter(format!(
            "expected essential rank 1, got {}",
            dec.chi
        )));
    }
    Ok(dec.x.column(0).into_owned())
}

/// The boundary fibre of the pump lift, `n ↦` range of `Q(A(n))`, as a
/// `χ = 1` family in `CP¹`.
pub fn pump_boundary_family() -> ParamFamily<SpherePoint> {
    ParamFamily::single("pump-boundary", |p: &SpherePoint| {
        let tol = Tolerances::default();
        let x = rank_one_range(&pump_lift(p.n)?, &tol)?;
        psi2_tensor(x[0], x[1], &tol)
    })
}

/// The first column of `X̄(θ₀, φ)` with `θ₀` frozen: a map that factors
/// through a circle.
pub fn frozen_theta_family(theta0: f64) -> ParamFamily<SpherePoint> {
    ParamFamily::single("frozen-theta", move |p: &SpherePoint| {
        let (a, b) = sphere_state(theta0, p.phi);
        psi2_tensor(a, b, &Tolerances::default())
    })
}
