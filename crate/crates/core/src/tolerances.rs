//! Numerical thresholds used throughout the crate.
//!
//! The underlying constructions are exact; every threshold here is policy for
//! deciding ranks, membership and equalities in floating point. All of them
//! can be overridden by name, which is how the CLI's `--tol KEY=VAL` works.

use serde::{Deserialize, Serialize};

use crate::error::{MpsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative eigenvalue cutoff (fraction of the largest eigenvalue) for
    /// numerical ranks of Gram-type matrices.
    pub eps_rank: f64,
    pub tol_unitary: f64,
    pub tol_herm: f64,
    pub tol_norm: f64,
    pub tol_recon: f64,
    /// Deficit from 1 of the fidelity per site still counted as equal states.
    pub tol_fid: f64,
    pub tol_gap: f64,
    /// Relative spread of `L(QA)` eigenvalues needed for membership in `N`.
    pub tol_distinct: f64,
    /// Smallest admissible overlap modulus for a link variable.
    pub overlap_min: f64,
    /// Row cap for brute-force window density matrices.
    pub window_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_rank: 1e-9,
            tol_unitary: 1e-10,
            tol_herm: 1e-10,
            tol_norm: 1e-8,
            tol_recon: 1e-8,
            tol_fid: 1e-7,
            tol_gap: 1e-6,
            tol_distinct: 1e-8,
            overlap_min: 1e-8,
            window_cap: 4096,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 10] = [
        "eps_rank",
        "tol_unitary",
        "tol_herm",
        "tol_norm",
        "tol_recon",
        "tol_fid",
        "tol_gap",
        "tol_distinct",
        "overlap_min",
        "window_cap",
    ];

    /// Overrides one threshold by name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() || value <= 0.0 {
            return Err(MpsError::InvalidParameter(format!(
                "tolerance {key} must be positive and finite, got {value}"
            )));
        }
        match key {
            "eps_rank" => self.eps_rank = value,
            "tol_unitary" => self.tol_unitary = value,
            "tol_herm" => self.tol_herm = value,
            "tol_norm" => self.tol_norm = value,
            "tol_recon" => self.tol_recon = value,
            "tol_fid" => self.tol_fid = value,
            "tol_gap" => self.tol_gap = value,
            "tol_distinct" => self.tol_distinct = value,
            "overlap_min" => self.overlap_min = value,
            "window_cap" => {
                if value.fract() != 0.0 {
                    return Err(MpsError::InvalidParameter(format!(
                        "window_cap must be an integer, got {value}"
                    )));
                }
                self.window_cap = value as usize;
            }
            other => return Err(MpsError::InvalidParameter(format!("unknown tolerance key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a `KEY=VAL` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| MpsError::InvalidParameter(format!("expected KEY=VAL, got {spec:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| MpsError::InvalidParameter(format!("tolerance value {value:?} is not a number")))?;
        self.set(key.trim(), value)
    }
}
