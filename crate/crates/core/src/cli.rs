//! Experiment runner behind the `imps` binary.
//!
//! Every experiment reads a strictly validated TOML config (or the
//! equivalent command-line flags), writes CSV/JSON artifacts under `out`, and
//! records each embedded assertion in `report.json`. Exit status: 0 when all
//! checks pass, 1 on a failed check or numerical error, 2 on a bad config.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::MpsError;
use crate::families::{aklt_path, k_tilde, pump_lift_north, pump_lift_south, pump_north, pump_south, Mesh2, PumpPoint};
use crate::homotopy::{contraction_dims, contraction_endpoint, contraction_path, in_n, retract, IsometryPath};
use crate::invariants::{curvature_report, pump_boundary_report, CurvatureField};
use crate::io::FamilySpec;
use crate::linalg::{self, c, CMat};
use crate::mps_core::{
    apply_gauge, canonical_decompose, essential_rank, fidelity_per_site, gauge_equivalent, random_core, random_in_e,
    right_normalization_residual, GaugeMove,
};
use crate::tolerances::Tolerances;
use crate::transfer::{
    correlation_length, expectation, fixed_point, trace_invariant, trace_with_product, transfer_spectrum,
    window_density_matrix, WindowObservable,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PRNG: &str = "ChaCha8";
pub const CONVENTIONS: &str = "complex=[re,im]; matrices row-major; \
    link u->v = phase of leading eigenvalue of B -> sum_i K_u^i B K_v^i*; \
    plaquettes outward (theta_lo,phi_lo)->(theta_hi,phi_lo)->(theta_hi,phi_hi)->(theta_lo,phi_hi)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GammaCheck,
    AkltSweep,
    OracleCheck,
    GaugeCheck,
    RetractSweep,
    ContractSweep,
    Chern,
    PumpBoundary,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::GammaCheck => "gamma-check",
            Self::AkltSweep => "aklt-sweep",
            Self::OracleCheck => "oracle-check",
            Self::GaugeCheck => "gauge-check",
            Self::RetractSweep => "retract-sweep",
            Self::ContractSweep => "contract-sweep",
            Self::Chern => "chern",
            Self::PumpBoundary => "pump-boundary",
        }
    }

    pub fn randomized(self) -> bool {
        matches!(
            self,
            Self::OracleCheck | Self::GaugeCheck | Self::RetractSweep | Self::ContractSweep | Self::PumpBoundary
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub params: toml::Table,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: None,
            out: None,
            tolerances: Tolerances::default(),
            params: toml::Table::new(),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self, CliError> {
        toml::from_str(s).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = Some(out.into());
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] MpsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value < limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value >= limit,
        }
    }

    pub fn equals(name: impl Into<String>, value: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: expected,
            pass: value == expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub experiment: &'static str,
    pub seed: Option<u64>,
    pub prng: &'static str,
    pub conventions: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub meta: Meta,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Writes artifacts into one output directory.
struct Sink {
    dir: PathBuf,
    meta: Meta,
    files: Vec<String>,
    checks: Vec<Check>,
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e6)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl Sink {
    fn header(&self) -> String {
        let seed = self.meta.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# imps {} experiment={} seed={} prng={} conventions: {}",
            self.meta.version, self.meta.experiment, seed, self.meta.prng, self.meta.conventions
        )
    }

    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut body = self.header();
        body.push('\n');
        body.push_str(&columns.join(","));
        body.push('\n');
        for row in rows {
            body.push_str(&row.join(","));
            body.push('\n');
        }
        self.write(name, &body)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value).expect("serializable");
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("meta".into(), serde_json::to_value(&self.meta).expect("serializable"));
        }
        let mut body = serde_json::to_string_pretty(&v).expect("serializable");
        body.push('\n');
        self.write(name, &body)
    }

    fn push(&mut self, check: Check) {
        self.checks.push(check);
    }
}

fn params<P: DeserializeOwned>(table: &toml::Table, experiment: Experiment) -> Result<P, CliError> {
    toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e| CliError::Config(format!("params of {}: {e}", experiment.name())))
}

fn rng_for(seed: Option<u64>) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.unwrap_or(0))
}

/// Runs an experiment, writing artifacts and `report.json` under its output
/// directory. Numerical errors are recorded as a failed report rather than
/// returned.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    let experiment = config.experiment;
    if experiment.randomized() && config.seed.is_none() {
        return Err(CliError::Config(format!(
            "{} is randomized and needs a seed",
            experiment.name()
        )));
    }
    let dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("imps-out").join(experiment.name()));
    fs::create_dir_all(&dir)?;
    let meta = Meta {
        version: VERSION,
        experiment: experiment.name(),
        seed: config.seed,
        prng: PRNG,
        conventions: CONVENTIONS,
    };
    let mut sink = Sink {
        dir,
        meta,
        files: Vec::new(),
        checks: Vec::new(),
    };
    let tol = &config.tolerances;
    let p = &config.params;
    let outcome = match experiment {
        Experiment::GammaCheck => gamma_check(&params(p, experiment)?, &mut sink),
        Experiment::AkltSweep => aklt_sweep(&params(p, experiment)?, tol, &mut sink),
        Experiment::OracleCheck => oracle_check(&params(p, experiment)?, config.seed, tol, &mut sink),
        Experiment::GaugeCheck => gauge_check(&params(p, experiment)?, config.seed, tol, &mut sink),
        Experiment::RetractSweep => retract_sweep(&params(p, experiment)?, config.seed, tol, &mut sink),
        Experiment::ContractSweep => contract_sweep(&params(p, experiment)?, config.seed, tol, &mut sink),
        Experiment::Chern => chern(&params(p, experiment)?, tol, &mut sink),
        Experiment::PumpBoundary => pump_boundary(&params(p, experiment)?, config.seed, tol, &mut sink),
    };
    let error = match outcome {
        Ok(()) => None,
        Err(CliError::Numerical(e)) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let passed = error.is_none() && sink.checks.iter().all(|c| c.pass);
    let mut files = sink.files.clone();
    files.push("report.json".into());
    let report = RunReport {
        meta: sink.meta.clone(),
        passed,
        checks: sink.checks.clone(),
        files,
        error,
    };
    let body = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    fs::write(sink.dir.join("report.json"), body)?;
    Ok(report)
}

fn grid(step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::Config(format!("grid step must lie in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|k| k as f64 / n as f64).collect())
}

// ---------------------------------------------------------------- gamma-check

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GammaParams {
    /// `shift` (n+1), `triple` (3n+1) or `both`.
    phi: String,
    step: f64,
    block: usize,
}

impl Default for GammaParams {
    fn default() -> Self {
        Self {
            phi: "both".into(),
            step: 0.05,
            block: 64,
        }
    }
}

fn gamma_check(p: &GammaParams, sink: &mut Sink) -> Result<(), CliError> {
    let paths: Vec<(&str, IsometryPath)> = match p.phi.as_str() {
        "shift" => vec![("shift", IsometryPath::shift())],
        "triple" => vec![("triple", IsometryPath::triple_shift())],
        "both" => vec![
            ("shift", IsometryPath::shift()),
            ("triple", IsometryPath::triple_shift()),
        ],
        other => {
            return Err(CliError::Config(format!(
                "unknown phi {other:?}; use shift, triple or both"
            )))
        }
    };
    let ts = grid(p.step)?;
    let mut rows = Vec::new();
    for (name, path) in paths {
        let mut worst: f64 = 0.0;
        for &t in &ts {
            let defect = path.isometry_defect(t, p.block);
            worst = worst.max(defect);
            rows.push(vec![name.to_string(), fmt_f64(t), fmt_f64(defect)]);
        }
        let rows_n = path.phi(p.block);
        let start = path.matrix(0.0, rows_n, p.block);
        let end = path.matrix(1.0, rows_n, p.block);
        let mut e0: f64 = 0.0;
        let mut e1: f64 = 0.0;
        for b in 1..=p.block {
            for a in 1..=rows_n {
                e0 = e0.max((start[(a - 1, b - 1)] - f64::from(u8::from(a == b))).abs());
                e1 = e1.max((end[(a - 1, b - 1)] - f64::from(u8::from(a == path.phi(b)))).abs());
            }
        }
        sink.push(Check::at_most(format!("{name}.max_isometry_defect"), worst, 1e-12));
        sink.push(Check::at_most(format!("{name}.start_is_identity"), e0, 1e-14));
        sink.push(Check::at_most(format!("{name}.end_is_phi"), e1, 1e-14));
    }
    sink.csv("gamma_check.csv", &["phi", "t", "isometry_defect"], &rows)
}

// ----------------------------------------------------------------- aklt-sweep

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AkltParams {
    g: Vec<f64>,
}

impl Default for AkltParams {
    fn default() -> Self {
        Self {
            g: (1..=19).map(|k| k as f64 / 20.0).collect(),
        }
    }
}

#[derive(Serialize)]
struct AkltEndpoint {
    limit: f64,
    endpoint: f64,
    gap: f64,
}

fn aklt_sweep(p: &AkltParams, tol: &Tolerances, sink: &mut Sink) -> Result<(), CliError> {
    if p.g.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
        return Err(CliError::Config("aklt-sweep g values must lie in (0, 1)".into()));
    }
    let mut rows = Vec::new();
    let (mut spec_err, mut fp_err, mut f_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &g in &p.g {
        let a = aklt_path(g)?;
        let k = a.mats();
        let lam = 1.0 - 4.0 / 3.0 * g * g;
        let mut got = transfer_spectrum(k)?;
        got.sort_by(|x, y| y.re.total_cmp(&x.re));
        let mut want = [1.0, lam, lam, lam];
        want.sort_by(|x, y| y.total_cmp(x));
        for (z, w) in got.iter().zip(want) {
            spec_err = spec_err.max((z - c(w, 0.0)).norm());
        }
        let fp = fixed_point(k, tol)?;
        fp_err = fp_err.max((&fp.t - linalg::identity(2) * c(0.5, 0.0)).norm());
        let f = trace_invariant(&a);
        f_err = f_err.max((f - 2.0 * (1.0 - g * g).sqrt()).abs());
        let xi = correlation_length(k, tol)?;
        let lambda2 = fp.spectrum.get(1).map_or(0.0, |z| z.re);
        rows.push(vec![fmt_f64(g), fmt_f64(f), fmt_f64(xi), fmt_f64(lambda2)]);
    }
    sink.push(Check::at_most("transfer_spectrum_error", spec_err, 1e-10));
    sink.push(Check::at_most("fixed_point_error", fp_err, 1e-10));
    sink.push(Check::at_most("trace_invariant_error", f_err, 1e-10));
    let endpoint = trace_invariant(&k_tilde());
    sink.push(Check::equals("trace_invariant_k_tilde", endpoint, 1.0));
    let limit = trace_invariant(&aklt_path(f64::EPSILON)?);
    sink.push(Check::at_most(
        "trace_invariant_limit_error",
        (limit - 2.0).abs(),
        1e-10,
    ));
    sink.csv("aklt_sweep.csv", &["g", "f_value", "xi", "lambda2"], &rows)?;
    sink.json(
        "aklt_endpoint.json",
        &AkltEndpoint {
            limit,
            endpoint,
            gap: limit - endpoint,
        },
    )
}

// --------------------------------------------------------------- oracle-check

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OracleParams {
    samples: usize,
    max_d: usize,
    max_chi: usize,
    max_window: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            samples: 100,
            max_d: 4,
            max_chi: 2,
            max_window: 5,
        }
    }
}

fn random_observable(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<WindowObservable, MpsError> {
    WindowObservable::new((0..n).map(|_| linalg::random_gaussian(d, d, rng)).collect())
}

/// `(d, χ)` with `χ ≤ max_chi`, `χ² ≤ d ≤ max_d`, `d ≥ 2`.
fn random_dims(max_d: usize, max_chi: usize, rng: &mut ChaCha8Rng) -> Result<(usize, usize), CliError> {
    let chis: Vec<usize> = (1..=max_chi).filter(|&x| x * x <= max_d.max(2)).collect();
    if chis.is_empty() || max_d < 2 {
        return Err(CliError::Config(format!(
            "no core fits max_d = {max_d}, max_chi = {max_chi}"
        )));
    }
    let chi = chis[rng.random_range(0..chis.len())];
    let d = rng.random_range((chi * chi).max(2)..=max_d);
    Ok((d, chi))
}

fn oracle_check(p: &OracleParams, seed: Option<u64>, tol: &Tolerances, sink: &mut Sink) -> Result<(), CliError> {
    let mut rng = rng_for(seed);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for sample in 0..p.samples {
        let (d, chi) = random_dims(p.max_d, p.max_chi, &mut rng)?;
        let mut n = rng.random_range(1..=p.max_window.max(1));
        while n > 1 && d.pow(n as u32) > tol.window_cap {
            n -= 1;
        }
        let k = random_core(d, chi, tol, &mut rng)?;
        let obs = random_observable(d, n, &mut rng)?;
        let fp = fixed_point(&k, tol)?;
        let e = expectation(&k, &fp, &obs)?;
        let rho = window_density_matrix(&k, &fp, n, tol)?;
        let diff = (e - trace_with_product(&rho, &obs)).norm();
        worst = worst.max(diff);
        rows.push(vec![
            sample.to_string(),
            d.to_string(),
            chi.to_string(),
            n.to_string(),
            fmt_f64(e.re),
            fmt_f64(e.im),
            fmt_f64(diff),
        ]);
    }
    sink.push(Check::at_most("max_oracle_difference", worst, 1e-9));
    sink.csv(
        "oracle_check.csv",
        &["sample", "d", "chi", "n", "re", "im", "abs_diff"],
        &rows,
    )
}

// ---------------------------------------------------------------- gauge-check

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GaugeParams {
    samples: usize,
    max_d: usize,
    max_bond: usize,
    max_chi: usize,
}

impl Default for GaugeParams {
    fn default() -> Self {
        Self {
            samples: 100,
            max_d: 4,
            max_bond: 4,
            max_chi: 2,
        }
    }
}

fn max_entry_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn gauge_check(p: &GaugeParams, seed: Option<u64>, tol: &Tolerances, sink: &mut Sink) -> Result<(), CliError> {
    let mut rng = rng_for(seed);
    let mut rows = Vec::new();
    let (mut worst, mut mismatches, mut inequivalent): (f64, usize, usize) = (0.0, 0, 0);
    for sample in 0..p.samples {
        let (d, chi) = random_dims(p.max_d, p.max_chi, &mut rng)?;
        if p.max_bond < chi {
            return Err(CliError::Config(format!(
                "max_bond = {} is below χ = {chi}",
                p.max_bond
            )));
        }
        let bond = rng.random_range(chi..=p.max_bond);
        let a = random_in_e(d, bond, chi, tol, &mut rng)?;
        let g = GaugeMove::random(&a, tol, &mut rng)?;
        let b = apply_gauge(&a, &g, tol)?;
        let (ra, rb) = (essential_rank(&a, tol)?, essential_rank(&b, tol)?);
        if ra != rb {
            mismatches += 1;
        }
        let ka = canonical_decompose(&a, tol)?.k;
        let kb = canonical_decompose(&b, tol)?.k;
        let (fa, fb) = (fixed_point(&ka, tol)?, fixed_point(&kb, tol)?);
        // Every single- and two-site expectation is linear in these.
        let mut diff: f64 = 0.0;
        for n in 1..=2 {
            let rho_a = window_density_matrix(&ka, &fa, n, tol)?;
            let rho_b = window_density_matrix(&kb, &fb, n, tol)?;
            diff = diff.max(max_entry_diff(&rho_a, &rho_b));
            let obs = random_observable(d, n, &mut rng)?;
            diff = diff.max((expectation(&ka, &fa, &obs)? - expectation(&kb, &fb, &obs)?).norm());
        }
        if !gauge_equivalent(&a, &b, tol)? {
            inequivalent += 1;
        }
        worst = worst.max(diff);
        rows.push(vec![
            sample.to_string(),
            d.to_string(),
            bond.to_string(),
            chi.to_string(),
            ra.to_string(),
            rb.to_string(),
            fmt_f64(diff),
        ]);
    }
    sink.push(Check::at_most("max_expectation_difference", worst, 1e-9));
    sink.push(Check::equals("essential_rank_mismatches", mismatches as f64, 0.0));
    sink.push(Check::equals("gauge_inequivalent_pairs", inequivalent as f64, 0.0));
    sink.csv(
        "gauge_check.csv",
        &["sample", "d", "D", "chi", "rank_a", "rank_b", "max_diff"],
        &rows,
    )
}

// -------------------------------------------------------------- retract-sweep

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RetractParams {
    samples: usize,
    chis: Vec<usize>,
    /// Times written to the CSV for every sample.
    t: Vec<f64>,
}

impl Default for RetractParams {
    fn default() -> Self {
        Self {
            samples: 100,
            chis: vec![2, 3],
            t: (0..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

const EQUIVARIANCE_TIMES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

fn retract_sweep(p: &RetractParams, seed: Option<u64>, tol: &Tolerances, sink: &mut Sink) -> Result<(), CliError> {
    if p.chis.is_empty() || p.chis.iter().any(|&x| x < 2) {
        return Err(CliError::Config(
            "retract-sweep chis must be non-empty and at least 2".into(),
        ));
    }
    let mut rng = rng_for(seed);
    let mut rows = Vec::new();
    let (mut start_err, mut not_in_n, mut rank_not_lowered, mut inequivalent): (f64, usize, usize, usize) =
        (0.0, 0, 0, 0);
    for sample in 0..p.samples {
        let chi = p.chis[sample % p.chis.len()];
        let (d, bond) = (chi * chi, chi + 1);
        let a = random_in_e(d, bond, chi, tol, &mut rng)?;
        if !in_n(&a, tol)? {
            not_in_n += 1;
            continue;
        }
        start_err = start_err.max(retract(&a, 0.0, tol)?.tensor.distance(&a));
        let end = retract(&a, 1.0, tol)?;
        if canonical_decompose(&end.tensor, tol)?.chi >= chi {
            rank_not_lowered += 1;
        }
        let g = GaugeMove::random(&a, tol, &mut rng)?;
        let b = apply_gauge(&a, &g, tol)?;
        for t in EQUIVARIANCE_TIMES {
            let ha = retract(&a, t, tol)?.tensor;
            let hb = retract(&b, t, tol)?.tensor;
            if !gauge_equivalent(&ha, &hb, tol)? {
                inequivalent += 1;
            }
        }
        for &t in &p.t {
            let h = retract(&a, t, tol)?;
            let dec = canonical_decompose(&h.tensor, tol)?;
            rows.push(vec![
                sample.to_string(),
                chi.to_string(),
                fmt_f64(t),
                dec.chi.to_string(),
                fmt_f64(h.delta),
                fmt_f64(h.tensor.distance(&a)),
                fmt_f64(right_normalization_residual(&dec.k)),
            ]);
        }
    }
    sink.push(Check::equals("samples_outside_n", not_in_n as f64, 0.0));
    sink.push(Check::at_most("start_distance", start_err, 1e-12));
    sink.push(Check::equals(
        "endpoints_without_rank_drop",
        rank_not_lowered as f64,
        0.0,
    ));
    sink.push(Check::equals("gauge_inequivalent_pairs", inequivalent as f64, 0.0));
    sink.csv(
        "retract_sweep.csv",
        &["sample", "chi", "t", "essential_rank", "delta", "dist", "norm_residual"],
        &rows,
    )
}

// ------------------------------------------------------------- contract-sweep

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ContractParams {
    samples: usize,
    step: f64,
    max_d: usize,
    max_bond: usize,
    max_chi: usize,
}

impl Default for ContractParams {
    fn default() -> Self {
        Self {
            samples: 20,
            step: 0.1,
            max_d: 4,
            max_bond: 3,
            max_chi: 2,
        }
    }
}

fn contract_sweep(p: &ContractParams, seed: Option<u64>, tol: &Tolerances, sink: &mut Sink) -> Result<(), CliError> {
    let ss = grid(p.step)?;
    let mut rng = rng_for(seed);
    let mut rows = Vec::new();
    let (mut outside_e, mut end_err): (usize, f64) = (0, 0.0);
    for sample in 0..p.samples {
        let (d, chi) = random_dims(p.max_d, p.max_chi, &mut rng)?;
        if p.max_bond < chi {
            return Err(CliError::Config(format!(
                "max_bond = {} is below χ = {chi}",
                p.max_bond
            )));
        }
        let bond = rng.random_range(chi..=p.max_bond);
        let a = random_in_e(d, bond, chi, tol, &mut rng)?;
        let (d_out, bond_out) = contraction_dims(d, bond);
        let endpoint = contraction_endpoint(d_out, bond_out);
        for &s in &ss {
            let h = contraction_path(&a, s, tol)?;
            let rank = match canonical_decompose(&h, tol) {
                Ok(dec) => dec.chi.to_string(),
                Err(_) => {
                    outside_e += 1;
                    "NA".into()
                }
            };
            let dist = h.distance(&endpoint);
            if s == 1.0 {
                end_err = end_err.max(dist);
            }
            rows.push(vec![
                sample.to_string(),
                d.to_string(),
                bond.to_string(),
                fmt_f64(s),
                h.d().to_string(),
                h.bond().to_string(),
                rank,
                fmt_f64(dist),
            ]);
        }
    }
    sink.push(Check::equals("path_points_outside_e", outside_e as f64, 0.0));
    sink.push(Check::at_most("endpoint_distance", end_err, 1e-12));
    sink.csv(
        "contract_sweep.csv",
        &[
            "sample",
            "d",
            "D",
            "s",
            "d_out",
            "D_out",
            "essential_rank",
            "dist_to_endpoint",
        ],
        &rows,
    )
}

// ---------------------------------------------------------------------- chern

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ChernParams {
    family: String,
    family_params: serde_json::Value,
    /// JSON family spec; overrides `family` / `family_params`.
    family_file: Option<PathBuf>,
    meshes: Vec<[usize; 2]>,
    reversed: bool,
    expect: Option<i64>,
}

impl Default for ChernParams {
    fn default() -> Self {
        Self {
            family: "psi2".into(),
            family_params: serde_json::Value::Null,
            family_file: None,
            meshes: vec![[32, 32]],
            reversed: false,
            expect: None,
        }
    }
}

#[derive(Serialize)]
struct ChernJson {
    chern: i64,
    residual: f64,
    total: f64,
    flagged_plaquettes: Vec<usize>,
}

fn curvature_csv(sink: &mut Sink, name: &str, field: &CurvatureField) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = field
        .plaquettes
        .iter()
        .map(|p| {
            vec![
                p.id.to_string(),
                fmt_f64(p.theta_lo),
                fmt_f64(p.phi_lo),
                fmt_f64(p.curvature),
            ]
        })
        .collect();
    sink.csv(name, &["plaquette_id", "theta_lo", "phi_lo", "curvature"], &rows)
}

fn chern(p: &ChernParams, tol: &Tolerances, sink: &mut Sink) -> Result<(), CliError> {
    let spec = match &p.family_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<FamilySpec>(&text)
                .map_err(|e| CliError::Config(format!("malformed family file {}: {e}", path.display())))?
        }
        None => FamilySpec {
            family: p.family.clone(),
            params: p.family_params.clone(),
        },
    };
    let family = spec.build().map_err(|e| CliError::Config(e.to_string()))?;
    if p.meshes.is_empty() {
        return Err(CliError::Config("chern needs at least one mesh".into()));
    }
    for &[nt, np] in &p.meshes {
        let mut mesh = Mesh2::sphere(nt, np).map_err(|e| CliError::Config(e.to_string()))?;
        if p.reversed {
            mesh = mesh.reversed();
        }
        let field = curvature_report(&family, &mesh, tol)?;
        let (chern, residual) = field.nearest_integer();
        let tag = format!("{nt}x{np}");
        sink.push(Check::below(format!("{tag}.integer_residual"), residual, 1e-3));
        if let Some(want) = p.expect {
            sink.push(Check::equals(format!("{tag}.chern"), chern as f64, want as f64));
        }
        curvature_csv(sink, &format!("curvature_{tag}.csv"), &field)?;
        let summary = ChernJson {
            chern,
            residual,
            total: field.total,
            flagged_plaquettes: field.flagged.clone(),
        };
        sink.json(&format!("chern_{tag}.json"), &summary)?;
    }
    Ok(())
}

// -------------------------------------------------------------- pump-boundary

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PumpParams {
    meshes: Vec<[usize; 2]>,
    samples: usize,
    overlap_samples: usize,
    annulus_samples: usize,
}

impl Default for PumpParams {
    fn default() -> Self {
        Self {
            meshes: vec![[16, 16], [32, 32]],
            samples: 200,
            overlap_samples: 50,
            annulus_samples: 50,
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-6 {
            return v.map(|x| x / r);
        }
    }
}

fn random_s3(rng: &mut ChaCha8Rng) -> Result<PumpPoint, MpsError> {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-6 {
            let v = v.map(|x| x / r);
            return PumpPoint::new([v[0], v[1], v[2]], v[3]);
        }
    }
}

fn pump_boundary(p: &PumpParams, seed: Option<u64>, tol: &Tolerances, sink: &mut Sink) -> Result<(), CliError> {
    let mut rng = rng_for(seed);
    let mut rows = Vec::new();
    let point_row = |kind: &str, i: usize, w: [f64; 3], w4: f64, value: f64| {
        let mut r = vec![kind.to_string(), i.to_string()];
        r.extend(w.iter().chain([w4].iter()).map(|&x| fmt_f64(x)));
        r.push(fmt_f64(value));
        r
    };

    let mut rn: f64 = 0.0;
    for i in 0..p.samples {
        let pt = random_s3(&mut rng)?;
        let mut worst: f64 = 0.0;
        if pt.w4 > -0.5 {
            worst = worst.max(right_normalization_residual(
                &canonical_decompose(&pump_north(&pt)?, tol)?.k,
            ));
        }
        if pt.w4 < 0.5 {
            worst = worst.max(right_normalization_residual(
                &canonical_decompose(&pump_south(&pt)?, tol)?.k,
            ));
        }
        rn = rn.max(worst);
        rows.push(point_row("normalization", i, pt.w, pt.w4, worst));
    }
    sink.push(Check::at_most("core_normalization_residual", rn, 1e-10));

    let (mut fid_min, mut inequivalent): (f64, usize) = (1.0, 0);
    for i in 0..p.overlap_samples {
        let w4: f64 = rng.random_range(-0.5..0.5);
        let dir = random_direction(&mut rng);
        let r = (1.0 - w4 * w4).sqrt();
        let pt = PumpPoint::new(dir.map(|x| r * x), w4)?;
        let (north, south) = (pump_north(&pt)?, pump_south(&pt)?);
        let kn = canonical_decompose(&north, tol)?.k;
        let ks = canonical_decompose(&south, tol)?.k;
        let fid = if kn[0].nrows() == ks[0].nrows() {
            fidelity_per_site(&kn, &ks)?
        } else {
            0.0
        };
        fid_min = fid_min.min(fid);
        if !gauge_equivalent(&north, &south, tol)? {
            inequivalent += 1;
        }
        rows.push(point_row("overlap", i, pt.w, pt.w4, fid));
    }
    sink.push(Check::at_least("overlap_min_fidelity", fid_min, 1.0 - 1e-9));
    sink.push(Check::equals("overlap_inequivalent_points", inequivalent as f64, 0.0));

    let mut branch: f64 = 0.0;
    for i in 0..p.annulus_samples {
        let r = rng.random_range(0.5..3f64.sqrt() / 2.0);
        let v = random_direction(&mut rng).map(|x| r * x);
        let gap = pump_lift_north(v)?.distance(&pump_lift_south(v)?);
        branch = branch.max(gap);
        rows.push(point_row("annulus", i, v, f64::NAN, gap));
    }
    sink.push(Check::at_most("lift_branch_disagreement", branch, 1e-10));
    sink.csv(
        "pump_samples.csv",
        &["kind", "index", "x1", "x2", "x3", "w4", "value"],
        &rows,
    )?;

    for &[nt, np] in &p.meshes {
        let rep = pump_boundary_report(nt, np, tol)?;
        let tag = format!("{nt}x{np}");
        sink.push(Check::equals(format!("{tag}.boundary_chern"), rep.chern as f64, 1.0));
        sink.push(Check::below(format!("{tag}.integer_residual"), rep.residual, 1e-3));
        sink.push(Check::at_most(format!("{tag}.frame_defect"), rep.frame_defect, 1e-10));
        sink.json(&format!("pump_boundary_{tag}.json"), &rep)?;
    }
    Ok(())
}

// ------------------------------------------------------------ argument layer

#[derive(Debug, Parser)]
#[command(name = "imps", version, about = "Injective MPS experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct Common {
    /// TOML config; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override, e.g. `--tol eps_rank=1e-10` (repeatable).
    #[arg(long = "tol", value_name = "KEY=VAL")]
    tol: Vec<String>,
    /// Raw parameter override, e.g. `--param samples=10` (repeatable; TOML
    /// value syntax).
    #[arg(long = "param", value_name = "KEY=VAL")]
    param: Vec<String>,
}

#[derive(Debug, Args)]
struct Samples {
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment named in a config file.
    Run {
        #[arg(value_name = "CONFIG")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Isometry defect of Γ(t) and exactness of its endpoints.
    GammaCheck {
        /// shift, triple or both.
        #[arg(long)]
        phi: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Transfer spectrum, fixed point and trace invariant along K(g).
    AkltSweep {
        /// Comma-separated g values.
        #[arg(long, value_delimiter = ',')]
        g: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Transfer-map expectations against brute-force density matrices.
    OracleCheck {
        #[command(flatten)]
        samples: Samples,
        #[command(flatten)]
        common: Common,
    },
    /// Expectations and essential rank under random gauge moves.
    GaugeCheck {
        #[command(flatten)]
        samples: Samples,
        #[command(flatten)]
        common: Common,
    },
    /// Deformation retraction endpoints and gauge equivariance.
    RetractSweep {
        #[command(flatten)]
        samples: Samples,
        #[command(flatten)]
        common: Common,
    },
    /// Contraction path membership and endpoint.
    ContractSweep {
        #[command(flatten)]
        samples: Samples,
        #[command(flatten)]
        common: Common,
    },
    /// Plaquette curvature and Chern number of a family over S².
    Chern {
        /// psi2, pump, aklt or custom.
        #[arg(long)]
        family: Option<String>,
        /// JSON family spec file.
        #[arg(long)]
        family_file: Option<PathBuf>,
        /// Mesh size `NTHETAxNPHI` (repeatable).
        #[arg(long)]
        mesh: Vec<String>,
        /// Slice of the pump family.
        #[arg(long)]
        w4: Option<f64>,
        /// Parameter of the constant AKLT family.
        #[arg(long)]
        g: Option<f64>,
        #[arg(long)]
        reversed: bool,
        /// Expected integer; a mismatch fails the run.
        #[arg(long)]
        expect: Option<i64>,
        #[command(flatten)]
        common: Common,
    },
    /// Pump chart checks and the boundary-generator Chern number.
    PumpBoundary {
        /// Mesh size `NTHETAxNPHI` (repeatable).
        #[arg(long)]
        mesh: Vec<String>,
        #[command(flatten)]
        samples: Samples,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_mesh(s: &str) -> Result<toml::Value, CliError> {
    let bad = || CliError::Config(format!("mesh {s:?} is not of the form NxM"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let a: i64 = a.trim().parse().map_err(|_| bad())?;
    let b: i64 = b.trim().parse().map_err(|_| bad())?;
    Ok(toml::Value::Array(vec![a.into(), b.into()]))
}

fn parse_kv(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::Config(format!("expected KEY=VAL, got {s:?}")))
}

fn load_config(experiment: Experiment, common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let config = ExperimentConfig::from_toml(&text)?;
            if config.experiment != experiment {
                return Err(CliError::Config(format!(
                    "config is for {}, not {}",
                    config.experiment.name(),
                    experiment.name()
                )));
            }
            config
        }
        None => ExperimentConfig::new(experiment),
    };
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    for kv in &common.tol {
        config
            .tolerances
            .apply_override(kv)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    for kv in &common.param {
        let (k, v) = parse_kv(kv)?;
        let wrapped = format!("x = {v}");
        let value = toml::from_str::<toml::Table>(&wrapped)
            .ok()
            .and_then(|mut t| t.remove("x"))
            .unwrap_or_else(|| toml::Value::String(v.to_string()));
        config.params.insert(k.to_string(), value);
    }
    Ok(config)
}

fn config_from_command(command: Command) -> Result<ExperimentConfig, CliError> {
    let set_samples = |mut c: ExperimentConfig, s: Samples| {
        if let Some(n) = s.samples {
            c.params.insert("samples".into(), toml::Value::Integer(n as i64));
        }
        c
    };
    Ok(match command {
        Command::Run { file, common } => {
            let text = fs::read_to_string(&file)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
            let experiment = ExperimentConfig::from_toml(&text)?.experiment;
            load_config(
                experiment,
                &Common {
                    config: Some(file),
                    ..common
                },
            )?
        }
        Command::GammaCheck { phi, common } => {
            let mut c = load_config(Experiment::GammaCheck, &common)?;
            if let Some(phi) = phi {
                c.params.insert("phi".into(), phi.into());
            }
            c
        }
        Command::AkltSweep { g, common } => {
            let mut c = load_config(Experiment::AkltSweep, &common)?;
            if let Some(g) = g {
                c.params
                    .insert("g".into(), toml::Value::Array(g.into_iter().map(Into::into).collect()));
            }
            c
        }
        Command::OracleCheck { samples, common } => {
            set_samples(load_config(Experiment::OracleCheck, &common)?, samples)
        }
        Command::GaugeCheck { samples, common } => set_samples(load_config(Experiment::GaugeCheck, &common)?, samples),
        Command::RetractSweep { samples, common } => {
            set_samples(load_config(Experiment::RetractSweep, &common)?, samples)
        }
        Command::ContractSweep { samples, common } => {
            set_samples(load_config(Experiment::ContractSweep, &common)?, samples)
        }
        Command::Chern {
            family,
            family_file,
            mesh,
            w4,
            g,
            reversed,
            expect,
            common,
        } => {
            let mut c = load_config(Experiment::Chern, &common)?;
            if let Some(f) = family {
                c.params.insert("family".into(), f.into());
            }
            if let Some(path) = family_file {
                c.params.insert("family_file".into(), path.display().to_string().into());
            }
            if !mesh.is_empty() {
                let meshes = mesh.iter().map(|m| parse_mesh(m)).collect::<Result<Vec<_>, _>>()?;
                c.params.insert("meshes".into(), toml::Value::Array(meshes));
            }
            let mut fp = toml::Table::new();
            if let Some(w4) = w4 {
                fp.insert("w4".into(), w4.into());
            }
            if let Some(g) = g {
                fp.insert("g".into(), g.into());
            }
            if !fp.is_empty() {
                c.params.insert("family_params".into(), toml::Value::Table(fp));
            }
            if reversed {
                c.params.insert("reversed".into(), true.into());
            }
            if let Some(e) = expect {
                c.params.insert("expect".into(), e.into());
            }
            c
        }
        Command::PumpBoundary { mesh, samples, common } => {
            let mut c = load_config(Experiment::PumpBoundary, &common)?;
            if !mesh.is_empty() {
                let meshes = mesh.iter().map(|m| parse_mesh(m)).collect::<Result<Vec<_>, _>>()?;
                c.params.insert("meshes".into(), toml::Value::Array(meshes));
            }
            set_samples(c, samples)
        }
    })
}

fn summary_text(report: &RunReport, dir: &Path) -> String {
    let mut s = String::new();
    for chk in &report.checks {
        let _ = writeln!(
            s,
            "{} {} = {} (limit {})",
            if chk.pass { "PASS" } else { "FAIL" },
            chk.name,
            fmt_f64(chk.value),
            fmt_f64(chk.limit)
        );
    }
    if let Some(e) = &report.error {
        let _ = writeln!(s, "ERROR {e}");
    }
    let _ = write!(s, "{} -> {}", report.meta.experiment, dir.display());
    s
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match config_from_command(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match run(&config) {
        Ok(report) => {
            let dir = config
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("imps-out").join(config.experiment.name()));
            println!("{}", summary_text(&report, &dir));
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(ExperimentConfig::from_toml("experiment = \"chern\"\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"\n").is_err());
        let c = ExperimentConfig::from_toml(
            "experiment = \"gauge-check\"\nseed = 3\n[tolerances]\neps_rank = 1e-10\n[params]\nsamples = 2\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.tolerances.eps_rank, 1e-10);
        assert!(ExperimentConfig::from_toml("experiment = \"chern\"\n[tolerances]\nfoo = 1\n").is_err());
    }

    #[test]
    fn randomized_runs_need_a_seed() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::new(Experiment::OracleCheck).with_out(dir.path());
        assert_eq!(run(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unknown_params_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::new(Experiment::GammaCheck)
            .with_out(dir.path())
            .with_param("blok", 3);
        assert_eq!(run(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn argument_definitions() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn mesh_parsing() {
        assert_eq!(
            parse_mesh("32x16").unwrap(),
            toml::Value::Array(vec![32.into(), 16.into()])
        );
        assert!(parse_mesh("32").is_err());
    }

    #[test]
    fn float_format() {
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1e-15), "1e-15");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            main_with_args(["imps", "gamma-check", "--phi", "shift", "--out", out]),
            0
        );
        assert_eq!(
            main_with_args(["imps", "gamma-check", "--phi", "sqrt", "--out", out]),
            2
        );
        assert_eq!(main_with_args(["imps", "frobnicate"]), 2);
        assert_eq!(main_with_args(["imps", "gauge-check", "--out", out]), 2);
        // An impossible expectation is an assertion failure.
        assert_eq!(
            main_with_args(["imps", "chern", "--family", "psi2", "--mesh", "8x8", "--expect", "3", "--out", out]),
            1
        );
    }
}
