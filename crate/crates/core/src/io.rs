//! JSON encodings for tensors, observables and family specifications.
//!
//! Complex numbers are `[re, im]`; matrices are lists of rows.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{MpsError, Result};
use crate::families::{self, ParamFamily, SpherePoint};
use crate::linalg::{c, CMat};
use crate::mps_core::MpsTensor;
use crate::transfer::WindowObservable;

type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorJson {
    pub d: usize,
    #[serde(rename = "D")]
    pub bond: usize,
    pub mats: Vec<JsonMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableJson {
    pub d: usize,
    pub factors: Vec<JsonMatrix>,
}

fn encode_matrix(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn decode_matrix(rows: &JsonMatrix, n: usize, what: &str) -> Result<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(MpsError::InvalidTensor(format!("{what} is not {n}x{n}")));
    }
    let mut m = crate::linalg::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(MpsError::InvalidTensor(format!(
                    "{what} has a non-finite entry at ({i}, {j})"
                )));
            }
            m[(i, j)] = c(z[0], z[1]);
        }
    }
    Ok(m)
}

impl TensorJson {
    pub fn from_tensor(a: &MpsTensor) -> Self {
        Self {
            d: a.d(),
            bond: a.bond(),
            mats: a.mats().iter().map(encode_matrix).collect(),
        }
    }

    pub fn to_tensor(&self) -> Result<MpsTensor> {
        if self.d == 0 || self.bond == 0 {
            return Err(MpsError::InvalidTensor("d and D must be positive".into()));
        }
        if self.mats.len() != self.d {
            return Err(MpsError::InvalidTensor(format!(
                "d = {} but {} matrices given",
                self.d,
                self.mats.len()
            )));
        }
        let mats = self
            .mats
            .iter()
            .enumerate()
            .map(|(i, m)| decode_matrix(m, self.bond, &format!("matrix {i}")))
            .collect::<Result<Vec<_>>>()?;
        MpsTensor::new(mats)
    }
}

impl ObservableJson {
    pub fn from_observable(obs: &WindowObservable) -> Self {
        Self {
            d: obs.d(),
            factors: obs.factors().iter().map(encode_matrix).collect(),
        }
    }

    pub fn to_observable(&self) -> Result<WindowObservable> {
        let factors = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, m)| decode_matrix(m, self.d, &format!("factor {i}")))
            .collect::<Result<Vec<_>>>()?;
        WindowObservable::new(factors)
    }
}

fn json_err(e: serde_json::Error) -> MpsError {
    MpsError::InvalidTensor(format!("malformed JSON: {e}"))
}

pub fn tensor_from_json(s: &str) -> Result<MpsTensor> {
    serde_json::from_str::<TensorJson>(s).map_err(json_err)?.to_tensor()
}

pub fn tensor_to_json(a: &MpsTensor) -> String {
    serde_json::to_string(&TensorJson::from_tensor(a)).expect("finite tensor serializes")
}

pub fn observable_from_json(s: &str) -> Result<WindowObservable> {
    serde_json::from_str::<ObservableJson>(s)
        .map_err(json_err)?
        .to_observable()
}

/// `{"family": "psi2" | "pump" | "aklt" | "custom", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PumpParams {
    /// Slice `w₄ = const`; omitted means the boundary map of the lift.
    w4: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AkltParams {
    g: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomParams {
    tensors: Vec<TensorJson>,
    charts: Vec<String>,
}

fn params<T: serde::de::DeserializeOwned>(family: &str, v: &Value) -> Result<T> {
    let v = if v.is_null() {
        Value::Object(Default::default())
    } else {
        v.clone()
    };
    serde_json::from_value(v).map_err(|e| MpsError::InvalidParameter(format!("params of {family}: {e}")))
}

impl FamilySpec {
    pub fn named(family: &str) -> Self {
        Self {
            family: family.into(),
            params: Value::Null,
        }
    }

    /// Builds the family over mesh vertices of `S²`.
    pub fn build(&self) -> Result<ParamFamily<SpherePoint>> {
        match self.family.as_str() {
            "psi2" => params::<serde_json::Map<String, Value>>("psi2", &self.params).and_then(|m| {
                if m.is_empty() {
                    Ok(families::psi2_family())
                } else {
                    Err(MpsError::InvalidParameter("psi2 takes no params".into()))
                }
            }),
            "pump" => match params::<PumpParams>("pump", &self.params)?.w4 {
                Some(w4) => families::pump_slice_family(w4),
                None => Ok(families::pump_boundary_family()),
            },
            "aklt" => {
                let p: AkltParams = params("aklt", &self.params)?;
                Ok(families::constant_family(families::aklt_path(p.g)?))
            }
            "custom" => {
                let p: CustomParams = params("custom", &self.params)?;
                let tensors = p
                    .tensors
                    .iter()
                    .map(TensorJson::to_tensor)
                    .collect::<Result<Vec<_>>>()?;
                families::custom_family(tensors, p.charts)
            }
            other => Err(MpsError::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

pub fn family_from_json(s: &str) -> Result<ParamFamily<SpherePoint>> {
    serde_json::from_str::<FamilySpec>(s)
        .map_err(|e| MpsError::InvalidParameter(format!("malformed family JSON: {e}")))?
        .build()
}
