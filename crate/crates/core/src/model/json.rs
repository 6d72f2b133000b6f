//! JSON form of a [`DecoupledModel`]:
//!
//! ```json
//! {
//!   "L": 2,
//!   "dims": [m, r_1, ..., r_L, n],
//!   "basis": "monomial",
//!   "degrees": [d_1, ..., d_L],
//!   "weights": [W_0, ..., W_L],
//!   "coeffs": [[[c_0, ..., c_d], ...], ...]
//! }
//! ```
//!
//! Each weight matrix is an array of rows. `coeffs[ℓ-1][j]` lists the
//! coefficients of neuron `j` of layer `ℓ`, constant first.

use serde::{Deserialize, Serialize};

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::tensor::Mat;

use super::DecoupledModel;

#[derive(Serialize, Deserialize)]
struct ModelJson {
    #[serde(rename = "L")]
    l: usize,
    dims: Vec<usize>,
    basis: BasisKind,
    degrees: Vec<usize>,
    weights: Vec<Mat>,
    coeffs: Vec<Vec<Vec<f64>>>,
}

impl From<&DecoupledModel> for ModelJson {
    fn from(m: &DecoupledModel) -> Self {
        let mut dims = vec![m.input_dim()];
        dims.extend(m.ranks());
        dims.push(m.output_dim());
        ModelJson {
            l: m.n_layers(),
            dims,
            basis: BasisKind::Monomial,
            degrees: m.degrees(),
            weights: m.weights().to_vec(),
            coeffs: m.coeffs().to_vec(),
        }
    }
}

impl TryFrom<ModelJson> for DecoupledModel {
    type Error = Error;

    fn try_from(j: ModelJson) -> Result<Self> {
        let model = DecoupledModel::new(j.weights, j.coeffs)?;
        let mut dims = vec![model.input_dim()];
        dims.extend(model.ranks());
        dims.push(model.output_dim());
        if j.l != model.n_layers() || j.dims != dims || j.degrees != model.degrees() {
            return Err(Error::Format(format!(
                "header L={} dims={:?} degrees={:?} disagrees with the stored matrices",
                j.l, j.dims, j.degrees
            )));
        }
        Ok(model)
    }
}

impl Serialize for DecoupledModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DecoupledModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ModelJson::deserialize(d)?;
        DecoupledModel::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl DecoupledModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
