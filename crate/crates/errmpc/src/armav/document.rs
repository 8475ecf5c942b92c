//! JSON round trip for fitted models.

use super::{ArmavError, ArmavModel, Stationarity};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Serialisable form of a fitted model. Matrices are stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub mean: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub residual_variance: Vec<f64>,
    pub stationarity: String,
}

fn row_major(mat: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = mat.shape();
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| mat[(i, j)])
        .collect()
}

fn from_row_major(data: &[f64], r: usize, what: &str) -> Result<DMatrix<f64>, ArmavError> {
    if data.len() != r * r {
        return Err(ArmavError::DimensionMismatch(format!(
            "{what} has {} entries, expected {}",
            data.len(),
            r * r
        )));
    }
    Ok(DMatrix::from_row_slice(r, r, data))
}

impl ModelDocument {
    pub fn from_model(model: &ArmavModel) -> Self {
        Self {
            n: model.ar_order(),
            m: model.ma_order(),
            r: model.dim(),
            mean: model.mean().iter().cloned().collect(),
            phi: model.phi().iter().map(row_major).collect(),
            theta: model.theta().iter().map(row_major).collect(),
            residual_variance: row_major(model.residual_variance()),
            stationarity: match model.stationarity() {
                Stationarity::Strict => "strict".into(),
                Stationarity::Marginal => "marginal".into(),
            },
        }
    }

    /// Rebuilds a model with cold buffers. Shape mismatches and
    /// non-stationary parameter sets are rejected; the stationarity label is
    /// recomputed rather than trusted.
    pub fn into_model(self) -> Result<ArmavModel, ArmavError> {
        if self.mean.len() != self.r {
            return Err(ArmavError::DimensionMismatch(format!(
                "mean has {} entries, expected {}",
                self.mean.len(),
                self.r
            )));
        }
        if self.phi.len() != self.n || self.theta.len() != self.m {
            return Err(ArmavError::DimensionMismatch(format!(
                "document declares orders ({}, {}) but carries {} AR and {} MA matrices",
                self.n,
                self.m,
                self.phi.len(),
                self.theta.len()
            )));
        }
        let phi = self
            .phi
            .iter()
            .map(|p| from_row_major(p, self.r, "an AR matrix"))
            .collect::<Result<Vec<_>, _>>()?;
        let theta = self
            .theta
            .iter()
            .map(|t| from_row_major(t, self.r, "an MA matrix"))
            .collect::<Result<Vec<_>, _>>()?;
        let variance = from_row_major(&self.residual_variance, self.r, "residual variance")?;
        let mut model =
            ArmavModel::from_parameters(phi, theta, DVector::from_vec(self.mean))?;
        model.set_residual_variance(variance);
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
