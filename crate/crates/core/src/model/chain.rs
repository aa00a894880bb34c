use serde::{Deserialize, Serialize};

use super::{equilibrium_gap, linearize, IdmParams, LinearCoeffs, ModelError};

/// One vehicle of an open string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub params: IdmParams,
    #[serde(default)]
    pub automated: bool,
}

impl Vehicle {
    pub fn human(params: IdmParams) -> Self {
        Self {
            params,
            automated: false,
        }
    }

    pub fn automated(params: IdmParams) -> Self {
        Self {
            params,
            automated: true,
        }
    }
}

/// Ordered heterogeneous vehicle string behind a virtual leader that keeps
/// the equilibrium speed `v_eq`.
///
/// Index 0 of `vehicles` is vehicle 1 (the first follower of the virtual
/// leader).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleChain {
    pub vehicles: Vec<Vehicle>,
    pub v_eq: f64,
}

impl VehicleChain {
    pub fn new(vehicles: Vec<Vehicle>, v_eq: f64) -> Self {
        Self { vehicles, v_eq }
    }

    pub fn homogeneous(params: IdmParams, count: usize, v_eq: f64) -> Self {
        Self::new(vec![Vehicle::human(params); count], v_eq)
    }

    pub fn from_params(params: impl IntoIterator<Item = IdmParams>, v_eq: f64) -> Self {
        Self::new(params.into_iter().map(Vehicle::human).collect(), v_eq)
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Checks the chain is nonempty, every vehicle is valid and an
    /// equilibrium exists for each at `v_eq`.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vehicles.is_empty() {
            return Err(ModelError::EmptyChain);
        }
        for v in &self.vehicles {
            v.params.validate()?;
            equilibrium_gap(self.v_eq, &v.params)?;
        }
        Ok(())
    }

    /// Linearized coefficients of every vehicle at `v_eq`.
    pub fn coeffs(&self) -> Result<Vec<LinearCoeffs>, ModelError> {
        if self.vehicles.is_empty() {
            return Err(ModelError::EmptyChain);
        }
        self.vehicles
            .iter()
            .map(|v| linearize(&v.params, self.v_eq))
            .collect()
    }

    /// Net equilibrium gaps of every vehicle at `v_eq`.
    pub fn equilibrium_gaps(&self) -> Result<Vec<f64>, ModelError> {
        self.vehicles
            .iter()
            .map(|v| equilibrium_gap(self.v_eq, &v.params))
            .collect()
    }

    pub fn automated_indices(&self) -> Vec<usize> {
        self.vehicles
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.automated.then_some(i))
            .collect()
    }
}
