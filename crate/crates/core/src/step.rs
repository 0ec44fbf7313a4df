//! Right-continuous step functions over time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A right-continuous step function: `initial_value` on `(-inf, knots[0])`
/// and `values[l]` on `[knots[l], knots[l+1])`. Survival curves and
/// cumulative hazards are both represented this way.
///
/// Knots must be strictly increasing; an empty knot list is the constant
/// function `initial_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, initial_value: f64) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidStepFunction(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStepFunction("non-finite entry".into()));
        }
        if !initial_value.is_finite() {
            return Err(Error::InvalidStepFunction("non-finite initial value".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidStepFunction("knots not strictly increasing".into()));
        }
        Ok(Self { knots, values, initial_value })
    }

    /// The constant function `value`.
    pub fn constant(value: f64) -> Self {
        Self { knots: Vec::new(), values: Vec::new(), initial_value: value }
    }

    /// Value at time `t`. Right-continuous: at a knot the new value applies.
    pub fn eval(&self, t: f64) -> f64 {
        // number of knots <= t
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == 0 {
            self.initial_value
        } else {
            self.values[idx - 1]
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    /// Apply `f` to every value (including the initial one).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.knots.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            f(self.initial_value),
        )
    }
}
