//! The universal unit of data: a timestamped, baseline-normalized sensor
//! response series with concentration metadata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Experimental,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub id: String,
    pub concentration_mg_per_ml: f64,
    pub source: Source,
}

impl CurveMeta {
    pub fn simulated(id: impl Into<String>, concentration_mg_per_ml: f64) -> Self {
        CurveMeta {
            id: id.into(),
            concentration_mg_per_ml,
            source: Source::Simulated,
        }
    }

    pub fn experimental(id: impl Into<String>, concentration_mg_per_ml: f64) -> Self {
        CurveMeta {
            id: id.into(),
            concentration_mg_per_ml,
            source: Source::Experimental,
        }
    }
}

/// Fractional optical-thickness change per timestep, starting at zero by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    pub times_s: Vec<f64>,
    pub response: Vec<f64>,
    pub meta: CurveMeta,
}

impl ResponseCurve {
    /// Builds a curve, validating that times are strictly increasing, the
    /// series lengths match, and every value is finite.
    pub fn new(times_s: Vec<f64>, response: Vec<f64>, meta: CurveMeta) -> Result<Self> {
        if times_s.len() != response.len() {
            return Err(Error::ShapeMismatch(format!(
                "curve {:?}: {} timestamps vs {} samples",
                meta.id,
                times_s.len(),
                response.len()
            )));
        }
        if times_s.is_empty() {
            return Err(Error::InvalidInput(format!("curve {:?} is empty", meta.id)));
        }
        if times_s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "curve {:?}: timestamps must be strictly increasing",
                meta.id
            )));
        }
        if times_s.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(ResponseCurve {
            times_s,
            response,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    /// Final sample, the measured equilibrium proxy.
    pub fn final_response(&self) -> f64 {
        *self.response.last().expect("curve is never empty")
    }

    pub fn duration_s(&self) -> f64 {
        self.times_s.last().unwrap() - self.times_s[0]
    }
}
