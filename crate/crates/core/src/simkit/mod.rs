//! Physics-based synthetic corpus generation.
//!
//! The pipeline mirrors how a simulated dataset is manufactured from a real
//! one: fit the six effective transport/binding parameters of a 1D
//! cylindrical-pore model to each measured curve, model the fitted sets with
//! a multivariate Gaussian in log10 space, sample fresh parameter sets from
//! it, simulate their responses, and superimpose white Gaussian noise at
//! realistic S/N levels.

pub mod dist;
pub mod fit;
pub mod isotherm;
pub mod lda;
pub mod noise;
pub mod pore;

pub use dist::{fit_param_distribution, sample_params, ParameterDistribution};
pub use fit::{fit_params_to_curve, CurveFit, FitOptions};
pub use isotherm::{fit_isotherm, redlich_peterson, IsothermFit, IsothermParameters};
pub use lda::lda_project;
pub use noise::{add_noise, NoiseSpec};
pub use pore::{
    simulate_response, simulate_response_detailed, ResponseMapping, SimOptions, SimulationAudit,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Molar mass used to convert mg/mL analyte concentrations to molarity.
pub const BSA_MOLECULAR_WEIGHT_G_PER_MOL: f64 = 66_430.0;

/// Default pore depth of the sensing film, in µm.
pub const DEFAULT_FILM_THICKNESS_UM: f64 = 3.63;

/// Names of the six fitted parameters, in their canonical vector order.
pub const FITTED_PARAM_NAMES: [&str; 6] = ["k_a", "k_d", "b_max", "d_pore", "d_bulk", "r_h"];

/// Allowed range of each fitted parameter (linear units, canonical order):
/// association rate (M⁻¹s⁻¹), dissociation rate (s⁻¹), surface binding-site
/// concentration (mol·m⁻²), pore diameter (nm), bulk diffusion coefficient
/// (m²·s⁻¹), hydrodynamic radius (nm).
pub const PARAM_BOUNDS: [(f64, f64); 6] = [
    (1e1, 1e4),
    (1e-5, 1e0),
    (1e-8, 1e-4),
    (15.0, 35.0),
    (1e-11, 1e-9),
    (4.0, 6.0),
];

/// [`PARAM_BOUNDS`] in log10 space, the coordinates all fitting and sampling
/// happens in.
pub fn log10_bounds() -> [(f64, f64); 6] {
    PARAM_BOUNDS.map(|(lo, hi)| (lo.log10(), hi.log10()))
}

/// Conditions fixed by the experiment rather than fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConditions {
    pub c_bulk_mg_per_ml: f64,
    pub film_thickness_um: f64,
}

impl Default for ExperimentConditions {
    fn default() -> Self {
        ExperimentConditions {
            c_bulk_mg_per_ml: 1.0,
            film_thickness_um: DEFAULT_FILM_THICKNESS_UM,
        }
    }
}

/// The six fitted physical quantities plus the fixed experimental
/// conditions, everything the pore solver needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParameters {
    /// Association rate constant, M⁻¹·s⁻¹.
    pub k_a: f64,
    /// Dissociation rate constant, s⁻¹.
    pub k_d: f64,
    /// Surface binding-site concentration, mol·m⁻².
    pub b_max: f64,
    /// Pore diameter, nm.
    pub d_pore: f64,
    /// Bulk diffusion coefficient, m²·s⁻¹.
    pub d_bulk: f64,
    /// Hydrodynamic radius of the analyte, nm.
    pub r_h: f64,
    /// Bulk analyte concentration, mg·mL⁻¹.
    pub c_bulk: f64,
    /// Pore depth, µm.
    pub film_thickness_um: f64,
}

impl SimulationParameters {
    pub fn from_log10(fitted: [f64; 6], conditions: &ExperimentConditions) -> Self {
        let lin = fitted.map(|v| 10f64.powf(v));
        SimulationParameters {
            k_a: lin[0],
            k_d: lin[1],
            b_max: lin[2],
            d_pore: lin[3],
            d_bulk: lin[4],
            r_h: lin[5],
            c_bulk: conditions.c_bulk_mg_per_ml,
            film_thickness_um: conditions.film_thickness_um,
        }
    }

    pub fn fitted(&self) -> [f64; 6] {
        [self.k_a, self.k_d, self.b_max, self.d_pore, self.d_bulk, self.r_h]
    }

    pub fn fitted_log10(&self) -> [f64; 6] {
        self.fitted().map(f64::log10)
    }

    /// Molar bulk concentration, mol/L.
    pub fn c_bulk_molar(&self) -> f64 {
        self.c_bulk / BSA_MOLECULAR_WEIGHT_G_PER_MOL
    }

    /// Checks the fitted parameters against [`PARAM_BOUNDS`] and the pore
    /// geometry constraint 2·r_h < d_pore.
    pub fn validate_bounds(&self) -> Result<()> {
        for ((value, (lo, hi)), name) in self
            .fitted()
            .iter()
            .zip(PARAM_BOUNDS)
            .zip(FITTED_PARAM_NAMES)
        {
            if !(lo..=hi).contains(value) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {value} outside its allowed range [{lo}, {hi}]"
                )));
            }
        }
        if 2.0 * self.r_h >= self.d_pore {
            return Err(Error::PoreBlocked {
                solute_nm: 2.0 * self.r_h,
                pore_nm: self.d_pore,
            });
        }
        if self.c_bulk < 0.0 || !(self.film_thickness_um > 0.0) {
            return Err(Error::InvalidInput(
                "concentration must be nonnegative and film thickness positive".into(),
            ));
        }
        Ok(())
    }

    pub fn in_bounds(&self) -> bool {
        self.validate_bounds().is_ok()
    }
}
