//! Constitutive pieces of the model: cell potential, mobilities, sources,
//! therapy profiles. Everything here is a pure function of its arguments.

mod params;
mod potential;
mod sources;
mod therapy;

pub use params::ModelParams;
pub use potential::{psi, psi1, psi1_prime, psi1_second, psi2, psi2_prime, psi_prime};
pub use sources::{
    heaviside_reg, mobility, mobility_factor, nutrient_kinetics, source_angio, source_necrotic,
    source_nutrient, source_taf, source_viable, uniform_steady_state, velocity_factor,
    NutrientKinetics,
};
pub use therapy::{RateInterval, TherapySchedule};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
}
