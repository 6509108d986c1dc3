//! Finite-element simulator for a four-phase tumor growth model with
//! angiogenesis: viable and necrotic tumor cells evolve by degenerate
//! Cahn-Hilliard equations with chemotaxis, tumor-induced vasculature by a
//! Keller-Segel system, and nutrient and angiogenic factor by
//! reaction-diffusion equations.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod diagnostics;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod model;
pub mod scalar;
pub mod scheme;

pub use scalar::Real;

pub type Mesh = mesh::SimplicialMesh<f64>;
pub type Params = model::ModelParams<f64>;
pub type Schedule = model::TherapySchedule<f64>;
pub type State = scheme::SimulationState<f64>;
