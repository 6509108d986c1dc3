//! Time integrator: the decoupled chemical and vascular solves, the outer
//! fixed-point iteration (forcing, nodewise projections, coupled linear
//! solve) for the two tumor phases, and adaptive time stepping with step
//! rejection on constraint violations.

mod chemicals;
mod integrator;
mod phases;
mod velocity;

pub use chemicals::{implicit_reaction_diffusion, step_chemicals, upwind_drift, Chemicals};
pub use integrator::{Integrator, StepOutcome};
pub use phases::{
    classify_nodes, passive_update, project_nodewise, project_scalar, step_forcing, ActiveSets, CoupledSystem,
    ExplicitTerms, Phase, PhaseIterate,
};
pub use velocity::{adaptive_dt, cell_velocity, max_speed};

use crate::fem::{CsrMatrix, FemError, FemSpace};
use crate::mesh::{SimplicialMesh, TensorKind};
use crate::model::{ModelError, ModelParams};
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("field {field} leaves its admissible range at node {node}: {value:e}")]
    Constraint {
        field: &'static str,
        node: usize,
        value: f64,
    },
    #[error("projected gradient did not converge at node {node} after {iterations} iterations")]
    Projection { node: usize, iterations: usize },
    #[error("saturation barrier reached at node {node} (other phase {other:e})")]
    Barrier { node: usize, other: f64 },
    #[error("outer iteration did not converge after {iterations} iterations (increment {increment:e})")]
    OuterIteration { iterations: usize, increment: f64 },
    #[error("time step underflow after {halvings} halvings (dt = {dt:e}); last failure: {last}")]
    DtUnderflow {
        halvings: usize,
        dt: f64,
        last: Box<SchemeError>,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl SchemeError {
    /// Failures that a smaller time step can cure.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            Self::Constraint { .. } | Self::Projection { .. } | Self::Barrier { .. } | Self::OuterIteration { .. }
        ) || matches!(self, Self::Fem(FemError::Solve(_)))
    }
}

/// Numerical knobs of the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOptions<T> {
    /// Relaxation `mu` as a multiple of the time step.
    pub mu_over_dt: T,
    pub projection_tol: T,
    pub projection_max_iter: usize,
    pub outer_tol: T,
    pub outer_max_iter: usize,
    pub max_halvings: usize,
    /// Admissible overshoot of `phi_a`, `n`, `c` outside `[0, 1]`.
    pub range_tol: T,
    /// Required margin `1 - max(phi_v + phi_d)`.
    pub saturation_margin: T,
    /// Largest negative tumor fraction that is clamped at commit; anything
    /// below rejects the step.
    pub negativity_tol: T,
    pub linear_tol: T,
    /// Upwind the viable and endothelial chemotaxis along mesh edges instead
    /// of using the exact cell integrals of `b_v T grad n` and `phi_a T grad c`.
    pub upwind_chemotaxis: bool,
    /// Recompute the step from the CFL bound after each commit; otherwise
    /// keep `state.dt`.
    pub adaptive: bool,
}

impl<T: Real> Default for SchemeOptions<T> {
    fn default() -> Self {
        let floor = T::epsilon() * T::lit(64.0);
        Self {
            mu_over_dt: T::lit(0.1),
            projection_tol: T::lit(1e-6),
            projection_max_iter: 500,
            outer_tol: T::lit(1e-6),
            outer_max_iter: 200,
            max_halvings: 20,
            range_tol: T::lit(1e-12).max(floor),
            saturation_margin: T::lit(1e-10).max(floor),
            negativity_tol: T::lit(1e-5),
            linear_tol: T::lit(1e-10).max(floor),
            upwind_chemotaxis: true,
            adaptive: true,
        }
    }
}

/// Nodal fields of the discrete problem plus time bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState<T> {
    pub phi_v: Vec<T>,
    pub phi_d: Vec<T>,
    pub phi_a: Vec<T>,
    pub n: Vec<T>,
    pub c: Vec<T>,
    pub sigma_v: Vec<T>,
    pub sigma_d: Vec<T>,
    pub t: T,
    pub dt: T,
    pub step_index: usize,
}

impl<T: Real> SimulationState<T> {
    /// Tumor-free tissue: no tumor or new vessels, saturated nutrient, no TAF.
    pub fn healthy(n_nodes: usize, dt: T) -> Self {
        Self {
            phi_v: vec![T::zero(); n_nodes],
            phi_d: vec![T::zero(); n_nodes],
            phi_a: vec![T::zero(); n_nodes],
            n: vec![T::one(); n_nodes],
            c: vec![T::zero(); n_nodes],
            sigma_v: vec![T::zero(); n_nodes],
            sigma_d: vec![T::zero(); n_nodes],
            t: T::zero(),
            dt,
            step_index: 0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.phi_v.len()
    }

    pub fn phi_t(&self) -> Vec<T> {
        self.phi_v.iter().zip(&self.phi_d).map(|(a, b)| *a + *b).collect()
    }

    /// Named nodal concentration fields, in output order.
    pub fn concentration_fields(&self) -> [(&'static str, &[T]); 5] {
        [
            ("phi_v", &self.phi_v),
            ("phi_d", &self.phi_d),
            ("phi_a", &self.phi_a),
            ("n", &self.n),
            ("c", &self.c),
        ]
    }

    /// Checks lengths, finiteness, exact positivity of the tumor phases,
    /// the saturation margin, and the ranges of `phi_a`, `n`, `c`.
    pub fn check(&self, range_tol: T, saturation_margin: T) -> Result<(), SchemeError> {
        let n = self.n_nodes();
        let all = [
            ("phi_v", &self.phi_v),
            ("phi_d", &self.phi_d),
            ("phi_a", &self.phi_a),
            ("n", &self.n),
            ("c", &self.c),
            ("sigma_v", &self.sigma_v),
            ("sigma_d", &self.sigma_d),
        ];
        for (name, f) in all {
            if f.len() != n {
                return Err(SchemeError::Invalid(format!("field {name} has {} entries, expected {n}", f.len())));
            }
            if let Some(j) = f.iter().position(|v| !v.is_finite()) {
                return Err(SchemeError::Constraint {
                    field: name,
                    node: j,
                    value: f64::NAN,
                });
            }
        }
        for (name, f) in [("phi_v", &self.phi_v), ("phi_d", &self.phi_d)] {
            if let Some(j) = f.iter().position(|v| *v < T::zero()) {
                return Err(constraint(name, j, f[j]));
            }
        }
        for j in 0..n {
            let s = self.phi_v[j] + self.phi_d[j];
            if s > T::one() - saturation_margin {
                return Err(constraint("phi_v+phi_d", j, s));
            }
        }
        for (name, f) in [("phi_a", &self.phi_a), ("n", &self.n), ("c", &self.c)] {
            check_range(name, f, range_tol)?;
        }
        Ok(())
    }
}

fn constraint<T: Real>(field: &'static str, node: usize, value: T) -> SchemeError {
    SchemeError::Constraint {
        field,
        node,
        value: value.to_f64_lossy(),
    }
}

/// Fails if any entry lies outside `[-tol, 1 + tol]`.
pub(crate) fn check_range<T: Real>(field: &'static str, f: &[T], tol: T) -> Result<(), SchemeError> {
    for (j, &v) in f.iter().enumerate() {
        if !(v >= -tol && v <= T::one() + tol) {
            return Err(constraint(field, j, v));
        }
    }
    Ok(())
}

/// Mesh-dependent operators and nodal parameter maps shared by all steps.
#[derive(Debug, Clone)]
pub struct Operators<T> {
    pub space: FemSpace<T>,
    /// Stiffness of the unit tensor.
    pub k_iso: CsrMatrix<T>,
    /// Stiffness of the preferential-direction tensor `T`.
    pub k_pref: CsrMatrix<T>,
    /// Stiffness of the water-diffusion tensor `D`.
    pub k_diff: CsrMatrix<T>,
    /// Nodal resection indicator (lumped average of the cell values).
    pub irc: Vec<T>,
    /// Nodal nutrient release rate `l_nv` (lumped average of the tissue map).
    pub l_nv: Vec<T>,
    /// Per-cell chemotactic coefficient `h_v`.
    pub h_v_cell: Vec<T>,
    /// Stiffness of `h_v T`, the edge weights of the upwinded viable chemotaxis.
    pub k_chemo: CsrMatrix<T>,
}

impl<T: Real> Operators<T> {
    pub fn new(mesh: &SimplicialMesh<T>, params: &ModelParams<T>) -> Result<Self, SchemeError> {
        let space = FemSpace::new(mesh);
        let k_iso = space.stiffness(TensorKind::Identity, None, None)?;
        let k_pref = space.stiffness(TensorKind::Preferential, None, None)?;
        let k_diff = space.stiffness(TensorKind::Diffusion, None, None)?;
        let cells = 0..mesh.n_cells();
        let irc_cell: Vec<T> = cells.clone().map(|k| mesh.cell_data(k).irc).collect();
        let l_nv_cell: Vec<T> = cells.clone().map(|k| params.l_nv(mesh.cell_data(k).tissue)).collect();
        let h_v_cell: Vec<T> = cells.map(|k| params.h_v(mesh.cell_data(k).tissue)).collect();
        let irc = space.nodal_average(&irc_cell)?;
        let l_nv = space.nodal_average(&l_nv_cell)?;
        let k_chemo = space.stiffness(TensorKind::Preferential, None, Some(&h_v_cell))?;
        Ok(Self {
            space,
            k_iso,
            k_pref,
            k_diff,
            irc,
            l_nv,
            h_v_cell,
            k_chemo,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.space.n_nodes()
    }

    pub fn weights(&self) -> &[T] {
        self.space.lumped_mass()
    }
}
