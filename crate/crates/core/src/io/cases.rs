//! Synthetic box cases: a spherical tumor, and a resection cavity with
//! residual tumor cells scattered on its boundary.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::DomainSpec;
use crate::mesh::{box_mesh, CellData, MeshError, SimplicialMesh, SymTensor, Tissue};
use crate::model::{heaviside_reg, ModelParams};
use crate::scheme::SimulationState;

/// Initial viable fraction inside the spherical tumor.
pub const SPHERE_PHI_V: f64 = 0.6;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("invalid case geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn distance(a: &[f64; 3], b: &[f64; 3], dim: usize) -> f64 {
    (0..dim).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt()
}

/// Box mesh of `spec` with the optional white-matter slab.
pub fn box_for(spec: &DomainSpec, params: &ModelParams<f64>) -> Result<SimplicialMesh<f64>, CaseError> {
    let dim = spec.dim;
    if dim != 2 && dim != 3 {
        return Err(CaseError::Geometry(format!("dimension must be 2 or 3, got {dim}")));
    }
    if !(spec.h > 0.0) {
        return Err(CaseError::Geometry("mesh size must be > 0".into()));
    }
    let divisions: Vec<usize> = spec.lengths[..dim]
        .iter()
        .map(|l| ((l / spec.h).round() as usize).max(1))
        .collect();
    let mesh = box_mesh(&spec.lengths[..dim], &divisions)?;
    let Some((lo, hi)) = spec.wm_band else {
        return Ok(mesh);
    };
    let f = params.wm_factor.max(1.0);
    let stretched = if dim == 2 {
        SymTensor::from_components_2d(f, 0.0, 1.0)
    } else {
        SymTensor::from_components_3d(f, 0.0, 1.0, 0.0, 0.0, 1.0)
    };
    let data = (0..mesh.n_cells())
        .map(|k| {
            let x = mesh.barycenter(k)[0];
            if lo <= x && x <= hi {
                CellData {
                    d: stretched,
                    t: stretched,
                    tissue: Tissue::Wm,
                    irc: 1.0,
                }
            } else {
                CellData::default()
            }
        })
        .collect();
    Ok(mesh.with_cell_data(data)?)
}

fn check_ball(spec: &DomainSpec, mesh: &SimplicialMesh<f64>) -> Result<[f64; 3], CaseError> {
    let c = spec.center();
    let r = spec.radius;
    if !(r > 0.0) {
        return Err(CaseError::Geometry(format!("radius must be > 0, got {r}")));
    }
    for axis in 0..spec.dim {
        if c[axis] - r < 0.0 || c[axis] + r > spec.lengths[axis] {
            return Err(CaseError::Geometry(format!(
                "ball of radius {r} around {:?} leaves the box",
                &c[..spec.dim]
            )));
        }
    }
    if r < 2.0 * mesh.h_min() {
        return Err(CaseError::Geometry(format!(
            "radius {r} spans fewer than 2 cells (h_min = {})",
            mesh.h_min()
        )));
    }
    Ok(c)
}

/// Viable fraction 0.6 inside the ball, zero outside; `n = 1`, everything
/// else zero. The first time step is the base step of `params`.
pub fn generate_sphere_case(
    spec: &DomainSpec,
    params: &ModelParams<f64>,
) -> Result<(SimplicialMesh<f64>, SimulationState<f64>), CaseError> {
    let mesh = box_for(spec, params)?;
    let c = check_ball(spec, &mesh)?;
    let mut state = SimulationState::healthy(mesh.n_nodes(), params.base_time_step());
    let slack = 1e-12 * spec.radius;
    for (j, x) in mesh.coords().iter().enumerate() {
        if distance(x, &c, spec.dim) <= spec.radius + slack {
            state.phi_v[j] = SPHERE_PHI_V;
        }
    }
    Ok((mesh, state))
}

/// Resection indicator: 0 inside the cavity, rising with a C1 shoulder of
/// width `h` to 1 outside.
pub fn resection_indicator(r: f64, radius: f64, h: f64) -> f64 {
    heaviside_reg(r - radius, h)
}

/// Cavity of radius `spec.radius` with `I_R^C` per cell from the shoulder
/// profile at the barycentre; `n(0)` is the profile at the nodes. Residual
/// tumor at the equilibrium fraction `phi_bar` is placed on a seeded random
/// `fraction` of the nodes within `h/2` of the cavity boundary.
pub fn generate_resection_case(
    spec: &DomainSpec,
    seed: u64,
    fraction: f64,
    params: &ModelParams<f64>,
) -> Result<(SimplicialMesh<f64>, SimulationState<f64>), CaseError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(CaseError::Geometry(format!("shell fraction {fraction} outside [0, 1]")));
    }
    let base = box_for(spec, params)?;
    let c = check_ball(spec, &base)?;
    let (r, h, dim) = (spec.radius, spec.h, spec.dim);
    let data = (0..base.n_cells())
        .map(|k| CellData {
            irc: resection_indicator(distance(&base.barycenter(k), &c, dim), r, h),
            ..*base.cell_data(k)
        })
        .collect();
    let mesh = base.with_cell_data(data)?;

    let mut state = SimulationState::healthy(mesh.n_nodes(), params.base_time_step());
    let mut shell = Vec::new();
    for (j, x) in mesh.coords().iter().enumerate() {
        let d = distance(x, &c, dim);
        state.n[j] = resection_indicator(d, r, h);
        if (d - r).abs() <= 0.5 * h {
            shell.push(j);
        }
    }
    let count = (fraction * shell.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &j in shell.choose_multiple(&mut rng, count) {
        state.phi_v[j] = params.phi_bar;
    }
    Ok((mesh, state))
}
