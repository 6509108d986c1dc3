//! Viable-cell velocity and the CFL-limited time step.

use super::SimulationState;
use crate::mesh::{SimplicialMesh, TensorKind};
use crate::model::{velocity_factor, ModelParams};
use crate::scalar::Real;

fn cell_gradient<T: Real>(mesh: &SimplicialMesh<T>, k: usize, f: &[T]) -> [T; 3] {
    let geo = mesh.cell_geometry(k);
    let mut g = [T::zero(); 3];
    for (a, &i) in mesh.cell(k).iter().enumerate() {
        for c in 0..3 {
            g[c] += f[i] * geo.grads[a][c];
        }
    }
    g
}

/// Nodal viable velocity `b' (h_v T grad n - T grad Sigma_v / L_v)` with
/// `b' = (1 - phi_T)^2 / (1 + phi_a)^2`. Gradients are per cell, `b'` is the
/// vertex mean, and node values are measure-weighted averages of the
/// incident cells.
pub fn cell_velocity<T: Real>(
    state: &SimulationState<T>,
    mesh: &SimplicialMesh<T>,
    params: &ModelParams<T>,
) -> Vec<[T; 3]> {
    let nv = T::from_usize(mesh.verts_per_cell()).unwrap();
    let mut cell_v = Vec::with_capacity(mesh.n_cells());
    for k in 0..mesh.n_cells() {
        let b = mesh
            .cell(k)
            .iter()
            .map(|&i| velocity_factor(state.phi_v[i] + state.phi_d[i], state.phi_a[i]))
            .sum::<T>()
            / nv;
        let tensor = mesh.cell_tensor(k, TensorKind::Preferential);
        let h_v = params.h_v(mesh.cell_data(k).tissue);
        let gn = tensor.apply(&cell_gradient(mesh, k, &state.n));
        let gs = tensor.apply(&cell_gradient(mesh, k, &state.sigma_v));
        let mut v = [T::zero(); 3];
        for c in 0..mesh.dim() {
            v[c] = b * (h_v * gn[c] - gs[c] / params.l_v);
        }
        cell_v.push(v);
    }
    (0..mesh.n_nodes())
        .map(|j| {
            let mut acc = [T::zero(); 3];
            let mut vol = T::zero();
            for &k in mesh.node_cells(j) {
                let m = mesh.cell_geometry(k).measure;
                vol += m;
                for c in 0..3 {
                    acc[c] += m * cell_v[k][c];
                }
            }
            acc.map(|x| x / vol)
        })
        .collect()
}

/// `max_j (|v_x| + |v_y| + |v_z|)`.
pub fn max_speed<T: Real>(velocity: &[[T; 3]]) -> T {
    velocity
        .iter()
        .map(|v| v[0].abs() + v[1].abs() + v[2].abs())
        .fold(T::zero(), T::max)
}

/// `min(100 L_v eps^2 / Pi, h_min / (2 v_max))`; the base step when the
/// velocity vanishes.
pub fn adaptive_dt<T: Real>(state: &SimulationState<T>, mesh: &SimplicialMesh<T>, params: &ModelParams<T>) -> T {
    let base = params.base_time_step();
    let v_max = max_speed(&cell_velocity(state, mesh, params));
    if v_max > T::zero() {
        base.min(mesh.h_min() / (T::lit(2.0) * v_max))
    } else {
        base
    }
}
