//! Decoupled semi-implicit solves for nutrient, TAF and new vasculature.

use super::{check_range, Operators, SchemeError, SchemeOptions, SimulationState};
use crate::fem::{pcg, CsrMatrix, FemError, SolverOptions};
use crate::model::{nutrient_kinetics, source_angio, ModelParams};
use crate::scalar::Real;

/// Nutrient, TAF and vasculature at the new time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Chemicals<T> {
    pub n: Vec<T>,
    pub c: Vec<T>,
    pub phi_a: Vec<T>,
}

/// Solves the lumped-mass backward Euler step
/// `W (u - u_old)/dt + K u + W diag(reaction) u = W source`
/// for a symmetric positive semidefinite `K` and non-negative reaction.
pub fn implicit_reaction_diffusion<T: Real>(
    weights: &[T],
    stiffness: &CsrMatrix<T>,
    dt: T,
    reaction: &[T],
    u_old: &[T],
    source: &[T],
    tol: T,
) -> Result<Vec<T>, FemError> {
    let n = weights.len();
    for len in [stiffness.n_rows(), reaction.len(), u_old.len(), source.len()] {
        if len != n {
            return Err(FemError::Length { expected: n, got: len });
        }
    }
    let diag: Vec<T> = weights
        .iter()
        .zip(reaction)
        .map(|(w, r)| *w / dt + *w * *r)
        .collect();
    let a = stiffness.linear_combination(T::one(), &CsrMatrix::diagonal_matrix(&diag), T::one());
    let rhs: Vec<T> = (0..n).map(|j| weights[j] * (u_old[j] / dt + source[j])).collect();
    let mut x = u_old.to_vec();
    pcg(&a, &rhs, &mut x, &SolverOptions { tol, max_iter: None })?;
    Ok(x)
}

/// Edge-upwinded chemotactic transport `(phi T grad c, grad chi_j)`: along
/// each edge the flux `-K_ji (c_i - c_j)` carries `phi` from the node it
/// leaves, so a node without `phi` never loses any.
pub fn upwind_drift<T: Real>(k: &CsrMatrix<T>, phi: &[T], c: &[T]) -> Vec<T> {
    (0..phi.len())
        .map(|j| {
            let (cols, vals) = k.row(j);
            cols.iter()
                .zip(vals)
                .filter(|(&i, _)| i != j)
                .map(|(&i, &kji)| {
                    let up = if c[j] > c[i] { phi[i] } else { phi[j] };
                    -kji * (c[j] - c[i]) * up
                })
                .sum()
        })
        .collect()
}

fn clamp_unit<T: Real>(f: &mut [T]) {
    for v in f {
        *v = v.max(T::zero()).min(T::one());
    }
}

/// Nutrient first, then TAF with the new nutrient, then vasculature with the
/// new TAF; all other coefficients are frozen at the old state. Results are
/// range-checked against `opts.range_tol` and clamped to `[0, 1]`.
pub fn step_chemicals<T: Real>(
    ops: &Operators<T>,
    state: &SimulationState<T>,
    params: &ModelParams<T>,
    dt: T,
    opts: &SchemeOptions<T>,
) -> Result<Chemicals<T>, SchemeError> {
    if !(dt > T::zero()) {
        return Err(SchemeError::Invalid(format!("time step {dt} must be positive")));
    }
    let nn = ops.n_nodes();
    let w = ops.weights();
    let p = params;
    let s = state;

    let mut reaction = vec![T::zero(); nn];
    let mut source = vec![T::zero(); nn];
    for j in 0..nn {
        let k = nutrient_kinetics(s.phi_v[j], s.phi_d[j], s.phi_a[j], ops.irc[j], p);
        reaction[j] = k.reaction;
        source[j] = k.supply + ops.l_nv[j] * s.phi_v[j];
    }
    let k_n = ops.k_diff.scaled(p.b_n);
    let mut n_new = implicit_reaction_diffusion(w, &k_n, dt, &reaction, &s.n, &source, opts.linear_tol)?;
    check_range("n", &n_new, opts.range_tol)?;
    clamp_unit(&mut n_new);

    for j in 0..nn {
        let production = p.v_c * s.phi_v[j] * (p.delta_n - n_new[j]).max(T::zero());
        reaction[j] = production + p.delta_a * s.phi_a[j];
        source[j] = production + p.l_ca * s.phi_a[j];
    }
    let k_c = ops.k_diff.scaled(p.b_c);
    let mut c_new = implicit_reaction_diffusion(w, &k_c, dt, &reaction, &s.c, &source, opts.linear_tol)?;
    check_range("c", &c_new, opts.range_tol)?;
    clamp_unit(&mut c_new);

    // Endothelial chemotaxis up the new TAF gradient, explicit in phi_a.
    let drift = if opts.upwind_chemotaxis {
        upwind_drift(&ops.k_pref, &s.phi_a, &c_new)
    } else {
        ops.space
            .stiffness(crate::mesh::TensorKind::Preferential, Some(&s.phi_a), None)?
            .mul_vec(&c_new)
    };
    for j in 0..nn {
        reaction[j] = T::zero();
        source[j] = source_angio(s.phi_v[j], s.phi_d[j], s.phi_a[j], c_new[j], ops.irc[j], p)
            + p.h_a * drift[j] / w[j];
    }
    let k_phi_a = ops.k_pref.scaled(p.l_a_inv);
    let mut a_new = implicit_reaction_diffusion(w, &k_phi_a, dt, &reaction, &s.phi_a, &source, opts.linear_tol)?;
    check_range("phi_a", &a_new, opts.range_tol)?;
    clamp_unit(&mut a_new);

    Ok(Chemicals {
        n: n_new,
        c: c_new,
        phi_a: a_new,
    })
}
