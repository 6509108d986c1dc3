//! One outer iteration for the tumor phases: forcing, nodewise projection
//! onto the positive cone, and the coupled linear solve for
//! `(phi_v, Sigma_v, phi_d, Sigma_d)`.

use super::chemicals::{upwind_drift, Chemicals};
use super::{Operators, SchemeError, SimulationState};
use crate::fem::{CsrMatrix, FactoredSystem, FemError};
use crate::mesh::{SimplicialMesh, TensorKind};
use crate::model::{mobility_factor, psi1_prime, psi1_second, psi2_prime, source_necrotic, source_viable, ModelParams};
use crate::scalar::Real;

/// Values at or below this count as a vanishing phase.
const ZERO_PHASE: f64 = 1e-14;

/// Node `j` is passive iff `phi_prev` vanishes at `j` and at all its mesh
/// neighbours, i.e. on the support of the basis function of `j`.
pub fn classify_nodes<T: Real>(phi_prev: &[T], mesh: &SimplicialMesh<T>) -> Vec<bool> {
    let zero = T::lit(ZERO_PHASE);
    (0..mesh.n_nodes())
        .map(|j| phi_prev[j] <= zero && mesh.neighbors(j).iter().all(|&i| phi_prev[i] <= zero))
        .collect()
}

/// Passive node masks for both tumor phases at the start of a step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSets {
    pub passive_v: Vec<bool>,
    pub passive_d: Vec<bool>,
}

impl ActiveSets {
    pub fn new<T: Real>(state: &SimulationState<T>, mesh: &SimplicialMesh<T>) -> Self {
        Self {
            passive_v: classify_nodes(&state.phi_v, mesh),
            passive_d: classify_nodes(&state.phi_d, mesh),
        }
    }

    fn mask(&self, phase: Phase) -> &[bool] {
        match phase {
            Phase::Viable => &self.passive_v,
            Phase::Necrotic => &self.passive_d,
        }
    }

    pub fn passive(&self, phase: Phase) -> Vec<usize> {
        self.mask(phase).iter().enumerate().filter(|(_, p)| **p).map(|(j, _)| j).collect()
    }

    pub fn active(&self, phase: Phase) -> Vec<usize> {
        self.mask(phase).iter().enumerate().filter(|(_, p)| !**p).map(|(j, _)| j).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Viable,
    Necrotic,
}

/// Values assigned at passive nodes: the old viable fraction, or the old
/// necrotic fraction plus the explicit necrosis and clearance transfer.
pub fn passive_update<T: Real>(
    phase: Phase,
    phi_v_prev: &[T],
    phi_d_prev: &[T],
    n_new: &[T],
    dt: T,
    params: &ModelParams<T>,
) -> Vec<T> {
    match phase {
        Phase::Viable => phi_v_prev.to_vec(),
        Phase::Necrotic => (0..phi_d_prev.len())
            .map(|j| {
                let v = phi_v_prev[j];
                phi_d_prev[j] + dt * (params.nu_d * v * (params.delta_n - n_new[j]).max(T::zero()) + params.k1 * v)
            })
            .collect(),
    }
}

/// Riesz representatives of the explicit part of the potential forcing:
/// `z = phi^k - mu [Pi eps^2 W^{-1} K phi_T^k + Pi psi2'(phi_T^{n-1}) - Sigma^k]`.
#[allow(clippy::too_many_arguments)]
pub fn step_forcing<T: Real>(
    ops: &Operators<T>,
    phi_v_k: &[T],
    phi_d_k: &[T],
    sigma_v_k: &[T],
    sigma_d_k: &[T],
    phi_t_prev: &[T],
    mu: T,
    params: &ModelParams<T>,
) -> (Vec<T>, Vec<T>) {
    let nn = ops.n_nodes();
    let w = ops.weights();
    let phi_t: Vec<T> = phi_v_k.iter().zip(phi_d_k).map(|(a, b)| *a + *b).collect();
    let lap = ops.k_iso.mul_vec(&phi_t);
    let pe2 = params.pi * params.eps * params.eps;
    let mut z_v = vec![T::zero(); nn];
    let mut z_d = vec![T::zero(); nn];
    for j in 0..nn {
        let common = pe2 * lap[j] / w[j] + params.pi * psi2_prime(phi_t_prev[j], params.phi_bar);
        z_v[j] = phi_v_k[j] - mu * (common - sigma_v_k[j]);
        z_d[j] = phi_d_k[j] - mu * (common - sigma_d_k[j]);
    }
    (z_v, z_d)
}

enum ScalarFailure {
    Barrier,
    NotConverged(usize),
}

fn project_scalar_impl<T: Real>(
    z: T,
    other: T,
    mu_pi: T,
    phi_bar: T,
    start: T,
    omega: Option<T>,
    tol: T,
    max_iter: usize,
) -> Result<(T, usize), ScalarFailure> {
    let room = T::one() - other;
    if !(room > T::zero()) {
        return Err(ScalarFailure::Barrier);
    }
    let half = T::lit(0.5);
    let mut phi = start.max(T::zero());
    if phi >= room {
        phi = half * room;
    }
    for it in 1..=max_iter {
        let s = phi + other;
        let d1 = psi1_prime(s, phi_bar).map_err(|_| ScalarFailure::Barrier)?;
        let w = match omega {
            Some(w) => w,
            None => {
                let d2 = psi1_second(s, phi_bar).map_err(|_| ScalarFailure::Barrier)?;
                T::one() / (T::one() + mu_pi * d2)
            }
        };
        let mut next = (phi - w * (phi + mu_pi * d1 - z)).max(T::zero());
        let mut guard = 0;
        while next >= room {
            next = phi + half * (next - phi);
            guard += 1;
            if guard > 200 {
                return Err(ScalarFailure::Barrier);
            }
        }
        let step = (next - phi).abs();
        phi = next;
        if step < tol {
            return Ok((phi, it));
        }
    }
    Err(ScalarFailure::NotConverged(max_iter))
}

/// Solves the scalar variational inequality
/// `phi >= 0, (phi + mu_pi psi1'(phi + other) - z)(r - phi) >= 0 for all r >= 0`
/// by the projected gradient iteration started at `start`. With `omega = None`
/// the step is `1 / (1 + mu_pi psi1'')` at the current iterate, i.e. a
/// projected Newton step on the convex residual.
/// Returns the fixed point and the number of iterations.
#[allow(clippy::too_many_arguments)]
pub fn project_scalar<T: Real>(
    z: T,
    other: T,
    mu_pi: T,
    phi_bar: T,
    start: T,
    omega: Option<T>,
    tol: T,
    max_iter: usize,
) -> Result<(T, usize), SchemeError> {
    project_scalar_impl(z, other, mu_pi, phi_bar, start, omega, tol, max_iter).map_err(|e| match e {
        ScalarFailure::Barrier => SchemeError::Barrier {
            node: 0,
            other: other.to_f64_lossy(),
        },
        ScalarFailure::NotConverged(iterations) => SchemeError::Projection { node: 0, iterations },
    })
}

/// Nodewise projection step: passive nodes take `passive_values`, active
/// nodes the projected-gradient fixed point started from `start`.
/// Returns the new field and the largest iteration count over nodes.
#[allow(clippy::too_many_arguments)]
pub fn project_nodewise<T: Real>(
    z: &[T],
    phi_other_k: &[T],
    start: &[T],
    passive: &[bool],
    passive_values: &[T],
    mu: T,
    params: &ModelParams<T>,
    omega: Option<T>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, usize), SchemeError> {
    let mu_pi = mu * params.pi;
    let mut out = vec![T::zero(); z.len()];
    let mut iters = 0;
    for j in 0..z.len() {
        if passive[j] {
            out[j] = passive_values[j];
            continue;
        }
        let other = phi_other_k[j];
        match project_scalar_impl(z[j], other, mu_pi, params.phi_bar, start[j], omega, tol, max_iter) {
            Ok((phi, it)) => {
                out[j] = phi;
                iters = iters.max(it);
            }
            Err(ScalarFailure::Barrier) => {
                return Err(SchemeError::Barrier {
                    node: j,
                    other: other.to_f64_lossy(),
                })
            }
            Err(ScalarFailure::NotConverged(iterations)) => {
                return Err(SchemeError::Projection { node: j, iterations })
            }
        }
    }
    Ok((out, iters))
}

/// One iterate `(phi_v, Sigma_v, phi_d, Sigma_d)` of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseIterate<T> {
    pub phi_v: Vec<T>,
    pub sigma_v: Vec<T>,
    pub phi_d: Vec<T>,
    pub sigma_d: Vec<T>,
}

/// Everything in the coupled system that is frozen during the outer loop.
#[derive(Debug, Clone)]
pub struct ExplicitTerms<T> {
    pub dt: T,
    pub mu: T,
    /// `W (phi_v^{n-1}/dt + Gamma_v) + (h_v b_v T grad n^n, grad .)`.
    pub base_v: Vec<T>,
    /// `W (phi_d^{n-1}/dt + Gamma_d)`.
    pub base_d: Vec<T>,
    /// Stiffness of `T` weighted by the viable mobility factor.
    pub k_mob_v: CsrMatrix<T>,
    /// Stiffness of `T` weighted by the necrotic mobility factor.
    pub k_mob_d: CsrMatrix<T>,
    /// `Pi psi2'(phi_T^{n-1})`.
    pub psi2: Vec<T>,
    pub phi_t_prev: Vec<T>,
    pub gamma_v: Vec<T>,
    pub gamma_d: Vec<T>,
    pub sets: ActiveSets,
    pub passive_v: Vec<T>,
    pub passive_d: Vec<T>,
}

impl<T: Real> ExplicitTerms<T> {
    /// `k_t` holds the therapy death rates `(k_T1, k_T2)` for this step.
    /// With `upwind` the viable chemotaxis carries the mobility of the node
    /// each edge flux leaves, so nodes without viable cells cannot lose any.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: &SimplicialMesh<T>,
        ops: &Operators<T>,
        prev: &SimulationState<T>,
        chem: &Chemicals<T>,
        params: &ModelParams<T>,
        dt: T,
        mu: T,
        k_t: (T, T),
        upwind: bool,
    ) -> Result<Self, SchemeError> {
        let nn = ops.n_nodes();
        let w = ops.weights();
        let p = params;
        let phi_t_prev = prev.phi_t();
        let mut gamma_v = vec![T::zero(); nn];
        let mut gamma_d = vec![T::zero(); nn];
        let mut b_v = vec![T::zero(); nn];
        let mut b_d = vec![T::zero(); nn];
        let mut psi2 = vec![T::zero(); nn];
        for j in 0..nn {
            let (v, d, a) = (prev.phi_v[j], prev.phi_d[j], prev.phi_a[j]);
            gamma_v[j] = source_viable(v, d, a, chem.n[j], k_t.0, p);
            gamma_d[j] = source_necrotic(v, d, chem.n[j], k_t.1, p);
            b_v[j] = mobility_factor(v, phi_t_prev[j], a).max(T::zero());
            b_d[j] = mobility_factor(d, phi_t_prev[j], a).max(T::zero());
            psi2[j] = p.pi * psi2_prime(phi_t_prev[j], p.phi_bar);
        }
        let k_mob_v = ops.space.stiffness(TensorKind::Preferential, Some(&b_v), None)?;
        let k_mob_d = ops.space.stiffness(TensorKind::Preferential, Some(&b_d), None)?;
        let chemo = if upwind {
            upwind_drift(&ops.k_chemo, &b_v, &chem.n)
        } else {
            ops.space
                .stiffness(TensorKind::Preferential, Some(&b_v), Some(&ops.h_v_cell))?
                .mul_vec(&chem.n)
        };
        let base_v = (0..nn)
            .map(|j| w[j] * (prev.phi_v[j] / dt + gamma_v[j]) + chemo[j])
            .collect();
        let base_d = (0..nn).map(|j| w[j] * (prev.phi_d[j] / dt + gamma_d[j])).collect();
        let sets = ActiveSets::new(prev, mesh);
        let passive_v = passive_update(Phase::Viable, &prev.phi_v, &prev.phi_d, &chem.n, dt, p);
        let passive_d = passive_update(Phase::Necrotic, &prev.phi_v, &prev.phi_d, &chem.n, dt, p);
        Ok(Self {
            dt,
            mu,
            base_v,
            base_d,
            k_mob_v,
            k_mob_d,
            psi2,
            phi_t_prev,
            gamma_v,
            gamma_d,
            sets,
            passive_v,
            passive_d,
        })
    }
}

/// The four-field linear system of one outer iteration, interleaved per node
/// as `(phi_v, Sigma_v, phi_d, Sigma_d)`. Its matrix depends only on the
/// mesh, the parameters, `dt` and `mu`, so it is factorised once per step size.
#[derive(Debug, Clone)]
pub struct CoupledSystem<T> {
    dt: T,
    mu: T,
    system: FactoredSystem<T>,
}

impl<T: Real> CoupledSystem<T> {
    pub fn new(ops: &Operators<T>, params: &ModelParams<T>, dt: T, mu: T) -> Result<Self, SchemeError> {
        let matrix = Self::assemble(ops, params, dt, mu);
        let system = FactoredSystem::new(matrix).map_err(FemError::from)?;
        Ok(Self { dt, mu, system })
    }

    pub fn assemble(ops: &Operators<T>, params: &ModelParams<T>, dt: T, mu: T) -> CsrMatrix<T> {
        let nn = ops.n_nodes();
        let w = ops.weights();
        let pe2 = mu * params.pi * params.eps * params.eps;
        let inv_lv = T::one() / params.l_v;
        let inv_ld = T::one() / params.l_d;
        let mut trips = Vec::with_capacity(8 * ops.k_iso.nnz() + 8 * nn);
        for j in 0..nn {
            let (r, m) = (4 * j, w[j]);
            trips.push((r, r, m / dt));
            trips.push((r + 1, r, m));
            trips.push((r + 1, r + 1, -mu * m));
            trips.push((r + 2, r + 2, m / dt));
            trips.push((r + 3, r + 2, m));
            trips.push((r + 3, r + 3, -mu * m));
            let (cols, vals) = ops.k_pref.row(j);
            for (&i, &v) in cols.iter().zip(vals) {
                trips.push((r, 4 * i + 1, inv_lv * v));
                trips.push((r + 2, 4 * i + 3, inv_ld * v));
            }
            let (cols, vals) = ops.k_iso.row(j);
            for (&i, &v) in cols.iter().zip(vals) {
                let e = pe2 * v;
                trips.push((r + 1, 4 * i, e));
                trips.push((r + 1, 4 * i + 2, e));
                trips.push((r + 3, 4 * i, e));
                trips.push((r + 3, 4 * i + 2, e));
            }
        }
        CsrMatrix::from_triplets(4 * nn, 4 * nn, trips)
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        self.system.matrix()
    }

    /// Right-hand side for given half-step phases, forcing and lagged
    /// multipliers.
    #[allow(clippy::too_many_arguments)]
    pub fn rhs(
        &self,
        ops: &Operators<T>,
        params: &ModelParams<T>,
        ex: &ExplicitTerms<T>,
        half_v: &[T],
        half_d: &[T],
        z_v: &[T],
        z_d: &[T],
        sigma_v_k: &[T],
        sigma_d_k: &[T],
    ) -> Vec<T> {
        let nn = ops.n_nodes();
        let w = ops.weights();
        let full_v = ops.k_pref.mul_vec(sigma_v_k);
        let mob_v = ex.k_mob_v.mul_vec(sigma_v_k);
        let full_d = ops.k_pref.mul_vec(sigma_d_k);
        let mob_d = ex.k_mob_d.mul_vec(sigma_d_k);
        let mut b = vec![T::zero(); 4 * nn];
        let two = T::lit(2.0);
        for j in 0..nn {
            b[4 * j] = ex.base_v[j] + (full_v[j] - mob_v[j]) / params.l_v;
            b[4 * j + 1] = w[j] * (two * half_v[j] - z_v[j] - self.mu * ex.psi2[j]);
            b[4 * j + 2] = ex.base_d[j] + (full_d[j] - mob_d[j]) / params.l_d;
            b[4 * j + 3] = w[j] * (two * half_d[j] - z_d[j] - self.mu * ex.psi2[j]);
        }
        b
    }

    /// Solves the coupled system; `guess` seeds the iterative fallback path.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &self,
        ops: &Operators<T>,
        params: &ModelParams<T>,
        ex: &ExplicitTerms<T>,
        half_v: &[T],
        half_d: &[T],
        z_v: &[T],
        z_d: &[T],
        sigma_v_k: &[T],
        sigma_d_k: &[T],
        tol: T,
    ) -> Result<PhaseIterate<T>, SchemeError> {
        let b = self.rhs(ops, params, ex, half_v, half_d, z_v, z_d, sigma_v_k, sigma_d_k);
        let nn = ops.n_nodes();
        let guess: Vec<T> = (0..nn)
            .flat_map(|j| [half_v[j], sigma_v_k[j], half_d[j], sigma_d_k[j]])
            .collect();
        let x = self.system.solve(&b, Some(&guess), tol).map_err(FemError::from)?;
        Ok(PhaseIterate {
            phi_v: (0..nn).map(|j| x[4 * j]).collect(),
            sigma_v: (0..nn).map(|j| x[4 * j + 1]).collect(),
            phi_d: (0..nn).map(|j| x[4 * j + 2]).collect(),
            sigma_d: (0..nn).map(|j| x[4 * j + 3]).collect(),
        })
    }
}
