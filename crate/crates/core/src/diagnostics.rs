//! Read-only analysis of simulation states: lumped masses, the reduced
//! Cahn-Hilliard energy, constraint reports, line probes and the per-step
//! CSV report.

use crate::fem::{CsrMatrix, FemError, FemSpace};
use crate::mesh::{SimplicialMesh, TensorKind};
use crate::model::{psi, ModelError, ModelParams};
use crate::scalar::{dot, Real};
use crate::scheme::{SimulationState, StepOutcome};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("barrier violated: phi_T = {value} at node {node}")]
    Barrier { node: usize, value: f64 },
    #[error("probe segment has no sample inside the mesh")]
    ProbeOutside,
    #[error("probe needs at least 2 samples, got {0}")]
    ProbeSamples(usize),
    #[error(transparent)]
    Fem(#[from] FemError),
}

fn check_len(got: usize, expected: usize) -> Result<(), DiagnosticsError> {
    if got != expected {
        return Err(DiagnosticsError::Length { expected, got });
    }
    Ok(())
}

/// Lumped integral `sum_j w_j f_j`.
pub fn total_mass<T: Real>(field: &[T], weights: &[T]) -> Result<T, DiagnosticsError> {
    check_len(field.len(), weights.len())?;
    Ok(field.iter().zip(weights).map(|(f, w)| *f * *w).sum())
}

/// Reduced Cahn-Hilliard energy with precomputed lumped weights and
/// isotropic stiffness: `sum_j w_j Pi psi(phi_T,j) + Pi eps^2/2 phi_T.K phi_T`.
pub fn ch_energy_with<T: Real>(
    state: &SimulationState<T>,
    weights: &[T],
    k_iso: &CsrMatrix<T>,
    params: &ModelParams<T>,
) -> Result<T, DiagnosticsError> {
    check_len(state.n_nodes(), weights.len())?;
    let phi_t = state.phi_t();
    let mut bulk = T::zero();
    for (j, (&s, &w)) in phi_t.iter().zip(weights).enumerate() {
        let v = psi(s, params.phi_bar).map_err(|e| match e {
            ModelError::Domain(_) | ModelError::Parameter(_) => DiagnosticsError::Barrier {
                node: j,
                value: s.to_f64_lossy(),
            },
        })?;
        bulk += w * v;
    }
    let grad = dot(&k_iso.mul_vec(&phi_t), &phi_t);
    Ok(params.pi * bulk + T::lit(0.5) * params.pi * params.eps * params.eps * grad)
}

pub fn ch_energy<T: Real>(
    state: &SimulationState<T>,
    mesh: &SimplicialMesh<T>,
    params: &ModelParams<T>,
) -> Result<T, DiagnosticsError> {
    let space = FemSpace::new(mesh);
    let k = space.stiffness(TensorKind::Identity, None, None)?;
    ch_energy_with(state, space.lumped_mass(), &k, params)
}

/// Remaining free-energy contributions, reported separately so callers can
/// weight them: vessel entropy `sum w phi_a (ln phi_a - 1)` (continuously
/// extended by 0 at `phi_a = 0`) and the Dirichlet energies
/// `1/2 n.K_D n`, `1/2 c.K_D c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAddends<T> {
    pub vessel_entropy: T,
    pub nutrient_gradient: T,
    pub taf_gradient: T,
}

impl<T: Real> EnergyAddends<T> {
    pub fn compute(state: &SimulationState<T>, weights: &[T], k_diff: &CsrMatrix<T>) -> Result<Self, DiagnosticsError> {
        check_len(state.n_nodes(), weights.len())?;
        let vessel_entropy = state
            .phi_a
            .iter()
            .zip(weights)
            .map(|(&a, &w)| if a > T::zero() { w * a * (a.ln() - T::one()) } else { T::zero() })
            .sum();
        let half = T::lit(0.5);
        Ok(Self {
            vessel_entropy,
            nutrient_gradient: half * dot(&k_diff.mul_vec(&state.n), &state.n),
            taf_gradient: half * dot(&k_diff.mul_vec(&state.c), &state.c),
        })
    }

    /// `E_CH + sum_i weights_i * addend_i`.
    pub fn total(&self, e_ch: T, weights: [T; 3]) -> T {
        e_ch + weights[0] * self.vessel_entropy + weights[1] * self.nutrient_gradient + weights[2] * self.taf_gradient
    }
}

/// One probe sample; `values` is `None` outside the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample<T> {
    /// Arc length from the start point.
    pub s: T,
    pub point: [T; 3],
    /// `(phi_v, phi_d, phi_a, n, c)`.
    pub values: Option<[T; 5]>,
}

/// Slack on barycentric coordinates when locating points.
const LOCATE_SLACK: f64 = 1e-10;

/// Cell containing `p` and its barycentric coordinates.
pub fn locate<T: Real>(mesh: &SimplicialMesh<T>, p: &[T; 3]) -> Option<(usize, [T; 4])> {
    let slack = -T::lit(LOCATE_SLACK);
    let nv = mesh.verts_per_cell();
    (0..mesh.n_cells()).find_map(|k| {
        let lam = mesh.barycentric(k, p);
        lam[..nv].iter().all(|l| *l >= slack).then_some((k, lam))
    })
}

/// P1 interpolation of all concentration fields at `m` equispaced points
/// from `p0` to `p1`.
pub fn line_probe<T: Real>(
    state: &SimulationState<T>,
    mesh: &SimplicialMesh<T>,
    p0: [T; 3],
    p1: [T; 3],
    m: usize,
) -> Result<Vec<ProbeSample<T>>, DiagnosticsError> {
    if m < 2 {
        return Err(DiagnosticsError::ProbeSamples(m));
    }
    check_len(state.n_nodes(), mesh.n_nodes())?;
    let len = (0..3).map(|c| (p1[c] - p0[c]) * (p1[c] - p0[c])).sum::<T>().sqrt();
    let fields = state.concentration_fields();
    let denom = T::from_usize(m - 1).unwrap();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let t = T::from_usize(i).unwrap() / denom;
        let mut p = [T::zero(); 3];
        for c in 0..3 {
            p[c] = p0[c] + t * (p1[c] - p0[c]);
        }
        let values = locate(mesh, &p).map(|(k, lam)| {
            let mut v = [T::zero(); 5];
            for (a, &node) in mesh.cell(k).iter().enumerate() {
                for (slot, (_, f)) in v.iter_mut().zip(fields.iter()) {
                    *slot += lam[a] * f[node];
                }
            }
            v
        });
        out.push(ProbeSample { s: t * len, point: p, values });
    }
    if out.iter().all(|s| s.values.is_none()) {
        return Err(DiagnosticsError::ProbeOutside);
    }
    Ok(out)
}

/// Extremes of the five concentration fields and the invariant flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport<T> {
    /// Minima of `(phi_v, phi_d, phi_a, n, c)`.
    pub min: [T; 5],
    pub max: [T; 5],
    /// `max_j (phi_v + phi_d + phi_a)`.
    pub max_phase_sum: T,
    /// `1 - max_j (phi_v + phi_d)`.
    pub saturation_margin: T,
    pub phi_v_nonnegative: bool,
    pub phi_d_nonnegative: bool,
    pub saturation_ok: bool,
    pub phi_a_in_range: bool,
    pub n_in_range: bool,
    pub c_in_range: bool,
}

impl<T: Real> ConstraintReport<T> {
    pub fn all_ok(&self) -> bool {
        self.phi_v_nonnegative
            && self.phi_d_nonnegative
            && self.saturation_ok
            && self.phi_a_in_range
            && self.n_in_range
            && self.c_in_range
    }
}

/// Tumor phases must be exactly non-negative with `1 - (phi_v + phi_d)`
/// at least `saturation_margin`; `phi_a`, `n`, `c` must lie in
/// `[-range_tol, 1 + range_tol]`.
pub fn constraint_report<T: Real>(state: &SimulationState<T>, range_tol: T, saturation_margin: T) -> ConstraintReport<T> {
    let fields = state.concentration_fields();
    let mut min = [T::infinity(); 5];
    let mut max = [T::neg_infinity(); 5];
    for (i, (_, f)) in fields.iter().enumerate() {
        for &v in f.iter() {
            min[i] = min[i].min(v);
            max[i] = max[i].max(v);
        }
    }
    let mut max_tumor = T::neg_infinity();
    let mut max_phase_sum = T::neg_infinity();
    for j in 0..state.n_nodes() {
        let s = state.phi_v[j] + state.phi_d[j];
        max_tumor = max_tumor.max(s);
        max_phase_sum = max_phase_sum.max(s + state.phi_a[j]);
    }
    let margin = T::one() - max_tumor;
    let in_range = |i: usize| min[i] >= -range_tol && max[i] <= T::one() + range_tol;
    ConstraintReport {
        min,
        max,
        max_phase_sum,
        saturation_margin: margin,
        phi_v_nonnegative: min[0] >= T::zero(),
        phi_d_nonnegative: min[1] >= T::zero(),
        saturation_ok: margin >= saturation_margin,
        phi_a_in_range: in_range(2),
        n_in_range: in_range(3),
        c_in_range: in_range(4),
    }
}

/// Monitoring record written once per committed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    pub step: usize,
    pub t: T,
    pub dt: T,
    /// Lumped masses of `(phi_v, phi_d, phi_a, n, c)`.
    pub masses: [T; 5],
    pub min: [T; 5],
    pub max: [T; 5],
    pub e_ch: T,
    pub outer_iters: usize,
    pub halvings: usize,
    pub constraints_ok: bool,
}

const FIELD_NAMES: [&str; 5] = ["phi_v", "phi_d", "phi_a", "n", "c"];

impl<T: Real> StepReport<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state: &SimulationState<T>,
        outcome: Option<&StepOutcome<T>>,
        weights: &[T],
        k_iso: &CsrMatrix<T>,
        params: &ModelParams<T>,
        range_tol: T,
        saturation_margin: T,
    ) -> Result<Self, DiagnosticsError> {
        let mut masses = [T::zero(); 5];
        for (m, (_, f)) in masses.iter_mut().zip(state.concentration_fields()) {
            *m = total_mass(f, weights)?;
        }
        let report = constraint_report(state, range_tol, saturation_margin);
        Ok(Self {
            step: state.step_index,
            t: state.t,
            dt: outcome.map_or(T::zero(), |o| o.dt),
            masses,
            min: report.min,
            max: report.max,
            e_ch: ch_energy_with(state, weights, k_iso, params)?,
            outer_iters: outcome.map_or(0, |o| o.outer_iterations),
            halvings: outcome.map_or(0, |o| o.halvings),
            constraints_ok: report.all_ok(),
        })
    }

    /// Column names: `step,t,dt,mass_<f>...,min_<f>...,max_<f>...,E_CH,outer_iters,halvings,constraints_ok`.
    pub fn csv_header() -> String {
        let mut cols = vec!["step".to_string(), "t".into(), "dt".into()];
        for prefix in ["mass", "min", "max"] {
            cols.extend(FIELD_NAMES.iter().map(|f| format!("{prefix}_{f}")));
        }
        cols.extend(["E_CH", "outer_iters", "halvings", "constraints_ok"].map(String::from));
        cols.join(",")
    }

    /// Reals with 9 significant digits.
    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.step.to_string(), sci(self.t), sci(self.dt)];
        for arr in [&self.masses, &self.min, &self.max] {
            cols.extend(arr.iter().map(|v| sci(*v)));
        }
        cols.push(sci(self.e_ch));
        cols.push(self.outer_iters.to_string());
        cols.push(self.halvings.to_string());
        cols.push(u8::from(self.constraints_ok).to_string());
        cols.join(",")
    }
}

/// Scientific notation with 9 significant digits.
pub fn sci<T: Real>(v: T) -> String {
    format!("{:.8e}", v.to_f64_lossy())
}
