use super::chemicals::step_chemicals;
use super::phases::{project_nodewise, step_forcing, CoupledSystem, ExplicitTerms, PhaseIterate};
use super::velocity::adaptive_dt;
use super::{Operators, SchemeError, SchemeOptions, SimulationState};
use crate::mesh::SimplicialMesh;
use crate::model::{ModelParams, TherapySchedule};
use crate::scalar::{max_abs_diff, Real};

/// Statistics of one committed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    /// Step size actually committed.
    pub dt: T,
    pub outer_iterations: usize,
    /// Largest projected-gradient iteration count seen in the step.
    pub projection_iterations: usize,
    pub halvings: usize,
    /// Largest negative tumor fraction removed at commit.
    pub clamped: T,
}

/// Advances a [`SimulationState`] on a fixed mesh with fixed parameters.
///
/// The coupled tumor-phase matrix is factorised once per distinct step size
/// and reused until the step size changes.
#[derive(Debug)]
pub struct Integrator<'m, T> {
    mesh: &'m SimplicialMesh<T>,
    params: ModelParams<T>,
    schedule: TherapySchedule<T>,
    options: SchemeOptions<T>,
    ops: Operators<T>,
    cache: Option<CoupledSystem<T>>,
}

impl<'m, T: Real> Integrator<'m, T> {
    pub fn new(
        mesh: &'m SimplicialMesh<T>,
        params: ModelParams<T>,
        schedule: TherapySchedule<T>,
        options: SchemeOptions<T>,
    ) -> Result<Self, SchemeError> {
        params.validate()?;
        schedule.validate()?;
        if !(options.mu_over_dt > T::zero()) {
            return Err(SchemeError::Invalid("mu_over_dt must be positive".into()));
        }
        let ops = Operators::new(mesh, &params)?;
        Ok(Self {
            mesh,
            params,
            schedule,
            options,
            ops,
            cache: None,
        })
    }

    pub fn mesh(&self) -> &SimplicialMesh<T> {
        self.mesh
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn options(&self) -> &SchemeOptions<T> {
        &self.options
    }

    pub fn operators(&self) -> &Operators<T> {
        &self.ops
    }

    /// CFL-limited step for `state`.
    pub fn adaptive_dt(&self, state: &SimulationState<T>) -> T {
        adaptive_dt(state, self.mesh, &self.params)
    }

    /// Attempts one step of size `dt` without any recovery.
    pub fn try_step(
        &mut self,
        state: &SimulationState<T>,
        dt: T,
    ) -> Result<(SimulationState<T>, StepOutcome<T>), SchemeError> {
        let opts = self.options.clone();
        let p = &self.params;
        let mu = opts.mu_over_dt * dt;
        let chem = step_chemicals(&self.ops, state, p, dt, &opts)?;
        let k_t = self.schedule.therapy_rate(state.t);
        let ex = ExplicitTerms::new(self.mesh, &self.ops, state, &chem, p, dt, mu, k_t, opts.upwind_chemotaxis)?;

        let system = match self.cache.take() {
            Some(s) if s.dt() == dt && s.mu() == mu => s,
            _ => CoupledSystem::new(&self.ops, p, dt, mu)?,
        };
        let result = self.outer_loop(state, &ex, &system, &opts);
        self.cache = Some(system);
        let (it, outer_iterations, projection_iterations) = result?;

        let w = self.ops.weights();
        let mut phi_v = it.phi_v;
        let mut phi_d = it.phi_d;
        let clamped_v = clamp_and_rescale("phi_v", &mut phi_v, w, opts.negativity_tol)?;
        let clamped_d = clamp_and_rescale("phi_d", &mut phi_d, w, opts.negativity_tol)?;
        let mut next = SimulationState {
            phi_v,
            phi_d,
            phi_a: chem.phi_a,
            n: chem.n,
            c: chem.c,
            sigma_v: it.sigma_v,
            sigma_d: it.sigma_d,
            t: state.t + dt,
            dt,
            step_index: state.step_index + 1,
        };
        next.check(opts.range_tol, opts.saturation_margin)?;
        next.dt = if opts.adaptive {
            self.adaptive_dt(&next)
        } else {
            state.dt
        };
        Ok((
            next,
            StepOutcome {
                dt,
                outer_iterations,
                projection_iterations,
                halvings: 0,
                clamped: clamped_v.max(clamped_d),
            },
        ))
    }

    fn outer_loop(
        &self,
        state: &SimulationState<T>,
        ex: &ExplicitTerms<T>,
        system: &CoupledSystem<T>,
        opts: &SchemeOptions<T>,
    ) -> Result<(PhaseIterate<T>, usize, usize), SchemeError> {
        let p = &self.params;
        let ops = &self.ops;
        let mu = ex.mu;
        let mut it = PhaseIterate {
            phi_v: state.phi_v.clone(),
            sigma_v: state.sigma_v.clone(),
            phi_d: state.phi_d.clone(),
            sigma_d: state.sigma_d.clone(),
        };
        let mut proj_iters = 0;
        let mut increment = T::infinity();
        for k in 1..=opts.outer_max_iter {
            let (z_v, z_d) = step_forcing(ops, &it.phi_v, &it.phi_d, &it.sigma_v, &it.sigma_d, &ex.phi_t_prev, mu, p);
            let (half_v, iv) = project_nodewise(
                &z_v,
                &it.phi_d,
                &it.phi_v,
                &ex.sets.passive_v,
                &ex.passive_v,
                mu,
                p,
                None,
                opts.projection_tol,
                opts.projection_max_iter,
            )?;
            let (half_d, id) = project_nodewise(
                &z_d,
                &it.phi_v,
                &it.phi_d,
                &ex.sets.passive_d,
                &ex.passive_d,
                mu,
                p,
                None,
                opts.projection_tol,
                opts.projection_max_iter,
            )?;
            proj_iters = proj_iters.max(iv).max(id);
            let next = system.solve(
                ops,
                p,
                ex,
                &half_v,
                &half_d,
                &z_v,
                &z_d,
                &it.sigma_v,
                &it.sigma_d,
                opts.linear_tol,
            )?;
            increment = max_abs_diff(&next.phi_v, &it.phi_v) + max_abs_diff(&next.phi_d, &it.phi_d);
            it = next;
            if !increment.is_finite() {
                break;
            }
            if increment < opts.outer_tol {
                return Ok((it, k, proj_iters));
            }
        }
        Err(SchemeError::OuterIteration {
            iterations: opts.outer_max_iter,
            increment: increment.to_f64_lossy(),
        })
    }

    /// Advances by `state.dt`, halving the step on recoverable failures up to
    /// `max_halvings` times.
    pub fn advance(&mut self, state: &SimulationState<T>) -> Result<(SimulationState<T>, StepOutcome<T>), SchemeError> {
        if !(state.dt > T::zero()) {
            return Err(SchemeError::Invalid(format!("time step {} must be positive", state.dt)));
        }
        let mut dt = state.dt;
        let mut halvings = 0;
        loop {
            match self.try_step(state, dt) {
                Ok((next, mut outcome)) => {
                    outcome.halvings = halvings;
                    return Ok((next, outcome));
                }
                Err(e) if e.is_recoverable() => {
                    if halvings == self.options.max_halvings {
                        return Err(SchemeError::DtUnderflow {
                            halvings,
                            dt: dt.to_f64_lossy(),
                            last: Box::new(e),
                        });
                    }
                    halvings += 1;
                    dt = dt * T::lit(0.5);
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Removes negative round-off from a committed tumor fraction and rescales
/// the positive part so the lumped mass is unchanged. Values below
/// `-tol` are a constraint violation. Returns the largest clamped magnitude.
fn clamp_and_rescale<T: Real>(field: &'static str, f: &mut [T], w: &[T], tol: T) -> Result<T, SchemeError> {
    let mut worst = T::zero();
    for (j, &v) in f.iter().enumerate() {
        if !(v >= -tol) {
            return Err(SchemeError::Constraint {
                field,
                node: j,
                value: v.to_f64_lossy(),
            });
        }
        worst = worst.max(-v);
    }
    if worst == T::zero() {
        return Ok(worst);
    }
    let total: T = f.iter().zip(w).map(|(v, w)| *v * *w).sum();
    for v in f.iter_mut() {
        *v = v.max(T::zero());
    }
    let positive: T = f.iter().zip(w).map(|(v, w)| *v * *w).sum();
    if positive > T::zero() {
        let s = total.max(T::zero()) / positive;
        for v in f.iter_mut() {
            *v *= s;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_preserves_lumped_mass() {
        let w = [0.5, 1.0, 0.25, 2.0];
        let mut f = [0.3, -1e-7, 0.1, 0.0];
        let before: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        let worst = clamp_and_rescale("phi_v", &mut f, &w, 1e-5).unwrap();
        let after: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert_eq!(worst, 1e-7);
        assert!(f.iter().all(|v| *v >= 0.0));
        assert!((before - after).abs() < 1e-16);
    }

    #[test]
    fn clamp_rejects_large_negatives() {
        let mut f = [0.3, -1e-3];
        assert!(clamp_and_rescale("phi_d", &mut f, &[1.0, 1.0], 1e-5).is_err());
    }
}
