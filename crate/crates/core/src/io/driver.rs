//! Simulation driver: builds the case, advances to `t_end`, and writes the
//! config echo, the per-step CSV report, VTK snapshots and probe tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::cases::{generate_resection_case, generate_sphere_case, CaseError};
use super::config::{CaseKind, ConfigError, RunConfig};
use super::vtk::{read_vtk, write_vtk_file, VtkError};
use crate::diagnostics::{line_probe, sci, DiagnosticsError, StepReport};
use crate::mesh::{load_mesh, MeshError, SimplicialMesh};
use crate::scheme::{Integrator, SchemeError, SchemeOptions, SimulationState, StepOutcome};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("initial state: {0}")]
    Vtk(#[from] VtkError),
    #[error("numerical abort at t = {t}: {source} (diagnostic dump in {dump})")]
    Scheme {
        t: f64,
        #[source]
        source: SchemeError,
        dump: PathBuf,
    },
    #[error("invalid setup: {0}")]
    Setup(#[from] SchemeError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit status: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::Io { .. }) | Self::Io { .. } => 4,
            Self::Mesh(MeshError::Io(_)) | Self::Vtk(VtkError::Io(_)) => 4,
            Self::Config(_) | Self::Case(_) | Self::Mesh(_) | Self::Vtk(_) | Self::Setup(_) => 2,
            Self::Scheme { .. } | Self::Diagnostics(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub halvings: usize,
    pub final_state: SimulationState<f64>,
    pub out_dir: PathBuf,
}

/// Mesh and initial state described by `cfg`.
pub fn build_case(cfg: &RunConfig) -> Result<(SimplicialMesh<f64>, SimulationState<f64>), RunError> {
    let (mesh, mut state) = match cfg.case {
        CaseKind::Sphere => generate_sphere_case(&cfg.domain, &cfg.params)?,
        CaseKind::Resection => generate_resection_case(&cfg.domain, cfg.seed, cfg.shell_fraction, &cfg.params)?,
        CaseKind::Custom => {
            let path = cfg.mesh.as_ref().ok_or_else(|| ConfigError::Missing("mesh".into()))?;
            let mesh: SimplicialMesh<f64> = load_mesh(path)?;
            let state = match &cfg.initial {
                Some(p) => {
                    let (vmesh, s) = read_vtk(p)?;
                    if vmesh.n_nodes() != mesh.n_nodes() {
                        return Err(ConfigError::Value {
                            key: "initial".into(),
                            msg: format!("{} nodes, mesh has {}", vmesh.n_nodes(), mesh.n_nodes()),
                        }
                        .into());
                    }
                    s
                }
                None => SimulationState::healthy(mesh.n_nodes(), 0.0),
            };
            (mesh, state)
        }
    };
    state.t = 0.0;
    state.step_index = 0;
    state.dt = cfg.dt.unwrap_or_else(|| cfg.params.base_time_step());
    Ok((mesh, state))
}

pub fn scheme_options(cfg: &RunConfig) -> SchemeOptions<f64> {
    SchemeOptions {
        mu_over_dt: cfg.mu_over_dt,
        max_halvings: cfg.max_halvings,
        upwind_chemotaxis: cfg.upwind_chemotaxis,
        adaptive: cfg.adaptive,
        ..SchemeOptions::default()
    }
}

/// Relative slack under which the last step is stretched to land on `t_end`
/// instead of leaving a sliver step.
const END_SLACK: f64 = 1e-3;

/// Step to attempt from `t` with proposed `dt`.
pub fn clip_to_end(t: f64, dt: f64, t_end: f64) -> f64 {
    let remaining = t_end - t;
    if remaining <= dt * (1.0 + END_SLACK) {
        remaining
    } else {
        dt
    }
}

struct Outputs {
    dir: PathBuf,
    report: BufWriter<File>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join("report.csv");
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut report = BufWriter::new(file);
        writeln!(report, "{}", StepReport::<f64>::csv_header()).map_err(io_err(&path))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            report,
        })
    }

    fn row(&mut self, r: &StepReport<f64>) -> Result<(), RunError> {
        let path = self.dir.join("report.csv");
        writeln!(self.report, "{}", r.csv_row()).map_err(io_err(&path))?;
        self.report.flush().map_err(io_err(&path))
    }

    fn snapshot(&self, name: &str, state: &SimulationState<f64>, mesh: &SimplicialMesh<f64>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        write_vtk_file(state, mesh, &path).map_err(io_err(&path))
    }

    fn text(&self, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(io_err(&path))
    }
}

fn snapshot_name(step: usize) -> String {
    format!("state_{step:06}.vtk")
}

/// Runs `cfg` to completion. On a numerical abort the last committed state
/// is written to `abort_state.vtk` and the failure to `abort.txt`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let (mesh, mut state) = build_case(cfg)?;
    let mut out = Outputs::create(&cfg.out_dir)?;
    out.text("config.resolved", &cfg.echo())?;

    let mut integ = Integrator::new(&mesh, cfg.params.clone(), cfg.schedule.clone(), scheme_options(cfg))?;
    let opts = integ.options().clone();
    let report = |s: &SimulationState<f64>, o: Option<&StepOutcome<f64>>, integ: &Integrator<f64>| {
        let ops = integ.operators();
        StepReport::new(s, o, ops.weights(), &ops.k_iso, integ.params(), opts.range_tol, opts.saturation_margin)
    };
    out.row(&report(&state, None, &integ)?)?;
    out.snapshot(&snapshot_name(0), &state, &mesh)?;

    let mut halvings = 0;
    let end_tol = 1e-12 * cfg.t_end.max(1.0);
    while state.t < cfg.t_end - end_tol {
        let mut attempt = state.clone();
        attempt.dt = clip_to_end(state.t, state.dt, cfg.t_end);
        let (mut next, outcome) = match integ.advance(&attempt) {
            Ok(r) => r,
            Err(source) => {
                let dump = cfg.out_dir.join("abort.txt");
                let last = report(&state, None, &integ)?;
                let body = format!(
                    "numerical abort\nerror: {source}\nt: {}\nattempted dt: {}\nlast committed step:\n{}\n{}\n",
                    sci(state.t),
                    sci(attempt.dt),
                    StepReport::<f64>::csv_header(),
                    last.csv_row()
                );
                out.text("abort.txt", &body)?;
                out.snapshot("abort_state.vtk", &state, &mesh)?;
                return Err(RunError::Scheme {
                    t: state.t,
                    source,
                    dump,
                });
            }
        };
        if (next.t - cfg.t_end).abs() <= end_tol {
            next.t = cfg.t_end;
        }
        halvings += outcome.halvings;
        out.row(&report(&next, Some(&outcome), &integ)?)?;
        state = next;
        let done = state.t >= cfg.t_end - end_tol;
        if state.step_index % cfg.cadence == 0 || done {
            out.snapshot(&snapshot_name(state.step_index), &state, &mesh)?;
        }
    }

    for (i, p) in cfg.probes.iter().enumerate() {
        let samples = line_probe(&state, &mesh, p.from, p.to, p.samples)?;
        let mut body = String::from("s,x,y,z,phi_v,phi_d,phi_a,n,c\n");
        for smp in samples {
            let mut cols = vec![sci(smp.s)];
            cols.extend(smp.point.iter().map(|v| sci(*v)));
            match smp.values {
                Some(v) => cols.extend(v.iter().map(|x| sci(*x))),
                None => cols.extend(std::iter::repeat("nan".to_string()).take(5)),
            }
            body.push_str(&cols.join(","));
            body.push('\n');
        }
        out.text(&format!("probe_{i}.csv"), &body)?;
    }

    Ok(RunSummary {
        steps: state.step_index,
        halvings,
        final_state: state,
        out_dir: cfg.out_dir.clone(),
    })
}
