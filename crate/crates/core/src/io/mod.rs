//! Configuration, synthetic cases, the run driver and file formats.

mod cases;
mod config;
mod driver;
mod vtk;

pub use cases::{
    box_for, generate_resection_case, generate_sphere_case, resection_indicator, CaseError, SPHERE_PHI_V,
};
pub use config::{parse_config, parse_config_str, parse_point, CaseKind, ConfigError, DomainSpec, ProbeSpec, RunConfig};
pub use driver::{build_case, clip_to_end, run, scheme_options, RunError, RunSummary};
pub use vtk::{parse_vtk, point_fields, read_vtk, write_vtk, write_vtk_file, VtkError};
