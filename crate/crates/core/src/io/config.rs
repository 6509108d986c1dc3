//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! case = sphere          # sphere | resection | custom
//! V_T = 5000             # also recomputes V_an = V_T / phi_bar_a
//! t_end = 10
//! radio = 2.0 2.5 0.3    # repeated: start end rate
//! probe = 0,10 20,10 201 # from to samples
//! ```
//! Unknown keys are errors. Parameter keys use the model symbol names
//! (`Pi`, `eps`, `L_v`, `V_T`, `delta_n`, ...).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{ModelParams, RateInterval, TherapySchedule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("missing required setting: {0}")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    /// Spherical tumor of viable cells in a box.
    Sphere,
    /// Resection cavity with residual tumor cells on its boundary.
    Resection,
    /// Mesh (and optionally initial state) from files.
    Custom,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::Resection => "resection",
            Self::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sphere" => Some(Self::Sphere),
            "resection" => Some(Self::Resection),
            "custom" => Some(Self::Custom),
            _ => None,
        }
    }
}

/// Straight probe segment sampled at `samples` equispaced points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub from: [f64; 3],
    pub to: [f64; 3],
    pub samples: usize,
}

/// Geometry of the generated box cases.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub dim: usize,
    /// Box side lengths (mm); only the first `dim` are used.
    pub lengths: [f64; 3],
    /// Target mesh size (mm).
    pub h: f64,
    /// Sphere / cavity centre; `None` means the box centre.
    pub center: Option<[f64; 3]>,
    /// Sphere / cavity radius (mm).
    pub radius: f64,
    /// Optional slab `x in [lo, hi]` labelled white matter, with the
    /// preferential and diffusion tensors stretched along `x` by `wm_factor`.
    pub wm_band: Option<(f64, f64)>,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            lengths: [20.0; 3],
            h: 0.5,
            center: None,
            radius: 2.5,
            wm_band: None,
        }
    }
}

impl DomainSpec {
    pub fn center(&self) -> [f64; 3] {
        self.center.unwrap_or_else(|| {
            let mut c = self.lengths.map(|l| 0.5 * l);
            if self.dim == 2 {
                c[2] = 0.0;
            }
            c
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseKind,
    pub domain: DomainSpec,
    /// Mesh file for `custom` runs.
    pub mesh: Option<PathBuf>,
    /// Initial state (VTK) for `custom` runs; healthy tissue when absent.
    pub initial: Option<PathBuf>,
    pub params: ModelParams<f64>,
    pub schedule: TherapySchedule<f64>,
    pub t_end: f64,
    pub out_dir: PathBuf,
    /// Snapshot every `cadence` committed steps.
    pub cadence: usize,
    pub probes: Vec<ProbeSpec>,
    pub seed: u64,
    /// Fraction of boundary-shell nodes seeded with tumor in resection runs.
    pub shell_fraction: f64,
    /// First time step; the base step when absent.
    pub dt: Option<f64>,
    pub mu_over_dt: f64,
    pub max_halvings: usize,
    pub upwind_chemotaxis: bool,
    pub adaptive: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: CaseKind::Sphere,
            domain: DomainSpec::default(),
            mesh: None,
            initial: None,
            params: ModelParams::default(),
            schedule: TherapySchedule::default(),
            t_end: 10.0,
            out_dir: PathBuf::from("out"),
            cadence: 10,
            probes: Vec::new(),
            seed: 0,
            shell_fraction: 0.3,
            dt: None,
            mu_over_dt: 0.1,
            max_halvings: 20,
            upwind_chemotaxis: true,
            adaptive: true,
        }
    }
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| value_err(key, format!("'{v}' is not a number")))?;
    if !x.is_finite() {
        return Err(value_err(key, "must be finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| value_err(key, format!("'{v}' is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(value_err(key, format!("'{v}' is not a boolean"))),
    }
}

/// Comma- or whitespace-separated point with 2 or 3 coordinates.
pub fn parse_point(key: &str, v: &str) -> Result<[f64; 3], ConfigError> {
    let parts: Vec<&str> = v.split([',', ' ']).filter(|s| !s.is_empty()).collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err(value_err(key, format!("'{v}' must have 2 or 3 coordinates")));
    }
    let mut p = [0.0; 3];
    for (slot, s) in p.iter_mut().zip(&parts) {
        *slot = parse_f64(key, s)?;
    }
    Ok(p)
}

fn parse_interval(key: &str, v: &str) -> Result<RateInterval<f64>, ConfigError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(value_err(key, "expected 'start end rate'"));
    }
    Ok(RateInterval {
        start: parse_f64(key, parts[0])?,
        end: parse_f64(key, parts[1])?,
        rate: parse_f64(key, parts[2])?,
    })
}

/// Model parameter addressed by its symbol name.
fn param_slot<'a>(p: &'a mut ModelParams<f64>, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "Pi" => &mut p.pi,
        "eps" => &mut p.eps,
        "phi_bar" => &mut p.phi_bar,
        "L_v" => &mut p.l_v,
        "L_d" => &mut p.l_d,
        "L_a_inv" => &mut p.l_a_inv,
        "h_v" => &mut p.h_v_base,
        "h_a" => &mut p.h_a,
        "b_n" => &mut p.b_n,
        "b_c" => &mut p.b_c,
        "l_nv" => &mut p.l_nv_base,
        "l_ca" => &mut p.l_ca,
        "nu" => &mut p.nu,
        "nu_d" => &mut p.nu_d,
        "delta_n" => &mut p.delta_n,
        "k1" => &mut p.k1,
        "k2" => &mut p.k2,
        "k3" => &mut p.k3,
        "V_n" => &mut p.v_n,
        "V_T" => &mut p.v_t,
        "V_an" => &mut p.v_an,
        "V_a" => &mut p.v_a,
        "V_c" => &mut p.v_c,
        "delta_v" => &mut p.delta_v,
        "delta_a" => &mut p.delta_a,
        "delta_c" => &mut p.delta_c,
        "phi_bar_a" => &mut p.phi_bar_a,
        "hr_width" => &mut p.hr_width,
        "wm_factor" => &mut p.wm_factor,
        _ => return None,
    })
}

const PARAM_KEYS: [&str; 29] = [
    "Pi", "eps", "phi_bar", "L_v", "L_d", "L_a_inv", "h_v", "h_a", "b_n", "b_c", "l_nv", "l_ca", "nu", "nu_d",
    "delta_n", "k1", "k2", "k3", "V_n", "V_T", "V_an", "V_a", "V_c", "delta_v", "delta_a", "delta_c", "phi_bar_a",
    "hr_width", "wm_factor",
];

/// Reads and validates a config file; relative paths inside it are resolved
/// against the file's directory.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut v_t_set = false;
    let mut v_an_set = false;
    let mut seen = std::collections::HashSet::new();
    let resolve = |v: &str| {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax {
            line,
            msg: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let repeatable = matches!(key, "radio" | "chemo" | "probe");
        if !repeatable && !seen.insert(key.to_string()) {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("key '{key}' given twice"),
            });
        }
        if let Some(slot) = param_slot(&mut cfg.params, key) {
            *slot = parse_f64(key, value)?;
            v_t_set |= key == "V_T";
            v_an_set |= key == "V_an";
            continue;
        }
        match key {
            "case" => {
                cfg.case = CaseKind::parse(value)
                    .ok_or_else(|| value_err(key, format!("'{value}' is not sphere, resection or custom")))?
            }
            "mesh" => cfg.mesh = Some(resolve(value)),
            "initial" => cfg.initial = Some(resolve(value)),
            "dim" => cfg.domain.dim = parse_usize(key, value)?,
            "domain" => cfg.domain.lengths = parse_point(key, value)?,
            "h" => cfg.domain.h = parse_f64(key, value)?,
            "center" => cfg.domain.center = Some(parse_point(key, value)?),
            "radius" => cfg.domain.radius = parse_f64(key, value)?,
            "wm_band" => {
                let p = parse_point(key, value)?;
                cfg.domain.wm_band = Some((p[0], p[1]));
            }
            "t_end" => cfg.t_end = parse_f64(key, value)?,
            "out" => cfg.out_dir = resolve(value),
            "cadence" => cfg.cadence = parse_usize(key, value)?,
            "seed" => cfg.seed = value.parse().map_err(|_| value_err(key, "not an unsigned integer"))?,
            "shell_fraction" => cfg.shell_fraction = parse_f64(key, value)?,
            "dt" => cfg.dt = Some(parse_f64(key, value)?),
            "mu_over_dt" => cfg.mu_over_dt = parse_f64(key, value)?,
            "max_halvings" => cfg.max_halvings = parse_usize(key, value)?,
            "upwind_chemotaxis" => cfg.upwind_chemotaxis = parse_bool(key, value)?,
            "adaptive" => cfg.adaptive = parse_bool(key, value)?,
            "radio" => cfg.schedule.radio.push(parse_interval(key, value)?),
            "chemo" => cfg.schedule.chemo.push(parse_interval(key, value)?),
            "probe" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(value_err(key, "expected 'from to samples'"));
                }
                cfg.probes.push(ProbeSpec {
                    from: parse_point(key, parts[0])?,
                    to: parse_point(key, parts[1])?,
                    samples: parse_usize(key, parts[2])?,
                });
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    cfg.domain.center = Some(cfg.domain.center());
    if v_t_set && !v_an_set {
        let v_t = cfg.params.v_t;
        cfg.params.set_tumor_supply(v_t);
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| value_err("params", e.to_string()))?;
        self.schedule.validate().map_err(|e| value_err("radio/chemo", e.to_string()))?;
        if !(self.t_end > 0.0) {
            return Err(value_err("t_end", "must be > 0"));
        }
        if self.cadence == 0 {
            return Err(value_err("cadence", "must be >= 1"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(value_err("dt", "must be > 0"));
            }
        }
        if !(self.mu_over_dt > 0.0) {
            return Err(value_err("mu_over_dt", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.shell_fraction) {
            return Err(value_err("shell_fraction", "must lie in [0, 1]"));
        }
        let d = &self.domain;
        if d.dim != 2 && d.dim != 3 {
            return Err(value_err("dim", "must be 2 or 3"));
        }
        if d.lengths[..d.dim].iter().any(|l| !(*l > 0.0)) {
            return Err(value_err("domain", "side lengths must be > 0"));
        }
        if !(d.h > 0.0) {
            return Err(value_err("h", "must be > 0"));
        }
        if let Some((lo, hi)) = d.wm_band {
            if !(lo < hi) {
                return Err(value_err("wm_band", "needs lo < hi"));
            }
        }
        for p in &self.probes {
            if p.samples < 2 {
                return Err(value_err("probe", "needs at least 2 samples"));
            }
        }
        if self.case == CaseKind::Custom {
            let mesh = self.mesh.as_ref().ok_or_else(|| ConfigError::Missing("mesh (case = custom)".into()))?;
            for p in std::iter::once(mesh).chain(&self.initial) {
                if !p.is_file() {
                    return Err(value_err("mesh", format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Resolved configuration with every default written out. Parsing the
    /// echo yields an identical config.
    pub fn echo(&self) -> String {
        let mut s = String::from("# resolved configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let pt = |p: [f64; 3], dim: usize| {
            p[..dim.max(2)].iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
        };
        let dim = self.domain.dim;
        kv("case", self.case.name().into());
        if let Some(m) = &self.mesh {
            kv("mesh", m.display().to_string());
        }
        if let Some(m) = &self.initial {
            kv("initial", m.display().to_string());
        }
        kv("dim", dim.to_string());
        kv("domain", pt(self.domain.lengths, 3));
        kv("h", format!("{:?}", self.domain.h));
        kv("center", pt(self.domain.center(), 3));
        kv("radius", format!("{:?}", self.domain.radius));
        if let Some((lo, hi)) = self.domain.wm_band {
            kv("wm_band", format!("{lo:?},{hi:?}"));
        }
        kv("t_end", format!("{:?}", self.t_end));
        kv("out", self.out_dir.display().to_string());
        kv("cadence", self.cadence.to_string());
        kv("seed", self.seed.to_string());
        kv("shell_fraction", format!("{:?}", self.shell_fraction));
        if let Some(dt) = self.dt {
            kv("dt", format!("{dt:?}"));
        }
        kv("mu_over_dt", format!("{:?}", self.mu_over_dt));
        kv("max_halvings", self.max_halvings.to_string());
        kv("upwind_chemotaxis", self.upwind_chemotaxis.to_string());
        kv("adaptive", self.adaptive.to_string());
        let mut p = self.params.clone();
        for key in PARAM_KEYS {
            let v = *param_slot(&mut p, key).expect("listed key");
            kv(key, format!("{v:?}"));
        }
        for iv in &self.schedule.radio {
            kv("radio", format!("{:?} {:?} {:?}", iv.start, iv.end, iv.rate));
        }
        for iv in &self.schedule.chemo {
            kv("chemo", format!("{:?} {:?} {:?}", iv.start, iv.end, iv.rate));
        }
        for pr in &self.probes {
            kv("probe", format!("{} {} {}", pt(pr.from, dim), pt(pr.to, dim), pr.samples));
        }
        s
    }
}
