use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use angiofem::diagnostics::{line_probe, sci};
use angiofem::io::{
    generate_resection_case, generate_sphere_case, parse_config, parse_point, read_vtk, run, write_vtk_file,
    DomainSpec, RunConfig,
};
use angiofem::mesh::write_mesh;
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "angiofem", version, about = "Tumor growth with angiogenesis on simplicial meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenCase {
    Sphere,
    Resection,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final time in days (overrides `t_end`).
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Write a synthetic mesh, its initial state and a matching config.
    GenCase {
        #[arg(long, value_enum)]
        case: GenCase,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0.5)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a VTK state along a segment and print CSV.
    Probe {
        #[arg(long)]
        state: PathBuf,
        /// Start point `x,y[,z]`.
        #[arg(long)]
        from: String,
        /// End point `x,y[,z]`.
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn cmd_run(config: PathBuf, out: Option<PathBuf>, t_end: Option<f64>) -> ExitCode {
    let mut cfg = match parse_config(&config) {
        Ok(c) => c,
        Err(e) => {
            let code = if matches!(e, angiofem::io::ConfigError::Io { .. }) { EXIT_IO } else { EXIT_CONFIG };
            return fail(code, e);
        }
    };
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(t) = t_end {
        cfg.t_end = t;
    }
    match run(&cfg) {
        Ok(s) => {
            println!(
                "completed {} steps to t = {} ({} halvings); output in {}",
                s.steps,
                sci(s.final_state.t),
                s.halvings,
                s.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code() as u8, e),
    }
}

fn cmd_gen_case(case: GenCase, dim: usize, h: f64, out: PathBuf, seed: u64) -> ExitCode {
    let mut cfg = RunConfig {
        domain: DomainSpec {
            dim,
            h,
            ..DomainSpec::default()
        },
        seed,
        ..RunConfig::default()
    };
    let generated = match case {
        GenCase::Sphere => generate_sphere_case(&cfg.domain, &cfg.params),
        GenCase::Resection => generate_resection_case(&cfg.domain, seed, cfg.shell_fraction, &cfg.params),
    };
    let (mesh, state) = match generated {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let written = (|| -> std::io::Result<()> {
        std::fs::create_dir_all(&out)?;
        let mut w = BufWriter::new(File::create(out.join("mesh.txt"))?);
        write_mesh(&mesh, &mut w)?;
        w.flush()?;
        write_vtk_file(&state, &mesh, out.join("initial.vtk"))?;
        cfg.case = angiofem::io::CaseKind::Custom;
        cfg.mesh = Some(PathBuf::from("mesh.txt"));
        cfg.initial = Some(PathBuf::from("initial.vtk"));
        cfg.out_dir = PathBuf::from("run");
        std::fs::write(out.join("case.cfg"), cfg.echo())
    })();
    match written {
        Ok(()) => {
            println!("wrote mesh.txt, initial.vtk and case.cfg to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_IO, e),
    }
}

fn cmd_probe(state: PathBuf, from: String, to: String, samples: usize) -> ExitCode {
    let (p0, p1) = match (parse_point("from", &from), parse_point("to", &to)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fail(EXIT_CONFIG, e),
    };
    let (mesh, st) = match read_vtk(&state) {
        Ok(r) => r,
        Err(angiofem::io::VtkError::Io(e)) => return fail(EXIT_IO, e),
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let table = match line_probe(&st, &mesh, p0, p1, samples) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let emit = || -> std::io::Result<()> {
        writeln!(w, "s,phi_v,phi_d,phi_a,n,c")?;
        for s in table {
            let vals: Vec<String> = match s.values {
                Some(v) => v.iter().map(|x| sci(*x)).collect(),
                None => vec!["nan".into(); 5],
            };
            writeln!(w, "{},{}", sci(s.s), vals.join(","))?;
        }
        Ok(())
    };
    match emit() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_IO, e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, t_end } => cmd_run(config, out, t_end),
        Command::GenCase {
            case,
            dim,
            h,
            out,
            seed,
        } => cmd_gen_case(case, dim, h, out, seed),
        Command::Probe {
            state,
            from,
            to,
            samples,
        } => cmd_probe(state, from, to, samples),
    }
}
