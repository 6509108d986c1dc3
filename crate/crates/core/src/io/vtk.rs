//! Legacy ASCII VTK unstructured grids.
//!
//! Point data: `phi_v`, `phi_d`, `phi_a`, `n`, `c`. Cell data: `tissue`
//! (integer label) and `irc`. Reals are written with 9 significant digits.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::diagnostics::sci;
use crate::mesh::{CellData, MeshError, SimplicialMesh, Tissue};
use crate::scheme::SimulationState;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("VTK parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

const POINT_FIELDS: [&str; 5] = ["phi_v", "phi_d", "phi_a", "n", "c"];

pub fn write_vtk<W: Write>(state: &SimulationState<f64>, mesh: &SimplicialMesh<f64>, mut w: W) -> std::io::Result<()> {
    let nn = mesh.n_nodes();
    let nc = mesh.n_cells();
    let nv = mesh.verts_per_cell();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "tumor state t = {}", sci(state.t))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nn} double")?;
    for x in mesh.coords() {
        writeln!(w, "{} {} {}", sci(x[0]), sci(x[1]), sci(x[2]))?;
    }
    writeln!(w, "CELLS {nc} {}", nc * (nv + 1))?;
    for cell in mesh.cells() {
        let ids: Vec<String> = cell.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{nv} {}", ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {nc}")?;
    let ty = if mesh.dim() == 2 { 5 } else { 10 };
    for _ in 0..nc {
        writeln!(w, "{ty}")?;
    }
    writeln!(w, "CELL_DATA {nc}")?;
    writeln!(w, "SCALARS tissue int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for k in 0..nc {
        writeln!(w, "{}", mesh.cell_data(k).tissue.code())?;
    }
    writeln!(w, "SCALARS irc double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for k in 0..nc {
        writeln!(w, "{}", sci(mesh.cell_data(k).irc))?;
    }
    writeln!(w, "POINT_DATA {nn}")?;
    for (name, f) in state.concentration_fields() {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in f {
            writeln!(w, "{}", sci(*v))?;
        }
    }
    Ok(())
}

pub fn write_vtk_file(state: &SimulationState<f64>, mesh: &SimplicialMesh<f64>, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk(state, mesh, &mut f)?;
    f.flush()
}

fn perr(msg: impl Into<String>) -> VtkError {
    VtkError::Parse(msg.into())
}

struct Tokens<'a> {
    inner: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<&'a str, VtkError> {
        self.inner.next().ok_or_else(|| perr("unexpected end of file"))
    }

    fn expect(&mut self, word: &str) -> Result<(), VtkError> {
        let t = self.next()?;
        if t != word {
            return Err(perr(format!("expected '{word}', found '{t}'")));
        }
        Ok(())
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T, VtkError> {
        let t = self.next()?;
        t.parse().map_err(|_| perr(format!("cannot parse number '{t}'")))
    }

    fn nums<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>, VtkError> {
        (0..n).map(|_| self.num()).collect()
    }
}

/// Reads a file produced by [`write_vtk`]. Tensors are not stored and come
/// back as identities; the Lagrange multipliers come back as zeros. The time
/// is taken from the title line when present.
pub fn parse_vtk(text: &str) -> Result<(SimplicialMesh<f64>, SimulationState<f64>), VtkError> {
    let mut lines = text.lines();
    let version = lines.next().ok_or_else(|| perr("empty file"))?;
    if !version.starts_with("# vtk DataFile") {
        return Err(perr("missing '# vtk DataFile' header"));
    }
    let title = lines.next().ok_or_else(|| perr("missing title"))?;
    let t = title
        .split_once("t = ")
        .and_then(|(_, v)| v.trim().parse::<f64>().ok())
        .unwrap_or(0.0);
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let mut tok = Tokens {
        inner: rest.split_whitespace().peekable(),
    };
    tok.expect("ASCII")?;
    tok.expect("DATASET")?;
    tok.expect("UNSTRUCTURED_GRID")?;
    tok.expect("POINTS")?;
    let nn: usize = tok.num()?;
    tok.next()?;
    let flat: Vec<f64> = tok.nums(3 * nn)?;
    let coords: Vec<[f64; 3]> = flat.chunks(3).map(|p| [p[0], p[1], p[2]]).collect();

    tok.expect("CELLS")?;
    let nc: usize = tok.num()?;
    let _size: usize = tok.num()?;
    let mut cells = Vec::new();
    let mut nv = 0;
    for _ in 0..nc {
        let k: usize = tok.num()?;
        if nv == 0 {
            nv = k;
        } else if k != nv {
            return Err(perr("mixed cell types are not supported"));
        }
        cells.extend(tok.nums::<usize>(k)?);
    }
    tok.expect("CELL_TYPES")?;
    tok.num::<usize>()?;
    tok.nums::<u8>(nc)?;
    let dim = match nv {
        3 => 2,
        4 => 3,
        _ => return Err(perr(format!("cells with {nv} vertices are not simplices"))),
    };

    let mut data = vec![CellData::<f64>::default(); nc];
    let mut state = SimulationState::healthy(nn, 0.0);
    state.t = t;
    let mut section = "";
    while let Some(word) = tok.inner.next() {
        match word {
            "CELL_DATA" | "POINT_DATA" => {
                section = word;
                tok.num::<usize>()?;
            }
            "SCALARS" => {
                let name = tok.next()?;
                tok.next()?;
                if tok.inner.peek().is_some_and(|s| s.parse::<usize>().is_ok()) {
                    tok.next()?;
                }
                tok.expect("LOOKUP_TABLE")?;
                tok.next()?;
                match (section, name) {
                    ("CELL_DATA", "tissue") => {
                        for d in data.iter_mut() {
                            let code: u8 = tok.num()?;
                            d.tissue = Tissue::from_code(code).ok_or_else(|| perr(format!("bad tissue code {code}")))?;
                        }
                    }
                    ("CELL_DATA", "irc") => {
                        for d in data.iter_mut() {
                            d.irc = tok.num()?;
                        }
                    }
                    ("POINT_DATA", _) => {
                        let values = tok.nums::<f64>(nn)?;
                        let slot = match name {
                            "phi_v" => &mut state.phi_v,
                            "phi_d" => &mut state.phi_d,
                            "phi_a" => &mut state.phi_a,
                            "n" => &mut state.n,
                            "c" => &mut state.c,
                            _ => continue,
                        };
                        *slot = values;
                    }
                    _ => {
                        let count = if section == "CELL_DATA" { nc } else { nn };
                        tok.nums::<f64>(count)?;
                    }
                }
            }
            other => return Err(perr(format!("unexpected token '{other}'"))),
        }
    }
    let mesh = SimplicialMesh::new(dim, coords, cells, data)?;
    Ok((mesh, state))
}

pub fn read_vtk(path: impl AsRef<Path>) -> Result<(SimplicialMesh<f64>, SimulationState<f64>), VtkError> {
    parse_vtk(&std::fs::read_to_string(path)?)
}

/// Names of the point-data blocks, in file order.
pub fn point_fields() -> [&'static str; 5] {
    POINT_FIELDS
}
