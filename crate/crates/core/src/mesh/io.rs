//! Plain-text mesh format.
//!
//! ```text
//! dim n_nodes n_cells
//! x y [z]                                   (n_nodes lines)
//! i0 i1 i2 [i3]  D..  T..  tissue  irc      (n_cells lines)
//! ```
//! Tensors list `xx xy yy` in 2-D and `xx xy yy xz yz zz` in 3-D. Indices are
//! 0-based, `#` starts a comment line.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{CellData, MeshError, SimplicialMesh, SymTensor, Tissue};
use crate::scalar::Real;

pub fn load_mesh<T: Real + FromStr>(path: impl AsRef<Path>) -> Result<SimplicialMesh<T>, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

fn field<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("cannot parse {what} from '{tok}'"),
    })
}

pub fn parse_mesh<T: Real + FromStr>(text: &str) -> Result<SimplicialMesh<T>, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hl, header) = lines.next().ok_or(MeshError::Parse {
        line: 0,
        msg: "empty mesh file".into(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(MeshError::Parse {
            line: hl,
            msg: "header must be 'dim n_nodes n_cells'".into(),
        });
    }
    let dim: usize = field(head[0], hl, "dim")?;
    let n_nodes: usize = field(head[1], hl, "n_nodes")?;
    let n_cells: usize = field(head[2], hl, "n_cells")?;
    if dim != 2 && dim != 3 {
        return Err(MeshError::Parse {
            line: hl,
            msg: format!("dim must be 2 or 3, got {dim}"),
        });
    }

    let mut coords = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, l) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            msg: format!("expected {n_nodes} node lines, found {}", coords.len()),
        })?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != dim {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("node line needs {dim} coordinates, got {}", toks.len()),
            });
        }
        let mut p = [T::zero(); 3];
        for (c, t) in toks.iter().enumerate() {
            p[c] = field(t, ln, "coordinate")?;
        }
        coords.push(p);
    }

    let nv = dim + 1;
    let nt = if dim == 2 { 3 } else { 6 };
    let expected = nv + 2 * nt + 2;
    let mut cells = Vec::with_capacity(n_cells * nv);
    let mut data = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (ln, l) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            msg: format!("expected {n_cells} cell lines, found {}", data.len()),
        })?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != expected {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("cell line needs {expected} fields, got {}", toks.len()),
            });
        }
        for t in &toks[..nv] {
            cells.push(field::<usize>(t, ln, "node index")?);
        }
        let mut tensors = [SymTensor::identity(); 2];
        for (s, tensor) in tensors.iter_mut().enumerate() {
            let off = nv + s * nt;
            let v: Vec<T> = toks[off..off + nt]
                .iter()
                .map(|t| field(t, ln, "tensor component"))
                .collect::<Result<_, _>>()?;
            *tensor = if dim == 2 {
                SymTensor::from_components_2d(v[0], v[1], v[2])
            } else {
                SymTensor::from_components_3d(v[0], v[1], v[2], v[3], v[4], v[5])
            };
        }
        let code: u8 = field(toks[expected - 2], ln, "tissue")?;
        let tissue = Tissue::from_code(code).ok_or(MeshError::Parse {
            line: ln,
            msg: format!("tissue code {code} not in {{0,1,2}}"),
        })?;
        let irc: T = field(toks[expected - 1], ln, "irc")?;
        if !(irc >= T::zero() && irc <= T::one()) {
            return Err(MeshError::Parse {
                line: ln,
                msg: "irc outside [0,1]".into(),
            });
        }
        data.push(CellData {
            d: tensors[0],
            t: tensors[1],
            tissue,
            irc,
        });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(MeshError::Parse {
            line: ln,
            msg: "trailing content after the declared cells".into(),
        });
    }
    SimplicialMesh::new(dim, coords, cells, data)
}

/// Writes the mesh in the text format; values use the shortest decimal
/// representation that parses back to the same number.
pub fn write_mesh<T: Real, W: Write>(mesh: &SimplicialMesh<T>, mut w: W) -> std::io::Result<()> {
    let dim = mesh.dim();
    writeln!(w, "{} {} {}", dim, mesh.n_nodes(), mesh.n_cells())?;
    for p in mesh.coords() {
        let parts: Vec<String> = p[..dim].iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", parts.join(" "))?;
    }
    let nt = if dim == 2 { 3 } else { 6 };
    for k in 0..mesh.n_cells() {
        let mut parts: Vec<String> = mesh.cell(k).iter().map(|i| i.to_string()).collect();
        let cd = mesh.cell_data(k);
        parts.extend(cd.d.comps[..nt].iter().map(|x| x.to_string()));
        parts.extend(cd.t.comps[..nt].iter().map(|x| x.to_string()));
        parts.push(cd.tissue.code().to_string());
        parts.push(cd.irc.to_string());
        writeln!(w, "{}", parts.join(" "))?;
    }
    Ok(())
}
