//! Immutable simplicial meshes (triangles in 2-D, tetrahedra in 3-D).
//!
//! A mesh carries node coordinates in millimetres, cell connectivity, and
//! piecewise-constant cell data: the water-diffusion tensor `D`, the tensor of
//! preferential directions `T`, a tissue label and the value of the resection
//! indicator. Per-cell P1 geometry (measure and basis gradients) is computed
//! once at construction.

mod io;
mod structured;
mod tensor;

pub use io::{load_mesh, parse_mesh, write_mesh};
pub use structured::box_mesh;
pub use tensor::SymTensor;

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("geometry error in cell {cell}: {msg}")]
    Geometry { cell: usize, msg: String },
    #[error("tensor error in cell {cell}: {msg}")]
    Tensor { cell: usize, msg: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Brain tissue label of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tissue {
    Csf = 0,
    Gm = 1,
    Wm = 2,
}

impl Tissue {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Tissue::Csf),
            1 => Some(Tissue::Gm),
            2 => Some(Tissue::Wm),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Selects which per-cell tensor an operator is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    /// Unit tensor (isotropic Laplacian).
    Identity,
    /// Water-diffusion tensor `D`.
    Diffusion,
    /// Tensor of preferential directions `T`.
    Preferential,
}

/// Measure and constant P1 basis gradients of one simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry<T> {
    pub measure: T,
    /// Gradients of the `dim + 1` barycentric coordinates; unused slots are zero.
    pub grads: [[T; 3]; 4],
}

/// Per-cell data used to build a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellData<T> {
    pub d: SymTensor<T>,
    pub t: SymTensor<T>,
    pub tissue: Tissue,
    pub irc: T,
}

impl<T: Real> Default for CellData<T> {
    fn default() -> Self {
        Self {
            d: SymTensor::identity(),
            t: SymTensor::identity(),
            tissue: Tissue::Gm,
            irc: T::one(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialMesh<T> {
    dim: usize,
    coords: Vec<[T; 3]>,
    cells: Vec<usize>,
    data: Vec<CellData<T>>,
    geometry: Vec<CellGeometry<T>>,
    neighbors: Vec<Vec<usize>>,
    node_cells: Vec<Vec<usize>>,
    h_min: T,
}

impl<T: Real> SimplicialMesh<T> {
    /// Builds a mesh and checks every invariant.
    ///
    /// `coords` always holds three components; for `dim == 2` the third one is
    /// ignored. `cells` is a flat list with `dim + 1` node indices per cell.
    pub fn new(
        dim: usize,
        coords: Vec<[T; 3]>,
        cells: Vec<usize>,
        data: Vec<CellData<T>>,
    ) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::Invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        let nv = dim + 1;
        if cells.len() % nv != 0 {
            return Err(MeshError::Invalid("connectivity length is not a multiple of dim+1".into()));
        }
        let n_cells = cells.len() / nv;
        if n_cells == 0 {
            return Err(MeshError::Invalid("mesh has no cells".into()));
        }
        if data.len() != n_cells {
            return Err(MeshError::Invalid(format!(
                "{} cell records for {} cells",
                data.len(),
                n_cells
            )));
        }
        let n_nodes = coords.len();
        let mut coords = coords;
        if dim == 2 {
            for p in &mut coords {
                p[2] = T::zero();
            }
        }

        let mut geometry = Vec::with_capacity(n_cells);
        let mut h_min = T::infinity();
        for (k, verts) in cells.chunks(nv).enumerate() {
            for (a, &i) in verts.iter().enumerate() {
                if i >= n_nodes {
                    return Err(MeshError::Geometry {
                        cell: k,
                        msg: format!("node index {i} out of range ({n_nodes} nodes)"),
                    });
                }
                if verts[..a].contains(&i) {
                    return Err(MeshError::Geometry {
                        cell: k,
                        msg: format!("node {i} repeated"),
                    });
                }
            }
            let geo = simplex_geometry(dim, verts, &coords).ok_or_else(|| MeshError::Geometry {
                cell: k,
                msg: "cell has zero measure".into(),
            })?;
            geometry.push(geo);
            for a in 0..nv {
                for b in a + 1..nv {
                    h_min = h_min.min(distance(&coords[verts[a]], &coords[verts[b]]));
                }
            }
            let cd = &data[k];
            for (name, tensor) in [("D", &cd.d), ("T", &cd.t)] {
                tensor.check_psd(dim).map_err(|msg| MeshError::Tensor {
                    cell: k,
                    msg: format!("{name}: {msg}"),
                })?;
            }
            if !(cd.irc >= T::zero() && cd.irc <= T::one()) {
                return Err(MeshError::Invalid(format!("cell {k}: irc outside [0,1]")));
            }
        }
        if !(h_min > T::zero()) {
            return Err(MeshError::Invalid("shortest edge is not positive".into()));
        }

        let mut node_cells = vec![Vec::new(); n_nodes];
        for (k, verts) in cells.chunks(nv).enumerate() {
            for &i in verts {
                node_cells[i].push(k);
            }
        }
        let mut neighbors = vec![Vec::new(); n_nodes];
        for verts in cells.chunks(nv) {
            for &i in verts {
                for &j in verts {
                    if i != j {
                        neighbors[i].push(j);
                    }
                }
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }

        Ok(Self {
            dim,
            coords,
            cells,
            data,
            geometry,
            neighbors,
            node_cells,
            h_min,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_cells(&self) -> usize {
        self.data.len()
    }

    /// Number of vertices per cell.
    pub fn verts_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn node(&self, i: usize) -> &[T; 3] {
        &self.coords[i]
    }

    pub fn coords(&self) -> &[[T; 3]] {
        &self.coords
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[k * nv..(k + 1) * nv]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    pub fn cell_data(&self, k: usize) -> &CellData<T> {
        &self.data[k]
    }

    pub fn cell_tensor(&self, k: usize, kind: TensorKind) -> SymTensor<T> {
        match kind {
            TensorKind::Identity => SymTensor::identity(),
            TensorKind::Diffusion => self.data[k].d,
            TensorKind::Preferential => self.data[k].t,
        }
    }

    pub fn cell_geometry(&self, k: usize) -> &CellGeometry<T> {
        &self.geometry[k]
    }

    /// Mesh neighbours of node `i` (excluding `i` itself), sorted.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Cells incident to node `i`.
    pub fn node_cells(&self, i: usize) -> &[usize] {
        &self.node_cells[i]
    }

    /// Shortest edge length over all cells.
    pub fn h_min(&self) -> T {
        self.h_min
    }

    /// Sum of all cell measures.
    pub fn domain_measure(&self) -> T {
        self.geometry.iter().map(|g| g.measure).sum()
    }

    /// Barycentre of cell `k`.
    pub fn barycenter(&self, k: usize) -> [T; 3] {
        let verts = self.cell(k);
        let inv = T::one() / T::from_usize(verts.len()).unwrap();
        let mut c = [T::zero(); 3];
        for &i in verts {
            for (cd, x) in c.iter_mut().zip(self.coords[i]) {
                *cd += x * inv;
            }
        }
        c
    }

    /// Barycentric coordinates of `p` with respect to cell `k`.
    pub fn barycentric(&self, k: usize, p: &[T; 3]) -> [T; 4] {
        let verts = self.cell(k);
        let geo = &self.geometry[k];
        let x0 = &self.coords[verts[0]];
        let mut lam = [T::zero(); 4];
        for (a, l) in lam.iter_mut().enumerate().take(verts.len()) {
            let mut s = if a == 0 { T::one() } else { T::zero() };
            for c in 0..self.dim {
                s += geo.grads[a][c] * (p[c] - x0[c]);
            }
            *l = s;
        }
        lam
    }

    /// Returns a copy of the mesh with per-cell data replaced.
    pub fn with_cell_data(&self, data: Vec<CellData<T>>) -> Result<Self, MeshError> {
        Self::new(self.dim, self.coords.clone(), self.cells.clone(), data)
    }
}

fn distance<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    let mut s = T::zero();
    for c in 0..3 {
        let d = a[c] - b[c];
        s += d * d;
    }
    s.sqrt()
}

/// Measure and basis gradients of a simplex, or `None` when degenerate.
fn simplex_geometry<T: Real>(
    dim: usize,
    verts: &[usize],
    coords: &[[T; 3]],
) -> Option<CellGeometry<T>> {
    let x0 = coords[verts[0]];
    // Columns of the Jacobian are the edge vectors from vertex 0.
    let mut jac = [[T::zero(); 3]; 3];
    for a in 0..dim {
        let xa = coords[verts[a + 1]];
        for r in 0..dim {
            jac[r][a] = xa[r] - x0[r];
        }
    }
    let mut grads = [[T::zero(); 3]; 4];
    let (det, measure) = if dim == 2 {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        (det, det.abs() / T::lit(2.0))
    } else {
        let det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
            - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
            + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
        (det, det.abs() / T::lit(6.0))
    };
    let scale = (0..dim)
        .map(|a| (0..dim).map(|r| jac[r][a].abs()).fold(T::zero(), T::max))
        .fold(T::one(), |p, m| p * m);
    if !(det.abs() > T::epsilon() * T::lit(16.0) * scale) {
        return None;
    }
    // Rows of J^{-1} are the gradients of barycentric coordinates 1..=dim.
    let inv = if dim == 2 {
        let d = T::one() / det;
        [
            [jac[1][1] * d, -jac[0][1] * d, T::zero()],
            [-jac[1][0] * d, jac[0][0] * d, T::zero()],
            [T::zero(); 3],
        ]
    } else {
        let d = T::one() / det;
        let m = &jac;
        [
            [
                (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * d,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * d,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * d,
            ],
            [
                (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * d,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * d,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * d,
            ],
            [
                (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * d,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * d,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * d,
            ],
        ]
    };
    for a in 0..dim {
        grads[a + 1] = inv[a];
        for c in 0..3 {
            grads[0][c] -= inv[a][c];
        }
    }
    Some(CellGeometry { measure, grads })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_triangle() -> SimplicialMesh<f64> {
        SimplicialMesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 1, 2],
            vec![CellData::default()],
        )
        .unwrap()
    }

    #[test]
    fn reference_triangle_geometry() {
        let m = reference_triangle();
        let g = m.cell_geometry(0);
        assert!((g.measure - 0.5).abs() < 1e-15);
        let expected = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        for (a, e) in expected.iter().enumerate() {
            assert!((g.grads[a][0] - e[0]).abs() < 1e-14);
            assert!((g.grads[a][1] - e[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn translated_cell_has_same_geometry() {
        let shift = [3.5, -7.25, 0.0];
        let m = SimplicialMesh::new(
            2,
            vec![
                [shift[0], shift[1], 0.0],
                [1.0 + shift[0], shift[1], 0.0],
                [shift[0], 1.0 + shift[1], 0.0],
            ],
            vec![0, 1, 2],
            vec![CellData::default()],
        )
        .unwrap();
        let a = m.cell_geometry(0);
        let b = *reference_triangle().cell_geometry(0);
        assert!((a.measure - b.measure).abs() < 1e-12);
        for k in 0..3 {
            for c in 0..2 {
                assert!((a.grads[k][c] - b.grads[k][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tetrahedron_gradients_orthogonal_to_opposite_face() {
        let coords = vec![
            [0.1, 0.2, 0.0],
            [1.3, 0.1, 0.2],
            [0.2, 1.1, -0.1],
            [0.3, 0.4, 0.9],
        ];
        let m = SimplicialMesh::new(3, coords.clone(), vec![0, 1, 2, 3], vec![CellData::default()])
            .unwrap();
        let g = m.cell_geometry(0);
        for a in 0..4 {
            let others: Vec<usize> = (0..4).filter(|&b| b != a).collect();
            for w in others.windows(2) {
                let e: Vec<f64> = (0..3).map(|c| coords[w[1]][c] - coords[w[0]][c]).collect();
                let d: f64 = (0..3).map(|c| e[c] * g.grads[a][c]).sum();
                assert!(d.abs() < 1e-12);
            }
        }
        let s: Vec<f64> = (0..3).map(|c| (0..4).map(|a| g.grads[a][c]).sum()).collect();
        assert!(s.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn repeated_node_is_rejected() {
        let err = SimplicialMesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 1, 1],
            vec![CellData::default()],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::Geometry { .. }));
    }

    #[test]
    fn collinear_cell_is_rejected() {
        let err = SimplicialMesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![0, 1, 2],
            vec![CellData::default()],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::Geometry { .. }));
    }

    #[test]
    fn indefinite_tensor_is_rejected() {
        let data = CellData {
            d: SymTensor::from_components_2d(1.0, 2.0, 1.0),
            ..CellData::default()
        };
        let err = SimplicialMesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![0, 1, 2],
            vec![data],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::Tensor { .. }));
    }

    #[test]
    fn barycentric_of_vertices_is_unit() {
        let m = box_mesh::<f64>(&[2.0, 1.0, 1.5], &[2, 1, 2]).unwrap();
        for k in 0..m.n_cells() {
            for (a, &i) in m.cell(k).iter().enumerate() {
                let lam = m.barycentric(k, m.node(i));
                for (b, l) in lam.iter().enumerate().take(4) {
                    let e = if a == b { 1.0 } else { 0.0 };
                    assert!((l - e).abs() < 1e-12);
                }
            }
        }
    }
}
