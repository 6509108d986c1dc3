use super::{CellData, MeshError, SimplicialMesh};
use crate::scalar::Real;

/// Uniform simplicial mesh of the box `[0, L_0] x ... x [0, L_{d-1}]`.
///
/// Squares are split along the `(0,0)-(1,1)` diagonal; cubes use the six-tet
/// Kuhn split, which is conforming across neighbouring cubes. All cells get
/// identity tensors, grey-matter labels and `irc = 1`.
pub fn box_mesh<T: Real>(lengths: &[T], divisions: &[usize]) -> Result<SimplicialMesh<T>, MeshError> {
    let dim = divisions.len();
    if (dim != 2 && dim != 3) || lengths.len() < dim {
        return Err(MeshError::Invalid("box mesh needs 2 or 3 axes".into()));
    }
    if divisions.iter().any(|&n| n == 0) || lengths[..dim].iter().any(|&l| !(l > T::zero())) {
        return Err(MeshError::Invalid("box mesh needs positive sizes".into()));
    }
    let np: Vec<usize> = divisions.iter().map(|n| n + 1).collect();
    let step: Vec<T> = (0..dim)
        .map(|a| lengths[a] / T::from_usize(divisions[a]).unwrap())
        .collect();
    let nz = if dim == 3 { np[2] } else { 1 };
    let index = |i: usize, j: usize, k: usize| i + np[0] * (j + np[1] * k);

    let mut coords = Vec::with_capacity(np.iter().product());
    for k in 0..nz {
        for j in 0..np[1] {
            for i in 0..np[0] {
                let z = if dim == 3 {
                    step[2] * T::from_usize(k).unwrap()
                } else {
                    T::zero()
                };
                coords.push([
                    step[0] * T::from_usize(i).unwrap(),
                    step[1] * T::from_usize(j).unwrap(),
                    z,
                ]);
            }
        }
    }

    let mut cells = Vec::new();
    if dim == 2 {
        for j in 0..divisions[1] {
            for i in 0..divisions[0] {
                let (a, b, c, d) = (
                    index(i, j, 0),
                    index(i + 1, j, 0),
                    index(i + 1, j + 1, 0),
                    index(i, j + 1, 0),
                );
                cells.extend_from_slice(&[a, b, c]);
                cells.extend_from_slice(&[a, c, d]);
            }
        }
    } else {
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for k in 0..divisions[2] {
            for j in 0..divisions[1] {
                for i in 0..divisions[0] {
                    for perm in PERMS {
                        let mut p = [i, j, k];
                        cells.push(index(p[0], p[1], p[2]));
                        for axis in perm {
                            p[axis] += 1;
                            cells.push(index(p[0], p[1], p[2]));
                        }
                    }
                }
            }
        }
    }
    let n_cells = cells.len() / (dim + 1);
    SimplicialMesh::new(dim, coords, cells, vec![CellData::default(); n_cells])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_box_measure_and_hmin() {
        let m = box_mesh::<f64>(&[20.0, 10.0], &[40, 20]).unwrap();
        assert_eq!(m.n_nodes(), 41 * 21);
        assert_eq!(m.n_cells(), 2 * 40 * 20);
        assert!((m.domain_measure() - 200.0).abs() < 1e-10);
        assert!((m.h_min() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cube_box_is_conforming() {
        let m = box_mesh::<f64>(&[1.0, 2.0, 3.0], &[2, 2, 3]).unwrap();
        assert!((m.domain_measure() - 6.0).abs() < 1e-12);
        // Every interior face is shared by exactly two tetrahedra.
        let mut faces = std::collections::HashMap::new();
        for cell in m.cells() {
            for skip in 0..4 {
                let mut f: Vec<usize> = (0..4).filter(|&a| a != skip).map(|a| cell[a]).collect();
                f.sort_unstable();
                *faces.entry(f).or_insert(0) += 1;
            }
        }
        assert!(faces.values().all(|&c| c == 1 || c == 2));
        let boundary = faces.values().filter(|&&c| c == 1).count();
        // 2 triangles per boundary square: 2*(2*2 + 2*3 + 2*3) squares.
        assert_eq!(boundary, 2 * 2 * (4 + 6 + 6));
    }
}
