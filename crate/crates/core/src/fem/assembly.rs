//! Lumped mass and weighted stiffness assembly for P1 elements.

use super::sparse::CsrMatrix;
use super::FemError;
use crate::mesh::{SimplicialMesh, TensorKind};
use crate::scalar::Real;

/// Mesh-derived data reused by every assembly: lumped weights, the nodal
/// sparsity pattern, and per-cell local stiffness blocks for each tensor.
#[derive(Debug, Clone)]
pub struct FemSpace<T> {
    n_nodes: usize,
    nv: usize,
    cells: Vec<usize>,
    weights: Vec<T>,
    /// `|K| / (dim + 1)` per cell.
    vertex_share: Vec<T>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Position in `col_idx` of local entry `(a, b)` of every cell.
    slots: Vec<usize>,
    local_identity: Vec<T>,
    local_diffusion: Vec<T>,
    local_preferential: Vec<T>,
}

impl<T: Real> FemSpace<T> {
    pub fn new(mesh: &SimplicialMesh<T>) -> Self {
        let n = mesh.n_nodes();
        let nv = mesh.verts_per_cell();
        let dim = mesh.dim();
        let inv_nv = T::one() / T::from_usize(nv).unwrap();

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let mut row: Vec<usize> = mesh.neighbors(i).to_vec();
            row.push(i);
            row.sort_unstable();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }

        let mut weights = vec![T::zero(); n];
        let mut vertex_share = Vec::with_capacity(mesh.n_cells());
        let mut cells = Vec::with_capacity(mesh.n_cells() * nv);
        let mut slots = Vec::with_capacity(mesh.n_cells() * nv * nv);
        let mut locals = [Vec::new(), Vec::new(), Vec::new()];
        let kinds = [TensorKind::Identity, TensorKind::Diffusion, TensorKind::Preferential];
        for k in 0..mesh.n_cells() {
            let verts = mesh.cell(k);
            let geo = mesh.cell_geometry(k);
            let share = geo.measure * inv_nv;
            vertex_share.push(share);
            cells.extend_from_slice(verts);
            for &i in verts {
                weights[i] += share;
            }
            for &i in verts {
                let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                for &j in verts {
                    slots.push(row_ptr[i] + row.binary_search(&j).expect("vertex pair in pattern"));
                }
            }
            for (kind, local) in kinds.iter().zip(locals.iter_mut()) {
                let m = mesh.cell_tensor(k, *kind);
                for a in 0..nv {
                    for b in 0..nv {
                        local.push(geo.measure * m.bilinear(&geo.grads[a], &geo.grads[b], dim));
                    }
                }
            }
        }
        let [local_identity, local_diffusion, local_preferential] = locals;
        Self {
            n_nodes: n,
            nv,
            cells,
            weights,
            vertex_share,
            row_ptr,
            col_idx,
            slots,
            local_identity,
            local_diffusion,
            local_preferential,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_cells(&self) -> usize {
        self.vertex_share.len()
    }

    /// Lumped mass weights `(1, chi_j)`.
    pub fn lumped_mass(&self) -> &[T] {
        &self.weights
    }

    pub fn pattern(&self) -> (&[usize], &[usize]) {
        (&self.row_ptr, &self.col_idx)
    }

    /// Zero matrix on the nodal sparsity pattern.
    pub fn zero_matrix(&self) -> CsrMatrix<T> {
        CsrMatrix::with_pattern(self.n_nodes, self.n_nodes, self.row_ptr.clone(), self.col_idx.clone())
    }

    fn local(&self, kind: TensorKind) -> &[T] {
        match kind {
            TensorKind::Identity => &self.local_identity,
            TensorKind::Diffusion => &self.local_diffusion,
            TensorKind::Preferential => &self.local_preferential,
        }
    }

    /// Stiffness `sum_K cbar_K s_K |K| (M_K grad phi_j) . grad phi_i`, where
    /// `cbar_K` is the vertex mean of `nodal_coeff` and `s_K` an optional
    /// per-cell factor. Both default to 1.
    pub fn stiffness(
        &self,
        kind: TensorKind,
        nodal_coeff: Option<&[T]>,
        cell_scale: Option<&[T]>,
    ) -> Result<CsrMatrix<T>, FemError> {
        if let Some(c) = nodal_coeff {
            check_len(c.len(), self.n_nodes)?;
            for (i, &v) in c.iter().enumerate() {
                if !v.is_finite() {
                    return Err(FemError::NonFinite);
                }
                if v < T::zero() {
                    return Err(FemError::NegativeCoefficient {
                        index: i,
                        value: v.to_f64_lossy(),
                    });
                }
            }
        }
        if let Some(s) = cell_scale {
            check_len(s.len(), self.n_cells())?;
            for (k, &v) in s.iter().enumerate() {
                if !(v >= T::zero()) {
                    return Err(FemError::NegativeCoefficient {
                        index: k,
                        value: v.to_f64_lossy(),
                    });
                }
            }
        }
        let mut a = self.zero_matrix();
        let local = self.local(kind);
        let nv = self.nv;
        let inv_nv = T::one() / T::from_usize(nv).unwrap();
        let block = nv * nv;
        let vals = a.values_mut();
        for k in 0..self.n_cells() {
            let mut factor = match nodal_coeff {
                Some(c) => self.cells[k * nv..(k + 1) * nv].iter().map(|&i| c[i]).sum::<T>() * inv_nv,
                None => T::one(),
            };
            if let Some(s) = cell_scale {
                factor *= s[k];
            }
            if factor == T::zero() {
                continue;
            }
            let slots = &self.slots[k * block..(k + 1) * block];
            let loc = &local[k * block..(k + 1) * block];
            for (&p, &v) in slots.iter().zip(loc) {
                vals[p] += factor * v;
            }
        }
        Ok(a)
    }

    /// Nodal values of a piecewise-constant cell field through the lumped
    /// weights: `sum_{K ∋ j} |K|/(dim+1) f_K / w_j`.
    pub fn nodal_average(&self, cell_values: &[T]) -> Result<Vec<T>, FemError> {
        check_len(cell_values.len(), self.n_cells())?;
        let mut out = vec![T::zero(); self.n_nodes];
        let nv = self.nv;
        for (k, &f) in cell_values.iter().enumerate() {
            let s = self.vertex_share[k] * f;
            for &i in &self.cells[k * nv..(k + 1) * nv] {
                out[i] += s;
            }
        }
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= *w;
        }
        Ok(out)
    }
}

fn check_len(got: usize, expected: usize) -> Result<(), FemError> {
    if got != expected {
        return Err(FemError::Length { expected, got });
    }
    Ok(())
}

/// Symmetric-pattern sparse operator together with the lumped mass it is
/// paired with in the scheme.
#[derive(Debug, Clone)]
pub struct SparseOperator<T> {
    pub matrix: CsrMatrix<T>,
    pub lumped_mass: Vec<T>,
}

impl<T: Real> SparseOperator<T> {
    pub fn n(&self) -> usize {
        self.lumped_mass.len()
    }
}

/// Lumped mass weights: each cell contributes `|K| / (dim + 1)` to its vertices.
pub fn lumped_mass<T: Real>(mesh: &SimplicialMesh<T>) -> Vec<T> {
    let nv = T::from_usize(mesh.verts_per_cell()).unwrap();
    let mut w = vec![T::zero(); mesh.n_nodes()];
    for k in 0..mesh.n_cells() {
        let share = mesh.cell_geometry(k).measure / nv;
        for &i in mesh.cell(k) {
            w[i] += share;
        }
    }
    w
}

/// Lumped scalar product `sum_j w_j f_j g_j`.
pub fn lumped_inner<T: Real>(f: &[T], g: &[T], weights: &[T]) -> Result<T, FemError> {
    check_len(f.len(), weights.len())?;
    check_len(g.len(), weights.len())?;
    Ok(f.iter().zip(g).zip(weights).map(|((a, b), w)| *w * *a * *b).sum())
}

/// Assembles the stiffness of the selected tensor, weighted by the cell mean
/// of `nodal_coeff` when given.
pub fn assemble_stiffness<T: Real>(
    mesh: &SimplicialMesh<T>,
    kind: TensorKind,
    nodal_coeff: Option<&[T]>,
) -> Result<SparseOperator<T>, FemError> {
    let space = FemSpace::new(mesh);
    let matrix = space.stiffness(kind, nodal_coeff, None)?;
    Ok(SparseOperator {
        matrix,
        lumped_mass: space.weights,
    })
}
