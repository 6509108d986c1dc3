use crate::scalar::Real;

/// Symmetric 3x3 tensor stored as its independent components, in the mesh
/// file order `xx xy yy xz yz zz`. In 2-D only `xx xy yy` are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor<T> {
    pub comps: [T; 6],
}

impl<T: Real> SymTensor<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            comps: [o, z, o, z, z, o],
        }
    }

    pub fn zero() -> Self {
        Self {
            comps: [T::zero(); 6],
        }
    }

    pub fn from_components_2d(xx: T, xy: T, yy: T) -> Self {
        let z = T::zero();
        Self {
            comps: [xx, xy, yy, z, z, T::one()],
        }
    }

    pub fn from_components_3d(xx: T, xy: T, yy: T, xz: T, yz: T, zz: T) -> Self {
        Self {
            comps: [xx, xy, yy, xz, yz, zz],
        }
    }

    /// Builds a tensor from a full matrix; fails if it is not symmetric.
    pub fn from_matrix(m: [[T; 3]; 3]) -> Result<Self, String> {
        let scale = m
            .iter()
            .flatten()
            .fold(T::one(), |a, x| a.max(x.abs()));
        let tol = T::lit(1e-12) * scale;
        for r in 0..3 {
            for c in r + 1..3 {
                if (m[r][c] - m[c][r]).abs() > tol {
                    return Err(format!("entry ({r},{c}) differs from ({c},{r})"));
                }
            }
        }
        Ok(Self::from_components_3d(
            m[0][0], m[0][1], m[1][1], m[0][2], m[1][2], m[2][2],
        ))
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        let [xx, xy, yy, xz, yz, zz] = self.comps;
        [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut comps = self.comps;
        for c in &mut comps {
            *c *= s;
        }
        Self { comps }
    }

    pub fn apply(&self, v: &[T; 3]) -> [T; 3] {
        let m = self.matrix();
        let mut out = [T::zero(); 3];
        for r in 0..3 {
            out[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
        }
        out
    }

    /// `a . (M b)` restricted to the first `dim` components.
    pub fn bilinear(&self, a: &[T; 3], b: &[T; 3], dim: usize) -> T {
        let m = self.matrix();
        let mut s = T::zero();
        for r in 0..dim {
            for c in 0..dim {
                s += a[r] * m[r][c] * b[c];
            }
        }
        s
    }

    /// Smallest eigenvalue of the leading `dim x dim` block.
    pub fn min_eigenvalue(&self, dim: usize) -> T {
        let m = self.matrix();
        if dim == 2 {
            let half = T::lit(0.5);
            let mean = (m[0][0] + m[1][1]) * half;
            let diff = (m[0][0] - m[1][1]) * half;
            mean - (diff * diff + m[0][1] * m[0][1]).sqrt()
        } else {
            symmetric3_eigenvalues(&m)[0]
        }
    }

    pub(crate) fn check_psd(&self, dim: usize) -> Result<(), String> {
        if self.comps.iter().any(|c| !c.is_finite()) {
            return Err("non-finite component".into());
        }
        let lmin = self.min_eigenvalue(dim);
        if lmin < -T::lit(1e-12) {
            return Err(format!("indefinite (smallest eigenvalue {lmin:e})"));
        }
        Ok(())
    }
}

/// Eigenvalues of a symmetric 3x3 matrix in ascending order (trigonometric
/// closed form).
fn symmetric3_eigenvalues<T: Real>(m: &[[T; 3]; 3]) -> [T; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let three = T::lit(3.0);
    let q = (m[0][0] + m[1][1] + m[2][2]) / three;
    if p1 <= T::epsilon() * (q * q).max(T::min_positive_value()) {
        let mut e = [m[0][0], m[1][1], m[2][2]];
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return e;
    }
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + T::lit(2.0) * p1;
    let p = (p2 / T::lit(6.0)).sqrt();
    let mut b = [[T::zero(); 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let id = if r == c { q } else { T::zero() };
            b[r][c] = (m[r][c] - id) / p;
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / T::lit(2.0)).max(-T::one()).min(T::one());
    let phi = r.acos() / three;
    let two_pi_3 = T::lit(2.0 * std::f64::consts::PI / 3.0);
    let e_max = q + T::lit(2.0) * p * phi.cos();
    let e_min = q + T::lit(2.0) * p * (phi + two_pi_3).cos();
    let e_mid = three * q - e_max - e_min;
    [e_min, e_mid, e_max]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal_and_rotated() {
        let t = SymTensor::<f64>::from_components_3d(3.0, 0.0, 1.0, 0.0, 0.0, 2.0);
        assert!((t.min_eigenvalue(3) - 1.0).abs() < 1e-12);
        // [[2,1,0],[1,2,0],[0,0,5]] has eigenvalues 1, 3, 5.
        let t = SymTensor::<f64>::from_components_3d(2.0, 1.0, 2.0, 0.0, 0.0, 5.0);
        let e = symmetric3_eigenvalues(&t.matrix());
        for (a, b) in e.iter().zip([1.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nonsymmetric_matrix_is_rejected() {
        let m = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(SymTensor::<f64>::from_matrix(m).is_err());
    }

    #[test]
    fn psd_check_tolerates_roundoff() {
        let t = SymTensor::<f64>::from_components_2d(1.0, 1.0, 1.0 - 1e-13);
        assert!(t.check_psd(2).is_ok());
        let t = SymTensor::<f64>::from_components_2d(1.0, 1.0, 0.99);
        assert!(t.check_psd(2).is_err());
    }
}
