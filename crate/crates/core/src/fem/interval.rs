//! Continuous P1 × P1 on an interval for the first-order system
//! `(q + u', q')` with `u(0) = u(1) = 0`.

use crate::mesh::IntervalMesh;
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct IntervalSpace {
    mesh: IntervalMesh,
}

impl IntervalSpace {
    pub fn new(mesh: IntervalMesh) -> Self {
        Self { mesh }
    }

    pub fn mesh(&self) -> &IntervalMesh {
        &self.mesh
    }

    fn n_nodes(&self) -> usize {
        self.mesh.nodes().len()
    }

    /// Flux nodal values first, then the scalar ones.
    pub fn dim(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn essential_dofs(&self) -> Vec<usize> {
        let n = self.n_nodes();
        vec![n, 2 * n - 1]
    }

    /// Integrates a symmetric local form over every interval. `local` receives
    /// the basis values and derivatives (q_a, q_b, u_a, u_b) at a Gauss point
    /// and returns the 4×4 integrand.
    fn assemble(&self, local: impl Fn(&[f64; 4], &[f64; 4]) -> [[f64; 4]; 4]) -> CsrMatrix {
        let nodes = self.mesh.nodes();
        let n = self.n_nodes();
        let g = 0.5 / 3f64.sqrt();
        let mut t = Vec::new();
        for k in 0..n - 1 {
            let h = nodes[k + 1] - nodes[k];
            let dofs = [k, k + 1, n + k, n + k + 1];
            let mut m = [[0.0; 4]; 4];
            for s in [0.5 - g, 0.5 + g] {
                let val = [1.0 - s, s, 1.0 - s, s];
                let der = [-1.0 / h, 1.0 / h, -1.0 / h, 1.0 / h];
                let l = local(&val, &der);
                for i in 0..4 {
                    for j in 0..4 {
                        m[i][j] += 0.5 * h * l[i][j];
                    }
                }
            }
            for i in 0..4 {
                for j in 0..4 {
                    t.push((dofs[i], dofs[j], m[i][j]));
                }
            }
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), &t)
    }

    /// `∫ (q + u')(r + w') + q' r'`.
    pub fn ls_operator(&self) -> CsrMatrix {
        self.assemble(|val, der| {
            // First component of L applied to each local basis function.
            let l1 = [val[0], val[1], der[2], der[3]];
            let l2 = [der[0], der[1], 0.0, 0.0];
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = l1[i] * l1[j] + l2[i] * l2[j];
                }
            }
            m
        })
    }

    /// Gram matrix of the H¹ × H¹ norm.
    pub fn x_norm_gram(&self) -> CsrMatrix {
        self.assemble(|val, der| {
            let mut m = [[0.0; 4]; 4];
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)] {
                m[i][j] = val[i] * val[j] + der[i] * der[j];
            }
            m
        })
    }

    /// `∫ f0 (r + w') + f1 r'` for constant data `f = (f0, f1)`.
    pub fn rhs(&self, f: [f64; 2]) -> Vec<f64> {
        let nodes = self.mesh.nodes();
        let n = self.n_nodes();
        let mut b = vec![0.0; self.dim()];
        for k in 0..n - 1 {
            let h = nodes[k + 1] - nodes[k];
            b[k] += f[0] * 0.5 * h - f[1];
            b[k + 1] += f[0] * 0.5 * h + f[1];
            b[n + k] -= f[0];
            b[n + k + 1] += f[0];
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::interval_mesh;

    #[test]
    fn gram_of_constant_flux() {
        let s = IntervalSpace::new(interval_mesh(8).unwrap());
        let g = s.x_norm_gram();
        let mut v = vec![0.0; s.dim()];
        v[..9].fill(1.0);
        assert!((g.quad_form(&v, &v) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn operator_is_symmetric() {
        let s = IntervalSpace::new(interval_mesh(6).unwrap());
        assert!(s.ls_operator().asymmetry() < 1e-14);
    }
}
