//! Lowest-order Raviart–Thomas × continuous P1 discretization on triangles.
//!
//! Product-space DOF vectors hold the flux coefficients (one per edge, the
//! normal flux through the edge in its global orientation) followed by the
//! scalar coefficients (one per vertex).

pub mod interval;

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::mesh::{BoundaryTag, TriMesh};
use crate::sparse::{norm2, CsrMatrix, SparseCholesky};

/// Barycentric coordinates of the 3-point degree-2 rule; all weights are |T|/3.
const QUAD_BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Boundary parts carrying homogeneous essential conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct EssentialBc {
    /// Scalar fixed to zero on these sides.
    pub scalar: Vec<BoundaryTag>,
    /// Normal flux fixed to zero on these sides.
    pub flux: Vec<BoundaryTag>,
}

impl EssentialBc {
    pub fn none() -> Self {
        Self { scalar: Vec::new(), flux: Vec::new() }
    }
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<TriMesh>,
    essential: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<TriMesh>, bc: &EssentialBc) -> Self {
        let ne = mesh.n_edges();
        let mut fixed = vec![false; ne + mesh.n_vertices()];
        for e in 0..ne {
            if let Some(tag) = mesh.boundary_tag(e) {
                if bc.flux.contains(&tag) {
                    fixed[e] = true;
                }
                if bc.scalar.contains(&tag) {
                    for v in mesh.edges()[e] {
                        fixed[ne + v] = true;
                    }
                }
            }
        }
        let essential = (0..fixed.len()).filter(|&i| fixed[i]).collect();
        Self { mesh, essential }
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn n_flux(&self) -> usize {
        self.mesh.n_edges()
    }

    pub fn n_scalar(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn dim(&self) -> usize {
        self.n_flux() + self.n_scalar()
    }

    /// Sorted constrained DOFs (prescribed value zero).
    pub fn essential_dofs(&self) -> &[usize] {
        &self.essential
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        let mut fixed = vec![false; self.dim()];
        for &i in &self.essential {
            fixed[i] = true;
        }
        (0..self.dim()).filter(|&i| !fixed[i]).collect()
    }

    /// Global DOFs of cell `c`: three signed edge DOFs, then three vertex DOFs.
    pub fn cell_dofs(&self, c: usize) -> ([(usize, f64); 3], [usize; 3]) {
        let ne = self.n_flux();
        (*self.mesh.cell_edges(c), self.mesh.cells()[c].map(|v| ne + v))
    }

    fn element(&self, c: usize) -> Element {
        Element::new(&self.mesh, c)
    }

    pub fn eval_flux(&self, coeffs: &[f64], c: usize, x: [f64; 2]) -> [f64; 2] {
        let el = self.element(c);
        let mut q = [0.0; 2];
        for i in 0..3 {
            let (e, _) = el.edges[i];
            let phi = el.rt(i, x);
            q[0] += coeffs[e] * phi[0];
            q[1] += coeffs[e] * phi[1];
        }
        q
    }

    pub fn eval_div(&self, coeffs: &[f64], c: usize) -> f64 {
        let el = self.element(c);
        (0..3).map(|i| coeffs[el.edges[i].0] * el.div[i]).sum()
    }

    pub fn eval_scalar(&self, coeffs: &[f64], c: usize, x: [f64; 2]) -> f64 {
        let lam = self.mesh.barycentric(c, x);
        let ne = self.n_flux();
        let cell = self.mesh.cells()[c];
        (0..3).map(|i| coeffs[ne + cell[i]] * lam[i]).sum()
    }

    pub fn eval_grad(&self, coeffs: &[f64], c: usize) -> [f64; 2] {
        let el = self.element(c);
        let ne = self.n_flux();
        let cell = self.mesh.cells()[c];
        let mut g = [0.0; 2];
        for i in 0..3 {
            g[0] += coeffs[ne + cell[i]] * el.grad[i][0];
            g[1] += coeffs[ne + cell[i]] * el.grad[i][1];
        }
        g
    }

    /// Canonical interpolant: edge fluxes by 2-point Gauss (exact for linear
    /// fields), scalar by nodal values.
    pub fn interpolate(&self, flux: impl Fn([f64; 2]) -> [f64; 2], scalar: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut out = vec![0.0; self.dim()];
        let g = 0.5 / 3f64.sqrt();
        for e in 0..mesh.n_edges() {
            let [p, q] = mesh.edges()[e];
            let (a, b) = (mesh.vertices()[p], mesh.vertices()[q]);
            let n = mesh.edge_normal(e);
            let len = mesh.edge_length(e);
            let mut s = 0.0;
            for t in [0.5 - g, 0.5 + g] {
                let f = flux([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                s += 0.5 * len * (f[0] * n[0] + f[1] * n[1]);
            }
            out[e] = s;
        }
        let ne = self.n_flux();
        for (v, x) in mesh.vertices().iter().enumerate() {
            out[ne + v] = scalar(*x);
        }
        out
    }
}

/// Geometry and basis data of one cell.
struct Element {
    area: f64,
    coords: [[f64; 2]; 3],
    edges: [(usize, f64); 3],
    /// Signed divergence of each RT0 basis function.
    div: [f64; 3],
    /// Gradients of the barycentric coordinates.
    grad: [[f64; 2]; 3],
}

impl Element {
    fn new(mesh: &TriMesh, c: usize) -> Self {
        let coords = mesh.cell_coords(c);
        let area = mesh.area(c);
        let edges = *mesh.cell_edges(c);
        let div = [0, 1, 2].map(|i| edges[i].1 / area);
        let grad = [0, 1, 2].map(|i| {
            let a = coords[(i + 1) % 3];
            let b = coords[(i + 2) % 3];
            [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
        });
        Self { area, coords, edges, div, grad }
    }

    /// RT0 basis function of local edge `i` (opposite vertex `i`), signed.
    fn rt(&self, i: usize, x: [f64; 2]) -> [f64; 2] {
        let s = self.edges[i].1 / (2.0 * self.area);
        let xi = self.coords[i];
        [s * (x[0] - xi[0]), s * (x[1] - xi[1])]
    }

    fn quad_points(&self) -> [[f64; 2]; 3] {
        QUAD_BARY.map(|l| {
            let c = &self.coords;
            [
                l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
                l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
            ]
        })
    }
}

/// Parameter-independent bilinear forms. `FluxGrad` is the symmetric pair
/// (q, ∇w) + (r, ∇u).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormTerm {
    FluxFlux,
    FluxGrad,
    GradGrad,
    DivDiv,
    ScalarMass,
}

/// Linear forms against a constant vector field `g`: (g, r) or (g, ∇w).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhsTerm {
    Flux([f64; 2]),
    Grad([f64; 2]),
}

/// Cell filter by subdomain tag.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    All,
    Subdomains(Vec<usize>),
}

impl Region {
    pub fn contains(&self, tag: usize) -> bool {
        match self {
            Region::All => true,
            Region::Subdomains(tags) => tags.contains(&tag),
        }
    }
}

/// Coefficient evaluated at quadrature points.
pub type Coefficient<'a> = &'a (dyn Fn([f64; 2]) -> f64 + Sync);

pub fn assemble_form(space: &FeSpace, term: FormTerm, region: &Region) -> CsrMatrix {
    assemble_forms(space, &[(term, &|_| 1.0)], region)
}

/// Sum of weighted forms, with each weight evaluated inside the quadrature.
pub fn assemble_forms(space: &FeSpace, terms: &[(FormTerm, Coefficient)], region: &Region) -> CsrMatrix {
    let mesh = space.mesh();
    let mut triplets = Vec::with_capacity(36 * mesh.n_cells());
    for c in 0..mesh.n_cells() {
        if !region.contains(mesh.subdomain(c)) {
            continue;
        }
        let el = space.element(c);
        let (edofs, vdofs) = space.cell_dofs(c);
        let dofs = [edofs[0].0, edofs[1].0, edofs[2].0, vdofs[0], vdofs[1], vdofs[2]];
        let mut local = [[0.0; 6]; 6];
        let w = el.area / 3.0;
        for (qp, x) in el.quad_points().iter().enumerate() {
            let lam = QUAD_BARY[qp];
            let phi = [0, 1, 2].map(|i| el.rt(i, *x));
            for &(term, coef) in terms {
                let k = w * coef(*x);
                if k == 0.0 {
                    continue;
                }
                for i in 0..3 {
                    for j in 0..3 {
                        match term {
                            FormTerm::FluxFlux => local[i][j] += k * dot2(phi[i], phi[j]),
                            FormTerm::DivDiv => local[i][j] += k * el.div[i] * el.div[j],
                            FormTerm::GradGrad => local[3 + i][3 + j] += k * dot2(el.grad[i], el.grad[j]),
                            FormTerm::ScalarMass => local[3 + i][3 + j] += k * lam[i] * lam[j],
                            FormTerm::FluxGrad => {
                                let v = k * dot2(phi[i], el.grad[j]);
                                local[i][3 + j] += v;
                                local[3 + j][i] += v;
                            }
                        }
                    }
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                if local[i][j] != 0.0 {
                    triplets.push((dofs[i], dofs[j], local[i][j]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(space.dim(), space.dim(), &triplets)
}

pub fn assemble_rhs(space: &FeSpace, term: RhsTerm, region: &Region) -> Vec<f64> {
    assemble_rhs_weighted(space, &[(term, &|_| 1.0)], region)
}

pub fn assemble_rhs_weighted(space: &FeSpace, terms: &[(RhsTerm, Coefficient)], region: &Region) -> Vec<f64> {
    let mesh = space.mesh();
    let mut b = vec![0.0; space.dim()];
    for c in 0..mesh.n_cells() {
        if !region.contains(mesh.subdomain(c)) {
            continue;
        }
        let el = space.element(c);
        let (edofs, vdofs) = space.cell_dofs(c);
        let w = el.area / 3.0;
        for x in el.quad_points() {
            for &(term, coef) in terms {
                let k = w * coef(x);
                for i in 0..3 {
                    match term {
                        RhsTerm::Flux(g) => b[edofs[i].0] += k * dot2(g, el.rt(i, x)),
                        RhsTerm::Grad(g) => b[vdofs[i]] += k * dot2(g, el.grad[i]),
                    }
                }
            }
        }
    }
    b
}

/// Cellwise values of one discrete function at the assembly quadrature
/// points: flux and potential per point, gradient and divergence per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFields {
    pub flux: Vec<[[f64; 2]; 3]>,
    pub scalar: Vec<[f64; 3]>,
    pub grad: Vec<[f64; 2]>,
    pub div: Vec<f64>,
}

impl FeSpace {
    pub fn cell_fields(&self, coeffs: &[f64]) -> CellFields {
        let mesh = self.mesh();
        let ne = self.n_flux();
        let n = mesh.n_cells();
        let mut out = CellFields { flux: Vec::with_capacity(n), scalar: Vec::with_capacity(n), grad: Vec::with_capacity(n), div: Vec::with_capacity(n) };
        for c in 0..n {
            let el = self.element(c);
            let cell = mesh.cells()[c];
            let qp = el.quad_points();
            out.flux.push(qp.map(|x| {
                let mut q = [0.0; 2];
                for i in 0..3 {
                    let phi = el.rt(i, x);
                    q[0] += coeffs[el.edges[i].0] * phi[0];
                    q[1] += coeffs[el.edges[i].0] * phi[1];
                }
                q
            }));
            out.scalar.push(QUAD_BARY.map(|l| (0..3).map(|i| coeffs[ne + cell[i]] * l[i]).sum()));
            let mut g = [0.0; 2];
            for i in 0..3 {
                g[0] += coeffs[ne + cell[i]] * el.grad[i][0];
                g[1] += coeffs[ne + cell[i]] * el.grad[i][1];
            }
            out.grad.push(g);
            out.div.push((0..3).map(|i| coeffs[el.edges[i].0] * el.div[i]).sum());
        }
        out
    }
}

/// Value of `Σ terms(v, w)` by quadrature of the fields. Equal to `wᵀ A v`
/// for the matrix from [`assemble_forms`], without the cancellation of the
/// global sum: entries of `A` grow like `h⁻²` while the form stays bounded.
pub fn form_value(space: &FeSpace, terms: &[(FormTerm, Region)], v: &CellFields, w: &CellFields) -> f64 {
    let mesh = space.mesh();
    let mut total = CompensatedSum::default();
    for c in 0..mesh.n_cells() {
        let tag = mesh.subdomain(c);
        let wq = mesh.area(c) / 3.0;
        for (term, region) in terms {
            if !region.contains(tag) {
                continue;
            }
            let s = match term {
                FormTerm::FluxFlux => (0..3).map(|q| dot2(v.flux[c][q], w.flux[c][q])).sum::<f64>(),
                FormTerm::FluxGrad => (0..3).map(|q| dot2(v.flux[c][q], w.grad[c]) + dot2(w.flux[c][q], v.grad[c])).sum(),
                FormTerm::GradGrad => 3.0 * dot2(v.grad[c], w.grad[c]),
                FormTerm::DivDiv => 3.0 * v.div[c] * w.div[c],
                FormTerm::ScalarMass => (0..3).map(|q| v.scalar[c][q] * w.scalar[c][q]).sum(),
            };
            total.add(wq * s);
        }
    }
    total.value()
}

/// Value of `Σ terms(v)` by quadrature, the counterpart of [`assemble_rhs_weighted`]
/// with unit weights.
pub fn rhs_value(space: &FeSpace, terms: &[(RhsTerm, Region)], v: &CellFields) -> f64 {
    let mesh = space.mesh();
    let mut total = CompensatedSum::default();
    for c in 0..mesh.n_cells() {
        let tag = mesh.subdomain(c);
        let wq = mesh.area(c) / 3.0;
        for (term, region) in terms {
            if !region.contains(tag) {
                continue;
            }
            let s = match term {
                RhsTerm::Flux(g) => (0..3).map(|q| dot2(*g, v.flux[c][q])).sum::<f64>(),
                RhsTerm::Grad(g) => 3.0 * dot2(*g, v.grad[c]),
            };
            total.add(wq * s);
        }
    }
    total.value()
}

/// Neumaier summation; the cell sums above run over up to 10⁵ terms.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.err += if self.sum.abs() >= x.abs() { (self.sum - t) + x } else { (x - t) + self.sum };
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// Gram matrix of the H(div) × H¹ product norm.
pub fn x_norm_gram(space: &FeSpace) -> CsrMatrix {
    let one: Coefficient = &|_| 1.0;
    assemble_forms(
        space,
        &[
            (FormTerm::FluxFlux, one),
            (FormTerm::DivDiv, one),
            (FormTerm::ScalarMass, one),
            (FormTerm::GradGrad, one),
        ],
        &Region::All,
    )
}

/// Symmetric elimination of homogeneous essential DOFs: constrained rows
/// and columns are zeroed, their diagonal set to one and their right-hand
/// side entries to zero.
pub fn apply_essential_bc(a: &CsrMatrix, b: &[f64], essential: &[usize]) -> (CsrMatrix, Vec<f64>) {
    if essential.is_empty() {
        return (a.clone(), b.to_vec());
    }
    let mut fixed = vec![false; a.nrows()];
    for &i in essential {
        fixed[i] = true;
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        if fixed[i] {
            triplets.push((i, i, 1.0));
            continue;
        }
        for (j, v) in a.row(i) {
            if !fixed[j] {
                triplets.push((i, j, v));
            }
        }
    }
    let mut rhs = b.to_vec();
    for &i in essential {
        rhs[i] = 0.0;
    }
    (CsrMatrix::from_triplets(a.nrows(), a.ncols(), &triplets), rhs)
}

/// Matrix mapping coarse coefficients to the coefficients of the same
/// function on a nested fine mesh. `parent[f]` is the coarse cell containing
/// fine cell `f`.
pub fn prolongation(coarse: &FeSpace, fine: &FeSpace, parent: &[usize]) -> Result<CsrMatrix> {
    let cm = coarse.mesh();
    let fm = fine.mesh();
    if parent.len() != fm.n_cells() {
        return invalid("parent map length differs from fine cell count");
    }
    for (f, &p) in parent.iter().enumerate() {
        if p >= cm.n_cells() {
            return invalid(format!("parent of fine cell {f} out of range"));
        }
        for x in fm.cell_coords(f) {
            if cm.barycentric(p, x).iter().any(|&l| l < -1e-10) {
                return invalid(format!("fine cell {f} is not contained in coarse cell {p}"));
            }
        }
    }

    let cne = coarse.n_flux();
    let fne = fine.n_flux();
    let mut triplets = Vec::new();

    // Flux: normal flux of the coarse field through each fine edge; the coarse
    // field is linear on the parent so the midpoint rule is exact.
    for e in 0..fm.n_edges() {
        let fc = fm.edge_cells(e)[0].expect("every edge has a cell");
        let p = parent[fc];
        let el = coarse.element(p);
        let mid = fm.edge_midpoint(e);
        let n = fm.edge_normal(e);
        let len = fm.edge_length(e);
        for i in 0..3 {
            let v = len * dot2(el.rt(i, mid), n);
            if v != 0.0 {
                triplets.push((e, el.edges[i].0, v));
            }
        }
    }

    // Scalar: nodal interpolation of the coarse P1 function.
    let mut done = vec![false; fm.n_vertices()];
    for f in 0..fm.n_cells() {
        let p = parent[f];
        let ccell = cm.cells()[p];
        for v in fm.cells()[f] {
            if done[v] {
                continue;
            }
            done[v] = true;
            let lam = cm.barycentric(p, fm.vertices()[v]);
            for i in 0..3 {
                if lam[i].abs() > 1e-14 {
                    triplets.push((fne + v, cne + ccell[i], lam[i]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(fine.dim(), coarse.dim(), &triplets))
}

/// Sparse Cholesky solve with a relative residual check.
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let chol = SparseCholesky::factor(a)?;
    solve_with(&chol, a, b)
}

/// Solve with an existing factorization, refining until the relative
/// residual is at most 1e-10.
pub fn solve_with(chol: &SparseCholesky, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let bn = norm2(b);
    let mut x = chol.solve(b);
    if bn == 0.0 {
        return Ok(x);
    }
    for _ in 0..3 {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if norm2(&r) <= 1e-10 * bn {
            return Ok(x);
        }
        let dx = chol.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
    let ax = a.matvec(&x);
    let res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
    if res <= 1e-10 * bn {
        Ok(x)
    } else {
        Err(Error::NoConvergence { what: "linear solve residual refinement", iterations: 3 })
    }
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
