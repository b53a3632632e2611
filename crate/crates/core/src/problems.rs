//! Parametrized least-squares problems as affine families of assembled forms.
//!
//! The thermal blocks discretize the first-order Poisson system
//! `κ^{-1/2} q + κ^{1/2} ∇u = κ^{-1/2} q_ℓ`, `div q = 0` with the lifting
//! `q_ℓ = (0, -1)`, `u = 0` on the top side and `q·n = 0` elsewhere.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fem::interval::IntervalSpace;
use crate::fem::{
    apply_essential_bc, assemble_forms, assemble_rhs_weighted, form_value, prolongation, rhs_value, x_norm_gram,
    CellFields, Coefficient, EssentialBc, FeSpace, FormTerm, Region, RhsTerm,
};
use crate::mesh::{interval_mesh, refine_times, unit_square_mesh, BoundaryTag, TriMesh};
use crate::sparse::CsrMatrix;

pub const LIFTING: [f64; 2] = [0.0, -1.0];

/// Uniform refinements from the primal mesh to the error-space mesh. With the
/// same elements, fewer than three leave the full-order indicator above one
/// somewhere on the thermal-block parameter boxes.
pub const DEFAULT_Z_DEPTH: usize = 3;

/// Parameter-dependent coefficient of one affine component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Theta {
    One,
    Linear(usize),
    Inverse(usize),
    InvSqrt(usize),
}

impl Theta {
    pub fn eval(&self, mu: &[f64]) -> f64 {
        match *self {
            Theta::One => 1.0,
            Theta::Linear(i) => mu[i],
            Theta::Inverse(i) => 1.0 / mu[i],
            Theta::InvSqrt(i) => 1.0 / mu[i].sqrt(),
        }
    }
}

pub fn eval_thetas(thetas: &[Theta], mu: &[f64]) -> Vec<f64> {
    thetas.iter().map(|t| t.eval(mu)).collect()
}

/// Closed box of admissible parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self { lower: vec![lo; dim], upper: vec![hi; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.dim()
            && mu.iter().zip(self.lower.iter().zip(&self.upper)).all(|(m, (l, u))| {
                let tol = 1e-12 * u.abs().max(1.0);
                *m >= l - tol && *m <= u + tol
            })
    }

    pub fn check(&self, mu: &[f64]) -> Result<()> {
        if self.contains(mu) {
            Ok(())
        } else {
            Err(Error::OutOfBox(mu.to_vec()))
        }
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|bits| (0..d).map(|i| if bits >> i & 1 == 1 { self.upper[i] } else { self.lower[i] }).collect())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct AffineOperator {
    pub thetas: Vec<Theta>,
    pub matrices: Vec<CsrMatrix>,
}

impl AffineOperator {
    pub fn q(&self) -> usize {
        self.thetas.len()
    }

    pub fn eval(&self, mu: &[f64]) -> CsrMatrix {
        let th = eval_thetas(&self.thetas, mu);
        let terms: Vec<(f64, &CsrMatrix)> = th.iter().copied().zip(&self.matrices).collect();
        CsrMatrix::linear_combination(&terms).expect("affine components share dimensions")
    }

    /// Component-wise product `A_k P`.
    pub fn times(&self, p: &CsrMatrix) -> Result<Self> {
        if let Some(a) = self.matrices.first() {
            if a.ncols() != p.nrows() {
                return invalid("operator and prolongation shapes differ");
            }
        }
        let matrices = self.matrices.iter().map(|a| a.matmul(p)).collect();
        Ok(Self { thetas: self.thetas.clone(), matrices })
    }
}

#[derive(Clone, Debug)]
pub struct AffineRhs {
    pub thetas: Vec<Theta>,
    pub vectors: Vec<Vec<f64>>,
}

impl AffineRhs {
    pub fn q(&self) -> usize {
        self.thetas.len()
    }

    pub fn eval(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.vectors.first().map_or(0, Vec::len)];
        for (t, v) in self.thetas.iter().zip(&self.vectors) {
            let s = t.eval(mu);
            for (o, x) in out.iter_mut().zip(v) {
                *o += s * x;
            }
        }
        out
    }
}

/// `‖f_μ‖²_Y = ψ(μ)ᵀ G ψ(μ)` where `f_μ = Σ ψ_j(μ) f_j` and `G` is the Y-Gram
/// of the source components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceNorm {
    pub psi: Vec<Theta>,
    pub gram: Vec<Vec<f64>>,
}

impl SourceNorm {
    pub fn norm_sq(&self, mu: &[f64]) -> f64 {
        let p = eval_thetas(&self.psi, mu);
        let mut s = 0.0;
        for i in 0..p.len() {
            for j in 0..p.len() {
                s += p[i] * self.gram[i][j] * p[j];
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    Thermal1,
    Thermal3,
    Poisson1d,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Thermal1 => "thermal1",
            ProblemKind::Thermal3 => "thermal3",
            ProblemKind::Poisson1d => "poisson1d",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "thermal1" => Ok(ProblemKind::Thermal1),
            "thermal3" => Ok(ProblemKind::Thermal3),
            "poisson1d" => Ok(ProblemKind::Poisson1d),
            _ => invalid(format!("unknown problem '{name}' (expected thermal1, thermal3 or poisson1d)")),
        }
    }

    pub fn param_box(&self) -> ParamBox {
        match self {
            ProblemKind::Thermal1 => ParamBox::cube(1, 0.1, 10.0),
            ProblemKind::Thermal3 => ParamBox::cube(3, 0.2, 5.0),
            ProblemKind::Poisson1d => ParamBox::cube(1, 1.0, 1.0),
        }
    }

    /// Subdomain tag of a point; tags below the parameter count carry
    /// `κ = μ_tag`, the last tag has `κ = 1`.
    pub fn subdomain(&self, x: [f64; 2]) -> usize {
        match self {
            ProblemKind::Thermal1 => usize::from(x[0] >= 0.5),
            ProblemKind::Thermal3 => match (x[0] < 0.5, x[1] < 0.5) {
                (true, true) => 0,
                (false, true) => 1,
                (true, false) => 2,
                (false, false) => 3,
            },
            ProblemKind::Poisson1d => 0,
        }
    }

    /// Conductivity evaluated from coordinates alone.
    pub fn kappa(&self, mu: &[f64], x: [f64; 2]) -> f64 {
        let tag = self.subdomain(x);
        if tag < mu.len() && *self != ProblemKind::Poisson1d {
            mu[tag]
        } else {
            1.0
        }
    }

    fn n_params(&self) -> usize {
        self.param_box().dim()
    }
}

/// One discrete space of a problem: its X-norm Gram and constrained DOFs.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub gram: CsrMatrix,
    pub essential: Vec<usize>,
    /// Present for the 2D problems.
    pub space: Option<FeSpace>,
}

impl Discretization {
    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        let mut fixed = vec![false; self.dim()];
        for &i in &self.essential {
            fixed[i] = true;
        }
        (0..self.dim()).filter(|&i| !fixed[i]).collect()
    }

    /// Affine sum with essential rows/columns eliminated.
    pub fn system(&self, op: &AffineOperator, rhs: &[f64], mu: &[f64]) -> (CsrMatrix, Vec<f64>) {
        apply_essential_bc(&op.eval(mu), rhs, &self.essential)
    }
}

#[derive(Clone, Debug)]
pub struct ProblemDef {
    pub kind: ProblemKind,
    /// Cells per side (intervals for the 1D problem).
    pub n: usize,
    /// Uniform refinements from X to Z.
    pub z_depth: usize,
    pub params: ParamBox,
    pub x: Discretization,
    pub z: Discretization,
    /// Z coefficients of X functions.
    pub prolong: CsrMatrix,
    pub op_x: AffineOperator,
    pub op_z: AffineOperator,
    /// `A_k^{ZX} = A_k^{ZZ} P`.
    pub op_zx: AffineOperator,
    pub rhs_x: AffineRhs,
    pub rhs_z: AffineRhs,
    pub source: SourceNorm,
    /// Term description of the affine components, when fields can be sampled.
    pub terms: Option<AffineTerms>,
}

impl ProblemDef {
    pub fn build(kind: ProblemKind, n: usize, z_depth: usize) -> Result<Self> {
        match kind {
            ProblemKind::Poisson1d => poisson_1d_mesh(n),
            _ => thermal_block(kind, n, z_depth),
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn q_a(&self) -> usize {
        self.op_x.q()
    }

    pub fn q_f(&self) -> usize {
        self.rhs_x.q()
    }

    pub fn x_mesh(&self) -> Option<&Arc<TriMesh>> {
        self.x.space.as_ref().map(FeSpace::mesh)
    }
}

pub fn thermal_block_1p(n: usize) -> Result<ProblemDef> {
    thermal_block(ProblemKind::Thermal1, n, DEFAULT_Z_DEPTH)
}

pub fn thermal_block_3p(n: usize) -> Result<ProblemDef> {
    thermal_block(ProblemKind::Thermal3, n, DEFAULT_Z_DEPTH)
}

pub fn poisson_1d() -> Result<ProblemDef> {
    poisson_1d_mesh(64)
}

pub fn thermal_bc() -> EssentialBc {
    EssentialBc {
        scalar: vec![BoundaryTag::Top],
        flux: vec![BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Left],
    }
}

/// Forms and sources of each affine component, kept alongside the
/// assembled matrices so reduced quantities can be evaluated by quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineTerms {
    pub forms: Vec<Vec<(FormTerm, Region)>>,
    pub sources: Vec<Vec<(RhsTerm, Region)>>,
}

impl AffineTerms {
    /// `a_k(v, w)` for every component `k`.
    pub fn form_values(&self, space: &FeSpace, v: &CellFields, w: &CellFields) -> Vec<f64> {
        self.forms.iter().map(|t| form_value(space, t, v, w)).collect()
    }

    /// `F_k(v)` for every component `k`.
    pub fn source_values(&self, space: &FeSpace, v: &CellFields) -> Vec<f64> {
        self.sources.iter().map(|t| rhs_value(space, t, v)).collect()
    }
}

/// Affine split of a thermal block.
///
/// Per parametrized subdomain `i`: `μ_i⁻¹ (q,q)_{Ω_i}` and `μ_i (∇u,∇u)_{Ω_i}`;
/// everything with a unit coefficient is grouped under `θ = 1`.
pub fn thermal_terms(kind: ProblemKind) -> (Vec<Theta>, Vec<Theta>, AffineTerms) {
    let p = kind.n_params();
    let mut thetas = Vec::new();
    let mut forms = Vec::new();
    let mut f_thetas = Vec::new();
    let mut sources = Vec::new();
    for i in 0..p {
        let region = Region::Subdomains(vec![i]);
        thetas.push(Theta::Inverse(i));
        forms.push(vec![(FormTerm::FluxFlux, region.clone())]);
        thetas.push(Theta::Linear(i));
        forms.push(vec![(FormTerm::GradGrad, region.clone())]);
        f_thetas.push(Theta::Inverse(i));
        sources.push(vec![(RhsTerm::Flux(LIFTING), region)]);
    }
    let rest = Region::Subdomains(vec![p]);
    thetas.push(Theta::One);
    forms.push(vec![
        (FormTerm::FluxFlux, rest.clone()),
        (FormTerm::GradGrad, rest.clone()),
        (FormTerm::FluxGrad, Region::All),
        (FormTerm::DivDiv, Region::All),
    ]);
    f_thetas.push(Theta::One);
    sources.push(vec![(RhsTerm::Flux(LIFTING), rest), (RhsTerm::Grad(LIFTING), Region::All)]);
    (thetas, f_thetas, AffineTerms { forms, sources })
}

/// Affine operator and right-hand side of a thermal block on `space`.
pub fn thermal_family(kind: ProblemKind, space: &FeSpace) -> (AffineOperator, AffineRhs) {
    let (thetas, f_thetas, terms) = thermal_terms(kind);
    let one: Coefficient = &|_| 1.0;
    let mut matrices: Vec<CsrMatrix> = Vec::new();
    for comp in &terms.forms {
        let mut m: Option<CsrMatrix> = None;
        for (term, region) in comp {
            let a = assemble_forms(space, &[(*term, one)], region);
            m = Some(match m {
                Some(acc) => acc.add_scaled(&a, 1.0),
                None => a,
            });
        }
        matrices.push(m.expect("nonempty component"));
    }
    let mut vectors = Vec::new();
    for comp in &terms.sources {
        let mut f = vec![0.0; space.dim()];
        for (term, region) in comp {
            for (a, b) in f.iter_mut().zip(assemble_rhs_weighted(space, &[(*term, one)], region)) {
                *a += b;
            }
        }
        vectors.push(f);
    }

    // Give every component the union pattern so sums keep a fixed structure.
    let mut pattern = matrices[0].scaled(0.0);
    for m in &matrices[1..] {
        pattern = pattern.add_scaled(m, 0.0);
    }
    let matrices = matrices.into_iter().map(|m| pattern.add_scaled(&m, 1.0)).collect();
    (AffineOperator { thetas, matrices }, AffineRhs { thetas: f_thetas, vectors })
}

fn thermal_source_norm(kind: ProblemKind, mesh: &TriMesh) -> SourceNorm {
    let p = kind.n_params();
    let lift_sq = LIFTING[0] * LIFTING[0] + LIFTING[1] * LIFTING[1];
    let mut area = vec![0.0; p + 1];
    for c in 0..mesh.n_cells() {
        area[mesh.subdomain(c)] += mesh.area(c);
    }
    let mut psi: Vec<Theta> = (0..p).map(Theta::InvSqrt).collect();
    psi.push(Theta::One);
    let gram = (0..=p)
        .map(|i| (0..=p).map(|j| if i == j { area[i] * lift_sq } else { 0.0 }).collect())
        .collect();
    SourceNorm { psi, gram }
}

fn thermal_block(kind: ProblemKind, n: usize, z_depth: usize) -> Result<ProblemDef> {
    if kind == ProblemKind::Poisson1d {
        return invalid("poisson1d is not a thermal block");
    }
    let mesh = Arc::new(unit_square_mesh(n, |x| kind.subdomain(x))?);
    let bc = thermal_bc();
    let xs = FeSpace::new(mesh.clone(), &bc);
    let (zmesh, parent) = refine_times(&mesh, z_depth)?;
    let zs = FeSpace::new(Arc::new(zmesh), &bc);
    let prolong = prolongation(&xs, &zs, &parent)?;
    let (op_x, rhs_x) = thermal_family(kind, &xs);
    let (op_z, rhs_z) = thermal_family(kind, &zs);
    let op_zx = op_z.times(&prolong)?;
    let source = thermal_source_norm(kind, &mesh);
    let (_, _, terms) = thermal_terms(kind);
    Ok(ProblemDef {
        kind,
        n,
        z_depth,
        params: kind.param_box(),
        x: Discretization { gram: x_norm_gram(&xs), essential: xs.essential_dofs().to_vec(), space: Some(xs) },
        z: Discretization { gram: x_norm_gram(&zs), essential: zs.essential_dofs().to_vec(), space: Some(zs) },
        prolong,
        op_x,
        op_z,
        op_zx,
        rhs_x,
        rhs_z,
        source,
        terms: Some(terms),
    })
}

/// Coercivity constant of the continuous 1D first-order operator,
/// `1 − (1 + √(1+4π²)) / (2(1+π²))`.
pub fn poisson_1d_alpha() -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    1.0 - (1.0 + (1.0 + 4.0 * pi2).sqrt()) / (2.0 * (1.0 + pi2))
}

/// Right-hand side data `f = (0, 1)` of the 1D first-order system.
pub const POISSON_1D_SOURCE: [f64; 2] = [0.0, 1.0];

/// Parameter-free 1D problem `L(q,u) = (q + u', q')`, `u(0) = u(1) = 0`,
/// on `n` uniform intervals. The error space coincides with the primal space.
pub fn poisson_1d_mesh(n: usize) -> Result<ProblemDef> {
    let space = IntervalSpace::new(interval_mesh(n)?);
    let gram = space.x_norm_gram();
    let essential = space.essential_dofs();
    let op = AffineOperator { thetas: vec![Theta::One], matrices: vec![space.ls_operator()] };
    let rhs = AffineRhs { thetas: vec![Theta::One], vectors: vec![space.rhs(POISSON_1D_SOURCE)] };
    let f = POISSON_1D_SOURCE;
    let source = SourceNorm { psi: vec![Theta::One], gram: vec![vec![f[0] * f[0] + f[1] * f[1]]] };
    let disc = Discretization { gram: gram.clone(), essential, space: None };
    let prolong = CsrMatrix::identity(gram.nrows());
    Ok(ProblemDef {
        kind: ProblemKind::Poisson1d,
        n,
        z_depth: 0,
        params: ProblemKind::Poisson1d.param_box(),
        x: disc.clone(),
        z: disc,
        prolong,
        op_zx: op.clone(),
        op_x: op.clone(),
        op_z: op,
        rhs_x: rhs.clone(),
        rhs_z: rhs,
        source,
        terms: None,
    })
}

/// Which discrete space of a problem to work on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    X,
    Z,
}

/// Assembles `a(·,·;μ)` and `F(·;μ)` with `κ(x)` evaluated at every
/// quadrature point, bypassing the affine split. No boundary elimination.
pub fn direct_assemble(problem: &ProblemDef, mu: &[f64], level: Level) -> Result<(CsrMatrix, Vec<f64>)> {
    problem.params.check(mu)?;
    let disc = match level {
        Level::X => &problem.x,
        Level::Z => &problem.z,
    };
    let Some(space) = disc.space.as_ref() else {
        // The 1D problem has no parameter dependence.
        return Ok((problem.op_x.matrices[0].clone(), problem.rhs_x.vectors[0].clone()));
    };
    let kind = problem.kind;
    let inv = |x: [f64; 2]| 1.0 / kind.kappa(mu, x);
    let lin = |x: [f64; 2]| kind.kappa(mu, x);
    let one = |_: [f64; 2]| 1.0;
    let a = assemble_forms(
        space,
        &[(FormTerm::FluxFlux, &inv), (FormTerm::FluxGrad, &one), (FormTerm::GradGrad, &lin), (FormTerm::DivDiv, &one)],
        &Region::All,
    );
    let b = assemble_rhs_weighted(space, &[(RhsTerm::Flux(LIFTING), &inv), (RhsTerm::Grad(LIFTING), &one)], &Region::All);
    Ok((a, b))
}

/// `‖f_μ − L_μ v‖²_Y` by quadrature of the pointwise residual
/// `(κ^{-1/2}(q_ℓ − q) − κ^{1/2}∇u, −div q)`.
pub fn ls_residual_sq(problem: &ProblemDef, mu: &[f64], level: Level, v: &[f64]) -> Result<f64> {
    let disc = match level {
        Level::X => &problem.x,
        Level::Z => &problem.z,
    };
    let Some(space) = disc.space.as_ref() else {
        return invalid("pointwise residual is only available for the 2D problems");
    };
    let mesh = space.mesh();
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let [a, b, d] = mesh.cell_coords(c);
        let grad = space.eval_grad(v, c);
        let div = space.eval_div(v, c);
        let w = mesh.area(c) / 3.0;
        for l in [[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]] {
            let x = [l[0] * a[0] + l[1] * b[0] + l[2] * d[0], l[0] * a[1] + l[1] * b[1] + l[2] * d[1]];
            let k = problem.kind.kappa(mu, x);
            let q = space.eval_flux(v, c, x);
            let r0 = (LIFTING[0] - q[0]) / k.sqrt() - k.sqrt() * grad[0];
            let r1 = (LIFTING[1] - q[1]) / k.sqrt() - k.sqrt() * grad[1];
            total += w * (r0 * r0 + r1 * r1 + div * div);
        }
    }
    Ok(total)
}

/// Deterministic training set: log-spaced for one parameter, Latin
/// hypercube plus the box vertices for several.
pub fn sample_training_set(problem: &ProblemDef, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count < 2 && problem.kind != ProblemKind::Poisson1d {
        return invalid("training set needs at least 2 points");
    }
    let b = &problem.params;
    Ok(match problem.kind {
        ProblemKind::Poisson1d => vec![b.lower.clone()],
        ProblemKind::Thermal1 => log_grid(b.lower[0], b.upper[0], count).into_iter().map(|m| vec![m]).collect(),
        ProblemKind::Thermal3 => {
            let mut pts = latin_hypercube(b, count, seed);
            pts.extend(b.vertices());
            pts
        }
    })
}

/// Random test parameters: log-uniform in one dimension, Latin hypercube otherwise.
pub fn sample_test_set(problem: &ProblemDef, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let b = &problem.params;
    match problem.kind {
        ProblemKind::Poisson1d => vec![b.lower.clone(); count],
        ProblemKind::Thermal1 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (l, u) = (b.lower[0].ln(), b.upper[0].ln());
            (0..count).map(|_| vec![(l + (u - l) * rng.random::<f64>()).exp().clamp(b.lower[0], b.upper[0])]).collect()
        }
        ProblemKind::Thermal3 => latin_hypercube(b, count, seed),
    }
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
    out[0] = lo;
    out[count - 1] = hi;
    out
}

pub fn latin_hypercube(b: &ParamBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = b.dim();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        columns.push(
            strata
                .into_iter()
                .map(|s| {
                    let t = (s as f64 + rng.random::<f64>()) / count as f64;
                    b.lower[k] + (b.upper[k] - b.lower[k]) * t
                })
                .collect(),
        );
    }
    (0..count).map(|i| (0..d).map(|k| columns[k][i]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 10.0, 3);
        assert_eq!(g[0], 0.1);
        assert!((g[1] - 1.0).abs() < 1e-15);
        assert_eq!(g[2], 10.0);
    }

    #[test]
    fn box_vertices() {
        let b = ParamBox::cube(3, 0.2, 5.0);
        let v = b.vertices();
        assert_eq!(v.len(), 8);
        assert!(v.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn source_norm_at_two() {
        let p = thermal_block_1p(4).unwrap();
        assert!((p.source.norm_sq(&[2.0]) - 0.75).abs() < 1e-14);
    }
}
