//! Least-squares reduced basis: greedy offline construction of a primal
//! and an error basis, and an online stage whose cost depends only on the
//! basis sizes.

pub mod model;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

pub use model::{Basis, DenseBlock, RbModel, StopReason, TrainingStep, FORMAT_VERSION};

use crate::certify::{effectivity_ceiling, indicator, tight_bound, BoundInputs};
use crate::error::{invalid, Error, Result};
use crate::fem::{solve_with, CellFields, FeSpace};
use crate::problems::{AffineTerms, ProblemDef};
use crate::scm::{scm_offline, ScmModel};
use crate::sparse::{dot, CsrMatrix, SparseCholesky};
use model::{combine_blocks, combine_vectors};

/// Post-projection norm below this fraction of the input norm counts as
/// linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;
/// A bound below this fraction of the solution norm is treated as exact:
/// its indicator is round-off and carries no information.
const ROUNDOFF_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedSolution {
    pub c: Vec<f64>,
    pub c_hat: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub err_norm: f64,
    pub aux_res: f64,
    pub alpha_lb: f64,
    pub bound: f64,
    pub effectivity_ceiling: f64,
}

/// Everything the online stage computes, with or without a certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct OnlineOutput {
    pub solution: ReducedSolution,
    pub err_norm: f64,
    pub aux_res: f64,
    pub alpha_lb: f64,
    /// `‖u_N‖_X`
    pub solution_norm: f64,
    /// Magnitude of a negative `‖ρ‖²` that was clamped to zero.
    pub clamped: f64,
}

impl OnlineOutput {
    pub fn certificate(&self, delta: f64) -> Result<Certificate> {
        if !(self.alpha_lb > 0.0) {
            return Err(Error::CertificateUnavailable { alpha_lb: self.alpha_lb });
        }
        let inputs = BoundInputs { err_approx_norm: self.err_norm, aux_res_norm: self.aux_res, alpha: self.alpha_lb, res_norm: None };
        Ok(Certificate {
            err_norm: self.err_norm,
            aux_res: self.aux_res,
            alpha_lb: self.alpha_lb,
            bound: tight_bound(&inputs)?,
            effectivity_ceiling: effectivity_ceiling(delta).unwrap_or(f64::INFINITY),
        })
    }

    /// Reduced indicator `‖ρ‖/(√α_LB ‖ê‖)`, zero when the bound is at round-off level.
    pub fn indicator(&self) -> f64 {
        if !(self.alpha_lb > 0.0) {
            return f64::INFINITY;
        }
        let bound = self.err_norm + self.aux_res / self.alpha_lb.sqrt();
        if bound <= ROUNDOFF_TOL * self.solution_norm {
            return 0.0;
        }
        indicator(self.aux_res, self.alpha_lb, self.err_norm)
    }

    pub fn bound(&self) -> f64 {
        if self.alpha_lb > 0.0 {
            self.err_norm + self.aux_res / self.alpha_lb.sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Full-order solver reusing the symbolic factorizations across parameters.
pub struct FullOrderSolver<'a> {
    problem: &'a ProblemDef,
    chol_x: Option<SparseCholesky>,
    chol_z: Option<SparseCholesky>,
}

fn factor(slot: &mut Option<SparseCholesky>, a: &CsrMatrix) -> Result<()> {
    let f = match slot.as_ref() {
        Some(c) => c.refactor(a)?,
        None => SparseCholesky::factor(a)?,
    };
    *slot = Some(f);
    Ok(())
}

/// Snapshot pair and its full-order quantities.
pub struct Snapshot {
    pub u: Vec<f64>,
    pub e_hat: Vec<f64>,
    pub u_norm: f64,
    pub err_norm: f64,
    pub aux_res: f64,
}

impl<'a> FullOrderSolver<'a> {
    pub fn new(problem: &'a ProblemDef) -> Self {
        Self { problem, chol_x: None, chol_z: None }
    }

    pub fn solve(&mut self, mu: &[f64]) -> Result<Vec<f64>> {
        let p = self.problem;
        p.params.check(mu)?;
        let (a, b) = p.x.system(&p.op_x, &p.rhs_x.eval(mu), mu);
        factor(&mut self.chol_x, &a)?;
        solve_with(self.chol_x.as_ref().expect("factored"), &a, &b)
    }

    pub fn error_solve(&mut self, mu: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let p = self.problem;
        p.params.check(mu)?;
        if u.len() != p.x.dim() {
            return invalid("primal vector does not match the X dimension");
        }
        let rhs = error_rhs(p, mu, u);
        let (a, b) = p.z.system(&p.op_z, &rhs, mu);
        factor(&mut self.chol_z, &a)?;
        solve_with(self.chol_z.as_ref().expect("factored"), &a, &b)
    }

    pub fn snapshot(&mut self, mu: &[f64]) -> Result<Snapshot> {
        let u = self.solve(mu)?;
        let e_hat = self.error_solve(mu, &u)?;
        let p = self.problem;
        let rho_sq = full_order_aux_res_sq(p, mu, &u, &e_hat);
        Ok(Snapshot {
            u_norm: p.x.gram.quad_form(&u, &u).sqrt(),
            err_norm: p.z.gram.quad_form(&e_hat, &e_hat).max(0.0).sqrt(),
            aux_res: rho_sq.max(0.0).sqrt(),
            u,
            e_hat,
        })
    }
}

/// `F^Z(μ) − A^{ZX}(μ) u`
fn error_rhs(p: &ProblemDef, mu: &[f64], u: &[f64]) -> Vec<f64> {
    let mut rhs = p.rhs_z.eval(mu);
    let azx = p.op_zx.eval(mu).matvec(u);
    for (r, a) in rhs.iter_mut().zip(&azx) {
        *r -= a;
    }
    rhs
}

/// `‖f − L(u + ê)‖²_Y` for a Galerkin pair via
/// `‖f‖² − F(u) − [F(ê) − a(u, ê)]`.
pub fn full_order_aux_res_sq(p: &ProblemDef, mu: &[f64], u: &[f64], e_hat: &[f64]) -> f64 {
    p.source.norm_sq(mu) - dot(&p.rhs_x.eval(mu), u) - dot(&error_rhs(p, mu, u), e_hat)
}

/// `‖f − L v‖²_Y = ‖f‖² − 2F(v) + a(v,v)` for any `v` in Z.
pub fn residual_sq_z(p: &ProblemDef, mu: &[f64], v: &[f64]) -> f64 {
    p.source.norm_sq(mu) - 2.0 * dot(&p.rhs_z.eval(mu), v) + p.op_z.eval(mu).quad_form(v, v)
}

pub fn full_order_solve(problem: &ProblemDef, mu: &[f64]) -> Result<Vec<f64>> {
    FullOrderSolver::new(problem).solve(mu)
}

pub fn full_order_error_solve(problem: &ProblemDef, mu: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    FullOrderSolver::new(problem).error_solve(mu, u)
}

/// Modified Gram–Schmidt against a `gram`-orthonormal basis with one
/// re-orthogonalization pass, then normalization.
pub fn orthonormalize(candidate: &[f64], basis: &[Vec<f64>], gram: &CsrMatrix) -> Result<Vec<f64>> {
    if candidate.len() != gram.nrows() || basis.iter().any(|b| b.len() != gram.nrows()) {
        return invalid("vector lengths must match the Gram matrix");
    }
    let pre = gram.quad_form(candidate, candidate).max(0.0).sqrt();
    if !(pre > 0.0) {
        return Err(Error::NearDependent { ratio: 0.0 });
    }
    let mut v = candidate.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&gram.matvec(b), &v);
            crate::sparse::axpy(-c, b, &mut v);
        }
    }
    let post = gram.quad_form(&v, &v).max(0.0).sqrt();
    if post < DEPENDENCE_TOL * pre {
        return Err(Error::NearDependent { ratio: post / pre });
    }
    v.iter_mut().for_each(|x| *x /= post);
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineConfig {
    pub delta0: f64,
    pub n_max: usize,
    pub scm_epsilon: f64,
    /// Recorded in the model; the greedy itself is deterministic.
    pub seed: u64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self { delta0: 0.1, n_max: 30, scm_epsilon: 0.1, seed: 0 }
    }
}

/// Reduced data growing with the bases.
///
/// When the problem describes its affine terms, entries are integrals of
/// sampled fields rather than quadratic forms with the assembled matrices:
/// the online residual identity subtracts quantities of size `‖f‖²` to
/// obtain `‖ρ‖²`, so their round-off must stay near `ε‖f‖²`, and the
/// matrix form loses a factor of about `h⁻²` to cancellation.
struct Reduced {
    q_a: usize,
    a_xx: Vec<DenseBlock>,
    a_pp: Vec<DenseBlock>,
    a_px: Vec<DenseBlock>,
    f_x: Vec<Vec<f64>>,
    f_p: Vec<Vec<f64>>,
    /// ξ on X, Pξ on Z, φ on Z.
    fields: Option<(Vec<CellFields>, Vec<CellFields>, Vec<CellFields>)>,
}

fn grow(b: &DenseBlock, rows: usize, cols: usize) -> DenseBlock {
    DenseBlock::from_fn(rows, cols, |i, j| if i < b.rows && j < b.cols { b.get(i, j) } else { 0.0 })
}

fn spaces(p: &ProblemDef) -> Option<(&AffineTerms, &FeSpace, &FeSpace)> {
    Some((p.terms.as_ref()?, p.x.space.as_ref()?, p.z.space.as_ref()?))
}

impl Reduced {
    fn new(p: &ProblemDef) -> Self {
        let (q_a, q_f) = (p.q_a(), p.q_f());
        Self {
            q_a,
            a_xx: vec![DenseBlock::zeros(0, 0); q_a],
            a_pp: vec![DenseBlock::zeros(0, 0); q_a],
            a_px: vec![DenseBlock::zeros(0, 0); q_a],
            f_x: vec![Vec::new(); q_f],
            f_p: vec![Vec::new(); q_f],
            fields: spaces(p).map(|_| Default::default()),
        }
    }

    /// Extends the blocks by a new primal vector (already appended to `basis.xi`).
    fn add_primal(&mut self, p: &ProblemDef, basis: &Basis) {
        let xi = basis.xi.last().expect("new primal vector");
        let n = basis.xi.len();
        let np = basis.phi.len();
        // row i of the new column: a_k(ξ_new, ξ_i) and a_k(Pξ_new, φ_i), per k
        let (col_x, col_p, f): (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) = match (&mut self.fields, spaces(p)) {
            (Some((fx, fzx, fp)), Some((terms, xs, zs))) => {
                fx.push(xs.cell_fields(xi));
                fzx.push(zs.cell_fields(&p.prolong.matvec(xi)));
                let new_x = fx.last().unwrap();
                let new_z = fzx.last().unwrap();
                (
                    fx.iter().map(|w| terms.form_values(xs, new_x, w)).collect(),
                    fp.iter().map(|w| terms.form_values(zs, new_z, w)).collect(),
                    terms.source_values(xs, new_x),
                )
            }
            _ => {
                let ax: Vec<Vec<f64>> = p.op_x.matrices.iter().map(|a| a.matvec(xi)).collect();
                let azx: Vec<Vec<f64>> = p.op_zx.matrices.iter().map(|a| a.matvec(xi)).collect();
                (
                    basis.xi.iter().map(|x| ax.iter().map(|a| dot(x, a)).collect()).collect(),
                    basis.phi.iter().map(|y| azx.iter().map(|a| dot(y, a)).collect()).collect(),
                    p.rhs_x.vectors.iter().map(|f| dot(f, xi)).collect(),
                )
            }
        };
        for k in 0..self.q_a {
            let mut b = grow(&self.a_xx[k], n, n);
            for i in 0..n {
                b.data[i * n + n - 1] = col_x[i][k];
                b.data[(n - 1) * n + i] = col_x[i][k];
            }
            self.a_xx[k] = b;
            let mut c = grow(&self.a_px[k], np, n);
            for i in 0..np {
                c.data[i * n + n - 1] = col_p[i][k];
            }
            self.a_px[k] = c;
        }
        for (m, v) in f.into_iter().enumerate() {
            self.f_x[m].push(v);
        }
    }

    fn add_error(&mut self, p: &ProblemDef, basis: &Basis) {
        let phi = basis.phi.last().expect("new error vector");
        let n = basis.xi.len();
        let np = basis.phi.len();
        // a_k(φ_new, φ_i) and a_k(φ_new, Pξ_j), per k
        let (row_p, row_x, f): (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) = match (&mut self.fields, spaces(p)) {
            (Some((_, fzx, fp)), Some((terms, _, zs))) => {
                fp.push(zs.cell_fields(phi));
                let new = fp.last().unwrap();
                (
                    fp.iter().map(|w| terms.form_values(zs, new, w)).collect(),
                    fzx.iter().map(|w| terms.form_values(zs, new, w)).collect(),
                    terms.source_values(zs, new),
                )
            }
            _ => {
                let az: Vec<Vec<f64>> = p.op_z.matrices.iter().map(|a| a.matvec(phi)).collect();
                let azx_t: Vec<Vec<f64>> = p.op_zx.matrices.iter().map(|a| a.tr_matvec(phi)).collect();
                (
                    basis.phi.iter().map(|y| az.iter().map(|a| dot(y, a)).collect()).collect(),
                    basis.xi.iter().map(|x| azx_t.iter().map(|a| dot(x, a)).collect()).collect(),
                    p.rhs_z.vectors.iter().map(|f| dot(f, phi)).collect(),
                )
            }
        };
        for k in 0..self.q_a {
            let mut b = grow(&self.a_pp[k], np, np);
            for i in 0..np {
                b.data[i * np + np - 1] = row_p[i][k];
                b.data[(np - 1) * np + i] = row_p[i][k];
            }
            self.a_pp[k] = b;
            let mut c = grow(&self.a_px[k], np, n);
            for j in 0..n {
                c.data[(np - 1) * n + j] = row_x[j][k];
            }
            self.a_px[k] = c;
        }
        for (m, v) in f.into_iter().enumerate() {
            self.f_p[m].push(v);
        }
    }
}

/// Greedy construction of the reduced model over `train`.
pub fn greedy_offline(problem: &ProblemDef, train: &[Vec<f64>], cfg: &OfflineConfig) -> Result<(RbModel, Basis)> {
    if !(cfg.delta0 > 0.0 && cfg.delta0 < 1.0) {
        return invalid(format!("delta0 must lie in (0,1), got {}", cfg.delta0));
    }
    if cfg.n_max == 0 {
        return invalid("N_max must be at least 1");
    }
    if train.is_empty() {
        return invalid("training set is empty");
    }
    for mu in train {
        problem.params.check(mu)?;
    }
    let scm = scm_offline(problem, train, cfg.scm_epsilon)?;
    greedy_with_scm(problem, train, cfg, scm)
}

/// Greedy construction with a precomputed SCM model.
pub fn greedy_with_scm(problem: &ProblemDef, train: &[Vec<f64>], cfg: &OfflineConfig, scm: ScmModel) -> Result<(RbModel, Basis)> {
    let alpha_lb: Vec<f64> = train.par_iter().map(|mu| scm.alpha_lb(mu)).collect::<Result<_>>()?;

    let mut model = RbModel {
        version: FORMAT_VERSION,
        problem: problem.name().to_string(),
        mesh_n: problem.n,
        z_depth: problem.z_depth,
        x_dim: problem.x.dim(),
        z_dim: problem.z.dim(),
        params: problem.params.clone(),
        q_a: problem.q_a(),
        q_f: problem.q_f(),
        thetas_a: problem.op_x.thetas.clone(),
        thetas_f: problem.rhs_x.thetas.clone(),
        n: 0,
        n_error: 0,
        a_xx: Vec::new(),
        a_pp: Vec::new(),
        a_px: Vec::new(),
        f_x: Vec::new(),
        f_p: Vec::new(),
        source: problem.source.clone(),
        scm,
        delta0: cfg.delta0,
        delta_final: cfg.delta0,
        certified: false,
        stop_reason: StopReason::Converged,
        selected: Vec::new(),
        training_size: train.len(),
        seed: cfg.seed,
        log: Vec::new(),
    };
    let mut basis = Basis::default();
    let mut reduced = Reduced::new(problem);
    let mut solver = FullOrderSolver::new(problem);
    let mut used = vec![false; train.len()];
    let mut delta = cfg.delta0;
    let mut next = 0usize;

    for iteration in 1.. {
        let mu = train[next].clone();
        used[next] = true;
        let mut notes = Vec::new();

        let snap = solver.snapshot(&mu)?;
        let bound = snap.err_norm + snap.aux_res / alpha_lb[next].sqrt();
        let snapshot_indicator = if bound <= ROUNDOFF_TOL * snap.u_norm {
            notes.push("snapshot bound at round-off level; delta not updated".to_string());
            None
        } else {
            Some(indicator(snap.aux_res, alpha_lb[next], snap.err_norm))
        };
        let delta_updated = snapshot_indicator.is_some_and(|ind| ind > delta);
        if let Some(ind) = snapshot_indicator.filter(|_| delta_updated) {
            notes.push(format!("delta raised from {delta} to {ind}"));
            delta = ind;
        }

        match orthonormalize(&snap.u, &basis.xi, &problem.x.gram) {
            Ok(xi) => {
                basis.xi.push(xi);
                reduced.add_primal(problem, &basis);
                model.selected.push(mu.clone());
            }
            Err(Error::NearDependent { ratio }) => notes.push(format!("primal snapshot dependent (ratio {ratio:.3e}); parameter exhausted")),
            Err(e) => return Err(e),
        }
        match orthonormalize(&snap.e_hat, &basis.phi, &problem.z.gram) {
            Ok(phi) => {
                basis.phi.push(phi);
                reduced.add_error(problem, &basis);
            }
            Err(Error::NearDependent { ratio }) => notes.push(format!("error snapshot dependent (ratio {ratio:.3e}); not added")),
            Err(e) => return Err(e),
        }
        fill_blocks(&mut model, &reduced, &basis);

        let outputs: Vec<OnlineOutput> =
            train.par_iter().zip(&alpha_lb).map(|(m, &a)| online_output_with_alpha(&model, m, a)).collect::<Result<_>>()?;
        let inds: Vec<f64> = outputs.iter().map(OnlineOutput::indicator).collect();
        let max_indicator = inds.iter().copied().fold(0.0, f64::max);
        let max_indicator_unselected = inds.iter().zip(&used).filter(|(_, u)| !**u).map(|(i, _)| *i).fold(0.0, f64::max);
        let bounds: Vec<f64> = outputs.iter().map(OnlineOutput::bound).collect();
        let max_estimator = bounds.iter().copied().fold(0.0, f64::max);

        let converged = max_indicator <= delta * (1.0 + 1e-9);
        let chosen = if converged {
            model.stop_reason = StopReason::Converged;
            None
        } else if model.n >= cfg.n_max {
            model.stop_reason = StopReason::MaxBasisSize;
            None
        } else {
            let pick = bounds.iter().enumerate().filter(|(i, _)| !used[*i]).fold(None, |best: Option<(usize, f64)>, (i, &b)| match best {
                Some((_, bb)) if bb >= b => best,
                _ => Some((i, b)),
            });
            if pick.is_none() {
                model.stop_reason = StopReason::Exhausted;
            }
            pick.map(|(i, _)| i)
        };

        model.log.push(TrainingStep {
            iteration,
            n_primal: model.n,
            n_error: model.n_error,
            snapshot_mu: mu,
            snapshot_indicator,
            delta_updated,
            delta,
            max_estimator,
            max_indicator,
            max_indicator_unselected,
            chosen_mu: chosen.map(|i| train[i].clone()),
            notes,
        });
        match chosen {
            Some(i) => next = i,
            None => {
                model.delta_final = delta.max(max_indicator);
                break;
            }
        }
    }
    model.certified = model.delta_final < 1.0;
    Ok((model, basis))
}

fn fill_blocks(model: &mut RbModel, reduced: &Reduced, basis: &Basis) {
    model.n = basis.xi.len();
    model.n_error = basis.phi.len();
    model.a_xx = reduced.a_xx.clone();
    model.a_pp = reduced.a_pp.clone();
    model.a_px = reduced.a_px.clone();
    model.f_x = reduced.f_x.clone();
    model.f_p = reduced.f_p.clone();
}

fn lu_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let x = a.lu().solve(b).ok_or(Error::SingularSystem)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::SingularSystem)
    }
}

fn online_output_with_alpha(model: &RbModel, mu: &[f64], alpha_lb: f64) -> Result<OnlineOutput> {
    let ta = model.theta_a(mu);
    let tf = model.theta_f(mu);
    let (n, np) = (model.n, model.n_error);

    let a_n = combine_blocks(&ta, &model.a_xx, n, n);
    let b_n = combine_vectors(&tf, &model.f_x, n);
    let c = lu_solve(a_n.clone(), &b_n)?;

    let a_hat = combine_blocks(&ta, &model.a_pp, np, np);
    let a_px = combine_blocks(&ta, &model.a_px, np, n);
    let b_hat = combine_vectors(&tf, &model.f_p, np) - &a_px * &c;
    let c_hat = lu_solve(a_hat, &b_hat)?;

    let f_sq = model.source.norm_sq(mu);
    let rho_sq = f_sq - b_n.dot(&c) - b_hat.dot(&c_hat);
    let clamped = if rho_sq < 0.0 { -rho_sq } else { 0.0 };
    if clamped > 1e-12 * f_sq {
        eprintln!("warning: clamped negative squared auxiliary residual {rho_sq:.3e} at mu = {mu:?}");
    }
    Ok(OnlineOutput {
        err_norm: c_hat.norm(),
        aux_res: rho_sq.max(0.0).sqrt(),
        alpha_lb,
        solution_norm: c.norm(),
        clamped,
        solution: ReducedSolution { c: c.iter().copied().collect(), c_hat: c_hat.iter().copied().collect() },
    })
}

/// Reduced solve and error quantities; never fails for lack of a certificate.
pub fn online_output(model: &RbModel, mu: &[f64]) -> Result<OnlineOutput> {
    model.params.check(mu)?;
    let alpha_lb = model.scm.alpha_lb(mu)?;
    online_output_with_alpha(model, mu, alpha_lb)
}

/// Online solve with certificate. If `α_LB ≤ 0` this returns
/// `CertificateUnavailable`; the solution is still available from [`online_output`].
pub fn online_solve(model: &RbModel, mu: &[f64]) -> Result<(ReducedSolution, Certificate)> {
    if !model.certified {
        return Err(Error::Uncertified { delta: model.delta_final });
    }
    let out = online_output(model, mu)?;
    let cert = out.certificate(model.delta_final)?;
    Ok((out.solution, cert))
}

pub fn estimate(model: &RbModel, mu: &[f64]) -> Result<Certificate> {
    online_solve(model, mu).map(|(_, c)| c)
}

