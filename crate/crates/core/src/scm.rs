//! Successive constraint method: an LP lower bound for the discrete
//! coercivity constant `α^h(μ) = λ_min(A(μ), M_X)` on the free DOFs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{eig_largest, eig_smallest, lp_min, EigResult, LinearProgram};
use crate::problems::{eval_thetas, ProblemDef, Theta};
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub mu: Vec<f64>,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScmModel {
    pub thetas: Vec<Theta>,
    /// Bounds on `a_k(v,v)/‖v‖²_X` over the free DOFs.
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    pub anchors: Vec<Anchor>,
    /// Rayleigh coordinates `y_k(v)` of the anchor eigenvectors.
    pub rayleigh_points: Vec<Vec<f64>>,
    pub epsilon: f64,
    /// Largest relative gap on the candidate set at termination.
    pub epsilon_achieved: f64,
    /// Maximum relative gap before each anchor was added, then the final one.
    pub gap_history: Vec<f64>,
    pub eigen_solves: usize,
}

impl ScmModel {
    pub fn lp(&self, mu: &[f64]) -> LinearProgram {
        let mut lp = LinearProgram::with_box(eval_thetas(&self.thetas, mu), self.box_lower.clone(), self.box_upper.clone());
        for a in &self.anchors {
            lp.add_ge(eval_thetas(&self.thetas, &a.mu), a.alpha);
        }
        lp
    }

    /// LP lower bound; may be nonpositive, which callers must treat as
    /// "no certificate".
    pub fn alpha_lb(&self, mu: &[f64]) -> Result<f64> {
        match lp_min(&self.lp(mu)) {
            Ok((v, _)) => Ok(v),
            Err(Error::Infeasible) => Err(Error::Format("SCM constraints are inconsistent".into())),
            Err(e) => Err(e),
        }
    }

    /// Minimum of the objective over the stored Rayleigh points, an upper
    /// bound for `α^h(μ)`.
    pub fn alpha_ub(&self, mu: &[f64]) -> f64 {
        let th = eval_thetas(&self.thetas, mu);
        self.rayleigh_points
            .iter()
            .map(|y| th.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn relative_gap(&self, mu: &[f64]) -> Result<f64> {
        let lb = self.alpha_lb(mu)?;
        let ub = self.alpha_ub(mu);
        Ok(if ub.is_finite() && ub > 0.0 { (ub - lb) / ub } else { f64::INFINITY })
    }
}

/// Operator components and X-Gram restricted to the free DOFs of X.
pub struct FreePencil {
    pub components: Vec<CsrMatrix>,
    pub gram: CsrMatrix,
    pub thetas: Vec<Theta>,
}

impl FreePencil {
    pub fn new(problem: &ProblemDef) -> Self {
        let free = problem.x.free_dofs();
        Self {
            components: problem.op_x.matrices.iter().map(|a| a.submatrix(&free, &free)).collect(),
            gram: problem.x.gram.submatrix(&free, &free),
            thetas: problem.op_x.thetas.clone(),
        }
    }

    pub fn operator(&self, mu: &[f64]) -> CsrMatrix {
        let th = eval_thetas(&self.thetas, mu);
        let terms: Vec<(f64, &CsrMatrix)> = th.iter().copied().zip(&self.components).collect();
        CsrMatrix::linear_combination(&terms).expect("components share a shape")
    }

    pub fn alpha_h(&self, mu: &[f64]) -> Result<EigResult> {
        eig_smallest(&self.operator(mu), &self.gram)
    }

    pub fn rayleigh_point(&self, v: &[f64]) -> Vec<f64> {
        let mv = self.gram.quad_form(v, v);
        self.components.iter().map(|a| a.quad_form(v, v) / mv).collect()
    }
}

/// Discrete coercivity constant by a direct eigensolve.
pub fn alpha_h(problem: &ProblemDef, mu: &[f64]) -> Result<f64> {
    problem.params.check(mu)?;
    Ok(FreePencil::new(problem).alpha_h(mu)?.eigenvalue)
}

/// Safety margin subtracted from (added to) computed extreme eigenvalues so
/// the box contains the exact Rayleigh coordinates.
fn margin(r: &EigResult) -> f64 {
    1e-9 * r.eigenvalue.abs().max(1.0) + 100.0 * r.residual_norm
}

/// Greedy SCM over `candidates` until the largest relative gap is at most `epsilon`.
pub fn scm_offline(problem: &ProblemDef, candidates: &[Vec<f64>], epsilon: f64) -> Result<ScmModel> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("SCM tolerance must lie in (0,1), got {epsilon}"));
    }
    if candidates.is_empty() {
        return invalid("SCM needs at least one candidate parameter");
    }
    for mu in candidates {
        problem.params.check(mu)?;
    }
    let pencil = FreePencil::new(problem);
    let q = pencil.components.len();

    let extremes: Vec<(EigResult, EigResult)> = pencil
        .components
        .par_iter()
        .map(|a| Ok((eig_smallest(a, &pencil.gram)?, eig_largest(a, &pencil.gram)?)))
        .collect::<Result<_>>()?;
    let box_lower = extremes.iter().map(|(lo, _)| lo.eigenvalue - margin(lo)).collect();
    let box_upper = extremes.iter().map(|(_, hi)| hi.eigenvalue + margin(hi)).collect();

    let mut model = ScmModel {
        thetas: pencil.thetas.clone(),
        box_lower,
        box_upper,
        anchors: Vec::new(),
        rayleigh_points: Vec::new(),
        epsilon,
        epsilon_achieved: f64::INFINITY,
        gap_history: Vec::new(),
        eigen_solves: 2 * q,
    };

    let mut is_anchor = vec![false; candidates.len()];
    let mut next = 0usize;
    loop {
        let mu = &candidates[next];
        let eig = pencil.alpha_h(mu)?;
        model.eigen_solves += 1;
        model.rayleigh_points.push(pencil.rayleigh_point(&eig.eigenvector));
        model.anchors.push(Anchor { mu: mu.clone(), alpha: eig.eigenvalue });
        is_anchor[next] = true;

        let gaps: Vec<f64> = candidates.par_iter().map(|m| model.relative_gap(m)).collect::<Result<_>>()?;
        let worst = gaps
            .iter()
            .enumerate()
            .filter(|(i, _)| !is_anchor[*i])
            .fold(None, |best: Option<(usize, f64)>, (i, &g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((i, g)),
            });
        let overall = gaps.iter().copied().fold(0.0, f64::max);
        model.gap_history.push(overall);
        model.epsilon_achieved = overall;
        match worst {
            Some((i, _)) if overall > epsilon => next = i,
            _ => break,
        }
    }
    Ok(model)
}
