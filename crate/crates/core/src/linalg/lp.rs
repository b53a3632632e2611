//! Dense two-phase simplex with Bland's rule for small linear programs.

use crate::error::{invalid, Error, Result};

const TOL: f64 = 1e-11;

/// `min cᵀy` subject to `lower ≤ y ≤ upper` and
/// `row_lower_i ≤ g_iᵀ y ≤ row_upper_i`. Infinite bounds are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

impl LinearProgram {
    pub fn with_box(c: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { c, lower, upper, rows: Vec::new(), row_lower: Vec::new(), row_upper: Vec::new() }
    }

    /// Adds `gᵀy ≥ b`.
    pub fn add_ge(&mut self, g: Vec<f64>, b: f64) {
        self.rows.push(g);
        self.row_lower.push(b);
        self.row_upper.push(f64::INFINITY);
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    /// Constraint count with each finite bound counted once.
    pub fn n_inequalities(&self) -> usize {
        let bounds = self.lower.iter().chain(&self.upper).filter(|b| b.is_finite()).count();
        let rows = self.row_lower.iter().chain(&self.row_upper).filter(|b| b.is_finite()).count();
        bounds + rows
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.lower.len() != n || self.upper.len() != n {
            return invalid("bound vectors must match the objective length");
        }
        if self.rows.len() != self.row_lower.len() || self.rows.len() != self.row_upper.len() {
            return invalid("row bounds must match the number of rows");
        }
        if self.rows.iter().any(|r| r.len() != n) {
            return invalid("constraint rows must match the objective length");
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
            return Err(Error::Infeasible);
        }
        Ok(())
    }

    pub fn is_feasible(&self, y: &[f64], tol: f64) -> bool {
        let bounds = y.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *v >= l - tol && *v <= u + tol);
        bounds
            && self.rows.iter().zip(self.row_lower.iter().zip(&self.row_upper)).all(|(g, (lo, hi))| {
                let v: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                v >= lo - tol && v <= hi + tol
            })
    }
}

/// How an original variable is expressed through nonnegative ones.
#[derive(Clone, Copy)]
enum VarMap {
    /// `y = l + x`
    Shift(usize, f64),
    /// `y = u − x`
    Reflect(usize, f64),
    /// `y = x⁺ − x⁻`
    Split(usize, usize),
}

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Ge,
    Eq,
}

/// Returns `(min value, argmin)`.
pub fn lp_min(lp: &LinearProgram) -> Result<(f64, Vec<f64>)> {
    lp.validate()?;
    let n = lp.n_vars();

    // Map to x ≥ 0.
    let mut maps = Vec::with_capacity(n);
    let mut nx = 0;
    for i in 0..n {
        let (l, u) = (lp.lower[i], lp.upper[i]);
        maps.push(if l.is_finite() {
            nx += 1;
            VarMap::Shift(nx - 1, l)
        } else if u.is_finite() {
            nx += 1;
            VarMap::Reflect(nx - 1, u)
        } else {
            nx += 2;
            VarMap::Split(nx - 2, nx - 1)
        });
    }
    // A linear form gᵀy in terms of x: returns (coefficients, constant).
    let express = |g: &[f64]| {
        let mut a = vec![0.0; nx];
        let mut c0 = 0.0;
        for (i, m) in maps.iter().enumerate() {
            match *m {
                VarMap::Shift(k, l) => {
                    a[k] += g[i];
                    c0 += g[i] * l;
                }
                VarMap::Reflect(k, u) => {
                    a[k] -= g[i];
                    c0 += g[i] * u;
                }
                VarMap::Split(p, q) => {
                    a[p] += g[i];
                    a[q] -= g[i];
                }
            }
        }
        (a, c0)
    };

    let mut cons: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        if let VarMap::Shift(k, l) = *m {
            if lp.upper[i].is_finite() {
                let mut a = vec![0.0; nx];
                a[k] = 1.0;
                cons.push((a, Sense::Le, lp.upper[i] - l));
            }
        }
    }
    for (r, g) in lp.rows.iter().enumerate() {
        let (a, c0) = express(g);
        let (lo, hi) = (lp.row_lower[r], lp.row_upper[r]);
        if lo.is_finite() && hi.is_finite() && lo == hi {
            cons.push((a, Sense::Eq, lo - c0));
            continue;
        }
        if lo.is_finite() {
            cons.push((a.clone(), Sense::Ge, lo - c0));
        }
        if hi.is_finite() {
            cons.push((a, Sense::Le, hi - c0));
        }
    }
    let (cx, c0) = express(&lp.c);

    let x = simplex(&cx, cons)?;
    let y: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift(k, l) => l + x[k],
            VarMap::Reflect(k, u) => u - x[k],
            VarMap::Split(p, q) => x[p] - x[q],
        })
        .collect();
    let value = cx.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + c0;
    Ok((value, y))
}

struct Tableau {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= pv;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule iterations on the objective row; columns `>= allowed` are
    /// never entered.
    fn run(&mut self, allowed: usize) -> Result<()> {
        let m = self.basis.len();
        let rhs = self.ncols;
        for _ in 0..10_000 {
            let obj = &self.t[m];
            let Some(enter) = (0..allowed).find(|&j| obj[j] < -TOL) else {
                return Ok(());
            };
            let mut leave: Option<usize> = None;
            let mut best = f64::INFINITY;
            for i in 0..m {
                let a = self.t[i][enter];
                if a > TOL {
                    let ratio = self.t[i][rhs] / a;
                    let better = ratio < best - 1e-14
                        || ((ratio - best).abs() <= 1e-14 && leave.is_some_and(|l| self.basis[i] < self.basis[l]));
                    if better {
                        best = ratio;
                        leave = Some(i);
                    }
                }
            }
            match leave {
                Some(r) => self.pivot(r, enter),
                None => return Err(Error::Unbounded),
            }
        }
        Err(Error::NoConvergence { what: "simplex", iterations: 10_000 })
    }
}

/// `min cᵀx` over `x ≥ 0` and the given constraints.
fn simplex(c: &[f64], cons: Vec<(Vec<f64>, Sense, f64)>) -> Result<Vec<f64>> {
    let nx = c.len();
    let m = cons.len();
    // Normalize to nonnegative right-hand sides.
    let cons: Vec<(Vec<f64>, Sense, f64)> = cons
        .into_iter()
        .map(|(a, s, b)| {
            if b < 0.0 {
                let s = match s {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (a.iter().map(|v| -v).collect(), s, -b)
            } else {
                (a, s, b)
            }
        })
        .collect();
    let n_slack = cons.iter().filter(|(_, s, _)| *s != Sense::Eq).count();
    let n_art = cons.iter().filter(|(_, s, _)| *s != Sense::Le).count();
    let ncols = nx + n_slack + n_art;
    let art_start = nx + n_slack;

    let mut t = vec![vec![0.0; ncols + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut ks, mut ka) = (nx, art_start);
    for (i, (a, s, b)) in cons.iter().enumerate() {
        t[i][..nx].copy_from_slice(a);
        t[i][ncols] = *b;
        match s {
            Sense::Le => {
                t[i][ks] = 1.0;
                basis[i] = ks;
                ks += 1;
            }
            Sense::Ge => {
                t[i][ks] = -1.0;
                ks += 1;
                t[i][ka] = 1.0;
                basis[i] = ka;
                ka += 1;
            }
            Sense::Eq => {
                t[i][ka] = 1.0;
                basis[i] = ka;
                ka += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, ncols };

    if n_art > 0 {
        // Phase 1: minimize the sum of artificials, priced out of the basis.
        for j in art_start..ncols {
            tab.t[m][j] = 1.0;
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                let row = tab.t[i].clone();
                for (o, v) in tab.t[m].iter_mut().zip(&row) {
                    *o -= v;
                }
            }
        }
        tab.run(ncols)?;
        let scale = 1.0 + cons.iter().map(|(_, _, b)| b.abs()).fold(0.0, f64::max);
        if -tab.t[m][ncols] > 1e-9 * scale {
            return Err(Error::Infeasible);
        }
        // Drive remaining (zero-level) artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| tab.t[i][j].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    // Phase 2 objective, expressed in the current basis.
    tab.t[m] = vec![0.0; ncols + 1];
    tab.t[m][..nx].copy_from_slice(c);
    for i in 0..m {
        let b = tab.basis[i];
        let f = tab.t[m][b];
        if f != 0.0 {
            let row = tab.t[i].clone();
            for (o, v) in tab.t[m].iter_mut().zip(&row) {
                *o -= f * v;
            }
        }
    }
    tab.run(art_start)?;

    let mut x = vec![0.0; nx];
    for i in 0..m {
        if tab.basis[i] < nx {
            x[tab.basis[i]] = tab.t[i][ncols].max(0.0);
        }
    }
    Ok(x)
}
