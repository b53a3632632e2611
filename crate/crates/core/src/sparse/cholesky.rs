//! Supernodal left-looking sparse Cholesky factorization `P A P^T = L L^T`.
//!
//! Columns of `L` with nested structure are grouped into supernodes stored
//! as dense column-major panels, so updates are dense kernels instead of
//! scattered column operations.

use super::{nested_dissection, CsrMatrix};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Pivots at or below this fraction of the original diagonal entry are
/// treated as a loss of definiteness.
const PIVOT_TOL: f64 = 1e-13;
/// Column block width of the dense panel factorization.
const PANEL_BLOCK: usize = 32;

#[derive(Clone, Debug)]
struct Symbolic {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// Lower triangle of `P A P^T` by column: row indices and positions in `A.data()`.
    lcp: Vec<usize>,
    lci: Vec<usize>,
    lsrc: Vec<usize>,
    /// First column of each supernode, plus `n`.
    sn_start: Vec<usize>,
    col_sn: Vec<usize>,
    /// Sorted row structure of each supernode, starting with its own columns.
    rp: Vec<usize>,
    ri: Vec<usize>,
    /// Offset of each supernode panel in the value array.
    xp: Vec<usize>,
    pattern_indptr: Vec<usize>,
    pattern_indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SparseCholesky {
    sym: Symbolic,
    lx: Vec<f64>,
}

impl Symbolic {
    fn analyze(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let perm = nested_dissection(a);
        let mut iperm = vec![0; n];
        for (k, &old) in perm.iter().enumerate() {
            iperm[old] = k;
        }

        // The pattern is symmetric, so row perm[k] of A gives both the upper
        // and the lower part of permuted column k.
        let mut lcp = vec![0usize; n + 1];
        let mut ucp = vec![0usize; n + 1];
        for k in 0..n {
            for (c, _) in a.row(perm[k]) {
                if iperm[c] >= k {
                    lcp[k + 1] += 1;
                } else {
                    ucp[k + 1] += 1;
                }
            }
        }
        for k in 0..n {
            lcp[k + 1] += lcp[k];
            ucp[k + 1] += ucp[k];
        }
        let mut lci = Vec::with_capacity(lcp[n]);
        let mut lsrc = Vec::with_capacity(lcp[n]);
        let mut uci = Vec::with_capacity(ucp[n]);
        let mut col: Vec<(usize, usize)> = Vec::new();
        for k in 0..n {
            let old = perm[k];
            col.clear();
            for p in a.indptr()[old]..a.indptr()[old + 1] {
                let i = iperm[a.indices()[p]];
                if i >= k {
                    col.push((i, p));
                } else {
                    uci.push(i);
                }
            }
            col.sort_unstable();
            for &(i, p) in &col {
                lci.push(i);
                lsrc.push(p);
            }
        }

        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &row in &uci[ucp[k]..ucp[k + 1]] {
                let mut i = row;
                while i != NONE && i < k {
                    let inext = ancestor[i];
                    ancestor[i] = k;
                    if inext == NONE {
                        parent[i] = k;
                    }
                    i = inext;
                }
            }
        }

        let mut colcount = vec![1usize; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0; n];
        for k in 0..n {
            let top = ereach(&ucp, &uci, &parent, k, &mut mark, &mut stack);
            for &j in &stack[top..n] {
                colcount[j] += 1;
            }
        }

        // Column j+1 continues the supernode of j when L(:,j) = {j} ∪ L(:,j+1).
        let mut sn_start = vec![0];
        for j in 1..n {
            if !(parent[j - 1] == j && colcount[j - 1] == colcount[j] + 1) {
                sn_start.push(j);
            }
        }
        sn_start.push(n);
        let nsn = sn_start.len() - 1;
        let mut col_sn = vec![0; n];
        for s in 0..nsn {
            col_sn[sn_start[s]..sn_start[s + 1]].fill(s);
        }

        // Row structures, children before parents.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nsn];
        for s in 0..nsn {
            let p = parent[sn_start[s + 1] - 1];
            if p != NONE {
                children[col_sn[p]].push(s);
            }
        }
        let mut rp = vec![0usize; nsn + 1];
        let mut ri: Vec<usize> = Vec::new();
        let mut smark = vec![NONE; n];
        for s in 0..nsn {
            let (f, l) = (sn_start[s], sn_start[s + 1]);
            let start = ri.len();
            for j in f..l {
                ri.push(j);
                smark[j] = s;
            }
            let below = ri.len();
            for j in f..l {
                for &i in &lci[lcp[j]..lcp[j + 1]] {
                    if i >= l && smark[i] != s {
                        smark[i] = s;
                        ri.push(i);
                    }
                }
            }
            for &c in &children[s] {
                for idx in rp[c]..rp[c + 1] {
                    let i = ri[idx];
                    if i >= l && smark[i] != s {
                        smark[i] = s;
                        ri.push(i);
                    }
                }
            }
            ri[below..].sort_unstable();
            debug_assert_eq!(ri.len() - start, colcount[f]);
            rp[s + 1] = ri.len();
        }
        let mut xp = vec![0usize; nsn + 1];
        for s in 0..nsn {
            xp[s + 1] = xp[s] + (rp[s + 1] - rp[s]) * (sn_start[s + 1] - sn_start[s]);
        }

        Ok(Self {
            n,
            perm,
            lcp,
            lci,
            lsrc,
            sn_start,
            col_sn,
            rp,
            ri,
            xp,
            pattern_indptr: a.indptr().to_vec(),
            pattern_indices: a.indices().to_vec(),
        })
    }

    fn matches(&self, a: &CsrMatrix) -> bool {
        a.indptr() == self.pattern_indptr.as_slice() && a.indices() == self.pattern_indices.as_slice()
    }

    fn n_supernodes(&self) -> usize {
        self.sn_start.len() - 1
    }

    /// `(first column, width, rows)` of supernode `s`.
    fn supernode(&self, s: usize) -> (usize, usize, &[usize]) {
        let f = self.sn_start[s];
        (f, self.sn_start[s + 1] - f, &self.ri[self.rp[s]..self.rp[s + 1]])
    }
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), returned in
/// `stack[top..n]`.
fn ereach(
    cp: &[usize],
    ci: &[usize],
    parent: &[usize],
    k: usize,
    mark: &mut [usize],
    stack: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &row in &ci[cp[k]..cp[k + 1]] {
        let mut i = row;
        let mut len = 0;
        while i != NONE && mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl SparseCholesky {
    /// Factors a symmetric positive definite matrix with a symmetric pattern.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let sym = Symbolic::analyze(a)?;
        Self::numeric(sym, a)
    }

    /// Refactors a matrix; the symbolic analysis is reused when the pattern is unchanged.
    pub fn refactor(&self, a: &CsrMatrix) -> Result<Self> {
        if self.sym.matches(a) {
            Self::numeric(self.sym.clone(), a)
        } else {
            Self::factor(a)
        }
    }

    fn numeric(sym: Symbolic, a: &CsrMatrix) -> Result<Self> {
        let n = sym.n;
        let nsn = sym.n_supernodes();
        let values = a.data();
        let mut lx = vec![0.0; sym.xp[nsn]];
        let mut relmap = vec![0usize; n];
        let mut head = vec![NONE; nsn];
        let mut next = vec![NONE; nsn];
        let mut ptr = vec![0usize; nsn];
        let mut tmp: Vec<f64> = Vec::new();
        let mut akk = Vec::new();

        for s in 0..nsn {
            let (f, w, rows) = sym.supernode(s);
            let m = rows.len();
            for (r, &i) in rows.iter().enumerate() {
                relmap[i] = r;
            }
            let (done, rest) = lx.split_at_mut(sym.xp[s]);
            let panel = &mut rest[..m * w];

            akk.clear();
            for c in 0..w {
                let j = f + c;
                let mut d = 0.0;
                for p in sym.lcp[j]..sym.lcp[j + 1] {
                    let i = sym.lci[p];
                    let v = values[sym.lsrc[p]];
                    panel[c * m + relmap[i]] += v;
                    if i == j {
                        d += v;
                    }
                }
                akk.push(d);
            }

            // Updates from every earlier supernode with rows in f..f+w.
            let mut d = std::mem::replace(&mut head[s], NONE);
            while d != NONE {
                let dnext = next[d];
                let (_, wd, drows) = sym.supernode(d);
                let md = drows.len();
                let ld = &done[sym.xp[d]..sym.xp[d] + md * wd];
                let p = ptr[d];
                let k = drows[p..].iter().take_while(|&&i| i < f + w).count();
                let r = md - p;
                tmp.clear();
                tmp.resize(r * k, 0.0);
                // tmp = −L_d(p.., :) L_d(p..p+k, :)ᵀ
                gemm_nt_sub(&ld[p..], md, wd, r, k, &mut tmp, r);
                for j in 0..k {
                    let tc = drows[p + j] - f;
                    let dst = &mut panel[tc * m..tc * m + m];
                    for i in j..r {
                        dst[relmap[drows[p + i]]] += tmp[j * r + i];
                    }
                }
                ptr[d] = p + k;
                if p + k < md {
                    let t = sym.col_sn[drows[p + k]];
                    next[d] = head[t];
                    head[t] = d;
                }
                d = dnext;
            }

            // Dense factorization of the panel, left-looking over column blocks.
            for cb in (0..w).step_by(PANEL_BLOCK) {
                let be = (cb + PANEL_BLOCK).min(w);
                let (src, dst) = panel.split_at_mut(cb * m);
                if cb > 0 {
                    gemm_nt_sub(&src[cb..], m, cb, m - cb, be - cb, &mut dst[cb..], m);
                }
                for c in cb..be {
                    let off = (c - cb) * m;
                    let (left, right) = dst.split_at_mut(off + m);
                    let col = &mut left[off..];
                    let dv = col[c];
                    if !(dv > PIVOT_TOL * akk[c].abs()) || !dv.is_finite() {
                        return Err(Error::MatrixNotSpd { pivot: sym.perm[f + c], value: dv });
                    }
                    let sq = dv.sqrt();
                    col[c] = sq;
                    for v in &mut col[c + 1..] {
                        *v /= sq;
                    }
                    for c2 in c + 1..be {
                        let b = col[c2];
                        if b != 0.0 {
                            let o = (c2 - c - 1) * m;
                            for (x, y) in right[o + c2..o + m].iter_mut().zip(&col[c2..]) {
                                *x -= y * b;
                            }
                        }
                    }
                }
            }

            ptr[s] = w;
            if w < m {
                let t = sym.col_sn[rows[w]];
                next[s] = head[t];
                head[t] = s;
            }
        }
        Ok(Self { sym, lx })
    }

    pub fn dim(&self) -> usize {
        self.sym.n
    }

    pub fn nnz_factor(&self) -> usize {
        (0..self.sym.n_supernodes())
            .map(|s| {
                let (_, w, rows) = self.sym.supernode(s);
                rows.len() * w - w * (w - 1) / 2
            })
            .sum()
    }

    /// Multiply-add count of the numeric factorization.
    pub fn flops(&self) -> f64 {
        (0..self.sym.n_supernodes())
            .map(|s| {
                let (_, w, rows) = self.sym.supernode(s);
                (0..w).map(|c| ((rows.len() - c) as f64).powi(2)).sum::<f64>()
            })
            .sum()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.sym.n;
        assert_eq!(b.len(), n);
        let nsn = self.sym.n_supernodes();
        let mut y: Vec<f64> = self.sym.perm.iter().map(|&old| b[old]).collect();
        for s in 0..nsn {
            let (f, w, rows) = self.sym.supernode(s);
            let m = rows.len();
            let panel = &self.lx[self.sym.xp[s]..self.sym.xp[s] + m * w];
            for c in 0..w {
                let col = &panel[c * m..(c + 1) * m];
                let yc = y[f + c] / col[c];
                y[f + c] = yc;
                for (i, v) in rows[c + 1..].iter().zip(&col[c + 1..]) {
                    y[*i] -= v * yc;
                }
            }
        }
        for s in (0..nsn).rev() {
            let (f, w, rows) = self.sym.supernode(s);
            let m = rows.len();
            let panel = &self.lx[self.sym.xp[s]..self.sym.xp[s] + m * w];
            for c in (0..w).rev() {
                let col = &panel[c * m..(c + 1) * m];
                let mut acc = y[f + c];
                for (i, v) in rows[c + 1..].iter().zip(&col[c + 1..]) {
                    acc -= v * y[*i];
                }
                y[f + c] = acc / col[c];
            }
        }
        let mut out = vec![0.0; n];
        for (k, &old) in self.sym.perm.iter().enumerate() {
            out[old] = y[k];
        }
        out
    }

    /// log-determinant of the factored matrix.
    pub fn log_det(&self) -> f64 {
        let mut s = 0.0;
        for sn in 0..self.sym.n_supernodes() {
            let (_, w, rows) = self.sym.supernode(sn);
            let m = rows.len();
            let panel = &self.lx[self.sym.xp[sn]..];
            for c in 0..w {
                s += panel[c * m + c].ln();
            }
        }
        2.0 * s
    }
}

/// `out(i, j) −= Σ_c a(i, c) a(j, c)` for `i < r`, `j < k`, `i ≥ j` (entries
/// above the diagonal may also be written). `a` is column-major with leading
/// dimension `lda` and `nc` columns; `out` has leading dimension `ldo`.
fn gemm_nt_sub(a: &[f64], lda: usize, nc: usize, r: usize, k: usize, out: &mut [f64], ldo: usize) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were detected at runtime.
        unsafe { gemm_nt_sub_fma(a, lda, nc, r, k, out, ldo) };
        return;
    }
    gemm_nt_sub_impl::<false>(a, lda, nc, r, k, out, ldo);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gemm_nt_sub_fma(a: &[f64], lda: usize, nc: usize, r: usize, k: usize, out: &mut [f64], ldo: usize) {
    gemm_nt_sub_impl::<true>(a, lda, nc, r, k, out, ldo);
}

#[inline(always)]
fn gemm_nt_sub_impl<const FMA: bool>(a: &[f64], lda: usize, nc: usize, r: usize, k: usize, out: &mut [f64], ldo: usize) {
    let mut j = 0;
    while j + 4 <= k {
        block_cols::<4, FMA>(a, lda, nc, r, j, out, ldo);
        j += 4;
    }
    while j < k {
        block_cols::<1, FMA>(a, lda, nc, r, j, out, ldo);
        j += 1;
    }
}

#[inline(always)]
fn block_cols<const J: usize, const FMA: bool>(a: &[f64], lda: usize, nc: usize, r: usize, j: usize, out: &mut [f64], ldo: usize) {
    let mut i = j & !7;
    while i + 8 <= r {
        let mut acc = [[0.0f64; 8]; J];
        for c in 0..nc {
            let col = &a[c * lda..];
            let x: &[f64; 8] = col[i..i + 8].try_into().expect("8 rows");
            for q in 0..J {
                let b = col[j + q];
                for t in 0..8 {
                    acc[q][t] = if FMA { x[t].mul_add(b, acc[q][t]) } else { acc[q][t] + x[t] * b };
                }
            }
        }
        for q in 0..J {
            let o = &mut out[(j + q) * ldo + i..(j + q) * ldo + i + 8];
            for t in 0..8 {
                o[t] -= acc[q][t];
            }
        }
        i += 8;
    }
    for i in i..r {
        for q in 0..J {
            let mut acc = 0.0;
            for c in 0..nc {
                acc += a[c * lda + i] * a[c * lda + j + q];
            }
            out[(j + q) * ldo + i] -= acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, density: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < density {
                    b[(i, j)] = rng.random::<f64>() - 0.5;
                }
            }
        }
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn solves_random_sparse_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[1usize, 5, 40, 150] {
            let d = random_spd(n, 0.05, &mut rng);
            let a = CsrMatrix::from_dense(&d);
            let chol = SparseCholesky::factor(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = chol.solve(&b);
            let xd = d.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-10 * (1.0 + xd[i].abs()));
            }
            let ld = d.cholesky().unwrap().l().diagonal().map(|v| v.ln()).sum() * 2.0;
            assert!((chol.log_det() - ld).abs() < 1e-9 * (1.0 + ld.abs()));
        }
    }

    #[test]
    fn grid_laplacian_with_wide_supernodes() {
        let k = 24;
        let n = k * k;
        let mut t = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let v = i * k + j;
                t.push((v, v, 4.01));
                if i + 1 < k {
                    t.push((v, v + k, -1.0));
                    t.push((v + k, v, -1.0));
                }
                if j + 1 < k {
                    t.push((v, v + 1, -1.0));
                    t.push((v + 1, v, -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let chol = SparseCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let x = chol.solve(&b);
        let xd = a.to_dense().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10 * (1.0 + xd[i].abs()));
        }
        assert!(chol.nnz_factor() < n * n / 4);
    }

    #[test]
    fn rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(SparseCholesky::factor(&a), Err(Error::MatrixNotSpd { .. })));
    }

    #[test]
    fn refactor_reuses_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_spd(30, 0.1, &mut rng);
        let a = CsrMatrix::from_dense(&d);
        let chol = SparseCholesky::factor(&a).unwrap();
        let a2 = a.add_scaled(&CsrMatrix::identity(30), 0.0).scaled(2.0);
        let chol2 = chol.refactor(&a2).unwrap();
        let b = vec![1.0; 30];
        let x1 = chol.solve(&b);
        let x2 = chol2.solve(&b);
        for i in 0..30 {
            assert!((x1[i] - 2.0 * x2[i]).abs() < 1e-10 * (1.0 + x1[i].abs()));
        }
    }
}
