use lsrb_core::error::Error;
use lsrb_core::linalg::{eig_largest, eig_smallest, lp_min, LinearProgram};
use lsrb_core::sparse::{nested_dissection, CsrMatrix, SparseCholesky};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse SPD matrix: a weighted random graph Laplacian plus a positive diagonal.
fn random_spd(n: usize, seed: u64, shift: f64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, shift + rng.random::<f64>()));
        for _ in 0..3 {
            let j = rng.random_range(0..n);
            if j != i {
                let w = rng.random::<f64>();
                t.extend([(i, i, w), (j, j, w), (i, j, -w), (j, i, -w)]);
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// Eigenvalues of `M^{-1/2} A M^{-1/2}` by a dense symmetric solver.
fn dense_pencil_eigs(a: &CsrMatrix, m: &CsrMatrix) -> Vec<f64> {
    let l = m.to_dense().cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let c = &li * a.to_dense() * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extreme_eigenvalues_match_dense_oracle(n in 5usize..60, seed in any::<u64>()) {
        let a = random_spd(n, seed, 0.01);
        let m = random_spd(n, seed ^ 0xabcdef, 1.0);
        let ev = dense_pencil_eigs(&a, &m);
        let lo = eig_smallest(&a, &m).unwrap();
        let hi = eig_largest(&a, &m).unwrap();
        let scale = ev[n - 1].abs();
        prop_assert!((lo.eigenvalue - ev[0]).abs() <= 1e-8 * scale, "{} vs {}", lo.eigenvalue, ev[0]);
        prop_assert!((hi.eigenvalue - ev[n - 1]).abs() <= 1e-8 * scale);
        prop_assert!((m.quad_form(&lo.eigenvector, &lo.eigenvector) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn indefinite_pencils_report_negative_minimum(n in 5usize..40, seed in any::<u64>(), s in 0.5f64..3.0) {
        let m = CsrMatrix::identity(n);
        let a = random_spd(n, seed, 0.0).add_scaled(&m, -s);
        let ev = dense_pencil_eigs(&a, &m);
        let lo = eig_smallest(&a, &m).unwrap();
        prop_assert!((lo.eigenvalue - ev[0]).abs() <= 1e-8 * ev[n - 1].abs().max(1.0));
    }

    #[test]
    fn cholesky_matches_dense_solve(n in 1usize..120, seed in any::<u64>()) {
        let a = random_spd(n, seed, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let f = SparseCholesky::factor(&a).unwrap();
        let x = f.solve(&b);
        let dense = a.to_dense().cholesky().unwrap();
        let xd = dense.solve(&DVector::from_vec(b.clone()));
        let err = x.iter().zip(xd.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10 * xd.amax().max(1.0));
        let ld = 2.0 * dense.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        prop_assert!((f.log_det() - ld).abs() <= 1e-10 * ld.abs().max(1.0));
    }

    #[test]
    fn nested_dissection_is_a_permutation(n in 1usize..200, seed in any::<u64>()) {
        let a = random_spd(n, seed, 1.0);
        let mut p = nested_dissection(&a);
        p.sort_unstable();
        prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
    }
}

/// Minimum over every basic solution: choose `n` constraints from bounds and
/// rows, solve them as equalities, keep the feasible points.
fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        planes.push((e.clone(), lp.lower[i]));
        planes.push((e, lp.upper[i]));
    }
    for (r, &b) in lp.rows.iter().zip(&lp.row_lower) {
        planes.push((r.clone(), b));
    }
    let k = planes.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let m = DMatrix::from_fn(n, n, |i, j| planes[idx[i]].0[j]);
        let rhs = DVector::from_fn(n, |i, _| planes[idx[i]].1);
        if let Some(y) = m.lu().solve(&rhs) {
            let y: Vec<f64> = y.iter().copied().collect();
            if y.iter().all(|v| v.is_finite()) && lp.is_feasible(&y, 1e-9) {
                let v: f64 = lp.c.iter().zip(&y).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // next combination
        let mut i = n;
        while i > 0 && idx[i - 1] == k - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_matches_vertex_enumeration(
        n in 1usize..4,
        rows in 0usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let lower: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.5).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + 0.1 + 2.0 * rng.random::<f64>()).collect();
        let mut lp = LinearProgram::with_box(c, lower, upper);
        for _ in 0..rows {
            let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
            lp.add_ge(g, rng.random::<f64>() * 2.0 - 1.0);
        }
        let oracle = vertex_enumeration(&lp);
        match (lp_min(&lp), oracle) {
            (Ok((v, y)), Some(o)) => {
                prop_assert!((v - o).abs() <= 1e-9 * o.abs().max(1.0), "simplex {} vs enumeration {}", v, o);
                prop_assert!(lp.is_feasible(&y, 1e-9));
            }
            (Err(Error::Infeasible), None) => {}
            (r, o) => prop_assert!(false, "simplex {:?} vs enumeration {:?}", r.map(|x| x.0), o),
        }
    }
}
