use std::sync::Arc;

use lsrb_core::fem::{assemble_form, prolongation, x_norm_gram, FeSpace, FormTerm, Region};
use lsrb_core::mesh::{refine_times, unit_square_mesh};
use lsrb_core::problems::{thermal_bc, ProblemDef, ProblemKind};
use lsrb_core::sparse::CsrMatrix;
use proptest::prelude::*;

fn space(n: usize) -> FeSpace {
    FeSpace::new(Arc::new(unit_square_mesh(n, |_| 0).unwrap()), &thermal_bc())
}

fn linear_flux(c: [f64; 6]) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |x| [c[0] + c[1] * x[0] + c[2] * x[1], c[3] + c[4] * x[0] + c[5] * x[1]]
}

/// RT0 fields `a + b x`.
fn rt_field(a: [f64; 2], b: f64) -> impl Fn([f64; 2]) -> [f64; 2] {
    move |x| [a[0] + b * x[0], a[1] + b * x[1]]
}

#[test]
fn rt0_and_p1_reproduce_their_own_fields() {
    let s = space(6);
    let q = rt_field([0.3, -1.2], 0.7);
    let u = |x: [f64; 2]| 1.0 - 2.0 * x[0] + 0.5 * x[1];
    let v = s.interpolate(&q, u);
    let m = s.mesh();
    for c in 0..m.n_cells() {
        let x = m.centroid(c);
        let qh = s.eval_flux(&v, c, x);
        let qe = q(x);
        assert!((qh[0] - qe[0]).abs() < 1e-12 && (qh[1] - qe[1]).abs() < 1e-12);
        assert!((s.eval_div(&v, c) - 1.4).abs() < 1e-11);
        assert!((s.eval_scalar(&v, c, x) - u(x)).abs() < 1e-13);
        let g = s.eval_grad(&v, c);
        assert!((g[0] + 2.0).abs() < 1e-12 && (g[1] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn normal_flux_is_continuous_across_edges() {
    let s = space(4);
    let v = s.interpolate(linear_flux([0.1, 1.0, -0.4, 2.0, 0.3, 0.9]), |_| 0.0);
    let m = s.mesh();
    for e in 0..m.n_edges() {
        if let [Some(c0), Some(c1)] = m.edge_cells(e) {
            let x = m.edge_midpoint(e);
            let n = m.edge_normal(e);
            let f0 = s.eval_flux(&v, c0, x);
            let f1 = s.eval_flux(&v, c1, x);
            let jump = (f0[0] - f1[0]) * n[0] + (f0[1] - f1[1]) * n[1];
            assert!(jump.abs() < 1e-12, "edge {e}: jump {jump}");
        }
    }
}

#[test]
fn forms_match_closed_form_integrals() {
    // For q = (1 + x, y), u = x y on the unit square:
    // ∫|q|² = 7/3 + 1/3, ∫div² = 4, ∫q·∇u = ∫(1+x)y + yx = 1/2 + 1/4 + 1/4 = 1,
    // ∫|∇u|² = 2/3.
    let s = space(8);
    let v = s.interpolate(|x| [1.0 + x[0], x[1]], |x| x[0] * x[1]);
    let ff = assemble_form(&s, FormTerm::FluxFlux, &Region::All).quad_form(&v, &v);
    let dd = assemble_form(&s, FormTerm::DivDiv, &Region::All).quad_form(&v, &v);
    let fg = assemble_form(&s, FormTerm::FluxGrad, &Region::All).quad_form(&v, &v);
    assert!((ff - 8.0 / 3.0).abs() < 1e-12);
    assert!((dd - 4.0).abs() < 1e-12);
    // u_h is the P1 interpolant of x y, whose gradient pairs with q only approximately
    assert!((fg - 2.0).abs() < 2e-2, "2∫q·∇u_h = {fg}");
    let gg = assemble_form(&s, FormTerm::GradGrad, &Region::All).quad_form(&v, &v);
    assert!((gg - 2.0 / 3.0).abs() < 1e-2);
}

#[test]
fn gram_is_symmetric_positive_definite() {
    let s = space(4);
    let g = x_norm_gram(&s);
    assert!(g.asymmetry() < 1e-14);
    let d = g.to_dense();
    assert!(d.cholesky().is_some());
}

#[test]
fn essential_dofs_are_top_scalars_and_side_fluxes() {
    let s = space(4);
    let m = s.mesh();
    let ne = s.n_flux();
    for &d in s.essential_dofs() {
        if d < ne {
            let x = m.edge_midpoint(d);
            assert!(x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0, "flux dof on {x:?}");
        } else {
            assert_eq!(m.vertices()[d - ne][1], 1.0);
        }
    }
    assert_eq!(s.essential_dofs().iter().filter(|&&d| d >= ne).count(), 5);
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn prolongation_is_exact_on_coarse_fields(
        depth in 1usize..3,
        a in prop::array::uniform2(-2.0f64..2.0),
        b in -2.0f64..2.0,
        u in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let coarse = space(4);
        let (fm, parent) = refine_times(coarse.mesh(), depth).unwrap();
        let fine = FeSpace::new(Arc::new(fm), &thermal_bc());
        let p = prolongation(&coarse, &fine, &parent).unwrap();
        // a + b x is RT0 on every mesh; u linear is P1 on every mesh
        let scal = |x: [f64; 2]| u[0] + u[1] * x[0] + u[2] * x[1];
        let vc = coarse.interpolate(rt_field(a, b), scal);
        let vf = fine.interpolate(rt_field(a, b), scal);
        prop_assert!(max_diff(&p.matvec(&vc), &vf) < 1e-12);
    }

    #[test]
    fn prolonged_coarse_functions_keep_their_values(seed in 0u64..1000) {
        // an arbitrary coarse coefficient vector, evaluated on both meshes
        let coarse = space(2);
        let (fm, parent) = refine_times(coarse.mesh(), 2).unwrap();
        let fine = FeSpace::new(Arc::new(fm), &thermal_bc());
        let p = prolongation(&coarse, &fine, &parent).unwrap();
        let vc: Vec<f64> = (0..coarse.dim()).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 50.0 - 1.0).collect();
        let vf = p.matvec(&vc);
        for f in 0..fine.mesh().n_cells() {
            let x = fine.mesh().centroid(f);
            let c = parent[f];
            let qc = coarse.eval_flux(&vc, c, x);
            let qf = fine.eval_flux(&vf, f, x);
            prop_assert!((qc[0] - qf[0]).abs() < 1e-11 && (qc[1] - qf[1]).abs() < 1e-11);
            prop_assert!((coarse.eval_scalar(&vc, c, x) - fine.eval_scalar(&vf, f, x)).abs() < 1e-12);
        }
    }
}

#[test]
fn cross_operator_equals_error_operator_times_prolongation() {
    let p = ProblemDef::build(ProblemKind::Thermal3, 4, 2).unwrap();
    for (azx, azz) in p.op_zx.matrices.iter().zip(&p.op_z.matrices) {
        let direct: CsrMatrix = azz.matmul(&p.prolong);
        let diff = direct.add_scaled(azx, -1.0);
        assert!(diff.max_abs() <= 1e-12 * azz.max_abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sampled_forms_match_assembled_matrices(seed in 0u64..1000) {
        let p = ProblemDef::build(ProblemKind::Thermal3, 4, 1).unwrap();
        let terms = p.terms.as_ref().unwrap();
        for (disc, op, rhs) in [(&p.x, &p.op_x, &p.rhs_x), (&p.z, &p.op_z, &p.rhs_z)] {
            let s = disc.space.as_ref().unwrap();
            let pseudo = |k: u64| -> Vec<f64> { (0..s.dim()).map(|i| ((i as u64 * 7919 + k * 104729 + seed) % 211) as f64 / 105.0 - 1.0).collect() };
            let (v, w) = (pseudo(1), pseudo(2));
            let (fv, fw) = (s.cell_fields(&v), s.cell_fields(&w));
            let forms = terms.form_values(s, &fv, &fw);
            for (k, a) in op.matrices.iter().enumerate() {
                let scale = a.max_abs() * v.len() as f64;
                prop_assert!((forms[k] - a.quad_form(&w, &v)).abs() <= 1e-13 * scale);
            }
            let sources = terms.source_values(s, &fv);
            for (k, f) in rhs.vectors.iter().enumerate() {
                let direct: f64 = f.iter().zip(&v).map(|(a, b)| a * b).sum();
                prop_assert!((sources[k] - direct).abs() <= 1e-13 * f.iter().map(|x| x.abs()).sum::<f64>());
            }
        }
    }
}
