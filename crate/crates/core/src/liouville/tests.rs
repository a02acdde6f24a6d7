use super::*;
use crate::corrlib::{time_reverse_close, CorrelationKey, CorrelationSet, ExpTerm};
use crate::linalg::{c, sigma_x, sigma_z, ONE, ZERO};
use crate::modelgen::{build_system_model, Side, SystemSpec};
use crate::waveguide::WaveguideParams;

fn qubit_model() -> ModelSpec {
    let sys = SystemSpec::new(sigma_z() * c(0.5, 0.0)).with_coupling("X", sigma_x(), "X");
    let mut set = CorrelationSet::new();
    set.insert(CorrelationKey::positive("X", "X"), vec![ExpTerm::new(c(0.04, 0.0), 1.0, 0.3)]);
    let set = time_reverse_close(&set, |l| Some(l.to_string())).unwrap();
    build_system_model(&set, &sys).unwrap()
}

fn excited() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE])
}

#[test]
fn purified_dimension() {
    let model = qubit_model();
    let (layout, op) = assemble_purified_uniform(&model, 1, None).unwrap();
    assert_eq!(layout.dim(), 16);
    assert_eq!(op.dim(), 16);
}

#[test]
fn capped_enumeration_counts() {
    assert_eq!(enumerate_occupations(&[2, 2, 2, 2], Some(2)).unwrap().len(), 15);
    assert_eq!(enumerate_occupations(&[1, 1, 1], Some(0)).unwrap().len(), 1);
    let all = enumerate_occupations(&[1, 2], None).unwrap();
    assert_eq!(all.len(), 6);
    assert_eq!(all[0], vec![0, 0]);
    assert_eq!(all[1], vec![0, 1]);
}

#[test]
fn extract_returns_initial_state() {
    let model = qubit_model();
    let (layout, _) = assemble_purified_uniform(&model, 2, None).unwrap();
    let rho = CMat::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.7, 0.0)]);
    let v = layout.embed_vacuum(&rho).unwrap();
    assert_eq!(extract_rho_s(&layout, &v).unwrap(), rho);
    let dl = SpaceLayout::doubled(2, &[3]);
    let v = dl.embed_vacuum(&rho).unwrap();
    assert_eq!(extract_rho_s(&dl, &v).unwrap(), rho);
}

#[test]
fn generator_on_vacuum_raises_single_modes() {
    let model = qubit_model();
    let (layout, op) = assemble_purified_uniform(&model, 1, None).unwrap();
    let rho = excited();
    let out = op.matvec(&layout.embed_vacuum(&rho).unwrap());
    let n_occ = layout.n_occ();
    let occ = layout.occupations().unwrap();
    let right = occ.iter().position(|o| o == &vec![1, 0]).unwrap();
    let left = occ.iter().position(|o| o == &vec![0, 1]).unwrap();
    let both = occ.iter().position(|o| o == &vec![1, 1]).unwrap();
    let (r, l) = (&model.modes[0], &model.modes[1]);
    let s = sigma_x();
    let expect_r = &s * &rho * (c(0.0, -1.0) * r.lambda2);
    let expect_l = &rho * &s * (c(0.0, 1.0) * l.lambda2);
    for i in 0..2 {
        for j in 0..2 {
            let k = i * 2 + j;
            assert!((out[k * n_occ + right] - expect_r[(i, j)]).norm() < 1e-14);
            assert!((out[k * n_occ + left] - expect_l[(i, j)]).norm() < 1e-14);
            assert_eq!(out[k * n_occ + both], ZERO);
        }
    }
}

#[test]
fn wrong_side_ladder_is_rejected() {
    let mut model = qubit_model();
    model.generator.push(SuperTerm::new(ONE, vec![], vec![Factor::lower(0)]));
    assert!(matches!(assemble_purified_uniform(&model, 1, None), Err(Error::Assembly(_))));
    let mut model = qubit_model();
    model.generator.push(SuperTerm::new(ONE, vec![Factor::lower(7)], vec![]));
    assert!(matches!(assemble_purified_uniform(&model, 1, None), Err(Error::Assembly(_))));
}

#[test]
fn empty_insertion_gives_zero_state() {
    let model = qubit_model();
    let (layout, _) = assemble_purified_uniform(&model, 1, None).unwrap();
    let ins = crate::modelgen::FieldInsertion {
        field: "phi".into(),
        side: Side::Left,
        timing: crate::modelgen::Timing::Output,
        terms: vec![],
    };
    let v = layout.embed_vacuum(&excited()).unwrap();
    let out = apply_insertion(&model, &layout, &ins, &v).unwrap();
    assert!(out.iter().all(|z| *z == ZERO));
    assert!(matches!(apply_insertion(&model, &layout, &ins, &v[1..]), Err(Error::Dimension { .. })));
}

fn trace_defect(op: &SparseSuperOp, n: usize) -> f64 {
    // Column sums over the diagonal rows of the vectorized density matrix.
    let mut worst: f64 = 0.0;
    let t = op.transpose();
    let mut tr = vec![ZERO; n * n];
    for k in 0..n {
        tr[k * n + k] = ONE;
    }
    for z in t.matvec(&tr) {
        worst = worst.max(z.norm());
    }
    worst
}

#[test]
fn oracle_assemblies_preserve_trace() {
    let (_, op) = assemble_conventional_pm(&(sigma_z() * c(0.5, 0.0)), &sigma_x(), 1.0, 0.3, 0.2, 3).unwrap();
    assert!(trace_defect(&op, 8) < 1e-14);
    let (_, op) = assemble_finite_a(&(sigma_z() * c(0.5, 0.0)), &sigma_x(), 1.0, 0.3, 0.2, 5.0, 2).unwrap();
    assert!(trace_defect(&op, 18) < 1e-13);
    let p = WaveguideParams::resonant_pair(4.0);
    let (space, op) = assemble_case1_lindblad(&p, p.omega_0, 1).unwrap();
    assert!(trace_defect(&op, space.hilbert_dim()) < 1e-12);
}

#[test]
fn zero_coupling_conventional_is_unitary_on_system() {
    let h = sigma_z() * c(0.5, 0.0);
    let (layout, op) = assemble_conventional_pm(&h, &sigma_x(), 1.0, 0.3, 0.0, 2).unwrap();
    let rho = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
    let v = layout.embed_vacuum(&rho).unwrap();
    let d = extract_rho_s(&layout, &op.matvec(&v)).unwrap();
    let expect = (&h * &rho - &rho * &h) * c(0.0, -1.0);
    assert!((d - expect).iter().all(|z| z.norm() < 1e-14));
}

#[test]
fn decoupled_cavity_reduces_to_local_damping() {
    let mut p = WaveguideParams::resonant_pair(4.0);
    p.kappa2 = 0.0;
    let (space, op) = assemble_case1_lindblad(&p, p.omega_0, 1).unwrap();
    // A single photon in cavity 2 only feels intrinsic loss.
    let dim = space.hilbert_dim();
    let c2d = space.cavity[1].adjoint();
    let vac = CMat::from_fn(dim, dim, |i, j| if i == 0 && j == 0 { ONE } else { ZERO });
    let rho = &c2d * vac * c2d.adjoint();
    let d = op.matvec(&crate::linalg::vec_row_major(&rho));
    let n2 = space.cavity[1].adjoint() * &space.cavity[1];
    let rate = expectation_doubled(&space.layout, &d, &n2).unwrap();
    assert!((rate + c(p.kappa_i(1), 0.0)).norm() < 1e-12 * p.kappa_i(1).max(1.0));
}
