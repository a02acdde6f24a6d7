use super::*;
use crate::corrlib::{time_reverse_close, CorrelationKey, CorrelationSet, ExpTerm};
use crate::linalg::{c, sigma_x, sigma_z, ONE, ZERO};
use crate::liouville::assemble_purified_uniform;
use crate::modelgen::{build_system_model, Side, SuperTerm, SystemSpec, Timing};

fn model(terms: Vec<ExpTerm>) -> ModelSpec {
    let sys = SystemSpec::new(sigma_z() * c(0.5, 0.0)).with_coupling("X", sigma_x(), "X");
    let mut set = CorrelationSet::new();
    set.insert(CorrelationKey::positive("X", "X"), terms);
    let set = time_reverse_close(&set, |l| Some(l.to_string())).unwrap();
    build_system_model(&set, &sys).unwrap()
}

fn two_exp() -> ModelSpec {
    model(vec![ExpTerm::new(c(0.04, 0.0), 1.0, 0.3), ExpTerm::new(c(0.01, 0.02), -0.5, 0.8)])
}

#[test]
fn ado_counts() {
    assert_eq!(enumerate_ados(3, 2, 0).unwrap().len(), 1);
    assert_eq!(enumerate_ados(3, 2, 1).unwrap().len(), 6);
    assert_eq!(enumerate_ados(2, 2, 2).unwrap().len(), 15);
    let keys = enumerate_ados(2, 1, 3).unwrap();
    assert!(keys.windows(2).all(|w| w[0].tier() <= w[1].tier()));
    assert_eq!(keys[0], AdoKey { m: vec![0, 0], n: vec![0] });
}

#[test]
fn side_caps_restrict_keys() {
    let ch = [Chirality::Right, Chirality::Right, Chirality::Left];
    let idx = AdoIndex::new(&ch, TierCap { total: 2, right: Some(1), left: Some(1) }).unwrap();
    // 1 + 3 + (two right modes x one left) = 6
    assert_eq!(idx.len(), 6);
}

fn dense_to_heom(layout: &crate::liouville::SpaceLayout, index: &AdoIndex, v: &[C], d: usize) -> Vec<C> {
    let occ = layout.occupations().unwrap();
    let n_occ = occ.len();
    let mut out = vec![ZERO; index.len() * d * d];
    for (o, key) in occ.iter().enumerate() {
        let k = index.index_of(key).unwrap();
        for s in 0..d * d {
            out[k * d * d + s] = v[s * n_occ + o];
        }
    }
    out
}

#[test]
fn rhs_matches_dense_assembly() {
    let m = two_exp();
    let (layout, op) = assemble_purified_uniform(&m, 4, Some(4)).unwrap();
    let index = Arc::new(AdoIndex::for_model(&m, TierCap::total(4)).unwrap());
    assert_eq!(layout.n_occ(), index.len());
    let v: Vec<C> = (0..layout.dim()).map(|k| c((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
    let dense = dense_to_heom(&layout, &index, &op.matvec(&v), 2);
    let state = HeomState { index: index.clone(), d: 2, data: dense_to_heom(&layout, &index, &v, 2) };
    let tiered = heom_rhs(&m, &state).unwrap();
    let worst = crate::linalg::max_abs_diff(&dense, &tiered.data);
    assert!(worst < 1e-12, "max deviation {worst}");
}

#[test]
fn tier_one_rates_follow_free_pole_pattern() {
    let m = model(vec![ExpTerm::new(c(0.04, 0.0), 1.0, 0.3)]);
    let index = Arc::new(AdoIndex::for_model(&m, TierCap::total(1)).unwrap());
    let rho = CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.1, 0.1), c(0.1, -0.1), c(0.8, 0.0)]);
    let out = heom_rhs(&m, &HeomState::from_rho(index.clone(), &rho)).unwrap();
    let s = sigma_x();
    let sqrt_w = 0.2;
    let r = index.index_of(&[1, 0]).unwrap();
    let l = index.index_of(&[0, 1]).unwrap();
    // d rho_{1,0}/dt = -i sqrt(w) S rho, d rho_{0,1}/dt = +i sqrt(w) rho S at tier 0 input.
    let er = &s * &rho * c(0.0, -sqrt_w);
    let el = &rho * &s * c(0.0, sqrt_w);
    assert!((out.ado(r) - er).iter().all(|z| z.norm() < 1e-15));
    assert!((out.ado(l) - el).iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn zero_coupling_keeps_only_free_terms() {
    let m = model(vec![ExpTerm::new(ZERO, 1.0, 0.3)]);
    assert!(m.modes.is_empty());
    let index = Arc::new(AdoIndex::for_model(&m, TierCap::total(3)).unwrap());
    assert_eq!(index.len(), 1);
    let rho = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
    let out = heom_rhs(&m, &HeomState::from_rho(index, &rho)).unwrap();
    let h = sigma_z() * c(0.5, 0.0);
    let expect = (&h * &rho - &rho * &h) * c(0.0, -1.0);
    assert!((out.rho_s() - expect).iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn multi_ladder_term_is_unsupported() {
    let mut m = two_exp();
    m.generator.push(SuperTerm::new(ONE, vec![Factor::lower(0), Factor::lower(1)], vec![]));
    let index = Arc::new(AdoIndex::for_model(&m, TierCap::total(2)).unwrap());
    assert!(matches!(HeomOperator::generator(&m, index), Err(Error::UnsupportedTerm(_))));
}

#[test]
fn lowering_insertion_kills_tier_zero() {
    let m = two_exp();
    let index = Arc::new(AdoIndex::for_model(&m, TierCap::total(2)).unwrap());
    let ins = crate::modelgen::FieldInsertion {
        field: "phi".into(),
        side: Side::Left,
        timing: Timing::Output,
        terms: vec![SuperTerm::new(ONE, vec![Factor::lower(0)], vec![])],
    };
    let rho = CMat::identity(2, 2) * c(0.5, 0.0);
    let out = heom_apply_insertion(&m, &HeomState::from_rho(index, &rho), &ins).unwrap();
    assert!(out.data.iter().all(|z| *z == ZERO));
}

#[test]
fn conjugation_symmetry_holds_for_rhs() {
    let m = two_exp();
    let partners = conjugate_partners(&m).unwrap();
    let index = Arc::new(AdoIndex::for_model(&m, TierCap::total(3)).unwrap());
    let rho = CMat::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.7, 0.0)]);
    let op = HeomOperator::generator(&m, index.clone()).unwrap();
    let mut s = HeomState::from_rho(index, &rho);
    for _ in 0..3 {
        s = op.apply_state(&s).unwrap();
        assert!(conjugation_defect(&s, &partners) < 1e-14);
    }
}

#[test]
fn single_level_report_has_no_deviation() {
    let r = tier_convergence(&[0], 1e-12, |_| Ok(vec![1.0])).unwrap();
    assert!(r.deviations.is_empty() && r.converged);
    let r = tier_convergence(&[1, 2], 1e-12, |l| Ok(vec![l as f64])).unwrap();
    assert!(!r.converged);
}
