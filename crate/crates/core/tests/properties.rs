use num_complex::Complex64;
use proptest::prelude::*;
use purimode_core::corrlib::{
    adjoint_table, eval_decomposition, fit_exponentials, time_reverse_close, CorrelationKey, CorrelationSet, ExpTerm,
};
use purimode_core::dynamics::{integrate_fixed, steady_state, Engine, Propagator, SteadyMethod};
use purimode_core::heom::{enumerate_ados, heom_rhs, AdoIndex, HeomState, TierCap};
use purimode_core::linalg::{c, hermiticity_defect, sigma_minus, sigma_plus, sigma_x, sigma_z, CMat};
use purimode_core::liouville::{assemble_purified_uniform, extract_rho_s, initial_state, trace_functional};
use purimode_core::modelgen::{build_system_model, ModelSpec, SystemSpec};
use purimode_core::oracle::two_excitation_dimension;
use purimode_core::waveguide::{case1_poles, transcendental_F, WaveguideParams};
use std::sync::Arc;

type C = Complex64;

fn term() -> impl Strategy<Value = ExpTerm> {
    (-1.0..1.0f64, -1.0..1.0f64, -3.0..3.0f64, 0.05..2.0f64).prop_map(|(re, im, om, g)| ExpTerm::new(c(re, im), om, g))
}

fn correlation_set() -> impl Strategy<Value = CorrelationSet> {
    (prop::collection::vec(term(), 1..4), prop::collection::vec(term(), 0..3)).prop_map(|(a, b)| {
        let mut set = CorrelationSet::new();
        set.insert(CorrelationKey::positive("A", "Ad"), a);
        if !b.is_empty() {
            set.insert(CorrelationKey::positive("A", "Bd"), b);
        }
        set
    })
}

fn adjoints() -> impl Fn(&str) -> Option<String> {
    adjoint_table(&[("A", "Ad"), ("B", "Bd")])
}

/// Qubit with `H = eps sigma_z / 2`, Hermitian coupling `sigma_x`, closed bath.
fn qubit_model(eps: f64, terms: Vec<ExpTerm>) -> ModelSpec {
    let sys = SystemSpec::new(sigma_z() * c(0.5 * eps, 0.0)).with_coupling("X", sigma_x(), "X");
    let mut set = CorrelationSet::new();
    set.insert(CorrelationKey::positive("X", "X"), terms);
    let set = time_reverse_close(&set, |l| Some(l.to_string())).unwrap();
    let mut m = build_system_model(&set, &sys).unwrap();
    let mut rho = CMat::zeros(2, 2);
    rho[(1, 1)] = c(1.0, 0.0);
    m.set_initial_rho(rho);
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_at_zero_is_weight_sum(terms in prop::collection::vec(term(), 0..6)) {
        let total: C = terms.iter().map(|t| t.w).sum();
        prop_assert_eq!(eval_decomposition(&terms, 0.0).unwrap(), total);
    }

    #[test]
    fn closure_is_idempotent_and_conjugates(set in correlation_set(), t in 0.0..5.0f64) {
        let adj = adjoints();
        let once = time_reverse_close(&set, &adj).unwrap();
        prop_assert_eq!(&time_reverse_close(&once, &adj).unwrap(), &once);
        for (key, _) in set.positive() {
            let partner = CorrelationKey::negative(&adj(&key.b).unwrap(), &adj(&key.a).unwrap());
            let a = once.eval(key, t).unwrap();
            let b = once.eval(&partner, -t).unwrap();
            prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn quadratic_limit_without_delay(re in -3.0..3.0f64, im in -3.0..3.0f64, d1 in 944.0..946.0f64, d2 in 944.0..946.0f64) {
        let p = WaveguideParams::from_wavelengths([d1, d2], [945.0, 945.0], [1000.0, 800.0], 0.0);
        let s = c(re, im);
        let (s1, s2) = case1_poles(&p);
        let quad = (s - s1) * (s - s2);
        prop_assert!((transcendental_F(&p, s) - quad).norm() <= 1e-9 * quad.norm().max(1.0));
    }

    #[test]
    fn half_wavelength_spacing_binds_a_mode(half in 1u32..40) {
        let mut p = WaveguideParams::resonant_pair(0.5 * half as f64);
        p.kappa_i1 = 0.0;
        p.kappa_i2 = 0.0;
        let (s1, s2) = case1_poles(&p);
        prop_assert!(s1.norm().min(s2.norm()) <= 1e-12 * p.kappa1.max(1.0));
    }

    #[test]
    fn every_term_becomes_one_mode(set in correlation_set()) {
        let sys = SystemSpec::new(sigma_z())
            .with_coupling("A", sigma_plus(), "Ad")
            .with_coupling("Ad", sigma_minus(), "A")
            .with_coupling("Bd", sigma_minus(), "B")
            .with_coupling("B", sigma_plus(), "Bd");
        let closed = time_reverse_close(&set, adjoints()).unwrap();
        let a = build_system_model(&closed, &sys).unwrap();
        let b = build_system_model(&closed, &sys).unwrap();
        let nonzero = closed.entries.values().flatten().filter(|t| t.w.norm() > 0.0).count();
        prop_assert_eq!(a.modes.len(), nonzero);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dense_and_tiered_generators_agree(eps in 0.2..2.0f64, terms in prop::collection::vec(term(), 1..3)) {
        let m = qubit_model(eps, terms);
        let level = 2;
        let (layout, op) = assemble_purified_uniform(&m, level, Some(level)).unwrap();
        let index = Arc::new(AdoIndex::for_model(&m, TierCap::total(level)).unwrap());
        let occ = layout.occupations().unwrap();
        let n_occ = occ.len();
        let v: Vec<C> = (0..layout.dim()).map(|k| c((k as f64 * 0.7).cos(), (k as f64 * 0.3).sin())).collect();
        let to_tiered = |x: &[C]| {
            let mut out = vec![c(0.0, 0.0); index.len() * 4];
            for (o, key) in occ.iter().enumerate() {
                let k = index.index_of(key).unwrap();
                for s in 0..4 {
                    out[k * 4 + s] = x[s * n_occ + o];
                }
            }
            out
        };
        let dense = to_tiered(&op.matvec(&v));
        let tiered = heom_rhs(&m, &HeomState { index: index.clone(), d: 2, data: to_tiered(&v) }).unwrap();
        let worst = dense.iter().zip(&tiered.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-10, "worst {}", worst);
    }

    #[test]
    fn generator_conserves_trace_and_hermiticity(eps in 0.2..2.0f64, terms in prop::collection::vec(term(), 1..3)) {
        let m = qubit_model(eps, terms);
        let (layout, op) = assemble_purified_uniform(&m, 2, None).unwrap();
        let (y0, _) = initial_state(&m, &layout).unwrap();
        // The trace functional annihilates the generator, and one small step keeps rho Hermitian.
        let dy = op.matvec(&y0);
        let tr: C = trace_functional(&layout).iter().map(|&(k, w)| w * dy[k]).sum();
        prop_assert!(tr.norm() <= 1e-12);
        let y1: Vec<C> = y0.iter().zip(&dy).map(|(a, b)| a + b * 1e-3).collect();
        prop_assert!(hermiticity_defect(&extract_rho_s(&layout, &y1).unwrap()) <= 1e-12);
    }

    #[test]
    fn ado_count_is_stars_and_bars(p in 0usize..4, q in 0usize..4, l in 0usize..5) {
        let n = p + q + l;
        let expect = (0..l).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
        prop_assert_eq!(enumerate_ados(p, q, l).unwrap().len(), expect);
    }

    #[test]
    fn fixed_step_order_is_five(re in -1.0..-0.1f64, im in -2.0..2.0f64) {
        let z = c(re, im);
        let exact = (z * 2.0).exp();
        let err = |n| (integrate_fixed(|_, y: &[C], o: &mut [C]| o[0] = z * y[0], 0.0, &[c(1.0, 0.0)], 2.0, n)[0] - exact).norm();
        let order = (err(16) / err(32)).log2();
        prop_assert!((4.5..5.6).contains(&order), "order {}", order);
    }

    #[test]
    fn steady_state_methods_agree(pump in 0.05..1.0f64, decay in 0.1..1.0f64) {
        let h = sigma_plus() * sigma_minus() * c(0.3, 0.0);
        let mut m = purimode_core::scenario::single_mode_model(&h, &sigma_plus(), 0.0, 0.5, 0.2).unwrap();
        m.system.add_operator("sp", sigma_plus());
        m.system.add_operator("sm", sigma_minus());
        m.add_lindblad("sp", pump).unwrap();
        m.add_lindblad("sm", decay).unwrap();
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = c(1.0, 0.0);
        m.set_initial_rho(rho);
        let (layout, op) = assemble_purified_uniform(&m, 3, Some(3)).unwrap();
        let (y0, _) = initial_state(&m, &layout).unwrap();
        let tr = trace_functional(&layout);
        let a = steady_state(&op, &tr, &y0, SteadyMethod::NullSpace, 1e-10).unwrap();
        let b = steady_state(&op, &tr, &y0, SteadyMethod::Integrate { t_chunk: 10.0, t_max: 1e5 }, 1e-10).unwrap();
        let (ra, rb) = (extract_rho_s(&layout, &a).unwrap(), extract_rho_s(&layout, &b).unwrap());
        prop_assert!((ra - rb).iter().all(|z| z.norm() <= 1e-8));
    }

    #[test]
    fn fit_recovers_separated_exponentials(
        w1 in 0.2..1.0f64, w2 in 0.2..1.0f64, g1 in 0.1..0.4f64, dg in 0.3..0.8f64, om in -1.5..1.5f64,
    ) {
        let truth = [ExpTerm::new(c(w1, 0.1), om, g1), ExpTerm::new(c(w2, -0.2), om + 1.0, g1 + dg)];
        let samples: Vec<(f64, C)> = (0..400).map(|k| {
            let t = k as f64 * 0.05;
            (t, eval_decomposition(&truth, t).unwrap())
        }).collect();
        let fit = fit_exponentials(&samples, 2, 1e-9).unwrap();
        for t in &truth {
            let m = fit.terms.iter().min_by(|a, b| ((a.omega - t.omega).abs() + (a.gamma - t.gamma).abs())
                .total_cmp(&((b.omega - t.omega).abs() + (b.gamma - t.gamma).abs()))).unwrap();
            prop_assert!((m.omega - t.omega).abs() <= 1e-6 && (m.gamma - t.gamma).abs() <= 1e-6);
            prop_assert!((m.w - t.w).norm() <= 1e-6 * t.w.norm());
        }
        prop_assert!(fit.terms.iter().all(|t| t.gamma >= 0.0));
    }
}

#[test]
fn pair_sector_counts() {
    // Sites = 2 emitters (hard-core) + bosonic modes.
    for sites in [3usize, 10, 50] {
        let bosonic = sites * (sites + 1) / 2;
        assert_eq!(two_excitation_dimension(sites, 2), bosonic - 2);
    }
}

#[test]
fn propagator_engines_agree_on_a_jc_trajectory() {
    let h = sigma_plus() * sigma_minus() * c(0.4, 0.0);
    let mut m = purimode_core::scenario::single_mode_model(&h, &sigma_plus(), 0.1, 0.3, 0.25).unwrap();
    let mut rho = CMat::zeros(2, 2);
    rho[(1, 1)] = c(1.0, 0.0);
    m.set_initial_rho(rho);
    let a = Propagator::new(&m, Engine::Dense { n_max: 1, cap: None }).unwrap();
    let b = Propagator::new(&m, Engine::Tiered { cap: TierCap { total: 2, right: Some(1), left: Some(1) } }).unwrap();
    let opts = purimode_core::dynamics::IntegratorOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
    let run = |p: &Propagator| {
        let mut out = Vec::new();
        purimode_core::dynamics::integrate_observe(p.rhs(), 0.0, p.initial(), &grid, &opts, |_, _, y| {
            out.push(p.rho_s(y)?);
            Ok(())
        })
        .unwrap();
        out
    };
    for (x, y) in run(&a).iter().zip(run(&b)) {
        assert!((x - y).iter().all(|z| z.norm() < 1e-10));
        assert!(hermiticity_defect(x) < 1e-12);
    }
}
