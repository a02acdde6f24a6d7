use super::*;
use crate::linalg::{c, sigma_minus, sigma_plus, sigma_z, vec_row_major, CMat, ONE, ZERO};
use crate::liouville::lindblad_superop;

fn plus_state() -> CMat {
    CMat::from_element(2, 2, c(0.5, 0.0))
}

#[test]
fn unitary_precession_matches_analytic() {
    let op = lindblad_superop(&sigma_z(), &[]).unwrap();
    let y0 = vec_row_major(&plus_state());
    let mut end = vec![];
    let opts = IntegratorOptions { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    integrate_observe(sparse_rhs(&op), 0.0, &y0, &[1.0], &opts, |_, _, y| {
        end = y.to_vec();
        Ok(())
    })
    .unwrap();
    // sigma_z = diag(-1, 1): rho_01 picks up e^{-i(-1 - 1)t}.
    let expect = c(0.5, 0.0) * C::from_polar(1.0, 2.0);
    assert!((end[1] - expect).norm() < 1e-9);
    assert!((end[2] - expect.conj()).norm() < 1e-9);
}

#[test]
fn fixed_step_order_is_five() {
    let op = lindblad_superop(&(sigma_z() * c(1.3, 0.0)), &[(sigma_minus(), 0.4)]).unwrap();
    let y0 = vec_row_major(&plus_state());
    let exact = integrate_fixed(sparse_rhs(&op), 0.0, &y0, 2.0, 4096);
    let err = |n: usize| crate::linalg::max_abs_diff(&integrate_fixed(sparse_rhs(&op), 0.0, &y0, 2.0, n), &exact);
    let (e1, e2) = (err(20), err(40));
    let order = (e1 / e2).log2();
    assert!((order - 5.0).abs() < 0.4, "observed order {order}");
}

#[test]
fn adaptive_tolerance_controls_error() {
    let op = lindblad_superop(&(sigma_z() * c(2.0, 0.0)), &[(sigma_minus(), 0.3)]).unwrap();
    let y0 = vec_row_major(&plus_state());
    let exact = integrate_fixed(sparse_rhs(&op), 0.0, &y0, 5.0, 20000);
    let run = |rtol: f64| {
        let opts = IntegratorOptions { rtol, atol: rtol * 1e-2, ..Default::default() };
        let mut end = vec![];
        integrate_observe(sparse_rhs(&op), 0.0, &y0, &[5.0], &opts, |_, _, y| {
            end = y.to_vec();
            Ok(())
        })
        .unwrap();
        crate::linalg::max_abs_diff(&end, &exact)
    };
    assert!(run(1e-6) < 1e-4);
    assert!(run(1e-10) < 1e-8);
}

#[test]
fn dense_output_matches_step_endpoints() {
    let op = lindblad_superop(&sigma_z(), &[(sigma_minus(), 0.5)]).unwrap();
    let y0 = vec_row_major(&plus_state());
    let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
    let traj = integrate(
        sparse_rhs(&op),
        &y0,
        &grid,
        &IntegratorOptions::default(),
        &[("p".to_string(), Box::new(|y: &[C]| Ok(y[3])) as Observable)],
        false,
    )
    .unwrap();
    for (t, p) in grid.iter().zip(traj.observable("p").unwrap()) {
        assert!((p.re - 0.5 * (-0.5 * t).exp()).abs() < 1e-8);
    }
}

#[test]
fn stiff_problem_reports_time() {
    let rhs = |_: f64, y: &[C], out: &mut [C]| {
        out[0] = y[0] * y[0] * 1e3;
    };
    let r = integrate_observe(rhs, 0.0, &[ONE], &[1.0], &IntegratorOptions::default(), |_, _, _| Ok(()));
    assert!(matches!(r, Err(Error::Stiffness { .. }) | Err(Error::NoConvergence(_))));
}

fn pumped_qubit(gp: f64, g: f64) -> SparseSuperOp {
    lindblad_superop(&(sigma_z() * c(0.3, 0.0)), &[(sigma_plus(), gp), (sigma_minus(), g)]).unwrap()
}

#[test]
fn pumped_qubit_detailed_balance() {
    let (gp, g) = (0.2, 0.7);
    let op = pumped_qubit(gp, g);
    let tr = [(0usize, ONE), (3, ONE)];
    let y = steady_state(&op, &tr, &[], SteadyMethod::NullSpace, 1e-10).unwrap();
    assert!((y[3].re - gp / (gp + g)).abs() < 1e-12);
    assert!(residual(&op, &y) <= 1e-10);
    let y0 = vec![ONE, ZERO, ZERO, ZERO];
    let z = steady_state(&op, &tr, &y0, SteadyMethod::Integrate { t_chunk: 20.0, t_max: 1e4 }, 1e-10).unwrap();
    assert!(crate::linalg::max_abs_diff(&y, &z) < 1e-8);
}

#[test]
fn damped_mode_correlation_is_exponential() {
    // Single pumped bosonic mode: <a^dag(tau) a> decays with the generator eigenvalue.
    let n = 6;
    let a = crate::linalg::destroy(n);
    let w = 0.8;
    let (kappa, pump) = (1.0, 0.05);
    let h = a.adjoint() * &a * c(w, 0.0);
    let op = lindblad_superop(&h, &[(a.clone(), kappa), (a.adjoint(), pump)]).unwrap();
    let dim = n + 1;
    let tr: Vec<(usize, C)> = (0..dim).map(|k| (k * dim + k, ONE)).collect();
    let ss = steady_state(&op, &tr, &[], SteadyMethod::NullSpace, 1e-10).unwrap();
    let rho = CMat::from_row_slice(dim, dim, &ss);
    let y_b = vec_row_major(&(&a * &rho));
    let taus: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
    let ad = a.adjoint();
    let corr = two_time_correlation(sparse_rhs(&op), &y_b, &taus, &IntegratorOptions::default(), |y| {
        Ok((&ad * CMat::from_row_slice(dim, dim, y)).trace())
    })
    .unwrap();
    let n_ss = (&ad * &a * &rho).trace();
    assert!((corr[0] - n_ss).norm() < 1e-10);
    let rate = c(-(kappa - pump) / 2.0, w);
    for (t, z) in taus.iter().zip(&corr) {
        assert!((z - n_ss * (rate * t).exp()).norm() < 1e-6 * n_ss.norm());
    }
}

#[test]
fn lorentzian_peak_and_width() {
    let (w0, g) = (1.5, 0.1);
    let dt = 0.05;
    let series: Vec<C> = (0..4000).map(|k| (c(-g, w0) * (k as f64 * dt)).exp()).collect();
    let (omega, s) = spectrum(&series, dt, &SpectrumOptions::default());
    let (imax, smax) = s.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let res = omega[1] - omega[0];
    assert!((omega[imax] - w0).abs() <= res);
    let above: Vec<f64> = omega.iter().zip(&s).filter(|(_, &v)| v >= 0.5 * smax).map(|(&w, _)| w).collect();
    let half_width = 0.5 * (above.last().unwrap() - above[0]);
    assert!((half_width - g).abs() <= 2.0 * res);
}

#[test]
fn transform_satisfies_parseval() {
    let dt = 0.1;
    let series: Vec<C> = (0..500).map(|k| (c(-0.05, 0.7) * (k as f64 * dt)).exp() * c(1.0, 0.3)).collect();
    let opts = SpectrumOptions::default();
    let (omega, x) = one_sided_transform(&series, dt, &opts);
    let dw = omega[1] - omega[0];
    let lhs: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>() * dw / (2.0 * std::f64::consts::PI);
    let rhs: f64 = series
        .iter()
        .enumerate()
        .map(|(k, z)| (z * if k == 0 { 0.5 } else { 1.0 }).norm_sqr())
        .sum::<f64>()
        * dt;
    assert!((lhs - rhs).abs() <= 1e-6 * rhs);
}

#[test]
fn real_positive_correlation_gives_real_spectrum() {
    let series: Vec<C> = (0..256).map(|k| c((-0.1 * k as f64).exp(), 0.0)).collect();
    let (_, s) = spectrum(&series, 0.1, &SpectrumOptions::default());
    assert!(s.iter().all(|v| v.is_finite()));
}

#[test]
fn fringe_contrast_of_a_split_line() {
    let omega: Vec<f64> = (0..801).map(|k| -2.0 + k as f64 * 0.005).collect();
    let lor = |w: f64, w0: f64, g: f64| g * g / ((w - w0).powi(2) + g * g);
    let doublet: Vec<f64> = omega.iter().map(|&w| lor(w, -0.3, 0.1) + lor(w, 0.3, 0.1)).collect();
    let single: Vec<f64> = omega.iter().map(|&w| lor(w, 0.0, 0.5)).collect();
    // Minimum at 0 is 2 g^2 / (0.09 + g^2) = 0.2; flanks are about 1.1.
    let k = fringe_contrast(&omega, &doublet, 0.0, 0.5).unwrap();
    assert!((k - (1.0 - 0.2 / doublet[400..].iter().copied().fold(0.0, f64::max))).abs() < 1e-12);
    assert!(fringe_contrast(&omega, &single, 0.0, 0.5).is_none());
}

mod engine {
    use super::*;
    use crate::heom::TierCap;
    use crate::scenario::single_mode_model;

    /// Damped qubit coupled to one lossy mode, pumped incoherently.
    fn pumped_model(pump: f64) -> crate::modelgen::ModelSpec {
        let h = sigma_plus() * sigma_minus() * c(0.2, 0.0);
        let mut m = single_mode_model(&h, &sigma_plus(), 0.0, 0.5, 0.3).unwrap();
        m.system.add_operator("sp", sigma_plus());
        m.add_lindblad("sp", pump).unwrap();
        let mut rho = CMat::zeros(2, 2);
        rho[(0, 0)] = ONE;
        m.set_initial_rho(rho);
        m
    }

    #[test]
    fn dense_and_tiered_steady_states_agree() {
        let m = pumped_model(0.1);
        let dense = Propagator::new(&m, Engine::Dense { n_max: 3, cap: Some(3) }).unwrap();
        let tiered = Propagator::new(&m, Engine::Tiered { cap: TierCap::total(3) }).unwrap();
        let a = dense.rho_s(&dense.steady_state(1e-11).unwrap()).unwrap();
        let b = tiered.rho_s(&tiered.steady_state(1e-11).unwrap()).unwrap();
        assert!((a.clone() - b).iter().all(|z| z.norm() < 1e-8));
        assert!((a.trace() - ONE).norm() < 1e-12);
        let mut r = vec![ZERO; dense.dim()];
        let ss = dense.steady_state(1e-11).unwrap();
        dense.apply(&ss, &mut r);
        assert!(norm2(&r) <= 1e-10 * norm2(&ss));
    }

    #[test]
    fn two_time_at_zero_delay_is_the_one_time_average() {
        let m = pumped_model(0.2);
        let p = Propagator::new(&m, Engine::Tiered { cap: TierCap::total(3) }).unwrap();
        let ss = p.steady_state(1e-11).unwrap();
        let sm = sigma_minus();
        let n = sigma_plus() * &sm;
        let y_b = p.system_left(&sm, &ss).unwrap();
        let opts = IntegratorOptions::default();
        let g = two_time_correlation(p.rhs(), &y_b, &[0.0, 1.0], &opts, |y| {
            Ok((0..2).map(|i| p.system_left(&sigma_plus(), y).map(|v| p.rho_s(&v).unwrap()[(i, i)])).sum::<Result<C>>()?)
        })
        .unwrap();
        let pe = (n * p.rho_s(&ss).unwrap()).trace();
        assert!((g[0] - pe).norm() < 1e-12);
        assert!(g[1].norm() < g[0].norm());
    }
}
