//! Method-of-steps integration of the two-cavity delay equations.

use crate::linalg::{c, ZERO};
use crate::waveguide::WaveguideParams;
use num_complex::Complex64;

/// Amplitudes `eps_n(t)` in the frame rotating at `omega_0`.
///
/// `corr[n][m][k]` is `<c_n(t_k) c_m^dag(0)>` with the `exp(-i omega_0 t)`
/// factor removed.
#[derive(Debug, Clone)]
pub struct DelaySeries {
    pub t: Vec<f64>,
    pub corr: [[Vec<Complex64>; 2]; 2],
}

impl DelaySeries {
    /// Multiplies every sample by `exp(-i omega t)`.
    pub fn with_phase(&self, omega: f64) -> DelaySeries {
        let mut out = self.clone();
        for row in out.corr.iter_mut() {
            for series in row.iter_mut() {
                for (v, &t) in series.iter_mut().zip(&self.t) {
                    *v *= Complex64::from_polar(1.0, -omega * t);
                }
            }
        }
        out
    }

    pub fn samples(&self, n: usize, m: usize) -> Vec<(f64, Complex64)> {
        self.t.iter().copied().zip(self.corr[n][m].iter().copied()).collect()
    }
}

struct Stepper {
    delta: [Complex64; 2],
    cross: Complex64,
}

impl Stepper {
    fn deriv(&self, y: [Complex64; 2], delayed: [Complex64; 2]) -> [Complex64; 2] {
        [
            -self.delta[0] * y[0] + self.cross * delayed[1],
            -self.delta[1] * y[1] + self.cross * delayed[0],
        ]
    }
}

fn hermite(y0: Complex64, d0: Complex64, y1: Complex64, d1: Complex64, h: f64, u: f64) -> Complex64 {
    let u2 = u * u;
    let u3 = u2 * u;
    y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
        + d0 * (h * (u3 - 2.0 * u2 + u))
        + y1 * (-2.0 * u3 + 3.0 * u2)
        + d1 * (h * (u3 - u2))
}

/// Integrates with cavity `init` (0 or 1) initially excited, zero history.
fn integrate_one(p: &WaveguideParams, init: usize, h: f64, steps: usize, lag: usize) -> (Vec<[Complex64; 2]>, Vec<[Complex64; 2]>) {
    let st = Stepper {
        delta: [p.delta(0), p.delta(1)],
        cross: -0.5 * (p.kappa1 * p.kappa2).sqrt() * Complex64::from_polar(1.0, p.theta()),
    };
    let mut ys = Vec::with_capacity(steps + 1);
    let mut ds = Vec::with_capacity(steps + 1);
    let mut y = [ZERO; 2];
    y[init] = c(1.0, 0.0);
    // Delayed values seen on step j at stage fraction u come from interval j - lag.
    let history = |ys: &Vec<[Complex64; 2]>, ds: &Vec<[Complex64; 2]>, j: usize, u: f64, cur: [Complex64; 2]| -> [Complex64; 2] {
        if lag == 0 {
            return cur;
        }
        if j < lag {
            return [ZERO; 2];
        }
        let i = j - lag;
        let (y0, d0) = (ys[i], ds[i]);
        let (y1, d1): ([Complex64; 2], [Complex64; 2]) = if i + 1 < ys.len() {
            (ys[i + 1], ds[i + 1])
        } else {
            unreachable!("lag >= 1 keeps the history interval in the past")
        };
        [hermite(y0[0], d0[0], y1[0], d1[0], h, u), hermite(y0[1], d0[1], y1[1], d1[1], h, u)]
    };
    let d_init = st.deriv(y, if lag == 0 { y } else { [ZERO; 2] });
    ys.push(y);
    ds.push(d_init);
    for j in 0..steps {
        let add = |a: [Complex64; 2], b: [Complex64; 2], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s];
        let k1 = st.deriv(y, history(&ys, &ds, j, 0.0, y));
        let y2 = add(y, k1, 0.5 * h);
        let k2 = st.deriv(y2, history(&ys, &ds, j, 0.5, y2));
        let y3 = add(y, k2, 0.5 * h);
        let k3 = st.deriv(y3, history(&ys, &ds, j, 0.5, y3));
        let y4 = add(y, k3, h);
        let k4 = st.deriv(y4, history(&ys, &ds, j, 1.0, y4));
        for n in 0..2 {
            y[n] += (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]) * (h / 6.0);
        }
        // Derivative at the new grid point, using the right limit of the history.
        let delayed = if lag == 0 {
            y
        } else if j + 1 >= lag {
            ys[j + 1 - lag]
        } else {
            [ZERO; 2]
        };
        ys.push(y);
        ds.push(st.deriv(y, delayed));
    }
    (ys, ds)
}

/// Cavity correlations from the delay equations on the uniform grid
/// `0, dt, ..., n_samples-1`, in the frame rotating at `omega_0`.
pub fn delay_ode_correlations(p: &WaveguideParams, dt: f64, n_samples: usize) -> DelaySeries {
    let t_d = p.t_d();
    let t_max = dt * (n_samples.saturating_sub(1)) as f64;
    let rate = p.max_rate().max(1e-12);
    let h_target = (0.02 / rate).min(dt);
    let (h, lag) = if t_d > 0.0 {
        let lag = ((t_d / h_target).ceil() as usize).max(50);
        (t_d / lag as f64, lag)
    } else {
        (h_target, 0)
    };
    let steps = (t_max / h).ceil() as usize + 1;
    let mut corr: [[Vec<Complex64>; 2]; 2] = Default::default();
    for init in 0..2 {
        let (ys, ds) = integrate_one(p, init, h, steps, lag);
        for k in 0..n_samples {
            let t = k as f64 * dt;
            let x = t / h;
            let i = (x.floor() as usize).min(steps - 1);
            let u = x - i as f64;
            for n in 0..2 {
                let v = hermite(ys[i][n], ds[i][n], ys[i + 1][n], ds[i + 1][n], h, u);
                corr[n][init].push(v);
            }
        }
    }
    DelaySeries { t: (0..n_samples).map(|k| k as f64 * dt).collect(), corr }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_correlation_is_causal() {
        let mut p = WaveguideParams::resonant_pair(40.0);
        p.x_d = 1500.0 * p.lambda_0();
        let t_d = p.t_d();
        let s = delay_ode_correlations(&p, t_d / 64.0, 200);
        for (k, &t) in s.t.iter().enumerate() {
            if t < t_d * (1.0 - 1e-9) {
                assert_eq!(s.corr[1][0][k], ZERO, "t = {t}");
            }
        }
        assert!(s.corr[1][0].last().unwrap().norm() > 1e-3);
    }

    #[test]
    fn single_cavity_decays_exponentially() {
        let mut p = WaveguideParams::resonant_pair(4.0);
        p.kappa2 = 0.0;
        let s = delay_ode_correlations(&p, 0.01, 300);
        for (k, &t) in s.t.iter().enumerate() {
            let expected = (-p.delta(0) * t).exp();
            assert!((s.corr[0][0][k] - expected).norm() < 1e-9);
        }
    }
}
