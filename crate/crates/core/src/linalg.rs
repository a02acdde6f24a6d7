//! Small dense helpers on top of `nalgebra` for system-sized operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product of a list of operators, left to right.
pub fn kron_all(ops: &[CMat]) -> CMat {
    let mut acc = CMat::identity(1, 1);
    for op in ops {
        acc = acc.kronecker(op);
    }
    acc
}

/// Bosonic annihilation operator truncated to `n_max` quanta.
pub fn destroy(n_max: usize) -> CMat {
    let d = n_max + 1;
    let mut a = CMat::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// Two-level lowering operator |g><e| in the basis (g, e).
pub fn sigma_minus() -> CMat {
    let mut s = CMat::zeros(2, 2);
    s[(0, 1)] = ONE;
    s
}

pub fn sigma_plus() -> CMat {
    sigma_minus().adjoint()
}

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(-1.0, 0.0), ZERO, ZERO, ONE])
}

/// Embeds `op` at position `site` of a product space with the given local dimensions.
pub fn embed(op: &CMat, site: usize, dims: &[usize]) -> CMat {
    let ops: Vec<CMat> = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| if i == site { op.clone() } else { identity(d) })
        .collect();
    kron_all(&ops)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

/// Row-major flattening used for every vectorized density matrix in this crate.
pub fn vec_row_major(m: &CMat) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn unvec_row_major(v: &[Complex64], rows: usize, cols: usize) -> CMat {
    CMat::from_row_slice(rows, cols, v)
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_commutator_below_truncation() {
        let a = destroy(4);
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for n in 0..4 {
            assert!((comm[(n, n)] - ONE).norm() < 1e-14);
        }
    }

    #[test]
    fn vec_roundtrip() {
        let m = CMat::from_fn(2, 3, |i, j| c(i as f64, j as f64));
        let v = vec_row_major(&m);
        assert_eq!(v[1], c(0.0, 1.0));
        assert_eq!(unvec_row_major(&v, 2, 3), m);
    }
}
