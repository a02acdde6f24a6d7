//! Exponential-sum representations of bath correlation functions.
//!
//! A positive-time entry for the pair `(A, B)` stores
//! `<A(t) B(0)> = sum_s w_s exp(-(i Omega_s + Gamma_s) t)` for `t >= 0`.
//! A negative-time entry stores the same kind of terms but is evaluated as
//! `sum_s w_s exp(-(i Omega_s - Gamma_s) t)` for `t <= 0`.

mod fit;

pub use fit::{fit_exponentials, fit_exponentials_with, FitOptions, FitResult};

use crate::csvio::Table;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// One term `w exp(-(i omega + gamma) t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub w: Complex64,
    pub omega: f64,
    pub gamma: f64,
}

impl ExpTerm {
    pub fn new(w: Complex64, omega: f64, gamma: f64) -> Self {
        Self { w, omega, gamma }
    }

    /// Complex exponent `-(i omega + gamma)`, i.e. the pole `s` of the term.
    pub fn rate(&self) -> Complex64 {
        Complex64::new(-self.gamma, -self.omega)
    }

    pub fn from_pole(w: Complex64, s: Complex64) -> Self {
        Self { w, omega: -s.im, gamma: -s.re }
    }

    pub fn is_valid(&self) -> bool {
        self.w.re.is_finite()
            && self.w.im.is_finite()
            && self.omega.is_finite()
            && self.gamma.is_finite()
            && self.gamma >= 0.0
    }

    #[inline]
    pub fn eval_unchecked(&self, t: f64) -> Complex64 {
        self.w * (self.rate() * t).exp()
    }
}

/// `sum_s w_s exp(-(i Omega_s + Gamma_s) t)`, defined for `t >= 0` only.
pub fn eval_decomposition(terms: &[ExpTerm], t: f64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "decomposition evaluated at t = {t}; negative times go through the time-reversed entry"
        )));
    }
    Ok(terms.iter().map(|term| term.eval_unchecked(t)).sum())
}

/// Max deviation between `terms` and the sampled values.
pub fn reconstruction_error(terms: &[ExpTerm], samples: &[(f64, Complex64)]) -> f64 {
    samples
        .iter()
        .map(|&(t, y)| {
            let model: Complex64 = terms.iter().map(|term| term.eval_unchecked(t)).sum();
            (model - y).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeSign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CorrelationKey {
    pub a: String,
    pub b: String,
    pub sign: TimeSign,
}

impl CorrelationKey {
    pub fn positive(a: &str, b: &str) -> Self {
        Self { a: a.into(), b: b.into(), sign: TimeSign::Positive }
    }

    pub fn negative(a: &str, b: &str) -> Self {
        Self { a: a.into(), b: b.into(), sign: TimeSign::Negative }
    }
}

impl fmt::Display for CorrelationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            TimeSign::Positive => "+",
            TimeSign::Negative => "-",
        };
        write!(f, "<{}{}{}>", self.a, s, self.b)
    }
}

/// All pairwise correlations of a bath, keyed by operator pair and time sign.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet {
    pub entries: BTreeMap<CorrelationKey, Vec<ExpTerm>>,
}

impl CorrelationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: CorrelationKey, terms: Vec<ExpTerm>) {
        self.entries.insert(key, terms);
    }

    pub fn get(&self, key: &CorrelationKey) -> Option<&[ExpTerm]> {
        self.entries.get(key).map(|v| v.as_slice())
    }

    pub fn positive(&self) -> impl Iterator<Item = (&CorrelationKey, &Vec<ExpTerm>)> {
        self.entries.iter().filter(|(k, _)| k.sign == TimeSign::Positive)
    }

    pub fn negative(&self) -> impl Iterator<Item = (&CorrelationKey, &Vec<ExpTerm>)> {
        self.entries.iter().filter(|(k, _)| k.sign == TimeSign::Negative)
    }

    pub fn term_count(&self) -> usize {
        self.entries.values().map(|v| v.len()).sum()
    }

    /// Evaluates an entry on its own half-line (`t >= 0` for positive, `t <= 0` for negative).
    pub fn eval(&self, key: &CorrelationKey, t: f64) -> Result<Complex64> {
        let terms = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("no correlation entry {key}")))?;
        match key.sign {
            TimeSign::Positive => eval_decomposition(terms, t),
            TimeSign::Negative => {
                if !(t <= 0.0) {
                    return Err(Error::Domain(format!("negative-time entry {key} at t = {t}")));
                }
                Ok(terms
                    .iter()
                    .map(|s| s.w * (Complex64::new(s.gamma, -s.omega) * t).exp())
                    .sum())
            }
        }
    }

    /// Builds correlations for new labels defined as `factor * base_label`.
    ///
    /// Every pair of new labels whose base pair has an entry gets the entry
    /// scaled by the product of factors. Zero factors drop the entry.
    pub fn linear_map(&self, defs: &[(&str, &str, Complex64)]) -> CorrelationSet {
        let mut out = CorrelationSet::new();
        for &(na, ba, fa) in defs {
            for &(nb, bb, fb) in defs {
                for sign in [TimeSign::Positive, TimeSign::Negative] {
                    let base = CorrelationKey { a: ba.into(), b: bb.into(), sign };
                    let scale = fa * fb;
                    if scale.norm() == 0.0 {
                        continue;
                    }
                    if let Some(terms) = self.get(&base) {
                        let scaled = terms
                            .iter()
                            .map(|t| ExpTerm { w: t.w * scale, ..*t })
                            .collect();
                        out.insert(CorrelationKey { a: na.into(), b: nb.into(), sign }, scaled);
                    }
                }
            }
        }
        out
    }

    /// Terms-per-entry CSV files into `dir`, one per key, plus an index.
    pub fn write_dir(&self, dir: impl AsRef<Path>, meta: &[(String, String)]) -> Result<Vec<String>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut names = Vec::new();
        for (key, terms) in &self.entries {
            let sign = match key.sign {
                TimeSign::Positive => "pos",
                TimeSign::Negative => "neg",
            };
            let name = format!("terms_{}_{}_{}.csv", key.a, key.b, sign);
            let mut table = terms_table(terms);
            table.meta.extend(meta.iter().cloned());
            table.meta.push(("key".into(), key.to_string()));
            table.write(dir.join(&name))?;
            names.push(name);
        }
        Ok(names)
    }
}

/// Adds the negative-time entry `(adj(B), adj(A))` with conjugated weights
/// for every positive-time entry `(A, B)`.
pub fn time_reverse_close<F>(set: &CorrelationSet, adjoint: F) -> Result<CorrelationSet>
where
    F: Fn(&str) -> Option<String>,
{
    let mut out = set.clone();
    for (key, terms) in set.positive() {
        let adj_a = adjoint(&key.a)
            .ok_or_else(|| Error::Config(format!("no adjoint declared for '{}'", key.a)))?;
        let adj_b = adjoint(&key.b)
            .ok_or_else(|| Error::Config(format!("no adjoint declared for '{}'", key.b)))?;
        let reversed: Vec<ExpTerm> =
            terms.iter().map(|t| ExpTerm { w: t.w.conj(), ..*t }).collect();
        out.insert(CorrelationKey { a: adj_b, b: adj_a, sign: TimeSign::Negative }, reversed);
    }
    Ok(out)
}

/// Adjoint lookup from a list of `(label, adjoint)` pairs, used in both directions.
pub fn adjoint_table(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for &(a, b) in pairs {
        map.insert(a.into(), b.into());
        map.insert(b.into(), a.into());
    }
    move |l: &str| map.get(l).cloned()
}

pub fn samples_table(samples: &[(f64, Complex64)]) -> Table {
    let mut t = Table::new(&["t", "re", "im"]);
    for &(time, v) in samples {
        t.push(vec![time, v.re, v.im]);
    }
    t
}

pub fn samples_from_table(table: &Table) -> Result<Vec<(f64, Complex64)>> {
    let (t, re, im) = match (table.column("t"), table.column("re"), table.column("im")) {
        (Some(t), Some(re), Some(im)) => (t, re, im),
        _ => return Err(Error::Parse("sample table needs columns t,re,im".into())),
    };
    Ok(t.into_iter()
        .zip(re.into_iter().zip(im))
        .map(|(t, (re, im))| (t, Complex64::new(re, im)))
        .collect())
}

pub fn terms_table(terms: &[ExpTerm]) -> Table {
    let mut t = Table::new(&["re_w", "im_w", "omega", "gamma"]);
    for term in terms {
        t.push(vec![term.w.re, term.w.im, term.omega, term.gamma]);
    }
    t
}

pub fn terms_from_table(table: &Table) -> Result<Vec<ExpTerm>> {
    let cols: Option<Vec<Vec<f64>>> = ["re_w", "im_w", "omega", "gamma"]
        .iter()
        .map(|c| table.column(c))
        .collect();
    let cols = cols.ok_or_else(|| Error::Parse("term table needs columns re_w,im_w,omega,gamma".into()))?;
    Ok((0..table.rows.len())
        .map(|i| ExpTerm::new(Complex64::new(cols[0][i], cols[1][i]), cols[2][i], cols[3][i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn sum_of_weights_at_origin() {
        let terms = [ExpTerm::new(c(1.0, 0.0), 0.0, 1.0)];
        assert_eq!(eval_decomposition(&terms, 0.0).unwrap(), c(1.0, 0.0));
        let terms = [ExpTerm::new(c(0.3, -2.0), 5.0, 1.0), ExpTerm::new(c(-0.1, 0.7), -1.0, 0.2)];
        assert_eq!(eval_decomposition(&terms, 0.0).unwrap(), c(0.3 - 0.1, -2.0 + 0.7));
    }

    #[test]
    fn single_term_is_damped_oscillation() {
        let (lam, om, ga, t) = (0.2_f64, 1.3, 0.4, 2.7);
        let terms = [ExpTerm::new(c(lam * lam, 0.0), om, ga)];
        let expected = lam * lam * c(-ga * t, -om * t).exp();
        assert!((eval_decomposition(&terms, t).unwrap() - expected).norm() < 1e-16);
    }

    #[test]
    fn negative_time_rejected() {
        assert!(matches!(eval_decomposition(&[], -1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn closure_of_real_even_correlation() {
        let mut set = CorrelationSet::new();
        set.insert(CorrelationKey::positive("X", "X"), vec![ExpTerm::new(c(0.5, 0.0), 0.0, 1.0)]);
        let closed = time_reverse_close(&set, |l| Some(l.to_string())).unwrap();
        let neg = closed.get(&CorrelationKey::negative("X", "X")).unwrap();
        assert_eq!(neg, set.get(&CorrelationKey::positive("X", "X")).unwrap());
        for t in [0.0, 0.5, 3.0] {
            let a = closed.eval(&CorrelationKey::positive("X", "X"), t).unwrap();
            let b = closed.eval(&CorrelationKey::negative("X", "X"), -t).unwrap();
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn closure_conjugates_weights() {
        let mut set = CorrelationSet::new();
        set.insert(CorrelationKey::positive("A", "B"), vec![ExpTerm::new(c(0.0, 1.0), 2.0, 0.5)]);
        let adj = adjoint_table(&[("A", "Ad"), ("B", "Bd")]);
        let closed = time_reverse_close(&set, adj).unwrap();
        let neg = closed.get(&CorrelationKey::negative("Bd", "Ad")).unwrap();
        assert_eq!(neg, &[ExpTerm::new(c(0.0, -1.0), 2.0, 0.5)]);
    }

    #[test]
    fn closure_needs_adjoints() {
        let mut set = CorrelationSet::new();
        set.insert(CorrelationKey::positive("A", "B"), vec![]);
        assert!(matches!(time_reverse_close(&set, |_| None), Err(Error::Config(_))));
    }

    #[test]
    fn reconstruction_error_cases() {
        let terms = vec![ExpTerm::new(c(1.0, 0.5), 0.7, 0.3)];
        let samples: Vec<_> = (0..50)
            .map(|k| {
                let t = 0.1 * k as f64;
                (t, eval_decomposition(&terms, t).unwrap())
            })
            .collect();
        assert!(reconstruction_error(&terms, &samples) < 1e-14);

        let zeros: Vec<_> = (0..10).map(|k| (k as f64, c(0.0, 0.0))).collect();
        assert_eq!(reconstruction_error(&[], &zeros), 0.0);

        // A weight error of 1e-3 shows up scaled by max |exp(-(i omega + gamma) t)| = 1.
        let perturbed = vec![ExpTerm { w: terms[0].w + 1e-3, ..terms[0] }];
        let err = reconstruction_error(&perturbed, &samples);
        let bound = 1e-3 * samples.iter().map(|&(t, _)| (-0.3 * t).exp()).fold(0.0, f64::max);
        assert!(err <= 2.0 * bound && err >= 0.5 * bound, "err {err} bound {bound}");
    }

    #[test]
    fn csv_roundtrip_of_terms() {
        let terms = vec![ExpTerm::new(c(1.0, -0.25), 3.5, 0.125)];
        let table = Table::parse(&terms_table(&terms).to_csv_string()).unwrap();
        assert_eq!(terms_from_table(&table).unwrap(), terms);
    }
}
