//! Construction of purified pseudomode models from correlation sets.
//!
//! Generator terms follow `i d(rho)/dt = sum coeff * L rho R`. Right-chirality
//! modes act from the left of the state, left-chirality modes from the right.

mod matrix_doc;

use crate::corrlib::{CorrelationKey, CorrelationSet, ExpTerm, TimeSign};
use crate::error::{Error, Result};
use crate::linalg::{dagger, hermiticity_defect, CMat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Label of the system Hamiltonian inside generator terms.
pub const H_S: &str = "H_S";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub label: String,
    #[serde(with = "matrix_doc")]
    pub s: CMat,
    pub adjoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub label: String,
    /// `phi = factor * X` for the named coupling label.
    pub proportional: Option<(String, Complex64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub dim: usize,
    #[serde(with = "matrix_doc")]
    pub h_s: CMat,
    pub couplings: Vec<Coupling>,
    pub fields: Vec<FieldDecl>,
    /// Extra named system operators (pump jump operators and their products).
    #[serde(with = "matrix_doc::named")]
    pub operators: Vec<(String, CMat)>,
}

impl SystemSpec {
    pub fn new(h_s: CMat) -> Self {
        Self { dim: h_s.nrows(), h_s, couplings: Vec::new(), fields: Vec::new(), operators: Vec::new() }
    }

    pub fn with_coupling(mut self, label: &str, s: CMat, adjoint: &str) -> Self {
        self.couplings.push(Coupling { label: label.into(), s, adjoint: adjoint.into() });
        self
    }

    pub fn with_field(mut self, label: &str, proportional: Option<(&str, Complex64)>) -> Self {
        self.fields.push(FieldDecl { label: label.into(), proportional: proportional.map(|(x, f)| (x.into(), f)) });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_s.nrows() != self.dim || self.h_s.ncols() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: self.h_s.nrows() });
        }
        if hermiticity_defect(&self.h_s) > 1e-12 {
            return Err(Error::Config("H_S is not Hermitian".into()));
        }
        for c in &self.couplings {
            if c.s.nrows() != self.dim || c.s.ncols() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: c.s.nrows() });
            }
            if self.coupling(&c.adjoint).is_none() {
                return Err(Error::Config(format!("adjoint label '{}' of '{}' is not a coupling", c.adjoint, c.label)));
            }
        }
        for f in &self.fields {
            if let Some((x, _)) = &f.proportional {
                if self.coupling(x).is_none() {
                    return Err(Error::Config(format!("field '{}' is proportional to unknown coupling '{x}'", f.label)));
                }
            }
        }
        Ok(())
    }

    pub fn coupling(&self, label: &str) -> Option<&Coupling> {
        self.couplings.iter().find(|c| c.label == label)
    }

    pub fn field(&self, label: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.label == label)
    }

    /// Any named system operator: `H_S`, a coupling operator, or an extra operator.
    pub fn operator(&self, label: &str) -> Option<&CMat> {
        if label == H_S {
            return Some(&self.h_s);
        }
        if let Some(c) = self.coupling(label) {
            return Some(&c.s);
        }
        self.operators.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    pub fn add_operator(&mut self, label: &str, m: CMat) {
        if let Some(slot) = self.operators.iter_mut().find(|(l, _)| l == label) {
            slot.1 = m;
        } else {
            self.operators.push((label.into(), m));
        }
    }

    fn adjoint_of(&self, label: &str) -> Result<String> {
        self.coupling(label)
            .map(|c| c.adjoint.clone())
            .ok_or_else(|| Error::Config(format!("unknown coupling label '{label}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Chirality {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeRole {
    SystemDynamics,
    OutputField,
    InputField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurifiedMode {
    pub id: usize,
    pub chirality: Chirality,
    /// `Omega - i Gamma` of the source term.
    pub z: Complex64,
    pub role: ModeRole,
    pub source_key: CorrelationKey,
    pub term_index: usize,
    /// Coefficient of the mode's commutator (or generator) term.
    pub lambda1: Complex64,
    /// Coefficient of the mode's second coupling (or insertion) term.
    pub lambda2: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ladder {
    Raise,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Factor {
    Sys(String),
    Mode { mode: usize, op: Ladder },
}

impl Factor {
    pub fn sys(label: &str) -> Self {
        Factor::Sys(label.into())
    }
    pub fn raise(mode: usize) -> Self {
        Factor::Mode { mode, op: Ladder::Raise }
    }
    pub fn lower(mode: usize) -> Self {
        Factor::Mode { mode, op: Ladder::Lower }
    }
}

/// `rho -> coeff * (left_1 left_2 ...) rho (right_1 right_2 ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperTerm {
    pub coeff: Complex64,
    pub left: Vec<Factor>,
    pub right: Vec<Factor>,
}

impl SuperTerm {
    pub fn new(coeff: Complex64, left: Vec<Factor>, right: Vec<Factor>) -> Self {
        Self { coeff, left, right }
    }

    pub fn factors(&self) -> impl Iterator<Item = &Factor> {
        self.left.iter().chain(self.right.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Timing {
    Output,
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldInsertion {
    pub field: String,
    pub side: Side,
    pub timing: Timing,
    pub terms: Vec<SuperTerm>,
}

/// One term of the Wick expansion of the initial state: `scalar` times the
/// listed input insertions applied to `rho_S (x) vacuum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialTerm {
    pub scalar: Complex64,
    pub insertions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    #[serde(with = "matrix_doc")]
    pub rho_s: CMat,
    /// Input insertion indices in declaration order.
    pub inputs: Vec<usize>,
    pub expansion: Vec<InitialTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub system: SystemSpec,
    pub modes: Vec<PurifiedMode>,
    pub generator: Vec<SuperTerm>,
    pub insertions: Vec<FieldInsertion>,
    pub initial: InitialState,
    /// Output insertions served by existing modes instead of new ones.
    pub reuse_records: Vec<String>,
}

/// Symmetric split `w = lambda' lambda''` on the principal branch.
pub fn split_weight(w: Complex64) -> (Complex64, Complex64) {
    let r = w.sqrt();
    (r, r)
}

fn left_z(t: &ExpTerm) -> Complex64 {
    Complex64::new(-t.omega, -t.gamma)
}

fn right_z(t: &ExpTerm) -> Complex64 {
    Complex64::new(t.omega, -t.gamma)
}

impl ModelSpec {
    /// Closed-system model: only `[H_S, .]`.
    pub fn closed(system: SystemSpec) -> Self {
        let rho_s = CMat::zeros(system.dim, system.dim);
        let generator = vec![
            SuperTerm::new(Complex64::new(1.0, 0.0), vec![Factor::sys(H_S)], vec![]),
            SuperTerm::new(Complex64::new(-1.0, 0.0), vec![], vec![Factor::sys(H_S)]),
        ];
        Self {
            system,
            modes: Vec::new(),
            generator,
            insertions: Vec::new(),
            initial: InitialState { rho_s, inputs: Vec::new(), expansion: Vec::new() },
            reuse_records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim
    }

    pub fn set_initial_rho(&mut self, rho: CMat) {
        self.initial.rho_s = rho;
    }

    pub fn n_right(&self) -> usize {
        self.modes.iter().filter(|m| m.chirality == Chirality::Right).count()
    }

    pub fn n_left(&self) -> usize {
        self.modes.iter().filter(|m| m.chirality == Chirality::Left).count()
    }

    fn push_mode(&mut self, chirality: Chirality, t: &ExpTerm, role: ModeRole, key: &CorrelationKey, idx: usize, l1: Complex64, l2: Complex64) -> usize {
        let id = self.modes.len();
        let z = match chirality {
            Chirality::Right => right_z(t),
            Chirality::Left => left_z(t),
        };
        self.modes.push(PurifiedMode {
            id,
            chirality,
            z,
            role,
            source_key: key.clone(),
            term_index: idx,
            lambda1: l1,
            lambda2: l2,
        });
        let number = match chirality {
            Chirality::Right => SuperTerm::new(z, vec![Factor::raise(id), Factor::lower(id)], vec![]),
            Chirality::Left => SuperTerm::new(z, vec![], vec![Factor::raise(id), Factor::lower(id)]),
        };
        self.generator.push(number);
        id
    }

    /// Lindblad dissipator `rate * (J rho J^dag - {J^dag J, rho} / 2)` for a named operator.
    pub fn add_lindblad(&mut self, op_label: &str, rate: f64) -> Result<()> {
        let j = self
            .system
            .operator(op_label)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown system operator '{op_label}'")))?;
        let jd = dagger(&j);
        let jdj = &jd * &j;
        let dag_label = format!("{op_label}^dag");
        let num_label = format!("{op_label}^dag {op_label}");
        self.system.add_operator(&dag_label, jd);
        self.system.add_operator(&num_label, jdj);
        let i = Complex64::new(0.0, 1.0);
        self.generator.push(SuperTerm::new(i * rate, vec![Factor::sys(op_label)], vec![Factor::Sys(dag_label)]));
        self.generator.push(SuperTerm::new(-i * (0.5 * rate), vec![Factor::Sys(num_label.clone())], vec![]));
        self.generator.push(SuperTerm::new(-i * (0.5 * rate), vec![], vec![Factor::Sys(num_label)]));
        Ok(())
    }

    pub fn insertion_index(&self, field: &str, side: Side, timing: Timing) -> Option<usize> {
        self.insertions.iter().position(|i| i.field == field && i.side == side && i.timing == timing)
    }

    /// Output insertion for `field` acting at the observation time.
    pub fn attach_output_field(&mut self, field: &str, side: Side, corr: &CorrelationSet) -> Result<usize> {
        let decl = self
            .system
            .field(field)
            .cloned()
            .ok_or_else(|| Error::Config(format!("field '{field}' is not declared")))?;
        let mut terms = Vec::new();
        if let Some((x, factor)) = &decl.proportional {
            // Reuse the modes whose coupling-side label is X; input modes
            // carry the direct contraction with fields inserted at t = 0.
            for m in &self.modes {
                if m.role != ModeRole::SystemDynamics && m.role != ModeRole::InputField {
                    continue;
                }
                match m.chirality {
                    Chirality::Right if &m.source_key.a == x => {
                        terms.push(SuperTerm::new(factor * m.lambda1, vec![Factor::lower(m.id)], vec![]));
                    }
                    Chirality::Left if &m.source_key.b == x => {
                        terms.push(SuperTerm::new(factor * m.lambda1, vec![], vec![Factor::raise(m.id)]));
                    }
                    _ => {}
                }
            }
            self.reuse_records.push(format!("{field} = ({factor}) * {x}: {} reused modes", terms.len()));
        } else {
            if !self.initial.inputs.is_empty() {
                return Err(Error::UnsupportedTerm(format!(
                    "output field '{field}' is not proportional to a coupling; its contraction with the input fields is not represented"
                )));
            }
            let mut found = false;
            let couplings: Vec<String> = self.system.couplings.iter().map(|c| c.label.clone()).collect();
            for x in &couplings {
                let pos = CorrelationKey::positive(field, x);
                if let Some(list) = corr.get(&pos) {
                    found = true;
                    for (idx, t) in list.iter().enumerate() {
                        if t.w.norm() == 0.0 {
                            continue;
                        }
                        let (l1, l2) = split_weight(t.w);
                        let id = self.push_mode(Chirality::Right, t, ModeRole::OutputField, &pos, idx, l1, l2);
                        self.generator.push(SuperTerm::new(l1, vec![Factor::raise(id), Factor::Sys(x.clone())], vec![]));
                        terms.push(SuperTerm::new(l2, vec![Factor::lower(id)], vec![]));
                    }
                }
                let neg = CorrelationKey::negative(x, field);
                if let Some(list) = corr.get(&neg) {
                    found = true;
                    for (idx, t) in list.iter().enumerate() {
                        if t.w.norm() == 0.0 {
                            continue;
                        }
                        let (l1, l2) = split_weight(t.w);
                        let id = self.push_mode(Chirality::Left, t, ModeRole::OutputField, &neg, idx, l1, l2);
                        self.generator.push(SuperTerm::new(-l1, vec![], vec![Factor::Sys(x.clone()), Factor::lower(id)]));
                        terms.push(SuperTerm::new(l2, vec![], vec![Factor::raise(id)]));
                    }
                }
            }
            if !found {
                return Err(Error::Config(format!(
                    "no correlations between field '{field}' and the couplings, and no proportionality declared"
                )));
            }
        }
        self.insertions.push(FieldInsertion { field: field.into(), side, timing: Timing::Output, terms });
        Ok(self.insertions.len() - 1)
    }

    /// Input insertion for `field` applied once at t = 0, appended to the initial recipe.
    pub fn attach_input_field(&mut self, field: &str, side: Side, corr: &CorrelationSet) -> Result<usize> {
        if self.system.field(field).is_none() {
            return Err(Error::Config(format!("field '{field}' is not declared")));
        }
        if self.insertions.iter().any(|i| i.timing == Timing::Output) {
            return Err(Error::Config("attach input fields before output fields".into()));
        }
        let couplings: Vec<String> = self.system.couplings.iter().map(|c| c.label.clone()).collect();
        let mut terms = Vec::new();
        let mut found = false;
        for x in &couplings {
            match side {
                Side::Left => {
                    let key = CorrelationKey::positive(x, field);
                    let Some(list) = corr.get(&key) else { continue };
                    found = true;
                    for (idx, t) in list.iter().enumerate() {
                        if t.w.norm() == 0.0 {
                            continue;
                        }
                        let (l1, l2) = split_weight(t.w);
                        let id = self.push_mode(Chirality::Right, t, ModeRole::InputField, &key, idx, l1, l2);
                        self.generator.push(SuperTerm::new(l1, vec![Factor::lower(id), Factor::Sys(x.clone())], vec![]));
                        self.generator.push(SuperTerm::new(-l1, vec![Factor::lower(id)], vec![Factor::Sys(x.clone())]));
                        terms.push(SuperTerm::new(l2, vec![Factor::raise(id)], vec![]));
                    }
                }
                Side::Right => {
                    let key = CorrelationKey::negative(field, x);
                    let Some(list) = corr.get(&key) else { continue };
                    found = true;
                    for (idx, t) in list.iter().enumerate() {
                        if t.w.norm() == 0.0 {
                            continue;
                        }
                        let (l1, l2) = split_weight(t.w);
                        let id = self.push_mode(Chirality::Left, t, ModeRole::InputField, &key, idx, l1, l2);
                        self.generator.push(SuperTerm::new(l1, vec![Factor::Sys(x.clone())], vec![Factor::raise(id)]));
                        self.generator.push(SuperTerm::new(-l1, vec![], vec![Factor::Sys(x.clone()), Factor::raise(id)]));
                        terms.push(SuperTerm::new(l2, vec![], vec![Factor::lower(id)]));
                    }
                }
            }
        }
        if !found {
            log::warn!("input field '{field}' has no correlation with any coupling; it only enters through contractions");
        }
        self.insertions.push(FieldInsertion { field: field.into(), side, timing: Timing::Input, terms });
        let index = self.insertions.len() - 1;
        self.initial.inputs.push(index);
        self.initial.expansion = self.wick_expansion(corr)?;
        Ok(index)
    }

    /// Sums over all pairings of the input fields; each matched pair contributes
    /// its equal-time bath contraction, unmatched fields their mode insertions.
    fn wick_expansion(&self, corr: &CorrelationSet) -> Result<Vec<InitialTerm>> {
        let inputs = &self.initial.inputs;
        // Operator order inside the bath trace: right fields in order, then left fields outer-to-inner.
        let lefts: Vec<usize> = inputs.iter().copied().filter(|&i| self.insertions[i].side == Side::Left).collect();
        let rights: Vec<usize> = inputs.iter().copied().filter(|&i| self.insertions[i].side == Side::Right).collect();
        let mut ordered = rights.clone();
        ordered.extend(lefts.iter().copied());
        let mut out = Vec::new();
        let mut used = vec![false; ordered.len()];
        self.pairings(corr, &ordered, &mut used, Complex64::new(1.0, 0.0), &mut out)?;
        Ok(out)
    }

    fn pairings(
        &self,
        corr: &CorrelationSet,
        ordered: &[usize],
        used: &mut Vec<bool>,
        scalar: Complex64,
        out: &mut Vec<InitialTerm>,
    ) -> Result<()> {
        let Some(first) = (0..ordered.len()).find(|&k| !used[k]) else {
            out.push(InitialTerm { scalar, insertions: Vec::new() });
            return Ok(());
        };
        // Leave `first` unmatched: collect its insertion after the remaining pairings.
        used[first] = true;
        let mut tail = Vec::new();
        self.pairings(corr, ordered, used, scalar, &mut tail)?;
        for mut t in tail {
            t.insertions.push(ordered[first]);
            out.push(t);
        }
        for partner in first + 1..ordered.len() {
            if used[partner] {
                continue;
            }
            let a = &self.insertions[ordered[first]].field;
            let b = &self.insertions[ordered[partner]].field;
            let value = match corr.get(&CorrelationKey::positive(a, b)) {
                Some(terms) => terms.iter().map(|t| t.w).sum::<Complex64>(),
                None => Complex64::new(0.0, 0.0),
            };
            if value.norm() == 0.0 {
                continue;
            }
            used[partner] = true;
            self.pairings(corr, ordered, used, scalar * value, out)?;
            used[partner] = false;
        }
        used[first] = false;
        Ok(())
    }

    /// Applies insertion indices in declaration order; unmatched fields keep that order.
    pub fn sorted_expansion(&self) -> Vec<InitialTerm> {
        let order: BTreeMap<usize, usize> = self.initial.inputs.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut terms = self.initial.expansion.clone();
        for t in terms.iter_mut() {
            t.insertions.sort_by_key(|i| order[i]);
        }
        terms
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// System-dynamics modes for every X-X entry of a time-reversal-closed set.
pub fn build_system_model(corr: &CorrelationSet, sys: &SystemSpec) -> Result<ModelSpec> {
    sys.validate()?;
    let mut model = ModelSpec::closed(sys.clone());
    for (key, terms) in &corr.entries {
        let (ca, cb) = (sys.coupling(&key.a), sys.coupling(&key.b));
        if ca.is_none() || cb.is_none() {
            let either = ca.is_some() || cb.is_some() || sys.field(&key.a).is_some() || sys.field(&key.b).is_some();
            if !either {
                return Err(Error::Config(format!("correlation {key} references undeclared labels")));
            }
            continue;
        }
        for (idx, t) in terms.iter().enumerate() {
            if t.w.norm() == 0.0 {
                continue;
            }
            match key.sign {
                TimeSign::Positive => {
                    let (l1, l2) = split_weight(t.w);
                    let id = model.push_mode(Chirality::Right, t, ModeRole::SystemDynamics, key, idx, l1, l2);
                    let (sa, sb) = (key.a.clone(), key.b.clone());
                    model.generator.push(SuperTerm::new(l1, vec![Factor::lower(id), Factor::Sys(sa.clone())], vec![]));
                    model.generator.push(SuperTerm::new(-l1, vec![Factor::lower(id)], vec![Factor::Sys(sa)]));
                    model.generator.push(SuperTerm::new(l2, vec![Factor::raise(id), Factor::Sys(sb)], vec![]));
                }
                TimeSign::Negative => {
                    // Key (P, Q) = (b^dag, a^dag) of the source entry (a, b).
                    let (l1, l2) = split_weight(t.w.conj());
                    let (l1, l2) = (l1.conj(), l2.conj());
                    let id = model.push_mode(Chirality::Left, t, ModeRole::SystemDynamics, key, idx, l1, l2);
                    let (p, q) = (key.a.clone(), key.b.clone());
                    model.generator.push(SuperTerm::new(l1, vec![Factor::Sys(q.clone())], vec![Factor::raise(id)]));
                    model.generator.push(SuperTerm::new(-l1, vec![], vec![Factor::Sys(q), Factor::raise(id)]));
                    model.generator.push(SuperTerm::new(-l2, vec![], vec![Factor::Sys(p), Factor::lower(id)]));
                }
            }
        }
    }
    // Adjoint labels must resolve for every coupling that carries modes.
    for m in &model.modes {
        sys.adjoint_of(&m.source_key.a)?;
        sys.adjoint_of(&m.source_key.b)?;
    }
    Ok(model)
}

pub fn attach_output_field(mut model: ModelSpec, field: &str, side: Side, corr: &CorrelationSet) -> Result<ModelSpec> {
    model.attach_output_field(field, side, corr)?;
    Ok(model)
}

pub fn attach_input_field(mut model: ModelSpec, field: &str, side: Side, corr: &CorrelationSet) -> Result<ModelSpec> {
    model.attach_input_field(field, side, corr)?;
    Ok(model)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub total: usize,
    /// `(right, left)` per role.
    pub by_role: BTreeMap<String, (usize, usize)>,
    pub reuse_records: usize,
}

impl ModeCounts {
    pub fn role(&self, role: ModeRole) -> usize {
        self.by_role.get(&format!("{role:?}")).map_or(0, |(r, l)| r + l)
    }
}

pub fn count_modes(model: &ModelSpec) -> ModeCounts {
    let mut counts = ModeCounts { total: model.modes.len(), reuse_records: model.reuse_records.len(), ..Default::default() };
    for m in &model.modes {
        let slot = counts.by_role.entry(format!("{:?}", m.role)).or_insert((0, 0));
        match m.chirality {
            Chirality::Right => slot.0 += 1,
            Chirality::Left => slot.1 += 1,
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrlib::time_reverse_close;
    use crate::linalg::{c, sigma_x, sigma_z};

    fn qubit_model() -> (CorrelationSet, SystemSpec) {
        let sys = SystemSpec::new(sigma_z() * c(0.5, 0.0)).with_coupling("X", sigma_x(), "X");
        let mut set = CorrelationSet::new();
        set.insert(CorrelationKey::positive("X", "X"), vec![ExpTerm::new(c(0.04, 0.0), 1.0, 0.3)]);
        (time_reverse_close(&set, |l| Some(l.to_string())).unwrap(), sys)
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_weight(c(1.0, 0.0)), (c(1.0, 0.0), c(1.0, 0.0)));
        let (a, b) = split_weight(c(-4.0, 0.0));
        assert!((a - c(0.0, 2.0)).norm() < 1e-15 && a == b);
        assert!((a * b - c(-4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn one_term_gives_conjugate_pair() {
        let (set, sys) = qubit_model();
        let model = build_system_model(&set, &sys).unwrap();
        assert_eq!(model.modes.len(), 2);
        let (r, l) = (&model.modes[0], &model.modes[1]);
        assert_eq!(r.chirality, Chirality::Right);
        assert_eq!(l.chirality, Chirality::Left);
        assert!((l.z + r.z.conj()).norm() < 1e-15);
        assert!((l.lambda1 - r.lambda1.conj()).norm() < 1e-15);
    }

    #[test]
    fn empty_set_is_closed_system() {
        let (_, sys) = qubit_model();
        let model = build_system_model(&CorrelationSet::new(), &sys).unwrap();
        assert!(model.modes.is_empty());
        assert_eq!(model.generator.len(), 2);
        assert_eq!(count_modes(&model).total, 0);
    }

    #[test]
    fn undeclared_label_is_config_error() {
        let (_, sys) = qubit_model();
        let mut set = CorrelationSet::new();
        set.insert(CorrelationKey::positive("Y", "Z"), vec![ExpTerm::new(c(1.0, 0.0), 0.0, 1.0)]);
        assert!(matches!(build_system_model(&set, &sys), Err(Error::Config(_))));
    }

    #[test]
    fn proportional_output_reuses_modes() {
        let (set, sys) = qubit_model();
        let sys = sys.with_field("phi", Some(("X", c(2.0, 0.0))));
        let mut model = build_system_model(&set, &sys).unwrap();
        let before = model.modes.len();
        let idx = model.attach_output_field("phi", Side::Left, &set).unwrap();
        assert_eq!(model.modes.len(), before);
        assert_eq!(model.insertions[idx].terms.len(), 2);
    }

    #[test]
    fn uncorrelated_output_field_is_empty() {
        let (mut set, sys) = qubit_model();
        let sys = sys.with_field("phi", None);
        set.insert(CorrelationKey::positive("phi", "X"), vec![]);
        let mut model = build_system_model(&set, &sys).unwrap();
        let idx = model.attach_output_field("phi", Side::Left, &set).unwrap();
        assert!(model.insertions[idx].terms.is_empty());
        assert_eq!(model.modes.len(), 2);
    }

    #[test]
    fn one_term_output_adds_one_right_mode() {
        let (mut set, sys) = qubit_model();
        let sys = sys.with_field("phi", None);
        set.insert(CorrelationKey::positive("phi", "X"), vec![ExpTerm::new(c(0.09, 0.0), 0.5, 0.2)]);
        let mut model = build_system_model(&set, &sys).unwrap();
        let idx = model.attach_output_field("phi", Side::Left, &set).unwrap();
        assert_eq!(model.modes.len(), 3);
        let m = &model.modes[2];
        assert_eq!((m.chirality, m.role), (Chirality::Right, ModeRole::OutputField));
        let ins = &model.insertions[idx].terms;
        assert_eq!(ins.len(), 1);
        assert!((ins[0].coeff - c(0.3, 0.0)).norm() < 1e-15);
        assert_eq!(ins[0].left, vec![Factor::lower(2)]);
        let gen = model.generator.last().unwrap();
        assert_eq!(gen.left, vec![Factor::raise(2), Factor::sys("X")]);
    }

    #[test]
    fn missing_output_correlation_errors() {
        let (set, sys) = qubit_model();
        let sys = sys.with_field("phi", None);
        let mut model = build_system_model(&set, &sys).unwrap();
        assert!(matches!(model.attach_output_field("phi", Side::Left, &set), Err(Error::Config(_))));
    }

    #[test]
    fn json_roundtrip_is_lossless() {
        let (set, sys) = qubit_model();
        let mut model = build_system_model(&set, &sys).unwrap();
        model.set_initial_rho(CMat::from_fn(2, 2, |i, j| c(0.1 + i as f64 / 3.0, j as f64 * 1e-17)));
        let back = ModelSpec::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }
}
