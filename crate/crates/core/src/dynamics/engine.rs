//! One interface over the dense purified and the tiered representations.

use super::{relax_to_steady, sparse_rhs, steady_state, SteadyMethod};
use crate::error::{Error, Result};
use crate::heom::{heom_initial_state, AdoIndex, HeomOperator, TierCap};
use crate::linalg::CMat;
use crate::liouville::{assemble_purified_uniform, assemble_terms, extract_rho_s, initial_state, trace_functional, SpaceLayout};
use crate::modelgen::ModelSpec;
use crate::sparse::SparseSuperOp;
use num_complex::Complex64;
use std::sync::Arc;

type C = Complex64;

/// States above this size are relaxed by integration instead of a direct solve.
pub const DIRECT_SOLVE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    /// Explicit Fock truncation `n_max` per mode, optionally capped in total occupation.
    Dense { n_max: usize, cap: Option<usize> },
    Tiered { cap: TierCap },
}

enum Repr {
    Dense { layout: SpaceLayout, op: SparseSuperOp, insertions: Vec<SparseSuperOp> },
    Tiered { op: HeomOperator, insertions: Vec<HeomOperator> },
}

/// Generator, insertions and state conventions for one model.
pub struct Propagator {
    repr: Repr,
    d: usize,
    initial: Vec<C>,
}

impl Propagator {
    pub fn new(model: &ModelSpec, engine: Engine) -> Result<Self> {
        let one = C::new(1.0, 0.0);
        let d = model.dim();
        let (repr, initial) = match engine {
            Engine::Dense { n_max, cap } => {
                let (layout, op) = assemble_purified_uniform(model, n_max, cap)?;
                let insertions = model
                    .insertions
                    .iter()
                    .map(|ins| assemble_terms(model, &layout, &ins.terms, one))
                    .collect::<Result<Vec<_>>>()?;
                let (y0, _) = initial_state(model, &layout)?;
                (Repr::Dense { layout, op, insertions }, y0)
            }
            Engine::Tiered { cap } => {
                let index = Arc::new(AdoIndex::for_model(model, cap)?);
                let op = HeomOperator::generator(model, index.clone())?;
                let insertions = model
                    .insertions
                    .iter()
                    .map(|ins| HeomOperator::from_terms(model, index.clone(), &ins.terms, one))
                    .collect::<Result<Vec<_>>>()?;
                let (y0, _) = heom_initial_state(model, index)?;
                (Repr::Tiered { op, insertions }, y0.data)
            }
        };
        Ok(Self { repr, d, initial })
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[C] {
        &self.initial
    }

    /// `out = -i G y`.
    pub fn apply(&self, y: &[C], out: &mut [C]) {
        match &self.repr {
            Repr::Dense { op, .. } => op.matvec_into(y, out),
            Repr::Tiered { op, .. } => op.apply(y, out),
        }
    }

    pub fn rhs(&self) -> impl Fn(f64, &[C], &mut [C]) + '_ {
        move |_, y, out| self.apply(y, out)
    }

    pub fn rho_s(&self, y: &[C]) -> Result<CMat> {
        if y.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: y.len() });
        }
        match &self.repr {
            Repr::Dense { layout, .. } => extract_rho_s(layout, y),
            Repr::Tiered { .. } => Ok(CMat::from_fn(self.d, self.d, |i, j| y[i * self.d + j])),
        }
    }

    pub fn trace(&self, y: &[C]) -> C {
        self.trace_weights().iter().map(|&(k, w)| w * y[k]).sum()
    }

    pub fn trace_weights(&self) -> Vec<(usize, C)> {
        match &self.repr {
            Repr::Dense { layout, .. } => trace_functional(layout),
            Repr::Tiered { .. } => (0..self.d).map(|i| (i * self.d + i, C::new(1.0, 0.0))).collect(),
        }
    }

    /// Applies field insertion `k` of the model.
    pub fn insert(&self, k: usize, y: &[C]) -> Result<Vec<C>> {
        let mut out = vec![C::new(0.0, 0.0); y.len()];
        match &self.repr {
            Repr::Dense { insertions, .. } => insertions.get(k).map(|op| op.matvec_into(y, &mut out)),
            Repr::Tiered { insertions, .. } => insertions.get(k).map(|op| op.apply(y, &mut out)),
        }
        .ok_or_else(|| Error::Config(format!("no insertion {k}")))?;
        Ok(out)
    }

    /// `A y` with `A` acting on the system ket of every block.
    pub fn system_left(&self, a: &CMat, y: &[C]) -> Result<Vec<C>> {
        let d = self.d;
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::Dimension { expected: d, got: a.nrows() });
        }
        let mut out = vec![C::new(0.0, 0.0); y.len()];
        match &self.repr {
            Repr::Dense { layout, .. } => {
                let n_occ = layout.n_occ();
                for i in 0..d {
                    for k in 0..d {
                        let aik = a[(i, k)];
                        if aik == C::new(0.0, 0.0) {
                            continue;
                        }
                        for j in 0..d {
                            let (dst, src) = ((i * d + j) * n_occ, (k * d + j) * n_occ);
                            for o in 0..n_occ {
                                out[dst + o] += aik * y[src + o];
                            }
                        }
                    }
                }
            }
            Repr::Tiered { .. } => {
                let dd = d * d;
                for (blk, dst) in y.chunks(dd).zip(out.chunks_mut(dd)) {
                    let m = CMat::from_row_slice(d, d, blk);
                    let r = a * m;
                    for i in 0..d {
                        for j in 0..d {
                            dst[i * d + j] = r[(i, j)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Steady state with unit trace: direct solve for small dense models,
    /// otherwise (or when the fixed point is degenerate) relaxation of the
    /// initial state.
    pub fn steady_state(&self, tol: f64) -> Result<Vec<C>> {
        let y = match &self.repr {
            Repr::Dense { op, .. } if self.dim() <= DIRECT_SOLVE_LIMIT => {
                match steady_state(op, &self.trace_weights(), &self.initial, SteadyMethod::NullSpace, tol) {
                    Ok(y) => y,
                    Err(Error::NoConvergence(msg)) => {
                        log::info!("direct steady-state solve failed ({msg}); relaxing instead");
                        relax_to_steady(sparse_rhs(op), &self.initial, 10.0, 1e5, tol)?
                    }
                    Err(e) => return Err(e),
                }
            }
            Repr::Dense { op, .. } => relax_to_steady(sparse_rhs(op), &self.initial, 10.0, 1e5, tol)?,
            Repr::Tiered { .. } => relax_to_steady(self.rhs(), &self.initial, 10.0, 1e5, tol)?,
        };
        let tr = self.trace(&y);
        if tr.norm() < 1e-300 {
            return Err(Error::NoConvergence("steady state has zero trace".into()));
        }
        Ok(y.into_iter().map(|x| x / tr).collect())
    }
}
