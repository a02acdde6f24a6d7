//! Independent reference calculations.

mod delay;
mod discrete;
mod small;

pub use delay::{delay_ode_correlations, DelaySeries};
pub use small::{analytic_single_mode, finite_a_sweep, FiniteASweep};
pub use discrete::{
    single_excitation_schrodinger, two_excitation_dimension, two_excitation_unitary, DiscreteBath, DEFAULT_BANDWIDTH,
    RECURRENCE_FRACTION,
};
