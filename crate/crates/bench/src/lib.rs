//! Fixtures shared by the benchmarks.

use purimode_core::scenario::{default_frame, emitter_state, EmitterModel};
use purimode_core::waveguide::{case1_correlations, WaveguideParams};

/// Resonant emitter pair at short delay with the first emitter excited.
pub fn short_delay_emitters() -> EmitterModel {
    let p = WaveguideParams::resonant_pair(4.0);
    let corr = case1_correlations(&p).expect("case I bath");
    EmitterModel::new(&p, &corr, default_frame(&p), emitter_state([true, false]), None).expect("model")
}
