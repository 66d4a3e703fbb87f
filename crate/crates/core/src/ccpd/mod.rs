//! Coupled CPD with a shared second factor, computed semi-algebraically by
//! joint eigenvalue decomposition of shift-invariance target matrices, plus
//! the ALS alternative.

mod als;
mod conditions;
mod jevd;
mod recover;
mod reduce;
mod targets;


pub use als::{ccpd_als, random_factors, AlsOptions, AlsOutcome};
pub use conditions::{check_conditions, shift_multiplicity, Inequality, Scenario, WorkingConditionReport};
pub use jevd::{
    diagonal_table, gevd_init_from_pencils, jevd_gevd_init, jevd_refine, random_pencils,
    JevdResult, RefineOptions, PENCIL_ATTEMPTS,
};
pub use recover::recover_factors;
pub use reduce::{reduce_dimension, ReducedData};
pub use targets::{
    build_targets, build_targets_cplsa, build_targets_cppa, JevdProblem, SliceTag, TargetSlice,
    FULL_RANK_TOL,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::ArrayGeometry;
use crate::tensor::{ComplexTensor3, FactorSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JevdOptions {
    /// Weight of the identity slice.
    pub eta: f64,
    pub refine: bool,
    pub refine_opts: RefineOptions,
    /// Seed for the random pencil combinations.
    pub seed: u64,
}

impl Default for JevdOptions {
    fn default() -> Self {
        JevdOptions {
            eta: 1.0,
            refine: true,
            refine_opts: RefineOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JevdOutput {
    pub reduced: ReducedData,
    pub problem: JevdProblem,
    pub init: JevdResult,
    /// Final diagonalizer; equal to `init` when refinement is off.
    pub result: JevdResult,
    pub refine_trace: Option<AlsOutcome>,
    /// Factors of the reduced tensors (`B` is `R × R`).
    pub factors: FactorSet,
}

impl JevdOutput {
    /// The factors with `B` mapped back to sample space.
    pub fn sample_factors(&self) -> FactorSet {
        FactorSet {
            a: self.factors.a.clone(),
            b: self.reduced.expand_b(&self.factors.b),
            c: self.factors.c.clone(),
        }
    }
}

/// Reduce, build target slices, diagonalize, optionally refine and recover
/// every factor.
pub fn ccpd_jevd(
    tensors: &[ComplexTensor3],
    geometries: &[ArrayGeometry],
    rank: usize,
    opts: &JevdOptions,
) -> Result<JevdOutput> {
    let reduced = reduce_dimension(tensors, rank)?;
    let problem = build_targets(&reduced, geometries, opts.eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = jevd_gevd_init(&problem, &mut rng)?;
    let (result, refine_trace) = if opts.refine {
        let (res, trace) = jevd_refine(&problem, &init, &opts.refine_opts)?;
        (res, Some(trace))
    } else {
        (init.clone(), None)
    };
    let factors = recover_factors(&reduced, &result.b)?;
    Ok(JevdOutput {
        reduced,
        problem,
        init,
        result,
        refine_trace,
        factors,
    })
}
