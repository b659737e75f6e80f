//! Parallel replications. Each replication (or fixed-size batch of walks)
//! owns an RNG stream derived from the master seed and its index, so results
//! do not depend on scheduling or thread count.

use astoc_core::complexity::{accumulate_toc, replicate, BoundReport, TocRecord, TocSummary};
use astoc_core::framework::{AlgoConfig, Method, StoppingRule};
use astoc_core::oracles::OracleSuite;
use astoc_core::problems::Problem;
use astoc_core::rng::replication_stream;
use astoc_core::walk::simulate_walk;
use astoc_core::Result;
use rayon::prelude::*;

const WALK_BATCH: u64 = 1024;

/// Total-sample records of `replications` independent runs, in replication
/// order.
#[allow(clippy::too_many_arguments)]
pub fn toc_records(
    problem: &Problem,
    method: &Method,
    suite: &OracleSuite,
    config: &AlgoConfig,
    start: &[f64],
    stopping: StoppingRule,
    replications: u64,
    master_seed: u64,
) -> Result<Vec<TocRecord>> {
    (0..replications)
        .into_par_iter()
        .map(|i| {
            replicate(problem, method, suite, config, start, stopping, master_seed, i).map(|t| accumulate_toc(&t))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_toc(
    problem: &Problem,
    method: &Method,
    suite: &OracleSuite,
    config: &AlgoConfig,
    start: &[f64],
    stopping: StoppingRule,
    replications: u64,
    master_seed: u64,
    bound: Option<&BoundReport>,
) -> Result<TocSummary> {
    let records = toc_records(problem, method, suite, config, start, stopping, replications, master_seed)?;
    TocSummary::new(records, bound)
}

/// Maximum level of each of `reps` independent `n`-step walks.
pub fn walk_max_levels(p: f64, n: usize, reps: u64, master_seed: u64) -> Result<Vec<u32>> {
    let batches = reps.div_ceil(WALK_BATCH);
    let per_batch: Vec<Vec<u32>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_stream(master_seed, b);
            let count = WALK_BATCH.min(reps - b * WALK_BATCH);
            (0..count)
                .map(|_| simulate_walk(p, n, &mut rng).map(|w| w.max_level()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_batch.into_iter().flatten().collect())
}
