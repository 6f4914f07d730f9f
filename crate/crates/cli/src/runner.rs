//! Parallel ensemble execution. Realizations are scheduled over a rayon
//! pool and collected by realization index, so aggregated outputs do not
//! depend on the worker count.

use rayon::prelude::*;

use cgmc_core::kmc::{
    run_trajectory, InitConfig, Process, RunOptions, TrajectorySample,
};
use cgmc_core::lattice::project;
use cgmc_core::rng::realization_rng;
use cgmc_core::{FieldMode, KmcError, LatticeSpec, MicroConfig, PotentialModel};

/// Build the thread pool for `--workers`/`CGMC_WORKERS`; `None` uses all
/// available cores.
pub fn make_pool(workers: Option<usize>) -> rayon::ThreadPool {
    let workers = workers
        .or_else(|| {
            std::env::var("CGMC_WORKERS")
                .ok()
                .and_then(|w| w.parse().ok())
        })
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
}

/// The process simulating ratio `q`: the microscopic dynamics at `q = 1`,
/// the coarse birth–death dynamics otherwise.
pub fn process_for(q: usize) -> Process {
    if q == 1 {
        Process::Micro
    } else {
        Process::Coarse
    }
}

/// Initial configuration for a process at ratio `q`, projected from the
/// shared microscopic initial state so all levels start paired.
pub fn init_for(spec: &LatticeSpec, q: usize, sigma0: &MicroConfig) -> InitConfig {
    if q == 1 {
        InitConfig::Micro(sigma0.clone())
    } else {
        InitConfig::Coarse(project(spec, sigma0))
    }
}

/// Run `realizations` independent trajectories; realization `i` draws
/// from stream `(master_seed, i)`.
pub fn run_ensemble(
    pool: &rayon::ThreadPool,
    process: Process,
    spec: &LatticeSpec,
    model: &PotentialModel,
    field: &FieldMode,
    init: &InitConfig,
    opts: &RunOptions,
    master_seed: u64,
    realizations: usize,
) -> Result<Vec<Vec<TrajectorySample>>, KmcError> {
    pool.install(|| {
        (0..realizations as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = realization_rng(master_seed, r);
                run_trajectory(process, spec, model, field, init, opts, &mut rng)
            })
            .collect()
    })
}
