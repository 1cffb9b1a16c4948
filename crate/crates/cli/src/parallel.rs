//! Data-parallel drivers over the core's chunked estimators.
//!
//! Work units are fixed by the chunk or path index and results are reduced in
//! index order, so output does not depend on the thread count.

use barrier_repl_core::hedger::{HedgeError, HedgeReport, HedgeStudy};
use barrier_repl_core::simulator::{
    reduce_chunks, run_chunk, simulate_vol, stream, uniform_grid, McConfig, McEstimate, PathOutcome, SimError,
    StreamRole, VolModel,
};
use barrier_repl_core::Complex64;
use rayon::prelude::*;

pub fn mc_expect<F>(cfg: &McConfig, n_out: usize, f: F) -> Result<Vec<McEstimate>, SimError>
where
    F: Fn(&PathOutcome, &mut [Complex64]) + Sync,
{
    cfg.validate()?;
    let chunks: Vec<_> = (0..cfg.n_chunks()).into_par_iter().map(|c| run_chunk(cfg, c, n_out, &f)).collect();
    Ok(reduce_chunks(cfg, chunks))
}

/// Total integrated variance over `[0, T]` for paths `0..n`.
pub fn qv_samples(model: &VolModel, maturity: f64, steps: usize, n: u64, seed: u64) -> Result<Vec<f64>, SimError> {
    model.validate()?;
    let times = uniform_grid(maturity, steps.max(1));
    Ok((0..n)
        .into_par_iter()
        .map(|p| simulate_vol(model, &times, &mut stream(seed, p, StreamRole::Vol)).qv_steps.iter().sum())
        .collect())
}

pub fn hedge_study(study: &HedgeStudy) -> Result<HedgeReport, HedgeError> {
    study.validate()?;
    let per_path = (0..study.n_paths).into_par_iter().map(|p| study.path_errors(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(study.report_from(&per_path))
}

/// Run `f` on a pool with `threads` workers (0 means rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Monte Carlo price of a claim on `steps` uniform steps to `maturity`.
pub fn mc_claim(
    claim: &barrier_repl_core::claim::ClaimSpec,
    model: &VolModel,
    maturity: f64,
    steps: usize,
    n_paths: u64,
    seed: u64,
    mode: barrier_repl_core::simulator::Monitoring,
) -> Result<McEstimate, SimError> {
    use barrier_repl_core::claim::ClaimKind;
    let cfg = McConfig {
        model: model.clone(),
        times: uniform_grid(maturity, steps),
        x0: claim.barriers.x0,
        n_paths,
        seed,
        barrier: (claim.kind != ClaimKind::EuropeanStylePowerExp).then_some(claim.barriers),
        mode,
    };
    let est = mc_expect(&cfg, 1, |o, out| out[0] = barrier_repl_core::simulator::claim_payoff(claim, o))?;
    Ok(est[0])
}
