//! Order-preserving parallel scoring. `NERO_THREADS` caps the worker count.

use nero_core::relevance::relevance_of;
use nero_core::{ArtifactBundle, NeroModel, RelevanceBatch, ScoreBreakdown, YMode};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "NERO_THREADS";

/// Worker cap from the environment; `None` leaves the choice to rayon.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(Error::config(format!(
                "{THREADS_ENV} must be a non-negative integer, got {s:?}"
            ))),
        },
    }
}

/// `f(0), f(1), ..., f(n-1)` evaluated in parallel, results in index order.
/// The first error by index wins.
pub fn par_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_limit()? {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

pub fn score_bundle(model: &NeroModel, bundle: &ArtifactBundle) -> Result<Vec<ScoreBreakdown>> {
    par_map(bundle.n(), |i| {
        model
            .score(bundle.features.row(i), bundle.logits.row(i))
            .map_err(|e| nero_core::Error::AtSample {
                index: i,
                source: Box::new(e),
            })
            .map_err(Error::from)
    })
}

pub fn relevance_bundle(bundle: &ArtifactBundle, eps: f64, y_mode: YMode) -> Result<RelevanceBatch> {
    let results = par_map(bundle.n(), |i| Ok(relevance_of(bundle, i, eps, y_mode)?))?;
    Ok(RelevanceBatch::from_results(bundle.d(), results))
}

/// Applies a per-sample score function to every sample.
pub fn map_samples<F>(bundle: &ArtifactBundle, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &[f64]) -> nero_core::Result<f64> + Sync + Send,
{
    par_map(bundle.n(), |i| {
        f(bundle.features.row(i), bundle.logits.row(i)).map_err(|e| {
            Error::from(nero_core::Error::AtSample {
                index: i,
                source: Box::new(e),
            })
        })
    })
}
