//! Derived views used for sweeps and plots: bottom-k robustness and
//! channel-wise relevance profiles.

use alloc::vec::Vec;

use crate::bundle::ArtifactBundle;
use crate::detector::NeroModel;
use crate::linalg::Matrix;
use crate::metrics::{auroc, fpr_at_tpr, DEFAULT_TPR};
use crate::relevance::{relevance_of, RelevanceResult};
use crate::{Error, Result};

pub const DEFAULT_MOVING_AVERAGE_WINDOW: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub k_fraction: f64,
    pub auroc: f64,
    pub fpr95: f64,
}

/// Per-sample pieces of the score that do not depend on `k`.
struct Prepared {
    rel: RelevanceResult,
    projected: Vec<f64>,
}

fn prepare(model: &NeroModel, bundle: &ArtifactBundle) -> Result<Vec<Prepared>> {
    (0..bundle.n())
        .map(|i| {
            let rel = relevance_of(bundle, i, model.eps, model.y_mode)?;
            let projected = model
                .projection
                .project(&rel.neuron_relevance)
                .map_err(|e| e.at_sample(i))?;
            Ok(Prepared { rel, projected })
        })
        .collect()
}

fn scores_for_k(model: &NeroModel, bundle: &ArtifactBundle, prepared: &[Prepared]) -> Result<Vec<f64>> {
    prepared
        .iter()
        .enumerate()
        .map(|(i, p)| {
            model
                .score_parts(
                    &p.projected,
                    p.rel.bias_relevance,
                    &p.rel.neuron_relevance,
                    bundle.features.row(i),
                )
                .map(|s| s.score)
                .map_err(|e| e.at_sample(i))
        })
        .collect()
}

/// AUROC and FPR95 of the detector for each bottom-channel count in `ks`.
/// Relevance and projections are computed once and shared across `k`.
pub fn k_sweep(model: &NeroModel, id: &ArtifactBundle, ood: &ArtifactBundle, ks: &[usize]) -> Result<Vec<SweepRow>> {
    let d = model.d();
    if let Some(&bad) = ks.iter().find(|&&k| k < 1 || k > d) {
        return Err(Error::invalid("k", alloc::format!("must lie in [1, {d}], got {bad}")));
    }
    let id_prep = prepare(model, id)?;
    let ood_prep = prepare(model, ood)?;
    ks.iter()
        .map(|&k| {
            let m = model.with_k(k)?;
            let id_scores = scores_for_k(&m, id, &id_prep)?;
            let ood_scores = scores_for_k(&m, ood, &ood_prep)?;
            Ok(SweepRow {
                k,
                k_fraction: k as f64 / d as f64,
                auroc: auroc(&id_scores, &ood_scores)?,
                fpr95: fpr_at_tpr(&id_scores, &ood_scores, DEFAULT_TPR)?.fpr,
            })
        })
        .collect()
}

/// Default sweep grid `{1, d/4, d/2, 3d/4, d}` (rounded, clamped to at
/// least 1, duplicates removed).
pub fn default_k_grid(d: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|f| (libm::round(f * d as f64) as usize).clamp(1, d))
        .collect();
    ks.dedup();
    ks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProfileRow {
    /// Position after sorting by ID mean, descending.
    pub rank: usize,
    pub channel: usize,
    pub id_mean: f64,
    pub ood_mean: f64,
    pub ood_moving_average: f64,
}

/// Column means of `|m|`.
pub fn mean_abs_columns(m: &Matrix) -> Vec<f64> {
    let mut out = alloc::vec![0.0; m.cols()];
    for row in m.row_iter() {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x.abs();
        }
    }
    let n = m.rows().max(1) as f64;
    out.into_iter().map(|x| x / n).collect()
}

/// Centered moving average; the window shrinks at the edges.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Channel-wise mean `|relevance|` of ID and OOD samples, channels sorted by
/// ID mean (descending, ties by channel index), with a moving average over
/// the OOD series in that order.
pub fn channel_profile(id_relevance: &Matrix, ood_relevance: &Matrix, window: usize) -> Result<Vec<ChannelProfileRow>> {
    if id_relevance.cols() != ood_relevance.cols() {
        return Err(Error::DimensionMismatch {
            what: "relevance channels",
            expected: id_relevance.cols(),
            found: ood_relevance.cols(),
        });
    }
    if window == 0 {
        return Err(Error::invalid("window", "must be at least 1"));
    }
    let id_mean = mean_abs_columns(id_relevance);
    let ood_mean = mean_abs_columns(ood_relevance);
    let mut order: Vec<usize> = (0..id_mean.len()).collect();
    order.sort_by(|&a, &b| id_mean[b].total_cmp(&id_mean[a]).then(a.cmp(&b)));
    let ood_sorted: Vec<f64> = order.iter().map(|&c| ood_mean[c]).collect();
    let smoothed = moving_average(&ood_sorted, window);
    Ok(order
        .iter()
        .enumerate()
        .map(|(rank, &c)| ChannelProfileRow {
            rank,
            channel: c,
            id_mean: id_mean[c],
            ood_mean: ood_mean[c],
            ood_moving_average: smoothed[rank],
        })
        .collect())
}

/// Mean over channels of `id_mean - ood_mean`.
pub fn mean_separation(rows: &[ChannelProfileRow]) -> f64 {
    rows.iter().map(|r| r.id_mean - r.ood_mean).sum::<f64>() / rows.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn k_grid() {
        assert_eq!(default_k_grid(32), vec![1, 8, 16, 24, 32]);
        assert_eq!(default_k_grid(1), vec![1]);
        assert_eq!(default_k_grid(2), vec![1, 2]);
    }

    #[test]
    fn moving_average_edges() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 3), vec![1.5, 2.0, 3.0, 3.5]);
        assert_eq!(moving_average(&[1.0, 2.0], 1), vec![1.0, 2.0]);
    }

    #[test]
    fn profile_sorted_by_id_mean() {
        let id = Matrix::from_rows(&[[1.0, -5.0, 2.0], [1.0, 5.0, -2.0]]).unwrap();
        let ood = Matrix::from_rows(&[[0.5, 1.0, 0.0], [0.5, 1.0, 0.0]]).unwrap();
        let rows = channel_profile(&id, &ood, 3).unwrap();
        let channels: Vec<usize> = rows.iter().map(|r| r.channel).collect();
        assert_eq!(channels, vec![1, 2, 0]);
        assert_eq!(rows[0].id_mean, 5.0);
        assert_eq!(rows[0].ood_moving_average, 0.5);
        assert!(mean_separation(&rows) > 0.0);
        assert!(channel_profile(&id, &ood, 0).is_err());
    }
}
