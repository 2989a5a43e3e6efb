//! AUROC and FPR at a fixed ID true-positive rate.
//!
//! Scores follow "higher means more OOD". ID is the positive class: a sample
//! is accepted as ID when its score is at or below the threshold.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const DEFAULT_TPR: f64 = 0.95;

fn check_scores(scores: &[f64], what: &'static str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid(what, "contains NaN"));
    }
    Ok(())
}

/// `P(ood > id) + 0.5 P(ood == id)` over all pairs, via midranks.
///
/// Counts are kept as integers (doubled to absorb the half ties) so the
/// result is the exact pairwise fraction rounded once.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_scores(id_scores, "id scores")?;
    check_scores(ood_scores, "ood scores")?;
    let mut all: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s, false))
        .chain(ood_scores.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of doubled midranks of the OOD samples.
    let mut ood_rank2: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share the doubled midrank i + 1 + j.
        let doubled = (i + 1 + j) as u128;
        let ood_in_group = all[i..j].iter().filter(|e| e.1).count() as u128;
        ood_rank2 += doubled * ood_in_group;
        i = j;
    }
    let m = ood_scores.len() as u128;
    let n = id_scores.len() as u128;
    let u2 = ood_rank2 - m * (m + 1);
    Ok(u2 as f64 / (2 * n * m) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FprAtTpr {
    pub fpr: f64,
    /// Smallest realized ID score accepting at least the requested TPR.
    pub threshold: f64,
}

/// FPR at the smallest ID-score threshold whose ID acceptance rate reaches `tpr`.
pub fn fpr_at_tpr(id_scores: &[f64], ood_scores: &[f64], tpr: f64) -> Result<FprAtTpr> {
    check_scores(id_scores, "id scores")?;
    check_scores(ood_scores, "ood scores")?;
    if !(tpr > 0.0 && tpr <= 1.0) {
        return Err(Error::invalid("tpr", "must lie in (0, 1]"));
    }
    let mut sorted = id_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Smallest count k with k / n >= tpr.
    let k = (1..=n).find(|&k| k as f64 / n as f64 >= tpr).unwrap_or(n);
    let threshold = sorted[k - 1];
    let accepted = ood_scores.iter().filter(|&&s| s <= threshold).count();
    Ok(FprAtTpr {
        fpr: accepted as f64 / ood_scores.len() as f64,
        threshold,
    })
}

/// Result of evaluating one method on an ID/OOD pair of score arrays.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub method_name: String,
    pub auroc: f64,
    pub fpr95: f64,
    pub threshold: f64,
    pub n_id: usize,
    pub n_ood: usize,
    pub config: BTreeMap<String, String>,
}

pub fn evaluate(
    method_name: &str,
    id_scores: &[f64],
    ood_scores: &[f64],
    config: BTreeMap<String, String>,
) -> Result<EvalReport> {
    let auc = auroc(id_scores, ood_scores)?;
    let fpr = fpr_at_tpr(id_scores, ood_scores, DEFAULT_TPR)?;
    Ok(EvalReport {
        method_name: method_name.into(),
        auroc: auc,
        fpr95: fpr.fpr,
        threshold: fpr.threshold,
        n_id: id_scores.len(),
        n_ood: ood_scores.len(),
        config,
    })
}

/// Orders reports by AUROC, best first; equal AUROC falls back to method name.
pub fn sort_by_auroc(reports: &mut [EvalReport]) {
    reports.sort_by(|a, b| {
        b.auroc
            .total_cmp(&a.auroc)
            .then_with(|| a.method_name.cmp(&b.method_name))
    });
}
