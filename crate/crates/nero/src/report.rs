//! Report and table files written by the evaluation commands.

use std::fmt::Write as _;
use std::path::Path;

use nero_core::analysis::{ChannelProfileRow, SweepRow};
use nero_core::metrics::EvalReport;
use nero_core::{RelevanceBatch, ScoreBreakdown};

use crate::bundle_io::{create_dir, read_json, write_json};
use crate::csv_io::write_text;
use crate::error::Result;

pub const RESULTS_HEADER: &str = "method,auroc,fpr95,threshold,n_id,n_ood";

/// One row per report, in the given order.
pub fn results_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{},{}",
            r.method_name, r.auroc, r.fpr95, r.threshold, r.n_id, r.n_ood
        )
        .unwrap();
    }
    out
}

/// Per-sample scores, ID rows first.
pub fn scores_csv(id: &[f64], ood: &[f64]) -> String {
    let mut out = String::from("split,index,score\n");
    for (split, scores) in [("test_id", id), ("test_ood", ood)] {
        for (i, s) in scores.iter().enumerate() {
            writeln!(out, "{split},{i},{s:?}").unwrap();
        }
    }
    out
}

pub fn breakdown_csv(labels: &[i64], rows: &[ScoreBreakdown]) -> String {
    let mut out = String::from("index,label,score,min_distance,argmin_class,bias_term,scale_factor\n");
    for (i, (l, b)) in labels.iter().zip(rows).enumerate() {
        writeln!(
            out,
            "{i},{l},{:?},{:?},{},{:?},{:?}",
            b.score, b.min_distance, b.argmin_class, b.bias_term, b.scale_factor
        )
        .unwrap();
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("k,k_fraction,auroc,fpr95\n");
    for r in rows {
        writeln!(out, "{},{:?},{:?},{:?}", r.k, r.k_fraction, r.auroc, r.fpr95).unwrap();
    }
    out
}

pub fn profile_csv(rows: &[ChannelProfileRow]) -> String {
    let mut out = String::from("rank,channel,id_mean,ood_mean,ood_moving_average\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{:?},{:?},{:?}",
            r.rank, r.channel, r.id_mean, r.ood_mean, r.ood_moving_average
        )
        .unwrap();
    }
    out
}

/// `n x (d + 1)` headerless matrix; the last column is the bias relevance.
pub fn relevance_csv(batch: &RelevanceBatch) -> String {
    let mut out = String::new();
    let mut row = Vec::with_capacity(batch.neuron.cols() + 1);
    for (r, b) in batch.neuron.row_iter().zip(&batch.bias) {
        row.clear();
        row.extend_from_slice(r);
        row.push(*b);
        crate::csv_io::push_row(&mut out, &row);
    }
    out
}

/// `reports/<method>.json` for each report plus the combined `results.csv`.
pub fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    let report_dir = dir.join("reports");
    create_dir(&report_dir)?;
    for r in reports {
        write_json(&report_dir.join(format!("{}.json", r.method_name)), r)?;
    }
    write_text(&dir.join("results.csv"), &results_csv(reports))
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    read_json(path)
}
