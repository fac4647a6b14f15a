//! Evaluation reports: one metric row per attack subset, each measured
//! against the shared bona-fide pool, followed by Average and Worst rows.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::classifier::ScoreRecord;
use crate::embedding::Label;
use crate::metrics::{aggregate_rows, MetricError, MetricReport, ScoreSplit};

/// Settings echoed into a report so the file is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub selector: String,
    pub dot_mode: bool,
    pub normalization: String,
    pub normalize_before_average: bool,
    pub prompt_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub settings: Option<ReportSettings>,
    pub subsets: Vec<MetricReport>,
    pub average: MetricReport,
    pub worst: MetricReport,
}

/// Evaluates every attack subset found in `records` against all bona-fide
/// records. Subsets appear in order of first occurrence.
pub fn evaluate_subsets(records: &[ScoreRecord]) -> Result<EvalReport, MetricError> {
    let bona_fide: Vec<f64> = records
        .iter()
        .filter(|r| r.truth == Label::BonaFide)
        .map(|r| r.score)
        .collect();
    let mut subsets: Vec<&str> = Vec::new();
    for r in records.iter().filter(|r| r.truth == Label::Attack) {
        if !subsets.contains(&r.subset.as_str()) {
            subsets.push(&r.subset);
        }
    }
    if subsets.is_empty() {
        return Err(MetricError::DegenerateClassCounts {
            n_bf: bona_fide.len(),
            n_attack: 0,
        });
    }
    let mut reports = Vec::with_capacity(subsets.len());
    for name in subsets {
        let subset_records = records
            .iter()
            .filter(|r| r.truth == Label::BonaFide || r.subset == name);
        let split = ScoreSplit::from_records(subset_records)?;
        debug_assert_eq!(split.bona_fide, bona_fide);
        reports.push(MetricReport::from_split(name, &split));
    }
    let (average, worst) = aggregate_rows(&reports)?;
    Ok(EvalReport {
        settings: None,
        subsets: reports,
        average,
        worst,
    })
}

impl EvalReport {
    pub fn rows(&self) -> impl Iterator<Item = &MetricReport> {
        self.subsets.iter().chain([&self.average, &self.worst])
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// CSV mirror of the JSON report, two decimals per value.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "subset",
            "n_bf",
            "n_attack",
            "eer",
            "apcer_at_bpcer_1",
            "apcer_at_bpcer_10",
            "apcer_at_bpcer_20",
            "bpcer_at_apcer_1",
            "bpcer_at_apcer_10",
            "bpcer_at_apcer_20",
        ])?;
        for row in self.rows() {
            let mut fields = vec![
                row.subset.clone(),
                row.n_bf.to_string(),
                row.n_attack.to_string(),
            ];
            fields.extend(row.columns().iter().map(|v| format!("{v:.2}")));
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Fixed-width table for terminal output.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>7} | {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7}",
            "Test data", "EER", "A@B1", "A@B10", "A@B20", "B@A1", "B@A10", "B@A20"
        );
        for row in self.rows() {
            let c = row.columns();
            let flag = if row
                .constraint_flags
                .apcer_at_bpcer
                .values()
                .iter()
                .all(|&f| f)
                && row
                    .constraint_flags
                    .bpcer_at_apcer
                    .values()
                    .iter()
                    .all(|&f| f)
            {
                ""
            } else {
                " *"
            };
            let _ = writeln!(
                out,
                "{:<14} {:>7.2} | {:>7.2} {:>7.2} {:>7.2} | {:>7.2} {:>7.2} {:>7.2}{flag}",
                row.subset, c[0], c[1], c[2], c[3], c[4], c[5], c[6]
            );
        }
        out
    }
}
