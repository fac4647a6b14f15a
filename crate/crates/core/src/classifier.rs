//! Zero-shot decision and differential attack score.
//!
//! `score = cos(e, attack) - cos(e, bona_fide)`. A sample is declared an
//! attack unless the bona-fide similarity is strictly larger, so a score
//! of exactly zero counts as an attack and thresholding the score at 0
//! reproduces the hard decision.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{
    l2_normalize, unit_cosine, Embedding, EmbeddingError, Label, UnitEmbedding,
};
use crate::manifest::SampleRef;
use crate::prompts::ClassPrototype;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub subset: String,
    pub truth: Label,
    /// Higher is more attack-like, bounded by [-2, 2].
    pub score: f64,
    pub decision: Label,
}

/// Label for a differential score.
pub fn decide(score: f64) -> Label {
    if score >= 0.0 {
        Label::Attack
    } else {
        Label::BonaFide
    }
}

/// Scores one normalized image embedding against the prototypes. Returns
/// the differential score and the decision.
pub fn score_sample(
    e_i: &UnitEmbedding,
    proto: &ClassPrototype,
) -> Result<(f64, Label), EmbeddingError> {
    let to_bf = unit_cosine(e_i, &proto.bona_fide)?;
    let to_ma = unit_cosine(e_i, &proto.attack)?;
    let score = to_ma - to_bf;
    Ok((score, decide(score)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedSample {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    pub records: Vec<ScoreRecord>,
    pub skipped: Vec<SkippedSample>,
}

/// Embeds, normalizes and scores every sample. Output order follows the
/// input order. Samples whose embedding fails are logged and skipped.
///
/// Work is spread over the current rayon pool.
pub fn classify_batch<F, E>(samples: &[SampleRef], embed: F, proto: &ClassPrototype) -> BatchOutcome
where
    F: Fn(&SampleRef) -> Result<Embedding, E> + Sync,
    E: std::fmt::Display,
{
    let results: Vec<Result<ScoreRecord, SkippedSample>> = samples
        .par_iter()
        .map(|sample| {
            let skip = |reason: String| SkippedSample {
                id: sample.id.clone(),
                reason,
            };
            let raw = embed(sample).map_err(|e| skip(e.to_string()))?;
            let unit = l2_normalize(&raw).map_err(|e| skip(e.to_string()))?;
            let (score, decision) = score_sample(&unit, proto).map_err(|e| skip(e.to_string()))?;
            Ok(ScoreRecord {
                sample_id: sample.id.clone(),
                subset: sample.subset.clone(),
                truth: sample.label,
                score,
                decision,
            })
        })
        .collect();

    let mut outcome = BatchOutcome::default();
    for r in results {
        match r {
            Ok(rec) => outcome.records.push(rec),
            Err(skip) => {
                log::warn!("skipping sample {}: {}", skip.id, skip.reason);
                outcome.skipped.push(skip);
            }
        }
    }
    outcome
}

/// `%.{digits}g`-style formatting.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Error)]
pub enum ScoreCsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Writes `sample_id,subset,truth,score,decision` with 9 significant
/// digits for the score.
pub fn write_scores_csv<W: io::Write>(records: &[ScoreRecord], w: W) -> Result<(), ScoreCsvError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["sample_id", "subset", "truth", "score", "decision"])?;
    for r in records {
        wtr.write_record([
            r.sample_id.as_str(),
            r.subset.as_str(),
            &r.truth.to_string(),
            &format_significant(r.score, 9),
            &r.decision.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: io::Read>(r: R) -> Result<Vec<ScoreRecord>, ScoreCsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    Ok(rdr.deserialize().collect::<Result<Vec<ScoreRecord>, _>>()?)
}
