//! Labeled semantic precision/recall/F1 and predicate-sense accuracy.

use std::fmt;

use thiserror::Error;

use crate::conll::Sentence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {gold} sentences, prediction has {predicted}")]
    SentenceCount { gold: usize, predicted: usize },
    #[error("sentence {sentence}: {message}")]
    Misaligned { sentence: usize, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pd_accuracy: Option<f64>,
    pub correct: u64,
    pub predicted: u64,
    pub gold: u64,
    /// Predicates whose gold sense is empty; they never enter sense counts.
    pub senses_skipped: u64,
}

impl ScoreReport {
    fn from_counts(correct: u64, predicted: u64, gold: u64) -> ScoreReport {
        let precision = if predicted == 0 { 0.0 } else { correct as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { correct as f64 / gold as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ScoreReport {
            precision,
            recall,
            f1,
            correct,
            predicted,
            gold,
            ..ScoreReport::default()
        }
    }

    /// `P<TAB>R<TAB>F1<TAB>PD`, with `-` for an unavailable PD.
    pub fn line(&self) -> String {
        let pd = self
            .pd_accuracy
            .map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
        format!("{:.6}\t{:.6}\t{:.6}\t{pd}", self.precision, self.recall, self.f1)
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "labeled precision  {:>8.2}%  ({}/{})", 100.0 * self.precision, self.correct, self.predicted)?;
        writeln!(f, "labeled recall     {:>8.2}%  ({}/{})", 100.0 * self.recall, self.correct, self.gold)?;
        writeln!(f, "labeled F1         {:>8.2}%", 100.0 * self.f1)?;
        match self.pd_accuracy {
            Some(pd) => writeln!(f, "sense accuracy     {:>8.2}%", 100.0 * pd)?,
            None => writeln!(f, "sense accuracy            -")?,
        }
        write!(f, "empty gold senses  {:>8}", self.senses_skipped)
    }
}

fn check_aligned(gold: &[Sentence], predicted: &[Sentence]) -> Result<(), EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let fail = |message: String| EvalError::Misaligned {
            sentence: i + 1,
            message,
        };
        if g.len() != p.len() {
            return Err(fail(format!("{} gold tokens, {} predicted", g.len(), p.len())));
        }
        if g.predicates() != p.predicates() {
            return Err(fail(format!(
                "predicates {:?} vs {:?}",
                g.predicates(),
                p.predicates()
            )));
        }
    }
    Ok(())
}

#[derive(Default)]
struct Counts {
    arcs_correct: u64,
    arcs_pred: u64,
    arcs_gold: u64,
    senses_correct: u64,
    senses_pred: u64,
    senses_gold: u64,
    skipped: u64,
}

fn count(gold: &[Sentence], predicted: &[Sentence]) -> Counts {
    let mut c = Counts::default();
    for (g, p) in gold.iter().zip(predicted) {
        for (gt, pt) in g.tokens().iter().zip(p.tokens()) {
            for (ga, pa) in gt.apreds.iter().zip(&pt.apreds) {
                c.arcs_gold += ga.is_some() as u64;
                c.arcs_pred += pa.is_some() as u64;
                c.arcs_correct += (ga.is_some() && ga == pa) as u64;
            }
        }
        for &id in g.predicates() {
            match &g.token(id).pred_sense {
                None => c.skipped += 1,
                Some(gs) => {
                    let ps = &p.token(id).pred_sense;
                    c.senses_gold += 1;
                    c.senses_pred += ps.is_some() as u64;
                    c.senses_correct += (ps.as_ref() == Some(gs)) as u64;
                }
            }
        }
    }
    c
}

/// Scores (predicate, argument, role) arcs by exact match, plus one
/// (predicate, sense) item per predicate when `include_senses` is set.
pub fn score(
    gold: &[Sentence],
    predicted: &[Sentence],
    include_senses: bool,
) -> Result<ScoreReport, EvalError> {
    check_aligned(gold, predicted)?;
    let c = count(gold, predicted);
    let mut report = if include_senses {
        ScoreReport::from_counts(
            c.arcs_correct + c.senses_correct,
            c.arcs_pred + c.senses_pred,
            c.arcs_gold + c.senses_gold,
        )
    } else {
        ScoreReport::from_counts(c.arcs_correct, c.arcs_pred, c.arcs_gold)
    };
    report.pd_accuracy = (c.senses_gold > 0).then(|| c.senses_correct as f64 / c.senses_gold as f64);
    report.senses_skipped = c.skipped;
    Ok(report)
}

/// Fraction of predicates (with a gold sense) whose predicted sense matches.
pub fn pd_accuracy(gold: &[Sentence], predicted: &[Sentence]) -> Result<Option<f64>, EvalError> {
    Ok(score(gold, predicted, false)?.pd_accuracy)
}

/// Copies predicate senses from `senses` into `corpus`.
pub fn merge_senses(corpus: &[Sentence], senses: &[Sentence]) -> Result<Vec<Sentence>, EvalError> {
    check_aligned(corpus, senses)?;
    Ok(corpus
        .iter()
        .zip(senses)
        .map(|(c, s)| {
            let mut out = c.clone();
            for &id in s.predicates() {
                out.tokens_mut()[id - 1].pred_sense = s.token(id).pred_sense.clone();
            }
            out
        })
        .collect())
}
