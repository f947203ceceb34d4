//! Frame-level precision and recall of predicted state timelines.

use std::io::Write;

use thiserror::Error;

use crate::reasoner::TimelineRow;
use crate::simulator::GroundTruthTimeline;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("predicted timeline covers {predicted} frames but ground truth covers {gt}")]
    RangeMismatch { predicted: u64, gt: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameMatch {
    pub frame: u64,
    pub predicted: Option<usize>,
    pub gt: usize,
    /// The prediction equals the ground truth somewhere within the tolerance.
    pub matched: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimelineComparison {
    pub precision: f64,
    pub recall: f64,
    pub per_frame: Vec<FrameMatch>,
    pub tolerance: u64,
    pub matched_predicted: u64,
    pub total_predicted: u64,
    pub matched_gt: u64,
    pub total_gt: u64,
}

/// Which timeline column is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PredictionSource {
    /// Viterbi path.
    #[default]
    Path,
    /// Online argmax.
    Map,
}

/// Compares one prediction per frame (`None` where nothing was predicted)
/// with the ground truth. A predicted frame counts as matched when its state
/// equals the ground truth at any frame within `tol`; a ground-truth frame
/// counts as recalled when some prediction within `tol` equals it.
pub fn evaluate(
    predicted: &[Option<usize>],
    gt: &GroundTruthTimeline,
    tol: u64,
) -> Result<TimelineComparison, EvalError> {
    let truth = gt.per_frame();
    if predicted.len() != truth.len() {
        return Err(EvalError::RangeMismatch {
            predicted: predicted.len() as u64,
            gt: truth.len() as u64,
        });
    }
    let n = truth.len();
    let tol = tol as usize;
    let window = |f: usize| f.saturating_sub(tol)..(f + tol + 1).min(n);

    let mut per_frame = Vec::with_capacity(n);
    let (mut matched_predicted, mut total_predicted, mut matched_gt) = (0u64, 0u64, 0u64);
    for f in 0..n {
        let matched = match predicted[f] {
            Some(p) => {
                total_predicted += 1;
                let hit = truth[window(f)].contains(&p);
                matched_predicted += u64::from(hit);
                hit
            }
            None => false,
        };
        if predicted[window(f)].contains(&Some(truth[f])) {
            matched_gt += 1;
        }
        per_frame.push(FrameMatch {
            frame: f as u64,
            predicted: predicted[f],
            gt: truth[f],
            matched,
        });
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(TimelineComparison {
        precision: ratio(matched_predicted, total_predicted),
        recall: ratio(matched_gt, n as u64),
        per_frame,
        tolerance: tol as u64,
        matched_predicted,
        total_predicted,
        matched_gt,
        total_gt: n as u64,
    })
}

/// Per-frame predictions from timeline rows; frames without a row are `None`.
/// Rows past the end of the ground truth are a range mismatch.
pub fn predictions_from_rows(
    rows: &[TimelineRow],
    frames: u64,
    source: PredictionSource,
) -> Result<Vec<Option<usize>>, EvalError> {
    let mut out = vec![None; frames as usize];
    for r in rows {
        if r.frame >= frames {
            return Err(EvalError::RangeMismatch {
                predicted: rows.iter().map(|r| r.frame + 1).max().unwrap_or(0),
                gt: frames,
            });
        }
        out[r.frame as usize] = Some(match source {
            PredictionSource::Path => r.state_index,
            PredictionSource::Map => r.map_state,
        });
    }
    Ok(out)
}

/// Writes `frame,predicted,gt,matched`; a missing prediction is an empty field.
pub fn write_per_frame_csv<W: Write>(out: W, per_frame: &[FrameMatch]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "predicted", "gt", "matched"])?;
    for m in per_frame {
        w.write_record([
            m.frame.to_string(),
            m.predicted.map(|p| p.to_string()).unwrap_or_default(),
            m.gt.to_string(),
            u8::from(m.matched).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
