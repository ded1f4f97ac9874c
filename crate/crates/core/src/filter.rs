//! Reliability filtering of received frames and word-matrix assembly.

use std::borrow::Borrow;

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::channel::LlrFrame;

/// Thresholds for the frame filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Symbols with `|r| < t1` are unreliable.
    pub t1: f64,
    /// Frames with at most `t2` unreliable symbols are suitable.
    pub t2: usize,
    /// Number of suitable frames to stack into the word matrix.
    pub m_s: usize,
}

impl FilterParams {
    pub fn new(t1: f64, t2: usize, m_s: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&t1) {
            return Err(Error::InvalidParameter(format!("t1 must lie in [0, 1], got {t1}")));
        }
        if m_s == 0 {
            return Err(Error::InvalidParameter("m_s must be at least 1".into()));
        }
        Ok(FilterParams { t1, t2, m_s })
    }

    /// Default row count `m_s = n`.
    pub fn with_default_rows(t1: f64, t2: usize, n: usize) -> Result<Self> {
        Self::new(t1, t2, n)
    }

    /// Checks `t2 <= n` for a code length.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.t2 > n {
            return Err(Error::InvalidParameter(format!("t2 = {} exceeds n = {n}", self.t2)));
        }
        Ok(())
    }
}

/// Result of filtering a frame stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    /// `m_s × n` hard decisions of the selected frames, in stream order.
    pub word_matrix: BitMatrix,
    /// Frames read from the stream, including the last selected one.
    pub frames_consumed: usize,
    /// Unreliable count of every consumed frame.
    pub unreliable_counts: Vec<usize>,
    /// Stream index of each word-matrix row.
    pub selected: Vec<usize>,
}

/// Number of symbols with `|r| < t1`.
pub fn unreliable_count(frame: &LlrFrame, t1: f64) -> usize {
    frame.symbols().iter().filter(|r| r.abs() < t1).count()
}

/// Reads frames in order, keeping those with at most `t2` unreliable symbols,
/// until `m_s` rows are collected.
pub fn build_word_matrix<I>(frames: I, params: &FilterParams) -> Result<FilterOutcome>
where
    I: IntoIterator,
    I::Item: Borrow<LlrFrame>,
{
    let mut word_matrix: Option<BitMatrix> = None;
    let mut unreliable_counts = Vec::new();
    let mut selected = Vec::with_capacity(params.m_s.min(1 << 16));
    let mut n = None;

    for (index, frame) in frames.into_iter().enumerate() {
        let frame = frame.borrow();
        match n {
            None => {
                params.validate_for(frame.len())?;
                n = Some(frame.len());
            }
            Some(len) if len != frame.len() => {
                return Err(Error::Dimension(format!(
                    "frame {index} has {} symbols, earlier frames have {len}",
                    frame.len()
                )))
            }
            _ => {}
        }
        let j = unreliable_count(frame, params.t1);
        unreliable_counts.push(j);
        if j <= params.t2 {
            word_matrix
                .get_or_insert_with(|| BitMatrix::zeros(0, frame.len()))
                .push_row(frame.hard_bits())?;
            selected.push(index);
            if selected.len() == params.m_s {
                return Ok(FilterOutcome {
                    word_matrix: word_matrix.expect("a row was pushed"),
                    frames_consumed: index + 1,
                    unreliable_counts,
                    selected,
                });
            }
        }
    }
    Err(Error::InsufficientData {
        collected: selected.len(),
        required: params.m_s,
    })
}
