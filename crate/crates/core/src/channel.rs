//! BPSK over AWGN, hard decisions, and blind noise estimation.
//!
//! A bit `c` is sent as the symbol `1 - 2c` and received as `r = b + v` with
//! `v ~ N(0, σ²)`. The received symbols double as the frame's LLRs.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

/// Floor applied to the blind variance estimate.
pub const SIGMA2_FLOOR: f64 = 1e-9;

/// Standard normal upper tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One received frame: the real symbols and their hard decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrFrame {
    symbols: Vec<f64>,
    hard_bits: Vec<u8>,
}

impl LlrFrame {
    /// Hard decision: a negative symbol decodes to 1, everything else to 0.
    pub fn new(symbols: Vec<f64>) -> Self {
        let hard_bits = symbols.iter().map(|&r| (r < 0.0) as u8).collect();
        LlrFrame { symbols, hard_bits }
    }

    pub fn symbols(&self) -> &[f64] {
        &self.symbols
    }

    pub fn hard_bits(&self) -> &[u8] {
        &self.hard_bits
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Channel quantities derived from a noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub sigma2: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
    /// Noise spectral density, `2σ²`.
    pub n0: f64,
    /// Bit-error probability `Q(1/σ)`.
    pub p_e: f64,
}

impl ChannelParams {
    pub fn from_sigma2(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive and finite, got {sigma2}"
            )));
        }
        let snr_linear = 1.0 / sigma2;
        Ok(ChannelParams {
            sigma2,
            snr_linear,
            snr_db: 10.0 * snr_linear.log10(),
            n0: 2.0 * sigma2,
            p_e: q_function(snr_linear.sqrt()),
        })
    }

    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::InvalidParameter(format!("SNR must be finite, got {snr_db}")));
        }
        Self::from_sigma2(10f64.powf(-snr_db / 10.0))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Seed for frame `index` of a stream rooted at `seed`.
pub fn frame_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index)
}

/// Modulates and corrupts a single codeword.
pub fn transmit_word(codeword: &[u8], sigma: f64, rng: &mut impl rand::Rng) -> LlrFrame {
    let symbols = codeword
        .iter()
        .map(|&c| {
            let b = 1.0 - 2.0 * c as f64;
            let v: f64 = StandardNormal.sample(rng);
            b + sigma * v
        })
        .collect();
    LlrFrame::new(symbols)
}

/// Sends every row of `codewords` through the channel.
///
/// Row `i` draws its noise from a generator seeded with `frame_seed(seed, i)`,
/// so the output does not depend on how the work is split across threads.
pub fn transmit(codewords: &BitMatrix, sigma2: f64, seed: u64) -> Result<Vec<LlrFrame>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive and finite, got {sigma2}"
        )));
    }
    let sigma = sigma2.sqrt();
    Ok((0..codewords.rows())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, i as u64));
            transmit_word(&codewords.row_bits(i), sigma, &mut rng)
        })
        .collect())
}

/// Unbiased sample variance (divisor `len - 1`).
fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Unbiased sample variance of a frame's symbols.
pub fn frame_variance(frame: &LlrFrame) -> f64 {
    sample_variance(frame.symbols())
}

/// Blind estimate from the mean per-frame variance, which is `1 + σ²`.
pub fn estimate_channel(frames: &[LlrFrame]) -> Result<ChannelParams> {
    if frames.is_empty() {
        return Err(Error::InvalidParameter("no frames to estimate from".into()));
    }
    if let Some(short) = frames.iter().find(|f| f.len() < 2) {
        return Err(Error::Dimension(format!(
            "frames need at least 2 symbols, found one with {}",
            short.len()
        )));
    }
    let mean_var = frames.iter().map(|f| sample_variance(f.symbols())).sum::<f64>() / frames.len() as f64;
    ChannelParams::from_sigma2((mean_var - 1.0).max(SIGMA2_FLOOR))
}

/// Reads frames in the text format: one frame per line, symbols separated by spaces.
///
/// Blank lines are skipped. Every frame must have the same length, and `n`
/// when given.
pub fn read_frames<R: BufRead>(reader: R, n: Option<usize>) -> Result<Vec<LlrFrame>> {
    let mut frames = Vec::new();
    let mut expected = n;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let symbols = line
            .split_whitespace()
            .map(|tok| match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(line_no, format!("`{tok}` is not a finite number"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        match expected {
            Some(len) if len != symbols.len() => {
                return Err(Error::parse(
                    line_no,
                    format!("frame has {} symbols, expected {len}", symbols.len()),
                ))
            }
            None => expected = Some(symbols.len()),
            _ => {}
        }
        frames.push(LlrFrame::new(symbols));
    }
    Ok(frames)
}

/// Writes frames in the text format. Values round-trip exactly through [`read_frames`].
pub fn write_frames<W: Write>(mut writer: W, frames: &[LlrFrame]) -> std::io::Result<()> {
    for f in frames {
        let mut first = true;
        for s in f.symbols() {
            if !first {
                writer.write_all(b" ")?;
            }
            first = false;
            writer.write_all(crate::text::real(*s).as_bytes())?;
        }
        writer.write_all(b"\n")?;
    }
    Ok(())
}
