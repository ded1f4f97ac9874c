//! Monte Carlo harness: end-to-end trials over an SNR sweep and the
//! toy-model rank-increase experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{transmit_word, LlrFrame};
use crate::codes::LinearCode;
use crate::error::{Error, Result};
use crate::estimator::{recover, Correction, ParamMode, RecoveryReport};
use crate::filter::build_word_matrix;
use crate::gf2::{rank, BitMatrix};
use crate::text::real;
use crate::theory::{metrics, rank_increase_bound, RankIncreaseBound, TheoryInputs, ToyModelParams};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one frame of one trial; each frame can be regenerated alone.
pub fn derive_seed(base: u64, snr_index: u64, trial: u64, frame: u64) -> u64 {
    [snr_index, trial, frame]
        .into_iter()
        .fold(splitmix(base), |acc, v| splitmix(acc ^ splitmix(v)))
}

/// `σ² = 10^(-snr_db / 10)`.
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Random messages of one trial, their codewords and the received frames.
pub fn generate_frames(
    code: &LinearCode,
    messages: usize,
    snr_db: f64,
    base: u64,
    snr_index: u64,
    trial: u64,
) -> Result<(BitMatrix, Vec<LlrFrame>)> {
    let sigma = sigma2_from_snr_db(snr_db).sqrt();
    let k = code.k();
    let pairs: Vec<(Vec<u8>, LlrFrame)> = (0..messages)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, snr_index, trial, i as u64));
            let msg: Vec<u8> = (0..k).map(|_| rng.random_range(0..2u8)).collect();
            let cw = code.encode(&msg)?;
            let frame = transmit_word(&cw, sigma, &mut rng);
            Ok((cw, frame))
        })
        .collect::<Result<_>>()?;
    let mut codewords = BitMatrix::zeros(0, code.n());
    let mut frames = Vec::with_capacity(messages);
    for (cw, frame) in pairs {
        codewords.push_row(&cw)?;
        frames.push(frame);
    }
    Ok((codewords, frames))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSetup {
    /// Frames transmitted per trial.
    pub messages: usize,
    pub mode: ParamMode,
    pub correction: Correction,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub snr_db: f64,
    pub trial: usize,
    pub k_prime: usize,
    /// Expected erroneous columns at the true noise level.
    pub e_c_theory: f64,
    /// Word-matrix columns that actually contain an error.
    pub c_observed: usize,
    pub rho_naive: f64,
    /// Corrected with the estimated channel.
    pub rho_corrected: f64,
    /// Corrected with `e_c_theory` instead.
    pub rho_corrected_true: f64,
    pub frames_consumed: usize,
    pub report: RecoveryReport,
}

pub const TRIAL_CSV_HEADER: &str = "snr_db,trial,k_prime,e_c_theory,c_observed,rho_naive,rho_corrected,frames_consumed";

impl TrialResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            real(self.snr_db),
            self.trial,
            self.k_prime,
            real(self.e_c_theory),
            self.c_observed,
            real(self.rho_naive),
            real(self.rho_corrected),
            self.frames_consumed
        )
    }
}

/// Columns in which some selected frame's hard decision differs from its codeword.
pub fn columns_in_error(word_matrix: &BitMatrix, codewords: &BitMatrix, selected: &[usize]) -> usize {
    let words = word_matrix.row_words(0).len();
    let mut hit = vec![0u64; words];
    for (row, &idx) in selected.iter().enumerate() {
        for ((h, a), b) in hit.iter_mut().zip(word_matrix.row_words(row)).zip(codewords.row_words(idx)) {
            *h |= a ^ b;
        }
    }
    hit.iter().map(|w| w.count_ones() as usize).sum()
}

pub fn run_trial(
    code: &LinearCode,
    snr_db: f64,
    snr_index: usize,
    trial: usize,
    setup: &SimulationSetup,
) -> Result<TrialResult> {
    let n = code.n();
    let (codewords, frames) = generate_frames(code, setup.messages, snr_db, setup.seed, snr_index as u64, trial as u64)?;
    let report = recover(&frames, n, &setup.mode, setup.correction)?;
    let outcome = build_word_matrix(&frames, &report.params)?;
    let c_observed = columns_in_error(&outcome.word_matrix, &codewords, &outcome.selected);

    let theory = metrics(&TheoryInputs {
        n,
        m_s: report.m_s,
        sigma: sigma2_from_snr_db(snr_db).sqrt(),
        t1: report.params.t1,
        t2: report.params.t2,
    })?;
    let e_c_theory = match setup.correction {
        Correction::Full => theory.e_c_full,
        _ => theory.e_c_exact,
    };
    Ok(TrialResult {
        snr_db,
        trial,
        k_prime: report.k_prime,
        e_c_theory,
        c_observed,
        rho_naive: report.rho_naive,
        rho_corrected: report.rho_corrected,
        rho_corrected_true: crate::estimator::corrected_rate(report.k_prime, n, e_c_theory).value,
        frames_consumed: report.frames_consumed,
        report,
    })
}

/// All `(snr, trial)` pairs, run in parallel and returned in sweep order.
pub fn sweep(code: &LinearCode, snrs: &[f64], trials: usize, setup: &SimulationSetup) -> Vec<Result<TrialResult>> {
    let jobs: Vec<(usize, usize)> = (0..snrs.len()).flat_map(|s| (0..trials).map(move |t| (s, t))).collect();
    jobs.into_par_iter()
        .map(|(s, t)| run_trial(code, snrs[s], s, t, setup))
        .collect()
}

/// Outcome of the toy-model experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub d: usize,
    pub m_s: usize,
    pub p_e_prime: f64,
    pub trials: usize,
    /// Trials with full-rank message columns and at least one flipped bit.
    pub conditioned: usize,
    pub rank_increases: usize,
    pub observed: Option<f64>,
    pub standard_error: Option<f64>,
    /// `None` when `p_e_prime = 0`.
    pub bound: Option<RankIncreaseBound>,
    /// Observed frequency at least the bound minus three standard errors.
    pub pass: Option<bool>,
}

/// Builds `d` random columns plus their XOR, flips every bit with
/// probability `p_e_prime`, and counts how often the rank grows past `d`.
pub fn verify_theorem1(d: usize, m_s: usize, p_e_prime: f64, trials: usize, seed: u64) -> Result<Theorem1Report> {
    let bound = if p_e_prime == 0.0 {
        if !(m_s > d && d >= 1) {
            return Err(Error::InvalidParameter(format!("need m_s > d >= 1, got d = {d}, m_s = {m_s}")));
        }
        None
    } else {
        Some(rank_increase_bound(&ToyModelParams::new(d, m_s, p_e_prime)?))
    };

    let outcomes: Vec<Option<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, t as u64, 0));
            let mut w = BitMatrix::random(m_s, d + 1, &mut rng);
            for r in 0..m_s {
                let parity = (0..d).fold(false, |acc, c| acc ^ w.get(r, c));
                w.set(r, d, parity);
            }
            let clean = rank(&w);
            let mut flipped = 0usize;
            for r in 0..m_s {
                for c in 0..=d {
                    if rng.random_bool(p_e_prime) {
                        w.flip(r, c);
                        flipped += 1;
                    }
                }
            }
            (clean == d && flipped > 0).then(|| rank(&w) > d)
        })
        .collect();

    let conditioned = outcomes.iter().flatten().count();
    let rank_increases = outcomes.iter().flatten().filter(|&&b| b).count();
    let observed = (conditioned > 0).then(|| rank_increases as f64 / conditioned as f64);
    let standard_error = observed.map(|f| (f * (1.0 - f) / conditioned as f64).sqrt());
    let pass = match (observed, standard_error, bound) {
        (Some(f), Some(se), Some(b)) => Some(f >= b.bound - 3.0 * se),
        _ => None,
    };
    Ok(Theorem1Report {
        d,
        m_s,
        p_e_prime,
        trials,
        conditioned,
        rank_increases,
        observed,
        standard_error,
        bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::FilterParams;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(1, 0, 0, 0);
        assert_eq!(a, derive_seed(1, 0, 0, 0));
        let mut all = std::collections::HashSet::new();
        for s in 0..4 {
            for t in 0..4 {
                for f in 0..4 {
                    assert!(all.insert(derive_seed(1, s, t, f)));
                }
            }
        }
        assert_ne!(derive_seed(1, 1, 0, 0), derive_seed(1, 0, 1, 0));
    }

    #[test]
    fn single_frame_is_reproducible_alone() {
        let code = LinearCode::random(40, 12, 3).unwrap();
        let (_, all) = generate_frames(&code, 10, 8.0, 9, 2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(9, 2, 5, 7));
        let msg: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
        let frame = transmit_word(&code.encode(&msg).unwrap(), sigma2_from_snr_db(8.0).sqrt(), &mut rng);
        assert_eq!(frame, all[7]);
    }

    #[test]
    fn noiseless_trial() {
        let code = LinearCode::random(96, 30, 4).unwrap();
        let setup = SimulationSetup {
            messages: 200,
            mode: ParamMode::Explicit(FilterParams::new(0.3, 48, 96).unwrap()),
            correction: Correction::Exact,
            seed: 1,
        };
        let r = run_trial(&code, 120.0, 0, 0, &setup).unwrap();
        assert_eq!(r.c_observed, 0);
        assert_eq!(r.k_prime, 30);
        assert_eq!(r.rho_naive, 30.0 / 96.0);
        assert!(r.e_c_theory < 1e-12);
    }

    #[test]
    fn sweep_order_and_determinism() {
        let code = LinearCode::random(64, 20, 5).unwrap();
        let setup = SimulationSetup {
            messages: 150,
            mode: ParamMode::Explicit(FilterParams::new(0.3, 32, 64).unwrap()),
            correction: Correction::Exact,
            seed: 2,
        };
        let a: Vec<_> = sweep(&code, &[8.0, 12.0], 3, &setup).into_iter().map(Result::unwrap).collect();
        let b: Vec<_> = sweep(&code, &[8.0, 12.0], 3, &setup).into_iter().map(Result::unwrap).collect();
        assert_eq!(a, b);
        let keys: Vec<_> = a.iter().map(|r| (r.snr_db, r.trial)).collect();
        assert_eq!(keys, vec![(8.0, 0), (8.0, 1), (8.0, 2), (12.0, 0), (12.0, 1), (12.0, 2)]);
        assert_eq!(a[0].csv_row().split(',').count(), TRIAL_CSV_HEADER.split(',').count());
    }

    #[test]
    fn column_error_count() {
        let cw = BitMatrix::from_rows(&[[0u8, 1, 0, 1], [1, 1, 1, 1]]).unwrap();
        let w = BitMatrix::from_rows(&[[1u8, 1, 1, 1], [0, 1, 0, 1]]).unwrap();
        assert_eq!(columns_in_error(&w, &cw, &[1, 0]), 0);
        assert_eq!(columns_in_error(&w, &cw, &[0, 1]), 2);
    }

    #[test]
    fn theorem1_small_case() {
        let r = verify_theorem1(4, 200, 0.01, 500, 3).unwrap();
        assert!(r.conditioned > 450);
        assert_eq!(r.pass, Some(true));
        assert!(r.observed.unwrap() > 0.9);
    }

    #[test]
    fn theorem1_without_errors() {
        let r = verify_theorem1(4, 50, 0.0, 100, 3).unwrap();
        assert_eq!(r.conditioned, 0);
        assert_eq!(r.observed, None);
        assert_eq!(r.bound, None);
        assert_eq!(r.pass, None);
        assert!(verify_theorem1(4, 4, 0.0, 10, 3).is_err());
        assert!(verify_theorem1(4, 40, 1.5, 10, 3).is_err());
    }
}
