//! The blind pipeline: channel estimate, filtering, rank, corrected rate.

use std::fmt;

use crate::channel::{estimate_channel, frame_variance, ChannelParams, LlrFrame};
use crate::error::{Error, Result};
use crate::filter::{build_word_matrix, FilterOutcome, FilterParams};
use crate::gf2::{rank_by_column_mean, rref};
use crate::text::real;
use crate::optimize::{optimize_in_band, OptimizationResult, DEFAULT_STEP, DEFAULT_TOLERANCE};
use crate::theory::{metrics, TheoryInputs, TheoryMetrics};

/// How the filter thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamMode {
    Explicit(FilterParams),
    /// Thresholds from the constrained search, with the whole stream as the
    /// frame budget. `m_s = None` means `m_s = n`.
    Auto {
        m_s: Option<usize>,
        step: f64,
        tolerance: f64,
    },
}

impl ParamMode {
    pub fn auto() -> Self {
        ParamMode::Auto { m_s: None, step: DEFAULT_STEP, tolerance: DEFAULT_TOLERANCE }
    }
}

/// Which expected-column-error figure is subtracted from the rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correction {
    /// Closed form from `m_s` and the filter's algorithmic error.
    #[default]
    Exact,
    /// `n·M·p_e·F(t2-1; n-1, p_u)` with `M` the observed frame count.
    ObservedFrames,
    /// Closed form that also counts errors on reliable symbols.
    Full,
}

impl Correction {
    pub fn name(self) -> &'static str {
        match self {
            Correction::Exact => "exact",
            Correction::ObservedFrames => "observed",
            Correction::Full => "full",
        }
    }
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Correction::Exact),
            "observed" => Ok(Correction::ObservedFrames),
            "full" => Ok(Correction::Full),
            _ => Err(Error::InvalidParameter(format!(
                "unknown correction '{s}', expected exact, observed or full"
            ))),
        }
    }
}

/// A rate after subtracting expected erroneous columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedRate {
    pub value: f64,
    /// `e_c >= n`; the correction was skipped.
    pub degenerate: bool,
    /// The raw ratio fell outside `[0, 1]`.
    pub clamped: bool,
}

/// `(k' - e_c) / (n - e_c)` clamped to `[0, 1]`.
pub fn corrected_rate(k_prime: usize, n: usize, e_c: f64) -> CorrectedRate {
    let naive = k_prime as f64 / n as f64;
    if !(e_c < n as f64) {
        return CorrectedRate { value: naive, degenerate: true, clamped: false };
    }
    if k_prime >= n {
        return CorrectedRate { value: 1.0, degenerate: false, clamped: k_prime > n };
    }
    let e_c = e_c.max(0.0);
    let raw = (k_prime as f64 - e_c) / (n as f64 - e_c);
    CorrectedRate {
        value: raw.clamp(0.0, 1.0),
        degenerate: false,
        clamped: !(0.0..=1.0).contains(&raw),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub n: usize,
    pub m_s: usize,
    pub frames_consumed: usize,
    pub k_prime: usize,
    pub pivot_count: usize,
    pub e_c: f64,
    pub rho_naive: f64,
    pub rho_corrected: f64,
    /// Estimated from the received frames.
    pub channel: ChannelParams,
    pub params: FilterParams,
    pub correction: Correction,
    /// Closed-form metrics at the estimated channel.
    pub theory: TheoryMetrics,
    /// Search result when thresholds were chosen automatically.
    pub search: Option<OptimizationResult>,
    /// Noise variance the automatic search planned with.
    pub planning_sigma2: Option<f64>,
    pub degenerate: bool,
    pub clamped: bool,
}

pub const REPORT_CSV_HEADER: &str = "n,m_s,frames_consumed,k_prime,e_c,rho_naive,rho_corrected,sigma2_hat,snr_db_hat,p_e_hat,t1,t2,correction,degenerate,clamped";

impl RecoveryReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.m_s,
            self.frames_consumed,
            self.k_prime,
            real(self.e_c),
            real(self.rho_naive),
            real(self.rho_corrected),
            real(self.channel.sigma2),
            real(self.channel.snr_db),
            real(self.channel.p_e),
            real(self.params.t1),
            self.params.t2,
            self.correction.name(),
            self.degenerate,
            self.clamped,
        )
    }
}

impl fmt::Display for RecoveryReport {
    /// Flat `key=value` block.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "m_s={}", self.m_s)?;
        writeln!(f, "frames_consumed={}", self.frames_consumed)?;
        writeln!(f, "k_prime={}", self.k_prime)?;
        writeln!(f, "pivot_count={}", self.pivot_count)?;
        writeln!(f, "e_c={}", real(self.e_c))?;
        writeln!(f, "rho_naive={}", real(self.rho_naive))?;
        writeln!(f, "rho_corrected={}", real(self.rho_corrected))?;
        writeln!(f, "sigma2_hat={}", real(self.channel.sigma2))?;
        writeln!(f, "snr_db_hat={}", real(self.channel.snr_db))?;
        writeln!(f, "p_e_hat={}", real(self.channel.p_e))?;
        writeln!(f, "t1={}", real(self.params.t1))?;
        writeln!(f, "t2={}", self.params.t2)?;
        writeln!(f, "correction={}", self.correction.name())?;
        writeln!(f, "acceptance={}", real(self.theory.acceptance))?;
        writeln!(f, "algorithmic_error={}", real(self.theory.algorithmic_error))?;
        writeln!(f, "degenerate={}", self.degenerate)?;
        write!(f, "clamped={}", self.clamped)
    }
}

/// Acceptance probability at which `m_s` suitable frames turn up among `m`
/// with about three standard deviations to spare.
fn acceptance_with_margin(m_s: usize, m: usize) -> f64 {
    let (m_s, m) = (m_s as f64, m as f64);
    let shortfall = |f: f64| f * m - 3.0 * (m * f * (1.0 - f)).sqrt() - m_s;
    let (mut lo, mut hi) = (m_s / m, 1.0);
    if shortfall(hi) < 0.0 {
        return hi;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if shortfall(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Noise variance for planning automatic thresholds: the estimate plus three
/// standard errors of the mean per-frame variance. The acceptance rate is
/// steep in `σ`, so planning at the bare estimate often runs out of frames.
fn planning_sigma2(frames: &[LlrFrame], estimate: f64) -> f64 {
    let vars: Vec<f64> = frames.iter().map(frame_variance).collect();
    let m = vars.len() as f64;
    if vars.len() < 2 {
        return estimate;
    }
    let mean = vars.iter().sum::<f64>() / m;
    let var = vars.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    estimate + 3.0 * (var / m).sqrt()
}

/// Runs the full pipeline over a frame stream of length-`n` frames.
pub fn recover(frames: &[LlrFrame], n: usize, mode: &ParamMode, correction: Correction) -> Result<RecoveryReport> {
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != n) {
        return Err(Error::Dimension(format!("frame {i} has {} symbols, expected {n}", f.len())));
    }
    let channel = estimate_channel(frames)?;
    let sigma = channel.sigma();

    let (params, search, planning) = match *mode {
        ParamMode::Explicit(p) => {
            p.validate_for(n)?;
            (p, None, None)
        }
        ParamMode::Auto { m_s, step, tolerance } => {
            let m_s = m_s.unwrap_or(n);
            if frames.len() < m_s {
                return Err(Error::InsufficientData { collected: frames.len(), required: m_s });
            }
            if !(tolerance >= 0.0) {
                return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {tolerance}")));
            }
            let lower = acceptance_with_margin(m_s, frames.len());
            let plan = planning_sigma2(frames, channel.sigma2);
            let r = optimize_in_band(n, plan.sqrt(), lower, (lower * (1.0 + tolerance)).min(1.0), step)?;
            (FilterParams::new(r.t1_star, r.t2_star, m_s)?, Some(r), Some(plan))
        }
    };

    let FilterOutcome { word_matrix, frames_consumed, .. } = build_word_matrix(frames, &params)?;
    let reduced = rref(&word_matrix)?;
    let k_prime = rank_by_column_mean(&reduced, params.m_s)?;

    let theory = metrics(&TheoryInputs { n, m_s: params.m_s, sigma, t1: params.t1, t2: params.t2 })?;
    let e_c = match correction {
        Correction::Exact => theory.e_c_exact,
        Correction::ObservedFrames => theory.e_c_approx * frames_consumed as f64 / theory.e_m,
        Correction::Full => theory.e_c_full,
    };
    let rate = corrected_rate(k_prime, n, e_c);

    Ok(RecoveryReport {
        n,
        m_s: params.m_s,
        frames_consumed,
        k_prime,
        pivot_count: reduced.pivot_count,
        e_c,
        rho_naive: k_prime as f64 / n as f64,
        rho_corrected: rate.value,
        channel,
        params,
        correction,
        theory,
        search,
        planning_sigma2: planning,
        degenerate: rate.degenerate,
        clamped: rate.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::transmit;
    use crate::codes::LinearCode;
    use crate::gf2::{rank, BitMatrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn code_frames(n: usize, k: usize, m: usize, snr_db: f64, seed: u64) -> (LinearCode, BitMatrix, Vec<LlrFrame>) {
        let code = LinearCode::random(n, k, seed).unwrap();
        let msgs = BitMatrix::random(m, k, &mut ChaCha8Rng::seed_from_u64(seed + 1));
        let cw = code.encode_rows(&msgs).unwrap();
        let frames = transmit(&cw, 10f64.powf(-snr_db / 10.0), seed + 2).unwrap();
        (code, cw, frames)
    }

    #[test]
    fn corrected_rate_examples() {
        assert_eq!(corrected_rate(200, 544, 0.0).value, 200.0 / 544.0);
        assert_eq!(corrected_rate(544, 544, 100.0).value, 1.0);
        let r = corrected_rate(200, 544, 26.0);
        assert!((r.value - 174.0 / 518.0).abs() < 1e-15);
        assert!((r.value - 0.3359).abs() < 5e-5);
        assert!(!r.degenerate && !r.clamped);

        let r = corrected_rate(200, 544, 600.0);
        assert!(r.degenerate);
        assert_eq!(r.value, 200.0 / 544.0);

        let r = corrected_rate(20, 544, 30.0);
        assert!(r.clamped);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn correction_names_round_trip() {
        for c in [Correction::Exact, Correction::ObservedFrames, Correction::Full] {
            assert_eq!(c.name().parse::<Correction>().unwrap(), c);
        }
        assert!("eq5".parse::<Correction>().is_err());
    }

    #[test]
    fn margin_sits_above_the_plain_ratio() {
        let f = acceptance_with_margin(544, 1000);
        assert!(f > 0.544 && f < 0.65);
        let slack = f * 1000.0 - 3.0 * (1000.0 * f * (1.0 - f)).sqrt();
        assert!((slack - 544.0).abs() < 1e-6);
        assert_eq!(acceptance_with_margin(1000, 1000), 1.0);
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let (_, _, frames) = code_frames(544, 176, 1000, 120.0, 11);
        let params = FilterParams::new(0.3, 272, 544).unwrap();
        let r = recover(&frames, 544, &ParamMode::Explicit(params), Correction::Exact).unwrap();
        assert_eq!(r.k_prime, 176);
        assert_eq!(r.rho_naive, 176.0 / 544.0);
        assert_eq!(r.rho_corrected, r.rho_naive);
        assert_eq!(r.frames_consumed, 544);
    }

    #[test]
    fn low_snr_gives_full_rank() {
        let (_, _, frames) = code_frames(544, 176, 1000, 7.0, 12);
        let params = FilterParams::new(0.3, 272, 544).unwrap();
        let r = recover(&frames, 544, &ParamMode::Explicit(params), Correction::Exact).unwrap();
        // a square random matrix misses full rank by a few at most
        assert!(r.k_prime >= 540, "k' = {}", r.k_prime);
        assert!(r.rho_naive > 0.99);
        assert!(r.rho_corrected <= r.rho_naive);
        assert!(r.e_c > 543.0);
        if r.k_prime == 544 {
            assert_eq!(r.rho_corrected, 1.0);
        }
        let full = corrected_rate(544, 544, r.e_c);
        assert_eq!(full.value, 1.0);
    }

    #[test]
    fn auto_mode_at_high_snr() {
        let (_, _, frames) = code_frames(544, 176, 1000, 13.0, 13);
        let r = recover(&frames, 544, &ParamMode::auto(), Correction::Exact).unwrap();
        let search = r.search.unwrap();
        assert_eq!((r.params.t1, r.params.t2), (search.t1_star, search.t2_star));
        assert!(r.frames_consumed <= 1000);
        assert!((r.rho_corrected - 176.0 / 544.0).abs() < 0.01, "{r}");
        assert!(r.rho_corrected <= r.rho_naive);
    }

    #[test]
    fn report_is_deterministic_and_formats() {
        let (_, _, frames) = code_frames(128, 40, 400, 9.0, 14);
        let params = FilterParams::new(0.3, 4, 128).unwrap();
        let mode = ParamMode::Explicit(params);
        let a = recover(&frames, 128, &mode, Correction::Exact).unwrap();
        let b = recover(&frames, 128, &mode, Correction::Exact).unwrap();
        assert_eq!(a, b);
        let text = a.to_string();
        assert!(text.starts_with("n=128\nm_s=128\n"));
        assert!(text.contains(&format!("k_prime={}", a.k_prime)));
        assert_eq!(a.csv_row().split(',').count(), REPORT_CSV_HEADER.split(',').count());
    }

    #[test]
    fn correction_modes_differ_only_in_e_c() {
        let (_, _, frames) = code_frames(128, 40, 600, 9.0, 15);
        let mode = ParamMode::Explicit(FilterParams::new(0.3, 3, 128).unwrap());
        let exact = recover(&frames, 128, &mode, Correction::Exact).unwrap();
        let observed = recover(&frames, 128, &mode, Correction::ObservedFrames).unwrap();
        let full = recover(&frames, 128, &mode, Correction::Full).unwrap();
        assert_eq!(exact.k_prime, observed.k_prime);
        assert!(full.e_c >= exact.e_c);
        let expected = 128.0 * observed.frames_consumed as f64 * exact.theory.p_e
            * exact.theory.algorithmic_error * exact.theory.acceptance;
        assert!((observed.e_c - expected).abs() < 1e-9 * expected.max(1.0));
    }

    #[test]
    fn errors_propagate() {
        let (_, _, frames) = code_frames(64, 20, 30, 10.0, 16);
        let mode = ParamMode::Explicit(FilterParams::new(0.3, 64, 64).unwrap());
        assert_eq!(
            recover(&frames, 64, &mode, Correction::Exact).unwrap_err(),
            Error::InsufficientData { collected: 30, required: 64 }
        );
        assert!(matches!(recover(&frames, 65, &mode, Correction::Exact), Err(Error::Dimension(_))));
        assert!(recover(&frames, 64, &ParamMode::auto(), Correction::Exact).is_err());
    }

    /// No zero column and no repeated column in the generator.
    fn distinct_columns(code: &LinearCode) -> bool {
        let t = code.generator().transpose();
        let cols: std::collections::HashSet<Vec<u8>> = (0..t.rows()).map(|c| t.row_bits(c)).collect();
        cols.len() == t.rows() && (0..t.rows()).all(|c| t.row_weight(c) > 0)
    }

    #[test]
    fn noiseless_small_codes_match_generator_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut done = 0;
        let mut i = 0;
        while done < 20 {
            use rand::Rng;
            i += 1;
            let n = rng.random_range(2..=64);
            let k = rng.random_range(1..n);
            if !distinct_columns(&LinearCode::random(n, k, 100 + i).unwrap()) {
                continue;
            }
            done += 1;
            let (code, cw, frames) = code_frames(n, k, 3 * n, 120.0, 100 + i);
            let mode = ParamMode::Explicit(FilterParams::new(0.5, n, 2 * n).unwrap());
            let r = recover(&frames, n, &mode, Correction::Exact).unwrap();
            assert_eq!(r.k_prime, code.k());
            assert_eq!(rank(&cw), code.k());
        }
    }

    #[test]
    fn repeated_generator_column_is_counted() {
        // columns 0 and 3 coincide, column 4 is zero
        let g = BitMatrix::from_rows(&[[1u8, 0, 0, 1, 0, 1], [0, 1, 0, 0, 0, 1], [0, 0, 1, 0, 0, 1]]).unwrap();
        let code = LinearCode::from_generator(g).unwrap();
        let msgs = BitMatrix::from_rows(&[[1u8, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [0, 1, 1], [1, 1, 1]]).unwrap();
        let cw = code.encode_rows(&msgs).unwrap();
        let frames = transmit(&cw, 1e-12, 4).unwrap();
        let mode = ParamMode::Explicit(FilterParams::new(0.5, 6, 6).unwrap());
        let r = recover(&frames, 6, &mode, Correction::Exact).unwrap();
        assert_eq!(r.pivot_count, 3);
        assert_eq!(r.k_prime, 5);
    }

    proptest! {
        #[test]
        fn correction_never_raises_the_estimate(n in 1usize..2000, frac in 0.0f64..=1.0, e_c in 0.0f64..3000.0) {
            let k = ((n as f64) * frac).floor() as usize;
            let r = corrected_rate(k, n, e_c);
            let naive = k as f64 / n as f64;
            prop_assert!((0.0..=1.0).contains(&r.value));
            prop_assert!(r.value <= naive + 1e-15);
            if e_c == 0.0 || k == n || r.degenerate {
                prop_assert!((r.value - naive).abs() < 1e-15);
            } else {
                prop_assert!(r.value < naive);
            }
        }
    }
}
