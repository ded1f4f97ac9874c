//! Closed-form recovery-quality metrics.
//!
//! Everything here is a pure function of the code length, the word-matrix
//! height, the noise level and the two filter thresholds:
//!
//! * `p_u`: probability that a symbol is unreliable, `Q((1-t1)/σ) - Q((1+t1)/σ)`;
//! * `E[C]`: expected number of word-matrix columns holding at least one bit error;
//! * `E[M]`: expected number of frames read to collect `m_s` suitable ones;
//! * the split of `E[C]` into an ambient term `n·m_s·p_e` and an algorithmic
//!   factor `F(t2-1; n-1, p_u) / F(t2; n, p_u)`;
//! * the lower bound on the probability that a single corrupted parity
//!   relation raises the rank.
//!
//! `F(k; n, p)` is the binomial CDF. It is evaluated in the log domain so that
//! ratios of tiny tail probabilities keep their precision.

use crate::channel::{phi, q_function};
use crate::error::{Error, Result};

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("probability must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// `ln F(k; n, p)` for every `k` in `0..=n`.
///
/// Probability masses are built as log-ratios outward from the mode and
/// normalised by their total, so no binomial coefficient is ever formed.
pub fn binomial_log_cdf_table(n: usize, p: f64) -> Result<Vec<f64>> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(vec![0.0; n + 1]);
    }
    if p == 1.0 {
        let mut t = vec![f64::NEG_INFINITY; n + 1];
        t[n] = 0.0;
        return Ok(t);
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let step = |i: usize| ((n - i) as f64 / (i + 1) as f64).ln() + log_odds;
    let mode = (((n + 1) as f64 * p).floor() as usize).min(n);

    let mut log_mass = vec![0.0; n + 1];
    for i in mode..n {
        log_mass[i + 1] = log_mass[i] + step(i);
    }
    for i in (0..mode).rev() {
        log_mass[i] = log_mass[i + 1] - step(i);
    }

    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = f64::NEG_INFINITY;
    for &lm in &log_mass {
        acc = log_add_exp(acc, lm);
        prefix.push(acc);
    }
    let total = acc;
    let mut table: Vec<f64> = prefix.into_iter().map(|x| (x - total).min(0.0)).collect();
    table[n] = 0.0;
    Ok(table)
}

/// Binomial CDF `F(k; n, p) = P[Bin(n, p) <= k]`. Negative `k` gives 0.
pub fn binomial_cdf(k: i64, n: usize, p: f64) -> Result<f64> {
    check_probability(p)?;
    if k < 0 {
        return Ok(0.0);
    }
    if k as u64 >= n as u64 {
        return Ok(1.0);
    }
    Ok(binomial_log_cdf_table(n, p)?[k as usize].exp())
}

/// `ln F(k; n, p)` with the same edge conventions as [`binomial_cdf`].
pub fn binomial_log_cdf(k: i64, n: usize, p: f64) -> Result<f64> {
    check_probability(p)?;
    if k < 0 {
        return Ok(f64::NEG_INFINITY);
    }
    if k as u64 >= n as u64 {
        return Ok(0.0);
    }
    Ok(binomial_log_cdf_table(n, p)?[k as usize])
}

/// Probability that a received symbol falls inside `(-t1, t1)`.
pub fn p_unreliable(sigma: f64, t1: f64) -> f64 {
    (q_function((1.0 - t1) / sigma) - q_function((1.0 + t1) / sigma)).max(0.0)
}

/// Bit-error probability conditioned on the symbol being unreliable and reliable.
///
/// For a transmitted `+1`, the error event `r < 0` splits into `-t1 < r < 0`
/// (unreliable) and `r <= -t1` (reliable).
pub fn conditional_error_probs(sigma: f64, t1: f64) -> Result<(f64, f64)> {
    check_sigma_t1(sigma, t1)?;
    let p_u = p_unreliable(sigma, t1);
    if p_u <= 0.0 {
        return Err(Error::DegenerateThreshold);
    }
    let q_outer = q_function((1.0 + t1) / sigma);
    let p_eu = (q_function(1.0 / sigma) - q_outer) / p_u;
    let p_er = q_outer / (1.0 - p_u);
    Ok((p_eu, p_er))
}

fn check_sigma_t1(sigma: f64, t1: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&t1) {
        return Err(Error::InvalidParameter(format!("t1 must lie in [0, 1], got {t1}")));
    }
    Ok(())
}

/// Inputs to the column-error analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    pub n: usize,
    pub m_s: usize,
    pub sigma: f64,
    pub t1: f64,
    pub t2: usize,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m_s == 0 {
            return Err(Error::InvalidParameter("n and m_s must be at least 1".into()));
        }
        check_sigma_t1(self.sigma, self.t1)?;
        if self.t2 > self.n {
            return Err(Error::InvalidParameter(format!("t2 = {} exceeds n = {}", self.t2, self.n)));
        }
        Ok(())
    }
}

/// All closed-form quantities for one setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryMetrics {
    pub p_u: f64,
    pub p_e: f64,
    /// `None` when `p_u = 0`.
    pub p_eu: Option<f64>,
    pub p_er: f64,
    /// `n - n(1 - p_e·F(t2-1; n-1, p_u)/F(t2; n, p_u))^m_s`.
    pub e_c_exact: f64,
    /// `n·E[M]·p_e·F(t2-1; n-1, p_u)`, valid when `m_s·p_e` is small.
    pub e_c_approx: f64,
    /// Same as `e_c_exact` but keeping the reliable-error term that the
    /// closed form drops.
    pub e_c_full: f64,
    /// Expected bit errors per suitable frame with both terms kept.
    pub errors_per_word: f64,
    pub e_m: f64,
    /// Acceptance probability `F(t2; n, p_u)`.
    pub acceptance: f64,
    pub algorithmic_error: f64,
    pub ambient_error: f64,
}

/// `ln F(t2-1; n-1, p_u) - ln F(t2; n, p_u)`, or `None` when `t2 = 0`.
fn log_algorithmic_ratio(n: usize, p_u: f64, t2: usize) -> Result<(Option<f64>, f64)> {
    let log_f = binomial_log_cdf(t2 as i64, n, p_u)?;
    if log_f == f64::NEG_INFINITY {
        return Err(Error::InfeasibleFilter);
    }
    if t2 == 0 {
        return Ok((None, log_f));
    }
    let log_a = binomial_log_cdf(t2 as i64 - 1, n - 1, p_u)?;
    Ok((Some(log_a - log_f), log_f))
}

/// Algorithmic error `F(t2-1; n-1, p_u) / F(t2; n, p_u)`; exactly 0 when `t2 = 0`.
pub fn algorithmic_error(n: usize, p_u: f64, t2: usize) -> Result<f64> {
    if n == 0 || t2 > n {
        return Err(Error::InvalidParameter(format!("need 1 <= n and t2 <= n, got n = {n}, t2 = {t2}")));
    }
    let (ratio, _) = log_algorithmic_ratio(n, p_u, t2)?;
    Ok(ratio.map_or(0.0, |r| r.exp().clamp(0.0, 1.0)))
}

/// Expected frames read to collect `m_s` suitable ones, `m_s / F(t2; n, p_u)`.
pub fn expected_messages(m_s: usize, n: usize, p_u: f64, t2: usize) -> Result<f64> {
    let f = binomial_cdf(t2 as i64, n, p_u)?;
    if f <= 0.0 {
        return Err(Error::InfeasibleFilter);
    }
    Ok(m_s as f64 / f)
}

/// `n(1 - (1 - e/n)^m_s)` with `e` the expected errors per row.
fn columns_hit(n: usize, m_s: usize, per_bit: f64) -> f64 {
    let per_bit = per_bit.clamp(0.0, 1.0);
    if per_bit >= 1.0 {
        return n as f64;
    }
    n as f64 * -(m_s as f64 * (-per_bit).ln_1p()).exp_m1()
}

pub fn metrics(inputs: &TheoryInputs) -> Result<TheoryMetrics> {
    inputs.validate()?;
    let TheoryInputs { n, m_s, sigma, t1, t2 } = *inputs;

    let p_e = q_function(1.0 / sigma);
    let p_u = p_unreliable(sigma, t1);
    let q_outer = q_function((1.0 + t1) / sigma);
    let p_eu = (p_u > 0.0).then(|| (p_e - q_outer) / p_u);
    let p_er = q_outer / (1.0 - p_u);

    let (log_ratio, log_f) = log_algorithmic_ratio(n, p_u, t2)?;
    let acceptance = log_f.exp();
    let algorithmic_error = log_ratio.map_or(0.0, |r| r.exp().clamp(0.0, 1.0));
    let below = if t2 == 0 {
        0.0
    } else {
        binomial_cdf(t2 as i64 - 1, n - 1, p_u)?
    };
    let e_m = m_s as f64 / acceptance;

    let e_c_exact = columns_hit(n, m_s, p_e * algorithmic_error);
    let e_c_approx = n as f64 * e_m * p_e * below;

    // Unreliable errors need K - 1 <= t2 - 1 among the other n - 1 symbols,
    // reliable ones need K <= t2 among them.
    let reliable_share = (binomial_log_cdf(t2 as i64, n - 1, p_u)? - log_f).exp();
    let errors_per_word = n as f64 * ((p_e - q_outer) * algorithmic_error + q_outer * reliable_share);
    let e_c_full = columns_hit(n, m_s, errors_per_word / n as f64);

    Ok(TheoryMetrics {
        p_u,
        p_e,
        p_eu,
        p_er,
        e_c_exact,
        e_c_approx,
        e_c_full,
        errors_per_word,
        e_m,
        acceptance,
        algorithmic_error,
        ambient_error: n as f64 * m_s as f64 * p_e,
    })
}

/// `(e_c_exact, e_c_approx)`.
pub fn expected_columns_in_error(inputs: &TheoryInputs) -> Result<(f64, f64)> {
    let m = metrics(inputs)?;
    Ok((m.e_c_exact, m.e_c_approx))
}

/// Toy model: `d` independent message columns of length `m_s` plus their XOR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModelParams {
    pub d: usize,
    pub m_s: usize,
    pub p_e_prime: f64,
}

impl ToyModelParams {
    pub fn new(d: usize, m_s: usize, p_e_prime: f64) -> Result<Self> {
        if d == 0 || m_s <= d {
            return Err(Error::InvalidParameter(format!("need m_s > d >= 1, got d = {d}, m_s = {m_s}")));
        }
        if !(p_e_prime > 0.0 && p_e_prime < 1.0) {
            return Err(Error::InvalidParameter(format!("p_e' must lie in (0, 1), got {p_e_prime}")));
        }
        Ok(ToyModelParams { d, m_s, p_e_prime })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankIncreaseBound {
    /// `Φ(((m_s-d)² - 2m_s²(d+1)p) / (2m_s(d+1)√(m_s p(1-p))))`.
    pub bound: f64,
    /// The `m_s >> d`, `p << 1/(d+1)` simplification `Φ(√m_s / (2(d+1)√(p(1-p))))`.
    pub simplified: f64,
    /// Argument of `Φ` in `simplified`, useful when the value rounds to 1.
    pub simplified_argument: f64,
    /// Lower bound on the minimum distance of the message-column span, `(m_s-d)²/(2m_s)`.
    pub min_distance: f64,
}

/// Lower bound on the probability that a corrupted toy word matrix gains rank.
pub fn rank_increase_bound(params: &ToyModelParams) -> RankIncreaseBound {
    let m = params.m_s as f64;
    let d = params.d as f64;
    let p = params.p_e_prime;
    let spread = (p * (1.0 - p)).sqrt();

    let num = (m - d).powi(2) - 2.0 * m * m * (d + 1.0) * p;
    let den = 2.0 * m * (d + 1.0) * (m.sqrt() * spread);
    let simplified_argument = m.sqrt() / (2.0 * (d + 1.0) * spread);

    RankIncreaseBound {
        bound: phi(num / den),
        simplified: phi(simplified_argument),
        simplified_argument,
        min_distance: (m - d).powi(2) / (2.0 * m),
    }
}
