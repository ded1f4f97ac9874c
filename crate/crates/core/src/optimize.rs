//! Grid search over the filter thresholds `(t1, t2)`.
//!
//! `t1` runs over `{0, step, ..., 1}` and `t2` over the integers. For each
//! `t1` one pass over the binomial CDF yields every `t2` at once.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::text::real;
use crate::theory::{binomial_log_cdf_table, p_unreliable};

/// Default `t1` resolution.
pub const DEFAULT_STEP: f64 = 0.01;
/// Default relative width of the acceptance band in the constrained search.
pub const DEFAULT_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    pub t1_star: f64,
    pub t2_star: usize,
    /// The minimised quantity: the algorithmic error when unconstrained,
    /// `F(t2-1; n-1, p_u)` under a frame budget.
    pub objective: f64,
    /// `F(t2-1; n-1, p_u) / F(t2; n, p_u)` at the optimum.
    pub algorithmic_error: f64,
    /// `F(t2*; n, p_u(t1*))`; set for constrained results.
    pub constraint_value: Option<f64>,
    pub grid_resolution: f64,
}

/// One row of the contour dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub t1: f64,
    pub t2: usize,
    pub algorithmic_error: f64,
    pub f_value: f64,
}

fn t1_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("t1 step must lie in (0, 1], got {step}")));
    }
    let count = (1.0 / step).round();
    if (count * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("t1 step {step} does not divide [0, 1] evenly")));
    }
    let count = count as usize;
    Ok((0..=count).map(|i| i as f64 / count as f64).collect())
}

fn check_inputs(n: usize, sigma: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// CDF tables for one value of `t1`.
struct Column {
    index: usize,
    t1: f64,
    /// `ln F(k; n, p_u)`, `k = 0..=n`.
    log_f: Vec<f64>,
    /// `ln F(k; n-1, p_u)`, `k = 0..=n-1`.
    log_f_short: Vec<f64>,
}

impl Column {
    fn new(index: usize, t1: f64, n: usize, sigma: f64) -> Result<Self> {
        let p_u = p_unreliable(sigma, t1);
        Ok(Column {
            index,
            t1,
            log_f: binomial_log_cdf_table(n, p_u)?,
            log_f_short: binomial_log_cdf_table(n - 1, p_u)?,
        })
    }

    fn acceptance(&self, t2: usize) -> f64 {
        self.log_f[t2].exp()
    }

    /// `F(t2-1; n-1, p_u)`, zero at `t2 = 0`.
    fn below(&self, t2: usize) -> f64 {
        if t2 == 0 {
            0.0
        } else {
            self.log_f_short[t2 - 1].exp()
        }
    }

    fn algorithmic_error(&self, t2: usize) -> f64 {
        if t2 == 0 {
            return 0.0;
        }
        let lf = self.log_f[t2];
        if lf == f64::NEG_INFINITY {
            return f64::NAN;
        }
        (self.log_f_short[t2 - 1] - lf).exp().clamp(0.0, 1.0)
    }
}

fn columns(n: usize, sigma: f64, step: f64) -> Result<Vec<Column>> {
    check_inputs(n, sigma)?;
    t1_grid(step)?
        .into_par_iter()
        .enumerate()
        .map(|(i, t1)| Column::new(i, t1, n, sigma))
        .collect()
}

/// Candidate ordered by objective, then smaller `t2`, then smaller `t1`.
#[derive(Clone, Copy)]
struct Candidate {
    objective: f64,
    t2: usize,
    t1_index: usize,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.objective, self.t2, self.t1_index) < (other.objective, other.t2, other.t1_index)
    }
}

fn best(cands: impl Iterator<Item = Candidate>) -> Option<Candidate> {
    cands.fold(None, |acc, c| match acc {
        Some(a) if !c.better_than(&a) => Some(a),
        _ => Some(c),
    })
}

/// Minimises the algorithmic error over the grid, `t2` in `1..=n`.
///
/// `t2 = 0` is left out: its algorithmic error is zero by convention, which
/// would make every such point a trivial optimum.
pub fn optimize_unconstrained(n: usize, sigma: f64, step: f64) -> Result<OptimizationResult> {
    let cols = columns(n, sigma, step)?;
    let winner = best(cols.par_iter().filter_map(|col| {
        best((1..=n).filter_map(|t2| {
            let e = col.algorithmic_error(t2);
            (!e.is_nan()).then_some(Candidate { objective: e, t2, t1_index: col.index })
        }))
    })
    .collect::<Vec<_>>()
    .into_iter())
    .ok_or(Error::InfeasibleFilter)?;
    let col = &cols[winner.t1_index];
    Ok(OptimizationResult {
        t1_star: col.t1,
        t2_star: winner.t2,
        objective: winner.objective,
        algorithmic_error: winner.objective,
        constraint_value: None,
        grid_resolution: step,
    })
}

/// Minimises `F(t2-1; n-1, p_u)` under the frame budget `m_budget`, with `m_s = n`.
pub fn optimize_constrained(
    n: usize,
    sigma: f64,
    m_budget: usize,
    step: f64,
    tolerance: f64,
) -> Result<OptimizationResult> {
    optimize_constrained_rows(n, n, sigma, m_budget, step, tolerance)
}

/// Constrained search for a word matrix of `m_s` rows.
///
/// Feasible points have acceptance probability `F(t2; n, p_u)` inside
/// `[m_s/M, (m_s/M)(1 + tolerance)]`, so `m_s` suitable frames are expected
/// within `M` frames.
pub fn optimize_constrained_rows(
    n: usize,
    m_s: usize,
    sigma: f64,
    m_budget: usize,
    step: f64,
    tolerance: f64,
) -> Result<OptimizationResult> {
    if m_s == 0 || m_budget < m_s {
        return Err(Error::InvalidParameter(format!(
            "frame budget {m_budget} cannot supply {m_s} suitable frames"
        )));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {tolerance}")));
    }
    let required = m_s as f64 / m_budget as f64;
    optimize_in_band(n, sigma, required, required * (1.0 + tolerance), step)
}

/// Minimises `F(t2-1; n-1, p_u)` over grid points whose acceptance
/// probability lies in `[lower, upper]`.
pub fn optimize_in_band(n: usize, sigma: f64, lower: f64, upper: f64, step: f64) -> Result<OptimizationResult> {
    if !(lower > 0.0 && lower <= upper) {
        return Err(Error::InvalidParameter(format!("empty acceptance band [{lower}, {upper}]")));
    }
    let required = lower;
    let lower = lower * (1.0 - 1e-12);
    let cols = columns(n, sigma, step)?;

    let winner = best(cols.par_iter().filter_map(|col| {
        best((1..=n).filter_map(|t2| {
            let f = col.acceptance(t2);
            (f >= lower && f <= upper).then(|| Candidate {
                objective: col.below(t2),
                t2,
                t1_index: col.index,
            })
        }))
    })
    .collect::<Vec<_>>()
    .into_iter());

    let Some(winner) = winner else {
        let max_achievable = cols
            .iter()
            .flat_map(|col| (1..=n).map(move |t2| col.acceptance(t2)))
            .filter(|&f| f <= upper)
            .fold(0.0, f64::max);
        return Err(Error::InfeasibleBudget { required, max_achievable });
    };
    let col = &cols[winner.t1_index];
    Ok(OptimizationResult {
        t1_star: col.t1,
        t2_star: winner.t2,
        objective: winner.objective,
        algorithmic_error: col.algorithmic_error(winner.t2),
        constraint_value: Some(col.acceptance(winner.t2)),
        grid_resolution: step,
    })
}

/// Every `(t1, t2)` grid point with `t2` in `0..=n`.
pub fn contour_grid(n: usize, sigma: f64, step: f64) -> Result<Vec<ContourPoint>> {
    let cols = columns(n, sigma, step)?;
    Ok(cols
        .iter()
        .flat_map(|col| {
            (0..=n).map(move |t2| ContourPoint {
                t1: col.t1,
                t2,
                algorithmic_error: col.algorithmic_error(t2),
                f_value: col.acceptance(t2),
            })
        })
        .collect())
}

pub const CONTOUR_CSV_HEADER: &str = "t1,t2,algorithmic_error,f_value";

pub fn write_contour_csv<W: Write>(mut w: W, points: &[ContourPoint]) -> std::io::Result<()> {
    writeln!(w, "{CONTOUR_CSV_HEADER}")?;
    for p in points {
        writeln!(w, "{},{},{},{}", real(p.t1), p.t2, real(p.algorithmic_error), real(p.f_value))?;
    }
    Ok(())
}
