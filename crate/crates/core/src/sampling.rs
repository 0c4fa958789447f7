//! Sampling-probability calculus for subset consensus.
//!
//! The binomial (with-replacement) model gives the closed forms used to size
//! a sampling plan: the probability of at least one attacker-free draw, the
//! largest sample size a budget can afford and the budget a sample size
//! needs. The `*_exact` functions are the finite-population counterparts:
//! a draw is a uniformly random size-`s` subset of `S` teammates, of which
//! `A` are attackers, so the clean probability is hypergeometric.
//!
//! Everything here is evaluated in log space; `(1 - eta)^s` underflows long
//! before the budgets it implies stop being interesting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("parameter `{name}` out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    /// No attackers: every sample size is safe.
    #[error("attacker ratio is zero, any number of collaborators is safe")]
    Unbounded,
    /// The clean-draw probability is (numerically) zero, no finite budget works.
    #[error("plan is infeasible: {0}")]
    Infeasible(String),
    #[error("ratio {ratio} times team size {team_size} is not an integer attacker count")]
    FractionalAttackers { ratio: f64, team_size: u32 },
}

pub type Result<T> = std::result::Result<T, SamplingError>;

fn check_ratio(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SamplingError::InvalidParameter { name, value })
    }
}

fn check_confidence(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(SamplingError::InvalidParameter { name: "confidence", value: p })
    }
}

/// `ln(1 - (1 - eta)^s)`, the log-probability that one draw contains an attacker.
fn ln_dirty_draw(attacker_ratio: f64, sample_size: u32) -> f64 {
    if sample_size == 0 {
        return f64::NEG_INFINITY;
    }
    let ln_clean = sample_size as f64 * (-attacker_ratio).ln_1p();
    (-ln_clean.exp_m1()).ln()
}

/// Probability that at least one of `budget` independent draws of
/// `sample_size` teammates is attacker-free: `1 - [1 - (1 - eta)^s]^N`.
pub fn success_probability(attacker_ratio: f64, sample_size: u32, budget: u32) -> f64 {
    if sample_size == 0 || attacker_ratio <= 0.0 {
        return 1.0;
    }
    if attacker_ratio >= 1.0 || budget == 0 {
        return 0.0;
    }
    let ln_all_dirty = budget as f64 * ln_dirty_draw(attacker_ratio, sample_size);
    (-ln_all_dirty.exp_m1()).clamp(0.0, 1.0)
}

/// Largest sample size whose success probability within `budget` draws is
/// still at least `confidence`.
///
/// Returns [`SamplingError::Unbounded`] for a zero attacker ratio. The
/// result is not clamped to a team size; [`SamplingPlan::from_budget`] does that.
pub fn max_collaborators(confidence: f64, budget: u32, attacker_ratio: f64) -> Result<u32> {
    check_confidence(confidence)?;
    check_ratio("attacker_ratio", attacker_ratio)?;
    if budget == 0 {
        return Err(SamplingError::InvalidParameter { name: "budget", value: 0.0 });
    }
    if attacker_ratio == 0.0 {
        return Err(SamplingError::Unbounded);
    }
    if attacker_ratio == 1.0 {
        return Ok(0);
    }
    // (1 - p)^(1/N)
    let per_draw_fail = ((-confidence).ln_1p() / budget as f64).exp();
    let raw = (1.0 - per_draw_fail).ln() / (-attacker_ratio).ln_1p();
    let mut s = if raw.is_finite() && raw > 0.0 { raw.floor().min(u32::MAX as f64 - 1.0) as u32 } else { 0 };

    // The floor can land one off when the ratio sits on an integer.
    while success_probability(attacker_ratio, s + 1, budget) >= confidence {
        s += 1;
    }
    while s > 0 && success_probability(attacker_ratio, s, budget) < confidence {
        s -= 1;
    }
    Ok(s)
}

/// Number of draws needed so that at least one draw of `sample_size`
/// teammates is attacker-free with probability `confidence`:
/// `ceil(ln(1 - p) / ln(1 - (1 - eta)^s))`, never below 1.
pub fn sampling_budget(confidence: f64, sample_size: u32, attacker_ratio: f64) -> Result<u32> {
    check_confidence(confidence)?;
    check_ratio("attacker_ratio", attacker_ratio)?;
    if attacker_ratio == 0.0 || sample_size == 0 {
        return Ok(1);
    }
    let ln_dirty = ln_dirty_draw(attacker_ratio, sample_size);
    if ln_dirty.is_nan() || ln_dirty >= 0.0 {
        return Err(SamplingError::Infeasible(format!(
            "(1 - {attacker_ratio})^{sample_size} is numerically zero"
        )));
    }
    let raw = (-confidence).ln_1p() / ln_dirty;
    if !raw.is_finite() || raw >= u32::MAX as f64 {
        return Err(SamplingError::Infeasible(format!(
            "budget for s={sample_size}, eta={attacker_ratio} exceeds u32"
        )));
    }
    let mut budget = (raw.ceil() as u32).max(1);
    while success_probability(attacker_ratio, sample_size, budget) < confidence {
        budget += 1;
    }
    while budget > 1 && success_probability(attacker_ratio, sample_size, budget - 1) >= confidence {
        budget -= 1;
    }
    Ok(budget)
}

fn binomial(n: u32, k: u32) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Probability that a uniformly random size-`sample_size` subset of
/// `team_size` teammates, `attackers` of them hostile, is attacker-free:
/// `C(S - A, s) / C(S, s)`.
pub fn clean_sample_probability_exact(team_size: u32, attackers: u32, sample_size: u32) -> f64 {
    assert!(attackers <= team_size, "attackers ({attackers}) > team size ({team_size})");
    assert!(sample_size <= team_size, "sample size ({sample_size}) > team size ({team_size})");
    let benign = team_size - attackers;
    if sample_size > benign {
        return 0.0;
    }
    match (binomial(benign, sample_size), binomial(team_size, sample_size)) {
        (Some(num), Some(den)) => num as f64 / den as f64,
        _ => (0..sample_size)
            .map(|i| (benign - i) as f64 / (team_size - i) as f64)
            .product(),
    }
}

/// `1 - (1 - q)^N` with `q` the hypergeometric clean probability.
pub fn success_probability_exact(team_size: u32, attackers: u32, sample_size: u32, budget: u32) -> f64 {
    let q = clean_sample_probability_exact(team_size, attackers, sample_size);
    if q >= 1.0 {
        return if budget == 0 { 0.0 } else { 1.0 };
    }
    -(budget as f64 * (-q).ln_1p()).exp_m1()
}

/// Mean number of draws of a geometric process with per-draw success `q`
/// truncated at `budget`: `sum_{n<=N} n q (1-q)^(n-1) + N (1-q)^N`, which
/// telescopes to `(1 - (1 - q)^N) / q`.
pub fn expected_steps(team_size: u32, attackers: u32, sample_size: u32, budget: u32) -> f64 {
    let q = clean_sample_probability_exact(team_size, attackers, sample_size);
    if q == 0.0 {
        return budget as f64;
    }
    success_probability_exact(team_size, attackers, sample_size, budget) / q
}

/// Discretized attacker ratios `h_k / S`, stored as attacker counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioGrid {
    team_size: u32,
    attacker_counts: Vec<u32>,
}

impl RatioGrid {
    pub fn new(team_size: u32, attacker_counts: Vec<u32>) -> Result<Self> {
        if team_size == 0 {
            return Err(SamplingError::InvalidParameter { name: "team_size", value: 0.0 });
        }
        if attacker_counts.is_empty() {
            return Err(SamplingError::InvalidParameter { name: "ratio_grid", value: 0.0 });
        }
        for window in attacker_counts.windows(2) {
            if window[0] >= window[1] {
                return Err(SamplingError::InvalidParameter {
                    name: "ratio_grid (not strictly ascending)",
                    value: window[1] as f64 / team_size as f64,
                });
            }
        }
        if let Some(&h) = attacker_counts.iter().find(|&&h| h >= team_size) {
            // S(1 - R_k) must be a positive sample size.
            return Err(SamplingError::InvalidParameter {
                name: "ratio_grid (leaves no teammate to sample)",
                value: h as f64 / team_size as f64,
            });
        }
        Ok(Self { team_size, attacker_counts })
    }

    /// Builds a grid from ratios, rejecting any `R_k` with `S R_k` off the integers.
    pub fn from_ratios(team_size: u32, ratios: &[f64]) -> Result<Self> {
        let counts = ratios
            .iter()
            .map(|&r| {
                check_ratio("ratio_grid", r)?;
                let h = r * team_size as f64;
                if (h - h.round()).abs() > 1e-9 {
                    return Err(SamplingError::FractionalAttackers { ratio: r, team_size });
                }
                Ok(h.round() as u32)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(team_size, counts)
    }

    /// The usual grid `[0, 1/S, ..., (S-1)/S]`.
    pub fn full(team_size: u32) -> Result<Self> {
        Self::new(team_size, (0..team_size).collect())
    }

    pub fn team_size(&self) -> u32 {
        self.team_size
    }

    pub fn len(&self) -> usize {
        self.attacker_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attacker_counts.is_empty()
    }

    pub fn attacker_counts(&self) -> &[u32] {
        &self.attacker_counts
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.attacker_counts[k] as f64 / self.team_size as f64
    }

    pub fn ratios(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.ratio(k)).collect()
    }

    /// Number of teammates probed at level `k`, `S (1 - R_k)`.
    pub fn sample_size(&self, k: usize) -> u32 {
        self.team_size - self.attacker_counts[k]
    }
}

/// Attempt bounds `U_k = ceil(ln(1-p) / ln[1 - (1-R_k)^{S(1-R_k)}])`.
///
/// At `R_k = 0` the denominator is `ln 0`; sampling all `S` teammates has a
/// single distinct subset, so one attempt decides and `U_k = 1`.
pub fn a2cp_upper_bounds(grid: &RatioGrid, confidence: f64) -> Result<Vec<u32>> {
    check_confidence(confidence)?;
    (0..grid.len())
        .map(|k| sampling_budget(confidence, grid.sample_size(k), grid.ratio(k)))
        .collect()
}

/// The `(eta, S, s, N, p)` quadruple a consensus engine runs with.
///
/// Infeasible plans (more samples than benign teammates) are representable;
/// [`SamplingPlan::is_feasible`] flags them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub attacker_ratio: f64,
    pub team_size: u32,
    pub sample_size: u32,
    pub budget: u32,
    pub confidence: f64,
}

impl SamplingPlan {
    /// Plan for a known attacker count and desired sample size; the budget
    /// comes from [`sampling_budget`].
    pub fn from_sample_size(team_size: u32, attackers: u32, sample_size: u32, confidence: f64) -> Result<Self> {
        let attacker_ratio = Self::ratio_of(team_size, attackers)?;
        let budget = sampling_budget(confidence, sample_size, attacker_ratio)?;
        let plan = Self { attacker_ratio, team_size, sample_size, budget, confidence };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan for a known attacker count and a fixed budget; the sample size
    /// comes from [`max_collaborators`], clamped to `[0, S]`.
    pub fn from_budget(team_size: u32, attackers: u32, budget: u32, confidence: f64) -> Result<Self> {
        let attacker_ratio = Self::ratio_of(team_size, attackers)?;
        let sample_size = match max_collaborators(confidence, budget, attacker_ratio) {
            Ok(s) => s.min(team_size),
            Err(SamplingError::Unbounded) => team_size,
            Err(e) => return Err(e),
        };
        let plan = Self { attacker_ratio, team_size, sample_size, budget, confidence };
        plan.validate()?;
        Ok(plan)
    }

    fn ratio_of(team_size: u32, attackers: u32) -> Result<f64> {
        if team_size == 0 || attackers > team_size {
            return Err(SamplingError::InvalidParameter { name: "attackers", value: attackers as f64 });
        }
        Ok(attackers as f64 / team_size as f64)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratio("attacker_ratio", self.attacker_ratio)?;
        check_confidence(self.confidence)?;
        if self.team_size == 0 {
            return Err(SamplingError::InvalidParameter { name: "team_size", value: 0.0 });
        }
        if self.sample_size > self.team_size {
            return Err(SamplingError::InvalidParameter { name: "sample_size", value: self.sample_size as f64 });
        }
        if self.budget == 0 {
            return Err(SamplingError::InvalidParameter { name: "budget", value: 0.0 });
        }
        Ok(())
    }

    /// `eta * S` when it is an integer.
    pub fn attacker_count(&self) -> Option<u32> {
        let h = self.attacker_ratio * self.team_size as f64;
        ((h - h.round()).abs() < 1e-9).then(|| h.round() as u32)
    }

    /// Whether `s <= S (1 - eta)`, i.e. an attacker-free draw exists at all.
    pub fn is_feasible(&self) -> bool {
        let benign = self.team_size as f64 * (1.0 - self.attacker_ratio);
        self.sample_size as f64 <= benign + 1e-9
    }

    pub fn success_probability(&self) -> f64 {
        success_probability(self.attacker_ratio, self.sample_size, self.budget)
    }

    pub fn success_probability_exact(&self) -> Option<f64> {
        self.attacker_count()
            .map(|a| success_probability_exact(self.team_size, a, self.sample_size, self.budget))
    }

    pub fn expected_steps(&self) -> Option<f64> {
        self.attacker_count()
            .map(|a| expected_steps(self.team_size, a, self.sample_size, self.budget))
    }
}
