//! Transport bias bound and its minimax tightness in one dimension.
//!
//! For an L-Lipschitz response r, |E_P r − E_Q r| ≤ L·W₁(P, Q). The check
//! draws a beta baseline P, shifts it by δ to get Q, and evaluates random
//! piecewise-linear responses whose slopes stay in [−L, L].

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::wasserstein1_1d;
use crate::rng::{rng_from_seed, substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportScenario {
    pub beta_a: f64,
    pub beta_b: f64,
    pub n_samples: usize,
    pub shift: f64,
    pub lipschitz: f64,
    /// Interior breakpoints of the random response.
    pub knots: usize,
}

impl TransportScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::InvalidInput("lipschitz constant must be positive".into()));
        }
        if !(self.beta_a > 0.0 && self.beta_b > 0.0) {
            return Err(Error::InvalidInput("beta parameters must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("scenario needs at least one sample".into()));
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidInput("shift must be finite".into()));
        }
        Ok(())
    }
}

/// Continuous piecewise-linear function on the real line, linear beyond its
/// outer breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    breaks: Vec<f64>,
    /// `slopes[i]` applies left of `breaks[i]`; the last one right of the
    /// final break. Length `breaks.len() + 1`.
    slopes: Vec<f64>,
    /// Value at `breaks[0]` (or at 0 with no breaks).
    anchor: f64,
}

impl PiecewiseLinear {
    pub fn new(mut breaks: Vec<f64>, slopes: Vec<f64>, anchor: f64) -> Result<Self> {
        if slopes.len() != breaks.len() + 1 {
            return Err(Error::InvalidInput("need one more slope than breakpoints".into()));
        }
        breaks.sort_by(f64::total_cmp);
        Ok(Self { breaks, slopes, anchor })
    }

    /// Random response with breakpoints in `[lo, hi]` and slopes uniform in
    /// `[−lipschitz, lipschitz]`.
    pub fn random(rng: &mut impl Rng, knots: usize, lo: f64, hi: f64, lipschitz: f64) -> Self {
        let breaks: Vec<f64> = (0..knots).map(|_| rng.random_range(lo..=hi)).collect();
        let slopes = (0..=knots)
            .map(|_| rng.random_range(-lipschitz..=lipschitz))
            .collect();
        let anchor = rng.random_range(-1.0..1.0);
        Self::new(breaks, slopes, anchor).expect("slope count matches")
    }

    pub fn lipschitz(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| f64::max(m, s.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.breaks.is_empty() {
            return self.anchor + self.slopes[0] * x;
        }
        let first = self.breaks[0];
        if x <= first {
            return self.anchor + self.slopes[0] * (x - first);
        }
        let mut value = self.anchor;
        let mut left = first;
        for (i, &b) in self.breaks.iter().enumerate().skip(1) {
            let slope = self.slopes[i];
            if x <= b {
                return value + slope * (x - left);
            }
            value += slope * (b - left);
            left = b;
        }
        value + self.slopes[self.breaks.len()] * (x - left)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportResult {
    pub scenario: TransportScenario,
    pub bias: f64,
    pub w1: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportReport {
    pub tolerance: f64,
    pub results: Vec<TransportResult>,
    pub pass: bool,
}

/// Seeded beta-shift scenarios; the first one has no shift.
pub fn random_scenarios(count: usize, seed: u64) -> Vec<TransportScenario> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|i| TransportScenario {
            beta_a: rng.random_range(0.5..5.0),
            beta_b: rng.random_range(0.5..5.0),
            n_samples: 400,
            shift: if i == 0 { 0.0 } else { rng.random_range(-0.5..0.5) },
            lipschitz: rng.random_range(0.1..3.0),
            knots: rng.random_range(1..8),
        })
        .collect()
}

fn run_scenario(s: &TransportScenario, seed: u64, tolerance: f64) -> Result<TransportResult> {
    s.validate()?;
    let mut rng = rng_from_seed(seed);
    let beta = Beta::new(s.beta_a, s.beta_b).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let p: Vec<f64> = (0..s.n_samples).map(|_| beta.sample(&mut rng)).collect();
    let q: Vec<f64> = p.iter().map(|x| x + s.shift).collect();
    let (lo, hi) = (s.shift.min(0.0), 1.0 + s.shift.max(0.0));
    let r = PiecewiseLinear::random(&mut rng, s.knots, lo, hi, s.lipschitz);
    let n = s.n_samples as f64;
    let mean_p = p.iter().map(|&x| r.eval(x)).sum::<f64>() / n;
    let mean_q = q.iter().map(|&x| r.eval(x)).sum::<f64>() / n;
    let bias = (mean_p - mean_q).abs();
    let w1 = wasserstein1_1d(&p, &q)?;
    let bound = s.lipschitz * w1;
    Ok(TransportResult {
        scenario: *s,
        bias,
        w1,
        bound,
        pass: bias <= bound + tolerance,
    })
}

pub fn transport_bound_check(scenarios: &[TransportScenario], seed: u64, tolerance: f64) -> Result<TransportReport> {
    let results = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_scenario(s, substream(seed, i as u64), tolerance))
        .collect::<Result<Vec<_>>>()?;
    let pass = results.iter().all(|r| r.pass);
    Ok(TransportReport {
        tolerance,
        results,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessResult {
    pub lipschitz: f64,
    pub shift: f64,
    pub gap: f64,
    pub penalty: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub tolerance: f64,
    pub results: Vec<TightnessResult>,
    pub pass: bool,
}

/// Point masses at 0 and δ with the linear response r(x) = L·x attain the
/// bound exactly. A zero shift has ratio 1 by convention.
pub fn minimax_tightness_check(lipschitz: &[f64], shifts: &[f64], tolerance: f64) -> Result<TightnessReport> {
    let mut results = Vec::new();
    for &l in lipschitz {
        if l.is_nan() || l <= 0.0 {
            return Err(Error::InvalidInput("lipschitz constant must be positive".into()));
        }
        let r = PiecewiseLinear::new(vec![], vec![l], 0.0)?;
        for &delta in shifts {
            let p = vec![0.0; 8];
            let q = vec![delta; 8];
            let gap = (q.iter().map(|&x| r.eval(x)).sum::<f64>() - p.iter().map(|&x| r.eval(x)).sum::<f64>()).abs() / 8.0;
            let penalty = l * wasserstein1_1d(&p, &q)?;
            let ratio = if penalty == 0.0 && gap == 0.0 { 1.0 } else { gap / penalty };
            results.push(TightnessResult {
                lipschitz: l,
                shift: delta,
                gap,
                penalty,
                ratio,
            });
        }
    }
    let pass = results.iter().all(|r| (r.ratio - 1.0).abs() <= tolerance);
    Ok(TightnessReport {
        tolerance,
        results,
        pass,
    })
}
