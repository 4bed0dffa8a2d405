//! Model primitives: mining environment, population parameters, utilities
//! and the replicator vector field for the participation ratio `x1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strategy of a strategic miner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Strategy 0: stay out of mining.
    Abstain,
    /// Strategy 1: participate in mining.
    Mine,
}

impl Strategy {
    /// The strategy as the `{0, 1}` indicator used in the reward and cost formulas.
    pub fn indicator(self) -> f64 {
        match self {
            Strategy::Abstain => 0.0,
            Strategy::Mine => 1.0,
        }
    }

    pub fn from_index(s: u8) -> Option<Self> {
        match s {
            0 => Some(Strategy::Abstain),
            1 => Some(Strategy::Mine),
            _ => None,
        }
    }
}

/// Raw protocol and economics inputs.
///
/// `h` is the number of leading zero bits required of a block hash, `c` the
/// cost per unit operating time and `v` the number of hash queries bought per
/// unit cost (so a miner computes `w = v * c` hashes per unit time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningEnvironment {
    h: u32,
    c: f64,
    v: f64,
}

/// Difficulty pair derived from a [`MiningEnvironment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Difficulty {
    /// `D = 2^h`.
    pub raw: f64,
    /// `d = D / v`.
    pub effective: f64,
}

impl MiningEnvironment {
    pub fn new(h: u32, c: f64, v: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cost c must be positive, got {c}"
            )));
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hash-per-cost v must be positive, got {v}"
            )));
        }
        Ok(Self { h, c, v })
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Returns `D = 2^h` and the effective difficulty `d = D / v`.
    pub fn difficulty(&self) -> Result<Difficulty> {
        if self.h > f64::MAX_EXP as u32 - 1 {
            return Err(Error::Range(format!("2^{} is not representable", self.h)));
        }
        let raw = 2f64.powi(self.h as i32);
        let effective = raw / self.v;
        if !effective.is_finite() || effective <= 0.0 {
            return Err(Error::Range(format!(
                "effective difficulty 2^{}/{} is not a positive finite number",
                self.h, self.v
            )));
        }
        Ok(Difficulty { raw, effective })
    }

    /// Block-creation rate `s * c / d` of a miner playing `strategy`.
    pub fn poisson_rate(&self, strategy: Strategy) -> Result<f64> {
        let d = self.difficulty()?.effective;
        Ok(strategy.indicator() * self.c / d)
    }

    /// Population parameters with `d` taken from this environment.
    pub fn model_params(&self, m: u32, n: u32) -> Result<ModelParams> {
        ModelParams::new(m, n, self.difficulty()?.effective)
    }
}

/// Population counts and effective difficulty: `m` always-on miners, `n`
/// strategic miners, effective difficulty `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    m: u32,
    n: u32,
    d: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    m: u32,
    n: u32,
    d: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.m, raw.n, raw.d)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            m: p.m,
            n: p.n,
            d: p.d,
        }
    }
}

impl ModelParams {
    pub fn new(m: u32, n: u32, d: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "effective difficulty d must be positive, got {d}"
            )));
        }
        Ok(Self { m, n, d })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub(crate) fn mf(&self) -> f64 {
        self.m as f64
    }

    pub(crate) fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Total hashing population `m + n * x1` (in units of one miner).
    pub fn active_miners(&self, x1: f64) -> f64 {
        self.mf() + self.nf() * x1
    }

    /// Lower bistability threshold `d / (m + n)`.
    pub fn lower_threshold(&self) -> f64 {
        self.d / (self.mf() + self.nf())
    }

    /// Upper bistability threshold `d / m`.
    pub fn upper_threshold(&self) -> f64 {
        self.d / self.mf()
    }

    pub fn expected_reward(&self, reward: f64, strategy: Strategy, x1: f64) -> f64 {
        reward * strategy.indicator() / self.active_miners(x1)
    }

    pub fn expected_cost(&self, strategy: Strategy, x1: f64) -> f64 {
        let total = self.active_miners(x1);
        self.d * strategy.indicator() / (total * total)
    }

    pub fn utility(&self, reward: f64, strategy: Strategy, x1: f64) -> f64 {
        match strategy {
            Strategy::Abstain => 0.0,
            Strategy::Mine => {
                let total = self.active_miners(x1);
                (reward - self.d / total) / total
            }
        }
    }

    /// Population-average utility `x0 * u0 + x1 * u1`.
    pub fn average_utility(&self, reward: f64, x1: f64) -> f64 {
        x1 * self.utility(reward, Strategy::Mine, x1)
    }

    /// Replicator vector field `x1 (1 - x1) / (m + n x1) * (R - d / (m + n x1))`.
    ///
    /// Defined for any real `x1` so derivatives can be probed across the
    /// boundary; callers that integrate the model clamp to `[0, 1]`.
    pub fn phi(&self, reward: f64, x1: f64) -> f64 {
        let total = self.active_miners(x1);
        x1 * (1.0 - x1) / total * (reward - self.d / total)
    }

    /// Closed-form `d phi / d x1`.
    pub fn phi_derivative(&self, reward: f64, x1: f64) -> f64 {
        let n = self.nf();
        let total = self.active_miners(x1);
        let growth = -x1 / total + (1.0 - x1) / total - n * x1 * (1.0 - x1) / (total * total);
        growth * (reward - self.d / total) + self.d * n * x1 * (1.0 - x1) / total.powi(3)
    }

    /// `d phi / d x1` at `x1 = 0`: `(R - d/m) / m`.
    pub fn phi_derivative_at_zero(&self, reward: f64) -> f64 {
        (reward - self.upper_threshold()) / self.mf()
    }

    /// `d phi / d x1` at `x1 = 1`: `-(R - d/(m+n)) / (m+n)`.
    pub fn phi_derivative_at_one(&self, reward: f64) -> f64 {
        -(reward - self.lower_threshold()) / (self.mf() + self.nf())
    }

    /// `d phi / d x1` at the interior root `x1*`:
    /// `R^3 / (n d^2) * (d/R - m) * ((m+n) - d/R)`.
    pub fn phi_derivative_at_interior(&self, reward: f64) -> f64 {
        let (m, n, d) = (self.mf(), self.nf(), self.d);
        let ratio = d / reward;
        reward.powi(3) / (n * d * d) * (ratio - m) * ((m + n) - ratio)
    }
}

/// Strategy mix of the strategic miners; `x0 = 1 - x1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PopulationState(f64);

impl PopulationState {
    pub fn new(x1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x1) {
            return Err(Error::InvalidParameter(format!(
                "x1 must lie in [0, 1], got {x1}"
            )));
        }
        Ok(Self(x1))
    }

    pub fn x1(self) -> f64 {
        self.0
    }

    pub fn x0(self) -> f64 {
        1.0 - self.0
    }

    pub fn share(self, strategy: Strategy) -> f64 {
        match strategy {
            Strategy::Abstain => self.x0(),
            Strategy::Mine => self.x1(),
        }
    }
}
