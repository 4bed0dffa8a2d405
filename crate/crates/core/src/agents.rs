//! Finite-population simulation under pairwise proportional imitation.
//!
//! At each revision epoch a uniformly chosen strategic miner looks at a
//! uniformly chosen peer and copies the peer's strategy with probability
//! `max(0, u_peer - u_own) / norm`. With per-agent revision rate `r` the
//! expected drift of the mining fraction is `(r / norm) * phi(x1)` up to an
//! `O(1/n)` correction, so the default rate `r = norm` runs on the same
//! clock as the replicator ODE.
//!
//! The always-on miners are not agents; they only enter the utilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, RewardPolicy};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Strategy};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPopulation {
    strategies: Vec<Strategy>,
    revision_rate: Option<f64>,
    normalization: Option<f64>,
    rng_seed: u64,
}

impl AgentPopulation {
    /// `round(x1 * n_strategic)` miners start on strategy 1.
    pub fn with_fraction(n_strategic: usize, x1: f64, rng_seed: u64) -> Result<Self> {
        if n_strategic < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 strategic agents, got {n_strategic}"
            )));
        }
        if !(0.0..=1.0).contains(&x1) {
            return Err(Error::InvalidParameter(format!(
                "x1 must lie in [0, 1], got {x1}"
            )));
        }
        let miners = (x1 * n_strategic as f64).round() as usize;
        let strategies = (0..n_strategic)
            .map(|i| {
                if i < miners {
                    Strategy::Mine
                } else {
                    Strategy::Abstain
                }
            })
            .collect();
        Ok(Self {
            strategies,
            revision_rate: None,
            normalization: None,
            rng_seed,
        })
    }

    pub fn from_strategies(strategies: Vec<Strategy>, rng_seed: u64) -> Result<Self> {
        if strategies.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least 2 strategic agents".into(),
            ));
        }
        Ok(Self {
            strategies,
            revision_rate: None,
            normalization: None,
            rng_seed,
        })
    }

    /// Per-agent revision rate; when unset it equals the normalization
    /// constant, aligning simulated time with the replicator ODE.
    pub fn with_revision_rate(mut self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "revision rate must be positive, got {rate}"
            )));
        }
        self.revision_rate = Some(rate);
        Ok(self)
    }

    /// Overrides the utility-gap normalization constant.
    pub fn with_normalization(mut self, norm: f64) -> Result<Self> {
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "normalization must be positive, got {norm}"
            )));
        }
        self.normalization = Some(norm);
        Ok(self)
    }

    pub fn n_strategic(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn miners(&self) -> usize {
        self.strategies
            .iter()
            .filter(|&&s| s == Strategy::Mine)
            .count()
    }

    pub fn x1(&self) -> f64 {
        self.miners() as f64 / self.n_strategic() as f64
    }
}

/// Largest `|u1|` over the reachable fractions `k / n_strategic`.
pub fn utility_normalization(
    params: &ModelParams,
    policy: &RewardPolicy,
    n_strategic: usize,
) -> f64 {
    (0..=n_strategic)
        .map(|k| {
            let x = k as f64 / n_strategic as f64;
            params.utility(policy.reward(x), Strategy::Mine, x).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTrajectory {
    pub seed: u64,
    pub times: Vec<f64>,
    pub x1: Vec<f64>,
}

fn sample_times(horizon: f64, sample_dt: f64) -> Vec<f64> {
    let count = (horizon / sample_dt + 1e-9).floor() as usize;
    (0..=count).map(|k| k as f64 * sample_dt).collect()
}

/// Runs one seeded realization; the population is consumed as the initial state.
pub fn simulate_population(
    params: &ModelParams,
    policy: &RewardPolicy,
    pop: AgentPopulation,
    horizon: f64,
    sample_dt: f64,
) -> Result<EmpiricalTrajectory> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample_dt must be positive, got {sample_dt}"
        )));
    }
    let n = pop.n_strategic();
    let norm = pop
        .normalization
        .unwrap_or_else(|| utility_normalization(params, policy, n))
        .max(f64::MIN_POSITIVE);
    let rate = pop.revision_rate.unwrap_or(norm);
    let waiting = Exp::new(rate * n as f64)
        .map_err(|e| Error::Configuration(format!("bad revision rate: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(pop.rng_seed);
    let mut strategies = pop.strategies;
    let mut miners = strategies.iter().filter(|&&s| s == Strategy::Mine).count();

    let times = sample_times(horizon, sample_dt);
    let mut x1 = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut t = 0.0;
    loop {
        t += waiting.sample(&mut rng);
        let current = miners as f64 / n as f64;
        while next < times.len() && times[next] < t {
            x1.push(current);
            next += 1;
        }
        if next == times.len() {
            break;
        }
        // absorbing: nobody to imitate
        if miners == 0 || miners == n {
            continue;
        }
        let agent = rng.random_range(0..n);
        let mut peer = rng.random_range(0..n - 1);
        if peer >= agent {
            peer += 1;
        }
        let (own, other) = (strategies[agent], strategies[peer]);
        if own == other {
            continue;
        }
        let reward = policy.reward(current);
        let gap = params.utility(reward, other, current) - params.utility(reward, own, current);
        if gap <= 0.0 {
            continue;
        }
        if gap > norm * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!(
                "utility gap {gap} at x1={current} exceeds normalization {norm}"
            )));
        }
        if rng.random::<f64>() < gap / norm {
            strategies[agent] = other;
            match other {
                Strategy::Mine => miners += 1,
                Strategy::Abstain => miners -= 1,
            }
        }
    }
    Ok(EmpiricalTrajectory {
        seed: pop.rng_seed,
        times,
        x1,
    })
}

/// Independent realizations for each seed, run in parallel, returned in seed order.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    params: &ModelParams,
    policy: &RewardPolicy,
    n_strategic: usize,
    x1_init: f64,
    revision_rate: Option<f64>,
    seeds: &[u64],
    horizon: f64,
    sample_dt: f64,
) -> Result<Vec<EmpiricalTrajectory>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut pop = AgentPopulation::with_fraction(n_strategic, x1_init, seed)?;
            if let Some(r) = revision_rate {
                pop = pop.with_revision_rate(r)?;
            }
            simulate_population(params, policy, pop, horizon, sample_dt)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub t: f64,
    pub mean_x1: f64,
    pub std_x1: f64,
    pub n_seeds: usize,
}

/// Per-sample mean and sample standard deviation across runs.
pub fn aggregate(runs: &[EmpiricalTrajectory]) -> Result<Vec<AggregatePoint>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no runs to aggregate".into()))?;
    if runs.iter().any(|r| r.times != first.times) {
        return Err(Error::InvalidParameter(
            "runs were sampled on different grids".into(),
        ));
    }
    let k = runs.len() as f64;
    Ok(first
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mean = runs.iter().map(|r| r.x1[i]).sum::<f64>() / k;
            let var = if runs.len() > 1 {
                runs.iter().map(|r| (r.x1[i] - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            AggregatePoint {
                t,
                mean_x1: mean,
                std_x1: var.sqrt(),
                n_seeds: runs.len(),
            }
        })
        .collect())
}

/// Largest `|mean_x1(t) - x1_ode(t)|` over the aggregate's sample times.
pub fn sup_norm_gap(
    params: &ModelParams,
    policy: &RewardPolicy,
    x1_init: f64,
    aggregate: &[AggregatePoint],
) -> Result<f64> {
    let [.., last] = aggregate else {
        return Ok(0.0);
    };
    if aggregate.len() < 2 {
        return Ok((aggregate[0].mean_x1 - x1_init).abs());
    }
    let sample_dt = aggregate[1].t - aggregate[0].t;
    let sub = (sample_dt / 1e-3).ceil().max(1.0) as usize;
    let dt = sample_dt / sub as f64;
    let ode = integrate(params, policy, x1_init, last.t, dt)?;
    Ok(aggregate
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let idx = (j * sub).min(ode.len() - 1);
            (p.mean_x1 - ode.states()[idx]).abs()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldPoint {
    pub n_strategic: usize,
    pub sup_gap: f64,
}

/// Sup-norm gap between the seed-averaged path and the ODE for each population size.
pub fn mean_field_study(
    params: &ModelParams,
    policy: &RewardPolicy,
    x1_init: f64,
    sizes: &[usize],
    seeds: &[u64],
    horizon: f64,
    sample_dt: f64,
) -> Result<Vec<MeanFieldPoint>> {
    sizes
        .iter()
        .map(|&n_strategic| {
            let runs = run_ensemble(
                params,
                policy,
                n_strategic,
                x1_init,
                None,
                seeds,
                horizon,
                sample_dt,
            )?;
            let agg = aggregate(&runs)?;
            Ok(MeanFieldPoint {
                n_strategic,
                sup_gap: sup_norm_gap(params, policy, x1_init, &agg)?,
            })
        })
        .collect()
}
