//! Fixed-step RK4 integration of the participation flow under a reward
//! policy, settling to equilibria and quasi-static reward sweeps.

use serde::{Deserialize, Serialize};

use crate::controller::ControllerSpec;
use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const DEFAULT_DT: f64 = 1e-3;

/// Upper bound on the number of steps a single call may take.
pub const MAX_STEPS: u64 = 50_000_000;

/// Offset applied to a sweep state that sits exactly on `0` or `1`.
pub const BOUNDARY_NUDGE: f64 = 1e-6;

/// Model-time budget for each leg of a sweep.
pub const DEFAULT_LEG_HORIZON: f64 = 1e4;

/// Location accuracy of a policy switch crossing, in state units.
pub const SWITCH_TOL: f64 = 1e-10;

/// Distance to an equilibrium at which a `Converged` event is recorded.
pub const CONVERGED_TOL: f64 = 1e-10;

/// Slopes at or below this count as marginal when deciding whether a
/// settle candidate repels.
const MARGINAL_RATE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RewardPolicy {
    Constant(f64),
    Feedback(ControllerSpec),
}

impl RewardPolicy {
    pub fn reward(&self, x1: f64) -> f64 {
        match self {
            RewardPolicy::Constant(r) => *r,
            RewardPolicy::Feedback(spec) => spec.reward(x1),
        }
    }

    pub fn switch_threshold(&self) -> Option<f64> {
        match self {
            RewardPolicy::Constant(_) => None,
            RewardPolicy::Feedback(spec) => Some(spec.switch_threshold()),
        }
    }

    fn is_active(&self, x1: f64) -> bool {
        self.switch_threshold().is_some_and(|t| x1 < t)
    }

    fn reward_in_mode(&self, x1: f64, active: bool) -> f64 {
        match self {
            RewardPolicy::Constant(r) => *r,
            RewardPolicy::Feedback(spec) if active => spec.active_reward(x1),
            RewardPolicy::Feedback(spec) => spec.r_star(),
        }
    }

    /// Closed-loop vector field.
    pub fn field(&self, params: &ModelParams, x1: f64) -> f64 {
        params.phi(self.reward(x1), x1)
    }

    /// Equilibria of the closed loop in `[0, 1]`: the two boundary points
    /// plus any interior zero of the reward margin.
    pub fn equilibria(&self, params: &ModelParams) -> Vec<f64> {
        let mut out = vec![0.0, 1.0];
        match self {
            RewardPolicy::Constant(r) => {
                let star = (params.d() / r - params.mf()) / params.nf();
                if star > 0.0 && star < 1.0 {
                    out.push(star);
                }
            }
            RewardPolicy::Feedback(spec) => {
                // the inactive branch has x1* below the switch, so only zeta roots count
                let limit = spec.switch_threshold().min(1.0);
                if let Ok((alpha, beta)) = spec.zeta_roots() {
                    out.extend([alpha, beta].into_iter().filter(|&r| r > 0.0 && r < limit));
                }
            }
        }
        out
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        match self {
            RewardPolicy::Constant(r) if !(r.is_finite() && *r > 0.0) => Err(
                Error::InvalidParameter(format!("constant reward must be positive, got {r}")),
            ),
            RewardPolicy::Feedback(spec) if spec.params() != params => {
                Err(Error::InvalidParameter(
                    "controller was designed for different model parameters".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

fn rk4(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let k1 = f(x);
    let k2 = f(x + 0.5 * h * k1);
    let k3 = f(x + 0.5 * h * k2);
    let k4 = f(x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub x1: f64,
    /// The raw RK4 result left `[0, 1]` and was clamped.
    pub clamped: bool,
}

fn clamp(x: f64, time: f64) -> Result<StepOutcome> {
    if !x.is_finite() {
        return Err(Error::Integration {
            time,
            reason: format!("state became {x}"),
        });
    }
    Ok(StepOutcome {
        x1: x.clamp(0.0, 1.0),
        clamped: !(0.0..=1.0).contains(&x),
    })
}

fn check_state(x1: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x1) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "x1 must lie in [0, 1], got {x1}"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// One RK4 step with the policy's reward evaluated inside every stage.
pub fn step(params: &ModelParams, policy: &RewardPolicy, x1: f64, dt: f64) -> Result<StepOutcome> {
    policy.check(params)?;
    check_state(x1)?;
    check_positive("dt", dt)?;
    clamp(rk4(|y| policy.field(params, y), x1, dt), 0.0)
}

struct Advance {
    outcome: StepOutcome,
    /// Time offset within the step at which the policy switched.
    crossing: Option<f64>,
}

/// Advances by `dt` holding the policy branch fixed; if the state would cross
/// the switch, the crossing is bisected and the remainder uses the new branch.
fn advance(
    params: &ModelParams,
    policy: &RewardPolicy,
    x: f64,
    dt: f64,
    t: f64,
) -> Result<Advance> {
    let active = policy.is_active(x);
    let frozen = |active: bool| move |y: f64| params.phi(policy.reward_in_mode(y, active), y);
    let trial = rk4(frozen(active), x, dt);
    let Some(threshold) = policy.switch_threshold() else {
        return Ok(Advance {
            outcome: clamp(trial, t + dt)?,
            crossing: None,
        });
    };
    if !trial.is_finite() || (trial < threshold) == active {
        return Ok(Advance {
            outcome: clamp(trial, t + dt)?,
            crossing: None,
        });
    }

    let side = |y: f64| y < threshold;
    let (mut lo, mut hi) = (0.0, dt);
    let mut x_hi = trial;
    for _ in 0..200 {
        if (x_hi - threshold).abs() <= SWITCH_TOL || hi - lo <= f64::EPSILON * dt {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let x_mid = rk4(frozen(active), x, mid);
        if side(x_mid) == active {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x_mid;
        }
    }
    let rest = dt - hi;
    let next = if rest > 0.0 {
        rk4(frozen(!active), x_hi, rest)
    } else {
        x_hi
    };
    Ok(Advance {
        outcome: clamp(next, t + dt)?,
        crossing: Some(t + hi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SwitchCrossed,
    Converged,
    StepClamped,
}

impl EventKind {
    pub fn code(self) -> &'static str {
        match self {
            EventKind::SwitchCrossed => "switch_crossed",
            EventKind::Converged => "converged",
            EventKind::StepClamped => "step_clamped",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "switch_crossed" => Some(EventKind::SwitchCrossed),
            "converged" => Some(EventKind::Converged),
            "step_clamped" => Some(EventKind::StepClamped),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Sampled path of `x1` with the reward applied at each sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<f64>,
    rewards: Vec<f64>,
    events: Vec<Event>,
}

impl Trajectory {
    /// Assembles a trajectory from columns, checking the shape invariants.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<f64>,
        rewards: Vec<f64>,
        events: Vec<Event>,
    ) -> Result<Self> {
        if times.len() != states.len() || times.len() != rewards.len() {
            return Err(Error::InvalidParameter(
                "trajectory columns differ in length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if states.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParameter(
                "trajectory states must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            times,
            states,
            rewards,
            events,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<f64> {
        self.states.last().copied()
    }

    pub fn is_monotone(&self) -> bool {
        let up = self.states.windows(2).all(|w| w[1] >= w[0]);
        let down = self.states.windows(2).all(|w| w[1] <= w[0]);
        up || down
    }

    fn push(&mut self, t: f64, x: f64, r: f64) {
        self.times.push(t);
        self.states.push(x);
        self.rewards.push(r);
    }
}

fn step_count(span: f64, dt: f64) -> Result<(u64, f64)> {
    let full = (span / dt).floor();
    let rem = span - full * dt;
    let partial = rem > 1e-9 * dt;
    let total = full + if partial { 1.0 } else { 0.0 };
    if total > MAX_STEPS as f64 {
        return Err(Error::StepLimit {
            requested: total.min(u64::MAX as f64) as u64,
            limit: MAX_STEPS,
        });
    }
    Ok((total as u64, if partial { rem } else { dt }))
}

/// Integrates from `x1_init` to `t_end`, sampling every `dt`; a final shorter
/// step lands exactly on `t_end`.
pub fn integrate(
    params: &ModelParams,
    policy: &RewardPolicy,
    x1_init: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    policy.check(params)?;
    check_state(x1_init)?;
    check_positive("t_end", t_end)?;
    check_positive("dt", dt)?;
    let (steps, last_dt) = step_count(t_end, dt)?;

    let equilibria = policy.equilibria(params);
    let near_equilibrium = |x: f64| equilibria.iter().any(|e| (x - e).abs() <= CONVERGED_TOL);

    let mut traj = Trajectory::default();
    let mut x = x1_init;
    traj.push(0.0, x, policy.reward(x));
    let mut converged = near_equilibrium(x);
    if converged {
        traj.events.push(Event {
            time: 0.0,
            kind: EventKind::Converged,
        });
    }

    for i in 0..steps {
        let t = i as f64 * dt;
        let h = if i + 1 == steps { last_dt } else { dt };
        let adv = advance(params, policy, x, h, t)?;
        let t_next = if i + 1 == steps {
            t_end
        } else {
            (i + 1) as f64 * dt
        };
        if let Some(tc) = adv.crossing {
            traj.events.push(Event {
                time: tc,
                kind: EventKind::SwitchCrossed,
            });
        }
        if adv.outcome.clamped {
            traj.events.push(Event {
                time: t_next,
                kind: EventKind::StepClamped,
            });
        }
        x = adv.outcome.x1;
        traj.push(t_next, x, policy.reward(x));
        if !converged && near_equilibrium(x) {
            converged = true;
            traj.events.push(Event {
                time: t_next,
                kind: EventKind::Converged,
            });
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettleOutcome {
    /// The equilibrium reached, or the last state when not settled.
    pub limit: f64,
    pub settled: bool,
    /// First time from which the state stayed within `tol` of `limit`; the
    /// elapsed time when not settled.
    pub settle_time: f64,
}

pub fn settle(
    params: &ModelParams,
    policy: &RewardPolicy,
    x1_init: f64,
    tol: f64,
    t_max: f64,
) -> Result<SettleOutcome> {
    settle_with_dt(params, policy, x1_init, tol, t_max, DEFAULT_DT)
}

struct Candidate {
    value: f64,
    repelling_slope: bool,
    entered_at: Option<f64>,
}

/// Integrates until the state is within `tol` of an equilibrium with a
/// small residual flow, or `t_max` elapses.
///
/// An equilibrium the state is moving away from is not accepted unless the
/// flow's slope there is marginal.
pub fn settle_with_dt(
    params: &ModelParams,
    policy: &RewardPolicy,
    x1_init: f64,
    tol: f64,
    t_max: f64,
    dt: f64,
) -> Result<SettleOutcome> {
    policy.check(params)?;
    check_state(x1_init)?;
    check_positive("tol", tol)?;
    check_positive("t_max", t_max)?;
    check_positive("dt", dt)?;
    let (steps, last_dt) = step_count(t_max, dt)?;

    let h = 1e-6;
    let mut candidates: Vec<Candidate> = policy
        .equilibria(params)
        .into_iter()
        .map(|value| {
            let slope =
                (policy.field(params, value + h) - policy.field(params, value - h)) / (2.0 * h);
            Candidate {
                value,
                repelling_slope: slope > MARGINAL_RATE,
                entered_at: None,
            }
        })
        .collect();

    let mut x = x1_init;
    let mut t = 0.0;
    let mut i = 0;
    loop {
        let flow = policy.field(params, x);
        for c in candidates.iter_mut() {
            if (x - c.value).abs() <= tol + 4.0 * f64::EPSILON {
                c.entered_at.get_or_insert(t);
            } else {
                c.entered_at = None;
            }
        }
        if flow.abs() < tol * x.abs().max(1.0) {
            let hit = candidates.iter().find(|c| {
                let leaving = flow * (c.value - x) < 0.0;
                c.entered_at.is_some() && !(leaving && c.repelling_slope)
            });
            if let Some(c) = hit {
                return Ok(SettleOutcome {
                    limit: c.value,
                    settled: true,
                    settle_time: c.entered_at.unwrap_or(t),
                });
            }
        }
        if i == steps {
            return Ok(SettleOutcome {
                limit: x,
                settled: false,
                settle_time: t,
            });
        }
        let h = if i + 1 == steps { last_dt } else { dt };
        x = advance(params, policy, x, h, t)?.outcome.x1;
        i += 1;
        t = if i == steps { t_max } else { i as f64 * dt };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub leg: usize,
    #[serde(rename = "R")]
    pub reward: f64,
    pub x1_settled: f64,
    pub settle_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub settle_tol: f64,
    pub leg_horizon: f64,
    pub dt: f64,
}

impl SweepOptions {
    pub fn new(settle_tol: f64) -> Self {
        Self {
            settle_tol,
            leg_horizon: DEFAULT_LEG_HORIZON,
            dt: DEFAULT_DT,
        }
    }
}

/// Settles at each reward in turn, starting every leg from the previous
/// leg's settled state.
pub fn hysteresis_sweep(
    params: &ModelParams,
    reward_path: &[f64],
    x1_seed: f64,
    settle_tol: f64,
) -> Result<Vec<SweepPoint>> {
    hysteresis_sweep_with(params, reward_path, x1_seed, SweepOptions::new(settle_tol))
}

pub fn hysteresis_sweep_with(
    params: &ModelParams,
    reward_path: &[f64],
    x1_seed: f64,
    opts: SweepOptions,
) -> Result<Vec<SweepPoint>> {
    if reward_path.is_empty() {
        return Err(Error::InvalidParameter("reward path is empty".into()));
    }
    check_state(x1_seed)?;
    let mut x = x1_seed;
    let mut out = Vec::with_capacity(reward_path.len());
    for (leg, &reward) in reward_path.iter().enumerate() {
        // 0 and 1 are fixed for every reward; nudge so a destabilized boundary can be left
        if x == 0.0 {
            x = BOUNDARY_NUDGE;
        } else if x == 1.0 {
            x = 1.0 - BOUNDARY_NUDGE;
        }
        let policy = RewardPolicy::Constant(reward);
        let s = settle_with_dt(
            params,
            &policy,
            x,
            opts.settle_tol,
            opts.leg_horizon,
            opts.dt,
        )?;
        if !s.settled {
            return Err(Error::SweepLeg {
                leg,
                reward,
                last_state: s.limit,
            });
        }
        out.push(SweepPoint {
            leg,
            reward,
            x1_settled: s.limit,
            settle_time: s.settle_time,
        });
        x = s.limit;
    }
    Ok(out)
}

/// Rewards from `from` to `to` (inclusive when hit) in increments of `|step|`.
pub fn reward_path(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    check_positive("step", step.abs())?;
    let span = to - from;
    let count = (span.abs() / step.abs() + 1e-9).floor() as usize;
    let dir = if span < 0.0 { -1.0 } else { 1.0 };
    Ok((0..=count)
        .map(|i| from + dir * step.abs() * i as f64)
        .collect())
}
