//! Reward feedback design.
//!
//! Below `d/(m+n)` no state feedback that pays `R*` at full participation can
//! make `x1 = 1` attractive. Inside the bistable range `(d/(m+n), d/m)` the
//! piecewise law
//!
//! ```text
//! R(x1) = R* + K (x_bar - x1)   if x1 < x1* + eps
//!       = R*                    otherwise
//! ```
//!
//! drives every state in `(0, 1]` to `1` when `K` exceeds
//! `(d - R* m) / (m x_bar)` and `eps` stays below the larger root of the
//! closed-loop numerator polynomial `zeta` (or up to `1 - x1*` when that
//! root is at or beyond 1).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Amount by which an open upper endpoint of the `eps` interval is pulled in
/// during synthesis.
pub const OPEN_ENDPOINT_SHRINK: f64 = 1e-9;

/// Number of grid points used by [`validate`] to confirm positive closed-loop flow.
pub const FLOW_GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecFile", into = "SpecFile")]
pub struct ControllerSpec {
    params: ModelParams,
    r_star: f64,
    x_bar: f64,
    gain: f64,
    eps: f64,
}

/// Flat on-disk layout of a controller spec.
#[derive(Serialize, Deserialize)]
struct SpecFile {
    m: u32,
    n: u32,
    d: f64,
    #[serde(rename = "R_star")]
    r_star: f64,
    x_bar: f64,
    #[serde(rename = "K")]
    gain: f64,
    eps: f64,
}

impl TryFrom<SpecFile> for ControllerSpec {
    type Error = Error;

    fn try_from(f: SpecFile) -> Result<Self> {
        ControllerSpec::new(
            ModelParams::new(f.m, f.n, f.d)?,
            f.r_star,
            f.x_bar,
            f.gain,
            f.eps,
        )
    }
}

impl From<ControllerSpec> for SpecFile {
    fn from(s: ControllerSpec) -> Self {
        SpecFile {
            m: s.params.m(),
            n: s.params.n(),
            d: s.params.d(),
            r_star: s.r_star,
            x_bar: s.x_bar,
            gain: s.gain,
            eps: s.eps,
        }
    }
}

/// Coefficients of `zeta(x) = a x^2 + b x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    /// Real roots in ascending order, computed without cancellation: the
    /// larger-magnitude root comes from `q = -(b + sign(b) sqrt(disc)) / 2`,
    /// the other from the product `c / a`.
    pub fn real_roots(&self) -> Result<(f64, f64)> {
        let disc = self.discriminant();
        if !(disc >= 0.0) {
            return Err(Error::RootsNotReal { discriminant: disc });
        }
        let q = -0.5 * (self.b + disc.sqrt().copysign(self.b));
        if q == 0.0 {
            // b = 0 and c = 0
            return Ok((0.0, 0.0));
        }
        let r0 = q / self.a;
        let r1 = self.c / q;
        Ok((r0.min(r1), r0.max(r1)))
    }
}

impl ControllerSpec {
    /// Builds a spec without checking feasibility; see [`validate`].
    pub fn new(params: ModelParams, r_star: f64, x_bar: f64, gain: f64, eps: f64) -> Result<Self> {
        if !(r_star.is_finite() && r_star > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "R* must be positive, got {r_star}"
            )));
        }
        if !x_bar.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "x_bar must be finite, got {x_bar}"
            )));
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gain K must be positive, got {gain}"
            )));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must be positive, got {eps}"
            )));
        }
        Ok(Self {
            params,
            r_star,
            x_bar,
            gain,
            eps,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    pub fn x_bar(&self) -> f64 {
        self.x_bar
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Interior equilibrium of the open loop at `R*`.
    pub fn x1_star(&self) -> f64 {
        (self.params.d() / self.r_star - self.params.mf()) / self.params.nf()
    }

    /// State at which the feedback term switches off.
    pub fn switch_threshold(&self) -> f64 {
        self.x1_star() + self.eps
    }

    pub fn zeta_polynomial(&self) -> Quadratic {
        let (m, n, d) = (self.params.mf(), self.params.nf(), self.params.d());
        let k = self.gain;
        Quadratic {
            a: -k * n,
            b: k * n * self.x_bar - k * m + self.r_star * n,
            c: self.r_star * m + k * m * self.x_bar - d,
        }
    }

    pub fn zeta(&self, x1: f64) -> f64 {
        self.zeta_polynomial().eval(x1)
    }

    /// Roots `(alpha, beta)` of `zeta`, `alpha < beta`.
    pub fn zeta_roots(&self) -> Result<(f64, f64)> {
        self.zeta_polynomial().real_roots()
    }

    /// Reward with the feedback term active regardless of the switch.
    pub fn active_reward(&self, x1: f64) -> f64 {
        self.r_star + self.gain * (self.x_bar - x1)
    }

    /// `R*` plus the feedback term while `x1 < x1* + eps`, `R*` otherwise.
    pub fn reward(&self, x1: f64) -> f64 {
        if x1 < self.switch_threshold() {
            self.active_reward(x1)
        } else {
            self.r_star
        }
    }

    /// Closed-loop flow with the feedback term active.
    pub fn eta(&self, x1: f64) -> f64 {
        self.params.phi(self.active_reward(x1), x1)
    }

    /// Closed-loop flow under the switched law.
    pub fn closed_loop_field(&self, x1: f64) -> f64 {
        self.params.phi(self.reward(x1), x1)
    }

    /// The switched law has no jump when `eps = x_bar - x1*`.
    pub fn reward_is_continuous(&self) -> bool {
        (self.eps - (self.x_bar - self.x1_star())).abs() < 1e-12
    }

    pub fn gain_lower_bound(&self) -> Result<f64> {
        gain_lower_bound(&self.params, self.r_star, self.x_bar)
    }

    pub fn eps_interval(&self) -> Result<EpsInterval> {
        eps_interval(&self.params, self.r_star, self.x_bar, self.gain)
    }
}

/// Outcome of the impossibility test below `d/(m+n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conclusion {
    Unstabilizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub r_star: f64,
    /// Slope of the closed-loop field at `x1 = 1`; positive means repelling.
    pub boundary_derivative: f64,
    pub conclusion: Conclusion,
}

/// Slope at `x1 = 1` of the flow under any feedback law with `R(1) = R*`.
/// The `x1 (1 - x1)` factor kills the feedback's own slope there, leaving
/// `-(R* - d/(m+n)) / (m+n)`.
pub fn boundary_derivative(params: &ModelParams, r_star: f64) -> f64 {
    params.phi_derivative_at_one(r_star)
}

/// `Some` exactly when `R* < d/(m+n)`.
pub fn check_unstabilizable(
    params: &ModelParams,
    r_star: f64,
) -> Result<Option<InfeasibilityReport>> {
    if !(r_star.is_finite() && r_star > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "R* must be positive, got {r_star}"
        )));
    }
    if r_star < params.lower_threshold() {
        Ok(Some(InfeasibilityReport {
            r_star,
            boundary_derivative: boundary_derivative(params, r_star),
            conclusion: Conclusion::Unstabilizable,
        }))
    } else {
        Ok(None)
    }
}

/// `R* = d/(m+n)`: the boundary slope vanishes and linearization decides nothing.
pub fn boundary_is_marginal(params: &ModelParams, r_star: f64) -> bool {
    boundary_derivative(params, r_star) == 0.0
}

fn check_hypothesis(params: &ModelParams, r_star: f64, x_bar: f64) -> Result<f64> {
    let (lower, upper) = (params.lower_threshold(), params.upper_threshold());
    if !(r_star > lower && r_star < upper) {
        return Err(Error::Domain(format!(
            "R*={r_star} must lie strictly between d/(m+n)={lower} and d/m={upper}"
        )));
    }
    let star = (params.d() / r_star - params.mf()) / params.nf();
    if !(x_bar > star && x_bar <= 1.0) {
        return Err(Error::Domain(format!(
            "x_bar={x_bar} must lie in (x1*={star}, 1]"
        )));
    }
    Ok(star)
}

/// `K_min = (d - R* m) / (m x_bar)`.
pub fn gain_lower_bound(params: &ModelParams, r_star: f64, x_bar: f64) -> Result<f64> {
    check_hypothesis(params, r_star, x_bar)?;
    Ok((params.d() - r_star * params.mf()) / (params.mf() * x_bar))
}

/// Admissible `eps`: `(0, upper)` or `(0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsInterval {
    pub upper: f64,
    pub upper_closed: bool,
}

impl EpsInterval {
    pub fn contains(&self, eps: f64) -> bool {
        eps > 0.0 && (eps < self.upper || (self.upper_closed && eps <= self.upper))
    }
}

impl fmt::Display for EpsInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(0, {}{}",
            self.upper,
            if self.upper_closed { ']' } else { ')' }
        )
    }
}

pub fn eps_interval(
    params: &ModelParams,
    r_star: f64,
    x_bar: f64,
    gain: f64,
) -> Result<EpsInterval> {
    let bound = gain_lower_bound(params, r_star, x_bar)?;
    if !(gain > bound) {
        return Err(Error::Infeasible(format!(
            "gain K={gain} is not above the lower bound {bound}"
        )));
    }
    let star = (params.d() / r_star - params.mf()) / params.nf();
    let spec = ControllerSpec::new(*params, r_star, x_bar, gain, 1.0)?;
    let (_, beta) = spec.zeta_roots()?;
    Ok(if beta < 1.0 {
        EpsInterval {
            upper: beta - star,
            upper_closed: false,
        }
    } else {
        EpsInterval {
            upper: 1.0 - star,
            upper_closed: true,
        }
    })
}

/// Picks `K = K_min (1 + gain_margin)` and `eps = eps_fraction * eps_max`,
/// pulling an open `eps_max` in by [`OPEN_ENDPOINT_SHRINK`].
pub fn synthesize(
    params: &ModelParams,
    r_star: f64,
    x_bar: f64,
    gain_margin: f64,
    eps_fraction: f64,
) -> Result<ControllerSpec> {
    if !(gain_margin.is_finite() && gain_margin >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gain margin must be nonnegative, got {gain_margin}"
        )));
    }
    if !(eps_fraction > 0.0 && eps_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps fraction must lie in (0, 1], got {eps_fraction}"
        )));
    }
    let gain = gain_lower_bound(params, r_star, x_bar)? * (1.0 + gain_margin);
    let interval = eps_interval(params, r_star, x_bar, gain)?;
    let top = if interval.upper_closed {
        interval.upper
    } else {
        interval.upper - OPEN_ENDPOINT_SHRINK
    };
    let eps = eps_fraction * top;
    if !interval.contains(eps) {
        return Err(Error::Infeasible(format!(
            "eps={eps} falls outside {interval}"
        )));
    }
    ControllerSpec::new(*params, r_star, x_bar, gain, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    RewardOutsideBistableRange { r_star: f64, lower: f64, upper: f64 },
    AnchorOutOfRange { x_bar: f64, x1_star: f64 },
    GainTooLow { gain: f64, bound: f64 },
    EpsOutOfRange { eps: f64, interval: EpsInterval },
    RootsNotReal { discriminant: f64 },
    FlowNotPositive { x1: f64, flow: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RewardOutsideBistableRange {
                r_star,
                lower,
                upper,
            } => write!(
                f,
                "nominal reward R*={r_star} is outside the bistable range ({lower}, {upper})"
            ),
            Violation::AnchorOutOfRange { x_bar, x1_star } => {
                write!(f, "anchor x_bar={x_bar} is outside (x1*={x1_star}, 1]")
            }
            Violation::GainTooLow { gain, bound } => {
                write!(
                    f,
                    "gain K={gain} is not above the lower bound K_min={bound}"
                )
            }
            Violation::EpsOutOfRange { eps, interval } => {
                write!(
                    f,
                    "switch offset eps={eps} is outside the admissible interval {interval}"
                )
            }
            Violation::RootsNotReal { discriminant } => {
                write!(f, "zeta has no real roots (discriminant {discriminant})")
            }
            Violation::FlowNotPositive { x1, flow } => {
                write!(
                    f,
                    "closed-loop flow is not positive at x1={x1} (value {flow})"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return writeln!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the design inequalities and then confirms numerically that the
/// closed-loop flow is positive on a grid over `[1e-4, 1 - 1e-4]`.
pub fn validate(spec: &ControllerSpec) -> ValidationReport {
    let params = spec.params();
    let mut violations = Vec::new();
    let (lower, upper) = (params.lower_threshold(), params.upper_threshold());
    let r_star = spec.r_star();
    let in_range = r_star > lower && r_star < upper;
    if !in_range {
        violations.push(Violation::RewardOutsideBistableRange {
            r_star,
            lower,
            upper,
        });
    }
    let star = spec.x1_star();
    let anchored = spec.x_bar() > star && spec.x_bar() <= 1.0;
    if !anchored {
        violations.push(Violation::AnchorOutOfRange {
            x_bar: spec.x_bar(),
            x1_star: star,
        });
    }
    if in_range && anchored {
        let bound = (params.d() - r_star * params.mf()) / (params.mf() * spec.x_bar());
        if !(spec.gain() > bound) {
            violations.push(Violation::GainTooLow {
                gain: spec.gain(),
                bound,
            });
        } else {
            match spec.zeta_roots() {
                Ok((_, beta)) => {
                    let interval = if beta < 1.0 {
                        EpsInterval {
                            upper: beta - star,
                            upper_closed: false,
                        }
                    } else {
                        EpsInterval {
                            upper: 1.0 - star,
                            upper_closed: true,
                        }
                    };
                    if !interval.contains(spec.eps()) {
                        violations.push(Violation::EpsOutOfRange {
                            eps: spec.eps(),
                            interval,
                        });
                    }
                }
                Err(Error::RootsNotReal { discriminant }) => {
                    violations.push(Violation::RootsNotReal { discriminant })
                }
                Err(_) => unreachable!("real_roots only fails with RootsNotReal"),
            }
        }
    }

    let (lo, hi) = (1e-4, 1.0 - 1e-4);
    let step = (hi - lo) / (FLOW_GRID_POINTS - 1) as f64;
    if let Some((x1, flow)) = (0..FLOW_GRID_POINTS)
        .map(|i| lo + step * i as f64)
        .map(|x| (x, spec.closed_loop_field(x)))
        .find(|&(_, flow)| !(flow > 0.0))
    {
        violations.push(Violation::FlowNotPositive { x1, flow });
    }

    ValidationReport {
        valid: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeOffMetrics {
    /// First time after which `|x1 - 1| <= state_tol` holds for the rest of
    /// the trajectory; `None` if the last sample is still outside.
    pub state_settle_time: Option<f64>,
    /// First time after which `|R - R*| <= reward_tol` holds for the rest of
    /// the trajectory.
    pub reward_recovery_time: Option<f64>,
}

// Time from which `inside` holds for every remaining sample.
fn suffix_entry(times: &[f64], inside: impl Fn(usize) -> bool) -> Option<f64> {
    match (0..times.len()).rev().find(|&i| !inside(i)) {
        None => times.first().copied(),
        Some(i) if i + 1 < times.len() => Some(times[i + 1]),
        Some(_) => None,
    }
}

pub fn trade_off_metrics(
    trajectory: &Trajectory,
    spec: &ControllerSpec,
    state_tol: f64,
    reward_tol: f64,
) -> TradeOffMetrics {
    let states = trajectory.states();
    let rewards = trajectory.rewards();
    let times = trajectory.times();
    TradeOffMetrics {
        state_settle_time: suffix_entry(times, |i| (states[i] - 1.0).abs() <= state_tol),
        reward_recovery_time: suffix_entry(times, |i| {
            (rewards[i] - spec.r_star()).abs() <= reward_tol
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use proptest::strategy::Strategy as Gen;

    fn base() -> ModelParams {
        ModelParams::new(2, 2, 100.0).unwrap()
    }

    fn case1() -> ControllerSpec {
        ControllerSpec::new(base(), 40.0, 0.26, 56.8125, 0.005).unwrap()
    }

    fn case2() -> ControllerSpec {
        ControllerSpec::new(base(), 40.0, 1.0, 10.1, 0.75).unwrap()
    }

    // Textbook quadratic formula, independent of the cancellation-free path.
    fn naive_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
        let s = (b * b - 4.0 * a * c).sqrt();
        let (r1, r2) = ((-b + s) / (2.0 * a), (-b - s) / (2.0 * a));
        (r1.min(r2), r1.max(r2))
    }

    #[test]
    fn unstabilizable_examples() {
        let r = check_unstabilizable(&base(), 20.0).unwrap().unwrap();
        assert_relative_eq!(r.boundary_derivative, 1.25, max_relative = 1e-14);
        assert_eq!(r.conclusion, Conclusion::Unstabilizable);
        assert!(check_unstabilizable(&base(), 40.0).unwrap().is_none());
        assert!(check_unstabilizable(&base(), 25.0).unwrap().is_none());
        assert!(boundary_is_marginal(&base(), 25.0));
        assert!(!boundary_is_marginal(&base(), 40.0));
    }

    #[test]
    fn boundary_derivative_matches_feedback_field() {
        // any law with R(1) = R* has the same slope at 1; try a steep one
        let p = base();
        let law = |x: f64| 20.0 + 300.0 * (1.0 - x);
        let h = 1e-6;
        let numeric = (p.phi(law(1.0 + h), 1.0 + h) - p.phi(law(1.0 - h), 1.0 - h)) / (2.0 * h);
        assert_relative_eq!(numeric, boundary_derivative(&p, 20.0), max_relative = 1e-6);
    }

    #[test]
    fn zeta_examples() {
        assert_relative_eq!(case2().zeta(0.0), 0.2, max_relative = 1e-12);
        assert_relative_eq!(case1().zeta(0.0), 9.5425, max_relative = 1e-12);
        let q = case1().zeta_polynomial();
        assert_relative_eq!(q.a, -113.625, max_relative = 1e-14);
        assert_relative_eq!(q.b, -4.0825, max_relative = 1e-12);
        let q = case2().zeta_polynomial();
        assert_eq!((q.a, q.b), (-20.2, 80.0));
    }

    #[test]
    fn zeta_at_interior_root() {
        // corrected factor: (m + n x1*)
        for spec in [case1(), case2()] {
            let star = spec.x1_star();
            let p = spec.params();
            let expected = spec.gain() * (spec.x_bar() - star) * p.active_miners(star);
            assert_relative_eq!(spec.zeta(star), expected, max_relative = 1e-12);
            assert!(expected > 0.0);
        }
    }

    #[test]
    fn eta_factorization() {
        for spec in [case1(), case2()] {
            let p = spec.params();
            for i in 0..=50 {
                let x = i as f64 / 50.0;
                let total = p.active_miners(x);
                let factored = x * (1.0 - x) * spec.zeta(x) / (total * total);
                assert!((spec.eta(x) - factored).abs() <= 1e-12 * (1.0 + factored.abs()));
            }
        }
    }

    #[test]
    fn roots_against_oracle() {
        let (alpha, beta) = case1().zeta_roots().unwrap();
        let (oa, ob) = naive_roots(-113.625, -4.0825, 9.5425);
        assert_relative_eq!(alpha, oa, max_relative = 1e-10);
        assert_relative_eq!(beta, ob, max_relative = 1e-10);
        assert!((alpha - (-0.3083)).abs() < 1e-4 && (beta - 0.2724).abs() < 1e-4);

        let (alpha, beta) = case2().zeta_roots().unwrap();
        let (oa, ob) = naive_roots(-20.2, 80.0, 0.2);
        assert_relative_eq!(alpha, oa, max_relative = 1e-8);
        assert_relative_eq!(beta, ob, max_relative = 1e-12);
        assert!((alpha - (-0.0025)).abs() < 1e-5 && (beta - 3.963).abs() < 1e-3);
    }

    #[test]
    fn alpha_approaches_zero_from_below() {
        let bound = gain_lower_bound(&base(), 40.0, 1.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for margin in [1e-2, 1e-4, 1e-6, 1e-8] {
            let spec = ControllerSpec::new(base(), 40.0, 1.0, bound * (1.0 + margin), 0.5).unwrap();
            let (alpha, _) = spec.zeta_roots().unwrap();
            assert!(alpha < 0.0 && alpha > prev);
            assert!(spec.zeta(0.0) > 0.0);
            prev = alpha;
        }
        assert!(prev > -1e-8);
    }

    #[test]
    fn negative_discriminant_is_error() {
        let q = Quadratic {
            a: -1.0,
            b: 0.0,
            c: -1.0,
        };
        assert!(matches!(q.real_roots(), Err(Error::RootsNotReal { .. })));
    }

    #[test]
    fn gain_bounds() {
        assert_eq!(gain_lower_bound(&base(), 40.0, 1.0).unwrap(), 10.0);
        assert_relative_eq!(
            gain_lower_bound(&base(), 40.0, 0.26).unwrap(),
            20.0 / 0.52,
            max_relative = 1e-14
        );
        let near = gain_lower_bound(&base(), 50.0 - 1e-9, 1.0).unwrap();
        assert!(near > 0.0 && near < 1e-8);
        assert!(matches!(
            gain_lower_bound(&base(), 20.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gain_lower_bound(&base(), 40.0, 0.2),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gain_lower_bound(&base(), 40.0, 1.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn eps_intervals() {
        let i = case1().eps_interval().unwrap();
        assert!(!i.upper_closed);
        let (_, beta) = naive_roots(-113.625, -4.0825, 9.5425);
        assert_relative_eq!(i.upper, beta - 0.25, max_relative = 1e-9);
        assert!((i.upper - 0.0224).abs() < 1e-4);
        assert!(i.contains(0.005));

        let i = case2().eps_interval().unwrap();
        assert_eq!(
            i,
            EpsInterval {
                upper: 0.75,
                upper_closed: true
            }
        );
        assert!(i.contains(0.75));
        assert_eq!(i.to_string(), "(0, 0.75]");

        assert!(matches!(
            eps_interval(&base(), 40.0, 1.0, 9.9),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn eps_interval_case_split_at_beta_one() {
        // beta = 1 exactly when zeta(1) = 0: R* (m+n) + K (x_bar - 1) (m+n) ... solve for K
        // zeta(1) = -Kn + Kn x_bar - Km + R* n + R* m + K m x_bar - d = K (m+n)(x_bar - 1) + R*(m+n) - d
        let (x_bar, r_star) = (0.5, 40.0);
        let gain = (100.0 - r_star * 4.0) / (4.0 * (x_bar - 1.0));
        let spec = ControllerSpec::new(base(), r_star, x_bar, gain, 0.1).unwrap();
        assert_eq!(spec.zeta(1.0), 0.0);
        let (_, beta) = spec.zeta_roots().unwrap();
        assert_eq!(beta, 1.0);
        let i = spec.eps_interval().unwrap();
        assert_eq!(
            i,
            EpsInterval {
                upper: 0.75,
                upper_closed: true
            }
        );
    }

    #[test]
    fn synthesis() {
        let spec = synthesize(&base(), 40.0, 1.0, 0.01, 1.0).unwrap();
        assert_relative_eq!(spec.gain(), 10.1, max_relative = 1e-14);
        assert_eq!(spec.eps(), 0.75);
        assert!(validate(&spec).valid);

        let spec = synthesize(&base(), 40.0, 0.26, 0.5, 1.0).unwrap();
        let i = spec.eps_interval().unwrap();
        assert!(!i.upper_closed && spec.eps() < i.upper);
        assert!(validate(&spec).valid);

        assert!(matches!(
            synthesize(&base(), 40.0, 0.26, 0.0, 1.0),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            synthesize(&base(), 20.0, 1.0, 0.1, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(synthesize(&base(), 40.0, 1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn validation_of_reference_cases() {
        assert_eq!(
            validate(&case1()),
            ValidationReport {
                valid: true,
                violations: vec![]
            }
        );
        assert!(validate(&case2()).valid);

        let weak = ControllerSpec::new(base(), 40.0, 1.0, 9.9, 0.75).unwrap();
        let report = validate(&weak);
        assert!(!report.valid);
        assert!(
            matches!(report.violations[0], Violation::GainTooLow { bound, .. } if bound == 10.0)
        );

        let wide = ControllerSpec::new(base(), 40.0, 0.26, 56.8125, 0.05).unwrap();
        let report = validate(&wide);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::EpsOutOfRange { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::FlowNotPositive { .. })));

        let low = ControllerSpec::new(base(), 20.0, 1.0, 10.0, 0.5).unwrap();
        let report = validate(&low);
        assert!(matches!(
            report.violations[0],
            Violation::RewardOutsideBistableRange { .. }
        ));
        assert!(report.to_string().lines().count() >= 1);
    }

    #[test]
    fn reward_law() {
        assert_eq!(case2().reward(1.0), 40.0);
        assert_relative_eq!(case1().reward(0.1), 49.09, max_relative = 1e-14);
        assert_eq!(case1().reward(0.255), 40.0);
        assert!(case1().reward(0.2549) > 40.0);
        assert!(case2().reward_is_continuous());
        assert!(!case1().reward_is_continuous());
    }

    #[test]
    fn spec_file_round_trip() {
        let mut w = csv::Writer::from_writer(vec![]);
        w.serialize(case1()).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert!(text.starts_with("m,n,d,R_star,x_bar,K,eps\n"));
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let back: ControllerSpec = r.deserialize().next().unwrap().unwrap();
        assert_eq!(back, case1());
    }

    fn feasible() -> impl Gen<Value = (ModelParams, f64, f64, f64, f64)> {
        (
            1u32..=10,
            1u32..=10,
            10.0f64..500.0,
            0.02f64..0.98,
            0.01f64..1.0,
            0.01f64..2.0,
            0.05f64..1.0,
        )
            .prop_map(|(m, n, d, t, xb, margin, frac)| {
                let p = ModelParams::new(m, n, d).unwrap();
                let r_star = p.lower_threshold() + t * (p.upper_threshold() - p.lower_threshold());
                let star = (d / r_star - m as f64) / n as f64;
                let x_bar = star + xb * (1.0 - star);
                (p, r_star, x_bar, margin, frac)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn synthesized_specs_are_valid((p, r, xb, margin, frac) in feasible()) {
            let spec = synthesize(&p, r, xb, margin, frac).unwrap();
            let report = validate(&spec);
            prop_assert!(report.valid, "{:?}", report);
            let (alpha, beta) = spec.zeta_roots().unwrap();
            let scale = spec.zeta_polynomial().a.abs() + spec.zeta_polynomial().b.abs() + spec.zeta_polynomial().c.abs();
            prop_assert!(spec.zeta(alpha).abs() <= 1e-9 * scale);
            prop_assert!(spec.zeta(beta).abs() <= 1e-9 * scale);
            prop_assert!(spec.zeta(0.0) > 0.0);
            prop_assert!(spec.zeta(spec.x1_star()) > 0.0);
            prop_assert!(alpha < 0.0 && 0.0 < spec.x1_star() && spec.x1_star() < beta);
            prop_assert!(spec.x_bar() < beta);
        }

        #[test]
        fn unstabilizable_iff_below_lower(m in 1u32..10, n in 1u32..10, d in 1.0f64..500.0, t in 0.01f64..3.0) {
            let p = ModelParams::new(m, n, d).unwrap();
            let r = t * p.lower_threshold();
            let report = check_unstabilizable(&p, r).unwrap();
            prop_assert_eq!(report.is_some(), r < p.lower_threshold());
            if let Some(rep) = report {
                prop_assert!(rep.boundary_derivative > 0.0);
            }
        }

        #[test]
        fn continuity_iff_eps_matches_anchor((p, r, xb, margin, _) in feasible(), jitter in 1e-6f64..1e-2) {
            let gain = gain_lower_bound(&p, r, xb).unwrap() * (1.0 + margin);
            let star = (p.d() / r - p.mf()) / p.nf();
            let eps = xb - star;
            let cont = ControllerSpec::new(p, r, xb, gain, eps).unwrap();
            prop_assert!(cont.reward_is_continuous());
            let jump = |s: &ControllerSpec| {
                let t = s.switch_threshold();
                (s.active_reward(t) - s.r_star()).abs()
            };
            prop_assert!(jump(&cont) < 1e-9 * (1.0 + gain));
            let broken = ControllerSpec::new(p, r, xb, gain, eps * (1.0 - jitter)).unwrap();
            prop_assert!(!broken.reward_is_continuous());
            prop_assert!(jump(&broken) > 0.0);
        }
    }
}
