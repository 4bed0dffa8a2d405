//! Equilibria of the uncontrolled flow, their stability, the parameter-plane
//! regions, bifurcation branch tables and the transcritical conditions at the
//! two exchange-of-stability points.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Half-width of the non-hyperbolic band around `R = d/m` and `R = d/(m+n)`,
/// relative to `d`.
pub const MARGINAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    /// Linearization is inconclusive (zero eigenvalue).
    Marginal,
}

impl Stability {
    pub fn code(self) -> &'static str {
        match self {
            Stability::Stable => "S",
            Stability::Unstable => "U",
            Stability::Marginal => "M",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "S" => Some(Stability::Stable),
            "U" => Some(Stability::Unstable),
            "M" => Some(Stability::Marginal),
            _ => None,
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Region of the `(m, R/d)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `R/d > 1/m`: full participation is the only attractor in `(0, 1]`.
    A,
    /// `1/(m+n) < R/d < 1/m`: bistable.
    B,
    /// `R/d < 1/(m+n)`: abstention attracts `[0, 1)`.
    C,
    /// Within [`MARGINAL_BAND`] of one of the two threshold curves.
    Boundary,
}

impl Region {
    pub fn code(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
            Region::Boundary => "boundary",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "A" => Some(Region::A),
            "B" => Some(Region::B),
            "C" => Some(Region::C),
            "boundary" => Some(Region::Boundary),
            _ => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Interval of initial states, clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        Self {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub value: f64,
    pub stability: Stability,
}

/// The root `x1* = (d/R - m)/n` of the utility of mining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorEquilibrium {
    pub value: f64,
    pub stability: Stability,
    /// `0 < x1* < 1`.
    pub in_unit_interval: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub reward: f64,
    pub eq_zero: Equilibrium,
    pub eq_one: Equilibrium,
    pub eq_interior: InteriorEquilibrium,
    pub region: Region,
    /// Basin of `x1 = 0`, `None` when that point is not an attractor.
    pub basin_zero: Option<Interval>,
    /// Basin of `x1 = 1`, `None` when that point is not an attractor.
    pub basin_one: Option<Interval>,
}

fn check_reward(reward: f64) -> Result<()> {
    if reward.is_finite() && reward > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "reward must be positive, got {reward}"
        )))
    }
}

/// Closed-form interior root `x1* = (d/R - m)/n` and whether it lies in `(0, 1)`.
pub fn interior_equilibrium(params: &ModelParams, reward: f64) -> Result<(f64, bool)> {
    check_reward(reward)?;
    let value = (params.d() / reward - params.mf()) / params.nf();
    Ok((value, value > 0.0 && value < 1.0))
}

fn label(derivative: f64) -> Stability {
    if derivative < 0.0 {
        Stability::Stable
    } else if derivative > 0.0 {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

/// Stability labels, region tag and basins at reward `R`.
pub fn classify_equilibria(params: &ModelParams, reward: f64) -> Result<EquilibriumReport> {
    let (star, in_unit) = interior_equilibrium(params, reward)?;
    let band = MARGINAL_BAND * params.d();
    let at_upper = (reward - params.upper_threshold()).abs() < band;
    let at_lower = (reward - params.lower_threshold()).abs() < band;

    let zero = if at_upper {
        Stability::Marginal
    } else {
        label(params.phi_derivative_at_zero(reward))
    };
    let one = if at_lower {
        Stability::Marginal
    } else {
        label(params.phi_derivative_at_one(reward))
    };
    let interior = if at_upper || at_lower {
        Stability::Marginal
    } else {
        label(params.phi_derivative_at_interior(reward))
    };

    let region = if at_upper || at_lower {
        Region::Boundary
    } else if reward > params.upper_threshold() {
        Region::A
    } else if reward > params.lower_threshold() {
        Region::B
    } else {
        Region::C
    };

    let (basin_zero, basin_one) = match region {
        Region::A => (None, Some(Interval::new(0.0, false, 1.0, true))),
        Region::B => (
            Some(Interval::new(0.0, true, star, false)),
            Some(Interval::new(star, false, 1.0, true)),
        ),
        Region::C => (Some(Interval::new(0.0, true, 1.0, false)), None),
        // On R = d/m the flow is positive on (0, 1); on R = d/(m+n) it is negative.
        Region::Boundary if at_upper => (None, Some(Interval::new(0.0, false, 1.0, true))),
        Region::Boundary => (Some(Interval::new(0.0, true, 1.0, false)), None),
    };

    Ok(EquilibriumReport {
        reward,
        eq_zero: Equilibrium {
            value: 0.0,
            stability: zero,
        },
        eq_one: Equilibrium {
            value: 1.0,
            stability: one,
        },
        eq_interior: InteriorEquilibrium {
            value: star,
            stability: interior,
            in_unit_interval: in_unit,
        },
        region,
        basin_zero,
        basin_one,
    })
}

/// Grid over integer `m` and uniformly spaced `R/d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub m_min: u32,
    pub m_max: u32,
    pub rd_min: f64,
    pub rd_max: f64,
    pub rd_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub m: u32,
    #[serde(rename = "R_over_d")]
    pub r_over_d: f64,
    pub region: Region,
}

fn linspace(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            if i == samples - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect()
}

/// Tags each `(m, R/d)` cell of the grid (with `d = 1`), row-major in `m`.
pub fn region_map(n: u32, grid: &RegionGrid) -> Result<Vec<RegionCell>> {
    if grid.m_min < 1 || grid.m_max < grid.m_min {
        return Err(Error::InvalidParameter(format!(
            "m range [{}, {}] must be nonempty and start at 1 or above",
            grid.m_min, grid.m_max
        )));
    }
    if grid.rd_samples == 0 || !(grid.rd_min > 0.0) || !(grid.rd_max >= grid.rd_min) {
        return Err(Error::InvalidParameter(
            "R/d range must be positive and nonempty with at least one sample".into(),
        ));
    }
    let ratios = linspace(grid.rd_min, grid.rd_max, grid.rd_samples);
    let ms: Vec<u32> = (grid.m_min..=grid.m_max).collect();
    let rows: Result<Vec<Vec<RegionCell>>> = ms
        .par_iter()
        .map(|&m| {
            let params = ModelParams::new(m, n, 1.0)?;
            ratios
                .iter()
                .map(|&rd| {
                    let report = classify_equilibria(&params, rd)?;
                    Ok(RegionCell {
                        m,
                        r_over_d: rd,
                        region: report.region,
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchId {
    Zero,
    One,
    Interior,
    /// The interior branch where `x1*` lies outside `[0, 1]`.
    Exterior,
}

impl BranchId {
    pub fn code(self) -> &'static str {
        match self {
            BranchId::Zero => "zero",
            BranchId::One => "one",
            BranchId::Interior => "interior",
            BranchId::Exterior => "exterior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    #[serde(rename = "R")]
    pub reward: f64,
    pub x1_eq: f64,
    pub stability: Stability,
    pub branch_id: BranchId,
}

/// Three rows per sampled reward: the `x1 = 0`, `x1 = 1` and `x1*` branches.
pub fn bifurcation_branches(
    params: &ModelParams,
    reward_range: (f64, f64),
    samples: usize,
) -> Result<Vec<BranchPoint>> {
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "bifurcation table needs at least 2 samples".into(),
        ));
    }
    let (lo, hi) = reward_range;
    check_reward(lo)?;
    if !(hi > lo) || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "reward range ({lo}, {hi}) is empty"
        )));
    }
    let rows: Result<Vec<[BranchPoint; 3]>> = linspace(lo, hi, samples)
        .into_par_iter()
        .map(|reward| {
            let r = classify_equilibria(params, reward)?;
            let star = r.eq_interior.value;
            let interior_id = if (0.0..=1.0).contains(&star) {
                BranchId::Interior
            } else {
                BranchId::Exterior
            };
            Ok([
                BranchPoint {
                    reward,
                    x1_eq: 0.0,
                    stability: r.eq_zero.stability,
                    branch_id: BranchId::Zero,
                },
                BranchPoint {
                    reward,
                    x1_eq: 1.0,
                    stability: r.eq_one.stability,
                    branch_id: BranchId::One,
                },
                BranchPoint {
                    reward,
                    x1_eq: star,
                    stability: r.eq_interior.stability,
                    branch_id: interior_id,
                },
            ])
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// Which exchange-of-stability point to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TranscriticalPoint {
    /// `(x1, R) = (0, d/m)` in the chart `x = x1`, `mu = R - d/m`.
    AtZero,
    /// `(x1, R) = (1, d/(m+n))` in the chart `x = x0 = 1 - x1`, `mu = R - d/(m+n)`.
    AtOne,
}

/// Numerical check of the transcritical normal-form conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranscriticalCheck {
    pub point: TranscriticalPoint,
    pub f00: f64,
    pub dfdx: f64,
    pub dfdmu: f64,
    pub d2f_dxdmu: f64,
    pub d2f_dx2: f64,
    /// Closed-form `(d2f/dx dmu, d2f/dx2)` at the point.
    pub closed_form_expected: (f64, f64),
    pub passed: bool,
}

/// Tolerances for [`verify_transcritical_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscriticalTolerances {
    /// First-order quantities must be below this; second-order ones above it.
    pub atol: f64,
    /// Relative agreement of second partials with the closed forms.
    pub rtol: f64,
    /// Finite-difference step relative to the coordinate scale.
    pub rel_step: f64,
}

impl Default for TranscriticalTolerances {
    fn default() -> Self {
        Self {
            atol: 1e-9,
            rtol: 1e-4,
            rel_step: 1e-5,
        }
    }
}

pub fn verify_transcritical(
    params: &ModelParams,
    point: TranscriticalPoint,
) -> Result<TranscriticalCheck> {
    verify_transcritical_with(params, point, TranscriticalTolerances::default())
}

// Central differences with one Richardson extrapolation step.
fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

pub fn verify_transcritical_with(
    params: &ModelParams,
    point: TranscriticalPoint,
    tol: TranscriticalTolerances,
) -> Result<TranscriticalCheck> {
    let p = *params;
    let (m, n, d) = (p.mf(), p.nf(), p.d());
    let (mu0, expected) = match point {
        TranscriticalPoint::AtZero => (p.upper_threshold(), (1.0 / m, 2.0 * d * n / m.powi(3))),
        TranscriticalPoint::AtOne => (
            p.lower_threshold(),
            (-1.0 / (m + n), 2.0 * d * n / (m + n).powi(3)),
        ),
    };
    let f = move |x: f64, mu: f64| match point {
        TranscriticalPoint::AtZero => p.phi(mu + mu0, x),
        TranscriticalPoint::AtOne => -p.phi(mu + mu0, 1.0 - x),
    };

    let hx = tol.rel_step;
    let hmu = tol.rel_step * mu0.abs().max(1.0);
    for h in [hx, hmu] {
        // the Richardson half-step squared must stay a normal number
        if !(h / 2.0 * h / 2.0).is_normal() {
            return Err(Error::InvalidParameter(format!(
                "finite-difference step {h} underflows"
            )));
        }
    }

    let f00 = f(0.0, 0.0);
    let dfdx = richardson(|h| (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h), hx);
    let dfdmu = richardson(|k| (f(0.0, k) - f(0.0, -k)) / (2.0 * k), hmu);
    let d2f_dx2 = richardson(|h| (f(h, 0.0) - 2.0 * f00 + f(-h, 0.0)) / (h * h), hx);
    let d2f_dxdmu = richardson(
        |s| {
            let (h, k) = (s, s * hmu / hx);
            (f(h, k) - f(h, -k) - f(-h, k) + f(-h, -k)) / (4.0 * h * k)
        },
        hx,
    );

    let rel = |num: f64, exact: f64| (num - exact).abs() <= tol.rtol * exact.abs();
    let passed = f00.abs() < tol.atol
        && dfdx.abs() < tol.atol
        && dfdmu.abs() < tol.atol
        && d2f_dxdmu.abs() > tol.atol
        && d2f_dx2.abs() > tol.atol
        && rel(d2f_dxdmu, expected.0)
        && rel(d2f_dx2, expected.1);

    Ok(TranscriticalCheck {
        point,
        f00,
        dfdx,
        dfdmu,
        d2f_dxdmu,
        d2f_dx2,
        closed_form_expected: expected,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, prop_assume, proptest, ProptestConfig};
    use proptest::strategy::Strategy as Gen;

    fn base() -> ModelParams {
        ModelParams::new(2, 2, 100.0).unwrap()
    }

    #[test]
    fn interior_examples() {
        assert_eq!(interior_equilibrium(&base(), 40.0).unwrap(), (0.25, true));
        assert_eq!(interior_equilibrium(&base(), 50.0).unwrap(), (0.0, false));
        let (v, inside) = interior_equilibrium(&base(), 60.0).unwrap();
        assert_relative_eq!(v, -1.0 / 6.0, max_relative = 1e-14);
        assert!(!inside);
        assert!(interior_equilibrium(&base(), 0.0).is_err());
    }

    #[test]
    fn table_rows() {
        let r = classify_equilibria(&base(), 40.0).unwrap();
        assert_eq!(r.region, Region::B);
        assert_eq!(
            (
                r.eq_zero.stability,
                r.eq_one.stability,
                r.eq_interior.stability
            ),
            (Stability::Stable, Stability::Stable, Stability::Unstable)
        );
        assert_eq!(r.eq_interior.value, 0.25);
        assert_eq!(r.basin_zero, Some(Interval::new(0.0, true, 0.25, false)));
        assert_eq!(r.basin_one, Some(Interval::new(0.25, false, 1.0, true)));

        let r = classify_equilibria(&base(), 20.0).unwrap();
        assert_eq!(r.region, Region::C);
        assert_eq!(
            (
                r.eq_zero.stability,
                r.eq_one.stability,
                r.eq_interior.stability
            ),
            (Stability::Stable, Stability::Unstable, Stability::Stable)
        );

        let r = classify_equilibria(&base(), 60.0).unwrap();
        assert_eq!(r.region, Region::A);
        assert_eq!(
            (
                r.eq_zero.stability,
                r.eq_one.stability,
                r.eq_interior.stability
            ),
            (Stability::Unstable, Stability::Stable, Stability::Stable)
        );
        let basin = r.basin_one.unwrap();
        assert!(basin.contains(1e-9) && basin.contains(1.0) && !basin.contains(0.0));
        assert_eq!(r.basin_zero, None);
    }

    #[test]
    fn boundary_is_marginal() {
        let r = classify_equilibria(&base(), 50.0).unwrap();
        assert_eq!(r.region, Region::Boundary);
        assert_eq!(r.eq_zero.stability, Stability::Marginal);
        assert_eq!(r.eq_interior.stability, Stability::Marginal);
        assert_eq!(r.eq_one.stability, Stability::Stable);

        let r = classify_equilibria(&base(), 25.0 + 1e-8).unwrap();
        assert_eq!(r.region, Region::Boundary);
        assert_eq!(r.eq_one.stability, Stability::Marginal);
        assert_eq!(r.eq_zero.stability, Stability::Stable);
    }

    #[test]
    fn interval_display() {
        assert_eq!(
            Interval::new(0.0, true, 0.25, false).to_string(),
            "[0, 0.25)"
        );
        assert_eq!(
            Interval::new(0.25, false, 1.0, true).to_string(),
            "(0.25, 1]"
        );
    }

    #[test]
    fn region_map_cells() {
        let grid = RegionGrid {
            m_min: 2,
            m_max: 2,
            rd_min: 0.2,
            rd_max: 0.6,
            rd_samples: 3,
        };
        let cells = region_map(2, &grid).unwrap();
        let tags: Vec<_> = cells.iter().map(|c| (c.r_over_d, c.region)).collect();
        // oracle: direct inequality check against 1/m = 0.5 and 1/(m+n) = 0.25
        assert_eq!(
            tags,
            vec![(0.2, Region::C), (0.4, Region::B), (0.6, Region::A)]
        );
    }

    #[test]
    fn region_map_recovers_boundary_curves() {
        let grid = RegionGrid {
            m_min: 1,
            m_max: 8,
            rd_min: 0.01,
            rd_max: 1.2,
            rd_samples: 400,
        };
        let cells = region_map(2, &grid).unwrap();
        for m in 1..=8u32 {
            let row: Vec<_> = cells.iter().filter(|c| c.m == m).collect();
            for pair in row.windows(2) {
                if pair[0].region != pair[1].region {
                    let mid = 0.5 * (pair[0].r_over_d + pair[1].r_over_d);
                    let step = pair[1].r_over_d - pair[0].r_over_d;
                    let upper = 1.0 / m as f64;
                    let lower = 1.0 / (m as f64 + 2.0);
                    assert!(
                        (mid - upper).abs() <= step || (mid - lower).abs() <= step,
                        "transition at {mid} for m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn region_map_rejects_bad_grid() {
        let grid = RegionGrid {
            m_min: 0,
            m_max: 2,
            rd_min: 0.2,
            rd_max: 0.6,
            rd_samples: 3,
        };
        assert!(region_map(2, &grid).is_err());
        let grid = RegionGrid {
            m_min: 1,
            m_max: 2,
            rd_min: 0.2,
            rd_max: 0.6,
            rd_samples: 0,
        };
        assert!(region_map(2, &grid).is_err());
    }

    #[test]
    fn branches_cross_at_thresholds() {
        let rows = bifurcation_branches(&base(), (10.0, 70.0), 61).unwrap();
        assert_eq!(rows.len(), 183);
        let interior: Vec<_> = rows
            .iter()
            .filter(|r| matches!(r.branch_id, BranchId::Interior | BranchId::Exterior))
            .collect();
        let at = |reward: f64| interior.iter().find(|r| r.reward == reward).unwrap().x1_eq;
        assert_relative_eq!(at(25.0), 1.0, max_relative = 1e-15);
        assert_eq!(at(50.0), 0.0);
        for r in &interior {
            if r.x1_eq < 0.0 || r.x1_eq > 1.0 {
                assert_eq!(r.branch_id, BranchId::Exterior);
            }
        }
        // stability exchange across R = 50 on the zero branch
        let zero = |reward: f64| {
            rows.iter()
                .find(|r| r.reward == reward && r.branch_id == BranchId::Zero)
                .unwrap()
                .stability
        };
        assert_eq!(zero(49.0), Stability::Stable);
        assert_eq!(zero(51.0), Stability::Unstable);
        assert!(bifurcation_branches(&base(), (10.0, 70.0), 1).is_err());
    }

    #[test]
    fn transcritical_examples() {
        let c = verify_transcritical(&base(), TranscriticalPoint::AtZero).unwrap();
        assert!(c.passed, "{c:?}");
        assert_relative_eq!(c.d2f_dxdmu, 0.5, max_relative = 1e-6);
        assert_relative_eq!(c.d2f_dx2, 50.0, max_relative = 1e-6);
        assert!(c.f00.abs() < 1e-9 && c.dfdx.abs() < 1e-9 && c.dfdmu.abs() < 1e-9);

        let c = verify_transcritical(&base(), TranscriticalPoint::AtOne).unwrap();
        assert!(c.passed, "{c:?}");
        assert_relative_eq!(c.d2f_dxdmu, -0.25, max_relative = 1e-6);
        assert_relative_eq!(c.d2f_dx2, 6.25, max_relative = 1e-6);
    }

    #[test]
    fn transcritical_step_underflow() {
        let tol = TranscriticalTolerances {
            rel_step: 1e-200,
            ..Default::default()
        };
        assert!(matches!(
            verify_transcritical_with(&base(), TranscriticalPoint::AtZero, tol),
            Err(Error::InvalidParameter(_))
        ));
    }

    fn tuple() -> impl Gen<Value = ModelParams> {
        (1u32..=20, 1u32..=20, 1.0f64..1000.0)
            .prop_map(|(m, n, d)| ModelParams::new(m, n, d).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn interior_iff_between_thresholds(p in tuple(), ratio in 0.01f64..2.0) {
            let reward = ratio * p.upper_threshold();
            let (_, inside) = interior_equilibrium(&p, reward).unwrap();
            let between = p.lower_threshold() < reward && reward < p.upper_threshold();
            prop_assert_eq!(inside, between);
        }

        #[test]
        fn labels_scale_invariant(p in tuple(), ratio in 0.01f64..2.0, kappa in 0.01f64..100.0) {
            let reward = ratio * p.upper_threshold();
            let scaled = ModelParams::new(p.m(), p.n(), p.d() * kappa).unwrap();
            let a = classify_equilibria(&p, reward).unwrap();
            let b = classify_equilibria(&scaled, reward * kappa).unwrap();
            prop_assert_eq!(a.region, b.region);
            prop_assert_eq!(a.eq_zero.stability, b.eq_zero.stability);
            prop_assert_eq!(a.eq_one.stability, b.eq_one.stability);
            prop_assert_eq!(a.eq_interior.stability, b.eq_interior.stability);
        }

        #[test]
        fn interior_root_zeroes_field(p in tuple(), t in 0.0f64..1.0) {
            let reward = p.lower_threshold() + t * (p.upper_threshold() - p.lower_threshold());
            let (star, inside) = interior_equilibrium(&p, reward).unwrap();
            if inside {
                prop_assert!(p.phi(reward, star).abs() < 1e-10);
            }
        }

        #[test]
        fn labels_match_derivative_sign(p in tuple(), ratio in 0.01f64..2.0) {
            let reward = ratio * p.upper_threshold();
            let r = classify_equilibria(&p, reward).unwrap();
            prop_assume!(r.region != Region::Boundary);
            let check = |x: f64, s: Stability| {
                let dphi = p.phi_derivative(reward, x);
                match s {
                    Stability::Stable => dphi < 0.0,
                    Stability::Unstable => dphi > 0.0,
                    Stability::Marginal => false,
                }
            };
            prop_assert!(check(0.0, r.eq_zero.stability));
            prop_assert!(check(1.0, r.eq_one.stability));
            prop_assert!(check(r.eq_interior.value, r.eq_interior.stability));
        }

        #[test]
        fn regions_partition_plane(p in tuple(), ratio in 0.01f64..2.0) {
            let reward = ratio * p.upper_threshold();
            let r = classify_equilibria(&p, reward).unwrap();
            let rd = reward / p.d();
            let (m, n) = (p.m() as f64, p.n() as f64);
            let expected = [rd > 1.0 / m, rd > 1.0 / (m + n) && rd < 1.0 / m, rd < 1.0 / (m + n)];
            prop_assume!(r.region != Region::Boundary);
            prop_assert_eq!(expected.iter().filter(|&&b| b).count(), 1);
            let got = [r.region == Region::A, r.region == Region::B, r.region == Region::C];
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn transcritical_passes_for_random_tuples(p in tuple()) {
            for point in [TranscriticalPoint::AtZero, TranscriticalPoint::AtOne] {
                let c = verify_transcritical(&p, point).unwrap();
                prop_assert!(c.passed, "{:?} {:?}", p, c);
            }
        }
    }
}
