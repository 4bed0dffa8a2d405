//! CSV writers and readers for every table the library produces.
//!
//! Reals are written with 17 significant digits so values round-trip
//! bit-exactly. Lines starting with `#` are comments: provenance headers
//! and, for trajectories, `# event,<time>,<kind>` records.

use std::io::{Read, Write};

use crate::agents::{AggregatePoint, EmpiricalTrajectory};
use crate::controller::ControllerSpec;
use crate::dynamics::{Event, EventKind, SweepPoint, Trajectory};
use crate::equilibrium::{BranchId, BranchPoint, EquilibriumReport, Region, RegionCell, Stability};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

fn table<W: Write>(
    mut out: W,
    comments: &[String],
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<W> {
    write_comments(&mut out, comments)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Splits `#` comment lines from the CSV body.
fn split_comments<R: Read>(mut input: R) -> Result<(Vec<String>, String)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(c) => comments.push(c.trim_start().to_string()),
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    Ok((comments, body))
}

fn records(body: &str, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::InvalidParameter(format!(
            "unexpected CSV header {:?}, wanted {:?}",
            header.iter().collect::<Vec<_>>(),
            expected
        )));
    }
    rdr.records().map(|r| r.map_err(Error::from)).collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::InvalidParameter(format!("missing column {i}")))?;
    raw.parse()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse {raw:?} in column {i}")))
}

const BRANCH_HEADER: [&str; 4] = ["R", "x1_eq", "stability", "branch_id"];
const REGION_HEADER: [&str; 3] = ["m", "R_over_d", "region"];
const TRAJECTORY_HEADER: [&str; 3] = ["t", "x1", "R"];
const SWEEP_HEADER: [&str; 4] = ["leg", "R", "x1_settled", "settle_time"];
const RUNS_HEADER: [&str; 3] = ["t", "seed", "x1_empirical"];
const AGGREGATE_HEADER: [&str; 4] = ["t", "mean_x1", "std_x1", "n_seeds"];
const EQUILIBRIA_HEADER: [&str; 5] = ["R", "point", "x1", "stability", "region"];
const SPEC_HEADER: [&str; 7] = ["m", "n", "d", "R_star", "x_bar", "K", "eps"];

fn branch_id(code: &str) -> Result<BranchId> {
    match code {
        "zero" => Ok(BranchId::Zero),
        "one" => Ok(BranchId::One),
        "interior" => Ok(BranchId::Interior),
        "exterior" => Ok(BranchId::Exterior),
        other => Err(Error::InvalidParameter(format!("bad branch id {other:?}"))),
    }
}

fn stability(code: &str) -> Result<Stability> {
    Stability::from_code(code)
        .ok_or_else(|| Error::InvalidParameter(format!("bad stability {code:?}")))
}

fn region(code: &str) -> Result<Region> {
    Region::from_code(code).ok_or_else(|| Error::InvalidParameter(format!("bad region {code:?}")))
}

pub fn write_branches<W: Write>(out: W, comments: &[String], rows: &[BranchPoint]) -> Result<W> {
    let body = rows
        .iter()
        .map(|r| {
            vec![
                fmt_real(r.reward),
                fmt_real(r.x1_eq),
                r.stability.code().into(),
                r.branch_id.code().into(),
            ]
        })
        .collect();
    table(out, comments, &BRANCH_HEADER, body)
}

pub fn read_branches<R: Read>(input: R) -> Result<Vec<BranchPoint>> {
    let (_, body) = split_comments(input)?;
    records(&body, &BRANCH_HEADER)?
        .iter()
        .map(|rec| {
            Ok(BranchPoint {
                reward: field(rec, 0)?,
                x1_eq: field(rec, 1)?,
                stability: stability(&rec[2])?,
                branch_id: branch_id(&rec[3])?,
            })
        })
        .collect()
}

pub fn write_regions<W: Write>(out: W, comments: &[String], cells: &[RegionCell]) -> Result<W> {
    let body = cells
        .iter()
        .map(|c| {
            vec![
                c.m.to_string(),
                fmt_real(c.r_over_d),
                c.region.code().into(),
            ]
        })
        .collect();
    table(out, comments, &REGION_HEADER, body)
}

pub fn read_regions<R: Read>(input: R) -> Result<Vec<RegionCell>> {
    let (_, body) = split_comments(input)?;
    records(&body, &REGION_HEADER)?
        .iter()
        .map(|rec| {
            Ok(RegionCell {
                m: field(rec, 0)?,
                r_over_d: field(rec, 1)?,
                region: region(&rec[2])?,
            })
        })
        .collect()
}

/// Trajectory table; events follow the rows as `# event,<time>,<kind>` lines.
pub fn write_trajectory<W: Write>(out: W, comments: &[String], traj: &Trajectory) -> Result<W> {
    let body = traj
        .times()
        .iter()
        .zip(traj.states())
        .zip(traj.rewards())
        .map(|((t, x), r)| vec![fmt_real(*t), fmt_real(*x), fmt_real(*r)])
        .collect();
    let mut out = table(out, comments, &TRAJECTORY_HEADER, body)?;
    for e in traj.events() {
        writeln!(out, "# event,{},{}", fmt_real(e.time), e.kind.code())?;
    }
    Ok(out)
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory> {
    let (comments, body) = split_comments(input)?;
    let (mut times, mut states, mut rewards) = (vec![], vec![], vec![]);
    for rec in records(&body, &TRAJECTORY_HEADER)? {
        times.push(field(&rec, 0)?);
        states.push(field(&rec, 1)?);
        rewards.push(field(&rec, 2)?);
    }
    let events = comments
        .iter()
        .filter_map(|c| c.strip_prefix("event,"))
        .map(|rest| {
            let (time, kind) = rest
                .split_once(',')
                .ok_or_else(|| Error::InvalidParameter(format!("bad event line {rest:?}")))?;
            let time = time
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad event time {time:?}")))?;
            let kind = EventKind::from_code(kind)
                .ok_or_else(|| Error::InvalidParameter(format!("bad event kind {kind:?}")))?;
            Ok(Event { time, kind })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_parts(times, states, rewards, events)
}

pub fn write_sweep<W: Write>(out: W, comments: &[String], points: &[SweepPoint]) -> Result<W> {
    let body = points
        .iter()
        .map(|p| {
            vec![
                p.leg.to_string(),
                fmt_real(p.reward),
                fmt_real(p.x1_settled),
                fmt_real(p.settle_time),
            ]
        })
        .collect();
    table(out, comments, &SWEEP_HEADER, body)
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepPoint>> {
    let (_, body) = split_comments(input)?;
    records(&body, &SWEEP_HEADER)?
        .iter()
        .map(|rec| {
            Ok(SweepPoint {
                leg: field(rec, 0)?,
                reward: field(rec, 1)?,
                x1_settled: field(rec, 2)?,
                settle_time: field(rec, 3)?,
            })
        })
        .collect()
}

/// Long-format per-seed table: one row per (sample time, seed).
pub fn write_agent_runs<W: Write>(
    out: W,
    comments: &[String],
    runs: &[EmpiricalTrajectory],
) -> Result<W> {
    let body = runs
        .iter()
        .flat_map(|run| {
            run.times
                .iter()
                .zip(&run.x1)
                .map(move |(t, x)| vec![fmt_real(*t), run.seed.to_string(), fmt_real(*x)])
        })
        .collect();
    table(out, comments, &RUNS_HEADER, body)
}

pub fn read_agent_runs<R: Read>(input: R) -> Result<Vec<EmpiricalTrajectory>> {
    let (_, body) = split_comments(input)?;
    let mut runs: Vec<EmpiricalTrajectory> = Vec::new();
    for rec in records(&body, &RUNS_HEADER)? {
        let (t, seed, x): (f64, u64, f64) = (field(&rec, 0)?, field(&rec, 1)?, field(&rec, 2)?);
        match runs.last_mut() {
            Some(run) if run.seed == seed => {
                run.times.push(t);
                run.x1.push(x);
            }
            _ => runs.push(EmpiricalTrajectory {
                seed,
                times: vec![t],
                x1: vec![x],
            }),
        }
    }
    Ok(runs)
}

pub fn write_aggregate<W: Write>(
    out: W,
    comments: &[String],
    points: &[AggregatePoint],
) -> Result<W> {
    let body = points
        .iter()
        .map(|p| {
            vec![
                fmt_real(p.t),
                fmt_real(p.mean_x1),
                fmt_real(p.std_x1),
                p.n_seeds.to_string(),
            ]
        })
        .collect();
    table(out, comments, &AGGREGATE_HEADER, body)
}

pub fn read_aggregate<R: Read>(input: R) -> Result<Vec<AggregatePoint>> {
    let (_, body) = split_comments(input)?;
    records(&body, &AGGREGATE_HEADER)?
        .iter()
        .map(|rec| {
            Ok(AggregatePoint {
                t: field(rec, 0)?,
                mean_x1: field(rec, 1)?,
                std_x1: field(rec, 2)?,
                n_seeds: field(rec, 3)?,
            })
        })
        .collect()
}

/// One row of the equilibria table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumRow {
    pub reward: f64,
    pub point: BranchId,
    pub x1: f64,
    pub stability: Stability,
    pub region: Region,
}

impl EquilibriumRow {
    pub fn from_report(report: &EquilibriumReport) -> [EquilibriumRow; 3] {
        let star = report.eq_interior;
        let row = |point, x1, stability| EquilibriumRow {
            reward: report.reward,
            point,
            x1,
            stability,
            region: report.region,
        };
        [
            row(BranchId::Zero, 0.0, report.eq_zero.stability),
            row(BranchId::One, 1.0, report.eq_one.stability),
            row(
                if star.in_unit_interval {
                    BranchId::Interior
                } else {
                    BranchId::Exterior
                },
                star.value,
                star.stability,
            ),
        ]
    }
}

pub fn write_equilibria<W: Write>(
    out: W,
    comments: &[String],
    rows: &[EquilibriumRow],
) -> Result<W> {
    let body = rows
        .iter()
        .map(|r| {
            vec![
                fmt_real(r.reward),
                r.point.code().into(),
                fmt_real(r.x1),
                r.stability.code().into(),
                r.region.code().into(),
            ]
        })
        .collect();
    table(out, comments, &EQUILIBRIA_HEADER, body)
}

pub fn read_equilibria<R: Read>(input: R) -> Result<Vec<EquilibriumRow>> {
    let (_, body) = split_comments(input)?;
    records(&body, &EQUILIBRIA_HEADER)?
        .iter()
        .map(|rec| {
            Ok(EquilibriumRow {
                reward: field(rec, 0)?,
                point: branch_id(&rec[1])?,
                x1: field(rec, 2)?,
                stability: stability(&rec[3])?,
                region: region(&rec[4])?,
            })
        })
        .collect()
}

pub fn write_controller_spec<W: Write>(
    out: W,
    comments: &[String],
    spec: &ControllerSpec,
) -> Result<W> {
    let p = spec.params();
    let row = vec![
        p.m().to_string(),
        p.n().to_string(),
        fmt_real(p.d()),
        fmt_real(spec.r_star()),
        fmt_real(spec.x_bar()),
        fmt_real(spec.gain()),
        fmt_real(spec.eps()),
    ];
    table(out, comments, &SPEC_HEADER, vec![row])
}

pub fn read_controller_spec<R: Read>(input: R) -> Result<ControllerSpec> {
    let (_, body) = split_comments(input)?;
    let recs = records(&body, &SPEC_HEADER)?;
    let [rec] = recs.as_slice() else {
        return Err(Error::InvalidParameter(format!(
            "expected one controller row, found {}",
            recs.len()
        )));
    };
    let params = ModelParams::new(field(rec, 0)?, field(rec, 1)?, field(rec, 2)?)?;
    ControllerSpec::new(
        params,
        field(rec, 3)?,
        field(rec, 4)?,
        field(rec, 5)?,
        field(rec, 6)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, RewardPolicy};
    use crate::equilibrium::bifurcation_branches;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_real(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_real(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn trajectory_round_trip_with_events() {
        let p = ModelParams::new(2, 2, 100.0).unwrap();
        let spec = crate::controller::ControllerSpec::new(p, 40.0, 0.26, 56.8125, 0.005).unwrap();
        let traj = integrate(&p, &RewardPolicy::Feedback(spec), 0.1, 3.0, 0.01).unwrap();
        assert!(!traj.events().is_empty());
        let bytes = write_trajectory(Vec::new(), &["provenance".into()], &traj).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# provenance\nt,x1,R\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_trajectory(bytes.as_slice()).unwrap(), traj);
    }

    #[test]
    fn branch_round_trip() {
        let p = ModelParams::new(2, 2, 100.0).unwrap();
        let rows = bifurcation_branches(&p, (10.0, 70.0), 13).unwrap();
        let bytes = write_branches(Vec::new(), &[], &rows).unwrap();
        assert_eq!(read_branches(bytes.as_slice()).unwrap(), rows);
    }

    #[test]
    fn equilibria_and_spec_round_trip() {
        let p = ModelParams::new(2, 2, 100.0).unwrap();
        let rows: Vec<EquilibriumRow> = [20.0, 40.0, 60.0]
            .iter()
            .flat_map(|&r| {
                EquilibriumRow::from_report(
                    &crate::equilibrium::classify_equilibria(&p, r).unwrap(),
                )
            })
            .collect();
        let bytes = write_equilibria(Vec::new(), &[], &rows).unwrap();
        assert_eq!(read_equilibria(bytes.as_slice()).unwrap(), rows);

        let spec = ControllerSpec::new(p, 40.0, 0.26, 56.8125, 0.005).unwrap();
        let bytes = write_controller_spec(Vec::new(), &["spec".into()], &spec).unwrap();
        assert_eq!(read_controller_spec(bytes.as_slice()).unwrap(), spec);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_sweep("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn reals_round_trip_bitwise(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt_real(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn sweep_and_aggregate_round_trip(vals in proptest::collection::vec((0.0f64..100.0, 0.0f64..=1.0, 0.0f64..50.0), 1..20)) {
            let pts: Vec<SweepPoint> = vals.iter().enumerate()
                .map(|(i, &(r, x, t))| SweepPoint { leg: i, reward: r, x1_settled: x, settle_time: t })
                .collect();
            let bytes = write_sweep(Vec::new(), &["a\nb".into()], &pts).unwrap();
            prop_assert_eq!(read_sweep(bytes.as_slice()).unwrap(), pts);

            let agg: Vec<AggregatePoint> = vals.iter()
                .map(|&(t, x, s)| AggregatePoint { t, mean_x1: x, std_x1: s, n_seeds: 50 })
                .collect();
            let bytes = write_aggregate(Vec::new(), &[], &agg).unwrap();
            prop_assert_eq!(read_aggregate(bytes.as_slice()).unwrap(), agg);
        }
    }
}
