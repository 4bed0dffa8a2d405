use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use minerdyn_core::agents::{aggregate, run_ensemble, sup_norm_gap};
use minerdyn_core::controller::{
    check_unstabilizable, eps_interval, gain_lower_bound, trade_off_metrics, validate,
};
use minerdyn_core::csv_io::{self, EquilibriumRow};
use minerdyn_core::dynamics::{
    hysteresis_sweep_with, integrate, reward_path, SweepOptions, DEFAULT_LEG_HORIZON,
};
use minerdyn_core::equilibrium::{
    bifurcation_branches, classify_equilibria, region_map as tag_regions, Interval,
};
use minerdyn_core::{ControllerSpec, RewardPolicy};
use sha2::{Digest, Sha256};

use crate::config::{
    resolve_controller, Direction, Scenario, DEFAULT_EPS_FRACTION, DEFAULT_GAIN_MARGIN,
};
use crate::error::CliError;
use crate::{AgentsArgs, Common, ValidateArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn provenance(command: &str, digest: &str) -> Vec<String> {
    vec![
        format!("minerdyn {VERSION} {command}"),
        format!("config sha256:{digest}"),
    ]
}

fn load(c: &Common) -> Result<Scenario, CliError> {
    Scenario::load(&c.config, &c.set)
}

fn emit(out: Option<&Path>, bytes: Vec<u8>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => Ok(io::stdout().lock().write_all(&bytes)?),
    }
}

/// `dir/name.csv` -> `dir/name_<tag>.csv`.
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{tag}"),
    };
    path.with_file_name(name)
}

fn basin(b: Option<Interval>) -> String {
    b.map_or_else(|| "none".to_string(), |i| i.to_string())
}

fn nominal_reward(s: &Scenario) -> f64 {
    match (&s.config.reward.constant, &s.config.reward.controller) {
        (Some(r), _) => *r,
        (None, Some(c)) => c.r_star,
        (None, None) => unreachable!("checked at load"),
    }
}

pub fn equilibria(c: &Common) -> Result<(), CliError> {
    let s = load(c)?;
    let reward = nominal_reward(&s);
    let report = classify_equilibria(&s.params, reward)?;
    let p = &s.params;
    println!("m = {}, n = {}, d = {}, R = {reward}", p.m(), p.n(), p.d());
    println!("region {}", report.region);
    println!(
        "x1 = 0    {}  basin {}",
        report.eq_zero.stability,
        basin(report.basin_zero)
    );
    println!(
        "x1 = 1    {}  basin {}",
        report.eq_one.stability,
        basin(report.basin_one)
    );
    let star = report.eq_interior;
    let place = if star.in_unit_interval {
        ""
    } else {
        "  (outside [0, 1])"
    };
    println!("x1* = {}  {}{place}", star.value, star.stability);
    if let Some(out) = &c.out {
        let rows = EquilibriumRow::from_report(&report);
        let bytes =
            csv_io::write_equilibria(Vec::new(), &provenance("equilibria", &s.digest), &rows)?;
        emit(Some(out), bytes)?;
    }
    Ok(())
}

pub fn simulate(c: &Common) -> Result<(), CliError> {
    let s = load(c)?;
    let policy = s.policy()?;
    let run = &s.config.run;
    let traj = integrate(&s.params, &policy, run.x1_init, run.t_end, run.dt)?;
    let bytes = csv_io::write_trajectory(Vec::new(), &provenance("simulate", &s.digest), &traj)?;
    emit(c.out.as_deref(), bytes)?;
    eprintln!(
        "final x1 = {:.9e}",
        traj.final_state().unwrap_or(run.x1_init)
    );
    if let RewardPolicy::Feedback(spec) = &policy {
        let m = trade_off_metrics(&traj, spec, run.tol, run.tol);
        let show = |t: Option<f64>| t.map_or_else(|| "not reached".to_string(), |t| t.to_string());
        eprintln!("state settle time = {}", show(m.state_settle_time));
        eprintln!("reward recovery time = {}", show(m.reward_recovery_time));
    }
    Ok(())
}

pub fn bifurcate(c: &Common) -> Result<(), CliError> {
    let s = load(c)?;
    let b = s.bifurcation();
    let rows = bifurcation_branches(&s.params, (b.r_min, b.r_max), b.samples)?;
    let bytes = csv_io::write_branches(Vec::new(), &provenance("bifurcate", &s.digest), &rows)?;
    emit(c.out.as_deref(), bytes)
}

pub fn region_map(c: &Common) -> Result<(), CliError> {
    let s = load(c)?;
    let cells = tag_regions(s.params.n(), &s.region_grid())?;
    let bytes = csv_io::write_regions(Vec::new(), &provenance("region-map", &s.digest), &cells)?;
    emit(c.out.as_deref(), bytes)
}

pub fn sweep(c: &Common) -> Result<(), CliError> {
    let s = load(c)?;
    let sw = s.sweep()?;
    let (lo, hi) = (sw.r_from.min(sw.r_to), sw.r_from.max(sw.r_to));
    let opts = SweepOptions {
        settle_tol: s.config.run.tol,
        leg_horizon: sw.leg_horizon.unwrap_or(DEFAULT_LEG_HORIZON),
        dt: s.config.run.dt,
    };
    let leg = |dir: Direction| -> Result<Vec<u8>, CliError> {
        let (path, seed, name) = match dir {
            Direction::Up => (
                reward_path(lo, hi, sw.step)?,
                sw.seed.unwrap_or(0.0),
                "sweep up",
            ),
            _ => (
                reward_path(hi, lo, sw.step)?,
                sw.seed.unwrap_or(1.0),
                "sweep down",
            ),
        };
        let points = hysteresis_sweep_with(&s.params, &path, seed, opts)?;
        Ok(csv_io::write_sweep(
            Vec::new(),
            &provenance(name, &s.digest),
            &points,
        )?)
    };
    match sw.direction {
        Direction::Both => {
            let out = c.out.as_deref().ok_or_else(|| {
                CliError::Config(
                    "sweep.direction = \"both\" writes two files and needs --out".into(),
                )
            })?;
            let (up, down) = (leg(Direction::Up)?, leg(Direction::Down)?);
            emit(Some(&sibling(out, "up")), up)?;
            emit(Some(&sibling(out, "down")), down)
        }
        dir => emit(c.out.as_deref(), leg(dir)?),
    }
}

fn print_spec_checks(spec: &ControllerSpec) -> Result<bool, CliError> {
    let report = validate(spec);
    print!("{report}");
    Ok(report.valid)
}

pub fn controller_synth(c: &Common) -> Result<(), CliError> {
    let s = load(c)?;
    let sec = s.controller_section()?;
    let p = &s.params;
    if let Some(r) = check_unstabilizable(p, sec.r_star)? {
        println!(
            "R* = {} is below d/(m+n) = {}: slope at x1 = 1 is {} > 0, unstabilizable",
            r.r_star,
            p.lower_threshold(),
            r.boundary_derivative
        );
        return Err(CliError::Infeasible(format!(
            "R* = {} cannot stabilize x1 = 1",
            sec.r_star
        )));
    }
    let k_min = gain_lower_bound(p, sec.r_star, sec.x_bar)?;
    let gain = sec
        .gain
        .unwrap_or(k_min * (1.0 + sec.gain_margin.unwrap_or(DEFAULT_GAIN_MARGIN)));
    println!("K_min = {k_min}");
    println!("K = {gain}");
    let interval = eps_interval(p, sec.r_star, sec.x_bar, gain)?;
    println!("eps interval = {interval}");
    let mut resolved = sec.clone();
    resolved.gain = Some(gain);
    if resolved.eps.is_none() {
        resolved.eps_fraction = Some(sec.eps_fraction.unwrap_or(DEFAULT_EPS_FRACTION));
    }
    let spec = resolve_controller(p, &resolved)?;
    println!("eps = {}", spec.eps());
    let (alpha, beta) = spec.zeta_roots()?;
    println!("zeta roots: alpha = {alpha}, beta = {beta}");
    println!(
        "x1* = {}, switch at x1 = {}",
        spec.x1_star(),
        spec.switch_threshold()
    );
    if !print_spec_checks(&spec)? {
        return Err(CliError::Infeasible(
            "synthesized spec fails validation".into(),
        ));
    }
    if let Some(out) = &c.out {
        let bytes = csv_io::write_controller_spec(
            Vec::new(),
            &provenance("controller synth", &s.digest),
            &spec,
        )?;
        emit(Some(out), bytes)?;
    }
    Ok(())
}

pub fn controller_validate(v: &ValidateArgs) -> Result<(), CliError> {
    let spec = match (&v.spec, &v.config) {
        (Some(path), _) => {
            let bytes = fs::read(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            eprintln!("spec sha256:{}", hex::encode(Sha256::digest(&bytes)));
            csv_io::read_controller_spec(bytes.as_slice())
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(config)) => {
            let s = Scenario::load(config, &v.set)?;
            resolve_controller(&s.params, s.controller_section()?)?
        }
        (None, None) => return Err(CliError::Config("give --config or --spec".into())),
    };
    println!(
        "R* = {}, x_bar = {}, K = {}, eps = {}",
        spec.r_star(),
        spec.x_bar(),
        spec.gain(),
        spec.eps()
    );
    if print_spec_checks(&spec)? {
        Ok(())
    } else {
        Err(CliError::Infeasible(
            "spec violates the design conditions".into(),
        ))
    }
}

pub fn agents(a: &AgentsArgs) -> Result<(), CliError> {
    let s = load(&a.common)?;
    let ag = s.agents()?;
    let policy = s.policy()?;
    let count = a.runs.unwrap_or(ag.seeds);
    if count == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..count as u64).map(|i| a.seed.wrapping_add(i)).collect();
    let x1_init = ag.x1_init.unwrap_or(s.config.run.x1_init);
    let horizon = ag.horizon.unwrap_or(s.config.run.t_end);
    let runs = run_ensemble(
        &s.params,
        &policy,
        ag.n_strategic,
        x1_init,
        ag.revision_rate,
        &seeds,
        horizon,
        ag.sample_dt,
    )?;
    let agg = aggregate(&runs)?;
    let header = {
        let mut h = provenance("agents", &s.digest);
        h.push(format!("seeds {}..={}", seeds[0], seeds[seeds.len() - 1]));
        h
    };
    let bytes = csv_io::write_aggregate(Vec::new(), &header, &agg)?;
    emit(a.common.out.as_deref(), bytes)?;
    if let Some(out) = &a.common.out {
        let bytes = csv_io::write_agent_runs(Vec::new(), &header, &runs)?;
        emit(Some(&sibling(out, "runs")), bytes)?;
    }
    if ag.revision_rate.is_none() {
        eprintln!(
            "sup |mean - ode| = {}",
            sup_norm_gap(&s.params, &policy, x1_init, &agg)?
        );
    }
    Ok(())
}
