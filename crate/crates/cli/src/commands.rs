use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use log::info;
use serde::Serialize;

use hetflow::config::{OptimizationMode, ResolvedChain, ScenarioConfig, Variant};
use hetflow::io::{
    av_rows, norm_rows, profile_rows, sweep_rows, trajectory_rows, vehicle_rows, write_csv,
    write_json,
};
use hetflow::linear::{analyze_coeffs, string_stability_coefficient, StabilityReport};
use hetflow::model::{sample_params, IdmParams, VehicleChain};
use hetflow::optimize::{
    experiment_30, sub_seed, tune_chain, CellResult, ExperimentReport, Fictitious, Placement,
    Window,
};
use hetflow::ring::{ring_matrix, ring_spectrum};
use hetflow::sim::{self, nonlinear_stability_sweep, norm_profile, SimError};

use crate::error::CliError;
use crate::GlobalArgs;

/// Validated scenario with command-line overrides applied.
pub struct Context {
    pub cfg: ScenarioConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    pub fn load(args: &GlobalArgs) -> Result<Self, CliError> {
        let path = args
            .config
            .as_deref()
            .ok_or_else(|| CliError::config("--config <FILE> is required"))?;
        let mut cfg = ScenarioConfig::load(path)?;
        if let Some(dt) = args.dt {
            cfg.dt = Some(dt);
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        let out = args
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self {
            seed: cfg.seed,
            cfg,
            out,
        })
    }

    fn chain(&self) -> Result<ResolvedChain, CliError> {
        let chain = self.cfg.resolve_chain(self.seed)?;
        if chain.is_empty() {
            return Err(CliError::config("the chain has no vehicles"));
        }
        Ok(chain)
    }

    fn vehicle_chain(&self, command: &str) -> Result<VehicleChain, CliError> {
        match self.chain()? {
            ResolvedChain::Vehicles(c) => Ok(c),
            ResolvedChain::Coeffs(_) => Err(CliError::config(format!(
                "{command} needs IDM parameters, not linear coefficients"
            ))),
        }
    }
}

fn emit<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), CliError> {
    let path = dir.join(name);
    write_csv(&path, rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn emit_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    write_json(&path, value)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Consecutive pairs followed by the whole chain.
fn default_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (1..=m).map(|n| (n - 1, n)).collect();
    if m > 1 {
        pairs.push((0, m));
    }
    pairs
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn analyze(ctx: &Context) -> Result<(), CliError> {
    if ctx.cfg.chain.is_none() {
        let Some(contour) = &ctx.cfg.analysis.contour else {
            return Err(CliError::config(
                "analyze needs a [chain] or an [analysis.contour] section",
            ));
        };
        return emit(&ctx.out, "contour.csv", &contour.grid()?);
    }
    let chain = ctx.chain()?;
    let coeffs = chain.coeffs()?;
    let m = coeffs.len();
    let pairs: Vec<(usize, usize)> = if ctx.cfg.analysis.pairs.is_empty() {
        default_pairs(m)
    } else {
        ctx.cfg
            .analysis
            .pairs
            .iter()
            .map(|&[l, n]| (l, n))
            .collect()
    };
    if let Some(&(l, n)) = pairs.iter().find(|&&(_, n)| n > m) {
        return Err(CliError::config(format!(
            "pair ({l}, {n}) exceeds the {m}-vehicle chain"
        )));
    }
    let mut report = analyze_coeffs(&coeffs, &pairs)?;
    if let ResolvedChain::Vehicles(c) = &chain {
        report.v_eq = Some(c.v_eq);
    }
    print_report(&report);

    if let ResolvedChain::Vehicles(c) = &chain {
        emit(
            &ctx.out,
            "chain.csv",
            &vehicle_rows(&c.vehicles, Some(c.v_eq))?,
        )?;
    }
    emit(&ctx.out, "vehicles.csv", &report.vehicles)?;
    emit(&ctx.out, "pairs.csv", &report.pairs)?;
    emit_json(&ctx.out, "report.json", &report)?;
    if let Some(contour) = &ctx.cfg.analysis.contour {
        emit(&ctx.out, "contour.csv", &contour.grid()?)?;
    }
    Ok(())
}

fn print_report(report: &StabilityReport) {
    let v_eq = report
        .v_eq
        .map_or("-".to_string(), |v| format!("{v:.4} m/s"));
    println!(
        "chain: {} vehicles, v_eq {v_eq}, {} strictly string unstable (S < 0)",
        report.vehicles.len(),
        report.strictly_unstable_count()
    );
    println!("vehicle          S      gain   peak_w  strict  monotone  mimo");
    for v in &report.vehicles {
        println!(
            "{:>7} {:>10.5} {:>9.4} {:>8.4} {:>7} {:>9} {:>9.4}",
            v.vehicle,
            v.s,
            v.hinf,
            v.peak_freq,
            yes_no(v.l2_strict),
            yes_no(v.linf_monotone),
            v.mimo_hinf
        );
    }
    for p in &report.pairs {
        println!(
            "pair {} -> {}: gain {:.4} at w = {:.4} rad/s, weakly string {}",
            p.from,
            p.to,
            p.gamma,
            p.peak_freq,
            if p.is_weakly_stable(1e-9) {
                "stable"
            } else {
                "unstable"
            }
        );
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let chain = ctx.vehicle_chain("simulate")?;
    let spec = &ctx.cfg.simulation;
    let dt = ctx.cfg.dt();
    if !ctx.cfg.disturbance.is_empty() || spec.amplitudes.is_empty() {
        let traj = sim::simulate(&chain, &ctx.cfg.disturbance, spec.duration, dt)?;
        let profile = norm_profile(&traj);
        println!(
            "simulated {} vehicles for {} s (dt {dt} s), {} speed clamps",
            chain.len(),
            spec.duration,
            traj.clamp_events.len()
        );
        print_profile(&profile);
        if spec.write_trajectory {
            emit(
                &ctx.out,
                "trajectory.csv",
                &trajectory_rows(&traj, spec.trajectory_stride),
            )?;
        }
        emit(&ctx.out, "norms.csv", &norm_rows(&profile))?;
        emit(&ctx.out, "clamp_events.csv", &traj.clamp_events)?;
    }
    if !spec.amplitudes.is_empty() {
        let window = (spec.step_window[0], spec.step_window[1]);
        let results =
            nonlinear_stability_sweep(&chain, &spec.amplitudes, window, spec.duration, dt);
        let mut ok = Vec::new();
        let mut first_err: Option<SimError> = None;
        for (amp, r) in spec.amplitudes.iter().zip(results) {
            match r {
                Ok(r) => {
                    println!(
                        "amplitude {amp}: L2 {}, {} speed clamps",
                        if r.grows {
                            "grows along the chain"
                        } else {
                            "non-increasing"
                        },
                        r.clamp_events
                    );
                    ok.push(r);
                }
                Err(e) => {
                    println!("amplitude {amp}: {e}");
                    first_err.get_or_insert(e);
                }
            }
        }
        emit(&ctx.out, "sweep.csv", &sweep_rows(&ok))?;
        if let Some(e) = first_err {
            return Err(e.into());
        }
    }
    Ok(())
}

fn print_profile(profile: &hetflow::sim::NormProfile) {
    let n = profile.len();
    if n == 0 {
        return;
    }
    println!(
        "L2: vehicle 1 {:.6}, vehicle {n} {:.6}; Linf: vehicle 1 {:.6}, vehicle {n} {:.6}",
        profile.l2[0],
        profile.l2[n - 1],
        profile.linf[0],
        profile.linf[n - 1]
    );
    match profile.l2_growth_onset(1e-9) {
        None => println!("L2 profile non-increasing along the chain"),
        Some(k) => println!("L2 profile first grows at vehicle {k}"),
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlacementArg {
    Upstream,
    Downstream,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Objective evaluations per automated vehicle.
    #[arg(long)]
    budget: Option<usize>,
    /// Weight on the window gain.
    #[arg(long)]
    alpha: Option<f64>,
    /// Vehicles upstream and downstream of the automated vehicle, as `I,J`.
    #[arg(long, value_parser = parse_window)]
    window: Option<Window>,
    /// Upper bound on the time headway T (s).
    #[arg(long)]
    t_up: Option<f64>,
    /// Worst-case vehicle added to every window, as `a,b,T,s0`.
    #[arg(long, value_parser = parse_params)]
    fictitious: Option<IdmParams>,
    /// Side of the window that receives the worst-case vehicle.
    #[arg(long, value_enum, default_value = "upstream", requires = "fictitious")]
    placement: PlacementArg,
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!(
            "expected {n} comma-separated values, got {}",
            v.len()
        ));
    }
    Ok(v)
}

fn parse_window(s: &str) -> Result<Window, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [upstream, downstream] => Ok(Window {
            upstream,
            downstream,
        }),
        _ => Err("expected I,J".into()),
    }
}

fn parse_params(s: &str) -> Result<IdmParams, String> {
    let v = parse_numbers(s, 4)?;
    let p = IdmParams::new(v[0], v[1], v[2], v[3]);
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

pub fn optimize(mut ctx: Context, args: &OptimizeArgs) -> Result<(), CliError> {
    let opt = ctx.cfg.optimization.get_or_insert_with(Default::default);
    if let Some(b) = args.budget {
        opt.sa.budget = b;
    }
    if let Some(a) = args.alpha {
        opt.alpha = a;
    }
    if let Some(w) = args.window {
        opt.window = w;
    }
    if args.t_up.is_some() {
        opt.t_up = args.t_up;
    }
    if let Some(params) = args.fictitious {
        let placement = match args.placement {
            PlacementArg::Upstream => Placement::Upstream,
            PlacementArg::Downstream => Placement::Downstream,
        };
        opt.fictitious.push(Fictitious { params, placement });
    }
    ctx.cfg.validate()?;
    let opt = ctx.cfg.optimization.as_ref().expect("inserted above");
    let runs: Vec<(Option<&Variant>, PathBuf)> = if opt.variants.is_empty() {
        vec![(None, ctx.out.clone())]
    } else {
        opt.variants
            .iter()
            .map(|v| (Some(v), ctx.out.join(&v.name)))
            .collect()
    };
    let mut failure = None;
    for (variant, dir) in runs {
        if let Some(v) = variant {
            println!("variant {}", v.name);
        }
        let result = match opt.mode {
            OptimizationMode::Experiment => run_experiment(&ctx, variant, &dir),
            OptimizationMode::Chain => run_chain(&ctx, variant, &dir),
        };
        if let Err(e) = result {
            eprintln!("error: {e}");
            failure.get_or_insert(e);
        }
    }
    failure.map_or(Ok(()), Err)
}

fn write_experiment(
    report: &ExperimentReport,
    fractions: &[f64],
    dir: &Path,
) -> Result<(), CliError> {
    emit(dir, "experiment.csv", &report.rows())?;
    emit(dir, "profiles.csv", &profile_rows(report, fractions))?;
    emit(dir, "param_shifts.csv", &report.param_shifts())?;
    emit(dir, "av_results.csv", &av_rows(report))?;
    Ok(())
}

fn cell_errors(report: &ExperimentReport) -> Result<(), CliError> {
    let errors = report.errors();
    for (seed, fraction, e) in &errors {
        println!("seed {seed}, fraction {fraction}: {e}");
    }
    match errors.first() {
        None => Ok(()),
        Some((_, _, e)) if e.starts_with("collision") => Err(CliError::Collision(format!(
            "{} of {} cells failed",
            errors.len(),
            report.cells.len()
        ))),
        Some(_) => Err(CliError::Compute(format!(
            "{} of {} cells failed",
            errors.len(),
            report.cells.len()
        ))),
    }
}

fn run_experiment(ctx: &Context, variant: Option<&Variant>, dir: &Path) -> Result<(), CliError> {
    let exp = ctx.cfg.experiment(variant)?;
    let opt = ctx.cfg.optimization.as_ref().expect("present");
    let seeds = ctx.cfg.seeds();
    info!(
        "experiment over {} seeds and fractions {:?}",
        seeds.len(),
        opt.fractions
    );
    let report = experiment_30(&exp, &seeds, &opt.fractions)?;
    let mut fractions: Vec<f64> = Vec::new();
    for c in &report.cells {
        if !fractions.contains(&c.fraction) {
            fractions.push(c.fraction);
        }
    }
    fractions.sort_by(f64::total_cmp);
    for &f in &fractions {
        let profile = report.mean_profile(f);
        if let Some((mean, std)) = profile.last() {
            println!(
                "fraction {f}: final L2 {mean:.6} +- {std:.6} over {} seeds (vehicle 1: {:.6})",
                report
                    .cells
                    .iter()
                    .filter(|c| c.fraction == f && c.profile.is_some())
                    .count(),
                profile[0].0
            );
        }
    }
    write_experiment(&report, &fractions, dir)?;
    cell_errors(&report)
}

fn run_chain(ctx: &Context, variant: Option<&Variant>, dir: &Path) -> Result<(), CliError> {
    let exp = ctx.cfg.experiment(variant)?;
    let mut chain = ctx.vehicle_chain("optimize")?;
    let automated = chain.automated_indices();
    if automated.is_empty() {
        return Err(CliError::config(
            "the chain has no automated vehicles to tune",
        ));
    }
    let outcomes = tune_chain(&mut chain, &exp, ctx.seed)?;
    for o in &outcomes {
        let gamma_hat = o.gamma_hat.map_or("-".to_string(), |g| format!("{g:.6}"));
        println!(
            "vehicle {}: gain {gamma_hat} -> {:.6}, a {:.4} -> {:.4}, b {:.4} -> {:.4}, T {:.4} -> {:.4}",
            o.vehicle,
            o.gamma_star,
            o.theta_hat.accel,
            o.theta_star.accel,
            o.theta_hat.decel,
            o.theta_star.decel,
            o.theta_hat.headway,
            o.theta_star.headway
        );
    }
    let profile = if ctx.cfg.disturbance.is_empty() {
        None
    } else {
        let traj = sim::simulate(
            &chain,
            &ctx.cfg.disturbance,
            ctx.cfg.simulation.duration,
            ctx.cfg.dt(),
        )?;
        let profile = norm_profile(&traj);
        print_profile(&profile);
        Some(profile)
    };
    let fraction = automated.len() as f64 / chain.len() as f64;
    let report = ExperimentReport {
        cells: vec![CellResult {
            seed: ctx.seed,
            fraction,
            automated: automated.iter().map(|k| k + 1).collect(),
            outcomes,
            profile,
            error: None,
        }],
    };
    emit(
        dir,
        "tuned_chain.csv",
        &vehicle_rows(&chain.vehicles, Some(chain.v_eq))?,
    )?;
    if report.cells[0].profile.is_some() {
        emit(
            dir,
            "norms.csv",
            &norm_rows(report.cells[0].profile.as_ref().unwrap()),
        )?;
    }
    emit(dir, "param_shifts.csv", &report.param_shifts())?;
    emit(dir, "av_results.csv", &av_rows(&report))?;
    Ok(())
}

pub fn ring(ctx: &Context) -> Result<(), CliError> {
    let coeffs = ctx.chain()?.coeffs()?;
    let sys = ring_matrix(&coeffs)?;
    let spectrum = ring_spectrum(&sys, ctx.cfg.ring.tol)?;
    let ring_stable = spectrum.is_stable();
    let open_strict = coeffs
        .iter()
        .all(|&c| string_stability_coefficient(c) >= 0.0);
    println!(
        "ring of {} vehicles: {} eigenvalues, {} structural, max real part {:.6e}",
        coeffs.len(),
        spectrum.eigenvalues.len(),
        spectrum.structural.len(),
        spectrum.max_real_part()
    );
    println!(
        "verdict: {} ring, string-{} open chain",
        if ring_stable { "stable" } else { "unstable" },
        if open_strict { "stable" } else { "unstable" }
    );
    emit(&ctx.out, "eigenvalues.csv", &spectrum.rows())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Vehicles to draw; defaults to the configured chain, else 30.
    #[arg(long)]
    count: Option<usize>,
    /// Equilibrium speed as a share of v_max, used to report S.
    #[arg(long)]
    v_eq_ratio: Option<f64>,
}

pub fn sample(ctx: &Context, args: &SampleArgs) -> Result<(), CliError> {
    if let Some(r) = args.v_eq_ratio {
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::config("--v-eq-ratio must lie in (0, 1)"));
        }
    }
    let chain = match (&ctx.cfg.chain, args.count) {
        (Some(_), None) => ctx.vehicle_chain("sample")?,
        (_, count) => {
            let count = count.unwrap_or(30);
            if count == 0 {
                return Err(CliError::config("--count must be at least 1"));
            }
            let params = sample_params(&ctx.cfg.distribution, sub_seed(ctx.seed, 0), count)?;
            let v_eq = args.v_eq_ratio.unwrap_or(1.0 / 3.0) * ctx.cfg.distribution.v_max;
            VehicleChain::from_params(params, v_eq)
        }
    };
    let v_eq = args
        .v_eq_ratio
        .map(|r| r * chain.vehicles[0].params.v_max)
        .unwrap_or(chain.v_eq);
    let rows = vehicle_rows(&chain.vehicles, Some(v_eq))?;
    let m = rows.len() as f64;
    let mean = |f: fn(&hetflow::io::VehicleRow) -> f64| rows.iter().map(f).sum::<f64>() / m;
    println!(
        "{} vehicles: mean a {:.4}, b {:.4}, T {:.4}, s0 {:.4}",
        rows.len(),
        mean(|r| r.a),
        mean(|r| r.b),
        mean(|r| r.t),
        mean(|r| r.s0)
    );
    let unstable = rows.iter().filter(|r| r.s.is_some_and(|s| s < 0.0)).count();
    println!("{unstable} strictly string unstable at v_eq {v_eq:.4} m/s");
    emit(&ctx.out, "samples.csv", &rows)?;
    Ok(())
}
