//! The subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use apids::apsymbol::XiBox;
use apids::freqgeom::check_conditions;
use apids::gauge::{chain_supports, eliminate, GaugeSettings};
use apids::oracle::{ids_oracle, propagation_norm, PropagationSettings};
use apids::spectra::{
    convergence_study, ids_pipeline, ConvergenceRow, LeadingKernel, SpectralProblem, SpectralTable,
};
use apids::zones::{
    build_cutoff, classify, convexity_margin, default_step, microhyperbolicity_margin, EnergyShell,
    ZoneDecomposition, ZoneParams,
};
use apids::{parallel_enabled, Execution};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{reals, Cell, Csv, OutDir};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Conditions,
    Zones,
    Gauge,
    Ids,
    Oracle,
    Converge,
    Propagate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Conditions => "conditions",
            Command::Zones => "zones",
            Command::Gauge => "gauge",
            Command::Ids => "ids",
            Command::Oracle => "oracle",
            Command::Converge => "converge",
            Command::Propagate => "propagate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads of the global pool, if fixed.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn execution(&self) -> Execution {
        if self.threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Serialize)]
struct TauParams {
    tau: f64,
    params: Option<ZoneParams>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: Command,
    version: &'static str,
    parallel_enabled: bool,
    threads: usize,
    execution: String,
    sumset_k: Option<usize>,
    config: &'a RunConfig,
    zone_params: Vec<TauParams>,
    outputs: Vec<String>,
}

/// Runs `cmd` and writes its outputs and `manifest.json` under `opts.out`.
/// Returns the names of the files written.
pub fn run(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<String>, CliError> {
    let exec = opts.execution();
    let mut out = OutDir::create(&opts.out)?;
    match cmd {
        Command::Conditions => conditions(cfg, &mut out)?,
        Command::Zones => zones(cfg, exec, &mut out)?,
        Command::Gauge => gauge(cfg, exec, &mut out)?,
        Command::Ids => ids(cfg, exec, &mut out)?,
        Command::Oracle => oracle(cfg, exec, &mut out)?,
        Command::Converge => converge(cfg, exec, &mut out)?,
        Command::Propagate => propagate(cfg, exec, &mut out)?,
    }
    let problem = cfg.problem(cfg.operator.eps, cfg.operator.h).ok();
    let zone_params = cfg
        .operator
        .tau
        .iter()
        .map(|&tau| {
            let p = problem
                .as_ref()
                .ok_or_else(|| CliError::Parse("operator could not be built".into()))
                .and_then(|pr| cfg.zone_params(pr, tau));
            match p {
                Ok(p) => TauParams {
                    tau,
                    params: Some(p),
                    error: None,
                },
                Err(e) => TauParams {
                    tau,
                    params: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut outputs = out.written().to_vec();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        command: cmd,
        version: env!("CARGO_PKG_VERSION"),
        parallel_enabled: parallel_enabled(),
        threads: rayon::current_num_threads(),
        execution: format!("{exec:?}").to_lowercase(),
        sumset_k: problem.as_ref().map(|p| p.sumset_k),
        config: cfg,
        zone_params,
        outputs,
    };
    out.write_json("manifest.json", &manifest)?;
    Ok(out.written().to_vec())
}

fn conditions(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let module = cfg.module()?;
    let reports = cfg
        .conditions
        .checks
        .iter()
        .map(|c| check_conditions(&module, c.k, c.omega, c.l, cfg.thresholds()))
        .collect::<Result<Vec<_>, _>>()?;
    out.write_json("conditions.json", &reports)?;
    let text: Vec<String> = reports.iter().map(|r| r.summary()).collect();
    out.write_text("conditions.txt", &text.join("\n"))
}

fn decomposition(
    cfg: &RunConfig,
    problem: &SpectralProblem,
    params: &ZoneParams,
    tau: f64,
    exec: Execution,
) -> Result<ZoneDecomposition, CliError> {
    let step = cfg.zones.grid_step.unwrap_or_else(|| default_step(params));
    let shell = EnergyShell::new(&problem.base, tau, params.shell_width(), step)?;
    let sums = problem.sumset()?;
    Ok(classify(&problem.base, &shell, &sums, params, exec)?)
}

#[derive(Serialize)]
struct ComponentReport {
    id: usize,
    level: usize,
    basis: Vec<Vec<i64>>,
    witnesses: Vec<Vec<i64>>,
    cells: usize,
    diameter: f64,
    gamma: f64,
    transverse_margin: f64,
}

#[derive(Serialize)]
struct ZoneReport {
    tau: f64,
    shell_width: f64,
    grid_step: f64,
    cells: usize,
    levels: BTreeMap<usize, usize>,
    critical_cells: usize,
    microhyperbolicity_margin: f64,
    convexity_margin: f64,
    components: Vec<ComponentReport>,
}

fn zones(cfg: &RunConfig, exec: Execution, out: &mut OutDir) -> Result<(), CliError> {
    let problem = cfg.problem(cfg.operator.eps, cfg.operator.h)?;
    let mut csv = String::new();
    let mut reports = Vec::new();
    for &tau in &cfg.operator.tau {
        let params = cfg.zone_params(&problem, tau)?;
        let z = decomposition(cfg, &problem, &params, tau, exec)?;
        let table = z.to_csv();
        for (i, line) in table.lines().enumerate() {
            if i == 0 {
                if csv.is_empty() {
                    csv.push_str(&format!("tau,{line}\n"));
                }
            } else {
                csv.push_str(&format!("{},{line}\n", apids::report::fmt_num(tau)));
            }
        }
        reports.push(ZoneReport {
            tau,
            shell_width: z.shell.width,
            grid_step: z.shell.step,
            cells: z.cells.len(),
            levels: z.level_histogram(),
            critical_cells: z.critical_cells().count(),
            microhyperbolicity_margin: microhyperbolicity_margin(&problem.base, tau, &z.shell),
            convexity_margin: convexity_margin(&problem.base, tau, &z.shell),
            components: z
                .components
                .iter()
                .map(|c| ComponentReport {
                    id: c.id,
                    level: c.level,
                    basis: c.subspace.basis_coords(),
                    witnesses: c.witnesses.clone(),
                    cells: c.cells.len(),
                    diameter: c.diameter,
                    gamma: c.gamma,
                    transverse_margin: c.transverse_margin,
                })
                .collect(),
        });
    }
    out.write_text("zones.csv", &csv)?;
    out.write_json("zones.json", &reports)
}

#[derive(Serialize)]
struct ChainReport {
    tau: f64,
    label: String,
    basis: Vec<Vec<i64>>,
    max_order: usize,
    ad_order: usize,
    target: f64,
    remainder_bound: f64,
    eps_sequence: Vec<f64>,
    support_violations: Vec<Vec<i64>>,
    warnings: Vec<String>,
}

fn gauge(cfg: &RunConfig, exec: Execution, out: &mut OutDir) -> Result<(), CliError> {
    let problem = cfg.problem(cfg.operator.eps, cfg.operator.h)?;
    let sums = problem.sumset()?;
    let settings = GaugeSettings {
        max_steps: cfg.gauge.steps,
        ..cfg.pipeline_options(exec).gauge
    };
    let mut csv = Csv::new(&[
        "tau",
        "zone",
        "step",
        "gamma",
        "eps_k",
        "eliminated",
        "remainder_proxy",
        "residual_sup",
    ]);
    let mut reports = Vec::new();
    for &tau in &cfg.operator.tau {
        let params = cfg.zone_params(&problem, tau)?;
        let z = decomposition(cfg, &problem, &params, tau, exec)?;
        let supports = chain_supports(&z);
        let chains = exec.try_map(&supports, |s| {
            eliminate(
                &problem.base,
                &problem.perturbation,
                problem.eps,
                &sums,
                s,
                &params,
                &settings,
            )
        })?;
        for chain in &chains {
            for s in chain.summaries() {
                csv.row(&[
                    Cell::Num(tau),
                    Cell::Text(s.zone),
                    Cell::Int(s.step as i64),
                    Cell::Num(s.gamma),
                    Cell::Num(s.eps_k),
                    Cell::Int(s.eliminated as i64),
                    Cell::Num(s.remainder_proxy),
                    Cell::Num(s.residual_sup),
                ]);
            }
            reports.push(ChainReport {
                tau,
                label: chain.label.clone(),
                basis: chain.subspace.basis_coords(),
                max_order: chain.max_order,
                ad_order: chain.ad_order,
                target: chain.target,
                remainder_bound: chain.remainder_bound,
                eps_sequence: chain.eps_sequence(),
                support_violations: chain.support_violations(&sums),
                warnings: chain
                    .steps
                    .iter()
                    .flat_map(|s| s.warnings.clone())
                    .collect(),
            });
        }
    }
    out.write_text("gauge.csv", &csv.finish())?;
    out.write_json("gauge.json", &reports)
}

#[derive(Serialize)]
struct IdsReport {
    tau: f64,
    value: f64,
    contributions: Vec<apids::spectra::ZoneContribution>,
    chains: usize,
    notes: Vec<String>,
}

fn ids(cfg: &RunConfig, exec: Execution, out: &mut OutDir) -> Result<(), CliError> {
    let (eps, h) = (cfg.operator.eps, cfg.operator.h);
    let problem = cfg.problem(eps, h)?;
    let opts = cfg.pipeline_options(exec);
    let steps = cfg.gauge.steps;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut spectral = Csv::new(&["tau", "x", "value", "mean", "oscillating"]);
    let want_spectral = cfg.spectral.as_ref().filter(|_| problem.dim() == 1);
    for &tau in &cfg.operator.tau {
        let params = cfg.zone_params(&problem, tau)?;
        let r = ids_pipeline(&problem, tau, &params, steps, &opts)?;
        rows.push(ConvergenceRow {
            h,
            eps,
            tau,
            steps,
            n_pipeline: r.value,
            n_oracle: f64::NAN,
            abs_err: f64::NAN,
            rel_err: f64::NAN,
            contributions: r.contributions.clone(),
            flag: None,
        });
        reports.push(IdsReport {
            tau,
            value: r.value,
            contributions: r.contributions,
            chains: r.chains.len(),
            notes: r.notes,
        });
        if let Some(sp) = want_spectral {
            let kernel = LeadingKernel::new(&problem, tau, &params, steps, &opts)?;
            for &x in &sp.x {
                let v = kernel.value(x);
                spectral.row(&[
                    Cell::Num(tau),
                    Cell::Num(x),
                    Cell::Num(v.value),
                    Cell::Num(v.mean),
                    Cell::Num(v.oscillating),
                ]);
            }
        }
    }
    let table = SpectralTable {
        dim: problem.dim(),
        rows,
        slopes: Vec::new(),
    };
    out.write_text("ids.csv", &table.to_csv())?;
    out.write_json("ids.json", &reports)?;
    if want_spectral.is_some() {
        out.write_text("spectral.csv", &spectral.finish())?;
    }
    Ok(())
}

fn oracle(cfg: &RunConfig, exec: Execution, out: &mut OutDir) -> Result<(), CliError> {
    let (eps, h) = (cfg.operator.eps, cfg.operator.h);
    let op = cfg.problem(eps, h)?.periodic()?;
    let settings = cfg.oracle_settings(exec);
    let mut csv = Csv::new(&[
        "h",
        "epsilon",
        "tau",
        "n_oracle",
        "radius",
        "basis_size",
        "k_points",
    ]);
    for &tau in &cfg.operator.tau {
        let r = ids_oracle(&op, tau, &settings)?;
        csv.row(&[
            Cell::Num(h),
            Cell::Num(eps),
            Cell::Num(tau),
            Cell::Num(r.value),
            Cell::Num(r.radius),
            Cell::Int(r.basis_size as i64),
            Cell::Int(r.k_points as i64),
        ]);
    }
    out.write_text("oracle.csv", &csv.finish())
}

#[derive(Serialize)]
struct SlopeReport {
    tau: f64,
    slopes: Vec<apids::spectra::SlopeRecord>,
}

fn converge(cfg: &RunConfig, exec: Execution, out: &mut OutDir) -> Result<(), CliError> {
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| CliError::Parse("the converge command needs a [study] table".into()))?;
    let opts = cfg.pipeline_options(exec);
    let oracle = cfg.oracle_settings(exec);
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut dim = cfg.dimension;
    for &tau in &cfg.operator.tau {
        let build = |h: f64, k: usize| -> apids::Result<(SpectralProblem, ZoneParams)> {
            let eps = study.eps_scale * h.powf(study.eps_power);
            let problem = cfg.problem(eps, h)?;
            let params = cfg.zone_params_for(&problem, tau, k)?;
            Ok((problem, params))
        };
        let t = convergence_study(build, tau, &study.h, &study.steps, &opts, &oracle, exec)?;
        dim = t.dim;
        rows.extend(t.rows);
        slopes.push(SlopeReport {
            tau,
            slopes: t.slopes,
        });
    }
    let table = SpectralTable {
        dim,
        rows,
        slopes: Vec::new(),
    };
    out.write_text("converge.csv", &table.to_csv())?;
    out.write_json("slopes.json", &slopes)
}

#[derive(Serialize)]
struct PropagateReport {
    pair: usize,
    separation: f64,
    t_max: f64,
    norm: f64,
    worst_time: f64,
    worst_k: Vec<f64>,
}

fn propagate(cfg: &RunConfig, exec: Execution, out: &mut OutDir) -> Result<(), CliError> {
    let pc = cfg
        .propagate
        .as_ref()
        .ok_or_else(|| CliError::Parse("the propagate command needs a [propagate] table".into()))?;
    let (eps, h) = (cfg.operator.eps, cfg.operator.h);
    let problem = cfg.problem(eps, h)?;
    let tau = cfg.operator.tau.first().copied().unwrap_or(0.0);
    let varsigma = cfg.zone_params(&problem, tau)?.varsigma;
    let op = problem.periodic()?;
    let settings = PropagationSettings {
        k_samples: pc.k_samples,
        radius: pc.radius,
        exec,
    };
    let mut csv = Csv::new(&[
        "pair",
        "separation",
        "t_max",
        "norm",
        "worst_time",
        "worst_k",
    ]);
    let mut reports = Vec::new();
    for (i, pair) in pc.pairs.iter().enumerate() {
        let q1 = build_cutoff(
            XiBox::new(pair.q1_lo.clone(), pair.q1_hi.clone()),
            pair.ell,
            h,
            varsigma,
        )?;
        let q2 = build_cutoff(
            XiBox::new(pair.q2_lo.clone(), pair.q2_hi.clone()),
            pair.ell,
            h,
            varsigma,
        )?;
        let rec = propagation_norm(&op, |x| q1.value(x), |x| q2.value(x), pc.t_max, &settings)?;
        let separation = q1.separation(&q2);
        csv.row(&[
            Cell::Int(i as i64),
            Cell::Num(separation),
            Cell::Num(rec.t_max),
            Cell::Num(rec.norm),
            Cell::Num(rec.worst_time),
            Cell::Text(reals(&rec.worst_k)),
        ]);
        reports.push(PropagateReport {
            pair: i,
            separation,
            t_max: rec.t_max,
            norm: rec.norm,
            worst_time: rec.worst_time,
            worst_k: rec.worst_k,
        });
    }
    out.write_text("propagate.csv", &csv.finish())?;
    out.write_json("propagate.json", &reports)
}
