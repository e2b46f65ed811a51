use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use trough_dmpc::dmpc::{run_closed_loop, ClosedLoopOptions, ControllerMode, SimulationLog};
use trough_dmpc::metrics::{PerformanceReport, RunSummary, DEFAULT_WARMUP};
use trough_dmpc::scenario::Scenario;
use trough_dmpc::selftest;

mod plot;

use plot::{line_chart, stacked_bars, Series};

#[derive(Parser)]
#[command(name = "trough-dmpc", version, about = "Clustered distributed MPC of a parabolic-trough field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dynamic,
    Fine,
    Coarse,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Seed of the clustering; defaults to the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the flow budget, l/s.
    #[arg(long)]
    q_total_lps: Option<f64>,
    /// Overrides the simulated duration, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Start-up window excluded from the tracking error, s.
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: f64,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one controller and write its log, summary and plots.
    Run {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, value_enum, default_value = "dynamic")]
        mode: Mode,
        /// Largest number of clusters in dynamic mode.
        #[arg(long, default_value_t = 5)]
        ncl_max: usize,
        /// Re-clustering period in dynamic mode, s.
        #[arg(long)]
        dt_cluster: Option<f64>,
    },
    /// Simulate several controllers and tabulate their performance.
    Compare {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Comma-separated list of `fine`, `coarse`, `dynamic` or `dynamic:<ncl_max>`.
        #[arg(long, value_delimiter = ',', default_value = "fine,dynamic,coarse")]
        modes: Vec<ModeSpec>,
        /// Largest number of clusters for a plain `dynamic` entry.
        #[arg(long, default_value_t = 5)]
        ncl_max: usize,
        /// Re-clustering period of the dynamic entries, s.
        #[arg(long)]
        dt_cluster: Option<f64>,
    },
    /// Check the numerical kernels against independent references.
    Selftest,
}

#[derive(Clone, Copy, Debug)]
enum ModeSpec {
    Fine,
    Coarse,
    Dynamic(Option<usize>),
}

impl FromStr for ModeSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "fine" => Ok(Self::Fine),
            "coarse" => Ok(Self::Coarse),
            "dynamic" => Ok(Self::Dynamic(None)),
            other => match other.strip_prefix("dynamic:") {
                Some(k) => {
                    k.parse().map(|k| Self::Dynamic(Some(k))).map_err(|e| format!("bad cluster count in {other}: {e}"))
                }
                None => Err(format!("unknown mode {other}")),
            },
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario> {
    let scenario = Scenario::load(&args.scenario).with_context(|| format!("loading {}", args.scenario.display()))?;
    if args.q_total_lps.is_none() && args.duration.is_none() {
        return Ok(scenario);
    }
    let mut config = scenario.config;
    if let Some(q) = args.q_total_lps {
        config.q_total = q * 1e-3;
    }
    if let Some(d) = args.duration {
        config.duration = d;
    }
    Ok(Scenario::new(config)?)
}

fn controller_mode(spec: ModeSpec, ncl_max: usize, dt_cluster: Option<f64>, scenario: &Scenario) -> ControllerMode {
    match spec {
        ModeSpec::Fine => ControllerMode::Fine,
        ModeSpec::Coarse => ControllerMode::Coarse,
        ModeSpec::Dynamic(k) => ControllerMode::Dynamic {
            n_cl_max: k.unwrap_or(ncl_max),
            dt_cluster: dt_cluster.unwrap_or(scenario.config.dt_cluster),
        },
    }
}

fn mode_name(spec: ModeSpec, ncl_max: usize) -> String {
    match spec {
        ModeSpec::Fine => "fine".into(),
        ModeSpec::Coarse => "coarse".into(),
        ModeSpec::Dynamic(k) => format!("dynamic{}", k.unwrap_or(ncl_max)),
    }
}

struct Outcome {
    log: SimulationLog,
    report: PerformanceReport,
    wall: f64,
}

fn simulate(scenario: &Scenario, mode: ControllerMode, seed: Option<u64>, warmup: f64) -> Result<Outcome> {
    let mut options = ClosedLoopOptions::new(mode, scenario);
    if let Some(s) = seed {
        options.seed = s;
    }
    let start = Instant::now();
    let log = run_closed_loop(scenario, &options)?;
    let wall = start.elapsed().as_secs_f64();
    let report = PerformanceReport::from_log(&log, warmup);
    Ok(Outcome { log, report, wall })
}

fn write_artifacts(dir: &Path, outcome: &Outcome, warmup: f64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let log = &outcome.log;
    log.write_csv(fs::File::create(dir.join("log.csv"))?)?;
    log.write_control_csv(fs::File::create(dir.join("control.csv"))?)?;
    fs::write(dir.join("summary.json"), RunSummary::new(log, warmup).to_json()?)?;

    let hours = |t: f64| t / 3600.0;
    let n = log.meta.n_loops;
    let mut temps: Vec<Series> = (0..n)
        .map(|i| Series {
            name: format!("T_out {}", i + 1),
            points: log.rows.iter().map(|r| (hours(r.t), r.t_out[i])).collect(),
            dashed: false,
        })
        .collect();
    temps.push(Series {
        name: "T_ref".into(),
        points: log.rows.iter().map(|r| (hours(r.t), r.t_ref)).collect(),
        dashed: true,
    });
    temps.push(Series {
        name: "T_in".into(),
        points: log.rows.iter().map(|r| (hours(r.t), r.t_in)).collect(),
        dashed: true,
    });
    fs::write(dir.join("temperatures.svg"), line_chart("Outlet temperatures", "time [h]", "°C", &temps))?;

    let mut flows: Vec<Series> = (0..n)
        .map(|i| Series {
            name: format!("q {}", i + 1),
            points: log.rows.iter().map(|r| (hours(r.t), r.q[i] * 1e3)).collect(),
            dashed: false,
        })
        .collect();
    flows.push(Series {
        name: "total / 10".into(),
        points: log.rows.iter().map(|r| (hours(r.t), r.q.iter().sum::<f64>() * 1e2)).collect(),
        dashed: true,
    });
    fs::write(dir.join("flows.svg"), line_chart("Loop flows", "time [h]", "l/s", &flows))?;

    let t = outcome.report.timing;
    fs::write(
        dir.join("timing.svg"),
        stacked_bars(
            "Mean solver time per control step",
            "s",
            std::slice::from_ref(&log.meta.mode),
            &[("NLP".into(), vec![t.nlp]), ("sensitivities".into(), vec![t.sens]), ("QP".into(), vec![t.qp])],
        ),
    )?;
    Ok(())
}

fn print_report(name: &str, o: &Outcome) {
    let r = &o.report;
    println!(
        "{name}: J_cum {:.4e}  e_bar {:.3} °C  mean cluster size {:.2}  iterations {:.2} (max {})  certified {}/{}  wall {:.1} s",
        r.j_cum, r.e_bar, r.mean_cluster_size, r.mean_iterations, r.max_iterations, r.certified_steps, r.control_steps, o.wall
    );
}

fn diagnose(name: &str, o: &Outcome) -> bool {
    if o.report.all_ok() {
        return true;
    }
    eprintln!(
        "{name}: {} failed, {} unconverged and {} uncertified control steps",
        o.report.failed_steps,
        o.report.control_steps - o.report.converged_steps,
        o.report.control_steps - o.report.certified_steps
    );
    if let Some(c) = o.log.control.iter().find(|c| c.failed || !c.converged || !(c.certified && c.local_certified)) {
        eprintln!("  first at t = {} s: {}", c.t, c.error.as_deref().unwrap_or("residuals above tolerance"));
    }
    false
}

fn run(common: ScenarioArgs, mode: Mode, ncl_max: usize, dt_cluster: Option<f64>) -> Result<bool> {
    let scenario = load(&common)?;
    let spec = match mode {
        Mode::Fine => ModeSpec::Fine,
        Mode::Coarse => ModeSpec::Coarse,
        Mode::Dynamic => ModeSpec::Dynamic(Some(ncl_max)),
    };
    let outcome =
        simulate(&scenario, controller_mode(spec, ncl_max, dt_cluster, &scenario), common.seed, common.warmup)?;
    write_artifacts(&common.out, &outcome, common.warmup)?;
    let name = mode_name(spec, ncl_max);
    print_report(&name, &outcome);
    Ok(diagnose(&name, &outcome))
}

fn compare(common: ScenarioArgs, modes: Vec<ModeSpec>, ncl_max: usize, dt_cluster: Option<f64>) -> Result<bool> {
    if modes.is_empty() {
        bail!("no modes given");
    }
    let scenario = load(&common)?;
    fs::create_dir_all(&common.out)?;
    let mut wtr = csv::Writer::from_path(common.out.join("report.csv"))?;
    wtr.write_record([
        "mode",
        "j_cum",
        "e_bar",
        "mean_cluster_size",
        "tau_nlp",
        "tau_sens",
        "tau_qp",
        "tau_sum",
        "mean_iterations",
        "max_iterations",
        "certified_steps",
        "control_steps",
        "wall_time",
    ])?;
    let mut ok = true;
    let mut names = Vec::new();
    let mut timing: [(String, Vec<f64>); 3] =
        [("NLP".into(), Vec::new()), ("sensitivities".into(), Vec::new()), ("QP".into(), Vec::new())];
    for spec in modes {
        let name = mode_name(spec, ncl_max);
        let outcome =
            simulate(&scenario, controller_mode(spec, ncl_max, dt_cluster, &scenario), common.seed, common.warmup)?;
        write_artifacts(&common.out.join(&name), &outcome, common.warmup)?;
        print_report(&name, &outcome);
        ok &= diagnose(&name, &outcome);
        let r = &outcome.report;
        wtr.write_record([
            name.clone(),
            r.j_cum.to_string(),
            r.e_bar.to_string(),
            r.mean_cluster_size.to_string(),
            r.timing.nlp.to_string(),
            r.timing.sens.to_string(),
            r.timing.qp.to_string(),
            r.timing.sum.to_string(),
            r.mean_iterations.to_string(),
            r.max_iterations.to_string(),
            r.certified_steps.to_string(),
            r.control_steps.to_string(),
            outcome.wall.to_string(),
        ])?;
        timing[0].1.push(r.timing.nlp);
        timing[1].1.push(r.timing.sens);
        timing[2].1.push(r.timing.qp);
        names.push(name);
    }
    wtr.flush()?;
    fs::write(common.out.join("timing.svg"), stacked_bars("Mean solver time per control step", "s", &names, &timing))?;
    Ok(ok)
}

fn run_selftest() -> bool {
    let mut ok = true;
    for c in selftest::run_all() {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, mode, ncl_max, dt_cluster } => run(common, mode, ncl_max, dt_cluster),
        Command::Compare { common, modes, ncl_max, dt_cluster } => compare(common, modes, ncl_max, dt_cluster),
        Command::Selftest => Ok(run_selftest()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_specs_parse() {
        assert!(matches!("fine".parse::<ModeSpec>(), Ok(ModeSpec::Fine)));
        assert!(matches!("dynamic".parse::<ModeSpec>(), Ok(ModeSpec::Dynamic(None))));
        assert!(matches!("dynamic:8".parse::<ModeSpec>(), Ok(ModeSpec::Dynamic(Some(8)))));
        assert!("dynamic:x".parse::<ModeSpec>().is_err());
        assert!("medium".parse::<ModeSpec>().is_err());
        assert_eq!(mode_name(ModeSpec::Dynamic(None), 5), "dynamic5");
    }
}
