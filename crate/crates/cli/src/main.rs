use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use czreach::run::{self, RunOptions};
use czreach::{plot, sampling, CliError, Scenario};
use czreach_core::{lp, Method, ReachResult};

#[derive(Parser)]
#[command(name = "czreach", version, about = "Reachability and safety verification for ReLU neural feedback systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute reach sets, check unsafe sets, and write artifacts.
    Run {
        scenario: PathBuf,
        /// Directory for reach.json, report.json and optional plot.svg.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Coordinates to plot, e.g. x1,x2.
        #[arg(long)]
        plot: Option<String>,
        /// Number of simulated trajectories to check for containment.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// exact | over | nonlinear-exact-controller | nonlinear-over-controller
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        max_members: Option<usize>,
    },
    /// Check simulated trajectories against reach sets.
    Sample {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Existing reach.json; recomputed from the scenario when absent.
        #[arg(long)]
        reach: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        /// Where to write containment.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a reach.json file as SVG.
    Plot {
        reach: PathBuf,
        #[arg(long, default_value = "x1,x2")]
        dims: String,
        #[arg(long)]
        out: PathBuf,
        /// Scenario whose unsafe sets are drawn.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn load_scenario(path: &PathBuf, method: Option<&str>, max_members: Option<usize>) -> anyhow::Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(m) = method {
        let Some(m) = Method::parse(m) else {
            bail!(CliError::Usage(format!("unknown method `{m}`")));
        };
        s.set_method(m)?;
    }
    if let Some(k) = max_members {
        s.set_member_cap(k);
    }
    Ok(s)
}

fn apply_tolerance_env() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CZREACH_LP_TOL") {
        let tol: f64 = v.trim().parse().with_context(|| format!("CZREACH_LP_TOL=`{v}` is not a number"))?;
        if !(tol >= 0.0 && tol.is_finite()) {
            bail!("CZREACH_LP_TOL must be a finite nonnegative number");
        }
        lp::set_emptiness_tolerance(tol);
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    apply_tolerance_env()?;
    match cli.command {
        Command::Run { scenario, out, plot: plot_dims, samples, seed, method, max_members } => {
            let s = load_scenario(&scenario, method.as_deref(), max_members)?;
            let dims = plot_dims.map(|d| plot::parse_dims(&d, s.plant.dim())).transpose()?;
            if dims.is_some() && out.is_none() {
                bail!(CliError::Usage("--plot needs --out".into()));
            }
            let opts = RunOptions { out_dir: out.clone(), plot: dims, samples, seed };
            let outcome = run::run(&s, &opts)?;
            println!("scenario: {}", s.name);
            println!("method:   {}", s.method.as_str());
            println!("members:  {:?}", outcome.reach.member_counts());
            println!(
                "lp checks: {} ({} solved after box filter)",
                outcome.report.lp_count, outcome.report.lp_solved
            );
            for w in &outcome.report.witnesses {
                println!("  t={} member={} obstacle={} value={:.3e}", w.t, w.member, w.label, w.lp_value);
            }
            if let Some(c) = &outcome.containment {
                let line: Vec<String> = c.steps.iter().map(|st| format!("{}/{}", st.contained, st.total)).collect();
                println!("containment: {}", line.join(" "));
            }
            println!("verdict:  {}", serde_json::to_value(outcome.report.verdict)?.as_str().unwrap_or("?"));
            println!("runtime:  {:.1} ms", outcome.wall_ms);
            if let Some(dir) = out {
                println!("wrote:    {}", dir.display());
            }
            Ok(run::exit_code(outcome.report.verdict))
        }
        Command::Sample { scenario, samples, seed, reach, method, out } => {
            let s = load_scenario(&scenario, method.as_deref(), None)?;
            let result = match reach {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    ReachResult::from_json_str(&text).map_err(|e| CliError::core(&p, e))?
                }
                None => run::compute_reach(&s)?,
            };
            let tr = sampling::sample_trajectories(&s, samples, seed.unwrap_or(s.seed)).map_err(|e| CliError::core(&s.path, e))?;
            let rep = sampling::containment(&result, &tr).map_err(|e| CliError::core(&s.path, e))?;
            let json = serde_json::to_string_pretty(&rep)?;
            match out {
                Some(dir) => run::write_atomic(&dir.join(run::CONTAINMENT_FILE), format!("{json}\n").as_bytes())?,
                None => println!("{json}"),
            }
            Ok(if rep.all_contained() { 0 } else { 2 })
        }
        Command::Plot { reach, dims, out, scenario } => {
            let text = std::fs::read_to_string(&reach).with_context(|| format!("reading {}", reach.display()))?;
            let result = ReachResult::from_json_str(&text).map_err(|e| CliError::core(&reach, e))?;
            let unsafe_sets = match scenario {
                Some(p) => Scenario::load(&p)?.unsafe_sets,
                None => Vec::new(),
            };
            if result.dim() < 2 {
                bail!(CliError::Dimension(result.dim()));
            }
            let dims = plot::parse_dims(&dims, result.dim())?;
            let svg = plot::render_svg(&result, dims, &unsafe_sets, None)?;
            run::write_atomic(&out, svg.as_bytes())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
