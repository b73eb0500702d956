use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use platoon_core::engine::{run, Convergence};
use platoon_core::export::{metrics_csv, state_charts, trace_csv};
use platoon_core::graph::{
    generate, is_rs_robust_with, max_robustness_with, parse_edge_list, to_edge_list,
    CertifierConfig, GraphKind, Verdict,
};
use platoon_core::presets::{self, PRESETS};
use platoon_core::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "platoon",
    version,
    about = "Resilient platoon simulator and (r,s)-robustness certifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file or a bundled preset.
    Run {
        /// Scenario file (TOML).
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        path: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Override the number of steps.
        #[arg(long)]
        horizon: Option<usize>,
        /// Directory for trace.csv, metrics.csv, positions.svg and velocities.svg.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify (r,s)-robustness of an edge-list graph.
    CheckRobustness {
        file: PathBuf,
        r: Option<usize>,
        s: Option<usize>,
        /// Report every certified pair instead of one query.
        #[arg(long, conflicts_with_all = ["r", "s"])]
        max: bool,
        #[command(flatten)]
        certifier: CertifierArgs,
    },
    /// Write a generated graph as an edge list.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
        /// Output file; stdout when omitted.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// List or print the bundled scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Args)]
struct CertifierArgs {
    /// Largest node count to enumerate.
    #[arg(long, default_value_t = platoon_core::graph::DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum GenerateKind {
    Complete {
        #[arg(long)]
        n: usize,
    },
    /// The 7f-node partition-attack topology.
    Counterexample {
        #[arg(long)]
        f: usize,
    },
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            path,
            preset,
            horizon,
            out,
        } => run_scenario(path.as_deref(), preset.as_deref(), horizon, out.as_deref()),
        Command::CheckRobustness {
            file,
            r,
            s,
            max,
            certifier,
        } => check_robustness(&file, r, s, max, &certifier),
        Command::Generate { kind, out } => {
            let kind = match kind {
                GenerateKind::Complete { n } => GraphKind::Complete { n },
                GenerateKind::Counterexample { f } => GraphKind::Counterexample { f },
                GenerateKind::Random { n, density, seed } => GraphKind::Random { n, density, seed },
            };
            let text = to_edge_list(&generate(&kind)?);
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for p in PRESETS {
                        println!("{:<18} {}", p.name, p.summary);
                    }
                }
                PresetAction::Show { name } => match presets::find(&name) {
                    Some(p) => print!("{}", p.text),
                    None => bail!("no preset named `{name}` (see `platoon presets list`)"),
                },
            }
            Ok(())
        }
    }
}

fn load_scenario(path: Option<&Path>, preset: Option<&str>) -> Result<Scenario> {
    match (path, preset) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Scenario::from_toml(&text).with_context(|| p.display().to_string())
        }
        (None, Some(name)) => Ok(presets::load(name)?),
        (None, None) => bail!("give a scenario file or --preset"),
    }
}

fn run_scenario(
    path: Option<&Path>,
    preset: Option<&str>,
    horizon: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let mut scenario = load_scenario(path, preset)?;
    if let Some(k) = horizon {
        scenario.horizon = k;
    }
    let start = Instant::now();
    let result = run(&scenario).with_context(|| format!("running {}", scenario.name))?;
    let elapsed = start.elapsed();
    let m = &result.metrics;

    println!("scenario: {}", scenario.name);
    println!("steps: {}", scenario.horizon);
    match m.convergence {
        Convergence::Converged { step } => println!("verdict: converged at step {step}"),
        Convergence::NotConverged => println!("verdict: not converged"),
        Convergence::NoVerdict => println!("verdict: none (zero horizon)"),
    }
    println!("groups: {}", m.groups);
    println!(
        "final Dx: {:e}, Dv: {:e}",
        m.dx.last().copied().unwrap_or(0.0),
        m.dv.last().copied().unwrap_or(0.0)
    );
    match m.rate {
        Some(r) => println!(
            "rate: slope {:.4e} per step, R^2 {:.4} over steps {}..={}",
            r.slope, r.fit, r.start, r.end
        ),
        None => println!("rate: no tail window"),
    }
    println!("elapsed: {elapsed:.2?}");

    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let malicious = scenario.malicious_set();
        let (positions, velocities) = state_charts(&result.trace, &|i| malicious.contains(&i));
        for (name, body) in [
            ("trace.csv", trace_csv(&result.trace)),
            ("metrics.csv", metrics_csv(m)),
            ("positions.svg", positions),
            ("velocities.svg", velocities),
        ] {
            let p = dir.join(name);
            fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        }
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn check_robustness(
    file: &Path,
    r: Option<usize>,
    s: Option<usize>,
    max: bool,
    args: &CertifierArgs,
) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let g = parse_edge_list(&text).with_context(|| file.display().to_string())?;
    let config = CertifierConfig {
        cap: args.cap,
        threads: args.threads,
    };
    if max {
        println!("{}", max_robustness_with(&g, &config)?);
        return Ok(());
    }
    let (Some(r), Some(s)) = (r, s) else {
        bail!("give both r and s, or --max");
    };
    match is_rs_robust_with(&g, r, s, &config)? {
        Verdict::Certified => println!("certified: ({r},{s})-robust"),
        Verdict::Refuted(w) => println!("refuted: not ({r},{s})-robust; witness {w}"),
    }
    Ok(())
}
