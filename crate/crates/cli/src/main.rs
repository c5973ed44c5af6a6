use std::path::PathBuf;
use std::process::ExitCode;

use chiralmag::floquet::Chirality;
use chiralmag::scenario::{self, Overrides, ScenarioConfig, ScenarioId, SweepAxis};
use chiralmag::Error;
use clap::{Args, Parser, Subcommand};

/// Chiral state transfer in a Floquet-driven magnon loop.
#[derive(Parser)]
#[command(name = "chiralmag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSVs and manifest.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario once per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// phi, kappa, delta or omega_m; defaults to the config's `sweep.axis`.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        /// Values to sweep; defaults to the config's `sweep.values`.
        #[arg(long, num_args = 0.., value_delimiter = ',', allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
    },
    /// Print the derived drive quantities of a scenario.
    Info {
        #[arg(long, value_parser = parse_id)]
        scenario: Option<ScenarioId>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List the scenario ids.
    List,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_parser = parse_id)]
    scenario: Option<ScenarioId>,
    /// TOML config merged over the preset, or a run manifest to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drive frequency over g (cavity variant: magnon frequency over g_am).
    #[arg(long)]
    omega_ratio: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Per-mode truncation for every state, e.g. 4,4,4.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_chirality)]
    chirality: Option<Chirality>,
}

fn parse_id(s: &str) -> Result<ScenarioId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_chirality(s: &str) -> Result<Chirality, String> {
    Chirality::parse(s).map_err(|e| e.to_string())
}

fn load(
    scenario: Option<ScenarioId>,
    config: Option<&PathBuf>,
) -> chiralmag::Result<ScenarioConfig> {
    match config {
        Some(path) => {
            let cfg = ScenarioConfig::load(path, scenario)?;
            match scenario {
                Some(id) if id != cfg.scenario => Err(Error::Config {
                    field: "scenario".into(),
                    message: format!(
                        "--scenario {id} disagrees with the config's {}",
                        cfg.scenario
                    ),
                }),
                _ => Ok(cfg),
            }
        }
        None => Ok(ScenarioConfig::preset(
            scenario.unwrap_or(ScenarioId::Custom),
        )),
    }
}

impl Common {
    fn config(&self) -> chiralmag::Result<ScenarioConfig> {
        let mut cfg = load(self.scenario, self.config.as_ref())?;
        cfg.apply_overrides(&Overrides {
            out: self.out.clone(),
            omega_ratio: self.omega_ratio,
            kappa: self.kappa,
            delta: self.delta,
            dims: self.dims.clone(),
            chirality: self.chirality,
        });
        Ok(cfg)
    }
}

fn report(m: &scenario::RunManifest) {
    println!("{} -> {}", m.config.scenario, m.config.output.dir.display());
    for f in &m.outputs {
        println!("  wrote {f}");
    }
    for (label, metrics) in &m.metrics {
        for (k, v) in metrics {
            println!("  {label}.{k} = {v:.6}");
        }
    }
    println!("  wall time {:.2} s", m.wall_time_s);
}

fn execute(cli: Cli) -> chiralmag::Result<()> {
    match cli.command {
        Command::Run { common } => report(&scenario::execute(&common.config()?)?),
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let cfg = common.config()?;
            let axis = axis.or(cfg.sweep.axis).ok_or_else(|| Error::Config {
                field: "sweep.axis".into(),
                message: "give --axis or set it in the config".into(),
            })?;
            let values = values.unwrap_or_else(|| cfg.sweep.values.clone());
            if values.is_empty() {
                println!("no sweep values; nothing to do");
                return Ok(());
            }
            let r = scenario::sweep(&cfg, axis, &values)?;
            for m in &r.manifests {
                report(m);
            }
            for s in &r.summaries {
                println!("summary {}", cfg.output.dir.join(s).display());
            }
        }
        Command::Info { scenario, config } => {
            let cfg = load(scenario, config.as_ref())?;
            println!("scenario = {}", cfg.scenario);
            for (k, v) in scenario::info(&cfg)?.entries() {
                println!("{k} = {v:.12}");
            }
        }
        Command::List => {
            for id in ScenarioId::ALL {
                println!("{id}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Integration { .. } => 3,
                ref e if e.is_config() => 2,
                _ => 1,
            })
        }
    }
}
