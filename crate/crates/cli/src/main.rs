use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use quietvoyage_core::interface_hub::{parse_scenario, Engine, HubError};
use quietvoyage_service::{default_port, serve, AppState};

/// Noise-aware voyage planning.
#[derive(Debug, Parser)]
#[command(name = "quietvoyage", version)]
struct Cli {
    /// Base seed; planner, GA and wildlife streams use seed, seed+1, seed+2.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for result files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the synthetic TL field into the scenario's cache.
    PrecomputeTl { config: PathBuf },
    /// Fit the RBF surrogate to the cached field.
    FitRbf { config: PathBuf },
    /// Plan the route and optimize leg speeds without replaying.
    Plan { config: PathBuf },
    /// Replay the optimized voyage; with --baseline also the AIS voyage.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        baseline: bool,
    },
    /// Replay both voyages and write the comparison table.
    Compare { config: PathBuf },
    /// Serve the HTTP API with the scenario preloaded as `default`.
    Serve {
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
}

fn load(config: &Path, seed: Option<u64>) -> anyhow::Result<Engine> {
    let mut cfg = parse_scenario(config)?;
    if let Some(s) = seed {
        cfg.reseed(s);
    }
    Ok(Engine::load(cfg)?)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out = &cli.out_dir;
    match cli.command {
        Command::PrecomputeTl { config } => {
            let engine = load(&config, cli.seed)?;
            let field = engine.precompute_tl()?;
            println!("{} samples -> {}", field.samples.len(), engine.field_dir().display());
        }
        Command::FitRbf { config } => {
            let engine = load(&config, cli.seed)?;
            let rbf = engine.fit_rbf()?;
            println!("{} centres -> {}", rbf.centers().len(), engine.rbf_dir().display());
        }
        Command::Plan { config } => {
            let engine = load(&config, cli.seed)?;
            let tl = engine.tl_model()?;
            let mammals = engine.mammals()?;
            let plan = engine.plan(tl.as_ref(), &mammals)?;
            let opt = engine.optimize(tl.as_ref(), &mammals, &plan.route, None)?;
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            write(&out.join("plan_route.csv"), &plan.route.to_csv())?;
            write(&out.join("plan_profile.csv"), &opt.profile.to_csv())?;
            let mut batches = String::from("batch,cost\n");
            for (i, c) in plan.batch_costs.iter().enumerate() {
                batches.push_str(&format!("{i},{c}\n"));
            }
            write(&out.join("plan_batches.csv"), &batches)?;
            write(&out.join("scenario.json"), &engine.scenario.to_json())?;
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2} dB"));
            println!(
                "route {:.2} NM, planned J_s {} (constant speed {})",
                plan.route.length_nm(),
                fmt(opt.objective_db),
                fmt(opt.constant_objective_db)
            );
        }
        Command::Simulate { config, baseline } => {
            let engine = load(&config, cli.seed)?;
            let tl = engine.tl_model()?;
            let bundle = engine.run(tl.as_ref(), Some(baseline), None)?;
            bundle.write(out)?;
            write(&out.join("scenario.json"), &engine.scenario.to_json())?;
            match bundle.optimized.footprint.mean_sel_db {
                Some(j) => println!("optimized J_s {j:.2} dB -> {}", out.display()),
                None => println!("no mammals -> {}", out.display()),
            }
        }
        Command::Compare { config } => {
            let engine = load(&config, cli.seed)?;
            let tl = engine.tl_model()?;
            let bundle = engine.run(tl.as_ref(), Some(true), None)?;
            bundle.write(out)?;
            write(&out.join("scenario.json"), &engine.scenario.to_json())?;
            if let Some(c) = &bundle.comparison {
                print!("{}", c.summary_text());
            }
        }
        Command::Serve { config, port } => {
            let engine = load(&config, cli.seed)?;
            // the service needs the cache up front
            engine.tl_model()?;
            let base_dir = engine.scenario.base_dir.clone();
            let state = AppState::new(base_dir);
            state.insert_engine("default", engine);
            let addr = SocketAddr::from(([0, 0, 0, 0], port.unwrap_or_else(default_port)));
            let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
            rt.block_on(serve(state, addr, None))?;
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<HubError>() {
        Some(h) if h.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["quietvoyage", "simulate", "s.json", "--baseline", "--seed", "4"]).unwrap();
        assert_eq!(cli.seed, Some(4));
        assert!(matches!(cli.command, Command::Simulate { baseline: true, .. }));
        assert!(Cli::try_parse_from(["quietvoyage", "serve"]).is_err());
    }

    #[test]
    fn validation_errors_exit_with_one() {
        assert_eq!(exit_code(&anyhow::Error::from(HubError::Validation("x".into()))), 1);
        assert_eq!(exit_code(&anyhow::Error::from(HubError::io(Path::new("f"), "disk"))), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("runtime")), 2);
    }
}
