//! Command-line front end: config resolution, pipeline commands and the
//! result files they write.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use serde_json::Map;

use args::{Cli, Command};
use config::{resolve, RunConfig, SEED_ENV};
use error::{CliError, CliResult};

fn configure(config: Option<&std::path::Path>, fill: impl FnOnce(&mut Map<String, serde_json::Value>)) -> CliResult<RunConfig> {
    let mut flags = Map::new();
    fill(&mut flags);
    let env_seed = std::env::var(SEED_ENV).ok();
    let cfg = resolve(config, env_seed.as_deref(), flags)?;
    if cfg.threads > 1 {
        // Fails only if a pool already exists, which is fine to reuse.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .try_init()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.command {
        Command::Train { common } => {
            let cfg = configure(common.config.as_deref(), |m| common.write(m))?;
            commands::cmd_train(&cfg)
        }
        Command::Stats { common } => {
            let cfg = configure(common.config.as_deref(), |m| common.write(m))?;
            commands::cmd_stats(&cfg)
        }
        Command::Stream { common, stream } => {
            let cfg = configure(common.config.as_deref(), |m| {
                common.write(m);
                stream.write(m);
            })?;
            commands::cmd_stream(&cfg)
        }
        Command::Eval { common, eval } => {
            let cfg = configure(common.config.as_deref(), |m| {
                common.write(m);
                eval.write(m);
            })?;
            commands::cmd_eval(&cfg)
        }
        Command::Snapshots { common, eval, snap } => {
            let cfg = configure(common.config.as_deref(), |m| {
                common.write(m);
                eval.write(m);
                snap.write(m);
            })?;
            commands::cmd_snapshots(&cfg)
        }
        Command::Synth(args) => commands::cmd_synth(&args),
    }
}
