use std::path::PathBuf;
use std::process::ExitCode;

use cbi2::experiments::{run, ExperimentConfig, ExperimentKind};
use cbi2::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Simulation and estimation experiments for two-type CBI diffusions.
#[derive(Parser, Debug)]
#[command(name = "cbi2", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(value_name = "CONFIG")]
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one observation series.
    Simulate(Common),
    /// Fit one series (`--input FILE`, or a freshly simulated one).
    Estimate(Common),
    /// Monte Carlo consistency study over `n_grid`.
    McConsistency(Common),
    /// Monte Carlo study of the asymptotic normality.
    McClt(Common),
    /// Compare the Laplace transform formula with simulated paths.
    LaplaceCheck(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Base config file; overrides apply on top of it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config overrides as `--key value` or `--key=value`, e.g. `--model.a1 0.5`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "OVERRIDES"
    )]
    overrides: Vec<String>,
}

fn parse_overrides(tokens: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let key = tok
            .strip_prefix("--")
            .ok_or_else(|| Error::ConfigParse(format!("expected '--key value', got '{tok}'")))?;
        let (k, v) = match key.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => (
                key,
                it.next()
                    .ok_or_else(|| Error::ConfigParse(format!("missing value for --{key}")))?
                    .clone(),
            ),
        };
        let k = if k == "out" { "output_dir" } else { k };
        out.push((k.to_string(), v));
    }
    Ok(out)
}

fn resolve(
    kind: Option<ExperimentKind>,
    file: Option<&PathBuf>,
    common: &Common,
) -> Result<ExperimentConfig> {
    let mut pairs = Vec::new();
    if let Some(k) = kind {
        pairs.push(("kind".to_string(), k.name().to_string()));
    }
    pairs.extend(parse_overrides(&common.overrides)?);
    if let Some(s) = common.seed {
        pairs.push(("seed".into(), s.to_string()));
    }
    if let Some(j) = common.jobs {
        pairs.push(("jobs".into(), j.to_string()));
    }
    if let Some(o) = &common.out {
        pairs.push(("output_dir".into(), o.display().to_string()));
    }
    match file.or(common.config.as_ref()) {
        Some(path) => ExperimentConfig::from_file(path, &pairs),
        None => ExperimentConfig::from_pairs(&pairs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.command {
        Command::Run { file, common } => resolve(None, Some(file), common),
        Command::Simulate(c) => resolve(Some(ExperimentKind::Simulate), None, c),
        Command::Estimate(c) => resolve(Some(ExperimentKind::Estimate), None, c),
        Command::McConsistency(c) => resolve(Some(ExperimentKind::McConsistency), None, c),
        Command::McClt(c) => resolve(Some(ExperimentKind::McClt), None, c),
        Command::LaplaceCheck(c) => resolve(Some(ExperimentKind::LaplaceCheck), None, c),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cbi2: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cbi2: {} failed: {e}", cfg.kind.name());
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_forms() {
        let toks: Vec<String> = ["--model.a1", "0.5", "--weight=inverse_norm"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let p = parse_overrides(&toks).unwrap();
        assert_eq!(
            p,
            vec![
                ("model.a1".into(), "0.5".into()),
                ("weight".into(), "inverse_norm".into())
            ]
        );
        assert!(parse_overrides(&["--seed".to_string()]).is_err());
        assert!(parse_overrides(&["seed".to_string()]).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        // subcommand arguments are only checked when that subcommand is built
        for args in [
            &["cbi2", "run", "a.cfg", "--seed", "2"][..],
            &["cbi2", "simulate", "--config", "a.cfg"][..],
            &["cbi2", "estimate", "--input", "s.csv"][..],
            &["cbi2", "mc-consistency", "--jobs", "2"][..],
            &["cbi2", "mc-clt", "--out", "o"][..],
            &["cbi2", "laplace-check", "--laplace.t", "2"][..],
        ] {
            Cli::try_parse_from(args).unwrap();
        }
    }
}
