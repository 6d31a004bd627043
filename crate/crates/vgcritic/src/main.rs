use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vgcritic::config::{preset, preset_names, Scenario};
use vgcritic::run::{compare, run_scenario, RunError};

/// Variable-gain critic learning for input-constrained tracking.
///
/// `<config>` is a scenario file or the name of a built-in preset. Set
/// VGCRITIC_LOG (error, warn, info, debug) for progress messages.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode and write telemetry.csv, summary.txt and scenario.cfg.
    Run {
        config: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Run two episodes and write ratios a/b to comparison.txt.
    Compare {
        config_a: String,
        config_b: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ov: Overrides,
    },
    /// Print a built-in scenario, or list them all.
    Preset { name: Option<String> },
}

#[derive(Args)]
struct Overrides {
    /// Integration step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon (s).
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, sc: &mut Scenario) {
        if let Some(dt) = self.dt {
            sc.sim.dt = dt;
        }
        if let Some(t) = self.t_end {
            sc.sim.t_end = t;
        }
        if let Some(s) = self.seed {
            sc.sim.seed = s;
        }
    }
}

fn load(src: &str, ov: &Overrides) -> Result<Scenario, RunError> {
    let path = Path::new(src);
    let mut sc = if !path.exists() && preset_names().contains(&src) {
        preset(src)?
    } else {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Scenario::parse(&text)?
    };
    ov.apply(&mut sc);
    Ok(sc)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VGCRITIC_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run { config, out, ov } => load(&config, &ov)
            .and_then(|sc| run_scenario(&sc, &out))
            .map(|o| {
                println!("{}", o.dir.join(vgcritic::run::SUMMARY_FILE).display());
            }),
        Cmd::Compare {
            config_a,
            config_b,
            out,
            ov,
        } => load(&config_a, &ov)
            .and_then(|a| Ok((a, load(&config_b, &ov)?)))
            .and_then(|(a, b)| {
                let cmp = compare(&a, &b, &out)?;
                print!("{}", cmp.to_text(&a, &b));
                Ok(())
            }),
        Cmd::Preset { name: None } => {
            for n in preset_names() {
                println!("{n}");
            }
            Ok(())
        }
        Cmd::Preset { name: Some(n) } => preset(&n)
            .map(|sc| print!("{}", sc.to_config_string()))
            .map_err(Into::into),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
