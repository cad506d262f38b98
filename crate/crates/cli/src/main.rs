use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use miranda_core::harness::{self, CommandOutput, ExperimentConfig, HolderSide};
use miranda_core::{Error, Result};

#[derive(Parser)]
#[command(name = "miranda-layers", version, about = "Hölder estimates for layer potentials near a C^{1,1} curve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; defaults are used for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core. Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Builds and certifies the collar field a, tau and t1.
    FieldCheck,
    /// Gradient growth of K along inward collar levels.
    GradScan,
    /// omega_1 seminorms and fitted constants over the kernel/density family.
    Holder {
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
    },
    /// Four-way split of a gradient component against its part bounds.
    Split,
    /// c', c'', c''' and c^iv with a grid-doubling check.
    Constants,
    /// Coordinate cylinder at one boundary point.
    Cylinder {
        #[arg(long)]
        p_param: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Every command above plus summary.json.
    All,
    /// Prints the default config.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Interior,
    Exterior,
    Both,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::Cylinder { p_param, r, delta } = &cli.command {
        cfg.cylinder.p_param = p_param.unwrap_or(cfg.cylinder.p_param);
        cfg.cylinder.r = r.unwrap_or(cfg.cylinder.r);
        cfg.cylinder.delta = delta.unwrap_or(cfg.cylinder.delta);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<CommandOutput> {
    match &cli.command {
        Command::FieldCheck => harness::cmd_field_check(cfg),
        Command::GradScan => harness::cmd_grad_scan(cfg),
        Command::Holder { side } => match side {
            SideArg::Interior => harness::cmd_holder(cfg, HolderSide::Interior),
            SideArg::Exterior => harness::cmd_holder(cfg, HolderSide::Exterior),
            SideArg::Both => {
                let mut out = harness::cmd_holder(cfg, HolderSide::Interior)?;
                out.merge(harness::cmd_holder(cfg, HolderSide::Exterior)?);
                Ok(out)
            }
        },
        Command::Split => harness::cmd_split(cfg),
        Command::Constants => harness::cmd_constants(cfg),
        Command::Cylinder { .. } => harness::cmd_cylinder(cfg),
        Command::All => harness::run_all(cfg),
        Command::DefaultConfig => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::DefaultConfig = cli.command {
        println!("{}", serde_json::to_string_pretty(&ExperimentConfig::default()).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let out = match pool.install(|| run(&cli, &cfg)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(harness::error_exit_code(&e) as u8);
        }
    };
    if let Err(e) = harness::write_outputs(&out, &cli.out) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    for c in &out.checks {
        println!("{} {:<44} slack {:+.3e}", if c.pass { "ok  " } else { "FAIL" }, c.id, c.slack);
    }
    if out.nonconverged > 0 {
        println!("{} evaluation points did not converge", out.nonconverged);
    }
    ExitCode::from(out.outcome().exit_code() as u8)
}
