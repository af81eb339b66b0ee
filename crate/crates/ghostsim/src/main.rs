use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ghostsim::{presets, RunFile, Viewpoint};
use ghostsim_core::network::Tick;

/// Discrete-time simulator of GHOST-style fork choice under attack.
///
/// Exit status: 0 no violation, 2 safety violation, 3 liveness stall,
/// 1 usage or runtime error.
#[derive(Parser)]
#[command(name = "ghostsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML config and write trace, summary and DOT files.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a named preset.
    Replay {
        preset: String,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print one DOT snapshot of the block tree.
    ExportDot {
        /// Preset name or config path.
        source: String,
        #[arg(long)]
        tick: u64,
        /// `global` or a validator index.
        #[arg(long, default_value = "global")]
        view: Viewpoint,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print summary statistics.
    Summary {
        /// Preset name or config path.
        source: String,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the resolved run file of a preset or config.
    ShowConfig {
        source: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List preset names.
    Presets,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    confirmation_depth: Option<u64>,
    #[arg(long)]
    boost_weight: Option<u64>,
    /// `vanilla`, `committee` or `committee-lmd`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    stall_window: Option<u64>,
}

impl Overrides {
    fn apply(&self, rf: &mut RunFile) {
        if let Some(s) = self.seed {
            rf.lottery_mut().seed = Some(s);
        }
        if let Some(s) = self.slots {
            rf.run_mut().num_slots = Some(s);
        }
        if let Some(t) = self.confirmation_depth {
            rf.run_mut().confirmation_depth = Some(t);
        }
        if let Some(w) = self.boost_weight {
            rf.run_mut().boost_weight = Some(w);
        }
        if let Some(m) = &self.mode {
            rf.run_mut().mode = Some(m.clone());
        }
        if let Some(w) = self.stall_window {
            rf.export_mut().stall_window = Some(w);
        }
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output directory. Falls back to the config, then $GHOSTSIM_OUT_DIR,
    /// then `ghostsim-out`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn load(source: &str, overrides: &Overrides) -> Result<RunFile> {
    let mut rf = ghostsim::load(source)?;
    overrides.apply(&mut rf);
    Ok(rf)
}

fn execute(rf: RunFile, out: &OutArgs) -> Result<i32> {
    let opts = rf.export_options()?;
    let trace = ghostsim::simulate(&rf)?;
    let summary = ghostsim::summarize(&trace, opts.stall_window);
    let dir = out
        .out_dir
        .clone()
        .or_else(|| opts.out_dir.clone())
        .or_else(|| std::env::var_os(ghostsim::OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("ghostsim-out"));
    let written = ghostsim::write_outputs(&trace, &summary, &opts, &dir)?;
    println!("{summary}");
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(ghostsim::exit_code(&summary))
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            out,
        } => {
            let mut rf = ghostsim::load_file(&config)?;
            overrides.apply(&mut rf);
            execute(rf, &out)
        }
        Command::Replay {
            preset,
            overrides,
            out,
        } => {
            let mut rf = presets::get(&preset).with_context(|| {
                format!(
                    "unknown preset `{preset}`; try one of {}",
                    presets::NAMES.join(", ")
                )
            })?;
            overrides.apply(&mut rf);
            execute(rf, &out)
        }
        Command::ExportDot {
            source,
            tick,
            view,
            output,
            overrides,
        } => {
            let rf = load(&source, &overrides)?;
            let trace = ghostsim::simulate(&rf)?;
            let text = ghostsim::export_dot(&trace, Tick(tick), view)?;
            match output {
                Some(p) => {
                    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?
                }
                None => print!("{text}"),
            }
            Ok(ghostsim::EXIT_OK)
        }
        Command::Summary {
            source,
            json,
            overrides,
        } => {
            let rf = load(&source, &overrides)?;
            let window = rf.export_options()?.stall_window;
            let trace = ghostsim::simulate(&rf)?;
            let summary = ghostsim::summarize(&trace, window);
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!("{summary}");
            }
            Ok(ghostsim::exit_code(&summary))
        }
        Command::ShowConfig { source, overrides } => {
            let rf = load(&source, &overrides)?;
            rf.to_config()?;
            print!("{}", rf.emit());
            Ok(ghostsim::EXIT_OK)
        }
        Command::Presets => {
            for name in presets::NAMES {
                println!("{name}");
            }
            Ok(ghostsim::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    // clap reports usage errors with status 2, which is taken by safety
    // violations here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
