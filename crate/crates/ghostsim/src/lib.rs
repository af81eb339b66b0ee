//! Run files, presets, exporters and the pieces the `ghostsim` binary is
//! built from.

pub mod config;
pub mod dot;
pub mod presets;
pub mod summary;
pub mod trace_io;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ghostsim_core::engine::{run, Trace};
use ghostsim_core::network::Tick;

pub use config::{ConfigError, ExportOptions, RunFile};
pub use dot::{export_dot, DotError, Viewpoint};
pub use summary::{summarize, Summary};
pub use trace_io::{export_trace, write_trace, SCHEMA_VERSION};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GHOSTSIM_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_SAFETY: i32 = 2;
pub const EXIT_STALL: i32 = 3;

/// A preset name, or else a path to a TOML run file.
pub fn load(source: &str) -> Result<RunFile> {
    if let Some(rf) = presets::get(source) {
        return Ok(rf);
    }
    let path = Path::new(source);
    if !path.exists() {
        bail!(
            "`{source}` is neither a preset ({}) nor a file",
            presets::NAMES.join(", ")
        );
    }
    load_file(path)
}

pub fn load_file(path: &Path) -> Result<RunFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunFile::parse(&text).with_context(|| format!("in {}", path.display()))
}

pub fn simulate(rf: &RunFile) -> Result<Trace> {
    let cfg = rf.to_config()?;
    Ok(run(cfg)?)
}

/// Safety violations take precedence over stalls.
pub fn exit_code(s: &Summary) -> i32 {
    if s.safety_witnesses > 0 {
        EXIT_SAFETY
    } else if !s.stalls.is_empty() {
        EXIT_STALL
    } else {
        EXIT_OK
    }
}

/// Writes `trace.jsonl`, `summary.json` and the requested DOT snapshots into
/// `dir`. Returns the paths written.
pub fn write_outputs(
    trace: &Trace,
    summary: &Summary,
    opts: &ExportOptions,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    if opts.trace {
        let p = dir.join("trace.jsonl");
        let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        write_trace(trace, std::io::BufWriter::new(f))?;
        written.push(p);
    }
    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(summary)? + "\n")?;
    written.push(p);
    let views = if opts.dot_views.is_empty() {
        vec![Viewpoint::Global]
    } else {
        opts.dot_views.clone()
    };
    for &tick in &opts.dot_ticks {
        for &view in &views {
            let text = export_dot(trace, Tick(tick), view)?;
            let p = dir.join(format!("tree-{view}-t{tick}.dot"));
            fs::write(&p, text)?;
            written.push(p);
        }
    }
    Ok(written)
}
