use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use raysteady::config::{
    apply_seed_override, parse_session_config, parse_trace_config, read_bytes, SEED_ENV,
};
use raysteady::harness::run_session_with;
use raysteady::io::{
    motion_trace_rows, read_results, write_atomic, write_events, write_plot, write_results,
    write_trace, EventRow, ResultRow, TraceRow,
};
use raysteady::pointing::EventKind;
use raysteady::report::{analyze, sha256_hex, unix_now, zone_report, OutputFile, RunManifest};
use raysteady::stats::DEFAULT_ALPHA;
use raysteady::{Error, Result};

#[derive(Parser)]
#[command(
    name = "raysteady",
    version,
    about = "Tremor filtering for ray pointing: simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulated paired study and write results.csv and manifest.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-trial pose and event CSVs under <out>/traces.
        #[arg(long)]
        traces: bool,
    },
    /// Paired t-tests and summaries per (task, range) from a results CSV.
    Analyze {
        #[arg(long)]
        results: PathBuf,
        /// Report JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Plot CSV path [default: <out> with extension .plot.csv].
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Comfort angles for a field of view and the depth zone of a distance.
    Zones {
        #[arg(long, allow_negative_numbers = true)]
        fov: f64,
        #[arg(long, allow_negative_numbers = true)]
        distance: f64,
    },
    /// Filter one synthetic tremor stream and write raw vs filtered poses.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let rendered = e.render().to_string();
            let detail: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| {
                    !l.is_empty()
                        && !l.starts_with("For more information")
                        && !l.starts_with("tip:")
                })
                .collect();
            let detail = detail.join(" ");
            eprintln!("error: usage: {}", detail.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {}", e.kind(), msg);
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            traces,
        } => simulate(&config, &out, traces),
        Command::Analyze {
            results,
            out,
            plot,
            alpha,
        } => {
            let plot = plot.unwrap_or_else(|| out.with_extension("plot.csv"));
            analyze_cmd(&results, &out, &plot, alpha)
        }
        Command::Zones { fov, distance } => {
            let report = zone_report(fov, distance)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Command::Trace { config, out } => trace_cmd(&config, &out),
    }
}

/// Writes `bytes` atomically and returns its manifest entry.
fn emit(out_dir: &Path, rel: &str, bytes: &[u8]) -> Result<OutputFile> {
    let path = out_dir.join(rel);
    write_atomic(&path, |w| {
        w.write_all(bytes).map_err(|e| Error::io(&path, e))
    })?;
    Ok(OutputFile {
        path: rel.to_string(),
        sha256: sha256_hex(bytes),
    })
}

fn csv_bytes(fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    Ok(buf)
}

fn simulate(config: &Path, out: &Path, traces: bool) -> Result<()> {
    let started = unix_now();
    let bytes = read_bytes(config)?;
    let mut plan = parse_session_config(&bytes, config)?;
    let env_seed = std::env::var(SEED_ENV).ok();
    apply_seed_override(&mut plan, env_seed.as_deref())?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let rows = run_session_with(&plan, traces)?;
    let mut outputs = Vec::new();

    let results: Vec<ResultRow> = rows.iter().map(ResultRow::from).collect();
    let results_csv = csv_bytes(|b| write_results(b, &results))?;
    outputs.push(emit(out, "results.csv", &results_csv)?);

    if traces {
        let dir = out.join("traces");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for row in &rows {
            let stem = format!(
                "traces/p{:03}_{}_{}m_{}",
                row.participant,
                row.kind(),
                row.range_m(),
                if row.filter_on() { "on" } else { "off" }
            );
            let (samples, events) = motion_trace_rows(&row.result.trace);
            let trace_csv = csv_bytes(|b| write_trace(b, &samples))?;
            outputs.push(emit(out, &format!("{stem}.csv"), &trace_csv)?);
            let events_csv = csv_bytes(|b| write_events(b, &events))?;
            outputs.push(emit(out, &format!("{stem}_events.csv"), &events_csv)?);
        }
    }

    let manifest = RunManifest {
        schema_version: 1,
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_path: config.display().to_string(),
        config_sha256: sha256_hex(&bytes),
        seed_root: plan.seed_root,
        seed_from_env: env_seed.is_some(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    emit(out, "manifest.json", &json)?;
    Ok(())
}

fn analyze_cmd(results: &Path, out: &Path, plot: &Path, alpha: f64) -> Result<()> {
    let rows = read_results(results)?;
    let (report, plot_rows) = analyze(&rows, alpha)?;
    let json = serde_json::to_vec_pretty(&report)?;
    write_atomic(out, |w| w.write_all(&json).map_err(|e| Error::io(out, e)))?;
    write_atomic(plot, |w| write_plot(w, &plot_rows))?;
    Ok(())
}

fn trace_cmd(config: &Path, out: &Path) -> Result<()> {
    let bytes = read_bytes(config)?;
    let cfg = parse_trace_config(&bytes, config)?;
    let (raw, filtered) = cfg.run()?;
    let rows: Vec<TraceRow> = raw
        .iter()
        .zip(&filtered)
        .map(|(r, f)| TraceRow::new(r, f))
        .collect();
    write_atomic(out, |w| write_trace(w, &rows))?;
    if !cfg.toggles_s.is_empty() {
        let mut enabled = cfg.filter_on;
        let events: Vec<EventRow> = cfg
            .toggles_s
            .iter()
            .map(|&at| {
                enabled = !enabled;
                // the flip applies from the first sample at or after `at`
                let t = raw.iter().map(|p| p.t).find(|&t| t >= at).unwrap_or(at);
                EventRow {
                    t_s: t,
                    kind: EventKind::Toggle,
                    detail: format!("filter {}", if enabled { "on" } else { "off" }),
                }
            })
            .collect();
        let events_path = out.with_extension("events.csv");
        write_atomic(&events_path, |w| write_events(w, &events))?;
    }
    Ok(())
}
