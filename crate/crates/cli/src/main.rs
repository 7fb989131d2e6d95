// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use famtar::engine::RunOutput;
use famtar::experiment::{self, Experiment};
use famtar::scenario::ScenarioFile;

/// Version tag written into every JSON output.
const FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "famtar", version, about = "Deterministic FAMTAR network simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct RunOpts {
    /// Number of repetitions (defaults to the file's value).
    #[arg(long)]
    repetitions: Option<u32>,
    /// Seed of the first repetition (defaults to the file's value).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-second metrics format.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Force FAMTAR on or off.
    #[arg(long, value_enum)]
    famtar: Option<Switch>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run every scenario file in a directory and pair baseline/FAMTAR runs.
    Suite {
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check scenario files without running them.
    Validate { files: Vec<PathBuf> },
    /// Compare two experiment summaries; exits 1 when a metric differs by
    /// more than the tolerance.
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Relative tolerance on metric means.
        #[arg(long, default_value_t = 0.05)]
        rel_tol: f64,
        /// Absolute tolerance on metric means.
        #[arg(long, default_value_t = 0.0)]
        abs_tol: f64,
    },
    /// Paired table from a baseline summary and a FAMTAR summary.
    Table { baseline: PathBuf, famtar: PathBuf },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run { scenario, opts } => {
            let file = load(&scenario, &opts)?;
            let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&file.name));
            let exp = run_file(&file, &opts, &out)?;
            print!("{}", aggregate_table(&exp));
        }
        Cmd::Suite { dir, opts } => {
            let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            paths.retain(|p| p.extension().is_some_and(|e| e == "toml"));
            paths.sort();
            let files = paths.iter().map(|p| load(p, &opts)).collect::<Result<Vec<_>>>()?;
            let root = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let mut exps = BTreeMap::new();
            for f in &files {
                eprintln!("running {}", f.name);
                exps.insert(f.name.clone(), run_file(f, &opts, &root.join(&f.name))?);
            }
            let mut text = String::new();
            for (name, base) in &exps {
                let Some(stem) = name.strip_suffix(".ip") else { continue };
                let Some(fam) = exps.get(&format!("{stem}.famtar")) else { continue };
                let rows = experiment::pair(base, fam)?;
                text.push_str(&format!("{stem}\n{}\n", experiment::emit_summary(&rows)));
            }
            fs::create_dir_all(&root)?;
            fs::write(root.join("suite.txt"), &text)?;
            print!("{text}");
        }
        Cmd::Validate { files } => {
            let mut bad = 0;
            for p in &files {
                match ScenarioFile::load(p).and_then(|f| f.validate()) {
                    Ok(()) => println!("ok {}", p.display()),
                    Err(e) => {
                        bad += 1;
                        println!("invalid {}: {e}", p.display());
                    }
                }
            }
            if bad > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Diff { a, b, rel_tol, abs_tol } => {
            let (a, b) = (read_summary(&a)?, read_summary(&b)?);
            let mut violations = 0;
            let keys: std::collections::BTreeSet<_> = a.aggregate.keys().chain(b.aggregate.keys()).collect();
            for k in keys {
                match (a.aggregate.get(k), b.aggregate.get(k)) {
                    (Some(x), Some(y)) => {
                        let d = (x.mean - y.mean).abs();
                        let ok = d <= abs_tol || d <= rel_tol * x.mean.abs().max(y.mean.abs());
                        if !ok {
                            violations += 1;
                        }
                        println!("{} {k}: {} vs {}", if ok { "ok  " } else { "DIFF" }, x, y);
                    }
                    _ => {
                        violations += 1;
                        println!("DIFF {k}: present in one summary only");
                    }
                }
            }
            if violations > 0 {
                println!("{violations} metric(s) outside tolerance");
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Table { baseline, famtar } => {
            let rows = experiment::pair(&read_summary(&baseline)?, &read_summary(&famtar)?)?;
            print!("{}", experiment::emit_summary(&rows));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path, opts: &RunOpts) -> Result<ScenarioFile> {
    let mut f = ScenarioFile::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = opts.famtar {
        f = f.with_famtar(matches!(s, Switch::On));
    }
    f.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(f)
}

fn run_file(file: &ScenarioFile, opts: &RunOpts, out: &Path) -> Result<Experiment> {
    let reps = opts.repetitions.unwrap_or(file.repetitions);
    let seed = opts.seed.unwrap_or(file.seed);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let format = opts.format;
    let (exp, written) = experiment::run_experiment_with(file, reps, seed, true, |i, run| {
        write_run(&out.join(format!("rep{i}")), run, format)
    })?;
    written.into_iter().collect::<Result<Vec<()>>>()?;
    let summary = serde_json::json!({ "format_version": FORMAT_VERSION, "experiment": exp });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(out.join("summary.txt"), aggregate_table(&exp))?;
    Ok(exp)
}

fn write_run(dir: &Path, run: &RunOutput, format: Format) -> Result<()> {
    fs::create_dir_all(dir)?;
    let r = &run.report;
    match format {
        Format::Csv => {
            r.write_flow_csv(BufWriter::new(File::create(dir.join("flows.csv"))?))?;
            r.write_link_csv(BufWriter::new(File::create(dir.join("links.csv"))?))?;
        }
        Format::Jsonl => {
            let mut w = BufWriter::new(File::create(dir.join("flows.jsonl"))?);
            for f in &r.flows {
                for (s, st) in f.series.iter().enumerate() {
                    let row = serde_json::json!({ "second": s, "flow": f.id, "kind": f.kind, "stats": st });
                    serde_json::to_writer(&mut w, &row)?;
                    w.write_all(b"\n")?;
                }
            }
            let mut w = BufWriter::new(File::create(dir.join("links.jsonl"))?);
            for l in &r.links {
                let row = serde_json::json!({
                    "from": l.from, "to": l.to, "utilization": l.utilization, "congested": l.congested,
                });
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n")?;
            }
        }
    }
    run.log.write_jsonl(BufWriter::new(File::create(dir.join("events.jsonl"))?))?;
    let report = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "totals": r.totals,
        "routers": r.routers,
        "event_count": r.event_count,
        "event_log_sha256": r.event_log_sha256,
    });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn read_summary(path: &Path) -> Result<Experiment> {
    let v: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
    )?;
    if v["format_version"] != FORMAT_VERSION {
        bail!("{}: unsupported summary format", path.display());
    }
    Ok(serde_json::from_value(v["experiment"].clone())?)
}

fn aggregate_table(exp: &Experiment) -> String {
    let mut s = format!("{} ({} runs, seeds from {})\n", exp.scenario.name, exp.runs.len(), exp.seed_base);
    for (k, st) in &exp.aggregate {
        s.push_str(&format!("  {k:<24} {st}\n"));
    }
    s
}
