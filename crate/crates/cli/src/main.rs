use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rsb_core::concept::{
    bundled, evaluate, parse_needs_correlation, parse_risk_register, parse_score_table, risk_score, EvalInputs,
};
use rsb_core::reconciliation::{generate_report, load, persist};
use rsb_core::simkernel::{load_scenario, run_batch, run_full, Scenario, SimOptions};
use rsb_core::CaseId;

/// Exit status when a case ends with an unresolved retained-item or count finding.
const EXIT_FINDING: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "rsbtrack", version, about = "RFID surgical-equipment tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutDir {
    /// Output directory (created if missing).
    #[arg(long, env = "RSBTRACK_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trace, per-case reports and a summary.
    Simulate {
        scenario: PathBuf,
        /// Replace the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run a scenario under many seeds and write aggregate statistics.
    Montecarlo {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Parse and validate a scenario file.
    Validate { scenario: PathBuf },
    /// Rebuild a case report from a stored trace.
    Report {
        trace: PathBuf,
        #[arg(long)]
        case: String,
        #[command(flatten)]
        out: OutDir,
    },
    /// QFD weighting, Pugh screening and ranking, plot data.
    Eval(EvalArgs),
    /// Score a risk register.
    Risk {
        /// CSV with description,likelihood,consequence,mitigation.
        register: Option<PathBuf>,
        #[arg(long, conflicts_with = "register")]
        bundled: bool,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "bundled")]
    needs: Option<PathBuf>,
    #[arg(long, required_unless_present = "bundled")]
    correlation: Option<PathBuf>,
    #[arg(long, required_unless_present = "bundled")]
    scores: Option<PathBuf>,
    /// Screening matrix of -1/0/+1 entries; requires --datum.
    #[arg(long, requires = "datum")]
    screening: Option<PathBuf>,
    #[arg(long, requires = "screening")]
    datum: Option<String>,
    /// Qualitative criterion scores; adds two-axis plot data.
    #[arg(long)]
    qualitative: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// Use the bundled example instance instead of files.
    #[arg(long, conflicts_with_all = ["needs", "correlation", "scores", "screening", "qualitative"])]
    bundled: bool,
    #[command(flatten)]
    out: OutDir,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    load_scenario(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes via a temporary file in the same directory and renames it into place.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn pretty(value: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn simulate(path: &Path, seed: Option<u64>, out: &Path) -> Result<u8> {
    let mut scenario = read_scenario(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    ensure_dir(out)?;
    let run = run_full(&scenario, SimOptions::default());
    let stem = &scenario.name;

    let trace_path = out.join(format!("{stem}.trace.ndjson"));
    persist(&run.trace, &trace_path).with_context(|| format!("writing {}", trace_path.display()))?;
    for case in &run.cases {
        let report = generate_report(&run.trace, &case.case_id)?;
        write_atomic(out, &format!("{stem}.{}.report.json", case.case_id), &(report.to_json() + "\n"))?;
        write_atomic(out, &format!("{stem}.{}.report.csv", case.case_id), &report.to_csv()?)?;
    }
    let summary = serde_json::json!({
        "scenario": stem,
        "seed": scenario.seed,
        "cases": run.cases,
        "stats": run.stats,
    });
    write_atomic(out, &format!("{stem}.summary.json"), &pretty(&summary)?)?;

    for case in &run.cases {
        let outcome = case.last_outcome.map_or("none".to_string(), |o| format!("{o:?}"));
        println!(
            "{}: phase {:?}, last outcome {outcome}{}",
            case.case_id,
            case.final_phase,
            if case.unresolved { ", UNRESOLVED" } else { "" }
        );
    }
    println!("trace: {}", trace_path.display());
    Ok(if run.has_safety_finding() { EXIT_FINDING } else { 0 })
}

fn montecarlo(path: &Path, runs: u64, seed_base: u64, out: &Path) -> Result<u8> {
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let scenario = read_scenario(path)?;
    ensure_dir(out)?;
    let summary = run_batch(&scenario, runs, seed_base);
    let written = write_atomic(out, &format!("{}.montecarlo.json", scenario.name), &(summary.to_json() + "\n"))?;
    match summary.first_scan_miss_rate {
        Some(r) => println!("{runs} runs, first-scan miss rate {r:.6}"),
        None => println!("{runs} runs, no tags in any cavity scan"),
    }
    println!("summary: {}", written.display());
    Ok(0)
}

fn report(trace: &Path, case: &str, out: &Path) -> Result<u8> {
    let trace = load(trace).with_context(|| format!("loading {}", trace.display()))?;
    let report = generate_report(&trace, &CaseId::from(case))?;
    ensure_dir(out)?;
    let json = write_atomic(out, &format!("{case}.report.json"), &(report.to_json() + "\n"))?;
    write_atomic(out, &format!("{case}.report.csv"), &report.to_csv()?)?;
    println!("report: {}", json.display());
    Ok(0)
}

fn eval(args: &EvalArgs) -> Result<u8> {
    let inputs = if args.bundled {
        bundled().inputs(args.top_k)?
    } else {
        let (Some(needs), Some(corr), Some(scores)) = (&args.needs, &args.correlation, &args.scores) else {
            bail!("--needs, --correlation and --scores are required without --bundled");
        };
        let screening = match (&args.screening, &args.datum) {
            (Some(p), Some(datum)) => Some(parse_score_table(&read(p)?)?.screening(datum.clone())),
            _ => None,
        };
        let qualitative = match &args.qualitative {
            Some(p) => Some(parse_score_table(&read(p)?)?),
            None => None,
        };
        EvalInputs {
            qfd: parse_needs_correlation(&read(needs)?, &read(corr)?)?,
            top_k: args.top_k,
            screening,
            scores: parse_score_table(&read(scores)?)?,
            qualitative,
        }
    };
    let result = evaluate(&inputs)?;
    ensure_dir(&args.out.out)?;
    let written = write_atomic(&args.out.out, "ranking.json", &(result.to_json() + "\n"))?;
    for (i, (concept, total)) in result.ranking.iter().enumerate() {
        println!("{}. {concept} ({total:.4})", i + 1);
    }
    println!("ranking: {}", written.display());
    Ok(0)
}

fn risk(register: Option<&Path>, use_bundled: bool, out: &Path) -> Result<u8> {
    let items = match (register, use_bundled) {
        (_, true) => bundled().risk_register()?,
        (Some(p), false) => parse_risk_register(&read(p)?)?,
        (None, false) => bail!("give a register file or --bundled"),
    };
    let mut rows = Vec::new();
    for item in &items {
        let (score, band) = risk_score(item)?;
        println!("{score:>2} {band:?}  {}", item.description);
        rows.push(serde_json::json!({
            "description": item.description,
            "likelihood": item.likelihood,
            "consequence": item.consequence,
            "score": score,
            "band": band,
            "mitigation": item.mitigation,
        }));
    }
    ensure_dir(out)?;
    let written = write_atomic(out, "risk.json", &pretty(&serde_json::Value::Array(rows))?)?;
    println!("risk: {}", written.display());
    Ok(0)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Simulate { scenario, seed, out } => simulate(scenario, *seed, &out.out),
        Command::Montecarlo {
            scenario,
            runs,
            seed_base,
            out,
        } => montecarlo(scenario, *runs, *seed_base, &out.out),
        Command::Validate { scenario } => {
            let s = read_scenario(scenario)?;
            println!(
                "{}: ok ({} rooms, {} items, {} cases, {} events)",
                s.name,
                s.rooms.len(),
                s.items.len(),
                s.cases.len(),
                s.events.len()
            );
            Ok(0)
        }
        Command::Report { trace, case, out } => report(trace, case, &out.out),
        Command::Eval(args) => eval(args),
        Command::Risk { register, bundled, out } => risk(register.as_deref(), *bundled, &out.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
