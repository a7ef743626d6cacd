//! Command-line front end: `run` executes a configured sweep and emits CSV,
//! `verify` runs the fast self-check suite, `dump-drop` writes one drop's
//! node layout (and optionally a per-user SINR breakdown) for debugging.
//!
//! Exit codes: 0 success, 2 configuration problem, 3 no feasible drop
//! anywhere, 4 polyblock budget exhausted without an SCA fallback result.
//! `FDNOMA_LOG=quiet` silences stderr progress.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use fdnoma::bench::evaluate_scheme;
use fdnoma::config::{apply_set_override, load_config, RunSpec};
use fdnoma::experiment::run_sweep;
use fdnoma::link::{breakdown_csv, sic_order, SinrModel};
use fdnoma::propagation::{build_channels, dump_drop, generate_drop};
use fdnoma::verify::run_verification;

const USAGE: &str = "\
fdnoma - full-duplex NOMA network simulator and power-allocation optimizer

USAGE:
  fdnoma run <config.cfg> [--set key=value]... [--out FILE] [--workers N]
             [--trace PREFIX] [--no-fallback]
  fdnoma verify [--corrupt-gains]
  fdnoma dump-drop <config.cfg> [--drop N] [--out FILE] [--breakdown FILE]

RUN:
  Executes the sweep described by the config file and prints the summary CSV
  (scheme,sweep_var,sweep_value_db,mean_tput,stderr,n_feasible,mean_iters)
  to stdout or --out. --set overrides are applied after the file, in order.
  --workers N bounds the drop-level parallelism (0 = all cores); the output
  is byte-identical for every worker count. --trace PREFIX writes one
  iteration-trace CSV per scheme for the first drop of the first sweep value.
  --no-fallback disables the SCA fallback when the polyblock vertex budget
  runs out.

VERIFY:
  Runs the fast acceptance suite (oracle equivalences, model invariants) and
  prints one pass/fail line per check. --corrupt-gains is a negative control
  that must make the suite fail.

DUMP-DROP:
  Writes drop 0 (or --drop N) as `kind index x y cell` lines. --breakdown
  additionally solves the configured scheme on that drop and writes the
  per-user SINR component CSV at the solution.

EXIT CODES:
  0 success, 1 verification failure, 2 config error, 3 infeasible everywhere,
  4 vertex budget exhausted with fallback disabled.
";

fn quiet() -> bool {
    std::env::var("FDNOMA_LOG")
        .map(|v| v == "quiet")
        .unwrap_or(false)
}

fn log(msg: &str) {
    if !quiet() {
        eprintln!("{msg}");
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(cmd) = args.first() else {
        eprint!("{USAGE}");
        return ExitCode::from(2);
    };
    match cmd.as_str() {
        "run" => cmd_run(&args[1..]),
        "verify" => cmd_verify(&args[1..]),
        "dump-drop" => cmd_dump_drop(&args[1..]),
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            ExitCode::SUCCESS
        }
        other => {
            eprintln!("unknown command `{other}`\n\n{USAGE}");
            ExitCode::from(2)
        }
    }
}

struct RunArgs {
    config: PathBuf,
    sets: Vec<String>,
    out: Option<PathBuf>,
    workers: usize,
    trace_prefix: Option<PathBuf>,
    fallback: bool,
}

fn parse_run_args(args: &[String]) -> Result<RunArgs, String> {
    let mut config = None;
    let mut sets = Vec::new();
    let mut out = None;
    let mut workers = 0usize;
    let mut trace_prefix = None;
    let mut fallback = true;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--set" => sets.push(it.next().ok_or("missing value for --set")?.clone()),
            "--out" => out = Some(PathBuf::from(it.next().ok_or("missing value for --out")?)),
            "--workers" => {
                workers = it
                    .next()
                    .ok_or("missing value for --workers")?
                    .parse::<usize>()
                    .map_err(|e| format!("bad --workers value: {e}"))?;
            }
            "--trace" => {
                trace_prefix = Some(PathBuf::from(
                    it.next().ok_or("missing value for --trace")?,
                ));
            }
            "--no-fallback" => fallback = false,
            other if config.is_none() && !other.starts_with('-') => {
                config = Some(PathBuf::from(other));
            }
            other => return Err(format!("unexpected argument `{other}`")),
        }
    }
    Ok(RunArgs {
        config: config.ok_or("missing config file path")?,
        sets,
        out,
        workers,
        trace_prefix,
        fallback,
    })
}

fn load_spec(path: &Path, sets: &[String]) -> Result<RunSpec, String> {
    let mut spec = load_config(path).map_err(|e| e.to_string())?;
    for expr in sets {
        apply_set_override(&mut spec, expr).map_err(|e| e.to_string())?;
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn cmd_run(args: &[String]) -> ExitCode {
    let parsed = match parse_run_args(args) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let spec = match load_spec(&parsed.config, &parsed.sets) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    log(&format!(
        "running {} sweep value(s) x {} scheme(s) x {} drop(s)",
        spec.sweep.values.len(),
        spec.sweep.schemes.len(),
        spec.sweep.n_drops
    ));
    let sweep = run_sweep(&spec.sweep, &spec.cfg, parsed.workers, parsed.fallback);

    if let Some(prefix) = &parsed.trace_prefix {
        if let Err(e) = write_traces(prefix, &spec) {
            eprintln!("error: cannot write traces: {e}");
            return ExitCode::from(2);
        }
    }

    let csv = sweep.to_csv();
    if let Some(path) = &parsed.out {
        if let Err(e) = std::fs::write(path, &csv) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    } else {
        print!("{csv}");
    }

    let fallbacks = sweep.total_fallbacks();
    let exhausted = sweep.total_budget_exhausted();
    if exhausted > 0 {
        log(&format!(
            "polyblock vertex budget exhausted on {exhausted} solve(s); SCA fallback covered {fallbacks}"
        ));
    }
    if sweep.all_infeasible() {
        eprintln!("error: every drop was infeasible under the configured rate demand");
        return ExitCode::from(3);
    }
    if exhausted > fallbacks {
        eprintln!(
            "error: {} solve(s) exhausted the vertex budget with fallback disabled",
            exhausted - fallbacks
        );
        return ExitCode::from(4);
    }
    ExitCode::SUCCESS
}

/// Iteration traces for the first drop of the first sweep value, one file per
/// scheme: `<prefix>.<scheme>.csv`.
fn write_traces(prefix: &Path, spec: &RunSpec) -> std::io::Result<()> {
    let cfg = match spec.sweep.variable {
        Some(var) => var.apply(&spec.cfg, spec.sweep.values[0]),
        None => spec.cfg.clone(),
    };
    let topo = generate_drop(&cfg, 0);
    let ch = build_channels(&topo, &cfg, 0);
    for &scheme in &spec.sweep.schemes {
        let res = evaluate_scheme(&ch, &topo, scheme, &cfg);
        let path = prefix.with_extension(format!("{scheme}.csv"));
        std::fs::write(path, res.trace.to_csv())?;
    }
    Ok(())
}

fn cmd_verify(args: &[String]) -> ExitCode {
    let mut corrupt = false;
    for arg in args {
        match arg.as_str() {
            "--corrupt-gains" => corrupt = true,
            other => {
                eprintln!("unexpected argument `{other}`\n\n{USAGE}");
                return ExitCode::from(2);
            }
        }
    }
    let outcomes = run_verification(corrupt);
    let mut failed = 0usize;
    for o in &outcomes {
        if o.passed {
            println!("PASS  {}", o.name);
        } else {
            println!("FAIL  {} ({})", o.name, o.detail);
            failed += 1;
        }
    }
    println!("{} checks, {} failed", outcomes.len(), failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_dump_drop(args: &[String]) -> ExitCode {
    let mut config = None;
    let mut drop_index = 0usize;
    let mut out: Option<PathBuf> = None;
    let mut breakdown: Option<PathBuf> = None;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--drop" => {
                drop_index = match it.next().map(|v| v.parse::<usize>()) {
                    Some(Ok(v)) => v,
                    _ => {
                        eprintln!("bad or missing value for --drop");
                        return ExitCode::from(2);
                    }
                };
            }
            "--out" => out = it.next().map(PathBuf::from),
            "--breakdown" => breakdown = it.next().map(PathBuf::from),
            other if config.is_none() && !other.starts_with('-') => {
                config = Some(PathBuf::from(other));
            }
            other => {
                eprintln!("unexpected argument `{other}`\n\n{USAGE}");
                return ExitCode::from(2);
            }
        }
    }
    let Some(config) = config else {
        eprintln!("missing config file path\n\n{USAGE}");
        return ExitCode::from(2);
    };
    let spec = match load_spec(&config, &[]) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let topo = generate_drop(&spec.cfg, drop_index);
    let text = dump_drop(&topo);
    if let Some(path) = &out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    } else {
        print!("{text}");
    }

    if let Some(path) = &breakdown {
        let ch = build_channels(&topo, &spec.cfg, drop_index);
        let order = sic_order(&ch, &topo);
        let res = evaluate_scheme(&ch, &topo, spec.cfg.scheme, &spec.cfg);
        if !res.feasible {
            eprintln!("error: drop {drop_index} infeasible; no breakdown written");
            return ExitCode::from(3);
        }
        let model = SinrModel::build(&ch, &topo, &order, spec.cfg.scheme, &spec.cfg);
        match model.breakdown(&res.p) {
            Ok(rows) => {
                if let Err(e) = std::fs::write(path, breakdown_csv(&rows)) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            Err(e) => {
                eprintln!("error: solver point rejected by the model: {e}");
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::SUCCESS
}
