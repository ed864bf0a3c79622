//! Command-line front end: read a problem description from JSON, compute
//! the requested tracking-performance limits, and emit a JSON report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use tracklim::job::{export_certificate_csv, run, JobConfig, JobOutcome};
use tracklim::setup::Criterion;

#[derive(Parser)]
#[command(
    name = "tracklim",
    about = "Fundamental time-domain tracking-performance limits for SISO feedback loops",
    version
)]
struct Cli {
    /// Problem description (JSON).
    config: PathBuf,
    /// Comma-separated subset to compute (ma,pos,os,us,fl); overrides the file.
    #[arg(long, value_name = "LIST")]
    criteria: Option<String>,
    /// Skip the primal construction; report certificate bounds only.
    #[arg(long)]
    no_primal: bool,
    /// Drop modes decaying faster than the slowest real one (os/us only).
    #[arg(long)]
    gamma_reduce: bool,
    /// Relative convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write per-criterion certificate samples as CSV.
    #[arg(long, value_name = "PATH")]
    export_cert: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    json_out: Option<PathBuf>,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn cert_path(base: &std::path::Path, crit: Criterion, multiple: bool) -> PathBuf {
    if !multiple {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("certificate");
    let name = match base.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}_{crit}.{ext}"),
        None => format!("{stem}_{crit}"),
    };
    base.with_file_name(name)
}

fn emit(cli: &Cli, outcome: &JobOutcome) -> Result<(), (u8, String)> {
    let json = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| (EXIT_SOLVER, format!("report serialization failed: {e}")))?;
    match &cli.json_out {
        Some(path) => {
            std::fs::write(path, json.as_bytes())
                .map_err(|e| (EXIT_VALIDATION, format!("cannot write {}: {e}", path.display())))?;
            for c in &outcome.report.criteria {
                let status = match (&c.error, c.dual_value) {
                    (Some(err), _) => format!("failed: {err}"),
                    (None, Some(v)) => match c.primal_value {
                        Some(p) => format!("dual {v:.9} primal {p:.9}"),
                        None => format!("dual {v:.9}"),
                    },
                    (None, None) => "no value".into(),
                };
                println!("{}: {status}", c.criterion);
            }
        }
        None => println!("{json}"),
    }
    if let Some(base) = &cli.export_cert {
        let multiple = outcome.artifacts.len() > 1;
        for art in &outcome.artifacts {
            let path = cert_path(base, art.criterion, multiple);
            export_certificate_csv(art, &path)
                .map_err(|e| (EXIT_VALIDATION, format!("cannot write {}: {e}", path.display())))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let mut config: JobConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };

    if let Some(list) = &cli.criteria {
        let mut chosen = Vec::new();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match Criterion::parse(name) {
                Ok(c) => chosen.push(c),
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_VALIDATION);
                }
            }
        }
        config.criteria = chosen;
    }
    if cli.no_primal {
        config.skip_primal = true;
    }
    if cli.gamma_reduce {
        config.gamma_reduce = true;
    }
    if let Some(tol) = cli.tol {
        config.options.tol = tol;
    }

    let outcome = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            let code = if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_SOLVER
            };
            return ExitCode::from(code);
        }
    };

    if let Err((code, msg)) = emit(&cli, &outcome) {
        eprintln!("{msg}");
        return ExitCode::from(code);
    }

    if outcome.all_verified() {
        ExitCode::SUCCESS
    } else {
        for c in outcome.report.criteria.iter().filter(|c| c.error.is_some()) {
            eprintln!("{}: {}", c.criterion, c.error.as_deref().unwrap_or(""));
        }
        ExitCode::from(EXIT_SOLVER)
    }
}
