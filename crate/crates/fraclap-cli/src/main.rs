use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fraclap_cli::{
    parse_point, run, CliError, ExperimentConfig, Format, Mode, Report, BUILD_VERSION,
};

/// Extension, fractional-Laplacian, and consistency computations over a
/// parameterized boundary-function registry.
#[derive(Parser, Debug)]
#[command(name = "fraclap", version = BUILD_VERSION)]
struct Cli {
    /// extend-quad | extend-mc | extend-path | pv | trace | consistency | validate
    mode: String,
    /// JSON config file ('-' reads stdin); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fractional order in (0, 1).
    #[arg(long)]
    s: Option<f64>,
    /// Ambient dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Point, comma-separated: x coordinates plus the height y for
    /// extension modes, x coordinates only for pv/trace/consistency.
    /// Repeatable.
    #[arg(long = "point")]
    points: Vec<String>,
    /// Registry expression: const:c=V | cos:xi=V | gauss | rational.
    #[arg(long)]
    function: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Root seed for all random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Euler-Maruyama base step for pathwise modes.
    #[arg(long)]
    dt: Option<f64>,
    /// Quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Report destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// json (default) or csv.
    #[arg(long)]
    format: Option<String>,
    /// validate mode: run the cheaper variant of each check.
    #[arg(long)]
    quick: bool,
    /// validate mode: run checks at full sample counts.
    #[arg(long)]
    full: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap's own help/version output is not an error
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            let (kind, msg, code) = match &err {
                CliError::Config(m) => ("config", m, 1),
                CliError::Numerical(m) => ("numerical", m, 2),
            };
            // one human line plus one machine-readable error object
            eprintln!("fraclap: {kind} error: {msg}");
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": kind, "message": msg}})
            );
            ExitCode::from(code)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let mut config = load_config(&cli)?;
    apply_overrides(&mut config, &cli)?;
    config.validate()?;

    let report = run(&config)?;

    // validate mode prints one line per check
    let mut failed_checks = 0usize;
    if config.mode == Mode::Validate {
        for row in &report.results {
            let name = row.diagnostics["name"].as_str().unwrap_or("?");
            let detail = row.diagnostics["detail"].as_str().unwrap_or("");
            let ok = row.value == 1.0;
            if !ok {
                failed_checks += 1;
            }
            eprintln!("{} {name} — {detail}", if ok { "PASS" } else { "FAIL" });
        }
    }

    emit(&config, &report)?;

    if failed_checks > 0 {
        eprintln!("fraclap: {failed_checks} validation check(s) failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mode = Mode::parse(&cli.mode)?;
    match &cli.config {
        Some(path) => {
            let text = if path.as_os_str() == "-" {
                let mut buf = String::new();
                std::io::Read::read_to_string(&mut std::io::stdin(), &mut buf)
                    .map_err(|e| CliError::Config(format!("reading stdin: {e}")))?;
                buf
            } else {
                std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?
            };
            let mut cfg = ExperimentConfig::from_json(&text)?;
            cfg.mode = mode;
            Ok(cfg)
        }
        None => {
            // minimal skeleton; flags fill in the rest
            let base = serde_json::json!({"mode": cli.mode, "s": cli.s.unwrap_or(0.5)});
            ExperimentConfig::from_json(&base.to_string())
        }
    }
}

fn apply_overrides(config: &mut ExperimentConfig, cli: &Cli) -> Result<(), CliError> {
    if let Some(s) = cli.s {
        config.s = s;
    }
    if let Some(n) = cli.n {
        config.n = n;
    }
    if let Some(f) = &cli.function {
        config.function = f.clone();
    }
    if let Some(k) = cli.samples {
        config.n_samples = k;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dt) = cli.dt {
        config.dt = dt;
    }
    if let Some(tol) = cli.tol {
        config.tol = tol;
    }
    if !cli.points.is_empty() {
        config.points = cli
            .points
            .iter()
            .map(|p| parse_point(p))
            .collect::<Result<_, _>>()?;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    if let Some(fmt) = &cli.format {
        config.format = Some(match fmt.as_str() {
            "json" => Format::Json,
            "csv" => Format::Csv,
            other => {
                return Err(CliError::Config(format!(
                    "unknown format '{other}' (expected json or csv)"
                )))
            }
        });
    }
    if cli.quick {
        config.quick = true;
    }
    if cli.full {
        config.quick = false;
    }
    Ok(())
}

fn emit(config: &ExperimentConfig, report: &Report) -> Result<(), CliError> {
    let json_text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Numerical(format!("serializing report: {e}")))?;
    let csv = matches!(config.format, Some(Format::Csv));
    match &config.out {
        Some(path) => {
            if csv {
                write_file(path, &fraclap_cli::to_csv(report))?;
                // JSON sidecar keeps the full provenance next to the
                // plot-ready table.
                let mut sidecar = path.clone().into_os_string();
                sidecar.push(".json");
                write_file(&PathBuf::from(sidecar), &json_text)?;
            } else {
                write_file(path, &json_text)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let body = if csv {
                fraclap_cli::to_csv(report)
            } else {
                json_text
            };
            writeln!(stdout, "{body}")
                .map_err(|e| CliError::Numerical(format!("writing stdout: {e}")))?;
        }
    }
    Ok(())
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("writing {}: {e}", path.display())))
}
