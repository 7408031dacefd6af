use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use osc_core::app::{self, AppError, ReportDocument, RunOptions, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "osc", version, about = "Positivity, first-zero and oscillation analysis of g'' + K g = 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected criteria and the oracle, then cross-validate.
    Analyze(Common),
    /// Compactness certificate for a radial curvature profile.
    Certify(Common),
    /// Critical-curve table as CSV.
    Curve(Common),
    /// Oracle run only.
    Oracle(Common),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    spec: PathBuf,
    /// Oracle horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Oracle relative tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Ladder depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn configure_threads() {
    if let Some(n) = std::env::var("OSC_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), AppError> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| AppError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(body.as_bytes()).map_err(|e| AppError::Io(e.to_string())),
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn run(cli: Cli) -> Result<i32, AppError> {
    let (kind, c) = match cli.command {
        Command::Analyze(c) => ("analyze", c),
        Command::Certify(c) => ("certify", c),
        Command::Curve(c) => ("curve", c),
        Command::Oracle(c) => ("oracle", c),
    };
    let source = fs::read_to_string(&c.spec).map_err(|e| AppError::Io(format!("{}: {e}", c.spec.display())))?;
    let opts = RunOptions { horizon: c.horizon, tolerance: c.tolerance, depth: c.depth, timestamp: !c.no_timestamp };
    if kind == "curve" {
        emit(c.out.as_deref(), &app::run_curve(&source, &opts)?)?;
        return Ok(app::EXIT_OK);
    }
    let doc: ReportDocument = match kind {
        "analyze" => app::run_analyze(&source, &opts)?,
        "certify" => app::run_certify(&source, &opts)?,
        _ => app::run_oracle(&source, &opts)?,
    };
    let output = &doc.reproducibility.effective_spec.output;
    let format = c.format.unwrap_or(match output.format.as_deref() {
        Some("text") => Format::Text,
        _ => Format::Json,
    });
    let body = if format == Format::Json { doc.to_json() } else { doc.to_text() };
    let out = c.out.clone().or_else(|| output.report.as_deref().map(|p| resolve(&c.spec, p)));
    emit(out.as_deref(), &body)?;
    if let (Some(path), Some(csv)) = (output.trajectory_csv.as_deref(), &doc.trajectory_csv) {
        let path = resolve(&c.spec, path);
        fs::write(&path, csv).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(doc.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    configure_threads();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(app::error_exit_code(&e).max(EXIT_USAGE) as u8)
        }
    }
}
