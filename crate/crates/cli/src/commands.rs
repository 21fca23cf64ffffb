//! Argument parsing and the four subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use moment_extend::extend::{run_chain_with, ChainOptions, Verdict};
use moment_extend::measure::{
    extract_atoms, multiplication_matrices, solve_densities, verify_measure, AtomicMeasure, MeasureError, DEFAULT_TOL,
};
use moment_extend::moment::{moments_from_atoms, MomentError};
use moment_extend::{build_moment_matrix, MomentMatrix, Rat, RationalAtomicMeasure};

use crate::problem::{parse_rational, ProblemFile};
use crate::report::{
    analyze, chain_section, measure_section, not_applicable_section, verdict_section, MeasureSection, ReportFile,
    StageError, Timing,
};

/// Exit status for usage, input and I/O errors.
pub const EXIT_USAGE: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "moment-extend", version, about = "Exact flat-extension solver for bivariate truncated moment problems")]
pub struct Cli {
    /// Zero the timing fields so reports are byte-for-byte reproducible.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Positivity, rank, recursiveness and determinacy of M_d.
    Analyze { file: PathBuf },
    /// Run the extension chain. Exit 0: measure exists, 2: no measure,
    /// 3: not applicable or bound exhausted.
    Chain {
        file: PathBuf,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Run the chain and extract the representing measure.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        chain: ChainArgs,
        /// Tolerance of the floating-point measure stage.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Write `x y weight` lines for the atoms to PATH.
        #[arg(long, value_name = "PATH")]
        emit_plot: Option<PathBuf>,
    },
    /// Write the exact moments of an atomic measure.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Args, Debug, Default)]
pub struct ChainArgs {
    /// Maximum number of extension steps (default: the band bound).
    #[arg(long)]
    pub max_steps: Option<u32>,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Product grid `xs × ys`.
    Grid {
        /// Comma-separated x nodes.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        xs: Vec<String>,
        /// Comma-separated y nodes.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        ys: Vec<String>,
        /// Weights with y varying fastest; one value gives a uniform grid.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        weights: Vec<String>,
        /// Total degree 2d of the moment sequence.
        #[arg(long)]
        degree: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Explicit atoms, each `x,y` or `x,y,weight` (weight defaults to 1).
    Atoms {
        #[arg(long = "atom", required = true, allow_hyphen_values = true)]
        atoms: Vec<String>,
        #[arg(long)]
        degree: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// What a command produced: text for stdout and the exit status.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn load(path: &Path) -> Result<MomentMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let file = ProblemFile::parse(&text).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let beta = file.sequence().map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    debug!("read {} moments of degree {}", file.moments.len(), file.degree);
    build_moment_matrix(&beta, beta.half_degree()).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn render(report: &ReportFile, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    }
}

/// Runs the measure stage on a flat matrix, keeping the name of the stage
/// that failed.
fn measure_stage(flat: &MomentMatrix, tol: f64) -> Result<AtomicMeasure, StageError> {
    let stage = |name: &str, e: MeasureError| StageError {
        stage: name.to_string(),
        message: e.to_string(),
    };
    let mm = multiplication_matrices(flat).map_err(|e| stage("multiplication_matrices", e))?;
    let atoms = extract_atoms(&mm, tol).map_err(|e| stage("atoms", e))?;
    let (weights, residuals) = solve_densities(&atoms, flat.moments(), tol).map_err(|e| stage("densities", e))?;
    Ok(AtomicMeasure {
        atoms,
        weights,
        residuals,
    })
}

fn plot_lines(m: &MeasureSection) -> String {
    m.atoms
        .iter()
        .map(|a| format!("{} {} {}\n", a.x, a.y, a.weight))
        .collect()
}

fn run_problem(
    name: &str,
    file: &Path,
    chain: Option<&ChainArgs>,
    solve: Option<(f64, Option<&Path>)>,
) -> Result<(ReportFile, i32), CliError> {
    let m = load(file)?;
    let t = Instant::now();
    let analysis = analyze(&m);
    let mut timing = Timing {
        analysis: elapsed_ms(t),
        ..Timing::default()
    };
    info!("M_{}: rank {} class {}", m.degree(), analysis.rank, analysis.classification);
    let mut report = ReportFile {
        schema_version: crate::report::SCHEMA_VERSION,
        command: name.to_string(),
        analysis,
        chain: None,
        verdict: None,
        measure: None,
        timing_ms: Timing::default(),
    };
    let Some(args) = chain else {
        report.timing_ms = timing;
        return Ok((report, 0));
    };
    let opts = ChainOptions {
        max_steps: args.max_steps,
        skip_variety: false,
    };
    let t = Instant::now();
    let result = run_chain_with(&m, &opts);
    timing.chain = elapsed_ms(t);
    let chain_report = match result {
        Ok(r) => r,
        Err(e) => {
            info!("not applicable: {e}");
            let v = not_applicable_section(&e);
            let code = v.exit_code();
            report.verdict = Some(v);
            report.timing_ms = timing;
            return Ok((report, code));
        }
    };
    report.chain = Some(chain_section(&chain_report));
    let verdict = verdict_section(&chain_report.verdict);
    let code = verdict.exit_code();
    report.verdict = Some(verdict);
    if let (Some((tol, plot)), Verdict::MeasureExists { flat_degree }, Some(flat)) =
        (solve, &chain_report.verdict, &chain_report.flat_matrix)
    {
        let t = Instant::now();
        let section = match measure_stage(flat, tol) {
            Ok(mu) => {
                let verify = verify_measure(&mu, flat, &chain_report.profile, tol);
                measure_section(*flat_degree, &mu, Some(&verify))
            }
            Err(err) => {
                log::warn!("measure extraction failed in stage {}: {}", err.stage, err.message);
                MeasureSection {
                    flat_degree: *flat_degree,
                    atoms: Vec::new(),
                    max_moment_residual: f64::NAN,
                    verification: None,
                    error: Some(err),
                }
            }
        };
        timing.measure = elapsed_ms(t);
        if let Some(path) = plot {
            fs::write(path, plot_lines(&section)).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
        }
        report.measure = Some(section);
    }
    report.timing_ms = timing;
    Ok((report, code))
}

fn rationals(values: &[String], what: &str) -> Result<Vec<Rat>, CliError> {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| parse_rational(v).map_err(|e| CliError(format!("{what}[{k}]: {e}"))))
        .collect()
}

fn gen_measure(kind: &GenKind) -> Result<RationalAtomicMeasure, CliError> {
    let moment_err = |e: MomentError| CliError(e.to_string());
    match kind {
        GenKind::Grid { xs, ys, weights, .. } => {
            let (xs, ys) = (rationals(xs, "xs")?, rationals(ys, "ys")?);
            let ws = rationals(weights, "weights")?;
            if ws.len() == 1 {
                RationalAtomicMeasure::uniform_grid(&xs, &ys, ws[0].clone()).map_err(moment_err)
            } else {
                RationalAtomicMeasure::grid(&xs, &ys, &ws).map_err(moment_err)
            }
        }
        GenKind::Atoms { atoms, .. } => {
            let mut pts = Vec::with_capacity(atoms.len());
            let mut ws = Vec::with_capacity(atoms.len());
            for (k, a) in atoms.iter().enumerate() {
                let parts: Vec<String> = a.split(',').map(str::to_string).collect();
                if parts.len() != 2 && parts.len() != 3 {
                    return Err(CliError(format!("atom[{k}]: expected x,y or x,y,weight, got '{a}'")));
                }
                let v = rationals(&parts, &format!("atom[{k}]"))?;
                pts.push((v[0].clone(), v[1].clone()));
                ws.push(v.get(2).cloned().unwrap_or_else(|| Rat::from_integer(1.into())));
            }
            RationalAtomicMeasure::new(pts, ws).map_err(moment_err)
        }
    }
}

fn run_gen(kind: &GenKind) -> Result<Outcome, CliError> {
    let (degree, output) = match kind {
        GenKind::Grid { degree, output, .. } | GenKind::Atoms { degree, output, .. } => (*degree, output),
    };
    let mu = gen_measure(kind)?;
    let beta = moments_from_atoms(&mu, degree).map_err(|e| CliError(e.to_string()))?;
    let file = ProblemFile::from_sequence(&beta);
    fs::write(output, file.emit()).map_err(|e| CliError(format!("{}: {e}", output.display())))?;
    info!("wrote {} moments to {}", file.moments.len(), output.display());
    Ok(Outcome {
        stdout: String::new(),
        code: 0,
    })
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let (name, file, chain, solve) = match &cli.command {
        Command::Gen { kind } => return run_gen(kind),
        Command::Analyze { file } => ("analyze", file, None, None),
        Command::Chain { file, chain } => ("chain", file, Some(chain), None),
        Command::Solve {
            file,
            chain,
            tol,
            emit_plot,
        } => ("solve", file, Some(chain), Some((*tol, emit_plot.as_deref()))),
    };
    let (mut report, code) = run_problem(name, file, chain, solve)?;
    if cli.deterministic {
        report.timing_ms = Timing::zeroed();
    }
    Ok(Outcome {
        stdout: render(&report, cli.format),
        code,
    })
}
