use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use convexot::cdt::cdt_forward;
use convexot::experiments::{run_experiment, ExperimentKind, ExperimentSpec};
use convexot::io::{read_signal, write_tmap1d};
use convexot::verify::{run_suite, SUITES};
use convexot::Signal1D;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "convexot", version, about = "Transport transforms and convexity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transport map of a signal file against a reference.
    Cdt {
        #[arg(long)]
        input: PathBuf,
        /// Signal file, or `uniform` for the uniform density on the input grid.
        #[arg(long, default_value = "uniform")]
        reference: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a named property suite and prints its CSV report.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the CSVs of a named experiment into a directory.
    Experiment {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "CONVEXOT_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid_n: Option<usize>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] convexot::Error),
    #[error("suite {0} failed")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use convexot::Error as E;
        match self {
            Self::Failed(_) => 1,
            Self::Core(E::BadReference) => 3,
            Self::Core(
                E::Format { .. }
                | E::Config(_)
                | E::InvalidGrid(_)
                | E::LengthMismatch { .. }
                | E::AllZero
                | E::NegativeMass { .. }
                | E::NonFinite(_),
            ) => 2,
            Self::Core(_) => 1,
            Self::Usage(_) | Self::Io { .. } => 2,
        }
    }
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_digest: String,
    seed: Option<u64>,
    version: &'static str,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    files: Vec<FileEntry>,
}

impl RunManifest {
    fn new(command: &str, config: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config_digest: sha256_hex(config.as_bytes()),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            files: Vec::new(),
        }
    }

    fn record(&mut self, name: &str, contents: &str) {
        self.files.push(FileEntry { name: name.into(), sha256: sha256_hex(contents.as_bytes()) });
    }

    fn finish(mut self) -> String {
        self.finished_unix_ms = now_ms();
        serde_json::to_string_pretty(&self).expect("manifest serializes") + "\n"
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Writes through a sibling temp file and renames it into place.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.into(), source };
    let name = path.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(contents.as_bytes())?;
        f.sync_all()
    });
    if let Err(e) = result.and_then(|()| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(io(e));
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_cdt(input: &Path, reference: &str, out: &Path) -> Result<(), CliError> {
    let p = read_signal(&read(input)?)?;
    let r = if reference == "uniform" { Signal1D::uniform(*p.grid()) } else { read_signal(&read(Path::new(reference))?)? };
    let config = serde_json::json!({ "input": input, "reference": reference }).to_string();
    let mut manifest = RunManifest::new("cdt", &config, None);
    let text = write_tmap1d(&cdt_forward(&p, &r)?);
    write_atomic(out, &text)?;
    manifest.record(&out.to_string_lossy(), &text);
    write_atomic(&manifest_path(out), &manifest.finish())
}

fn cmd_verify(suite: &str, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    if !SUITES.contains(&suite) {
        return Err(CliError::Usage(format!("unknown suite {suite:?}; expected one of {}", SUITES.join(", "))));
    }
    let config = serde_json::json!({ "suite": suite, "seed": seed }).to_string();
    let mut manifest = RunManifest::new("verify", &config, Some(seed));
    let report = run_suite(suite, seed)?;
    let csv = report.to_csv();
    match out {
        Some(path) => {
            write_atomic(path, &csv)?;
            manifest.record(&path.to_string_lossy(), &csv);
            write_atomic(&manifest_path(path), &manifest.finish())?;
        }
        None => {
            print!("{csv}");
            eprint!("{}", manifest.finish());
        }
    }
    if report.passed() {
        Ok(())
    } else {
        let failures = report.failures();
        eprintln!("{}", serde_json::to_string(&failures).expect("rows serialize"));
        Err(CliError::Failed(suite.into()))
    }
}

fn cmd_experiment(
    name: &str,
    config: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
    grid_n: Option<usize>,
) -> Result<(), CliError> {
    let kind: ExperimentKind = name.parse().map_err(|_| {
        let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Usage(format!("unknown experiment {name:?}; expected one of {}", names.join(", ")))
    })?;
    let out = out.ok_or_else(|| CliError::Usage("no output directory: pass --out or set CONVEXOT_OUT_DIR".into()))?;
    if !out.is_dir() {
        return Err(CliError::Usage(format!("output directory {} does not exist", out.display())));
    }
    let mut spec = match config {
        Some(path) => ExperimentSpec::from_json(kind, &read(path)?)?,
        None => ExperimentSpec::default_for(kind),
    };
    if let Some(s) = seed {
        spec.set_seed(s);
    }
    if let Some(n) = grid_n {
        spec.set_grid_n(n);
    }
    let resolved = spec.to_json()?;
    let mut manifest = RunManifest::new(&format!("experiment {name}"), &resolved, spec.seed());
    let output = run_experiment(&spec)?;
    for (file, contents) in &output.files {
        write_atomic(&out.join(file), contents)?;
        manifest.record(file, contents);
    }
    write_atomic(&out.join("config.json"), &(resolved.clone() + "\n"))?;
    write_atomic(&out.join("manifest.json"), &manifest.finish())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cdt { input, reference, out } => cmd_cdt(input, reference, out),
        Command::Verify { suite, seed, out } => cmd_verify(suite, *seed, out.as_deref()),
        Command::Experiment { name, config, out, seed, grid_n } => {
            cmd_experiment(name, config.as_deref(), out.as_deref(), *seed, *grid_n)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
