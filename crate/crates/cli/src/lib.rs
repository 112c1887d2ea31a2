//! Command-line front end: `estimate`, `simulate` and `evaluate`.
//!
//! Exit codes: 1 for unreadable or malformed input files, 2 for an invalid
//! configuration or scene, 3 when the recording does not match the array.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sspiv::evaluation::{
    format_table, match_sources, read_estimates_file, read_truth_file, write_estimates_csv, write_report_csv,
    ElevationConvention,
};
use sspiv::geometry::load_geometry;
use sspiv::harmonics::ShOrder;
use sspiv::signal::{read_wav, write_wav};
use sspiv::simulator::{simulate, SceneSpec};
use sspiv::{ArrayGeometry, Error, Pipeline, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "sspiv", version, about = "Direction-of-arrival estimation for spherical microphone arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate source directions from a multichannel WAV recording.
    Estimate(EstimateArgs),
    /// Render a scene description to a multichannel WAV and a truth CSV.
    Simulate(SimulateArgs),
    /// Score an estimates CSV against a truth CSV.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input recording, one channel per sensor.
    #[arg(required_unless_present = "print_config")]
    pub wav: Option<PathBuf>,
    /// Output estimates CSV; standard output when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Configuration file (TOML); omitted keys take their defaults.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Array geometry JSON, overriding the configuration file.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Report only the largest peak.
    #[arg(long)]
    pub single_source: bool,
    /// Worker threads; all cores by default.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write `<PREFIX>.csv` and `<PREFIX>.pgm` histogram dumps.
    #[arg(long, value_name = "PREFIX")]
    pub dump_histogram: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    #[arg(long, default_value = "elevation")]
    pub elevation_convention: ElevationConvention,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene description (TOML).
    pub scene: PathBuf,
    /// Output WAV.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Truth CSV; defaults to the output path with a `.truth.csv` suffix.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Array geometry JSON; the bundled 32-sensor array when absent.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// SH order of the synthesized sound field.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "elevation")]
    pub elevation_convention: ElevationConvention,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub estimates: PathBuf,
    pub truth: PathBuf,
    /// Write the per-source report as CSV.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Row label; the truth file stem by default.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value_t = sspiv::evaluation::DEFAULT_GATE_DEG)]
    pub gate_deg: f64,
    #[arg(long, default_value = "elevation")]
    pub elevation_convention: ElevationConvention,
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::ChannelMismatch { .. } => 3,
            Error::Parse { what, .. } if *what == "truth CSV" => 1,
            Error::Io { .. } | Error::Wav(_) | Error::Csv(_) | Error::SignalTooShort { .. } | Error::EigenFailure => 1,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Runs a parsed command, writing normal output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Estimate(args) => estimate(args, stdout),
        Command::Simulate(args) => simulate_cmd(args),
        Command::Evaluate(args) => evaluate(args, stdout),
    }
}

/// Defaults, then the file, then flags.
pub fn effective_config(args: &EstimateArgs) -> CliResult<PipelineConfig> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if args.single_source {
        config.single_source_mode = true;
    }
    if let Some(g) = &args.geometry {
        config.geometry = Some(g.clone());
    }
    config.validate()?;
    Ok(config)
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T>
where
    T: Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError {
            code: 2,
            message: "--threads must be at least 1".into(),
        }),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError {
                code: 2,
                message: e.to_string(),
            })?;
            Ok(pool.install(f))
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn estimate(args: EstimateArgs, stdout: &mut dyn Write) -> CliResult {
    let config = effective_config(&args)?;
    if args.print_config {
        stdout.write_all(config.to_toml().as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e))?;
        return Ok(());
    }
    let wav = args.wav.as_ref().expect("clap requires wav");
    let pipeline = Pipeline::from_config(config)?;
    let signal = read_wav(wav)?;
    let output = with_threads(args.threads, || pipeline.run(&signal))??;

    let records = output.records(args.elevation_convention);
    match &args.out {
        Some(path) => {
            let mut f = create(path)?;
            write_estimates_csv(&mut f, &records)?;
            f.flush().map_err(|e| io_error(path, e))?;
        }
        None => write_estimates_csv(&mut *stdout, &records)?,
    }
    if let Some(prefix) = &args.dump_histogram {
        let csv_path = suffixed(prefix, ".csv");
        let mut f = create(&csv_path)?;
        sspiv::doamap::write_histogram_csv(&mut f, &output.histogram, &output.smoothed)?;
        f.flush().map_err(|e| io_error(&csv_path, e))?;
        let pgm_path = suffixed(prefix, ".pgm");
        let mut f = create(&pgm_path)?;
        sspiv::doamap::write_pgm(&mut f, &output.smoothed)?;
        f.flush().map_err(|e| io_error(&pgm_path, e))?;
    }
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn truth_path(out: &Path) -> PathBuf {
    suffixed(&out.with_extension(""), ".truth.csv")
}

fn simulate_cmd(args: SimulateArgs) -> CliResult {
    let scene = SceneSpec::load(&args.scene)?;
    let order = ShOrder::new(args.order);
    let geometry = match &args.geometry {
        Some(path) => load_geometry(path, order)?,
        None => ArrayGeometry::reference(order)?,
    };
    let sim = with_threads(args.threads, || simulate(&scene, &geometry, order))??;
    write_wav(&args.out, &sim.signal)?;
    let truth = args.truth.clone().unwrap_or_else(|| truth_path(&args.out));
    let mut f = create(&truth)?;
    sim.write_truth(&mut f, args.elevation_convention)?;
    f.flush().map_err(|e| io_error(&truth, e))?;
    Ok(())
}

fn evaluate(args: EvaluateArgs, stdout: &mut dyn Write) -> CliResult {
    let conv = args.elevation_convention;
    let estimates = read_estimates_file(&args.estimates)?;
    let truth = read_truth_file(&args.truth, conv).map_err(|e| CliError {
        code: 1,
        message: e.to_string(),
    })?;
    let directions = estimates
        .iter()
        .map(|r| conv.direction(r.az_deg, r.el_deg))
        .collect::<sspiv::Result<Vec<_>>>()
        .map_err(|e| CliError {
            code: 1,
            message: format!("{}: {e}", args.estimates.display()),
        })?;
    if !(args.gate_deg > 0.0) {
        return Err(CliError {
            code: 2,
            message: "--gate-deg must be positive".into(),
        });
    }
    let report = match_sources(&directions, &truth, args.gate_deg);
    let label = args.label.clone().unwrap_or_else(|| {
        args.truth
            .file_stem()
            .map(|s| s.to_string_lossy().trim_end_matches(".truth").to_string())
            .unwrap_or_default()
    });
    let reports = [(label, report)];
    stdout
        .write_all(format_table(&reports).as_bytes())
        .map_err(|e| io_error(Path::new("<stdout>"), e))?;
    if let Some(path) = &args.out {
        let mut f = create(path)?;
        write_report_csv(&mut f, &reports)?;
        f.flush().map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> EstimateArgs {
        let cli = Cli::try_parse_from(std::iter::once("sspiv").chain(args.iter().copied())).unwrap();
        match cli.command {
            Command::Estimate(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_without_file_or_flags() {
        assert_eq!(effective_config(&parse(&["estimate", "x.wav"])).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn file_overrides_defaults_and_flag_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "beta = 3.0\ngeometry = \"from-file.json\"\n").unwrap();
        let p = path.to_str().unwrap();

        let cfg = effective_config(&parse(&["estimate", "x.wav", "--config", p])).unwrap();
        assert_eq!(cfg.beta, 3.0);
        assert_eq!(cfg.geometry, Some("from-file.json".into()));
        assert!(!cfg.single_source_mode);

        let cfg = effective_config(&parse(&["estimate", "x.wav", "--config", p, "--geometry", "flag.json", "--single-source"]))
            .unwrap();
        assert_eq!(cfg.beta, 3.0);
        assert_eq!(cfg.geometry, Some("flag.json".into()));
        assert!(cfg.single_source_mode);
    }

    #[test]
    fn error_codes() {
        let e: CliError = Error::ChannelMismatch { signal: 31, sensors: 32 }.into();
        assert_eq!(e.code, 3);
        let e: CliError = Error::InvalidParameter("x".into()).into();
        assert_eq!(e.code, 2);
        let e: CliError = Error::Io {
            path: "a".into(),
            source: std::io::Error::other("b"),
        }
        .into();
        assert_eq!(e.code, 1);
    }

    #[test]
    fn truth_sidecar_name() {
        assert_eq!(truth_path(Path::new("out/scene.wav")), PathBuf::from("out/scene.truth.csv"));
        assert_eq!(truth_path(Path::new("scene")), PathBuf::from("scene.truth.csv"));
    }
}
