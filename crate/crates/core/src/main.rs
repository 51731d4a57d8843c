use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lowlat::harness::{
    mix, reconstruction_error, run_experiment, default_matrix, wav_read, wav_write, write_desk_corpus,
    EnhancerKind, ExperimentMatrix, PipelineSpec, SampleFormat, WindowKind, DEFAULT_SNR_CHOICES_DB,
};
use lowlat::metrics::report;
use lowlat::windows::{to_csv, WindowPair};
use lowlat::StreamConfig;

/// Exit status when a latency audit disagrees with the declared latency.
const LATENCY_MISMATCH: u8 = 2;
const PR_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "lowlat", version, about = "Streaming low-latency speech enhancement toolkit")]
struct Cli {
    /// Stream configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pcm16,
    Float32,
}

impl From<Format> for SampleFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pcm16 => SampleFormat::Pcm16,
            Format::Float32 => SampleFormat::Float32,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Window {
    Sym,
    Asym,
    Learned,
}

#[derive(Clone, Copy, ValueEnum)]
enum Enhancer {
    Identity,
    Zero,
    OracleWiener,
    OracleDeepFilter,
    WienerMapping,
    CleanLookahead,
    WienerLookahead,
}

impl From<Enhancer> for EnhancerKind {
    fn from(e: Enhancer) -> Self {
        match e {
            Enhancer::Identity => EnhancerKind::Identity,
            Enhancer::Zero => EnhancerKind::Zero,
            Enhancer::OracleWiener => EnhancerKind::OracleWiener,
            Enhancer::OracleDeepFilter => EnhancerKind::OracleDeepFilter,
            Enhancer::WienerMapping => EnhancerKind::WienerMapping,
            Enhancer::CleanLookahead => EnhancerKind::CleanLookahead,
            Enhancer::WienerLookahead => EnhancerKind::WienerLookahead,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enhance a noisy WAV file into <out>/enhanced.wav.
    Enhance {
        #[arg(long)]
        input: PathBuf,
        /// Clean reference, required by oracle enhancers.
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "identity")]
        enhancer: Enhancer,
        /// Defaults to sym or asym depending on the window lengths.
        #[arg(long, value_enum)]
        window: Option<Window>,
        #[arg(long, requires = "synthesis_basis")]
        analysis_basis: Option<PathBuf>,
        #[arg(long, requires = "analysis_basis")]
        synthesis_basis: Option<PathBuf>,
        #[arg(long)]
        rectify: bool,
        #[arg(long, value_enum, default_value = "float32")]
        format: Format,
    },
    /// Mix speech and noise at an SNR into <out>/mixture.wav and <out>/noise.wav.
    Mix {
        #[arg(long)]
        speech: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        /// Drawn from {0, 5, 10, 15} dB with the seed when absent.
        #[arg(long, allow_negative_numbers = true)]
        snr_db: Option<f64>,
        #[arg(long, value_enum, default_value = "float32")]
        format: Format,
    },
    /// Check identity reconstruction of the configured pipeline on white noise.
    PrCheck {
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
    },
    /// Compare declared and measured latency of the configured geometry.
    AuditLatency,
    /// Score an estimate against a reference.
    Metrics {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Run an experiment matrix over a paired clean/noise corpus.
    RunExperiment {
        /// Matrix JSON; the built-in comparison matrix when absent.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Write the configured analysis and synthesis windows as CSV.
    MakeWindows,
    /// Write a synthetic paired corpus into <out>.
    MakeCorpus {
        #[arg(long, default_value_t = 20)]
        files: usize,
        #[arg(long, default_value_t = 4.0)]
        seconds: f64,
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
    },
    /// Print the built-in experiment matrix as JSON.
    MakeMatrix {
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
    },
}

fn load_config(path: Option<&Path>) -> Result<StreamConfig> {
    let path = path.context("--config <json> is required for this command")?;
    StreamConfig::from_json_file(path).with_context(|| format!("reading {}", path.display()))
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Enhance {
            input,
            clean,
            enhancer,
            window,
            analysis_basis,
            synthesis_basis,
            rectify,
            format,
        } => {
            let config = load_config(config_path)?;
            let mut spec = PipelineSpec::inferred(config, enhancer.into());
            if let Some(w) = window {
                spec.window = Some(match w {
                    Window::Sym => WindowKind::Sym,
                    Window::Asym => WindowKind::Asym,
                    Window::Learned => WindowKind::Learned,
                });
            }
            spec.basis_files = analysis_basis.zip(synthesis_basis);
            spec.rectify = rectify;
            let noisy = wav_read(&input)?;
            let clean = clean.map(|p| wav_read(&p)).transpose()?;
            let out = spec.run(&noisy, clean.as_ref())?;
            fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("enhanced.wav");
            wav_write(&path, &out, format.into())?;
            println!("{}", path.display());
        }
        Command::Mix {
            speech,
            noise,
            snr_db,
            format,
        } => {
            let snr_db = snr_db.unwrap_or_else(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                DEFAULT_SNR_CHOICES_DB[rng.random_range(0..DEFAULT_SNR_CHOICES_DB.len())]
            });
            let (mixture, scaled) = mix(&wav_read(&speech)?, &wav_read(&noise)?, snr_db)?;
            fs::create_dir_all(&cli.out)?;
            wav_write(&cli.out.join("mixture.wav"), &mixture, format.into())?;
            wav_write(&cli.out.join("noise.wav"), &scaled, format.into())?;
            println!("snr_db={snr_db}");
        }
        Command::PrCheck { seconds } => {
            let config = load_config(config_path)?;
            let error = reconstruction_error(&config, seconds, cli.seed)?;
            let pass = error <= PR_TOLERANCE;
            let json = serde_json::json!({
                "config": config.to_document(),
                "max_relative_error": error,
                "tolerance": PR_TOLERANCE,
                "pass": pass,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            if !pass {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::AuditLatency => {
            let config = load_config(config_path)?;
            let audit = PipelineSpec::inferred(config, EnhancerKind::Identity).audit()?;
            let json = audit.to_json();
            println!("{json}");
            write_output(&cli.out, "latency_audit.json", &json)?;
            if !audit.matched {
                return Ok(ExitCode::from(LATENCY_MISMATCH));
            }
        }
        Command::Metrics {
            estimate,
            reference,
        } => {
            let est = wav_read(&estimate)?;
            let reference_signal = wav_read(&reference)?;
            if est.sample_rate != reference_signal.sample_rate {
                bail!("sample rates differ");
            }
            let config = match config_path {
                Some(p) => StreamConfig::from_json_file(p)?,
                None => {
                    let w = 2 * (reference_signal.sample_rate as usize / 100);
                    StreamConfig::symmetric(reference_signal.sample_rate, w, w)
                }
            };
            let id = estimate
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let r = report(&id, &est.samples, &reference_signal.samples, &config)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::RunExperiment { matrix, corpus } => {
            let matrix = match matrix {
                Some(p) => ExperimentMatrix::from_json_file(&p)?,
                None => default_matrix(16_000),
            };
            let report = run_experiment(&matrix, &corpus, &cli.out, cli.seed)?;
            print!("{}", report.summary_csv());
            for s in &report.skipped {
                eprintln!("skipped: {s}");
            }
            if !report.latency_ok() {
                eprintln!("latency audit mismatch");
                return Ok(ExitCode::from(LATENCY_MISMATCH));
            }
        }
        Command::MakeWindows => {
            let config = load_config(config_path)?;
            let pair = WindowPair::for_config(&config)?;
            write_output(&cli.out, "analysis.csv", &to_csv(&pair.analysis))?;
            write_output(&cli.out, "synthesis.csv", &to_csv(&pair.synthesis))?;
            println!("{}", cli.out.display());
        }
        Command::MakeCorpus {
            files,
            seconds,
            sample_rate,
        } => {
            let pairs = write_desk_corpus(&cli.out, files, seconds, sample_rate, cli.seed)?;
            println!("{} pairs in {}", pairs.len(), cli.out.display());
        }
        Command::MakeMatrix { sample_rate } => {
            if sample_rate % 2000 != 0 {
                bail!("sample rate must be a multiple of 2000 Hz");
            }
            println!("{}", default_matrix(sample_rate).to_json());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
