//! Rows x files experiment runner producing a CSV report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::find_pairs;
use super::mix::mix;
use super::pipeline::{EnhancerKind, PipelineSpec, WindowKind};
use super::wav::wav_read;
use super::HarnessError;
use crate::audit::LatencyAudit;
use crate::config::{ConfigDocument, Millis, Mode, Signal, StreamConfig};
use crate::metrics::{log_spectral_distance, si_sdr, snr};

/// Stand-in SNR set; one value is drawn per file.
pub const DEFAULT_SNR_CHOICES_DB: [f64; 4] = [0.0, 5.0, 10.0, 15.0];

pub const CSV_HEADER: &str = "row,file,iWin_ms,oWin_ms,latency_ms_declared,latency_ms_measured,\
si_sdr_in,si_sdr_out,snr_out,lsd_out,macs_rel";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub row: String,
    /// Omitted for FBE rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowKind>,
    pub enhancer: EnhancerKind,
    pub config: ConfigDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_basis: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis_basis: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rectify: bool,
}

impl ExperimentRow {
    fn new(row: &str, window: Option<WindowKind>, enhancer: EnhancerKind, config: StreamConfig) -> Self {
        Self {
            row: row.into(),
            window,
            enhancer,
            config: config.to_document(),
            analysis_basis: None,
            synthesis_basis: None,
            rectify: false,
        }
    }

    pub fn spec(&self) -> Result<PipelineSpec, HarnessError> {
        let config = self.config.clone().into_config()?;
        let basis_files = match (&self.analysis_basis, &self.synthesis_basis) {
            (Some(a), Some(s)) => Some((a.clone(), s.clone())),
            (None, None) => None,
            _ => {
                return Err(HarnessError::Pipeline(format!(
                    "row {}: analysis and synthesis bases must be given together",
                    self.row
                )))
            }
        };
        let spec = PipelineSpec {
            config,
            window: self.window,
            enhancer: self.enhancer,
            basis_files,
            rectify: self.rectify,
        };
        spec.check()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMatrix {
    pub rows: Vec<ExperimentRow>,
    #[serde(default = "default_snrs")]
    pub snr_choices_db: Vec<f64>,
}

fn default_snrs() -> Vec<f64> {
    DEFAULT_SNR_CHOICES_DB.to_vec()
}

impl ExperimentMatrix {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    /// Same geometry with every row's enhancer replaced.
    pub fn with_enhancer(mut self, enhancer: EnhancerKind) -> Self {
        for r in &mut self.rows {
            r.enhancer = enhancer;
        }
        self
    }
}

/// Comparison geometry at 20 ms frames: symmetric (A), asymmetric (B),
/// learned asymmetric (C), mapping and prediction (G) and FBE (H) rows, all
/// with oracle enhancers. G2 predicts with the best-case lookahead oracle. `sample_rate` must be a
/// multiple of 2000 so every length is a whole number of samples.
pub fn default_matrix(sample_rate: u32) -> ExperimentMatrix {
    let ms = |m: f64| (m * f64::from(sample_rate) / 1000.0) as usize;
    let n = ms(20.0);
    let mut rows = Vec::new();
    for (i, w) in [20.0, 10.0, 5.0, 3.0].into_iter().enumerate() {
        let cfg = StreamConfig::symmetric(sample_rate, ms(w), n);
        rows.push(ExperimentRow::new(&format!("A{}", i + 1), Some(WindowKind::Sym), EnhancerKind::OracleWiener, cfg));
    }
    for (prefix, kind) in [("B", WindowKind::Asym), ("C", WindowKind::Learned)] {
        for (i, s) in [10.0, 5.0, 3.0].into_iter().enumerate() {
            let cfg = StreamConfig::asymmetric(sample_rate, n, ms(s), n);
            rows.push(ExperimentRow::new(&format!("{prefix}{}", i + 1), Some(kind), EnhancerKind::OracleWiener, cfg));
        }
    }
    let short = StreamConfig::asymmetric(sample_rate, n, ms(3.0), n);
    rows.push(ExperimentRow::new("G1", Some(WindowKind::Asym), EnhancerKind::WienerMapping, short));
    let predict = StreamConfig::symmetric(sample_rate, ms(6.0), n).with_mode(Mode::PredictAhead { frames: 1 });
    rows.push(ExperimentRow::new("G2", Some(WindowKind::Sym), EnhancerKind::WienerLookahead, predict));
    for (i, h) in [10.0, 5.0, 2.5].into_iter().enumerate() {
        let cfg = StreamConfig::fbe(sample_rate, ms(h), n);
        rows.push(ExperimentRow::new(&format!("H{}", i + 1), None, EnhancerKind::OracleWiener, cfg));
    }
    ExperimentMatrix {
        rows,
        snr_choices_db: default_snrs(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultLine {
    pub row: String,
    pub file: String,
    pub iwin_ms: Option<Millis>,
    pub owin_ms: Option<Millis>,
    pub declared_ms: Millis,
    pub measured_ms: Millis,
    pub si_sdr_in: f64,
    pub si_sdr_out: f64,
    pub snr_out: f64,
    pub lsd_out: f64,
    pub macs_rel: Ratio<u64>,
}

impl ResultLine {
    pub fn improvement(&self) -> f64 {
        self.si_sdr_out - self.si_sdr_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub lines: Vec<ResultLine>,
    /// Per-row latency audits in row order.
    pub audits: Vec<(String, LatencyAudit)>,
    pub skipped: Vec<String>,
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn opt_ms(m: Option<Millis>) -> String {
    m.map(|m| m.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn latency_ok(&self) -> bool {
        self.audits.iter().all(|(_, a)| a.matched)
    }

    pub fn row_lines<'a>(&'a self, row: &'a str) -> impl Iterator<Item = &'a ResultLine> + 'a {
        self.lines.iter().filter(move |l| l.row == row)
    }

    /// Mean SI-SDR improvement of a row, `None` if it has no lines.
    pub fn mean_improvement(&self, row: &str) -> Option<f64> {
        let values: Vec<f64> = self.row_lines(row).map(ResultLine::improvement).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for l in &self.lines {
            writeln!(
                s,
                "{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
                l.row,
                l.file,
                opt_ms(l.iwin_ms),
                opt_ms(l.owin_ms),
                l.declared_ms,
                l.measured_ms,
                l.si_sdr_in,
                l.si_sdr_out,
                l.snr_out,
                l.lsd_out,
                ratio_f64(l.macs_rel)
            )
            .expect("write to string");
        }
        s
    }

    /// One line per row with metric means over files.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "row,files,iWin_ms,oWin_ms,latency_ms_declared,latency_ms_measured,\
si_sdr_in,si_sdr_out,si_sdr_improvement,snr_out,lsd_out,macs_rel\n",
        );
        for (row, _) in &self.audits {
            let lines: Vec<&ResultLine> = self.row_lines(row).collect();
            let Some(first) = lines.first() else {
                continue;
            };
            let mean = |f: fn(&ResultLine) -> f64| lines.iter().map(|l| f(l)).sum::<f64>() / lines.len() as f64;
            writeln!(
                s,
                "{row},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                lines.len(),
                opt_ms(first.iwin_ms),
                opt_ms(first.owin_ms),
                first.declared_ms,
                first.measured_ms,
                mean(|l| l.si_sdr_in),
                mean(|l| l.si_sdr_out),
                mean(ResultLine::improvement),
                mean(|l| l.snr_out),
                mean(|l| l.lsd_out),
                ratio_f64(first.macs_rel)
            )
            .expect("write to string");
        }
        s
    }
}

struct Prepared {
    id: String,
    clean: Signal,
    mixture: Signal,
}

fn prepare(
    index: usize,
    pair: &super::CorpusPair,
    snrs: &[f64],
    seed: u64,
) -> Result<Prepared, HarnessError> {
    let clean = wav_read(&pair.clean)?;
    let noise = wav_read(&pair.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let snr_db = snrs[rng.random_range(0..snrs.len())];
    let (mixture, _) = mix(&clean, &noise, snr_db)?;
    Ok(Prepared {
        id: pair.id.clone(),
        clean,
        mixture,
    })
}

/// Fixed 20 ms geometry used for LSD so rows are comparable.
fn metric_config(sample_rate: u32) -> StreamConfig {
    let window = 2 * (sample_rate as usize / 100);
    StreamConfig::symmetric(sample_rate, window, window)
}

struct RowSetup {
    id: String,
    spec: PipelineSpec,
    audit: LatencyAudit,
}

/// Runs every row on every corpus file and writes `report.csv` and
/// `summary.csv` into `out_dir`.
///
/// Files that fail to load, mix or enhance are logged and skipped. Samples
/// within `max(L_a + P)` of either end are excluded from all metrics.
pub fn run_experiment(
    matrix: &ExperimentMatrix,
    corpus_dir: &Path,
    out_dir: &Path,
    seed: u64,
) -> Result<ExperimentReport, HarnessError> {
    if matrix.snr_choices_db.is_empty() {
        return Err(HarnessError::Pipeline("empty SNR choice list".into()));
    }
    let pairs = find_pairs(corpus_dir)?;
    let mut skipped = Vec::new();

    let rows: Vec<RowSetup> = matrix
        .rows
        .par_iter()
        .map(|r| {
            let spec = r.spec()?;
            let audit = spec.audit()?;
            Ok(RowSetup {
                id: r.row.clone(),
                spec,
                audit,
            })
        })
        .collect::<Vec<Result<RowSetup, HarnessError>>>()
        .into_iter()
        .zip(&matrix.rows)
        .filter_map(|(r, row)| match r {
            Ok(r) => Some(r),
            Err(e) => {
                log::error!("row {}: {e}", row.row);
                skipped.push(format!("row {}: {e}", row.row));
                None
            }
        })
        .collect();
    for r in &rows {
        if !r.audit.matched {
            log::error!(
                "row {}: declared latency {} samples, measured {}",
                r.id,
                r.audit.declared.total,
                r.audit.measured
            );
        }
    }

    let prepared: Vec<Prepared> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| prepare(i, p, &matrix.snr_choices_db, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .zip(&pairs)
        .filter_map(|(r, p)| match r {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("file {}: {e}", p.id);
                skipped.push(format!("file {}: {e}", p.id));
                None
            }
        })
        .collect();

    let trim = rows
        .iter()
        .map(|r| r.spec.config.analysis_len + r.spec.config.hop)
        .max()
        .unwrap_or(0);

    let jobs: Vec<(&RowSetup, &Prepared)> = rows
        .iter()
        .flat_map(|r| prepared.iter().map(move |p| (r, p)))
        .collect();
    let results: Vec<Result<ResultLine, HarnessError>> = jobs
        .par_iter()
        .map(|(r, p)| evaluate(r, p, trim))
        .collect();

    let mut lines = Vec::with_capacity(results.len());
    for ((r, p), res) in jobs.iter().zip(results) {
        match res {
            Ok(l) => lines.push(l),
            Err(e) => {
                log::warn!("row {} file {}: {e}", r.id, p.id);
                skipped.push(format!("row {} file {}: {e}", r.id, p.id));
            }
        }
    }
    lines.sort_by(|a, b| (&a.row, &a.file).cmp(&(&b.row, &b.file)));
    let mut audits: Vec<(String, LatencyAudit)> =
        rows.into_iter().map(|r| (r.id, r.audit)).collect();
    audits.sort_by(|a, b| a.0.cmp(&b.0));

    let report = ExperimentReport {
        lines,
        audits,
        skipped,
    };
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("report.csv"), report.to_csv())?;
    fs::write(out_dir.join("summary.csv"), report.summary_csv())?;
    Ok(report)
}

fn evaluate(row: &RowSetup, file: &Prepared, trim: usize) -> Result<ResultLine, HarnessError> {
    let cfg = &row.spec.config;
    let rate = file.clean.sample_rate;
    if rate != cfg.sample_rate {
        return Err(HarnessError::RateMismatch(rate, cfg.sample_rate));
    }
    let len = file.clean.len();
    if len <= 2 * trim {
        return Err(HarnessError::Pipeline(format!("file shorter than {} samples", 2 * trim + 1)));
    }
    let out = row.spec.run(&file.mixture, Some(&file.clean))?;
    let range = trim..len - trim;
    let reference = &file.clean.samples[range.clone()];
    let (iwin, owin) = match cfg.mode {
        Mode::Fbe => (None, None),
        _ => (
            Some(cfg.samples_to_ms(cfg.analysis_len)),
            Some(cfg.samples_to_ms(cfg.synthesis_len)),
        ),
    };
    Ok(ResultLine {
        row: row.id.clone(),
        file: file.id.clone(),
        iwin_ms: iwin,
        owin_ms: owin,
        declared_ms: row.audit.declared.total_ms,
        measured_ms: cfg.samples_to_ms(row.audit.measured),
        si_sdr_in: si_sdr(&file.mixture.samples[range.clone()], reference)?,
        si_sdr_out: si_sdr(&out.samples[range.clone()], reference)?,
        snr_out: snr(&out.samples[range.clone()], reference)?,
        lsd_out: log_spectral_distance(&out.samples[range], reference, &metric_config(rate))?,
        macs_rel: Ratio::new(u64::from(rate), 100 * cfg.hop as u64),
    })
}
