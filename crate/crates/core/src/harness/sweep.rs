use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_trial, ExperimentConfig, Point, TrialContext, TrialRecord};
use crate::detect::Method;
use crate::error::{Error, Result};

/// One attempt as written to `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub method: Method,
    pub nid2: u8,
    pub rate_hz: f64,
    pub snr_db: f64,
    pub trial: usize,
    pub error_us: f64,
    pub delay_us: f64,
    pub success: bool,
    pub ops: Option<u64>,
    pub cfo_epsilon: f64,
    pub attempt: usize,
}

impl TrialRow {
    fn from_record(rec: &TrialRecord) -> Vec<TrialRow> {
        (0..rec.errors_us.len())
            .map(|a| TrialRow {
                method: rec.point.method,
                nid2: rec.point.nid2.get(),
                rate_hz: rec.point.tag_rate_hz,
                snr_db: rec.point.snr_db,
                trial: rec.trial,
                error_us: rec.errors_us[a],
                delay_us: rec.delays_us[a],
                success: rec.success[a],
                ops: rec.ops,
                cfo_epsilon: rec.point.cfo_epsilon,
                attempt: a,
            })
            .collect()
    }
}

/// Per-point statistics, with every parameter needed to redo the point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub index: usize,
    pub method: Method,
    pub nid2: u8,
    pub rate_hz: f64,
    pub snr_db: f64,
    pub cfo_epsilon: f64,
    pub trials: usize,
    pub attempts: usize,
    pub failures: usize,
    pub median_error_us: f64,
    pub q1_error_us: f64,
    pub q3_error_us: f64,
    /// Mean commit delay over successful attempts.
    pub mean_delay_us: f64,
    pub success_rate: f64,
    pub total_ops: Option<u64>,
    pub rho: usize,
    pub smooth_len: usize,
    pub thr_correlation: f64,
    pub thr_symmetry: f64,
    pub thr_sd_gamma: f64,
    pub thr_rise_ratio: f64,
    pub thr_one_template: f64,
    pub rule: String,
    pub adc_bits: Option<u32>,
    pub comparator_window: usize,
}

/// Linear-interpolated quantile of sorted data; infinite neighbours stay
/// infinite instead of turning into NaN.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    if f == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * f
    }
}

/// Summary of one point's trial records.
pub fn summarize(cfg: &ExperimentConfig, index: usize, ctx: &TrialContext, records: &[TrialRecord]) -> PointSummary {
    let mut errors: Vec<f64> = records.iter().flat_map(|r| r.errors_us.iter().copied()).collect();
    errors.sort_by(f64::total_cmp);
    let flags: Vec<bool> = records.iter().flat_map(|r| r.success.iter().copied()).collect();
    let delays: Vec<f64> = records
        .iter()
        .flat_map(|r| r.delays_us.iter().zip(&r.success))
        .filter(|(_, &ok)| ok)
        .map(|(&d, _)| d)
        .collect();
    let successes = flags.iter().filter(|&&s| s).count();
    let p = ctx.point;
    let t = &ctx.params.thresholds;
    PointSummary {
        index,
        method: p.method,
        nid2: p.nid2.get(),
        rate_hz: p.tag_rate_hz,
        snr_db: p.snr_db,
        cfo_epsilon: p.cfo_epsilon,
        trials: records.len(),
        attempts: flags.len(),
        failures: records.iter().filter(|r| r.failure.is_some()).count(),
        median_error_us: quantile(&errors, 0.5),
        q1_error_us: quantile(&errors, 0.25),
        q3_error_us: quantile(&errors, 0.75),
        mean_delay_us: if delays.is_empty() {
            f64::NAN
        } else {
            delays.iter().sum::<f64>() / delays.len() as f64
        },
        success_rate: if flags.is_empty() {
            0.0
        } else {
            successes as f64 / flags.len() as f64
        },
        total_ops: records.iter().map(|r| r.ops).sum(),
        rho: ctx.params.rho,
        smooth_len: ctx.smooth_len,
        thr_correlation: t.correlation,
        thr_symmetry: t.symmetry,
        thr_sd_gamma: t.sd_gamma,
        thr_rise_ratio: t.rise_ratio,
        thr_one_template: t.one_template,
        rule: format!("{:?}", ctx.params.rule),
        adc_bits: if p.method.is_quantized() {
            None
        } else {
            cfg.frontend.adc_bits
        },
        comparator_window: cfg.frontend.comparator_window_rho * ctx.params.rho,
    }
}

/// All trials of one point, in trial order. Trials run in parallel.
pub fn run_point(cfg: &ExperimentConfig, point: Point) -> Result<(TrialContext, Vec<TrialRecord>)> {
    let ctx = TrialContext::new(cfg, point)?;
    let records = (0..cfg.trials_per_point)
        .into_par_iter()
        .map(|t| run_trial(cfg, &ctx, t))
        .collect();
    Ok((ctx, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub summaries: Vec<PointSummary>,
    /// Points skipped because an earlier run already wrote them.
    pub resumed_points: usize,
    pub trials_path: PathBuf,
    pub summary_path: PathBuf,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Data lines (header excluded) in a CSV file, or 0 if it does not exist.
fn csv_rows(path: &Path) -> Result<usize> {
    match File::open(path) {
        Ok(f) => {
            let mut n = 0usize;
            for line in BufReader::new(f).lines() {
                line.map_err(|e| io_err(path, e))?;
                n += 1;
            }
            Ok(n.saturating_sub(1))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(io_err(path, e)),
    }
}

/// Keeps the header and the first `rows` data lines.
fn truncate_csv(path: &Path, rows: usize) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let keep: usize = text.split_inclusive('\n').take(rows + 1).map(str::len).sum();
    let f = OpenOptions::new().write(true).open(path).map_err(|e| io_err(path, e))?;
    f.set_len(keep as u64).map_err(|e| io_err(path, e))
}

fn csv_writer(path: &Path, append: bool) -> Result<csv::Writer<BufWriter<File>>> {
    let file = if append {
        OpenOptions::new().append(true).open(path)
    } else {
        File::create(path)
    }
    .map_err(|e| io_err(path, e))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(!append)
        .from_writer(BufWriter::new(file)))
}

/// Runs every grid point in order and writes `trials` and `summary`
/// files under `out_dir`. With `resume`, points already present in an
/// existing CSV summary are skipped and the trial file is cut back to
/// match it. Output bytes depend only on the configuration.
pub fn sweep(cfg: &ExperimentConfig, out_dir: &Path, format: OutputFormat, resume: bool) -> Result<SweepOutput> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let trials_path = out_dir.join(format!("trials.{ext}"));
    let summary_path = out_dir.join(format!("summary.{ext}"));
    let points = cfg.points();
    let attempts = (cfg.frame_duration_s / cfg.numerology.ssb_period_s).round() as usize;
    let rows_per_point = cfg.trials_per_point * attempts;

    if format == OutputFormat::Json {
        let mut summaries = Vec::with_capacity(points.len());
        let mut rows = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            let (ctx, records) = run_point(cfg, p)?;
            rows.extend(records.iter().flat_map(TrialRow::from_record));
            summaries.push(summarize(cfg, i, &ctx, &records));
        }
        let write = |path: &Path, value: &dyn erased::Json| -> Result<()> {
            let f = File::create(path).map_err(|e| io_err(path, e))?;
            let mut w = BufWriter::new(f);
            value.write(&mut w)?;
            w.flush().map_err(|e| io_err(path, e))
        };
        write(&trials_path, &rows)?;
        write(&summary_path, &summaries)?;
        return Ok(SweepOutput {
            summaries,
            resumed_points: 0,
            trials_path,
            summary_path,
        });
    }

    let done = if resume {
        let done = csv_rows(&summary_path)?.min(points.len());
        if csv_rows(&trials_path)? < done * rows_per_point {
            return Err(Error::Format(format!(
                "{} is shorter than its summary; cannot resume",
                trials_path.display()
            )));
        }
        if done > 0 {
            truncate_csv(&summary_path, done)?;
            truncate_csv(&trials_path, done * rows_per_point)?;
        }
        done
    } else {
        0
    };
    let mut trials_out = csv_writer(&trials_path, done > 0)?;
    let mut summary_out = csv_writer(&summary_path, done > 0)?;
    let mut summaries = Vec::with_capacity(points.len() - done);
    for (i, &p) in points.iter().enumerate().skip(done) {
        let (ctx, records) = run_point(cfg, p)?;
        for row in records.iter().flat_map(TrialRow::from_record) {
            trials_out.serialize(row)?;
        }
        let summary = summarize(cfg, i, &ctx, &records);
        summary_out.serialize(&summary)?;
        trials_out.flush().map_err(|e| io_err(&trials_path, e))?;
        summary_out.flush().map_err(|e| io_err(&summary_path, e))?;
        summaries.push(summary);
    }
    Ok(SweepOutput {
        summaries,
        resumed_points: done,
        trials_path,
        summary_path,
    })
}

mod erased {
    use std::io::Write;

    use serde::Serialize;

    use crate::error::Result;

    /// Object-safe JSON writer so one closure handles both files.
    pub trait Json {
        fn write(&self, w: &mut dyn Write) -> Result<()>;
    }

    impl<T: Serialize> Json for T {
        fn write(&self, w: &mut dyn Write) -> Result<()> {
            serde_json::to_writer_pretty(w, self)?;
            Ok(())
        }
    }
}
