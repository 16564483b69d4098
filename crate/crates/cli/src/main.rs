use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use symsync::detect::Method;
use symsync::frontend::{extract_envelope, quantize_comparator};
use symsync::harness::{
    ber_experiment, sweep, with_without_sync_ber, BerLink, ExperimentConfig, FrontEndConfig, Modulation, OutputFormat,
};
use symsync::io::{envelope_to_csv, write_bits, write_envelope, write_iq, write_sidecar, Sidecar};
use symsync::resources::{table1_report, TABLE1_RATES_HZ};
use symsync::waveform::{build_downlink_frame, CellSector};
use symsync::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "symsync", version, about = "Envelope-domain PSS synchronization experiments")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Write a downlink frame as IQ plus an annotation sidecar; with
    /// --tag-rate also the tag envelope and comparator bits.
    Generate {
        #[arg(long, default_value_t = 0)]
        nid2: u8,
        #[arg(long, default_value_t = 5e-3)]
        duration: f64,
        #[arg(long)]
        tag_rate: Option<f64>,
    },
    /// Run the configured sweep.
    Run {
        /// Continue a partially written CSV sweep.
        #[arg(long)]
        resume: bool,
    },
    /// Flip-flop, multiplier and adder counts per method and rate.
    ReportResources {
        /// Sampling rates in Hz.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
    },
    /// BER against timing offset, or with and without synchronization.
    Ber {
        #[arg(long, value_delimiter = ',', default_values_t = ["bpsk".to_string(), "qpsk".to_string(), "16psk".to_string()])]
        modulation: Vec<String>,
        /// Timing offsets in µs (default 0 to 30 in steps of 3).
        #[arg(long, value_delimiter = ',')]
        offsets: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [15.0])]
        snr: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Compare SD-synchronized and random-offset demodulation.
        #[arg(long)]
        sync: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf, Error> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_table<T: Serialize>(path: &Path, rows: &[T], format: Format) -> Result<(), Error> {
    let mut w = create(path)?;
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(&mut w);
            for r in rows {
                out.serialize(r).map_err(Error::from)?;
            }
            out.flush()?;
        }
        Format::Json => serde_json::to_writer_pretty(&mut w, rows)?,
    }
    w.flush()?;
    Ok(())
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn generate(cli: &Cli, nid2: u8, duration: f64, tag_rate: Option<f64>) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, &cfg)?;
    let sector = CellSector::new(nid2)?;
    let frame = build_downlink_frame(sector, duration, &cfg.numerology, cfg.rng_seed)?;
    write_iq(&mut create(&dir.join("frame.pssw"))?, &frame)?;
    write_sidecar(
        create(&dir.join("frame.json"))?,
        &Sidecar::for_waveform(&frame, Some(sector)),
    )?;
    if let Some(rate) = tag_rate {
        let fe: &FrontEndConfig = &cfg.frontend;
        let env = extract_envelope(&frame, rate, fe.smooth_len(cfg.numerology.sample_rate_hz(), rate))?;
        let rho = cfg.params(Method::SdQ, rate)?.rho;
        let bits = quantize_comparator(&env, fe.comparator(rho))?;
        match cli.format {
            Format::Csv => envelope_to_csv(create(&dir.join("envelope.csv"))?, &env)?,
            Format::Json => serde_json::to_writer(create(&dir.join("envelope.json"))?, env.samples())?,
        }
        write_envelope(&mut create(&dir.join("envelope.pssw"))?, &env)?;
        write_bits(&mut create(&dir.join("bits.pssw"))?, &bits)?;
    }
    println!("wrote frame of {} samples to {}", frame.len(), dir.display());
    Ok(())
}

fn run(cli: &Cli, resume: bool) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, &cfg)?;
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    let out = sweep(&cfg, &dir, format, resume)?;
    for s in &out.summaries {
        println!(
            "{:>3} {:<16} nid2={} rate={:.3} MHz snr={} dB median={:.3} us success={:.3}",
            s.index,
            s.method.as_str(),
            s.nid2,
            s.rate_hz / 1e6,
            s.snr_db,
            s.median_error_us,
            s.success_rate
        );
    }
    println!(
        "{} points ({} resumed); {} and {}",
        out.summaries.len() + out.resumed_points,
        out.resumed_points,
        out.trials_path.display(),
        out.summary_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ResourceRow {
    method: Method,
    rate_hz: f64,
    rho: usize,
    multipliers: u64,
    adders: u64,
    d_flip_flops: u64,
    fits_budget: bool,
    printed_d_flip_flops: Option<u64>,
    matches_paper: Option<bool>,
}

fn report_resources(cli: &Cli, rates: &[f64]) -> Result<(), Error> {
    let rates = if rates.is_empty() {
        TABLE1_RATES_HZ.to_vec()
    } else {
        rates.to_vec()
    };
    let rows: Vec<ResourceRow> = table1_report(&rates)?
        .into_iter()
        .map(|r| ResourceRow {
            method: r.report.method,
            rate_hz: r.rate_hz,
            rho: r.report.rho,
            multipliers: r.report.multipliers,
            adders: r.report.adders,
            d_flip_flops: r.report.d_flip_flops,
            fits_budget: r.report.fits_budget,
            printed_d_flip_flops: r.printed.map(|p| p.d_flip_flops),
            matches_paper: r.matches_paper,
        })
        .collect();
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_table(&dir.join(format!("resources.{}", ext(cli.format))), &rows, cli.format)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match cli.format {
                Format::Csv => {
                    let mut out = csv::Writer::from_writer(&mut lock);
                    for r in &rows {
                        out.serialize(r).map_err(Error::from)?;
                    }
                    out.flush()?;
                }
                Format::Json => {
                    serde_json::to_writer_pretty(&mut lock, &rows)?;
                    writeln!(lock)?;
                }
            }
            Ok(())
        }
    }
}

fn ber(
    cli: &Cli,
    modulations: &[String],
    offsets: &[f64],
    snr: &[f64],
    trials: usize,
    sync: bool,
) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let dir = out_dir(cli, &cfg)?;
    let link = BerLink {
        rng_seed: cfg.rng_seed,
        ..BerLink::default()
    };
    let modulations = modulations
        .iter()
        .map(|m| m.parse())
        .collect::<Result<Vec<Modulation>, Error>>()?;
    if sync {
        let mut sync_cfg = cfg.clone();
        if cli.config.is_none() {
            sync_cfg.methods = vec![Method::Sd];
            sync_cfg.tag_rates_hz = vec![3.84e6];
        }
        let mut rows = Vec::new();
        for &m in &modulations {
            rows.extend(with_without_sync_ber(m, snr, trials, &link, &sync_cfg)?);
        }
        write_table(&dir.join(format!("sync_ber.{}", ext(cli.format))), &rows, cli.format)?;
    } else {
        let offsets = if offsets.is_empty() {
            (0..=10).map(|i| 3.0 * i as f64).collect()
        } else {
            offsets.to_vec()
        };
        let mut rows = Vec::new();
        for &m in &modulations {
            for &s in snr {
                rows.extend(ber_experiment(m, &offsets, s, trials, &link)?);
            }
        }
        write_table(&dir.join(format!("ber.{}", ext(cli.format))), &rows, cli.format)?;
    }
    println!("wrote BER results to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate {
            nid2,
            duration,
            tag_rate,
        } => generate(&cli, *nid2, *duration, *tag_rate),
        Command::Run { resume } => run(&cli, *resume),
        Command::ReportResources { rates } => report_resources(&cli, rates),
        Command::Ber {
            modulation,
            offsets,
            snr,
            trials,
            sync,
        } => ber(&cli, modulation, offsets, snr, *trials, *sync),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
