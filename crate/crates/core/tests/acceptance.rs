//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line
//! each and exits non-zero if any failed. All tolerances are pinned here.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use symsync::active::cp_cfo_estimate;
use symsync::detect::{
    cross_correlate, quantized_detect, sa_q_metric, sd_detect, sd_metric, sd_q_metric, similarity_trace,
    symmetric_autocorr, Method, PssTemplate, SignalDomain, SyncParams,
};
use symsync::frontend::{
    apply_channel, extract_envelope, quantize_adc, BitStream, ChannelConfig, Envelope, FrequencyOffset,
};
use symsync::harness::{
    ber_experiment, run_point, with_without_sync_ber, BerLink, ExperimentConfig, Modulation, Point, SyncMode,
};
use symsync::resources::{computational_load, count_resources, table1_report, CostTable, TABLE1_RATES_HZ};
use symsync::waveform::{build_downlink_frame, generate_pss_sequence, pss_time_domain, CellSector, NumerologyConfig};

const SYMMETRY_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_CASES: usize = 200;
const ORACLE_MAX_LEN: usize = 2_000;
const COMPLEMENT_CASES: usize = 100;
const NFT_SD_RATIO_MIN: f64 = 87.0;
const SST_SD_RATIO_MIN: f64 = 181.0;
const SA_SD_RATIO_MIN: f64 = 30.0;
const OPERATING_TRIALS: usize = 1_000;
const OPERATING_MEDIAN_MAX_US: f64 = 8.0;
const SD_Q_MEDIAN_RANGE_US: (f64, f64) = (1.0, 4.0);
const LOW_RATE_MEDIAN_MIN_US: f64 = 8.0;
const SECTOR_TRIALS: usize = 300;
const SD_Q_SUCCESS_MIN: f64 = 0.95;
const ONE_TEMPLATE_OWN_MIN: f64 = 0.95;
const ONE_TEMPLATE_OTHER_MAX: f64 = 0.0;
const RISING_EDGE_MAX: f64 = 0.50;
const LOW_SNR_TRIALS: usize = 200;
const LOW_SNR_RATIO_MIN: f64 = 5.0;
const CFO_TOL: f64 = 1e-3;
const BER_TRIALS: usize = 1_000;
const BER_FLOOR: f64 = 1e-3;
const SYNC_GAIN_MIN: f64 = 10.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn config(trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        trials_per_point: trials,
        rng_seed: 2024,
        ..ExperimentConfig::default()
    }
}

/// Per-attempt errors and success flags at one grid point.
fn run(method: Method, nid2: CellSector, rate: f64, snr_db: f64, trials: usize) -> (Vec<f64>, f64) {
    let cfg = config(trials);
    let point = Point {
        method,
        nid2,
        tag_rate_hz: rate,
        snr_db,
        cfo_epsilon: 0.0,
    };
    let (_, records) = run_point(&cfg, point).unwrap();
    let errors: Vec<f64> = records.iter().flat_map(|r| r.errors_us.clone()).collect();
    let flags: Vec<bool> = records.iter().flat_map(|r| r.success.clone()).collect();
    let rate = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
    (errors, rate)
}

fn c1_symmetry() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_mag: f64 = 0.0;
    for fft in [128, 256, 512] {
        let cfg = NumerologyConfig::with_fft_size(fft);
        for s in CellSector::ALL {
            let sym = pss_time_domain(&generate_pss_sequence(s), &cfg).unwrap();
            let p = &sym.samples()[cfg.cp_samples..];
            for n in 1..fft {
                worst = worst.max((p[n] - p[fft - n].conj()).norm());
                worst_mag = worst_mag.max((p[n].norm() - p[fft - n].norm()).abs());
            }
        }
    }
    check(
        worst < SYMMETRY_TOL && worst_mag < SYMMETRY_TOL,
        format!("max |P(n)-P*(N-n)| = {worst:.2e}, max ||P(n)|-|P(N-n)|| = {worst_mag:.2e} (tol {SYMMETRY_TOL:e})"),
    )
}

fn c2_resource_golden() -> Outcome {
    let t = CostTable::default();
    let ff = |m, rho| count_resources(m, rho, &t).unwrap().d_flip_flops;
    let golden = [
        (Method::Nft, 162_387),
        (Method::Sst, 81_765),
        (Method::Sa, 27_255),
        (Method::Sd, 875),
    ];
    let mut bad = Vec::new();
    for (m, want) in golden {
        if ff(m, 36) != want {
            bad.push(format!("{m}@36 = {} != {want}", ff(m, 36)));
        }
    }
    let rows = table1_report(&TABLE1_RATES_HZ).unwrap();
    let mut errata = Vec::new();
    for r in &rows {
        let is_erratum = r.report.method == Method::Nft && r.rate_hz < 5e6;
        match (is_erratum, r.matches_paper) {
            (false, Some(true)) => {}
            (true, Some(false)) => errata.push(format!(
                "{}@{:.2}MHz printed {} computed {}",
                r.report.method,
                r.rate_hz / 1e6,
                r.printed.unwrap().d_flip_flops,
                r.report.d_flip_flops
            )),
            _ => bad.push(format!(
                "{}@{} unexpected diff {:?}",
                r.report.method, r.rate_hz, r.matches_paper
            )),
        }
    }
    check(
        bad.is_empty(),
        format!(
            "rho=36 values and 10 table cells exact; flagged errata: {}; {}",
            errata.join(", "),
            bad.join("; ")
        ),
    )
}

fn c3_headline_ratios() -> Outcome {
    let t = CostTable::default();
    let ff = |m, rho| count_resources(m, rho, &t).unwrap().d_flip_flops as f64;
    let sd128 = ff(Method::Sd, 128);
    let nft = ff(Method::Nft, 128) / sd128;
    let sst = ff(Method::Sst, 256) / sd128;
    let sa = ff(Method::Sa, 128) / sd128;
    let mut budget = Vec::new();
    let mut budget_ok = true;
    for rho in [64, 128, 256] {
        for m in [Method::Sd, Method::SdPlus, Method::Nft, Method::Sst, Method::Sa] {
            let r = count_resources(m, rho, &t).unwrap();
            let want_fit = matches!(m, Method::Sd | Method::SdPlus);
            if r.fits_budget != want_fit {
                budget_ok = false;
                budget.push(format!("{m}@rho={rho} = {} FF", r.d_flip_flops));
            }
        }
    }
    check(
        nft >= NFT_SD_RATIO_MIN && sst >= SST_SD_RATIO_MIN && sa >= SA_SD_RATIO_MIN && budget_ok,
        format!(
            "NFT/SD = {nft:.2} (>= {NFT_SD_RATIO_MIN}), SST@256/SD@128 = {sst:.2} (>= {SST_SD_RATIO_MIN}), SA/SD = {sa:.2} (>= {SA_SD_RATIO_MIN}); budget violations: [{}]",
            budget.join(", ")
        ),
    )
}

fn c4_load_golden() -> Outcome {
    let sd = computational_load(Method::Sd, 250_000, 167, 0).unwrap().total_ops;
    let plus = computational_load(Method::SdPlus, 97_000, 64, 1_000).unwrap().total_ops;
    let full = computational_load(Method::Sd, 97_000, 64, 0).unwrap().total_ops;
    check(
        sd == 41_500_000 && plus == 63_000 && full == 97 * plus,
        format!(
            "SD = {sd} ops, SD+ = {plus} ops, SD/SD+ = {}",
            full as f64 / plus as f64
        ),
    )
}

fn c5_oracles() -> Outcome {
    let mut rng = Lcg(5);
    let mut worst: f64 = 0.0;
    let mut bit_mismatch = 0;
    let env = |x: &[f64]| Envelope::new(x.to_vec(), 1e6, Vec::new()).unwrap();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    for _ in 0..ORACLE_CASES {
        let rho = 4 + rng.below(200);
        let len = rho + 1 + rng.below(ORACLE_MAX_LEN - rho);
        let x = rng.signal(len);
        let p = SyncParams::new(rho, None).unwrap();
        let h = p.half();
        let tmpl = rng.signal(rho);
        let t = PssTemplate::new(CellSector::ALL[0], tmpl.clone(), false);
        worst = worst.max(diff(
            &cross_correlate(&env(&x), &t, &p).unwrap().values,
            &naive_cross_corr(&x, &tmpl),
        ));
        worst = worst.max(diff(
            &symmetric_autocorr(&env(&x), &p).unwrap().values,
            &naive_sa(&x, h),
        ));
        worst = worst.max(diff(&sd_metric(&env(&x), &p).unwrap().values, &naive_sd(&x, h)));
        let b = rng.bits(len);
        if sd_q_metric(&b, h).values != naive_sd_q(&b, h)
            || sa_q_metric(&b, h).values != naive_sa_q(&b, h)
            || similarity_trace(&b, &b[..rho]).values != naive_similarity(&b, &b[..rho])
        {
            bit_mismatch += 1;
        }
    }
    check(
        worst < ORACLE_TOL && bit_mismatch == 0,
        format!("{ORACLE_CASES} cases: max real-domain diff {worst:.2e} (tol {ORACLE_TOL:e}), bit-domain mismatches {bit_mismatch}"),
    )
}

fn c6_complement() -> Outcome {
    let mut rng = Lcg(6);
    let mut broken = 0;
    let mut index_diff = 0;
    for _ in 0..COMPLEMENT_CASES {
        let rho = 4 + 2 * rng.below(100);
        let h = rho / 2;
        let period = 4 * rho + rng.below(400);
        let b = rng.bits(period * 3);
        let sd = sd_q_metric(&b, h).values;
        let sa = sa_q_metric(&b, h).values;
        if sd.iter().zip(&sa).any(|(d, a)| d + a != h as f64) {
            broken += 1;
        }
        let stream = BitStream::from_bits(b, 1e6).unwrap();
        let params = SyncParams::new(rho, Some(period))
            .unwrap()
            .with_domain(SignalDomain::OneBit);
        let centers = |m| {
            quantized_detect(&stream, m, None, &params)
                .unwrap()
                .detections
                .iter()
                .map(|d| d.center)
                .collect::<Vec<_>>()
        };
        if centers(Method::SdQ) != centers(Method::SaQ) {
            index_diff += 1;
        }
    }
    check(
        broken == 0 && index_diff == 0,
        format!(
            "{COMPLEMENT_CASES} bitstreams: identity violations {broken}, detection-index differences {index_diff}"
        ),
    )
}

fn c7_operating_point() -> Outcome {
    let s0 = CellSector::ALL[0];
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [Method::SdQ, Method::NftQ, Method::SstQ, Method::SaQ] {
        let (errors, success) = run(m, s0, 5e6, 15.0, OPERATING_TRIALS);
        let med = median(errors);
        ok &= med <= OPERATING_MEDIAN_MAX_US;
        if m == Method::SdQ {
            ok &= (SD_Q_MEDIAN_RANGE_US.0..=SD_Q_MEDIAN_RANGE_US.1).contains(&med);
        }
        parts.push(format!("{m} {med:.2} us ({:.1}% ok)", 100.0 * success));
    }
    let (errors, _) = run(Method::SdQ, s0, 1e6, 15.0, OPERATING_TRIALS);
    let low = median(errors);
    ok &= low > LOW_RATE_MEDIAN_MIN_US;
    check(
        ok,
        format!(
            "5 MHz/15 dB medians: {} (<= {OPERATING_MEDIAN_MAX_US}, SD_Q in [{}, {}]); 1 MHz SD_Q {low:.2} us (> {LOW_RATE_MEDIAN_MIN_US})",
            parts.join(", "),
            SD_Q_MEDIAN_RANGE_US.0,
            SD_Q_MEDIAN_RANGE_US.1
        ),
    )
}

fn c8_sector_universality() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in CellSector::ALL {
        let (_, sdq) = run(Method::SdQ, s, 5e6, 15.0, SECTOR_TRIALS);
        let (_, one) = run(Method::OneTemplate, s, 5e6, 15.0, SECTOR_TRIALS);
        let (_, edge) = run(Method::RisingEdge, s, 5e6, 15.0, SECTOR_TRIALS);
        ok &= sdq >= SD_Q_SUCCESS_MIN && edge <= RISING_EDGE_MAX;
        ok &= if s.get() == 0 {
            one >= ONE_TEMPLATE_OWN_MIN
        } else {
            one <= ONE_TEMPLATE_OTHER_MAX
        };
        parts.push(format!(
            "nid2={s}: SD_Q {:.1}%, one-template {:.1}%, rising-edge {:.1}%",
            100.0 * sdq,
            100.0 * one,
            100.0 * edge
        ));
    }
    check(ok, parts.join("; "))
}

fn c9_low_snr_ordering() -> Outcome {
    let s0 = CellSector::ALL[0];
    let med = |m| median(run(m, s0, 7.68e6, -5.0, LOW_SNR_TRIALS).0);
    let (nft, sst, sa, sd) = (med(Method::Nft), med(Method::Sst), med(Method::Sa), med(Method::Sd));
    let worst_ratio = sa.min(sd) / nft.max(sst);
    check(
        worst_ratio >= LOW_SNR_RATIO_MIN,
        format!(
            "-5 dB, 7.68 MHz medians: NFT {nft:.2}, SST {sst:.2}, SA {sa:.2}, SD {sd:.2} us; min(SA,SD)/max(NFT,SST) = {worst_ratio:.2} (>= {LOW_SNR_RATIO_MIN})"
        ),
    )
}

fn c10_cfo() -> Outcome {
    let cfg = NumerologyConfig::default();
    let frame = build_downlink_frame(CellSector::ALL[1], 10e-3, &cfg, 3).unwrap();
    let start = frame.annotations()[0].start;
    let with = |eps: f64| {
        apply_channel(
            &frame,
            &ChannelConfig::noiseless().with_cfo(FrequencyOffset::Normalized {
                epsilon: eps,
                scs_hz: cfg.scs_hz,
            }),
        )
    };
    let mut worst_est: f64 = 0.0;
    let mut same = true;
    let rate = 7.68e6;
    let params = SyncParams::for_rate(rate, cfg.scs_hz, cfg.ssb_period_s).unwrap();
    let detect = |w: &symsync::waveform::IqWaveform| {
        let env = quantize_adc(&extract_envelope(w, rate, 7).unwrap(), 12).unwrap();
        sd_detect(&env, &params).unwrap()
    };
    let base = detect(&frame);
    for i in -8..=8 {
        let eps = 0.05 * i as f64;
        let y = with(eps);
        worst_est = worst_est.max((cp_cfo_estimate(&y, &cfg, start).unwrap().epsilon_hat - eps).abs());
        let res = detect(&y);
        same &= res.detections.len() == base.detections.len()
            && res
                .detections
                .iter()
                .zip(&base.detections)
                .all(|(a, b)| a.center == b.center && a.commit_index == b.commit_index && a.nid2 == b.nid2)
            && res.errors_us == base.errors_us;
    }
    check(
        worst_est < CFO_TOL && same,
        format!("|eps| <= 0.4: max estimate error {worst_est:.2e} (tol {CFO_TOL:e}); SD detections identical with and without CFO: {same}"),
    )
}

fn c11_ber() -> Outcome {
    let link = BerLink {
        rng_seed: 2024,
        ..BerLink::default()
    };
    let offsets: Vec<f64> = (0..=10).map(|i| 3.0 * i as f64).collect();
    let mut ok = true;
    let mut crossings = Vec::new();
    for m in Modulation::ALL {
        let recs = ber_experiment(m, &offsets, 15.0, BER_TRIALS, &link).unwrap();
        ok &= recs[0].ber < BER_FLOOR;
        ok &= recs.windows(2).all(|w| w[1].ber >= w[0].ber);
        let cross = recs
            .iter()
            .find(|r| r.ber >= BER_FLOOR)
            .map_or(f64::INFINITY, |r| r.timing_offset_us);
        crossings.push((m, cross));
    }
    let psk16 = crossings.iter().find(|(m, _)| *m == Modulation::Psk16).unwrap().1;
    ok &= crossings.iter().all(|&(m, c)| m == Modulation::Psk16 || c > psk16);
    let sync = ExperimentConfig {
        methods: vec![Method::Sd],
        tag_rates_hz: vec![3.84e6],
        rng_seed: 2024,
        ..ExperimentConfig::default()
    };
    let recs = with_without_sync_ber(Modulation::Qpsk, &[15.0], BER_TRIALS, &link, &sync).unwrap();
    let with = recs.iter().find(|r| r.mode == SyncMode::Synced).unwrap().ber;
    let without = recs.iter().find(|r| r.mode == SyncMode::Unsynced).unwrap().ber;
    ok &= with * SYNC_GAIN_MIN <= without;
    let cross_text: Vec<String> = crossings.iter().map(|(m, c)| format!("{m:?} {c} us")).collect();
    check(
        ok,
        format!(
            "first offset with BER >= {BER_FLOOR:e}: {}; QPSK at 15 dB with SD {with:.2e} vs random offset {without:.2e}",
            cross_text.join(", ")
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("symmetry identity", c1_symmetry),
        ("resource golden values", c2_resource_golden),
        ("headline ratios", c3_headline_ratios),
        ("load golden values", c4_load_golden),
        ("oracle equivalence", c5_oracles),
        ("quantized complement identity", c6_complement),
        ("accuracy at operating point", c7_operating_point),
        ("cell-ID universality", c8_sector_universality),
        ("SNR ordering at -5 dB", c9_low_snr_ordering),
        ("CFO behavior", c10_cfo),
        ("BER properties", c11_ber),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {:>2}", i + 1);
        if !filter.is_empty()
            && !filter.iter().any(|p| {
                name.contains(p.as_str()) || id.trim_end() == format!("criterion {p}") || p == &(i + 1).to_string()
            })
        {
            continue;
        }
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
