//! IQ-domain synchronization as a UE would do it. Used only as a
//! reference point for the passive detectors.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::detect::{best_of_templates, per_period, Detection, Extreme, Method, SyncResult};
use crate::error::{invalid, Result};
use crate::waveform::{CellSector, IqWaveform, NumerologyConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoEstimate {
    /// CFO normalized to the subcarrier spacing, in (-0.5, 0.5].
    pub epsilon_hat: f64,
    /// Magnitude of the summed CP correlation.
    pub confidence: f64,
}

/// CP-based CFO estimate: the phase of `sum conj(y[n]) y[n+N]` over the
/// cyclic prefix of the symbol starting at `symbol_start`, over 2 pi.
pub fn cp_cfo_estimate(iq: &IqWaveform, cfg: &NumerologyConfig, symbol_start: usize) -> Result<CfoEstimate> {
    cfg.validate()?;
    let n = cfg.fft_size;
    let cp = cfg.cp_samples;
    if cp == 0 {
        return invalid("CFO estimation needs a cyclic prefix");
    }
    if symbol_start + cp + n > iq.len() {
        return invalid(format!(
            "symbol at {symbol_start} with CP {cp} and N {n} exceeds waveform length {}",
            iq.len()
        ));
    }
    let y = iq.samples();
    let sum: Complex64 = (symbol_start..symbol_start + cp).map(|i| y[i].conj() * y[i + n]).sum();
    let mut eps = sum.arg() / (2.0 * std::f64::consts::PI);
    if eps <= -0.5 {
        eps += 1.0;
    }
    Ok(CfoEstimate {
        epsilon_hat: eps,
        confidence: sum.norm(),
    })
}

/// Symbol start with the strongest CP correlation.
fn strongest_cp(y: &[Complex64], n: usize, cp: usize) -> Option<usize> {
    if y.len() < n + cp {
        return None;
    }
    let prod: Vec<Complex64> = (0..y.len() - n).map(|i| y[i].conj() * y[i + n]).collect();
    let mut acc: Complex64 = prod[..cp].iter().sum();
    let mut best = (0, acc.norm());
    for s in 1..=prod.len() - cp {
        acc += prod[s + cp - 1] - prod[s - 1];
        if acc.norm() > best.1 {
            best = (s, acc.norm());
        }
    }
    Some(best.0)
}

fn derotate(y: &[Complex64], epsilon: f64, n: usize) -> Vec<Complex64> {
    let step = -2.0 * std::f64::consts::PI * epsilon / n as f64;
    y.iter()
        .enumerate()
        .map(|(i, v)| v * Complex64::from_polar(1.0, step * i as f64))
        .collect()
}

/// `|sum_n y[t+n] conj(p[n])|` for every start `t`, via FFT.
fn xcorr_mag(y: &[Complex64], p: &[Complex64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let count = y.len() - p.len() + 1;
    let size = (y.len() + p.len()).next_power_of_two();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a = y.to_vec();
    a.resize(size, Complex64::default());
    let mut b = p.to_vec();
    b.resize(size, Complex64::default());
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, q) in a.iter_mut().zip(&b) {
        *x *= q.conj();
    }
    inv.process(&mut a);
    a[..count].iter().map(|v| v.norm() / size as f64).collect()
}

fn window_energy(y: &[Complex64], len: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    for v in y {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v.norm_sqr());
    }
    (0..=y.len() - len).map(|t| prefix[t + len] - prefix[t]).collect()
}

/// UE fine timing: `C(theta, i) = |sum y[theta+n] conj(p_i[n])| / sum |y[theta+n]|^2`
/// against three CP-stripped PSS symbols, best per SSB period. With
/// `correct_cfo` the CFO is first estimated from the strongest CP and
/// removed.
pub fn iq_fine_timing(
    iq: &IqWaveform,
    pss_iq: &[IqWaveform],
    cfg: &NumerologyConfig,
    correct_cfo: bool,
) -> Result<SyncResult> {
    cfg.validate()?;
    if pss_iq.len() != 3 || pss_iq.iter().any(|p| p.len() != cfg.fft_size) {
        return invalid(format!("expected 3 CP-stripped PSS symbols of length {}", cfg.fft_size));
    }
    let n = cfg.fft_size;
    if iq.len() < n {
        return invalid("waveform shorter than one symbol");
    }
    let y = if correct_cfo {
        let start = strongest_cp(iq.samples(), n, cfg.cp_samples).unwrap_or(0);
        let est = cp_cfo_estimate(iq, cfg, start)?;
        derotate(iq.samples(), est.epsilon_hat, n)
    } else {
        iq.samples().to_vec()
    };
    let energy = window_energy(&y, n);
    let mut planner = FftPlanner::new();
    let traces: Vec<Vec<f64>> = pss_iq
        .iter()
        .map(|p| {
            xcorr_mag(&y, p.samples(), &mut planner)
                .into_iter()
                .zip(&energy)
                .map(|(c, e)| if *e > 0.0 { c / e } else { 0.0 })
                .collect()
        })
        .collect();
    let half = n / 2;
    let ts = best_of_templates(&traces, half);
    let detections = per_period(&ts.scores, half, y.len(), cfg.period_samples(), Extreme::Max)
        .into_iter()
        .map(|t| Detection {
            center: t + half,
            nid2: Some(CellSector::ALL[ts.sector[t] as usize]),
            commit_index: t + n - 1,
            score: ts.scores[t],
        })
        .collect();
    let mut res = SyncResult::new(Method::ActiveXcorr, detections, &iq.pss_centers(), iq.sample_rate_hz());
    res.windows = energy.len();
    Ok(res)
}

/// UE timing from the conjugate symmetry of the PSS body:
/// `A(t) = |sum_{n=1}^{N/2-1} y[t+n] y[t-n]| / sum |y|^2`. A CFO only
/// rotates the sum, so its magnitude is unaffected.
pub fn iq_symmetric_timing(iq: &IqWaveform, cfg: &NumerologyConfig) -> Result<SyncResult> {
    cfg.validate()?;
    let n = cfg.fft_size;
    let half = n / 2;
    let y = iq.samples();
    if y.len() < n + 1 {
        return invalid("waveform shorter than one symbol");
    }
    let energy = window_energy(y, n - 1);
    let values: Vec<f64> = (half..y.len() - half)
        .map(|t| {
            let s: Complex64 = (1..half).map(|k| y[t + k] * y[t - k]).sum();
            let e = energy[t + 1 - half];
            if e > 0.0 {
                s.norm() / e
            } else {
                0.0
            }
        })
        .collect();
    let detections = per_period(&values, half, y.len(), cfg.period_samples(), Extreme::Max)
        .into_iter()
        .map(|i| Detection {
            center: i + half,
            nid2: None,
            commit_index: i + n - 1,
            score: values[i],
        })
        .collect();
    let mut res = SyncResult::new(
        Method::ActiveAutocorr,
        detections,
        &iq.pss_centers(),
        iq.sample_rate_hz(),
    );
    res.windows = values.len();
    Ok(res)
}
