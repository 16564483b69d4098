use crate::error::{invalid, Result};
use crate::frontend::Envelope;

use super::{MetricKind, MetricTrace, PssTemplate, SyncParams};

/// Relative variance floor under which a window counts as constant.
pub(crate) const ZERO_VARIANCE: f64 = 1e-12;

/// Mean, centered sum of squares and energy of one window, two-pass so
/// short windows of long signals stay exact to rounding.
fn window_stats(w: &[f64]) -> (f64, f64, f64) {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum();
    let energy = w.iter().map(|v| v * v).sum();
    (mean, var, energy)
}

fn is_constant(var: f64, energy: f64) -> bool {
    var <= ZERO_VARIANCE * energy || var == 0.0
}

/// Sliding Pearson correlation of `x` against `tmpl` (window start
/// indexing), plus the indices of zero-variance windows.
pub(crate) fn correlation_trace(x: &[f64], tmpl: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let len = tmpl.len();
    if len == 0 || x.len() < len {
        return (Vec::new(), Vec::new());
    }
    let p_mean = tmpl.iter().sum::<f64>() / len as f64;
    let centered: Vec<f64> = tmpl.iter().map(|p| p - p_mean).collect();
    let p_var: f64 = centered.iter().map(|p| p * p).sum();
    let p_energy: f64 = tmpl.iter().map(|p| p * p).sum();
    let count = x.len() - len + 1;
    if is_constant(p_var, p_energy) {
        return (vec![0.0; count], (0..count).collect());
    }
    let mut flagged = Vec::new();
    let values = (0..count)
        .map(|t| {
            let w = &x[t..t + len];
            let (mean, var, energy) = window_stats(w);
            if is_constant(var, energy) {
                flagged.push(t);
                return 0.0;
            }
            let num: f64 = w.iter().zip(&centered).map(|(s, p)| (s - mean) * p).sum();
            (num / (var * p_var).sqrt()).clamp(-1.0, 1.0)
        })
        .collect();
    (values, flagged)
}

/// Sliding Pearson correlation of the envelope against one template.
pub fn cross_correlate(env: &Envelope, tmpl: &PssTemplate, params: &SyncParams) -> Result<MetricTrace> {
    params.validate()?;
    if env.len() < tmpl.len() {
        return invalid(format!(
            "envelope ({} samples) shorter than template ({})",
            env.len(),
            tmpl.len()
        ));
    }
    let (values, flagged) = correlation_trace(env.samples(), tmpl.values());
    Ok(MetricTrace {
        kind: MetricKind::CrossCorr,
        values,
        origin: 0,
        flagged,
    })
}

/// Pearson correlation between the forward arm `x[t+1..=t+h]` and the
/// mirrored backward arm `x[t-1], .., x[t-h]`, for every center `t`.
pub(crate) fn sym_autocorr_trace(x: &[f64], half: usize) -> (Vec<f64>, Vec<usize>) {
    if half == 0 || x.len() < 2 * half + 1 {
        return (Vec::new(), Vec::new());
    }
    let mut flagged = Vec::new();
    let values = (half..x.len() - half)
        .map(|t| {
            let (ma, va, ea) = window_stats(&x[t + 1..=t + half]);
            let (mb, vb, eb) = window_stats(&x[t - half..t]);
            if is_constant(va, ea) || is_constant(vb, eb) {
                flagged.push(t - half);
                return 0.0;
            }
            let cross: f64 = (1..=half).map(|k| (x[t + k] - ma) * (x[t - k] - mb)).sum();
            (cross / (va * vb).sqrt()).clamp(-1.0, 1.0)
        })
        .collect();
    (values, flagged)
}

pub fn symmetric_autocorr(env: &Envelope, params: &SyncParams) -> Result<MetricTrace> {
    params.validate()?;
    let half = params.half();
    let (values, flagged) = sym_autocorr_trace(env.samples(), half);
    Ok(MetricTrace {
        kind: MetricKind::SymAutocorr,
        values,
        origin: half,
        flagged,
    })
}

/// `sigma(t) = sum_{n=1..h} |x[t+n] - x[t-n]|` for every full-window center.
pub(crate) fn sd_trace(x: &[f64], half: usize) -> Vec<f64> {
    if half == 0 || x.len() < 2 * half + 1 {
        return Vec::new();
    }
    (half..x.len() - half)
        .map(|t| {
            let fwd = &x[t + 1..=t + half];
            let back = x[t - half..t].iter().rev();
            fwd.iter().zip(back).map(|(a, b)| (a - b).abs()).sum()
        })
        .collect()
}

pub fn sd_metric(env: &Envelope, params: &SyncParams) -> Result<MetricTrace> {
    params.validate()?;
    let half = params.half();
    Ok(MetricTrace {
        kind: MetricKind::SdSigma,
        values: sd_trace(env.samples(), half),
        origin: half,
        flagged: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_correlation_is_one() {
        let tmpl: Vec<f64> = (0..40).map(|i| ((i * 7 % 11) as f64).sqrt()).collect();
        let mut x = vec![0.3; 25];
        x.extend(&tmpl);
        x.extend(vec![0.8; 10]);
        let (r, _) = correlation_trace(&x, &tmpl);
        assert!((r[25] - 1.0).abs() < 1e-9);
        let neg: Vec<f64> = {
            let m = tmpl.iter().sum::<f64>() / 40.0;
            tmpl.iter().map(|v| 2.0 * m - v + 5.0).collect()
        };
        let (r, _) = correlation_trace(&neg, &tmpl);
        assert!((r[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_region_is_flagged() {
        let x = vec![0.5; 30];
        let (v, flagged) = sym_autocorr_trace(&x, 5);
        assert!(v.iter().all(|&r| r == 0.0));
        assert_eq!(flagged.len(), v.len());
        let (_, flagged) = correlation_trace(&x, &[1.0, 2.0, 0.5]);
        assert_eq!(flagged.len(), 28);
    }

    #[test]
    fn even_signal_has_zero_sd_everywhere() {
        // S(t+n) = S(t-n) for all t means a constant signal.
        let x = vec![2.5; 50];
        assert!(sd_trace(&x, 6).iter().all(|&v| v == 0.0));
        let sym: Vec<f64> = (0..21).map(|i| ((i as f64) - 10.0).abs().sqrt()).collect();
        assert!(sd_trace(&sym, 10)[0].abs() < 1e-12);
        assert!((sym_autocorr_trace(&sym, 10).0[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trace_lengths() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sin().abs()).collect();
        assert_eq!(sd_trace(&x, 8).len(), 100 - 16);
        assert_eq!(sym_autocorr_trace(&x, 8).0.len(), 100 - 16);
        assert_eq!(correlation_trace(&x, &x[..16]).0.len(), 85);
        assert!(sd_trace(&x[..10], 8).is_empty());
    }

    proptest! {
        #[test]
        fn correlation_is_affine_invariant(
            x in prop::collection::vec(0.0f64..1.0, 60..120),
            a in 0.1f64..10.0,
            b in 0.0f64..5.0,
        ) {
            let tmpl = &x[5..25];
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let (r1, _) = correlation_trace(&x, tmpl);
            let (r2, _) = correlation_trace(&y, tmpl);
            for (p, q) in r1.iter().zip(&r2) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn sd_scales_and_ignores_offset(
            x in prop::collection::vec(0.0f64..1.0, 40..90),
            a in 0.1f64..10.0,
            b in 0.0f64..5.0,
        ) {
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let s1 = sd_trace(&x, 7);
            let s2 = sd_trace(&y, 7);
            for (p, q) in s1.iter().zip(&s2) {
                prop_assert!((a * p - q).abs() < 1e-9 * (1.0 + q.abs()));
            }
        }
    }
}
