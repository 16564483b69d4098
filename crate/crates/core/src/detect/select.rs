//! Decision rules shared by the detectors. Scores are indexed by PSS
//! center: `scores[i]` belongs to center `origin + i`.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Extreme {
    Max,
    Min,
}

impl Extreme {
    /// Strictly better; ties keep the earlier index.
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Extreme::Max => a > b,
            Extreme::Min => a < b,
        }
    }
}

/// Frame-anchored period windows `[kP, (k+1)P)` covering `len` samples.
pub(crate) fn period_windows(len: usize, period: usize) -> impl Iterator<Item = Range<usize>> {
    (0..len.div_ceil(period)).map(move |k| k * period..((k + 1) * period).min(len))
}

/// Trace indices whose center lies in `window`.
pub(crate) fn indices_in(window: &Range<usize>, origin: usize, count: usize) -> Range<usize> {
    let lo = window.start.saturating_sub(origin).min(count);
    let hi = window.end.saturating_sub(origin).min(count);
    lo..hi
}

/// Best trace index inside `range`, earliest on ties.
pub(crate) fn best(scores: &[f64], range: Range<usize>, ext: Extreme) -> Option<usize> {
    let mut out: Option<usize> = None;
    for i in range {
        match out {
            Some(j) if !ext.better(scores[i], scores[j]) => {}
            _ => out = Some(i),
        }
    }
    out
}

/// Best index per period window, as trace indices.
pub(crate) fn per_period(scores: &[f64], origin: usize, len: usize, period: usize, ext: Extreme) -> Vec<usize> {
    period_windows(len, period)
        .filter_map(|w| best(scores, indices_in(&w, origin, scores.len()), ext))
        .collect()
}

/// Indices that pass `accept` and are the (earliest) extreme within
/// `radius` on either side.
pub(crate) fn peaks(scores: &[f64], radius: usize, ext: Extreme, accept: impl Fn(f64) -> bool) -> Vec<usize> {
    let n = scores.len();
    (0..n)
        .filter(|&i| accept(scores[i]))
        .filter(|&i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(n);
            (lo..hi).all(|j| {
                if j < i {
                    ext.better(scores[i], scores[j])
                } else {
                    !ext.better(scores[j], scores[i])
                }
            })
        })
        .collect()
}
