use std::collections::VecDeque;

/// Streaming SD: a shift register of `2h + 1` samples that yields
/// `sigma(t)` for the center `t = pushed - 1 - h` once full, plus a
/// running per-period minimum.
#[derive(Debug, Clone)]
pub struct SdStream {
    half: usize,
    period: Option<usize>,
    buf: VecDeque<f64>,
    pushed: usize,
    best: Option<(usize, f64)>,
    committed: Vec<(usize, f64)>,
}

impl SdStream {
    pub fn new(half: usize, period: Option<usize>) -> Self {
        SdStream {
            half,
            period,
            buf: VecDeque::with_capacity(2 * half + 1),
            pushed: 0,
            best: None,
            committed: Vec::new(),
        }
    }

    /// Feeds one sample; returns `sigma` of the newly completed window.
    pub fn push(&mut self, sample: f64) -> Option<f64> {
        let width = 2 * self.half + 1;
        if self.buf.len() == width {
            self.buf.pop_front();
        }
        self.buf.push_back(sample);
        self.pushed += 1;
        if self.buf.len() < width {
            return None;
        }
        let h = self.half;
        let sigma: f64 = (1..=h).map(|n| (self.buf[h + n] - self.buf[h - n]).abs()).sum();
        let center = self.pushed - 1 - h;
        if let Some(p) = self.period {
            if let Some((c, v)) = self.best {
                if center / p != c / p {
                    self.committed.push((c, v));
                    self.best = None;
                }
            }
            if self.best.is_none_or(|(_, v)| sigma < v) {
                self.best = Some((center, sigma));
            }
        }
        Some(sigma)
    }

    /// Center of the most recent `sigma` returned by `push`.
    pub fn last_center(&self) -> Option<usize> {
        (self.pushed > 2 * self.half).then(|| self.pushed - 1 - self.half)
    }

    /// Per-period argmin centers whose period has closed.
    pub fn committed(&self) -> &[(usize, f64)] {
        &self.committed
    }

    /// Closes the running period and returns every per-period minimum.
    pub fn finish(mut self) -> Vec<(usize, f64)> {
        if let Some(b) = self.best.take() {
            self.committed.push(b);
        }
        self.committed
    }
}
