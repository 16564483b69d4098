//! Bit-parallel metrics over comparator output. Bits are packed 64 per
//! word so XOR/XNOR accumulation is a popcount per word.

use super::{MetricKind, MetricTrace};

#[derive(Debug, Clone)]
pub(crate) struct PackedBits {
    words: Vec<u64>,
    len: usize,
}

impl PackedBits {
    pub(crate) fn new<I: IntoIterator<Item = u8>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b != 0 {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        PackedBits { words, len }
    }

    /// Up to 64 bits starting at `start`, LSB first.
    fn chunk(&self, start: usize, count: usize) -> u64 {
        debug_assert!(count <= 64 && start + count <= self.len);
        if count == 0 {
            return 0;
        }
        let (w, off) = (start / 64, start % 64);
        let mut v = self.words[w] >> off;
        if off != 0 && w + 1 < self.words.len() {
            v |= self.words[w + 1] << (64 - off);
        }
        if count < 64 {
            v &= (1u64 << count) - 1;
        }
        v
    }

    /// Number of positions where `self[a..a+count]` and `other[b..b+count]` differ.
    pub(crate) fn mismatches(&self, a: usize, other: &PackedBits, b: usize, count: usize) -> u32 {
        let mut total = 0;
        let mut done = 0;
        while done < count {
            let step = (count - done).min(64);
            total += (self.chunk(a + done, step) ^ other.chunk(b + done, step)).count_ones();
            done += step;
        }
        total
    }
}

/// `SD_Q(t) = sum_{n=1..h} b[t+n] XOR b[t-n]`, one value per full-window center.
pub fn sd_q_metric(bits: &[u8], half: usize) -> MetricTrace {
    MetricTrace {
        kind: MetricKind::Hamming,
        values: sd_q_counts(bits, half).into_iter().map(f64::from).collect(),
        origin: half,
        flagged: Vec::new(),
    }
}

/// `SA_Q(t) = sum_{n=1..h} XNOR(b[t+n], b[t-n])`, i.e. `h - SD_Q(t)`.
pub fn sa_q_metric(bits: &[u8], half: usize) -> MetricTrace {
    let h = half as u32;
    MetricTrace {
        kind: MetricKind::Hamming,
        values: sd_q_counts(bits, half).into_iter().map(|c| f64::from(h - c)).collect(),
        origin: half,
        flagged: Vec::new(),
    }
}

pub(crate) fn sd_q_counts(bits: &[u8], half: usize) -> Vec<u32> {
    let n = bits.len();
    if half == 0 || n < 2 * half + 1 {
        return Vec::new();
    }
    let fwd = PackedBits::new(bits.iter().copied());
    let rev = PackedBits::new(bits.iter().rev().copied());
    // b[t-k] = rev[n-1-t+k], so the backward arm is rev[n-t .. n-t+h].
    (half..n - half)
        .map(|t| fwd.mismatches(t + 1, &rev, n - t, half))
        .collect()
}

/// Normalized Hamming similarity `(matches - mismatches) / len` of every
/// window (start-indexed) against a bit template.
pub fn similarity_trace(bits: &[u8], template: &[u8]) -> MetricTrace {
    let len = template.len();
    let values = if len == 0 || bits.len() < len {
        Vec::new()
    } else {
        let stream = PackedBits::new(bits.iter().copied());
        let tmpl = PackedBits::new(template.iter().copied());
        (0..=bits.len() - len)
            .map(|t| {
                let miss = stream.mismatches(t, &tmpl, 0, len) as f64;
                (len as f64 - 2.0 * miss) / len as f64
            })
            .collect()
    };
    MetricTrace {
        kind: MetricKind::Similarity,
        values,
        origin: 0,
        flagged: Vec::new(),
    }
}
