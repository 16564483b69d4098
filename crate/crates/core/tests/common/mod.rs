//! Slow, direct reference implementations used as oracles.
#![allow(dead_code)]

use num_complex::Complex64;

/// Same constant-window rule as the library: variance at most 1e-12 of
/// the window energy.
fn is_constant(var: f64, energy: f64) -> bool {
    var <= 1e-12 * energy || var == 0.0
}

fn centered(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = c.iter().map(|v| v * v).sum();
    let energy = x.iter().map(|v| v * v).sum();
    (c, var, energy)
}

/// Two-pass Pearson correlation of two equal-length vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ca, va, ea) = centered(a);
    let (cb, vb, eb) = centered(b);
    if is_constant(va, ea) || is_constant(vb, eb) {
        return 0.0;
    }
    let num: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
    (num / (va * vb).sqrt()).clamp(-1.0, 1.0)
}

/// Template correlation at every window start.
pub fn naive_cross_corr(x: &[f64], tmpl: &[f64]) -> Vec<f64> {
    let len = tmpl.len();
    (0..=x.len() - len).map(|t| pearson(&x[t..t + len], tmpl)).collect()
}

/// Symmetric autocorrelation at every center `t` in `h..len-h`.
pub fn naive_sa(x: &[f64], h: usize) -> Vec<f64> {
    (h..x.len() - h)
        .map(|t| {
            let fwd: Vec<f64> = (1..=h).map(|k| x[t + k]).collect();
            let back: Vec<f64> = (1..=h).map(|k| x[t - k]).collect();
            pearson(&fwd, &back)
        })
        .collect()
}

pub fn naive_sd(x: &[f64], h: usize) -> Vec<f64> {
    (h..x.len() - h)
        .map(|t| (1..=h).map(|k| (x[t + k] - x[t - k]).abs()).sum())
        .collect()
}

pub fn naive_sd_q(b: &[u8], h: usize) -> Vec<f64> {
    (h..b.len() - h)
        .map(|t| (1..=h).filter(|&k| b[t + k] != b[t - k]).count() as f64)
        .collect()
}

pub fn naive_sa_q(b: &[u8], h: usize) -> Vec<f64> {
    (h..b.len() - h)
        .map(|t| (1..=h).filter(|&k| b[t + k] == b[t - k]).count() as f64)
        .collect()
}

pub fn naive_similarity(b: &[u8], tmpl: &[u8]) -> Vec<f64> {
    let len = tmpl.len();
    (0..=b.len() - len)
        .map(|t| {
            let same = (0..len).filter(|&i| b[t + i] == tmpl[i]).count() as f64;
            (2.0 * same - len as f64) / len as f64
        })
        .collect()
}

/// The 127-chip sequence built from a shift register with taps 0 and 4.
pub fn lfsr_pss(nid2: usize) -> Vec<f64> {
    let mut reg = [0u8, 1, 1, 0, 1, 1, 1];
    let mut x = Vec::with_capacity(127);
    for _ in 0..127 {
        x.push(reg[0]);
        let next = reg[0] ^ reg[4];
        reg.rotate_left(1);
        reg[6] = next;
    }
    (0..127)
        .map(|n| 1.0 - 2.0 * f64::from(x[(n + 43 * nid2) % 127]))
        .collect()
}

/// Direct O(N^2) inverse DFT with 1/N scaling.
pub fn naive_idft(spec: &[Complex64]) -> Vec<Complex64> {
    let n = spec.len();
    (0..n)
        .map(|t| {
            spec.iter()
                .enumerate()
                .map(|(k, &v)| {
                    v * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64)
                })
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// Small deterministic generator for oracle inputs.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    pub fn unit(&mut self) -> f64 {
        self.next_u64() as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn signal(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.unit()).collect()
    }

    pub fn bits(&mut self, len: usize) -> Vec<u8> {
        (0..len).map(|_| (self.next_u64() & 1) as u8).collect()
    }
}
