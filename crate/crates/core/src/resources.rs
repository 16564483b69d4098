//! Closed-form hardware and operation-count models for each detector.
//!
//! Unquantized datapaths are costed in 12-bit multipliers and adders and
//! converted to D flip-flops with a per-unit cost. Quantized datapaths
//! have no multipliers; their flip-flop counts follow a linear model in
//! `rho` fitted to the published figures at 5 MHz.

use serde::{Deserialize, Serialize};

use crate::detect::Method;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub ff_per_multiplier: u64,
    pub ff_per_adder: u64,
    /// Flip-flops available on the target FPGA (AGLN250).
    pub budget_ff: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            ff_per_multiplier: 456,
            ff_per_adder: 25,
            budget_ff: 6144,
        }
    }
}

impl CostTable {
    pub fn validate(&self) -> Result<()> {
        if self.ff_per_multiplier == 0 || self.ff_per_adder == 0 || self.budget_ff == 0 {
            return invalid("cost table entries must be positive");
        }
        Ok(())
    }

    pub fn flip_flops(&self, multipliers: u64, adders: u64) -> u64 {
        multipliers * self.ff_per_multiplier + adders * self.ff_per_adder
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub method: Method,
    pub rho: usize,
    pub multipliers: u64,
    pub adders: u64,
    pub d_flip_flops: u64,
    pub fits_budget: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub method: Method,
    pub n_samples: u64,
    pub rho: usize,
    /// Metric windows actually evaluated (M).
    pub windows_executed: u64,
    /// Total arithmetic operations (Psi).
    pub total_ops: u64,
}

fn check_rho(rho: usize) -> Result<()> {
    if rho < 4 {
        return invalid(format!("rho must be at least 4 (got {rho})"));
    }
    Ok(())
}

/// Multipliers and adders of one Pearson correlator of length `len`.
fn correlator(len: u64) -> (u64, u64) {
    (3 * len + 1, 5 * len - 3)
}

/// Multiplier and adder counts of the unquantized datapath.
fn unit_counts(method: Method, rho: usize) -> Result<(u64, u64)> {
    let r = rho as u64;
    let h = r / 2;
    let counts = match method {
        Method::Nft => {
            let (m, a) = correlator(r);
            (3 * m, 3 * a)
        }
        // Three half-length correlators; the symmetry gate shares them.
        Method::Sst => {
            let (m, a) = correlator(h);
            (3 * m, 3 * a)
        }
        Method::Sa => correlator(h),
        Method::Sd | Method::SdPlus => (0, r - 1),
        Method::OneTemplate => correlator(r),
        other => return invalid(format!("no unquantized resource model for {other}")),
    };
    Ok(counts)
}

/// Hardware cost of a detector at window size `rho`. Quantized methods
/// are routed to [`quantized_resources`].
pub fn count_resources(method: Method, rho: usize, table: &CostTable) -> Result<ResourceReport> {
    table.validate()?;
    check_rho(rho)?;
    if method.is_quantized() {
        return quantized_resources(method, rho, table);
    }
    let (multipliers, adders) = unit_counts(method, rho)?;
    let d_flip_flops = table.flip_flops(multipliers, adders);
    Ok(ResourceReport {
        method,
        rho,
        multipliers,
        adders,
        d_flip_flops,
        fits_budget: d_flip_flops <= table.budget_ff,
    })
}

/// Linear flip-flop model `slope * rho + intercept` for 1-bit datapaths.
/// At `rho = 167` it gives 853 (SD_Q), 855 (SA_Q), 2,900 (SST_Q) and
/// 7,208 (NFT_Q).
pub const QUANTIZED_FF_MODEL: [(Method, u64, u64); 4] = [
    (Method::SdQ, 5, 18),
    (Method::SaQ, 5, 20),
    (Method::SstQ, 17, 61),
    (Method::NftQ, 42, 194),
];

/// Cost of a 1-bit datapath: XOR/XNOR accumulation replaces every
/// multiplier. Adders count the popcount/accumulator stages.
pub fn quantized_resources(method: Method, rho: usize, table: &CostTable) -> Result<ResourceReport> {
    table.validate()?;
    check_rho(rho)?;
    let Some(&(_, slope, intercept)) = QUANTIZED_FF_MODEL.iter().find(|(m, _, _)| *m == method) else {
        return invalid(format!("{method} is not a quantized detector"));
    };
    let r = rho as u64;
    let h = r / 2;
    let adders = match method {
        Method::SdQ | Method::SaQ => h - 1,
        Method::SstQ => 4 * (h - 1),
        _ => 3 * (r - 1),
    };
    let d_flip_flops = slope * r + intercept;
    Ok(ResourceReport {
        method,
        rho,
        multipliers: 0,
        adders,
        d_flip_flops,
        fits_budget: d_flip_flops <= table.budget_ff,
    })
}

/// Operations per window for a correlator of length `len`: `9L - 1`.
fn corr_ops(len: u64) -> u64 {
    9 * len - 1
}

/// Operation count over `n_samples` tag samples. `gated_windows` counts
/// the windows of a gated stage: SST stage-2 evaluations, or the SD+
/// windows spent before the first detection.
pub fn computational_load(method: Method, n_samples: u64, rho: usize, gated_windows: u64) -> Result<LoadReport> {
    check_rho(rho)?;
    let r = rho as u64;
    let h = r / 2;
    let n = n_samples;
    let (windows, ops) = match method {
        Method::Nft | Method::NftQ => (n, n * 3 * corr_ops(r)),
        Method::Sst | Method::SstQ => (n + gated_windows, n * corr_ops(h) + gated_windows * 3 * corr_ops(h)),
        Method::Sa | Method::SaQ => (n, n * corr_ops(h)),
        Method::Sd | Method::SdQ => (n, n * (r - 1)),
        Method::SdPlus => (gated_windows, gated_windows * (r - 1)),
        Method::OneTemplate => (n, n * corr_ops(r)),
        // Two running sums (add + subtract each) and two comparisons.
        Method::RisingEdge => (n, 6 * n),
        other => return invalid(format!("no load model for {other}")),
    };
    Ok(LoadReport {
        method,
        n_samples: n,
        rho,
        windows_executed: windows,
        total_ops: ops,
    })
}

/// A cell of the published resource table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintedCell {
    pub method: Method,
    pub rate_hz: u64,
    pub multipliers: u64,
    pub adders: u64,
    pub d_flip_flops: u64,
}

const fn cell(method: Method, rate_hz: u64, multipliers: u64, adders: u64, d_flip_flops: u64) -> PrintedCell {
    PrintedCell {
        method,
        rate_hz,
        multipliers,
        adders,
        d_flip_flops,
    }
}

/// Values as printed in the published table, errata included.
pub const PRINTED_TABLE: [PrintedCell; 12] = [
    cell(Method::Nft, 1_920_000, 579, 951, 277_299),
    cell(Method::Nft, 3_840_000, 1_155, 1_911, 274_455),
    cell(Method::Nft, 7_680_000, 2_307, 3_831, 1_147_767),
    cell(Method::Sst, 1_920_000, 291, 471, 144_471),
    cell(Method::Sst, 3_840_000, 579, 951, 287_799),
    cell(Method::Sst, 7_680_000, 1_155, 1_911, 574_455),
    cell(Method::Sa, 1_920_000, 97, 157, 48_157),
    cell(Method::Sa, 3_840_000, 193, 317, 95_933),
    cell(Method::Sa, 7_680_000, 385, 637, 191_485),
    cell(Method::Sd, 1_920_000, 0, 63, 1_575),
    cell(Method::Sd, 3_840_000, 0, 127, 3_175),
    cell(Method::Sd, 7_680_000, 0, 255, 6_375),
];

pub const TABLE1_RATES_HZ: [f64; 3] = [1.92e6, 3.84e6, 7.68e6];
pub const TABLE1_METHODS: [Method; 4] = [Method::Nft, Method::Sst, Method::Sa, Method::Sd];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub rate_hz: f64,
    pub report: ResourceReport,
    pub printed: Option<PrintedCell>,
    /// `None` when the table has no entry for this rate.
    pub matches_paper: Option<bool>,
}

/// Method x rate grid with `rho = rate / 30 kHz`, diffed against the
/// printed table.
pub fn table1_report(rates_hz: &[f64]) -> Result<Vec<Table1Row>> {
    let table = CostTable::default();
    let mut rows = Vec::with_capacity(rates_hz.len() * TABLE1_METHODS.len());
    for &rate in rates_hz {
        if !(rate.is_finite() && rate > 0.0) {
            return invalid(format!("invalid sampling rate {rate}"));
        }
        let rho = (rate / 30e3).round() as usize;
        for method in TABLE1_METHODS {
            let report = count_resources(method, rho, &table)?;
            let printed = PRINTED_TABLE
                .iter()
                .find(|c| c.method == method && c.rate_hz == rate.round() as u64)
                .copied();
            let matches_paper = printed.map(|c| {
                c.multipliers == report.multipliers
                    && c.adders == report.adders
                    && c.d_flip_flops == report.d_flip_flops
            });
            rows.push(Table1Row {
                rate_hz: rate,
                report,
                printed,
                matches_paper,
            });
        }
    }
    Ok(rows)
}
