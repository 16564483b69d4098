//! File formats: a small little-endian binary container for sample
//! streams, JSON annotation sidecars, `index,value` CSV and detection
//! records.
//!
//! Container layout: magic `PSSW`, version `u16`, sample rate `f64`,
//! sample count `u64`, then the payload. IQ payloads are interleaved
//! `f64` (re, im) pairs, envelopes are `f64` values and bit streams are
//! packed eight per byte, LSB first.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detect::SyncResult;
use crate::error::{Error, Result};
use crate::frontend::{BitStream, Envelope};
use crate::waveform::{Annotation, CellSector, IqWaveform};

pub const MAGIC: [u8; 4] = *b"PSSW";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8;

fn write_header<W: Write>(w: &mut W, rate: f64, count: usize) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&rate.to_le_bytes())?;
    w.write_all(&(count as u64).to_le_bytes())?;
    Ok(())
}

/// Reads the whole container and returns `(rate, count, payload)`.
fn read_container<R: Read>(r: &mut R) -> Result<(f64, usize, Vec<u8>)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < HEADER_LEN || buf[..4] != MAGIC {
        return Err(Error::Format("not a PSSW container".into()));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let rate = f64::from_le_bytes(buf[6..14].try_into().expect("8-byte slice"));
    let count = u64::from_le_bytes(buf[14..22].try_into().expect("8-byte slice"));
    let count = usize::try_from(count).map_err(|_| Error::Format("sample count too large".into()))?;
    Ok((rate, count, buf.split_off(HEADER_LEN)))
}

fn check_payload(payload: &[u8], expected: Option<usize>) -> Result<()> {
    match expected {
        Some(n) if n == payload.len() => Ok(()),
        _ => Err(Error::Format(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            expected.map_or_else(|| "an overflowing size".to_string(), |n| n.to_string())
        ))),
    }
}

fn f64s(payload: &[u8]) -> impl Iterator<Item = f64> + '_ {
    payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
}

pub fn write_iq<W: Write>(w: &mut W, wave: &IqWaveform) -> Result<()> {
    write_header(w, wave.sample_rate_hz(), wave.len())?;
    for v in wave.samples() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads IQ samples; annotations come from the sidecar, if any.
pub fn read_iq<R: Read>(r: &mut R, annotations: Vec<Annotation>) -> Result<IqWaveform> {
    let (rate, count, payload) = read_container(r)?;
    check_payload(&payload, count.checked_mul(16))?;
    let values: Vec<f64> = f64s(&payload).collect();
    let samples = values.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    IqWaveform::new(samples, rate, annotations).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_envelope<W: Write>(w: &mut W, env: &Envelope) -> Result<()> {
    write_header(w, env.sample_rate_hz(), env.len())?;
    for v in env.samples() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_envelope<R: Read>(r: &mut R) -> Result<Envelope> {
    let (rate, count, payload) = read_container(r)?;
    check_payload(&payload, count.checked_mul(8))?;
    Envelope::new(f64s(&payload).collect(), rate, Vec::new()).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_bits<W: Write>(w: &mut W, bits: &BitStream) -> Result<()> {
    write_header(w, bits.sample_rate_hz(), bits.len())?;
    let packed: Vec<u8> = bits
        .bits()
        .chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << i)))
        .collect();
    w.write_all(&packed)?;
    Ok(())
}

pub fn read_bits<R: Read>(r: &mut R) -> Result<BitStream> {
    let (rate, count, payload) = read_container(r)?;
    check_payload(&payload, Some(count.div_ceil(8)))?;
    let bits = (0..count).map(|i| (payload[i / 8] >> (i % 8)) & 1).collect();
    BitStream::from_bits(bits, rate).map_err(|e| Error::Format(e.to_string()))
}

/// Annotation sidecar written next to a waveform container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_rate_hz: f64,
    pub nid2: Option<CellSector>,
    pub pss_centers: Vec<f64>,
    pub annotations: Vec<Annotation>,
}

impl Sidecar {
    pub fn for_waveform(wave: &IqWaveform, nid2: Option<CellSector>) -> Self {
        Sidecar {
            sample_rate_hz: wave.sample_rate_hz(),
            nid2,
            pss_centers: wave.pss_centers(),
            annotations: wave.annotations().to_vec(),
        }
    }
}

pub fn write_sidecar<W: Write>(w: W, sidecar: &Sidecar) -> Result<()> {
    serde_json::to_writer_pretty(w, sidecar)?;
    Ok(())
}

pub fn read_sidecar<R: Read>(r: R) -> Result<Sidecar> {
    Ok(serde_json::from_reader(r)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexValue {
    index: usize,
    value: f64,
}

/// `index,value` CSV with a header row.
pub fn write_series_csv<W: Write>(w: W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (index, value) in values.into_iter().enumerate() {
        out.serialize(IndexValue { index, value })?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `index,value` CSV; indices must run 0, 1, 2, ...
pub fn read_series_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize::<IndexValue>() {
        let row = row?;
        if row.index != out.len() {
            return Err(Error::Format(format!(
                "expected index {}, found {}",
                out.len(),
                row.index
            )));
        }
        out.push(row.value);
    }
    Ok(out)
}

pub fn envelope_to_csv<W: Write>(w: W, env: &Envelope) -> Result<()> {
    write_series_csv(w, env.samples().iter().copied())
}

pub fn bits_to_csv<W: Write>(w: W, bits: &BitStream) -> Result<()> {
    write_series_csv(w, bits.bits().iter().map(|&b| f64::from(b)))
}

/// One detection as a flat record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncRecord {
    pub method: String,
    pub nid2_true: Option<u8>,
    pub nid2_guess: Option<u8>,
    pub center: usize,
    pub error_us: f64,
    pub delay_us: f64,
    pub committed_at: usize,
}

pub fn sync_records(result: &SyncResult, nid2_true: Option<CellSector>) -> Vec<SyncRecord> {
    result
        .detections
        .iter()
        .enumerate()
        .map(|(i, d)| SyncRecord {
            method: result.method.to_string(),
            nid2_true: nid2_true.map(CellSector::get),
            nid2_guess: d.nid2.map(CellSector::get),
            center: d.center,
            error_us: result.errors_us.get(i).copied().unwrap_or(f64::NAN),
            delay_us: result.delays_us.get(i).copied().unwrap_or(f64::NAN),
            committed_at: d.commit_index,
        })
        .collect()
}

pub fn write_records_csv<W: Write>(w: W, records: &[SyncRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_records_json<W: Write>(w: W, records: &[SyncRecord]) -> Result<()> {
    serde_json::to_writer_pretty(w, records)?;
    Ok(())
}
