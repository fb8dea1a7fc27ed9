//! `OBR1` one-bit record files.
//!
//! Layout (little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "OBR1"
//!      4     4  u32 version (= 1)
//!      8     4  u32 n_channels
//!     12     8  u64 n_steps
//!     20     8  f64 dt
//!     28     …  ceil(n_channels * n_steps / 8) payload bytes
//! ```
//!
//! Bits are ordered step-major then channel, MSB first within each byte;
//! a set bit is a `+1` sign.

use std::fs;
use std::path::Path;

use crate::engine::{quantized_from_bit, Filter, MAX_CHANNELS};
use crate::error::{Error, Result};
use crate::feedback::FeedbackPolicy;
use crate::model::{maximally_mixed, DensityMatrix, SystemModel};

pub const MAGIC: &[u8; 4] = b"OBR1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, PartialEq)]
pub struct ObrRecord {
    n_channels: u32,
    n_steps: u64,
    dt: f64,
    payload: Vec<u8>,
}

impl ObrRecord {
    pub fn new(n_channels: u32, dt: f64) -> Self {
        Self {
            n_channels,
            n_steps: 0,
            dt,
            payload: Vec::new(),
        }
    }

    pub fn n_channels(&self) -> u32 {
        self.n_channels
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    fn payload_len(n_channels: u32, n_steps: u64) -> Option<usize> {
        let bits = (n_channels as u64).checked_mul(n_steps)?;
        usize::try_from(bits.div_ceil(8)).ok()
    }

    /// Appends one step of signs (`>= 0` is `+1`).
    pub fn push_step(&mut self, signs: &[i8]) {
        assert_eq!(signs.len(), self.n_channels as usize, "one sign per channel");
        let start = self.n_steps * self.n_channels as u64;
        for (pos, &s) in (start..).zip(signs) {
            let byte = (pos / 8) as usize;
            if byte == self.payload.len() {
                self.payload.push(0);
            }
            if s >= 0 {
                self.payload[byte] |= 0x80 >> (pos % 8);
            }
        }
        self.n_steps += 1;
    }

    pub fn sign(&self, step: u64, channel: u32) -> i8 {
        assert!(step < self.n_steps && channel < self.n_channels, "bit out of range");
        let pos = step * self.n_channels as u64 + channel as u64;
        if self.payload[(pos / 8) as usize] & (0x80 >> (pos % 8)) != 0 {
            1
        } else {
            -1
        }
    }

    pub fn step_signs(&self, step: u64) -> Vec<i8> {
        (0..self.n_channels).map(|c| self.sign(step, c)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.n_channels.to_le_bytes());
        out.extend_from_slice(&self.n_steps.to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic, expected OBR1".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n_channels = u32_at(8);
        let n_steps = u64_at(12);
        let dt = f64::from_bits(u64_at(20));
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Format(format!("invalid time step {dt}")));
        }
        let want = Self::payload_len(n_channels, n_steps)
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        let have = bytes.len() - HEADER_LEN;
        if have < want {
            return Err(Error::Format(format!(
                "truncated payload: {have} bytes, expected {want}"
            )));
        }
        if have > want {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                have - want
            )));
        }
        Ok(Self {
            n_channels,
            n_steps,
            dt,
            payload: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

pub fn write_obr_file(record: &ObrRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, record.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_obr_file(path: impl AsRef<Path>) -> Result<ObrRecord> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ObrRecord::from_bytes(&bytes)
}

/// Re-runs the filter (from the maximally mixed state) over a stored one-bit
/// record with the given model and feedback policy. `observe` sees the
/// estimate after every step, including step 0.
pub fn replay_filter(
    model: &SystemModel,
    policy: &FeedbackPolicy,
    record: &ObrRecord,
    mut observe: impl FnMut(u64, &DensityMatrix),
) -> Result<Filter> {
    let n = record.n_channels() as usize;
    if n != model.n_channels() || n > MAX_CHANNELS {
        return Err(Error::Config(format!(
            "record has {n} channels, model has {}",
            model.n_channels()
        )));
    }
    let dt = record.dt();
    let mut filter = Filter::new(maximally_mixed(model.dim()));
    observe(0, filter.state());
    let mut increments = [0.0; MAX_CHANNELS];
    for step in 0..record.n_steps() {
        for (c, inc) in increments.iter_mut().enumerate().take(n) {
            *inc = quantized_from_bit(record.sign(step, c as u32), dt);
        }
        filter.update(model, &increments[..n], dt, policy)?;
        observe(step + 1, filter.state());
    }
    Ok(filter)
}
